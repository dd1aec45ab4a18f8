//! Gibbs sampler for the exact hierarchical model.
//!
//! Every full conditional is conjugate:
//!
//! ```text
//! β_i | ·  ~ N(Λ⁻¹(σ Xᵀy + s Δ), Λ⁻¹),  Λ = σ XᵀX + s I
//! Δ_d | ·  ~ N((s Σ_i β_id + w_d μ0_d) / (C s + w_d), 1 / (C s + w_d))
//! σ   | ·  ~ Gamma(a0 + N/2, b0 + ½ Σ ‖y_i - X_i β_i‖²)
//! s   | ·  ~ Gamma(c0 + CD/2, d0 + ½ Σ ‖β_i - Δ‖²)
//! w_d | ·  ~ Gamma(e0 + ½, f0 + ½ (Δ_d - μ0_d)²)
//! ```
//!
//! The scan order matches the variational sweep.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavi::GroupStats;
use crate::error::{Error, Result};
use crate::math::{RandomSource, SpdFactor};
use crate::model::{GroupedDataset, Hyperparameters};

/// Minimum retained draws accepted by [`summarize`].
pub const MIN_SUMMARY_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_iter: 5000,
            burn_in: 1000,
            thin: 1,
            seed: 0,
        }
    }
}

impl GibbsConfig {
    pub fn retained(&self) -> usize {
        if self.thin == 0 || self.burn_in >= self.n_iter {
            0
        } else {
            (self.n_iter - self.burn_in) / self.thin
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Domain("thin must be at least 1".into()));
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::Domain(format!(
                "burn_in ({}) must be smaller than n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.retained() == 0 {
            return Err(Error::Domain("configuration retains no draws".into()));
        }
        Ok(())
    }
}

/// Current values of all latent variables.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub beta: Vec<DVector<f64>>,
    pub delta: DVector<f64>,
    pub sigma: f64,
    pub s: f64,
    pub w: DVector<f64>,
}

/// Retained draws, one entry per kept iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsRun {
    pub beta_draws: Vec<Vec<DVector<f64>>>,
    pub delta_draws: Vec<DVector<f64>>,
    pub sigma_draws: Vec<f64>,
    pub s_draws: Vec<f64>,
    pub w_draws: Vec<DVector<f64>>,
}

impl GibbsRun {
    fn with_capacity(n: usize) -> Self {
        Self {
            beta_draws: Vec::with_capacity(n),
            delta_draws: Vec::with_capacity(n),
            sigma_draws: Vec::with_capacity(n),
            s_draws: Vec::with_capacity(n),
            w_draws: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, state: &GibbsState) {
        self.beta_draws.push(state.beta.clone());
        self.delta_draws.push(state.delta.clone());
        self.sigma_draws.push(state.sigma);
        self.s_draws.push(state.s);
        self.w_draws.push(state.w.clone());
    }

    pub fn len(&self) -> usize {
        self.sigma_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_draws.is_empty()
    }

    pub fn num_groups(&self) -> usize {
        self.beta_draws.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.delta_draws.first().map_or(0, |d| d.len())
    }

    /// Draws of a single scalar parameter.
    pub fn draws(&self, parameter: Parameter) -> Vec<f64> {
        match parameter {
            Parameter::Beta { group, feature } => self.beta_draws.iter().map(|b| b[group][feature]).collect(),
            Parameter::Delta(d) => self.delta_draws.iter().map(|v| v[d]).collect(),
            Parameter::Sigma => self.sigma_draws.clone(),
            Parameter::S => self.s_draws.clone(),
            Parameter::W(d) => self.w_draws.iter().map(|v| v[d]).collect(),
        }
    }
}

/// A scalar model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameter {
    Beta { group: usize, feature: usize },
    Delta(usize),
    Sigma,
    S,
    W(usize),
}

impl Parameter {
    /// All parameters in reporting order: β (group-major), Δ, σ, s, w.
    pub fn all(num_groups: usize, dim: usize) -> Vec<Parameter> {
        let mut out = Vec::with_capacity(num_groups * dim + 2 * dim + 2);
        for group in 0..num_groups {
            for feature in 0..dim {
                out.push(Parameter::Beta { group, feature });
            }
        }
        out.extend((0..dim).map(Parameter::Delta));
        out.push(Parameter::Sigma);
        out.push(Parameter::S);
        out.extend((0..dim).map(Parameter::W));
        out
    }

    pub fn label(&self, group_labels: &[String], feature_names: &[String]) -> String {
        match *self {
            Parameter::Beta { group, feature } => {
                format!("beta[{}][{}]", group_labels[group], feature_names[feature])
            }
            Parameter::Delta(d) => format!("delta[{}]", feature_names[d]),
            Parameter::Sigma => "sigma".to_string(),
            Parameter::S => "s".to_string(),
            Parameter::W(d) => format!("w[{}]", feature_names[d]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSummary {
    pub parameter: Parameter,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Sampler over precomputed per-group sufficient statistics.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    stats: Vec<GroupStats>,
    hyper: Hyperparameters,
}

impl GibbsSampler {
    pub fn new(dataset: &GroupedDataset, hyper: &Hyperparameters) -> Result<Self> {
        dataset.validate()?;
        hyper.validate_for(dataset.num_features())?;
        Ok(Self {
            stats: dataset.groups.iter().map(GroupStats::new).collect(),
            hyper: hyper.clone(),
        })
    }

    pub fn from_stats(stats: Vec<GroupStats>, hyper: &Hyperparameters) -> Result<Self> {
        hyper.validate()?;
        let dim = hyper.dim();
        if stats.iter().any(|s| s.xty.len() != dim) {
            return Err(Error::DimensionMismatch("group statistics do not match mu0".into()));
        }
        Ok(Self {
            stats,
            hyper: hyper.clone(),
        })
    }

    /// Replaces the sufficient statistics, e.g. after resampling responses.
    pub fn set_stats(&mut self, stats: Vec<GroupStats>) {
        self.stats = stats;
    }

    /// Chain start: zero group weights, Δ = μ0, precisions at their prior means.
    pub fn initial_state(&self) -> GibbsState {
        let h = &self.hyper;
        let dim = h.dim();
        GibbsState {
            beta: vec![DVector::zeros(dim); self.stats.len()],
            delta: h.mu0.clone(),
            sigma: h.a0 / h.b0,
            s: h.c0 / h.d0,
            w: DVector::from_element(dim, h.e0 / h.f0),
        }
    }

    /// One scan over all full conditionals.
    pub fn sweep(&self, state: &mut GibbsState, rng: &mut RandomSource) -> Result<()> {
        let h = &self.hyper;
        let dim = h.dim();
        let groups = self.stats.len();

        for (beta, stats) in state.beta.iter_mut().zip(&self.stats) {
            let precision = &stats.xtx * state.sigma + DMatrix::<f64>::identity(dim, dim) * state.s;
            let factor = SpdFactor::new(&precision)?;
            let mean = factor.solve(&(&stats.xty * state.sigma + &state.delta * state.s));
            *beta = mean + factor.solve_upper(&rng.normal_vector(dim));
        }

        let beta_sum = state.beta.iter().fold(DVector::<f64>::zeros(dim), |acc, b| acc + b);
        for d in 0..dim {
            let precision = groups as f64 * state.s + state.w[d];
            let mean = (state.s * beta_sum[d] + state.w[d] * h.mu0[d]) / precision;
            state.delta[d] = mean + rng.normal() / precision.sqrt();
        }

        let n: usize = self.stats.iter().map(|s| s.count).sum();
        let rss: f64 = self
            .stats
            .iter()
            .zip(&state.beta)
            .map(|(s, b)| s.residual_sum_of_squares(b))
            .sum();
        state.sigma = rng.gamma(h.a0 + 0.5 * n as f64, h.b0 + 0.5 * rss);

        let spread: f64 = state.beta.iter().map(|b| (b - &state.delta).norm_squared()).sum();
        state.s = rng.gamma(h.c0 + 0.5 * (groups * dim) as f64, h.d0 + 0.5 * spread);

        for d in 0..dim {
            let centered = state.delta[d] - h.mu0[d];
            state.w[d] = rng.gamma(h.e0 + 0.5, h.f0 + 0.5 * centered * centered);
        }
        Ok(())
    }

    /// Runs one chain from [`Self::initial_state`].
    pub fn run(&self, cfg: &GibbsConfig, rng: &mut RandomSource) -> Result<GibbsRun> {
        cfg.validate()?;
        let mut state = self.initial_state();
        let mut run = GibbsRun::with_capacity(cfg.retained());
        for it in 0..cfg.n_iter {
            self.sweep(&mut state, rng)?;
            if it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thin == 0 {
                run.push(&state);
            }
        }
        Ok(run)
    }
}

/// Runs a single chain seeded from `cfg.seed`.
pub fn gibbs_run(dataset: &GroupedDataset, hyper: &Hyperparameters, cfg: &GibbsConfig) -> Result<GibbsRun> {
    let sampler = GibbsSampler::new(dataset, hyper)?;
    sampler.run(cfg, &mut RandomSource::new(cfg.seed))
}

/// Runs `chains` independent chains in parallel; chain `k` uses stream `k` of `cfg.seed`.
pub fn gibbs_run_chains(
    dataset: &GroupedDataset,
    hyper: &Hyperparameters,
    cfg: &GibbsConfig,
    chains: usize,
) -> Result<Vec<GibbsRun>> {
    let sampler = GibbsSampler::new(dataset, hyper)?;
    (0..chains as u64)
        .into_par_iter()
        .map(|k| sampler.run(cfg, &mut RandomSource::with_stream(cfg.seed, k)))
        .collect()
}

/// Linear-interpolation quantile of sorted data (R type 7).
pub fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior mean and equal-tailed interval at `level` for every parameter.
pub fn summarize(run: &GibbsRun, level: f64) -> Result<Vec<ParameterSummary>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    if run.len() < MIN_SUMMARY_DRAWS {
        return Err(Error::InsufficientDraws {
            required: MIN_SUMMARY_DRAWS,
            available: run.len(),
        });
    }
    let tail = 0.5 * (1.0 - level);
    Ok(Parameter::all(run.num_groups(), run.dim())
        .into_iter()
        .map(|parameter| {
            let mut draws = run.draws(parameter);
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            draws.sort_by(f64::total_cmp);
            ParameterSummary {
                parameter,
                mean,
                lower: sorted_quantile(&draws, tail),
                upper: sorted_quantile(&draws, 1.0 - tail),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_hyperparameters, Group};

    fn tiny() -> GroupedDataset {
        let g1 = Group::from_rows("a", &[vec![1.0], vec![0.5], vec![-0.4]], vec![1.1, 0.4, -0.6], 1);
        let g2 = Group::from_rows("b", &[vec![0.3], vec![1.2]], vec![0.1, 1.5], 1);
        GroupedDataset::new(vec![g1, g2], vec!["x".into()])
    }

    #[test]
    fn config_validation() {
        assert_eq!(GibbsConfig::default().retained(), 4000);
        let cfg = GibbsConfig {
            n_iter: 10,
            burn_in: 10,
            thin: 1,
            seed: 0,
        };
        assert!(cfg.validate().is_err());
        let cfg = GibbsConfig {
            n_iter: 10,
            burn_in: 2,
            thin: 3,
            seed: 0,
        };
        assert_eq!(cfg.retained(), 2);
        assert!(cfg.validate().is_ok());
        let cfg = GibbsConfig { thin: 0, ..cfg };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn run_keeps_expected_draws_and_is_deterministic() {
        let ds = tiny();
        let hyper = default_hyperparameters(1).unwrap();
        let cfg = GibbsConfig {
            n_iter: 300,
            burn_in: 50,
            thin: 2,
            seed: 9,
        };
        let a = gibbs_run(&ds, &hyper, &cfg).unwrap();
        let b = gibbs_run(&ds, &hyper, &cfg).unwrap();
        assert_eq!(a.len(), 125);
        assert_eq!(a, b);
        assert!(a.sigma_draws.iter().chain(&a.s_draws).all(|&v| v > 0.0));
        assert!(a.w_draws.iter().all(|w| w.iter().all(|&v| v > 0.0)));
    }

    #[test]
    fn chains_are_independent_streams() {
        let ds = tiny();
        let hyper = default_hyperparameters(1).unwrap();
        let cfg = GibbsConfig {
            n_iter: 50,
            burn_in: 10,
            thin: 1,
            seed: 3,
        };
        let chains = gibbs_run_chains(&ds, &hyper, &cfg, 3).unwrap();
        assert_eq!(chains.len(), 3);
        assert_ne!(chains[0], chains[1]);
        let again = gibbs_run_chains(&ds, &hyper, &cfg, 3).unwrap();
        assert_eq!(chains, again);
    }

    fn constant_run(n: usize) -> GibbsRun {
        let mut run = GibbsRun::with_capacity(n);
        let state = GibbsState {
            beta: vec![DVector::from_element(1, 2.5)],
            delta: DVector::from_element(1, -1.0),
            sigma: 3.0,
            s: 4.0,
            w: DVector::from_element(1, 0.5),
        };
        for _ in 0..n {
            run.push(&state);
        }
        run
    }

    #[test]
    fn constant_draws_collapse_interval() {
        let summary = summarize(&constant_run(150), 0.95).unwrap();
        assert_eq!(summary.len(), 1 + 1 + 2 + 1);
        for s in &summary {
            assert_eq!(s.lower, s.mean);
            assert_eq!(s.upper, s.mean);
        }
        assert_eq!(summary[0].mean, 2.5);
    }

    #[test]
    fn too_few_draws() {
        assert!(matches!(
            summarize(&constant_run(99), 0.95),
            Err(Error::InsufficientDraws { available: 99, .. })
        ));
        assert!(summarize(&constant_run(150), 1.0).is_err());
    }

    #[test]
    fn normal_draw_interval() {
        let mut rng = RandomSource::new(1);
        let mut run = constant_run(10_000);
        for v in run.sigma_draws.iter_mut() {
            *v = rng.normal();
        }
        let summary = summarize(&run, 0.95).unwrap();
        let sigma = summary.iter().find(|s| s.parameter == Parameter::Sigma).unwrap();
        assert!((sigma.lower + 1.96).abs() < 0.05, "{}", sigma.lower);
        assert!((sigma.upper - 1.96).abs() < 0.05, "{}", sigma.upper);
    }

    #[test]
    fn quantile_interpolates() {
        let data = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(sorted_quantile(&data, 0.0), 1.0);
        assert_eq!(sorted_quantile(&data, 1.0), 4.0);
        assert!((sorted_quantile(&data, 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn parameter_labels() {
        let groups = vec!["class 1".to_string()];
        let features = vec!["attendance".to_string()];
        let all = Parameter::all(1, 1);
        let labels: Vec<String> = all.iter().map(|p| p.label(&groups, &features)).collect();
        assert_eq!(
            labels,
            ["beta[class 1][attendance]", "delta[attendance]", "sigma", "s", "w[attendance]"]
        );
    }
}
