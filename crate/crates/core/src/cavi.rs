//! Coordinate-ascent variational inference for the hierarchical regression.
//!
//! Each `update_*` function returns the exact maximizer of the evidence lower
//! bound over one mean-field factor with every other factor held fixed. A
//! sweep applies them in the order β (all groups), Δ, σ, s, w.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::math::{digamma, ln_gamma, SpdFactor, LN_2PI};
use crate::model::{Group, GroupedDataset, Hyperparameters, VariationalPosterior};

/// Sufficient statistics of one group: XᵀX, Xᵀy, yᵀy and the row count.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub count: usize,
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
}

impl GroupStats {
    pub fn new(group: &Group) -> Self {
        Self {
            count: group.len(),
            xtx: group.design.tr_mul(&group.design),
            xty: group.design.tr_mul(&group.response),
            yty: group.response.norm_squared(),
        }
    }

    /// ‖y - Xβ‖² from the sufficient statistics, clamped at zero.
    pub fn residual_sum_of_squares(&self, beta: &DVector<f64>) -> f64 {
        (self.yty - 2.0 * beta.dot(&self.xty) + beta.dot(&(&self.xtx * beta))).max(0.0)
    }
}

/// Outcome of [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub posterior: VariationalPosterior,
    /// Number of full update sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    pub final_elbo: f64,
}

/// The eleven expectation terms that make up the evidence lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboTerms {
    pub log_likelihood: f64,
    pub log_prior_beta: f64,
    pub log_prior_delta: f64,
    pub log_prior_sigma: f64,
    pub log_prior_s: f64,
    pub log_prior_w: f64,
    pub entropy_beta: f64,
    pub entropy_delta: f64,
    pub entropy_sigma: f64,
    pub entropy_s: f64,
    pub entropy_w: f64,
}

impl ElboTerms {
    pub fn total(&self) -> f64 {
        self.log_likelihood
            + self.log_prior_beta
            + self.log_prior_delta
            + self.log_prior_sigma
            + self.log_prior_s
            + self.log_prior_w
            + self.entropy_beta
            + self.entropy_delta
            + self.entropy_sigma
            + self.entropy_s
            + self.entropy_w
    }
}

fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // tr(A B) for symmetric B
    a.dot(b)
}

/// E_q ‖y - Xβ‖² = ‖y - X m‖² + tr(XᵀX S).
fn expected_sq_error(group: &Group, stats: &GroupStats, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let residual = &group.response - &group.design * mean;
    residual.norm_squared() + trace_product(&stats.xtx, cov)
}

/// Optimal q(β_i) from sufficient statistics:
/// Λ = E[σ] XᵀX + E[s] I, mean = Λ⁻¹ (E[σ] Xᵀy + E[s] E[Δ]), cov = Λ⁻¹.
pub fn update_beta_stats(stats: &GroupStats, state: &VariationalPosterior) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dim = state.dim();
    let noise = state.noise_precision();
    let prior = state.group_precision();
    let precision = &stats.xtx * noise + DMatrix::<f64>::identity(dim, dim) * prior;
    let rhs = &stats.xty * noise + &state.delta_mean * prior;
    let factor = SpdFactor::new(&precision)?;
    Ok((factor.solve(&rhs), factor.inverse()))
}

/// Optimal q(β_i) for one group.
pub fn update_beta(group: &Group, state: &VariationalPosterior) -> Result<(DVector<f64>, DMatrix<f64>)> {
    update_beta_stats(&GroupStats::new(group), state)
}

/// Optimal q(Δ). The precision is diagonal: λ_d = C E[s] + E[w_d].
pub fn update_delta(state: &VariationalPosterior, hyper: &Hyperparameters) -> (DVector<f64>, DMatrix<f64>) {
    let dim = state.dim();
    let groups = state.num_groups() as f64;
    let es = state.group_precision();
    let beta_sum = state
        .beta_mean
        .iter()
        .fold(DVector::<f64>::zeros(dim), |acc, b| acc + b);
    let mut mean = DVector::zeros(dim);
    let mut cov = DMatrix::zeros(dim, dim);
    for d in 0..dim {
        let ew = state.e_n / state.f_n[d];
        let precision = groups * es + ew;
        mean[d] = (es * beta_sum[d] + ew * hyper.mu0[d]) / precision;
        cov[(d, d)] = 1.0 / precision;
    }
    (mean, cov)
}

fn update_sigma_stats(
    dataset: &GroupedDataset,
    stats: &[GroupStats],
    state: &VariationalPosterior,
    hyper: &Hyperparameters,
) -> (f64, f64) {
    let n: usize = stats.iter().map(|s| s.count).sum();
    let sq_err: f64 = dataset
        .groups
        .iter()
        .zip(stats)
        .enumerate()
        .map(|(i, (g, s))| expected_sq_error(g, s, &state.beta_mean[i], &state.beta_cov[i]))
        .sum();
    (hyper.a0 + 0.5 * n as f64, hyper.b0 + 0.5 * sq_err)
}

/// Optimal q(σ): a_n = a0 + N/2, b_n = b0 + ½ Σ_i E‖y_i - X_i β_i‖².
pub fn update_sigma(dataset: &GroupedDataset, state: &VariationalPosterior, hyper: &Hyperparameters) -> (f64, f64) {
    let stats: Vec<GroupStats> = dataset.groups.iter().map(GroupStats::new).collect();
    update_sigma_stats(dataset, &stats, state, hyper)
}

/// Optimal q(s): c_n = c0 + CD/2,
/// d_n = d0 + ½ (Σ_i ‖m_i - m_Δ‖² + C tr S_Δ + Σ_i tr S_i).
pub fn update_s(state: &VariationalPosterior, hyper: &Hyperparameters) -> (f64, f64) {
    let groups = state.num_groups() as f64;
    let dim = state.dim() as f64;
    let spread: f64 = state
        .beta_mean
        .iter()
        .map(|b| (b - &state.delta_mean).norm_squared())
        .sum();
    let beta_trace: f64 = state.beta_cov.iter().map(|c| c.trace()).sum();
    let d_n = hyper.d0 + 0.5 * (spread + groups * state.delta_cov.trace() + beta_trace);
    (hyper.c0 + 0.5 * groups * dim, d_n)
}

/// Optimal q(w): e_n = e0 + ½ shared by all dimensions,
/// f_{n,d} = f0 + ½ ((m_Δ,d - μ0_d)² + S_Δ,dd).
pub fn update_w(state: &VariationalPosterior, hyper: &Hyperparameters) -> (f64, DVector<f64>) {
    let f_n = DVector::from_fn(state.dim(), |d, _| {
        let centered = state.delta_mean[d] - hyper.mu0[d];
        hyper.f0 + 0.5 * (centered * centered + state.delta_cov[(d, d)])
    });
    (hyper.e0 + 0.5, f_n)
}

fn gamma_log_prior(shape: f64, rate: f64, mean: f64, ln_mean: f64) -> Result<f64> {
    Ok(shape * rate.ln() - ln_gamma(shape)? + (shape - 1.0) * ln_mean - rate * mean)
}

fn gamma_entropy(shape: f64, rate: f64) -> Result<f64> {
    Ok(shape - rate.ln() + ln_gamma(shape)? + (1.0 - shape) * digamma(shape)?)
}

fn gaussian_entropy(cov: &DMatrix<f64>) -> Result<f64> {
    let dim = cov.nrows() as f64;
    Ok(0.5 * dim * (1.0 + LN_2PI) + 0.5 * SpdFactor::new(cov)?.ln_det())
}

fn elbo_terms_stats(
    dataset: &GroupedDataset,
    stats: &[GroupStats],
    state: &VariationalPosterior,
    hyper: &Hyperparameters,
) -> Result<ElboTerms> {
    let dim = state.dim() as f64;
    let groups = state.num_groups() as f64;
    let n: usize = stats.iter().map(|s| s.count).sum();

    let e_sigma = state.noise_precision();
    let ln_sigma = digamma(state.a_n)? - state.b_n.ln();
    let e_s = state.group_precision();
    let ln_s = digamma(state.c_n)? - state.d_n.ln();
    let psi_e = digamma(state.e_n)?;

    let sq_err: f64 = dataset
        .groups
        .iter()
        .zip(stats)
        .enumerate()
        .map(|(i, (g, s))| expected_sq_error(g, s, &state.beta_mean[i], &state.beta_cov[i]))
        .sum();
    let log_likelihood = 0.5 * n as f64 * (ln_sigma - LN_2PI) - 0.5 * e_sigma * sq_err;

    let spread: f64 = state
        .beta_mean
        .iter()
        .zip(&state.beta_cov)
        .map(|(m, c)| (m - &state.delta_mean).norm_squared() + c.trace())
        .sum::<f64>()
        + groups * state.delta_cov.trace();
    let log_prior_beta = 0.5 * groups * dim * (ln_s - LN_2PI) - 0.5 * e_s * spread;

    let mut log_prior_delta = 0.0;
    let mut log_prior_w = 0.0;
    let mut entropy_w = 0.0;
    for d in 0..state.dim() {
        let f = state.f_n[d];
        let ew = state.e_n / f;
        let ln_w = psi_e - f.ln();
        let centered = state.delta_mean[d] - hyper.mu0[d];
        log_prior_delta +=
            0.5 * (ln_w - LN_2PI) - 0.5 * ew * (centered * centered + state.delta_cov[(d, d)]);
        log_prior_w += gamma_log_prior(hyper.e0, hyper.f0, ew, ln_w)?;
        entropy_w += gamma_entropy(state.e_n, f)?;
    }

    let entropy_beta = state
        .beta_cov
        .iter()
        .map(gaussian_entropy)
        .sum::<Result<f64>>()?;

    Ok(ElboTerms {
        log_likelihood,
        log_prior_beta,
        log_prior_delta,
        log_prior_sigma: gamma_log_prior(hyper.a0, hyper.b0, e_sigma, ln_sigma)?,
        log_prior_s: gamma_log_prior(hyper.c0, hyper.d0, e_s, ln_s)?,
        log_prior_w,
        entropy_beta,
        entropy_delta: gaussian_entropy(&state.delta_cov)?,
        entropy_sigma: gamma_entropy(state.a_n, state.b_n)?,
        entropy_s: gamma_entropy(state.c_n, state.d_n)?,
        entropy_w,
    })
}

/// Term-by-term evidence lower bound.
pub fn elbo_terms(dataset: &GroupedDataset, state: &VariationalPosterior, hyper: &Hyperparameters) -> Result<ElboTerms> {
    let stats: Vec<GroupStats> = dataset.groups.iter().map(GroupStats::new).collect();
    elbo_terms_stats(dataset, &stats, state, hyper)
}

/// Evidence lower bound 𝓛(q). Fails with `NotPositiveDefinite` if a
/// covariance in `state` is not positive definite.
pub fn compute_elbo(dataset: &GroupedDataset, state: &VariationalPosterior, hyper: &Hyperparameters) -> Result<f64> {
    Ok(elbo_terms(dataset, state, hyper)?.total())
}

fn sweep_stats(
    dataset: &GroupedDataset,
    stats: &[GroupStats],
    state: &mut VariationalPosterior,
    hyper: &Hyperparameters,
) -> Result<()> {
    let frozen: &VariationalPosterior = state;
    let betas = stats
        .par_iter()
        .map(|s| update_beta_stats(s, frozen))
        .collect::<Result<Vec<_>>>()?;
    for (i, (mean, cov)) in betas.into_iter().enumerate() {
        state.beta_mean[i] = mean;
        state.beta_cov[i] = cov;
    }

    let (delta_mean, delta_cov) = update_delta(state, hyper);
    state.delta_mean = delta_mean;
    state.delta_cov = delta_cov;

    let (a_n, b_n) = update_sigma_stats(dataset, stats, state, hyper);
    state.a_n = a_n;
    state.b_n = b_n;

    let (c_n, d_n) = update_s(state, hyper);
    state.c_n = c_n;
    state.d_n = d_n;

    let (e_n, f_n) = update_w(state, hyper);
    state.e_n = e_n;
    state.f_n = f_n;
    Ok(())
}

/// One full sweep of factor updates in the order β, Δ, σ, s, w.
pub fn sweep(dataset: &GroupedDataset, state: &mut VariationalPosterior, hyper: &Hyperparameters) -> Result<()> {
    let stats: Vec<GroupStats> = dataset.groups.iter().map(GroupStats::new).collect();
    sweep_stats(dataset, &stats, state, hyper)
}

/// Runs coordinate ascent from [`VariationalPosterior::initial`] until the ELBO
/// changes by less than `epsilon` between sweeps or `max_iter` sweeps are done.
///
/// `elbo_trace[0]` is the bound at the initial state and `elbo_trace[t]` the
/// bound after sweep `t`. Hitting `max_iter` is reported through
/// `converged = false`, not as an error.
pub fn fit(dataset: &GroupedDataset, hyper: &Hyperparameters) -> Result<FitReport> {
    dataset.validate()?;
    hyper.validate_for(dataset.num_features())?;
    let stats: Vec<GroupStats> = dataset.groups.iter().map(GroupStats::new).collect();

    let mut state = VariationalPosterior::initial(dataset.num_groups(), hyper);
    let mut trace = vec![elbo_terms_stats(dataset, &stats, &state, hyper)?.total()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < hyper.max_iter {
        sweep_stats(dataset, &stats, &mut state, hyper)?;
        iterations += 1;
        let elbo = elbo_terms_stats(dataset, &stats, &state, hyper)?.total();
        let previous = trace[trace.len() - 1];
        trace.push(elbo);
        if (elbo - previous).abs() < hyper.epsilon {
            converged = true;
            break;
        }
    }
    log::debug!("fit finished after {iterations} sweeps (converged: {converged})");

    let final_elbo = trace[trace.len() - 1];
    state.elbo_trace = trace;
    Ok(FitReport {
        posterior: state,
        iterations,
        converged,
        final_elbo,
    })
}
