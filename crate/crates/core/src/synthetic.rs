//! Data simulated from the hierarchical model with known parameters.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math::RandomSource;
use crate::model::{Group, GroupedDataset};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub groups: usize,
    pub rows_per_group: usize,
    pub dim: usize,
    /// Standard deviation of the population mean Δ around zero.
    pub delta_sd: f64,
    /// Standard deviation of group weights around Δ (s = 1 / group_sd²).
    pub group_sd: f64,
    /// Observation noise standard deviation (σ = 1 / noise_sd²).
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            groups: 10,
            rows_per_group: 30,
            dim: 3,
            delta_sd: 1.0,
            group_sd: 0.5,
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

/// Parameters that generated a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub beta: Vec<DVector<f64>>,
    pub delta: DVector<f64>,
    pub sigma: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub dataset: GroupedDataset,
    pub truth: Truth,
}

/// Draws Δ, then each β_i around Δ, then standard-normal designs and noisy responses.
pub fn simulate(spec: &SyntheticSpec) -> Result<Simulated> {
    if spec.groups == 0 || spec.dim == 0 {
        return Err(Error::Domain("need at least one group and one feature".into()));
    }
    for (name, v) in [("delta_sd", spec.delta_sd), ("group_sd", spec.group_sd), ("noise_sd", spec.noise_sd)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    let mut rng = RandomSource::new(spec.seed);
    let d = spec.dim;
    let delta = rng.normal_vector(d) * spec.delta_sd;
    let mut beta = Vec::with_capacity(spec.groups);
    let mut groups = Vec::with_capacity(spec.groups);
    for i in 0..spec.groups {
        let b = &delta + rng.normal_vector(d) * spec.group_sd;
        let x = DMatrix::from_fn(spec.rows_per_group, d, |_, _| rng.normal());
        let noise = rng.normal_vector(spec.rows_per_group) * spec.noise_sd;
        let y = &x * &b + noise;
        groups.push(Group::new(format!("group {}", i + 1), x, y));
        beta.push(b);
    }
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    Ok(Simulated {
        dataset: GroupedDataset::new(groups, names),
        truth: Truth {
            beta,
            delta,
            sigma: spec.noise_sd.powi(-2),
            s: spec.group_sd.powi(-2),
        },
    })
}

/// Writes a dataset as CSV with columns group, <features>, y; group keys count from 1.
pub fn write_dataset_csv<W: Write>(out: W, dataset: &GroupedDataset) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["group".to_string()];
    header.extend(dataset.feature_names.iter().cloned());
    header.push("y".to_string());
    writer.write_record(&header)?;
    for (i, g) in dataset.groups.iter().enumerate() {
        for r in 0..g.len() {
            let mut record = vec![(i + 1).to_string()];
            record.extend(g.design.row(r).iter().map(f64::to_string));
            record.push(g.response[r].to_string());
            writer.write_record(&record)?;
        }
    }
    writer.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
