//! Student-t posterior predictive for known and unseen groups.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::student_t_quantile;
use crate::model::VariationalPosterior;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentTPrediction {
    pub location: f64,
    /// Scale of the t, not its standard deviation.
    pub scale: f64,
    pub dof: f64,
}

fn check_dim(x_star: &DVector<f64>, posterior: &VariationalPosterior) -> Result<()> {
    if x_star.len() != posterior.dim() {
        return Err(Error::DimensionMismatch(format!(
            "x has {} entries, model expects {}",
            x_star.len(),
            posterior.dim()
        )));
    }
    Ok(())
}

/// Prediction for a new row of an observed group.
pub fn predict_known_group(
    x_star: &DVector<f64>,
    group_index: usize,
    posterior: &VariationalPosterior,
) -> Result<StudentTPrediction> {
    check_dim(x_star, posterior)?;
    let groups = posterior.num_groups();
    if group_index >= groups {
        return Err(Error::IndexOutOfRange {
            index: group_index,
            len: groups,
        });
    }
    let cov = &posterior.beta_cov[group_index];
    let variance = posterior.b_n / posterior.a_n + x_star.dot(&(cov * x_star));
    Ok(StudentTPrediction {
        location: x_star.dot(&posterior.beta_mean[group_index]),
        scale: variance.sqrt(),
        dof: 2.0 * posterior.a_n,
    })
}

/// Prediction for a group never seen in training: the weights are drawn
/// around the population mean with the expected population variance.
pub fn predict_new_group(x_star: &DVector<f64>, posterior: &VariationalPosterior) -> Result<StudentTPrediction> {
    check_dim(x_star, posterior)?;
    let variance = posterior.b_n / posterior.a_n
        + posterior.d_n / posterior.c_n * x_star.norm_squared()
        + x_star.dot(&(&posterior.delta_cov * x_star));
    Ok(StudentTPrediction {
        location: x_star.dot(&posterior.delta_mean),
        scale: variance.sqrt(),
        dof: 2.0 * posterior.a_n,
    })
}

/// Central interval holding `level` of the predictive mass.
pub fn predictive_interval(pred: &StudentTPrediction, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    let half = pred.scale * student_t_quantile(0.5 * (1.0 + level), pred.dof)?;
    Ok((pred.location - half, pred.location + half))
}
