//! Ordinary least squares and ridge regression baselines.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{student_t_sf, SpdFactor};
use crate::model::serde_vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Intercept first when one was requested.
    #[serde(with = "serde_vector")]
    pub coefficients: DVector<f64>,
    #[serde(with = "serde_vector")]
    pub std_errors: DVector<f64>,
    #[serde(with = "serde_vector")]
    pub t_values: DVector<f64>,
    #[serde(with = "serde_vector")]
    pub p_values: DVector<f64>,
    pub residual_variance: f64,
    pub include_intercept: bool,
}

impl OlsFit {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let (intercept, slopes) = if self.include_intercept {
            (self.coefficients[0], self.coefficients.rows(1, self.coefficients.len() - 1))
        } else {
            (0.0, self.coefficients.rows(0, self.coefficients.len()))
        };
        intercept + slopes.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

fn check_shapes(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, response has {}",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression inputs".into()));
    }
    Ok(())
}

/// Least squares via the normal equations with standard errors, t statistics
/// and two-sided p-values on N - p degrees of freedom.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, include_intercept: bool) -> Result<OlsFit> {
    check_shapes(x, y)?;
    let design = if include_intercept { with_intercept(x) } else { x.clone() };
    let (n, p) = design.shape();
    if n <= p {
        return Err(Error::Domain(format!("need more rows ({n}) than coefficients ({p})")));
    }
    let xtx = design.tr_mul(&design);
    let factor = SpdFactor::new(&xtx).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::RankDeficient,
        other => other,
    })?;
    let coefficients = factor.solve(&design.tr_mul(y));
    let residuals = y - &design * &coefficients;
    let dof = (n - p) as f64;
    let residual_variance = residuals.norm_squared() / dof;
    let inverse = factor.inverse();

    let std_errors = DVector::from_fn(p, |j, _| (residual_variance * inverse[(j, j)]).max(0.0).sqrt());
    let t_values = DVector::from_fn(p, |j, _| {
        let (b, se) = (coefficients[j], std_errors[j]);
        if se > 0.0 {
            b / se
        } else if b == 0.0 {
            0.0
        } else {
            b.signum() * f64::INFINITY
        }
    });
    let mut p_values = DVector::zeros(p);
    for j in 0..p {
        let t = t_values[j].abs();
        p_values[j] = if t.is_infinite() {
            0.0
        } else {
            (2.0 * student_t_sf(t, dof)?).min(1.0)
        };
    }
    Ok(OlsFit {
        coefficients,
        std_errors,
        t_values,
        p_values,
        residual_variance,
        include_intercept,
    })
}

/// Ridge coefficients (XᵀX + λI)⁻¹Xᵀy, no intercept.
pub fn ridge_fit(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    check_shapes(x, y)?;
    if !(lambda >= 0.0) || lambda.is_infinite() {
        return Err(Error::Domain(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    let d = x.ncols();
    let system = x.tr_mul(x) + DMatrix::<f64>::identity(d, d) * lambda;
    Ok(SpdFactor::new(&system)?.solve(&x.tr_mul(y)))
}

/// Ridge fit with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub intercept: f64,
    #[serde(with = "serde_vector")]
    pub coefficients: DVector<f64>,
    pub lambda: f64,
}

impl RidgeModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Centers X and y, fits ridge on the centered data and recovers the intercept.
pub fn ridge_fit_centered(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<RidgeModel> {
    check_shapes(x, y)?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let x_mean = DVector::from_fn(x.ncols(), |j, _| x.column(j).mean());
    let y_mean = y.mean();
    let xc = DMatrix::from_fn(n, x.ncols(), |i, j| x[(i, j)] - x_mean[j]);
    let yc = y.map(|v| v - y_mean);
    let coefficients = ridge_fit(&xc, &yc, lambda)?;
    Ok(RidgeModel {
        intercept: y_mean - x_mean.dot(&coefficients),
        coefficients,
        lambda,
    })
}

/// Writes an OLS coefficient table with columns item, estimate, std_error, t_value, p_value.
pub fn write_ols_csv<W: Write>(out: W, fit: &OlsFit, feature_names: &[String]) -> Result<()> {
    let mut items: Vec<&str> = Vec::with_capacity(fit.coefficients.len());
    if fit.include_intercept {
        items.push("(Intercept)");
    }
    items.extend(feature_names.iter().map(String::as_str));
    if items.len() != fit.coefficients.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {} coefficients",
            items.len(),
            fit.coefficients.len()
        )));
    }
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["item", "estimate", "std_error", "t_value", "p_value"])?;
    for (j, item) in items.iter().enumerate() {
        writer.write_record([
            item.to_string(),
            fit.coefficients[j].to_string(),
            fit.std_errors[j].to_string(),
            fit.t_values[j].to_string(),
            fit.p_values[j].to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
