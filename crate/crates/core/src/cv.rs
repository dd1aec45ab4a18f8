//! K-fold cross-validation of the variational model and the baselines.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ols_fit, ridge_fit, ridge_fit_centered, RidgeModel};
use crate::cavi::fit;
use crate::data::{kfold_split, rounded_mse, GroupedData};
use crate::error::{Error, Result};
use crate::model::Hyperparameters;
use crate::predictive::{predict_known_group, predict_new_group};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Vb,
    Ols,
    Ridge,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vb => "vb",
            ModelKind::Ols => "ols",
            ModelKind::Ridge => "ridge",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vb" => Ok(ModelKind::Vb),
            "ols" => Ok(ModelKind::Ols),
            "ridge" => Ok(ModelKind::Ridge),
            other => Err(format!("unknown model {other:?} (expected vb, ols or ridge)")),
        }
    }
}

/// Log-spaced ridge penalties from 1e-3 to 1e3.
pub fn default_ridge_grid() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    /// Variational model settings; `mu0` must match the feature count.
    pub hyper: Hyperparameters,
    /// Intercept for the OLS and ridge baselines.
    pub include_intercept: bool,
    /// z-score features with training-fold statistics.
    pub standardize: bool,
    pub ridge_grid: Vec<f64>,
    pub inner_folds: usize,
}

impl CvOptions {
    pub fn new(hyper: Hyperparameters) -> Self {
        Self {
            folds: 10,
            seed: 0,
            hyper,
            include_intercept: true,
            standardize: false,
            ridge_grid: default_ridge_grid(),
            inner_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model_name: String,
    pub fold_mses: Vec<f64>,
    pub mean_mse: f64,
    pub seed: u64,
}

struct Scaler {
    mean: DVector<f64>,
    sd: DVector<f64>,
}

impl Scaler {
    fn fit(x: &DMatrix<f64>, rows: &[usize]) -> Self {
        let d = x.ncols();
        let n = rows.len() as f64;
        let mean = DVector::from_fn(d, |j, _| rows.iter().map(|&r| x[(r, j)]).sum::<f64>() / n);
        let sd = DVector::from_fn(d, |j, _| {
            let var = rows.iter().map(|&r| (x[(r, j)] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        });
        Self { mean, sd }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[j]) / self.sd[j])
    }
}

fn rows_of(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

fn entries_of(y: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_fn(rows.len(), |i, _| y[rows[i]])
}

fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut held = vec![false; n];
    for &i in fold {
        held[i] = true;
    }
    (0..n).filter(|&i| !held[i]).collect()
}

fn row_values(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

/// Seed for the inner penalty search of outer fold `fold`.
fn inner_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn fit_ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, intercept: bool) -> Result<RidgeModel> {
    if intercept {
        ridge_fit_centered(x, y, lambda)
    } else {
        Ok(RidgeModel {
            intercept: 0.0,
            coefficients: ridge_fit(x, y, lambda)?,
            lambda,
        })
    }
}

/// Picks the penalty with the lowest plain inner-CV squared error; ties go to the smaller penalty.
pub fn select_ridge_lambda(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &[f64],
    folds: usize,
    seed: u64,
    intercept: bool,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Domain("empty ridge grid".into()));
    }
    let splits = kfold_split(x.nrows(), folds, seed)?;
    let mut best = (f64::INFINITY, grid[0]);
    for &lambda in grid {
        let mut sse = 0.0;
        for test in &splits {
            let train = complement(x.nrows(), test);
            let model = fit_ridge(&rows_of(x, &train), &entries_of(y, &train), lambda, intercept)?;
            sse += test
                .iter()
                .map(|&i| (model.predict_row(&row_values(x, i)) - y[i]).powi(2))
                .sum::<f64>();
        }
        let mse = sse / x.nrows() as f64;
        if mse < best.0 {
            best = (mse, lambda);
        }
    }
    Ok(best.1)
}

fn fold_predictions(
    data: &GroupedData,
    model: ModelKind,
    opts: &CvOptions,
    fold: usize,
    test: &[usize],
) -> Result<Vec<f64>> {
    let n = data.num_rows();
    let train = complement(n, test);
    let x = if opts.standardize {
        Scaler::fit(&data.flat_x, &train).apply(&data.flat_x)
    } else {
        data.flat_x.clone()
    };
    match model {
        ModelKind::Vb => {
            let view = GroupedData {
                flat_x: x.clone(),
                ..data.clone()
            };
            let (train_set, mapping) = view.subset(&train);
            let report = fit(&train_set, &opts.hyper)?;
            let post = &report.posterior;
            test.iter()
                .map(|&i| {
                    let xi = DVector::from_iterator(x.ncols(), x.row(i).iter().copied());
                    let pred = match mapping[data.row_groups[i]] {
                        Some(g) => predict_known_group(&xi, g, post)?,
                        None => predict_new_group(&xi, post)?,
                    };
                    Ok(pred.location)
                })
                .collect()
        }
        ModelKind::Ols => {
            let fit = ols_fit(&rows_of(&x, &train), &entries_of(&data.flat_y, &train), opts.include_intercept)?;
            Ok(test.iter().map(|&i| fit.predict_row(&row_values(&x, i))).collect())
        }
        ModelKind::Ridge => {
            let xt = rows_of(&x, &train);
            let yt = entries_of(&data.flat_y, &train);
            let lambda = select_ridge_lambda(
                &xt,
                &yt,
                &opts.ridge_grid,
                opts.inner_folds,
                inner_seed(opts.seed, fold),
                opts.include_intercept,
            )?;
            let model = fit_ridge(&xt, &yt, lambda, opts.include_intercept)?;
            Ok(test.iter().map(|&i| model.predict_row(&row_values(&x, i))).collect())
        }
    }
}

/// Row-wise K-fold cross-validation with rounded-prediction MSE per fold.
/// Folds run in parallel; the report is assembled in fold order.
pub fn run_cv(data: &GroupedData, model: ModelKind, opts: &CvOptions) -> Result<CvReport> {
    if model == ModelKind::Vb {
        opts.hyper.validate_for(data.dataset.num_features())?;
    }
    let folds = kfold_split(data.num_rows(), opts.folds, opts.seed)?;
    let fold_mses = folds
        .par_iter()
        .enumerate()
        .map(|(k, test)| {
            let pred = fold_predictions(data, model, opts, k, test)?;
            let truth: Vec<f64> = test.iter().map(|&i| data.flat_y[i]).collect();
            rounded_mse(&pred, &truth)
        })
        .enumerate()
        .map(|(k, r)| {
            r.map_err(|e| Error::Fold {
                fold: k,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_mse = fold_mses.iter().sum::<f64>() / fold_mses.len() as f64;
    Ok(CvReport {
        model_name: model.name().to_string(),
        fold_mses,
        mean_mse,
        seed: opts.seed,
    })
}

/// Table with one MSE column per report: a row per fold, then the mean.
pub fn write_cv_csv<W: Write>(out: W, reports: &[CvReport]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["fold".to_string()];
    header.extend(reports.iter().map(|r| r.model_name.clone()));
    writer.write_record(&header)?;
    let folds = reports.iter().map(|r| r.fold_mses.len()).max().unwrap_or(0);
    for k in 0..folds {
        let mut record = vec![(k + 1).to_string()];
        record.extend(
            reports
                .iter()
                .map(|r| r.fold_mses.get(k).map_or(String::new(), f64::to_string)),
        );
        writer.write_record(&record)?;
    }
    let mut mean = vec!["mean".to_string()];
    mean.extend(reports.iter().map(|r| r.mean_mse.to_string()));
    writer.write_record(&mean)?;
    writer.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
