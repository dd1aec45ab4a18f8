//! Side-by-side posterior summaries of the variational fit and the Gibbs sampler.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::gibbs::{Parameter, ParameterSummary};
use crate::math::{gamma_quantile, normal_quantile};
use crate::model::VariationalPosterior;

/// Means and equal-tailed intervals of the marginals of q at `level`.
pub fn vb_summaries(posterior: &VariationalPosterior, level: f64) -> Result<Vec<ParameterSummary>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    let lo = 0.5 * (1.0 - level);
    let hi = 1.0 - lo;
    let z = normal_quantile(hi)?;
    let gaussian = |parameter, mean: f64, var: f64| {
        let half = z * var.max(0.0).sqrt();
        ParameterSummary {
            parameter,
            mean,
            lower: mean - half,
            upper: mean + half,
        }
    };
    let gamma = |parameter, shape: f64, rate: f64| -> Result<ParameterSummary> {
        Ok(ParameterSummary {
            parameter,
            mean: shape / rate,
            lower: gamma_quantile(lo, shape, rate)?,
            upper: gamma_quantile(hi, shape, rate)?,
        })
    };
    Parameter::all(posterior.num_groups(), posterior.dim())
        .into_iter()
        .map(|p| match p {
            Parameter::Beta { group, feature } => Ok(gaussian(
                p,
                posterior.beta_mean[group][feature],
                posterior.beta_cov[group][(feature, feature)],
            )),
            Parameter::Delta(d) => Ok(gaussian(p, posterior.delta_mean[d], posterior.delta_cov[(d, d)])),
            Parameter::Sigma => gamma(p, posterior.a_n, posterior.b_n),
            Parameter::S => gamma(p, posterior.c_n, posterior.d_n),
            Parameter::W(d) => gamma(p, posterior.e_n, posterior.f_n[d]),
        })
        .collect()
}

/// Summary table with columns parameter, mean, lower, upper.
pub fn write_summary_csv<W: Write>(
    out: W,
    rows: &[ParameterSummary],
    group_labels: &[String],
    feature_names: &[String],
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["parameter", "mean", "lower", "upper"])?;
    for r in rows {
        writer.write_record([
            r.parameter.label(group_labels, feature_names),
            r.mean.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub parameter: String,
    pub vb_mean: f64,
    pub vb_lower: f64,
    pub vb_upper: f64,
    pub gibbs_mean: f64,
    pub gibbs_lower: f64,
    pub gibbs_upper: f64,
}

pub const COMPARE_HEADER: [&str; 7] = [
    "parameter",
    "vb_mean",
    "vb_lower",
    "vb_upper",
    "gibbs_mean",
    "gibbs_lower",
    "gibbs_upper",
];

pub fn compare_rows(
    vb: &[ParameterSummary],
    gibbs: &[ParameterSummary],
    group_labels: &[String],
    feature_names: &[String],
) -> Result<Vec<CompareRow>> {
    if vb.len() != gibbs.len() || vb.iter().zip(gibbs).any(|(a, b)| a.parameter != b.parameter) {
        return Err(Error::DimensionMismatch("summaries cover different parameters".into()));
    }
    Ok(vb
        .iter()
        .zip(gibbs)
        .map(|(v, g)| CompareRow {
            parameter: v.parameter.label(group_labels, feature_names),
            vb_mean: v.mean,
            vb_lower: v.lower,
            vb_upper: v.upper,
            gibbs_mean: g.mean,
            gibbs_lower: g.lower,
            gibbs_upper: g.upper,
        })
        .collect())
}

pub fn write_compare_csv<W: Write>(out: W, rows: &[CompareRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(COMPARE_HEADER)?;
    for r in rows {
        writer.write_record([
            r.parameter.clone(),
            r.vb_mean.to_string(),
            r.vb_lower.to_string(),
            r.vb_upper.to_string(),
            r.gibbs_mean.to_string(),
            r.gibbs_lower.to_string(),
            r.gibbs_upper.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_compare_csv<R: Read>(input: R) -> Result<Vec<CompareRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(COMPARE_HEADER) {
        return Err(Error::Domain(format!("unexpected compare header {header:?}")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let num = |j: usize| -> Result<f64> {
            record[j].parse().map_err(|_| Error::Parse {
                line,
                column: COMPARE_HEADER[j].into(),
                message: format!("cannot read {:?} as a number", &record[j]),
            })
        };
        rows.push(CompareRow {
            parameter: record[0].to_string(),
            vb_mean: num(1)?,
            vb_lower: num(2)?,
            vb_upper: num(3)?,
            gibbs_mean: num(4)?,
            gibbs_lower: num(5)?,
            gibbs_upper: num(6)?,
        });
    }
    Ok(rows)
}
