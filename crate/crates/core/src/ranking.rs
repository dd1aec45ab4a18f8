//! Feature and group importance from a fitted variational posterior.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::VariationalPosterior;

/// A name and its importance score.
pub type Ranked = (String, f64);

fn sort_descending(mut scored: Vec<(usize, String, f64)>) -> Vec<Ranked> {
    // Stable sort keeps input order on ties.
    scored.sort_by(|a, b| b.2.total_cmp(&a.2));
    scored.into_iter().map(|(_, name, score)| (name, score)).collect()
}

/// Feature score: |Δ_d| measured in units of its prior scale, |Δ_d| · sqrt(e_n / f_{n,d}).
pub fn rank_features(posterior: &VariationalPosterior, feature_names: &[String]) -> Result<Vec<Ranked>> {
    let dim = posterior.dim();
    if feature_names.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{} feature names for {dim} features",
            feature_names.len()
        )));
    }
    let scored = (0..dim)
        .map(|d| {
            let score = posterior.delta_mean[d].abs() * (posterior.e_n / posterior.f_n[d]).sqrt();
            (d, feature_names[d].clone(), score)
        })
        .collect();
    Ok(sort_descending(scored))
}

/// Group score: distance ‖β_i − Δ‖ of the group mean weights from the population mean.
pub fn rank_groups(posterior: &VariationalPosterior, group_labels: &[String]) -> Result<Vec<Ranked>> {
    let groups = posterior.num_groups();
    if group_labels.len() != groups {
        return Err(Error::DimensionMismatch(format!(
            "{} group labels for {groups} groups",
            group_labels.len()
        )));
    }
    let scored = posterior
        .beta_mean
        .iter()
        .zip(group_labels)
        .enumerate()
        .map(|(i, (beta, label))| (i, label.clone(), (beta - &posterior.delta_mean).norm()))
        .collect();
    Ok(sort_descending(scored))
}

/// Two-column CSV: rank (from 1), name.
pub fn write_ranking_csv<W: Write>(out: W, ranking: &[Ranked]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["rank", "name"])?;
    for (k, (name, _)) in ranking.iter().enumerate() {
        writer.write_record([(k + 1).to_string(), name.clone()])?;
    }
    writer.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Reads names back from a ranking CSV, in rank order.
pub fn read_ranking_csv<R: Read>(input: R) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut rows: Vec<(usize, String)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let rank = record.get(0).unwrap_or_default().parse::<usize>().map_err(|_| Error::Parse {
            line,
            column: "rank".into(),
            message: "rank is not a positive integer".into(),
        })?;
        rows.push((rank, record.get(1).unwrap_or_default().to_string()));
    }
    rows.sort_by_key(|r| r.0);
    Ok(rows.into_iter().map(|r| r.1).collect())
}
