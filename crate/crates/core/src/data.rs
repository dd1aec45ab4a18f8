//! CSV ingestion, grouping and fold assignment.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math::RandomSource;
use crate::model::{Group, GroupedDataset};

/// Column names of the Turkiye student evaluation file.
pub const TURKIYE_GROUP_COLUMN: &str = "class";
pub const TURKIYE_TARGET_COLUMN: &str = "difficulty";
pub const TURKIYE_DROPPED_COLUMN: &str = "instr";
pub const TURKIYE_EXPECTED_GROUPS: usize = 13;

pub fn turkiye_feature_names() -> Vec<String> {
    let mut names = vec!["nb.repeat".to_string(), "attendance".to_string()];
    names.extend((1..=28).map(|q| format!("Q{q}")));
    names
}

/// A numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularFile {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TabularFile {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Reads a delimited numeric file. Error line numbers count physical lines,
/// with the header on line 1.
pub fn load_csv(path: impl AsRef<Path>, delimiter: u8) -> Result<TabularFile> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(io_err)?;
    if text.trim().is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    parse_csv(text.as_bytes(), delimiter)
}

/// Parses delimited numeric text; see [`load_csv`].
pub fn parse_csv<R: Read>(input: R, delimiter: u8) -> Result<TabularFile> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();
    let header: Vec<String> = match records.next() {
        Some(record) => record?.iter().map(str::to_string).collect(),
        None => return Err(Error::Domain("input has no header row".into())),
    };
    let mut rows = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != header.len() {
            return Err(Error::RaggedRows {
                line,
                found: record.len(),
                expected: header.len(),
            });
        }
        let row = record
            .iter()
            .zip(&header)
            .map(|(cell, column)| {
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    column: column.clone(),
                    message: format!("cannot read {cell:?} as a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(TabularFile { header, rows })
}

/// Which columns hold the group key, the response, and which to ignore.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub group_col: String,
    pub target_col: String,
    pub exclude: Vec<String>,
}

impl ColumnSpec {
    pub fn turkiye() -> Self {
        Self {
            group_col: TURKIYE_GROUP_COLUMN.into(),
            target_col: TURKIYE_TARGET_COLUMN.into(),
            exclude: vec![TURKIYE_DROPPED_COLUMN.into()],
        }
    }
}

/// Grouped view of a table together with its flat (ungrouped) form.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedData {
    pub dataset: GroupedDataset,
    /// All rows in file order.
    pub flat_x: DMatrix<f64>,
    pub flat_y: DVector<f64>,
    /// Group index of every flat row.
    pub row_groups: Vec<usize>,
}

impl GroupedData {
    pub fn num_rows(&self) -> usize {
        self.flat_y.len()
    }

    /// Dataset over the given flat rows. Groups without rows are dropped;
    /// the second value maps every original group to its index in the subset.
    pub fn subset(&self, rows: &[usize]) -> (GroupedDataset, Vec<Option<usize>>) {
        let full = &self.dataset;
        let dim = full.num_features();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); full.num_groups()];
        for &r in rows {
            members[self.row_groups[r]].push(r);
        }
        let mut mapping = vec![None; full.num_groups()];
        let mut groups = Vec::new();
        for (g, rows) in members.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            mapping[g] = Some(groups.len());
            let design = DMatrix::from_fn(rows.len(), dim, |i, j| self.flat_x[(rows[i], j)]);
            let response = DVector::from_fn(rows.len(), |i, _| self.flat_y[rows[i]]);
            groups.push(Group::new(full.group_labels[g].clone(), design, response));
        }
        (GroupedDataset::new(groups, full.feature_names.clone()), mapping)
    }
}

fn format_key(value: f64) -> String {
    if value.fract() == 0.0 && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

/// Groups rows by `spec.group_col`; every remaining non-excluded column is a
/// feature, in header order. Groups are ordered by ascending key and labelled
/// "<group_col> <key>". Excluded columns absent from the table are ignored.
pub fn build_grouped(table: &TabularFile, spec: &ColumnSpec) -> Result<GroupedData> {
    let group_idx = table.column_index(&spec.group_col)?;
    let target_idx = table.column_index(&spec.target_col)?;
    if group_idx == target_idx {
        return Err(Error::Domain("group and target columns must differ".into()));
    }
    let feature_idx: Vec<usize> = (0..table.header.len())
        .filter(|&j| j != group_idx && j != target_idx && !spec.exclude.contains(&table.header[j]))
        .collect();
    if feature_idx.is_empty() {
        return Err(Error::Domain("no feature columns left".into()));
    }
    if table.rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let feature_names: Vec<String> = feature_idx.iter().map(|&j| table.header[j].clone()).collect();

    let mut keys: Vec<f64> = table.rows.iter().map(|r| r[group_idx]).collect();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    let key_index: BTreeMap<u64, usize> = keys.iter().enumerate().map(|(i, k)| (k.to_bits(), i)).collect();

    let n = table.rows.len();
    let flat_x = DMatrix::from_fn(n, feature_idx.len(), |i, j| table.rows[i][feature_idx[j]]);
    let flat_y = DVector::from_fn(n, |i, _| table.rows[i][target_idx]);
    let row_groups: Vec<usize> = table.rows.iter().map(|r| key_index[&r[group_idx].to_bits()]).collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); keys.len()];
    for (r, &g) in row_groups.iter().enumerate() {
        members[g].push(r);
    }
    let groups = members
        .iter()
        .zip(&keys)
        .map(|(rows, &key)| {
            let design = DMatrix::from_fn(rows.len(), feature_idx.len(), |i, j| flat_x[(rows[i], j)]);
            let response = DVector::from_fn(rows.len(), |i, _| flat_y[rows[i]]);
            Group::new(format!("{} {}", spec.group_col, format_key(key)), design, response)
        })
        .collect();
    let dataset = GroupedDataset::new(groups, feature_names);
    dataset.validate()?;
    Ok(GroupedData {
        dataset,
        flat_x,
        flat_y,
        row_groups,
    })
}

/// Maps the Turkiye evaluation table: response `difficulty`, groups by
/// `class`, `instr` dropped, features nb.repeat, attendance, Q1..Q28.
pub fn build_turkiye_dataset(table: &TabularFile) -> Result<GroupedData> {
    for name in [TURKIYE_DROPPED_COLUMN, TURKIYE_GROUP_COLUMN, TURKIYE_TARGET_COLUMN] {
        table.column_index(name)?;
    }
    let expected = turkiye_feature_names();
    for name in &expected {
        table.column_index(name)?;
    }
    let spec = ColumnSpec {
        exclude: table
            .header
            .iter()
            .filter(|h| {
                !expected.contains(h) && h.as_str() != TURKIYE_GROUP_COLUMN && h.as_str() != TURKIYE_TARGET_COLUMN
            })
            .cloned()
            .collect(),
        ..ColumnSpec::turkiye()
    };
    let mut data = build_grouped(table, &spec)?;
    if data.dataset.feature_names != expected {
        let order: Vec<usize> = expected
            .iter()
            .map(|name| data.dataset.feature_names.iter().position(|f| f == name).unwrap())
            .collect();
        data = reorder_features(data, &order);
    }
    if data.dataset.num_groups() != TURKIYE_EXPECTED_GROUPS {
        log::warn!(
            "expected {TURKIYE_EXPECTED_GROUPS} classes, found {}",
            data.dataset.num_groups()
        );
    }
    Ok(data)
}

fn reorder_features(data: GroupedData, order: &[usize]) -> GroupedData {
    let pick = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), order.len(), |i, j| m[(i, order[j])]);
    let groups = data
        .dataset
        .groups
        .iter()
        .map(|g| Group::new(g.label.clone(), pick(&g.design), g.response.clone()))
        .collect();
    let names = order.iter().map(|&j| data.dataset.feature_names[j].clone()).collect();
    GroupedData {
        dataset: GroupedDataset::new(groups, names),
        flat_x: pick(&data.flat_x),
        ..data
    }
}

/// Shuffled partition of `0..n` into `k` folds whose sizes differ by at most one.
/// Indices inside each fold are sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Domain(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::Domain(format!("cannot split {n} rows into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    RandomSource::new(seed).shuffle(&mut order);
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, idx) in order.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Mean squared error after rounding predictions to the nearest integer,
/// halves away from zero.
pub fn rounded_mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Domain(format!(
            "{} predictions for {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Domain("no predictions".into()));
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p.round() - t).powi(2)).sum();
    Ok(sum / pred.len() as f64)
}
