//! On-disk form of a fitted model.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cavi::FitReport;
use crate::error::{Error, Result};
use crate::model::Hyperparameters;

/// A fit report with the names needed to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub feature_names: Vec<String>,
    pub group_labels: Vec<String>,
    pub hyperparameters: Hyperparameters,
    #[serde(flatten)]
    pub report: FitReport,
}

impl ModelFile {
    pub fn validate(&self) -> Result<()> {
        let post = &self.report.posterior;
        if self.feature_names.len() != post.dim() || self.group_labels.len() != post.num_groups() {
            return Err(Error::DimensionMismatch(format!(
                "model file names {} features and {} groups, posterior has {} and {}",
                self.feature_names.len(),
                self.group_labels.len(),
                post.dim(),
                post.num_groups()
            )));
        }
        self.hyperparameters.validate_for(post.dim())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n").and_then(|_| out.flush()).map_err(io_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let model: ModelFile = serde_json::from_reader(BufReader::new(file))?;
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavi::fit;
    use crate::model::{default_hyperparameters, Group, GroupedDataset};

    #[test]
    fn save_load_round_trip() {
        let g1 = Group::from_rows("a", &[vec![1.0, 0.1], vec![0.5, -0.3], vec![0.2, 0.9]], vec![1.0, 0.3, 0.7], 2);
        let g2 = Group::from_rows("b", &[vec![-1.0, 0.4], vec![0.8, 0.8]], vec![-0.9, 1.3], 2);
        let ds = GroupedDataset::new(vec![g1, g2], vec!["u".into(), "v".into()]);
        let hyper = default_hyperparameters(2).unwrap();
        let model = ModelFile {
            feature_names: ds.feature_names.clone(),
            group_labels: ds.group_labels.clone(),
            hyperparameters: hyper.clone(),
            report: fit(&ds, &hyper).unwrap(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        model.save(&path).unwrap();
        assert_eq!(ModelFile::load(&path).unwrap(), model);

        let text = std::fs::read_to_string(&path).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(value.get("posterior").is_some() && value.get("converged").is_some());
    }
}
