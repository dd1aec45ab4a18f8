//! Model data types shared by the variational and sampling engines.
//!
//! The generative model for group `i` with design `X_i` and response `y_i`:
//!
//! ```text
//! y_i  ~ N(X_i β_i, σ⁻¹ I)          σ   ~ Gamma(a0, b0)
//! β_i  ~ N(Δ, s⁻¹ I)                s   ~ Gamma(c0, d0)
//! Δ    ~ N(μ0, diag(w)⁻¹)           w_d ~ Gamma(e0, f0)
//! ```
//!
//! All Gamma distributions use the shape/rate parameterization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One unit of the hierarchy: its design matrix (rows are observations) and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub label: String,
    pub design: DMatrix<f64>,
    pub response: DVector<f64>,
}

impl Group {
    pub fn new(label: impl Into<String>, design: DMatrix<f64>, response: DVector<f64>) -> Self {
        Self {
            label: label.into(),
            design,
            response,
        }
    }

    /// Builds a group from row slices; all rows must share one length.
    pub fn from_rows(label: impl Into<String>, rows: &[Vec<f64>], response: Vec<f64>, dim: usize) -> Self {
        let design = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c]);
        Self::new(label, design, DVector::from_vec(response))
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct GroupedDataset {
    pub groups: Vec<Group>,
    pub feature_names: Vec<String>,
    pub group_labels: Vec<String>,
}

impl GroupedDataset {
    /// Assembles a dataset, taking group labels from the groups themselves.
    pub fn new(groups: Vec<Group>, feature_names: Vec<String>) -> Self {
        let group_labels = groups.iter().map(|g| g.label.clone()).collect();
        Self {
            groups,
            feature_names,
            group_labels,
        }
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_observations(&self) -> usize {
        self.groups.iter().map(Group::len).sum()
    }

    /// Checks every structural invariant of the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = self.feature_names.len();
        if self.group_labels.len() != self.groups.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} group labels for {} groups",
                self.group_labels.len(),
                self.groups.len()
            )));
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.design.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "group {i} ({}) has {} design columns, expected {dim}",
                    g.label,
                    g.design.ncols()
                )));
            }
            if g.design.nrows() != g.response.len() {
                return Err(Error::DimensionMismatch(format!(
                    "group {i} ({}) has {} design rows but {} responses",
                    g.label,
                    g.design.nrows(),
                    g.response.len()
                )));
            }
            if g.design.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("design of group {i} ({})", g.label)));
            }
            if g.response.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("response of group {i} ({})", g.label)));
            }
        }
        Ok(())
    }
}

/// Free-function form of [`GroupedDataset::validate`].
pub fn validate(dataset: &GroupedDataset) -> Result<()> {
    dataset.validate()
}

/// Prior constants and convergence controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Shape of the Gamma prior on the noise precision σ.
    pub a0: f64,
    /// Rate of the Gamma prior on the noise precision σ.
    pub b0: f64,
    /// Shape of the Gamma prior on the group precision s.
    pub c0: f64,
    /// Rate of the Gamma prior on the group precision s.
    pub d0: f64,
    /// Shape of the Gamma prior on each ARD precision w_d.
    pub e0: f64,
    /// Rate of the Gamma prior on each ARD precision w_d.
    pub f0: f64,
    /// Prior mean of the population weights Δ.
    #[serde(with = "serde_vector")]
    pub mu0: DVector<f64>,
    /// Absolute ELBO change below which fitting stops.
    pub epsilon: f64,
    pub max_iter: usize,
}

/// Weak Gamma(1e-2, 1e-2) priors, zero prior mean, ε = 1e-6 and 500 sweeps.
pub fn default_hyperparameters(dim: usize) -> Result<Hyperparameters> {
    if dim == 0 {
        return Err(Error::Domain("feature dimension must be at least 1".into()));
    }
    Ok(Hyperparameters {
        a0: 1e-2,
        b0: 1e-2,
        c0: 1e-2,
        d0: 1e-2,
        e0: 1e-2,
        f0: 1e-2,
        mu0: DVector::zeros(dim),
        epsilon: 1e-6,
        max_iter: 500,
    })
}

impl Hyperparameters {
    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let constants = [
            ("a0", self.a0),
            ("b0", self.b0),
            ("c0", self.c0),
            ("d0", self.d0),
            ("e0", self.e0),
            ("f0", self.f0),
        ];
        for (name, v) in constants {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be at least 1".into()));
        }
        if self.mu0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mu0".into()));
        }
        Ok(())
    }

    /// Validates and checks that `mu0` matches the dataset dimension.
    pub fn validate_for(&self, dim: usize) -> Result<()> {
        self.validate()?;
        if self.mu0.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "mu0 has length {}, dataset has {dim} features",
                self.mu0.len()
            )));
        }
        Ok(())
    }
}

/// Parameters of every mean-field factor:
/// q(β_i) = N(beta_mean[i], beta_cov[i]), q(Δ) = N(delta_mean, delta_cov),
/// q(σ) = Gamma(a_n, b_n), q(s) = Gamma(c_n, d_n), q(w_d) = Gamma(e_n, f_n[d]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalPosterior {
    #[serde(with = "serde_vectors")]
    pub beta_mean: Vec<DVector<f64>>,
    #[serde(with = "serde_matrices")]
    pub beta_cov: Vec<DMatrix<f64>>,
    #[serde(with = "serde_vector")]
    pub delta_mean: DVector<f64>,
    #[serde(with = "serde_matrix")]
    pub delta_cov: DMatrix<f64>,
    pub a_n: f64,
    pub b_n: f64,
    pub c_n: f64,
    pub d_n: f64,
    pub e_n: f64,
    #[serde(with = "serde_vector")]
    pub f_n: DVector<f64>,
    pub elbo_trace: Vec<f64>,
}

impl VariationalPosterior {
    /// Starting point of the coordinate ascent: zero group weights with identity
    /// covariance, Δ at its prior mean with identity covariance, and every Gamma
    /// factor at its prior.
    pub fn initial(num_groups: usize, hyper: &Hyperparameters) -> Self {
        let dim = hyper.dim();
        Self {
            beta_mean: vec![DVector::zeros(dim); num_groups],
            beta_cov: vec![DMatrix::identity(dim, dim); num_groups],
            delta_mean: hyper.mu0.clone(),
            delta_cov: DMatrix::identity(dim, dim),
            a_n: hyper.a0,
            b_n: hyper.b0,
            c_n: hyper.c0,
            d_n: hyper.d0,
            e_n: hyper.e0,
            f_n: DVector::from_element(dim, hyper.f0),
            elbo_trace: Vec::new(),
        }
    }

    pub fn num_groups(&self) -> usize {
        self.beta_mean.len()
    }

    pub fn dim(&self) -> usize {
        self.delta_mean.len()
    }

    /// E[σ]
    pub fn noise_precision(&self) -> f64 {
        self.a_n / self.b_n
    }

    /// E[s]
    pub fn group_precision(&self) -> f64 {
        self.c_n / self.d_n
    }

    /// E[w]
    pub fn ard_precision(&self) -> DVector<f64> {
        self.f_n.map(|f| self.e_n / f)
    }
}

/// Row-major nested-array serialization for nalgebra types.
pub(crate) mod serde_matrix {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>], ncols: Option<usize>) -> Result<DMatrix<f64>, String> {
        let ncols = ncols.or_else(|| rows.first().map(Vec::len)).unwrap_or(0);
        if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
            return Err(format!("row {bad} has {} entries, expected {ncols}", rows[bad].len()));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows, None).map_err(D::Error::custom)
    }
}

pub(crate) mod serde_matrices {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    use super::serde_matrix::{from_rows, to_rows};

    pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        all.iter()
            .map(|rows| from_rows(rows, None).map_err(D::Error::custom))
            .collect()
    }
}

pub(crate) mod serde_vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

pub(crate) mod serde_vectors {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(vs: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
        vs.iter().map(|v| v.as_slice()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<f64>>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?
            .into_iter()
            .map(DVector::from_vec)
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
struct GroupRepr {
    label: String,
    design: Vec<Vec<f64>>,
    response: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    groups: Vec<GroupRepr>,
    feature_names: Vec<String>,
    group_labels: Vec<String>,
}

impl From<GroupedDataset> for DatasetRepr {
    fn from(ds: GroupedDataset) -> Self {
        Self {
            groups: ds
                .groups
                .iter()
                .map(|g| GroupRepr {
                    label: g.label.clone(),
                    design: serde_matrix::to_rows(&g.design),
                    response: g.response.as_slice().to_vec(),
                })
                .collect(),
            feature_names: ds.feature_names,
            group_labels: ds.group_labels,
        }
    }
}

impl TryFrom<DatasetRepr> for GroupedDataset {
    type Error = String;

    fn try_from(repr: DatasetRepr) -> std::result::Result<Self, String> {
        // Zero-row groups carry no column count of their own.
        let dim = repr.feature_names.len();
        let groups = repr
            .groups
            .into_iter()
            .map(|g| {
                let design = serde_matrix::from_rows(&g.design, Some(dim))?;
                Ok(Group::new(g.label, design, DVector::from_vec(g.response)))
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        Ok(GroupedDataset {
            groups,
            feature_names: repr.feature_names,
            group_labels: repr.group_labels,
        })
    }
}
