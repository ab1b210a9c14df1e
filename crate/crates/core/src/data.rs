//! Tabular datasets and their joint feature-target view.
//!
//! A [`Dataset`] stores `N` rows of `d` features plus one target column. All
//! clustering and density work happens on [`JointPoint`]s, the `d + 1`
//! dimensional vectors obtained by appending the target to the feature row.

use std::collections::HashSet;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("dataset has no rows")]
    NoRows,
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("feature matrix has {got} values, expected {rows} x {cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        got: usize,
    },
    #[error("target has length {got}, expected {expected}")]
    TargetLength { expected: usize, got: usize },
    #[error("expected {expected} feature names, got {got}")]
    NameCount { expected: usize, got: usize },
    #[error("duplicate column name `{0}`")]
    DuplicateName(String),
    #[error("synthetic mask has length {got}, expected {expected}")]
    MaskLength { expected: usize, got: usize },
    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },
}

/// A feature matrix with one real-valued target per row.
///
/// Features are stored row-major. Instances are validated on construction
/// and never mutated afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_rows: usize,
    n_features: usize,
    target: Vec<f64>,
    feature_names: Vec<String>,
    target_name: String,
    synthetic_mask: Vec<bool>,
}

impl Dataset {
    /// Builds a dataset of original (non-synthetic) rows.
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        target: Vec<f64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self, DatasetError> {
        let n = target.len();
        Self::with_mask(
            features,
            n_features,
            target,
            feature_names,
            target_name,
            vec![false; n],
        )
    }

    pub fn with_mask(
        features: Vec<f64>,
        n_features: usize,
        target: Vec<f64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        synthetic_mask: Vec<bool>,
    ) -> Result<Self, DatasetError> {
        let target_name = target_name.into();
        if n_features == 0 {
            return Err(DatasetError::NoFeatures);
        }
        let n_rows = features.len() / n_features;
        if n_rows == 0 {
            return Err(DatasetError::NoRows);
        }
        if features.len() != n_rows * n_features {
            return Err(DatasetError::ShapeMismatch {
                rows: n_rows,
                cols: n_features,
                got: features.len(),
            });
        }
        if target.len() != n_rows {
            return Err(DatasetError::TargetLength {
                expected: n_rows,
                got: target.len(),
            });
        }
        if feature_names.len() != n_features {
            return Err(DatasetError::NameCount {
                expected: n_features,
                got: feature_names.len(),
            });
        }
        let mut seen = HashSet::with_capacity(n_features + 1);
        for name in feature_names.iter().chain(std::iter::once(&target_name)) {
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::DuplicateName(name.clone()));
            }
        }
        if synthetic_mask.len() != n_rows {
            return Err(DatasetError::MaskLength {
                expected: n_rows,
                got: synthetic_mask.len(),
            });
        }
        for (i, row) in features.chunks_exact(n_features).enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite {
                    row: i,
                    column: feature_names[j].clone(),
                });
            }
            if !target[i].is_finite() {
                return Err(DatasetError::NonFinite {
                    row: i,
                    column: target_name.clone(),
                });
            }
        }
        Ok(Self {
            features,
            n_rows,
            n_features,
            target,
            feature_names,
            target_name,
            synthetic_mask,
        })
    }

    /// Builds a dataset from joint points, splitting off the last coordinate
    /// as the target.
    pub fn from_joint(
        points: &[JointPoint],
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        synthetic_mask: Vec<bool>,
    ) -> Result<Self, DatasetError> {
        let d = feature_names.len();
        let mut features = Vec::with_capacity(points.len() * d);
        let mut target = Vec::with_capacity(points.len());
        for p in points {
            features.extend_from_slice(p.features());
            target.push(p.target());
        }
        Self::with_mask(
            features,
            d,
            target,
            feature_names,
            target_name,
            synthetic_mask,
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Dimension of the joint space, `d + 1`.
    pub fn joint_dim(&self) -> usize {
        self.n_features + 1
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features)
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn synthetic_mask(&self) -> &[bool] {
        &self.synthetic_mask
    }

    pub fn n_synthetic(&self) -> usize {
        self.synthetic_mask.iter().filter(|&&s| s).count()
    }

    /// Returns the rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut target = Vec::with_capacity(indices.len());
        let mut mask = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            target.push(self.target[i]);
            mask.push(self.synthetic_mask[i]);
        }
        Self {
            features,
            n_rows: indices.len(),
            n_features: self.n_features,
            target,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            synthetic_mask: mask,
        }
    }
}

/// A point `z = (x, y)` in the joint feature-target space.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPoint(Vec<f64>);

impl JointPoint {
    /// Wraps a raw joint vector. The last coordinate is the target, so the
    /// vector needs at least two entries.
    pub fn new(z: Vec<f64>) -> Self {
        assert!(
            z.len() >= 2,
            "joint point needs at least one feature and a target"
        );
        Self(z)
    }

    pub fn from_parts(x: &[f64], y: f64) -> Self {
        let mut z = Vec::with_capacity(x.len() + 1);
        z.extend_from_slice(x);
        z.push(y);
        Self(z)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn features(&self) -> &[f64] {
        &self.0[..self.0.len() - 1]
    }

    pub fn target(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for JointPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Concatenates each feature row with its target.
pub fn to_joint(dataset: &Dataset) -> Vec<JointPoint> {
    dataset
        .rows()
        .zip(dataset.target())
        .map(|(x, &y)| JointPoint::from_parts(x, y))
        .collect()
}

/// Per-column z-score parameters over the `d + 1` joint columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationParams {
    means: Vec<f64>,
    stds: Vec<f64>,
    degenerate: Vec<bool>,
}

impl StandardizationParams {
    /// Fits population mean/std for every joint column. Constant columns keep
    /// their mean but get std 1 and are flagged degenerate.
    pub fn fit(dataset: &Dataset) -> Self {
        let dim = dataset.joint_dim();
        let n = dataset.n_rows() as f64;
        let mut means = vec![0.0; dim];
        for (x, &y) in dataset.rows().zip(dataset.target()) {
            for (m, v) in means.iter_mut().zip(x.iter().chain(std::iter::once(&y))) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut vars = vec![0.0; dim];
        for (x, &y) in dataset.rows().zip(dataset.target()) {
            for ((s, v), m) in vars
                .iter_mut()
                .zip(x.iter().chain(std::iter::once(&y)))
                .zip(&means)
            {
                *s += (v - m) * (v - m);
            }
        }
        let mut stds = Vec::with_capacity(dim);
        let mut degenerate = Vec::with_capacity(dim);
        for (j, s) in vars.iter().enumerate() {
            let sd = (s / n).sqrt();
            // Spread below rounding noise of the mean counts as constant.
            let constant = !(sd > 1e-12 * means[j].abs().max(f64::MIN_POSITIVE));
            degenerate.push(constant);
            stds.push(if constant { 1.0 } else { sd });
        }
        Self {
            means,
            stds,
            degenerate,
        }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// Columns whose observed spread was zero.
    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn forward(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }

    pub fn forward_point(&self, z: &JointPoint) -> JointPoint {
        JointPoint(self.forward(z.as_slice()))
    }

    pub fn inverse_point(&self, z: &JointPoint) -> JointPoint {
        JointPoint(self.inverse(z.as_slice()))
    }

    pub fn apply(&self, dataset: &Dataset) -> Dataset {
        self.map_dataset(dataset, |z| self.forward(z))
    }

    pub fn invert(&self, dataset: &Dataset) -> Dataset {
        self.map_dataset(dataset, |z| self.inverse(z))
    }

    fn map_dataset(&self, dataset: &Dataset, f: impl Fn(&[f64]) -> Vec<f64>) -> Dataset {
        let d = dataset.n_features();
        let mut features = Vec::with_capacity(dataset.features().len());
        let mut target = Vec::with_capacity(dataset.n_rows());
        let mut z = Vec::with_capacity(d + 1);
        for (x, &y) in dataset.rows().zip(dataset.target()) {
            z.clear();
            z.extend_from_slice(x);
            z.push(y);
            let out = f(&z);
            features.extend_from_slice(&out[..d]);
            target.push(out[d]);
        }
        Dataset {
            features,
            target,
            ..dataset.clone()
        }
    }
}

/// Z-scores every joint column of `dataset` (population std).
pub fn standardize(dataset: &Dataset) -> (Dataset, StandardizationParams) {
    let params = StandardizationParams::fit(dataset);
    (params.apply(dataset), params)
}
