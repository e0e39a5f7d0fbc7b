//! Datasets: ingestion, standardization and stratified partitioning.

mod csv;
mod idx;
mod split;
mod standardize;

pub use self::csv::{load_csv, LabelColumn};
pub use self::idx::{load_idx, load_idx_pairs};
pub use self::split::{
    make_fold_plan, stratified_split, stratified_split_indices, stratified_subset_indices, FoldPlan,
};
pub use self::standardize::{fit_standardizer, Standardizer};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::shape(rows.saturating_mul(cols), data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Labelled feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<u16>,
    n_classes: usize,
    feature_names: Option<Vec<String>>,
    /// Original label text for each class id, when labels were re-encoded.
    class_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset, checking the label and finiteness invariants.
    pub fn new(features: Matrix, labels: Vec<u16>, n_classes: usize) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::Format(format!(
                "dataset must have at least one sample and one feature, got {}x{}",
                features.rows(),
                features.cols()
            )));
        }
        if labels.len() != features.rows() {
            return Err(Error::shape(features.rows(), labels.len()));
        }
        if n_classes == 0 || n_classes > u16::MAX as usize + 1 {
            return Err(Error::Format(format!("invalid class count {n_classes}")));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= n_classes) {
            return Err(Error::Format(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite feature value at sample {}, feature {}",
                pos / features.cols(),
                pos % features.cols()
            )));
        }
        Ok(Dataset {
            features,
            labels,
            n_classes,
            feature_names: None,
            class_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::shape(self.n_features(), names.len()));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes {
            return Err(Error::shape(self.n_classes, names.len()));
        }
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &[f32] {
        self.features.row(i)
    }

    /// Per-class sample counts, indexed by class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Sample indices grouped by class id, each list ascending.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l as usize].push(i);
        }
        groups
    }

    /// Dataset restricted to `indices` (in order). Keeps the class count and names.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty subset".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_samples()) {
            return Err(Error::InvalidArgument(format!(
                "sample index {bad} out of range for {} samples",
                self.n_samples()
            )));
        }
        Ok(Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        })
    }

    /// Same samples with the features replaced (e.g. after standardization).
    pub fn with_features(&self, features: Matrix) -> Result<Dataset> {
        if features.rows() != self.n_samples() || features.cols() != self.n_features() {
            return Err(Error::shape(
                self.n_samples() * self.n_features(),
                features.rows() * features.cols(),
            ));
        }
        Ok(Dataset {
            features,
            ..self.clone()
        })
    }

    /// Appends the rows of `other`. Class count becomes the larger of the two.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.n_features() != self.n_features() {
            return Err(Error::shape(self.n_features(), other.n_features()));
        }
        let mut data = self.features.as_slice().to_vec();
        data.extend_from_slice(other.features.as_slice());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let features = Matrix::new(
            self.n_samples() + other.n_samples(),
            self.n_features(),
            data,
        )?;
        let mut out = Dataset::new(features, labels, self.n_classes.max(other.n_classes))?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }
}
