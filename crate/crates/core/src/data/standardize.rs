use super::{Dataset, Matrix};
use crate::error::{Error, Result};

/// Per-feature centering and scaling, `(x - mean) * inv_std`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f32>,
    inv_std: Vec<f32>,
}

impl Standardizer {
    /// Builds a standardizer from explicit statistics. `inv_std` entries must be
    /// finite and positive.
    pub fn from_parts(mean: Vec<f32>, inv_std: Vec<f32>) -> Result<Self> {
        if mean.len() != inv_std.len() {
            return Err(Error::shape(mean.len(), inv_std.len()));
        }
        if mean.is_empty() {
            return Err(Error::InvalidArgument(
                "standardizer needs at least one feature".into(),
            ));
        }
        if mean.iter().any(|m| !m.is_finite())
            || inv_std.iter().any(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(Error::InvalidArgument(
                "standardizer statistics must be finite with positive inv_std".into(),
            ));
        }
        Ok(Standardizer { mean, inv_std })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn inv_std(&self) -> &[f32] {
        &self.inv_std
    }

    /// Standardizes `x` into `out`.
    #[inline]
    pub fn apply_into(&self, x: &[f32], out: &mut [f32]) -> Result<()> {
        if x.len() != self.mean.len() {
            return Err(Error::shape(self.mean.len(), x.len()));
        }
        if out.len() != self.mean.len() {
            return Err(Error::shape(self.mean.len(), out.len()));
        }
        for (((o, &v), &m), &s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.inv_std) {
            *o = (v - m) * s;
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f32]) -> Result<Vec<f32>> {
        let mut out = vec![0.0; self.mean.len()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    /// Maps a standardized vector back to the original scale.
    pub fn inverse(&self, z: &[f32]) -> Result<Vec<f32>> {
        if z.len() != self.mean.len() {
            return Err(Error::shape(self.mean.len(), z.len()));
        }
        Ok(z.iter()
            .zip(&self.mean)
            .zip(&self.inv_std)
            .map(|((&v, &m), &s)| v / s + m)
            .collect())
    }

    /// Standardizes every row of `d`.
    pub fn transform(&self, d: &Dataset) -> Result<Dataset> {
        if d.n_features() != self.n_features() {
            return Err(Error::shape(self.n_features(), d.n_features()));
        }
        let mut out = Matrix::zeros(d.n_samples(), d.n_features());
        for i in 0..d.n_samples() {
            self.apply_into(d.sample(i), out.row_mut(i))?;
        }
        d.with_features(out)
    }
}

/// Fits mean and inverse population standard deviation per feature.
/// Zero-variance features get `inv_std = 1`.
pub fn fit_standardizer(train: &Dataset) -> Standardizer {
    let n = train.n_samples() as f64;
    let d = train.n_features();
    let mut sum = vec![0.0f64; d];
    for row in train.features().iter_rows() {
        for (s, &v) in sum.iter_mut().zip(row) {
            *s += v as f64;
        }
    }
    let mean64: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let mut ss = vec![0.0f64; d];
    for row in train.features().iter_rows() {
        for ((acc, &v), &m) in ss.iter_mut().zip(row).zip(&mean64) {
            let dv = v as f64 - m;
            *acc += dv * dv;
        }
    }
    let inv_std = ss
        .iter()
        .map(|&s| {
            let sigma = (s / n).sqrt();
            let inv = (1.0 / sigma) as f32;
            if sigma > 0.0 && inv.is_finite() && inv > 0.0 {
                inv
            } else {
                1.0
            }
        })
        .collect();
    Standardizer {
        mean: mean64.iter().map(|&m| m as f32).collect(),
        inv_std,
    }
}
