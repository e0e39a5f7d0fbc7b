use std::sync::Arc;

use super::TinyModel;
use crate::cluster::sq_dist;
use crate::error::{Error, Result};

/// Interpreter over a shared [`TinyModel`] with scratch buffers sized once at
/// construction. [`TinyEngine::predict`] does not allocate.
#[derive(Debug, Clone)]
pub struct TinyEngine {
    model: Arc<TinyModel>,
    z: Vec<f32>,
    votes: Vec<u16>,
}

impl TinyEngine {
    pub fn new(model: Arc<TinyModel>) -> Self {
        TinyEngine {
            z: vec![0.0; model.n_features()],
            votes: vec![0; model.n_classes()],
            model,
        }
    }

    pub fn model(&self) -> &Arc<TinyModel> {
        &self.model
    }

    /// Standardizes `raw_x`, picks the nearest centroid and votes with that
    /// cluster's trees. Returns the class and the cost (nodes visited + k).
    pub fn predict(&mut self, raw_x: &[f32]) -> Result<(u16, u64)> {
        let m = &*self.model;
        if raw_x.len() != m.n_features() {
            return Err(Error::shape(m.n_features(), raw_x.len()));
        }
        for (((o, &v), &mu), &s) in self.z.iter_mut().zip(raw_x).zip(m.mean()).zip(m.inv_std()) {
            *o = (v - mu) * s;
        }
        let mut cluster = 0;
        let mut best = f64::INFINITY;
        for c in 0..m.k() {
            let d = sq_dist(&self.z, m.centroid(c));
            if d < best {
                best = d;
                cluster = c;
            }
        }
        let mut cost = m.k() as u64;
        self.votes.fill(0);
        for &t in m.ensemble(cluster) {
            let nodes = m.tree_nodes(t as usize);
            let mut i = 0usize;
            loop {
                let n = nodes[i];
                cost += 1;
                if n.is_leaf() {
                    self.votes[n.right_jump as usize] += 1;
                    break;
                }
                i = if self.z[n.feature as usize] <= n.threshold {
                    i + 1
                } else {
                    n.right_jump as usize
                };
            }
        }
        let mut label = 0;
        for (c, &v) in self.votes.iter().enumerate() {
            if v > self.votes[label] {
                label = c;
            }
        }
        Ok((label as u16, cost))
    }
}

/// Decodes and validates `bytes`, then builds an engine over them.
pub fn load_tiny(bytes: &[u8]) -> Result<TinyEngine> {
    Ok(TinyEngine::new(Arc::new(TinyModel::from_bytes(bytes)?)))
}
