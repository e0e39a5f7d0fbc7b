use crate::cluster::sq_dist;
use crate::data::{Dataset, Matrix, Standardizer};
use crate::error::{Error, Result};
use crate::trees::ClassifierPool;

/// Standardized validation samples plus the pool's correctness on each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dsel {
    samples: Matrix,
    labels: Vec<u16>,
    /// Row-major `[pool_size x n]`.
    correct: Vec<bool>,
    counts: Vec<usize>,
    pool_size: usize,
    n_classes: usize,
}

impl Dsel {
    /// Builds a DSEL from an explicit correctness matrix, one row per classifier.
    pub fn from_correctness(
        samples: Matrix,
        labels: Vec<u16>,
        correctness: Vec<Vec<bool>>,
        n_classes: usize,
    ) -> Result<Self> {
        let n = samples.rows();
        if n == 0 {
            return Err(Error::Selection(
                "DSEL must contain at least one sample".into(),
            ));
        }
        if labels.len() != n {
            return Err(Error::shape(n, labels.len()));
        }
        if correctness.is_empty() {
            return Err(Error::Selection(
                "correctness matrix has no classifiers".into(),
            ));
        }
        if let Some(bad) = correctness.iter().find(|r| r.len() != n) {
            return Err(Error::shape(n, bad.len()));
        }
        if labels.iter().any(|&l| l as usize >= n_classes) {
            return Err(Error::Selection(format!(
                "label out of range for {n_classes} classes"
            )));
        }
        let counts = correctness
            .iter()
            .map(|r| r.iter().filter(|&&b| b).count())
            .collect();
        Ok(Dsel {
            samples,
            labels,
            pool_size: correctness.len(),
            correct: correctness.into_iter().flatten().collect(),
            counts,
            n_classes,
        })
    }

    /// Evaluates every pool member on already-standardized `data`.
    pub fn from_pool(pool: &ClassifierPool, data: &Dataset) -> Result<Self> {
        if data.n_features() != pool.n_features() {
            return Err(Error::shape(pool.n_features(), data.n_features()));
        }
        let rows = pool
            .trees()
            .iter()
            .map(|t| {
                (0..data.n_samples())
                    .map(|s| t.predict_class(data.sample(s)) == data.labels()[s])
                    .collect()
            })
            .collect();
        Dsel::from_correctness(
            data.features().clone(),
            data.labels().to_vec(),
            rows,
            data.n_classes().max(pool.n_classes()),
        )
    }

    pub fn n_samples(&self) -> usize {
        self.samples.rows()
    }

    pub fn n_features(&self) -> usize {
        self.samples.cols()
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn is_correct(&self, classifier: usize, sample: usize) -> bool {
        self.correct[classifier * self.n_samples() + sample]
    }

    /// Correctness row of one classifier over all samples.
    pub fn correctness_row(&self, classifier: usize) -> &[bool] {
        let n = self.n_samples();
        &self.correct[classifier * n..(classifier + 1) * n]
    }

    /// Number of DSEL samples the classifier gets right.
    pub fn correct_count(&self, classifier: usize) -> usize {
        self.counts[classifier]
    }

    pub fn accuracy(&self, classifier: usize) -> f64 {
        self.counts[classifier] as f64 / self.n_samples() as f64
    }

    /// Fraction of samples some classifier gets right.
    pub fn oracle_rate(&self) -> f64 {
        let hits = (0..self.n_samples())
            .filter(|&s| (0..self.pool_size).any(|c| self.is_correct(c, s)))
            .count();
        hits as f64 / self.n_samples() as f64
    }

    /// The `k` samples nearest to `x`, nearest first; equal distances keep
    /// the smaller sample index first.
    pub fn neighbors(&self, x: &[f32], k: usize) -> Result<Vec<usize>> {
        if x.len() != self.n_features() {
            return Err(Error::shape(self.n_features(), x.len()));
        }
        if k == 0 || k > self.n_samples() {
            return Err(Error::Selection(format!(
                "k = {k} neighbours requested from {} DSEL samples",
                self.n_samples()
            )));
        }
        let mut keyed: Vec<(f64, usize)> = self
            .samples
            .iter_rows()
            .enumerate()
            .map(|(i, row)| (sq_dist(x, row), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < keyed.len() {
            keyed.select_nth_unstable_by(k - 1, cmp);
            keyed.truncate(k);
        }
        keyed.sort_unstable_by(cmp);
        Ok(keyed.into_iter().map(|(_, i)| i).collect())
    }
}

/// Standardizes `dsel_data` with `s` and records the pool's correctness on it.
pub fn build_dsel(pool: &ClassifierPool, dsel_data: &Dataset, s: &Standardizer) -> Result<Dsel> {
    Dsel::from_pool(pool, &s.transform(dsel_data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::oracle_accuracy_standardized;
    use crate::synthetic;
    use crate::trees::{generate_pool, DecisionTree, PoolConfig, TreeNode};

    #[test]
    fn constant_classifier_row() {
        let t = DecisionTree::from_nodes(vec![TreeNode::leaf(0)], 1, 2).unwrap();
        let pool = ClassifierPool::new(vec![t], vec![0], 0).unwrap();
        let d = Dataset::new(Matrix::zeros(3, 1), vec![0, 1, 0], 2).unwrap();
        let s = Standardizer::from_parts(vec![0.0], vec![1.0]).unwrap();
        let dsel = build_dsel(&pool, &d, &s).unwrap();
        assert_eq!(dsel.correctness_row(0), &[true, false, true]);
        assert_eq!(dsel.correct_count(0), 2);
    }

    #[test]
    fn stump_on_own_data_is_perfect() {
        let x = Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let d = Dataset::new(x, vec![0, 0, 1, 1], 2).unwrap();
        let t = DecisionTree::from_nodes(
            vec![
                TreeNode::split(0, 1.5, 2),
                TreeNode::leaf(0),
                TreeNode::leaf(1),
            ],
            1,
            2,
        )
        .unwrap();
        let pool = ClassifierPool::new(vec![t], vec![0], 0).unwrap();
        let dsel = Dsel::from_pool(&pool, &d).unwrap();
        assert!(dsel.correctness_row(0).iter().all(|&b| b));
    }

    #[test]
    fn oracle_rate_matches_oracle_accuracy() {
        let train = synthetic::blobs(40, 4, 6, 2.5, 1);
        let held = synthetic::blobs(25, 4, 6, 2.5, 2);
        let pool = generate_pool(&train, &PoolConfig::default(), 3).unwrap();
        let dsel = Dsel::from_pool(&pool, &held).unwrap();
        assert_eq!(dsel.pool_size(), 45);
        assert_eq!(dsel.n_samples(), 100);
        assert_eq!(
            dsel.oracle_rate(),
            oracle_accuracy_standardized(&pool, &held).unwrap()
        );
    }

    #[test]
    fn neighbors_order_and_ties() {
        let x = Matrix::new(5, 1, vec![3.0, -1.0, 1.0, 0.5, -1.0]).unwrap();
        let dsel = Dsel::from_correctness(x, vec![0; 5], vec![vec![true; 5]], 1).unwrap();
        assert_eq!(dsel.neighbors(&[0.0], 5).unwrap(), vec![3, 1, 2, 4, 0]);
        assert_eq!(dsel.neighbors(&[0.0], 2).unwrap(), vec![3, 1]);
        assert_eq!(dsel.neighbors(&[0.0], 3).unwrap(), vec![3, 1, 2]);
        assert!(dsel.neighbors(&[0.0], 6).is_err());
        assert!(dsel.neighbors(&[0.0], 0).is_err());
        assert!(dsel.neighbors(&[0.0, 1.0], 1).is_err());
    }
}
