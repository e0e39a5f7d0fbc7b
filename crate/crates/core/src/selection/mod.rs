//! Ensemble selection methods over a shared pool and DSEL.
//!
//! Every tie (votes, accuracies, diversities, neighbour distances) is broken
//! toward the smaller class id or index, so results do not depend on the
//! order in which classifiers are evaluated.

mod competence;
mod dsel;
mod knora;

pub use competence::{
    build_competence_model, des_clustering_predict, double_fault, CompetenceModel,
};
pub use dsel::{build_dsel, Dsel};
pub use knora::{knora_e, knora_e_region, knora_u, knora_u_region};

use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::trees::ClassifierPool;

/// Outcome of one prediction by a selection method.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub label: u16,
    /// Vote mass per class id.
    pub votes: Vec<f64>,
    /// Classifier indices whose outputs were combined, ascending.
    pub ensemble_used: Vec<usize>,
    /// Tree nodes visited plus the method's distance evaluations.
    pub cost: u64,
}

/// Weighted plurality vote. Ties go to the smallest class id.
pub fn majority_vote(
    predictions: &[u16],
    weights: Option<&[f64]>,
    n_classes: usize,
) -> Result<(u16, Vec<f64>)> {
    if predictions.is_empty() {
        return Err(Error::Vote("no predictions to combine".into()));
    }
    if let Some(w) = weights {
        if w.len() != predictions.len() {
            return Err(Error::Vote(format!(
                "{} weights for {} predictions",
                w.len(),
                predictions.len()
            )));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Vote(
                "weights must be finite and non-negative".into(),
            ));
        }
    }
    let mut votes = vec![0.0f64; n_classes];
    for (i, &p) in predictions.iter().enumerate() {
        let slot = votes
            .get_mut(p as usize)
            .ok_or_else(|| Error::Vote(format!("prediction {p} >= {n_classes} classes")))?;
        *slot += weights.map_or(1.0, |w| w[i]);
    }
    if votes.iter().all(|&v| v == 0.0) {
        return Err(Error::Vote("all vote weights are zero".into()));
    }
    Ok((argmax_smallest(&votes) as u16, votes))
}

pub(crate) fn argmax_smallest(votes: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    best
}

/// Unweighted vote over `members` of the pool for `x`.
pub(crate) fn vote_members(
    pool: &ClassifierPool,
    members: &[usize],
    x: &[f32],
) -> Result<SelectionResult> {
    let mut votes = vec![0.0f64; pool.n_classes()];
    let mut cost = 0u64;
    for &m in members {
        let (class, visited) = pool.tree(m).predict(x)?;
        votes[class as usize] += 1.0;
        cost += visited as u64;
    }
    if members.is_empty() {
        return Err(Error::Vote("empty ensemble".into()));
    }
    let mut ensemble_used = members.to_vec();
    ensemble_used.sort_unstable();
    Ok(SelectionResult {
        label: argmax_smallest(&votes) as u16,
        votes,
        ensemble_used,
        cost,
    })
}

/// Index of the classifier with the highest DSEL accuracy.
pub fn single_best(dsel: &Dsel) -> usize {
    let mut best = 0;
    for c in 0..dsel.pool_size() {
        if dsel.correct_count(c) > dsel.correct_count(best) {
            best = c;
        }
    }
    best
}

/// Classifier indices ordered by DSEL accuracy, best first, ties by index.
pub(crate) fn rank_by_accuracy(dsel: &Dsel) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dsel.pool_size()).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(dsel.correct_count(c)), c));
    order
}

/// The `floor(pct * pool_size)` most accurate classifiers on DSEL, ascending by index.
pub fn static_selection(dsel: &Dsel, pct: f64) -> Result<Vec<usize>> {
    if !(pct > 0.0 && pct <= 1.0) {
        return Err(Error::Selection(format!(
            "pct must lie in (0, 1], got {pct}"
        )));
    }
    let m = (pct * dsel.pool_size() as f64).floor() as usize;
    if m == 0 {
        return Err(Error::Selection(format!(
            "pct {pct} of {} classifiers selects nothing",
            dsel.pool_size()
        )));
    }
    let mut chosen: Vec<usize> = rank_by_accuracy(dsel).into_iter().take(m).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Prediction of a single pool member wrapped as a selection result.
pub fn predict_single(pool: &ClassifierPool, index: usize, x: &[f32]) -> Result<SelectionResult> {
    if index >= pool.len() {
        return Err(Error::Selection(format!(
            "classifier {index} not in pool of {}",
            pool.len()
        )));
    }
    vote_members(pool, &[index], x)
}

/// Unweighted vote of a fixed ensemble (Static Selection at inference time).
pub fn predict_static(
    pool: &ClassifierPool,
    ensemble: &[usize],
    x: &[f32],
) -> Result<SelectionResult> {
    if let Some(&bad) = ensemble.iter().find(|&&c| c >= pool.len()) {
        return Err(Error::Selection(format!(
            "classifier {bad} not in pool of {}",
            pool.len()
        )));
    }
    vote_members(pool, ensemble, x)
}

/// Whether any pool member classifies `x` as `label`.
pub fn oracle_hit(pool: &ClassifierPool, x: &[f32], label: u16) -> bool {
    pool.trees().iter().any(|t| t.predict_class(x) == label)
}

/// Fraction of already-standardized samples that some pool member gets right.
pub fn oracle_accuracy_standardized(pool: &ClassifierPool, test: &Dataset) -> Result<f64> {
    if test.n_features() != pool.n_features() {
        return Err(Error::shape(pool.n_features(), test.n_features()));
    }
    let hits = (0..test.n_samples())
        .filter(|&i| oracle_hit(pool, test.sample(i), test.labels()[i]))
        .count();
    Ok(hits as f64 / test.n_samples() as f64)
}

/// Upper bound on any selector: the fraction of `test` samples that at least
/// one pool member classifies correctly.
pub fn oracle_accuracy(pool: &ClassifierPool, test: &Dataset, s: &Standardizer) -> Result<f64> {
    oracle_accuracy_standardized(pool, &s.transform(test)?)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::data::Matrix;
    use crate::trees::{DecisionTree, TreeNode};

    pub(crate) fn constant_pool(classes: &[u16], n_classes: usize) -> ClassifierPool {
        let trees = classes
            .iter()
            .map(|&c| DecisionTree::from_nodes(vec![TreeNode::leaf(c)], 1, n_classes).unwrap())
            .collect();
        ClassifierPool::new(trees, vec![0; classes.len()], 0).unwrap()
    }

    #[test]
    fn vote_examples() {
        assert_eq!(majority_vote(&[3, 3, 5], None, 6).unwrap().0, 3);
        assert_eq!(majority_vote(&[0, 1], Some(&[1.0, 1.0]), 2).unwrap().0, 0);
        let (label, votes) = majority_vote(&[0, 1, 1], Some(&[5.0, 2.0, 2.0]), 2).unwrap();
        assert_eq!(label, 0);
        assert_eq!(votes, vec![5.0, 4.0]);
    }

    #[test]
    fn vote_errors() {
        assert!(matches!(majority_vote(&[], None, 2), Err(Error::Vote(_))));
        assert!(matches!(
            majority_vote(&[0, 1], Some(&[0.0, 0.0]), 2),
            Err(Error::Vote(_))
        ));
        assert!(matches!(
            majority_vote(&[0], Some(&[-1.0]), 2),
            Err(Error::Vote(_))
        ));
        assert!(matches!(
            majority_vote(&[0], Some(&[1.0, 1.0]), 2),
            Err(Error::Vote(_))
        ));
        assert!(matches!(majority_vote(&[4], None, 2), Err(Error::Vote(_))));
    }

    #[test]
    fn vote_is_order_free() {
        let preds = [2u16, 0, 1, 2, 0, 1];
        let w = [1.0, 2.0, 3.0, 2.0, 1.0, 0.0];
        let base = majority_vote(&preds, Some(&w), 3).unwrap();
        let mut idx: Vec<usize> = (0..6).collect();
        for rot in 0..6 {
            idx.rotate_left(1);
            let p: Vec<u16> = idx.iter().map(|&i| preds[i]).collect();
            let ww: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
            assert_eq!(
                majority_vote(&p, Some(&ww), 3).unwrap(),
                base,
                "rotation {rot}"
            );
        }
    }

    fn dsel_with_accuracies(correct: &[&[bool]]) -> Dsel {
        let n = correct[0].len();
        Dsel::from_correctness(
            Matrix::zeros(n, 1),
            vec![0; n],
            correct.iter().map(|r| r.to_vec()).collect(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn single_best_tie_rule() {
        let t = true;
        let f = false;
        // accuracies 0.6, 0.8, 0.8 over five samples
        let d = dsel_with_accuracies(&[&[t, t, t, f, f], &[t, t, t, t, f], &[f, t, t, t, t]]);
        assert_eq!(single_best(&d), 1);
        let d = dsel_with_accuracies(&[&[f, f]]);
        assert_eq!(single_best(&d), 0);
    }

    #[test]
    fn static_selection_examples() {
        let row = |k: usize| -> Vec<bool> { (0..10).map(|i| i < k).collect() };
        let rows = [row(9), row(1), row(8), row(7)];
        let refs: Vec<&[bool]> = rows.iter().map(|r| r.as_slice()).collect();
        let d = dsel_with_accuracies(&refs);
        assert_eq!(static_selection(&d, 0.5).unwrap(), vec![0, 2]);
        assert_eq!(static_selection(&d, 1.0).unwrap(), vec![0, 1, 2, 3]);
        assert!(matches!(
            static_selection(&d, 0.2),
            Err(Error::Selection(_))
        ));
        assert!(static_selection(&d, 0.0).is_err());

        let rows: Vec<Vec<bool>> = (0..45).map(|c| row(c % 10)).collect();
        let refs: Vec<&[bool]> = rows.iter().map(|r| r.as_slice()).collect();
        let d = dsel_with_accuracies(&refs);
        assert_eq!(static_selection(&d, 0.5).unwrap().len(), 22);
    }

    #[test]
    fn oracle_examples() {
        let test = Dataset::new(Matrix::zeros(3, 1), vec![0, 1, 1], 2).unwrap();
        let s = Standardizer::from_parts(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(
            oracle_accuracy(&constant_pool(&[0, 1], 2), &test, &s).unwrap(),
            1.0
        );
        let test = Dataset::new(Matrix::zeros(2, 1), vec![1, 1], 2).unwrap();
        assert_eq!(
            oracle_accuracy(&constant_pool(&[0, 0], 2), &test, &s).unwrap(),
            0.0
        );
    }
}
