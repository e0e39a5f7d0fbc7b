use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Per-class shuffled partition. The first part receives `round_half_up(fraction * n_c)`
/// samples of every class `c`, clamped so that both parts keep at least one.
pub fn stratified_split_indices(
    d: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (class, mut members) in d.indices_by_class().into_iter().enumerate() {
        match members.len() {
            0 => continue,
            1 => {
                return Err(Error::Stratification(format!(
                    "class {class} has a single sample and cannot be split"
                )))
            }
            n => {
                let take = ((fraction * n as f64 + 0.5).floor() as usize).clamp(1, n - 1);
                members.shuffle(&mut rng);
                first.extend_from_slice(&members[..take]);
                second.extend_from_slice(&members[take..]);
            }
        }
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

/// Stratified two-way split of a dataset; see [`stratified_split_indices`].
pub fn stratified_split(d: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (a, b) = stratified_split_indices(d, fraction, seed)?;
    Ok((d.subset(&a)?, d.subset(&b)?))
}

/// Exactly `n` sample indices, allocated to classes proportionally by largest
/// remainder (ties to the smaller class id), drawn at random within each class.
pub fn stratified_subset_indices(d: &Dataset, n: usize, seed: u64) -> Result<Vec<usize>> {
    let total = d.n_samples();
    if n == 0 || n > total {
        return Err(Error::InvalidArgument(format!(
            "subset size {n} must lie in 1..={total}"
        )));
    }
    let groups = d.indices_by_class();
    let mut quota: Vec<usize> = groups.iter().map(|g| g.len() * n / total).collect();
    let assigned: usize = quota.iter().sum();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    // remainder of count * n / total, compared exactly
    order.sort_by_key(|&c| (std::cmp::Reverse(groups[c].len() * n % total), c));
    for &c in order.iter().take(n - assigned) {
        quota[c] += 1;
    }
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(n);
    for (mut members, q) in groups.into_iter().zip(quota) {
        members.shuffle(&mut rng);
        out.extend_from_slice(&members[..q]);
    }
    out.sort_unstable();
    Ok(out)
}

/// Repeated stratified k-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub n_splits: usize,
    pub n_repeats: usize,
    pub seed: u64,
    /// `assignments[r][i]` is the fold holding sample `i` in repeat `r`.
    pub assignments: Vec<Vec<u32>>,
}

impl FoldPlan {
    /// `(train, test)` sample indices for one fold, both ascending.
    pub fn split(&self, repeat: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments[repeat].iter().enumerate() {
            if f as usize == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Builds `n_repeats` independent stratified `n_splits`-fold assignments.
///
/// Within a repeat, classes are visited in id order and each class's shuffled
/// members are dealt round-robin to folds, continuing where the previous class
/// stopped. Every fold then holds ⌊n_c/k⌋ or ⌈n_c/k⌉ samples of each class and
/// fold sizes differ by at most one.
pub fn make_fold_plan(
    d: &Dataset,
    n_splits: usize,
    n_repeats: usize,
    seed: u64,
) -> Result<FoldPlan> {
    if n_splits < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_splits must be >= 2, got {n_splits}"
        )));
    }
    if n_repeats == 0 {
        return Err(Error::InvalidArgument("n_repeats must be >= 1".into()));
    }
    let groups = d.indices_by_class();
    if let Some((c, g)) = groups
        .iter()
        .enumerate()
        .find(|(_, g)| !g.is_empty() && g.len() < n_splits)
    {
        return Err(Error::Stratification(format!(
            "class {c} has {} samples, fewer than n_splits = {n_splits}",
            g.len()
        )));
    }
    let mut assignments = Vec::with_capacity(n_repeats);
    for r in 0..n_repeats {
        let mut rng = seed::rng(seed::derive(seed, r as u64));
        let mut fold_of = vec![0u32; d.n_samples()];
        let mut offset = 0usize;
        for members in &groups {
            let mut members = members.clone();
            members.shuffle(&mut rng);
            for (j, &i) in members.iter().enumerate() {
                fold_of[i] = ((offset + j) % n_splits) as u32;
            }
            offset += members.len();
        }
        assignments.push(fold_of);
    }
    Ok(FoldPlan {
        n_splits,
        n_repeats,
        seed,
        assignments,
    })
}
