use super::{argmax_smallest, vote_members, Dsel, SelectionResult};
use crate::error::{Error, Result};
use crate::trees::ClassifierPool;

fn check(dsel: &Dsel, pool: &ClassifierPool, region: &[usize]) -> Result<()> {
    if dsel.pool_size() != pool.len() {
        return Err(Error::shape(pool.len(), dsel.pool_size()));
    }
    if let Some(&bad) = region.iter().find(|&&s| s >= dsel.n_samples()) {
        return Err(Error::Selection(format!(
            "region sample {bad} outside DSEL"
        )));
    }
    Ok(())
}

/// KNORA-Union over a precomputed region. Each classifier votes with weight
/// equal to the number of region samples it gets right; if that selects
/// nobody, every classifier votes once. `cost` counts tree nodes only.
pub fn knora_u_region(
    dsel: &Dsel,
    pool: &ClassifierPool,
    x: &[f32],
    region: &[usize],
) -> Result<SelectionResult> {
    check(dsel, pool, region)?;
    let mut votes = vec![0.0f64; pool.n_classes()];
    let mut ensemble_used = Vec::new();
    let mut cost = 0u64;
    for c in 0..pool.len() {
        let hits = region.iter().filter(|&&s| dsel.is_correct(c, s)).count();
        if hits == 0 {
            continue;
        }
        let (class, visited) = pool.tree(c).predict(x)?;
        votes[class as usize] += hits as f64;
        cost += visited as u64;
        ensemble_used.push(c);
    }
    if ensemble_used.is_empty() {
        let all: Vec<usize> = (0..pool.len()).collect();
        return vote_members(pool, &all, x);
    }
    Ok(SelectionResult {
        label: argmax_smallest(&votes) as u16,
        votes,
        ensemble_used,
        cost,
    })
}

/// KNORA-Eliminate over a precomputed region ordered nearest first. Keeps the
/// classifiers right on the whole region, dropping the farthest sample until
/// some survive; falls back to the whole pool when none ever do.
pub fn knora_e_region(
    dsel: &Dsel,
    pool: &ClassifierPool,
    x: &[f32],
    region: &[usize],
) -> Result<SelectionResult> {
    check(dsel, pool, region)?;
    for m in (1..=region.len()).rev() {
        let oracles: Vec<usize> = (0..pool.len())
            .filter(|&c| region[..m].iter().all(|&s| dsel.is_correct(c, s)))
            .collect();
        if !oracles.is_empty() {
            return vote_members(pool, &oracles, x);
        }
    }
    let all: Vec<usize> = (0..pool.len()).collect();
    vote_members(pool, &all, x)
}

/// KNORA-U with the `k` nearest DSEL samples. `cost` adds one unit per DSEL
/// distance evaluated.
pub fn knora_u(dsel: &Dsel, pool: &ClassifierPool, x: &[f32], k: usize) -> Result<SelectionResult> {
    let region = dsel.neighbors(x, k)?;
    let mut r = knora_u_region(dsel, pool, x, &region)?;
    r.cost += dsel.n_samples() as u64;
    Ok(r)
}

/// KNORA-E with the `k` nearest DSEL samples. `cost` adds one unit per DSEL
/// distance evaluated.
pub fn knora_e(dsel: &Dsel, pool: &ClassifierPool, x: &[f32], k: usize) -> Result<SelectionResult> {
    let region = dsel.neighbors(x, k)?;
    let mut r = knora_e_region(dsel, pool, x, &region)?;
    r.cost += dsel.n_samples() as u64;
    Ok(r)
}
