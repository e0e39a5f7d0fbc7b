use super::{vote_members, Dsel, SelectionResult};
use crate::cluster::KMeansModel;
use crate::error::{Error, Result};
use crate::trees::ClassifierPool;

/// Fraction of `region` samples on which both `a` and `b` are wrong.
pub fn double_fault(dsel: &Dsel, a: usize, b: usize, region: &[usize]) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::Selection("double fault over an empty region".into()));
    }
    if a >= dsel.pool_size() || b >= dsel.pool_size() {
        return Err(Error::Selection(format!(
            "classifier pair ({a}, {b}) outside pool"
        )));
    }
    if let Some(&bad) = region.iter().find(|&&s| s >= dsel.n_samples()) {
        return Err(Error::Selection(format!(
            "region sample {bad} outside DSEL"
        )));
    }
    Ok(both_wrong(dsel, a, b, region) as f64 / region.len() as f64)
}

fn both_wrong(dsel: &Dsel, a: usize, b: usize, region: &[usize]) -> usize {
    region
        .iter()
        .filter(|&&s| !dsel.is_correct(a, s) && !dsel.is_correct(b, s))
        .count()
}

/// Per-cluster ensembles chosen at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetenceModel {
    kmeans: KMeansModel,
    /// Row-major `[k x pool_size]`.
    accuracy: Vec<f64>,
    ensembles: Vec<Vec<usize>>,
    pool_size: usize,
    n_acc: usize,
    j: usize,
}

impl CompetenceModel {
    /// Assembles a model from explicit ensemble rows. Every row must hold `J`
    /// distinct indices below `pool_size`; accuracies are left at zero.
    pub fn from_parts(
        kmeans: KMeansModel,
        ensembles: Vec<Vec<usize>>,
        pool_size: usize,
    ) -> Result<Self> {
        if ensembles.len() != kmeans.k() {
            return Err(Error::shape(kmeans.k(), ensembles.len()));
        }
        let j = ensembles.first().map_or(0, Vec::len);
        if j == 0 {
            return Err(Error::Selection("ensembles must be non-empty".into()));
        }
        for row in &ensembles {
            if row.len() != j {
                return Err(Error::shape(j, row.len()));
            }
            let mut sorted = row.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != j || sorted[j - 1] >= pool_size {
                return Err(Error::Selection(format!(
                    "ensemble row {row:?} is not {j} distinct indices below {pool_size}"
                )));
            }
        }
        Ok(CompetenceModel {
            accuracy: vec![0.0; kmeans.k() * pool_size],
            kmeans,
            ensembles,
            pool_size,
            n_acc: j,
            j,
        })
    }

    pub fn kmeans(&self) -> &KMeansModel {
        &self.kmeans
    }

    pub fn k(&self) -> usize {
        self.kmeans.k()
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn n_acc(&self) -> usize {
        self.n_acc
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    /// Accuracy of each classifier on the DSEL members of `cluster`.
    pub fn cluster_accuracy(&self, cluster: usize) -> &[f64] {
        &self.accuracy[cluster * self.pool_size..(cluster + 1) * self.pool_size]
    }

    /// Ensemble for `cluster`, in selection order.
    pub fn ensemble(&self, cluster: usize) -> &[usize] {
        &self.ensembles[cluster]
    }

    pub fn ensembles(&self) -> &[Vec<usize>] {
        &self.ensembles
    }
}

/// For each cluster: shortlist the `n_acc` classifiers most accurate on the
/// cluster's DSEL members, then keep the `j` of them with the lowest mean
/// pairwise double fault against the rest of the shortlist.
///
/// A cluster with no DSEL members is scored on the whole DSEL.
pub fn build_competence_model(
    dsel: &Dsel,
    kmeans: &KMeansModel,
    n_acc: usize,
    j: usize,
) -> Result<CompetenceModel> {
    let pool_size = dsel.pool_size();
    if j == 0 || j > n_acc || n_acc > pool_size {
        return Err(Error::Selection(format!(
            "need 0 < J <= N_acc <= pool size, got J = {j}, N_acc = {n_acc}, pool = {pool_size}"
        )));
    }
    if kmeans.n_features() != dsel.n_features() {
        return Err(Error::shape(dsel.n_features(), kmeans.n_features()));
    }
    let mut members = vec![Vec::new(); kmeans.k()];
    for (s, row) in dsel.samples().iter_rows().enumerate() {
        members[kmeans.assign(row)?.0].push(s);
    }
    let everyone: Vec<usize> = (0..dsel.n_samples()).collect();

    let mut accuracy = Vec::with_capacity(kmeans.k() * pool_size);
    let mut ensembles = Vec::with_capacity(kmeans.k());
    for m in &members {
        let region = if m.is_empty() { &everyone } else { m };
        let hits: Vec<usize> = (0..pool_size)
            .map(|c| region.iter().filter(|&&s| dsel.is_correct(c, s)).count())
            .collect();
        accuracy.extend(hits.iter().map(|&h| h as f64 / region.len() as f64));

        let mut shortlist: Vec<usize> = (0..pool_size).collect();
        shortlist.sort_by_key(|&c| (std::cmp::Reverse(hits[c]), c));
        shortlist.truncate(n_acc);

        // Same denominator for every candidate, so summed counts rank like the mean.
        let mut scored: Vec<(usize, usize)> = shortlist
            .iter()
            .map(|&a| {
                let df: usize = shortlist
                    .iter()
                    .filter(|&&b| b != a)
                    .map(|&b| both_wrong(dsel, a, b, region))
                    .sum();
                (a, df)
            })
            .collect();
        scored.sort_by_key(|&(c, df)| (df, std::cmp::Reverse(hits[c]), c));
        ensembles.push(scored.into_iter().take(j).map(|(c, _)| c).collect());
    }
    Ok(CompetenceModel {
        kmeans: kmeans.clone(),
        accuracy,
        ensembles,
        pool_size,
        n_acc,
        j,
    })
}

/// Votes with the ensemble of the cluster nearest to `x`. `cost` is tree
/// nodes visited plus one unit per centroid.
pub fn des_clustering_predict(
    cm: &CompetenceModel,
    pool: &ClassifierPool,
    x: &[f32],
) -> Result<SelectionResult> {
    if pool.len() != cm.pool_size {
        return Err(Error::shape(cm.pool_size, pool.len()));
    }
    let (cluster, _) = cm.kmeans.assign(x)?;
    let mut r = vote_members(pool, &cm.ensembles[cluster], x)?;
    r.cost += cm.k() as u64;
    Ok(r)
}
