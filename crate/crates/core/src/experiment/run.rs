use std::hint::black_box;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use super::config::{ExperimentConfig, Method};
use crate::cluster::{fit_kmeans, KMeansParams};
use crate::data::{
    fit_standardizer, make_fold_plan, stratified_split_indices, stratified_subset_indices, Dataset,
    Standardizer,
};
use crate::error::{Error, Result};
use crate::seed;
use crate::selection::{
    build_competence_model, des_clustering_predict, knora_e_region, knora_u_region, oracle_hit,
    single_best, static_selection, Dsel,
};
use crate::tinyformat::{export_tiny, TinyEngine, TinyExport};
use crate::trees::{generate_pool, ClassifierPool};

/// One method's outcome on one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRecord {
    pub dataset: String,
    pub method: Method,
    /// Ensemble size for DES-Clustering.
    pub j: Option<usize>,
    pub repeat: usize,
    pub fold: usize,
    pub n_test: usize,
    /// CRC32 of the pool this fold's methods share.
    pub pool_fingerprint: u32,
    pub outcome: std::result::Result<FoldScore, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldScore {
    pub accuracy: f64,
    /// Mean tree nodes visited plus selection work per test sample.
    pub mean_cost: f64,
    /// Size of the compact model, where one is built.
    pub model_bytes: Option<u64>,
}

/// Wall-clock statistics of the compact engine on one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub dataset: String,
    pub j: usize,
    pub repeat: usize,
    pub fold: usize,
    pub stats: InferenceStats,
}

/// Aggregate over folds for one (dataset, method, J).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub method: Method,
    pub j: Option<usize>,
    pub n_folds: usize,
    pub mean_accuracy: f64,
    /// Population standard deviation over folds.
    pub std_accuracy: f64,
    pub mean_cost: f64,
    pub mean_wall_ns: Option<f64>,
    pub model_bytes: Option<f64>,
    /// First failure reason when any fold failed.
    pub failure: Option<String>,
}

impl ResultRow {
    /// `DES-Clustering_10`, `KNORA-U`, ...
    pub fn label(&self) -> String {
        row_label(self.method, self.j)
    }
}

pub(crate) fn row_label(method: Method, j: Option<usize>) -> String {
    match j {
        Some(j) => format!("{}_{j}", method.display_name()),
        None => method.display_name().to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub folds: Vec<FoldRecord>,
    pub timings: Vec<TimingRecord>,
}

impl ResultTable {
    pub fn row(&self, dataset: &str, method: Method, j: Option<usize>) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.method == method && r.j == j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceStats {
    pub n_probes: usize,
    pub mean_ns: f64,
    pub std_ns: f64,
    pub mean_cost: f64,
}

/// Times `engine` on every probe for `reps` passes after `warmup` untimed
/// passes. The cost of each probe must not change between passes.
pub fn measure_inference(
    engine: &mut TinyEngine,
    probes: &Dataset,
    warmup: u32,
    reps: u32,
) -> Result<InferenceStats> {
    if probes.n_samples() == 0 || reps == 0 {
        return Err(Error::InvalidArgument(
            "need at least one probe and one rep".into(),
        ));
    }
    for _ in 0..warmup {
        for i in 0..probes.n_samples() {
            black_box(engine.predict(black_box(probes.sample(i)))?);
        }
    }
    let mut costs = vec![0u64; probes.n_samples()];
    let mut times = Vec::with_capacity(probes.n_samples() * reps as usize);
    for rep in 0..reps {
        for (i, slot) in costs.iter_mut().enumerate() {
            let x = probes.sample(i);
            let t0 = Instant::now();
            let (_, cost) = black_box(engine.predict(black_box(x))?);
            times.push(t0.elapsed().as_nanos() as f64);
            if rep == 0 {
                *slot = cost;
            } else {
                assert_eq!(*slot, cost, "cost of probe {i} changed between reps");
            }
        }
    }
    let (mean_ns, std_ns) = mean_std(&times);
    Ok(InferenceStats {
        n_probes: probes.n_samples(),
        mean_ns,
        std_ns,
        mean_cost: costs.iter().sum::<u64>() as f64 / costs.len() as f64,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Seed of a dataset, derived from its name so that adding or removing other
/// datasets leaves its folds unchanged.
pub fn dataset_seed(master: u64, name: &str) -> u64 {
    seed::derive(master, crc32fast::hash(name.as_bytes()) as u64)
}

/// Runs the configured comparison, printing nothing.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    run_experiment_with(cfg, Path::new("."), |_| {})
}

/// Runs the configured comparison. Relative dataset paths resolve against
/// `base`; `progress` receives one line per finished fold.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    base: &Path,
    mut progress: impl FnMut(&str),
) -> Result<ResultTable> {
    cfg.validate()?;
    let mut loaded = Vec::with_capacity(cfg.datasets.len());
    for spec in &cfg.datasets {
        loaded.push(spec.load(base)?);
    }
    let mut folds = Vec::new();
    let mut timings = Vec::new();
    for (spec, data) in cfg.datasets.iter().zip(loaded) {
        let ds_seed = dataset_seed(cfg.seed, &spec.name);
        let data = match cfg.subset {
            Some(n) if n < data.n_samples() => {
                let idx = stratified_subset_indices(&data, n, seed::derive(ds_seed, 0x5B5E7))?;
                data.subset(&idx)?
            }
            _ => data,
        };
        let plan = make_fold_plan(&data, cfg.n_splits, cfg.n_repeats, ds_seed)?;
        for r in 0..cfg.n_repeats {
            for f in 0..cfg.n_splits {
                let t0 = Instant::now();
                let fold_seed = seed::derive(ds_seed, 1 + (r * cfg.n_splits + f) as u64);
                let (train, test) = plan.split(r, f);
                let ctx = FoldCtx {
                    cfg,
                    dataset: &spec.name,
                    repeat: r,
                    fold: f,
                    seed: fold_seed,
                };
                let (mut recs, mut times) = ctx.evaluate(&data, &train, &test);
                progress(&format!(
                    "{} repeat {} fold {}: {:.1}s",
                    spec.name,
                    r + 1,
                    f + 1,
                    t0.elapsed().as_secs_f64()
                ));
                folds.append(&mut recs);
                timings.append(&mut times);
            }
        }
    }
    let rows = aggregate(cfg, &folds, &timings);
    Ok(ResultTable {
        config: cfg.clone(),
        rows,
        folds,
        timings,
    })
}

/// The (method, J) cells a config produces, in report order.
pub(crate) fn cells(cfg: &ExperimentConfig) -> Vec<(Method, Option<usize>)> {
    let mut methods = cfg.methods.clone();
    methods.sort_unstable();
    methods.dedup();
    let mut js = cfg.j_values.clone();
    js.sort_unstable();
    js.dedup();
    methods
        .into_iter()
        .flat_map(|m| {
            if m == Method::DesClustering {
                js.iter().map(|&j| (m, Some(j))).collect()
            } else {
                vec![(m, None)]
            }
        })
        .collect()
}

fn aggregate(
    cfg: &ExperimentConfig,
    folds: &[FoldRecord],
    timings: &[TimingRecord],
) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for spec in &cfg.datasets {
        for (method, j) in cells(cfg) {
            let recs: Vec<&FoldRecord> = folds
                .iter()
                .filter(|r| r.dataset == spec.name && r.method == method && r.j == j)
                .collect();
            let failure = recs.iter().find_map(|r| r.outcome.as_ref().err().cloned());
            let scores: Vec<&FoldScore> = recs
                .iter()
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            let accs: Vec<f64> = scores.iter().map(|s| s.accuracy).collect();
            let costs: Vec<f64> = scores.iter().map(|s| s.mean_cost).collect();
            let (mean_accuracy, std_accuracy) = if accs.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_std(&accs)
            };
            let sizes: Vec<f64> = scores
                .iter()
                .filter_map(|s| s.model_bytes.map(|b| b as f64))
                .collect();
            let walls: Vec<f64> = timings
                .iter()
                .filter(|t| {
                    t.dataset == spec.name && Some(t.j) == j && method == Method::DesClustering
                })
                .map(|t| t.stats.mean_ns)
                .collect();
            rows.push(ResultRow {
                dataset: spec.name.clone(),
                method,
                j,
                n_folds: scores.len(),
                mean_accuracy,
                std_accuracy,
                mean_cost: if costs.is_empty() {
                    f64::NAN
                } else {
                    mean_std(&costs).0
                },
                mean_wall_ns: (!walls.is_empty()).then(|| mean_std(&walls).0),
                model_bytes: (!sizes.is_empty()).then(|| mean_std(&sizes).0),
                failure,
            });
        }
    }
    rows
}

/// Splits `train` into pool-training and DSEL parts, fits the standardizer on
/// the former, grows the pool on it and scores the pool on the latter.
fn fit_pool_and_dsel(
    train: &Dataset,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(Standardizer, ClassifierPool, Dsel)> {
    let (dsel_idx, pool_idx) =
        stratified_split_indices(train, cfg.dsel_fraction, seed::derive(seed, 1))?;
    let pool_train = train.subset(&pool_idx)?;
    let standardizer = fit_standardizer(&pool_train);
    let pool = generate_pool(
        &standardizer.transform(&pool_train)?,
        &cfg.pool,
        seed::derive(seed, 2),
    )?;
    let dsel = Dsel::from_pool(&pool, &standardizer.transform(&train.subset(&dsel_idx)?)?)?;
    Ok((standardizer, pool, dsel))
}

fn kmeans_params(cfg: &ExperimentConfig) -> KMeansParams {
    KMeansParams {
        k: cfg.k_clusters,
        max_iter: cfg.kmeans.max_iter,
        tol: cfg.kmeans.tol,
        n_init: cfg.kmeans.n_init,
    }
}

/// A deployable DES-Clustering model trained on a whole dataset.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub export: TinyExport,
    pub pool_fingerprint: u32,
    pub dsel_oracle_rate: f64,
    pub n_pool_train: usize,
    pub n_dsel: usize,
}

/// Fits pool, DSEL, clustering and the J-sized competence model on all of
/// `data` (after the config's subset, if any) and packs it.
pub fn train_model(data: &Dataset, cfg: &ExperimentConfig, j: usize) -> Result<TrainedModel> {
    let ds_seed = seed::derive(cfg.seed, 0x7EA1);
    let data = match cfg.subset {
        Some(n) if n < data.n_samples() => data.subset(&stratified_subset_indices(
            data,
            n,
            seed::derive(ds_seed, 0x5B5E7),
        )?)?,
        _ => data.clone(),
    };
    let (standardizer, pool, dsel) = fit_pool_and_dsel(&data, cfg, ds_seed)?;
    let km = fit_kmeans(
        dsel.samples(),
        &kmeans_params(cfg),
        seed::derive(ds_seed, 3),
    )?;
    let cm = build_competence_model(&dsel, &km, cfg.n_acc_for(pool.len()), j)?;
    Ok(TrainedModel {
        export: export_tiny(&standardizer, &cm, &pool)?,
        pool_fingerprint: pool.fingerprint(),
        dsel_oracle_rate: dsel.oracle_rate(),
        n_pool_train: data.n_samples() - dsel.n_samples(),
        n_dsel: dsel.n_samples(),
    })
}

struct FoldCtx<'a> {
    cfg: &'a ExperimentConfig,
    dataset: &'a str,
    repeat: usize,
    fold: usize,
    seed: u64,
}

struct Prepared {
    dsel: Dsel,
    pool: ClassifierPool,
    standardizer: Standardizer,
    test_raw: Dataset,
    test_std: Dataset,
}

impl FoldCtx<'_> {
    fn record(
        &self,
        method: Method,
        j: Option<usize>,
        n_test: usize,
        fp: u32,
        outcome: Result<FoldScore>,
    ) -> FoldRecord {
        FoldRecord {
            dataset: self.dataset.to_string(),
            method,
            j,
            repeat: self.repeat,
            fold: self.fold,
            n_test,
            pool_fingerprint: fp,
            outcome: outcome.map_err(|e| e.to_string()),
        }
    }

    fn prepare(&self, data: &Dataset, train: &[usize], test: &[usize]) -> Result<Prepared> {
        let (standardizer, pool, dsel) =
            fit_pool_and_dsel(&data.subset(train)?, self.cfg, self.seed)?;
        let test_raw = data.subset(test)?;
        let test_std = standardizer.transform(&test_raw)?;
        Ok(Prepared {
            dsel,
            pool,
            standardizer,
            test_raw,
            test_std,
        })
    }

    fn evaluate(
        &self,
        data: &Dataset,
        train: &[usize],
        test: &[usize],
    ) -> (Vec<FoldRecord>, Vec<TimingRecord>) {
        let cells = cells(self.cfg);
        let p = match self.prepare(data, train, test) {
            Ok(p) => p,
            Err(e) => {
                let reason = format!("fold setup failed: {e}");
                let recs = cells
                    .into_iter()
                    .map(|(m, j)| {
                        self.record(
                            m,
                            j,
                            test.len(),
                            0,
                            Err(Error::InvalidArgument(reason.clone())),
                        )
                    })
                    .collect();
                return (recs, Vec::new());
            }
        };
        let fp = p.pool.fingerprint();
        let n = p.test_std.n_samples();
        let mut recs = Vec::new();
        let mut timings = Vec::new();

        let mut regions: Option<Result<Vec<Vec<usize>>>> = None;
        let mut kmeans = None;
        for (method, j) in cells {
            let outcome = match method {
                Method::SingleBest => self.single_best(&p),
                Method::StaticSelection => self.static_sel(&p),
                Method::KnoraU | Method::KnoraE => {
                    let regions = regions.get_or_insert_with(|| {
                        (0..n)
                            .map(|i| p.dsel.neighbors(p.test_std.sample(i), self.cfg.k_neighbors))
                            .collect()
                    });
                    match regions {
                        Ok(regions) => self.knora(&p, method, regions),
                        Err(e) => Err(Error::Selection(e.to_string())),
                    }
                }
                Method::DesClustering => {
                    let km = kmeans.get_or_insert_with(|| {
                        fit_kmeans(
                            p.dsel.samples(),
                            &kmeans_params(self.cfg),
                            seed::derive(self.seed, 3),
                        )
                    });
                    match km {
                        Ok(km) => self.des_clustering(
                            &p,
                            km,
                            j.expect("J set for DES-Clustering"),
                            &mut timings,
                        ),
                        Err(e) => Err(Error::Cluster(e.to_string())),
                    }
                }
                Method::Oracle => {
                    let hits = (0..n)
                        .filter(|&i| {
                            oracle_hit(&p.pool, p.test_std.sample(i), p.test_std.labels()[i])
                        })
                        .count();
                    let nodes: u64 = (0..n)
                        .map(|i| {
                            p.pool
                                .trees()
                                .iter()
                                .map(|t| t.predict(p.test_std.sample(i)).map_or(0, |r| r.1 as u64))
                                .sum::<u64>()
                        })
                        .sum();
                    Ok(FoldScore {
                        accuracy: hits as f64 / n as f64,
                        mean_cost: nodes as f64 / n as f64,
                        model_bytes: None,
                    })
                }
            };
            recs.push(self.record(method, j, n, fp, outcome));
        }
        (recs, timings)
    }

    fn score(
        p: &Prepared,
        mut predict: impl FnMut(&[f32]) -> Result<(u16, u64)>,
    ) -> Result<FoldScore> {
        let n = p.test_std.n_samples();
        let mut correct = 0usize;
        let mut cost = 0u64;
        for i in 0..n {
            let (label, c) = predict(p.test_std.sample(i))?;
            correct += usize::from(label == p.test_std.labels()[i]);
            cost += c;
        }
        Ok(FoldScore {
            accuracy: correct as f64 / n as f64,
            mean_cost: cost as f64 / n as f64,
            model_bytes: None,
        })
    }

    fn single_best(&self, p: &Prepared) -> Result<FoldScore> {
        let tree = p.pool.tree(single_best(&p.dsel));
        Self::score(p, |x| tree.predict(x).map(|(l, c)| (l, c as u64)))
    }

    fn static_sel(&self, p: &Prepared) -> Result<FoldScore> {
        let ens = static_selection(&p.dsel, self.cfg.pct_static)?;
        Self::score(p, |x| {
            crate::selection::predict_static(&p.pool, &ens, x).map(|r| (r.label, r.cost))
        })
    }

    fn knora(&self, p: &Prepared, method: Method, regions: &[Vec<usize>]) -> Result<FoldScore> {
        let search = p.dsel.n_samples() as u64;
        let mut i = 0;
        Self::score(p, |x| {
            let region = &regions[i];
            i += 1;
            let r = if method == Method::KnoraU {
                knora_u_region(&p.dsel, &p.pool, x, region)?
            } else {
                knora_e_region(&p.dsel, &p.pool, x, region)?
            };
            Ok((r.label, r.cost + search))
        })
    }

    fn des_clustering(
        &self,
        p: &Prepared,
        km: &crate::cluster::KMeansModel,
        j: usize,
        timings: &mut Vec<TimingRecord>,
    ) -> Result<FoldScore> {
        let cm = build_competence_model(&p.dsel, km, self.cfg.n_acc_for(p.pool.len()), j)?;
        let export = export_tiny(&p.standardizer, &cm, &p.pool)?;
        let model = Arc::new(export.model);
        let mut engine = TinyEngine::new(model);
        let mut correct = 0usize;
        let mut cost = 0u64;
        let n = p.test_raw.n_samples();
        for i in 0..n {
            let (label, c) = engine.predict(p.test_raw.sample(i))?;
            let reference = des_clustering_predict(&cm, &p.pool, p.test_std.sample(i))?;
            if (label, c) != (reference.label, reference.cost) {
                return Err(Error::ModelCorrupt(format!(
                    "compact engine disagrees with the reference on test sample {i}"
                )));
            }
            correct += usize::from(label == p.test_raw.labels()[i]);
            cost += c;
        }
        if self.cfg.persist_models {
            let dir = self.cfg.out_dir.join("models");
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let stem = format!("{}_r{}_f{}_j{j}", self.dataset, self.repeat, self.fold);
            let path = dir.join(format!("{stem}.tdes"));
            std::fs::write(&path, &export.bytes).map_err(|e| Error::io(&path, e))?;
            let path = dir.join(format!("{stem}.manifest"));
            std::fs::write(&path, export.manifest.to_string()).map_err(|e| Error::io(&path, e))?;
        }
        let t = self.cfg.timing;
        if t.probes > 0 && t.reps > 0 {
            let take: Vec<usize> = (0..n.min(t.probes)).collect();
            let probes = p.test_raw.subset(&take)?;
            timings.push(TimingRecord {
                dataset: self.dataset.to_string(),
                j,
                repeat: self.repeat,
                fold: self.fold,
                stats: measure_inference(&mut engine, &probes, t.warmup, t.reps)?,
            });
        }
        Ok(FoldScore {
            accuracy: correct as f64 / n as f64,
            mean_cost: cost as f64 / n as f64,
            model_bytes: Some(export.bytes.len() as u64),
        })
    }
}
