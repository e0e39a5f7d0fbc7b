use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, load_idx_pairs, Dataset, LabelColumn};
use crate::error::{Error, Result};
use crate::synthetic;
use crate::trees::PoolConfig;

/// Selection methods, declared in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SingleBest,
    StaticSelection,
    KnoraU,
    KnoraE,
    DesClustering,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::SingleBest,
        Method::StaticSelection,
        Method::KnoraU,
        Method::KnoraE,
        Method::DesClustering,
        Method::Oracle,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            Method::SingleBest => "Single Best",
            Method::StaticSelection => "Static Selection",
            Method::KnoraU => "KNORA-U",
            Method::KnoraE => "KNORA-E",
            Method::DesClustering => "DES-Clustering",
            Method::Oracle => "Oracle",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Method::SingleBest => "single_best",
            Method::StaticSelection => "static_selection",
            Method::KnoraU => "knora_u",
            Method::KnoraE => "knora_e",
            Method::DesClustering => "des_clustering",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match norm.as_str() {
            "single_best" | "sb" => Method::SingleBest,
            "static_selection" | "static" | "ss" => Method::StaticSelection,
            "knora_u" | "knorau" => Method::KnoraU,
            "knora_e" | "knorae" => Method::KnoraE,
            "des_clustering" | "desc" | "des" => Method::DesClustering,
            "oracle" => Method::Oracle,
            _ => return Err(Error::Config(format!("unknown method {s:?}"))),
        })
    }
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// IDX image/label file pairs, concatenated in order.
    Idx { pairs: Vec<(PathBuf, PathBuf)> },
    /// Numeric CSV; `label_column` is a column name or zero-based index.
    Csv { path: PathBuf, label_column: String },
    /// Seeded Gaussian blobs.
    Blobs {
        per_class: usize,
        n_classes: usize,
        n_features: usize,
        spread: f32,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub source: DatasetSource,
}

impl DatasetSpec {
    /// Loads the dataset; relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        let resolve = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        match &self.source {
            DatasetSource::Idx { pairs } => {
                let pairs: Vec<(PathBuf, PathBuf)> = pairs
                    .iter()
                    .map(|(a, b)| (resolve(a), resolve(b)))
                    .collect();
                load_idx_pairs(&pairs)
            }
            DatasetSource::Csv { path, label_column } => {
                let column: LabelColumn = label_column.parse().unwrap_or_else(|e| match e {});
                load_csv(resolve(path), &column)
            }
            DatasetSource::Blobs {
                per_class,
                n_classes,
                n_features,
                spread,
                seed,
            } => Ok(synthetic::blobs(
                *per_class,
                *n_classes,
                *n_features,
                *spread,
                *seed,
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub n_init: usize,
}

impl Default for KMeansSettings {
    fn default() -> Self {
        KMeansSettings {
            max_iter: 300,
            tol: 1e-4,
            n_init: 1,
        }
    }
}

/// Wall-clock measurement of the compact engine. Not used by any check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingConfig {
    /// Test samples timed per fold; 0 disables timing.
    pub probes: usize,
    pub warmup: u32,
    pub reps: u32,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            probes: 200,
            warmup: 1,
            reps: 3,
        }
    }
}

/// Full description of a cross-validated comparison run. Keys missing from a
/// config file take the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Stratified subsample size per dataset; `None` uses every sample and is
    /// written as `subset = "all"`.
    #[serde(with = "subset_repr")]
    pub subset: Option<usize>,
    pub methods: Vec<Method>,
    pub j_values: Vec<usize>,
    pub k_clusters: usize,
    pub k_neighbors: usize,
    /// Accuracy shortlist size; `None` means `ceil(pool_size / 2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_acc: Option<usize>,
    pub pct_static: f64,
    pub n_splits: usize,
    pub n_repeats: usize,
    pub dsel_fraction: f64,
    /// Write each fold's compact models under `out_dir/models`.
    #[serde(default)]
    pub persist_models: bool,
    pub pool: PoolConfig,
    pub kmeans: KMeansSettings,
    pub timing: TimingConfig,
    pub datasets: Vec<DatasetSpec>,
}

pub const DESK_SCALE_SAMPLES: usize = 5000;

mod subset_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Count(usize),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(n) => Repr::Count(*n),
            None => Repr::Word("all".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Count(n) => Ok(Some(n)),
            Repr::Word(w) if w == "all" => Ok(None),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "subset must be a sample count or \"all\", got \"{w}\""
            ))),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk_scale(Vec::new())
    }
}

impl ExperimentConfig {
    /// Every sample of each dataset, all six methods, J in {5, 10, 15, 20}.
    pub fn full(datasets: Vec<DatasetSpec>) -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: PathBuf::from("results"),
            subset: None,
            methods: Method::ALL.to_vec(),
            j_values: vec![5, 10, 15, 20],
            k_clusters: 5,
            k_neighbors: 7,
            n_acc: None,
            pct_static: 0.5,
            n_splits: 5,
            n_repeats: 2,
            dsel_fraction: 0.5,
            persist_models: false,
            pool: PoolConfig::default(),
            kmeans: KMeansSettings::default(),
            timing: TimingConfig::default(),
            datasets,
        }
    }

    /// Same as [`ExperimentConfig::full`] on a stratified 5000-sample subset.
    pub fn desk_scale(datasets: Vec<DatasetSpec>) -> Self {
        ExperimentConfig {
            subset: Some(DESK_SCALE_SAMPLES),
            ..Self::full(datasets)
        }
    }

    pub fn n_acc_for(&self, pool_size: usize) -> usize {
        self.n_acc.unwrap_or(pool_size.div_ceil(2))
    }

    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg = Self::parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validating, for callers that adjust values first.
    pub fn parse_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        let names: BTreeSet<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        if names.len() != self.datasets.len() {
            return bad("dataset names must be unique".into());
        }
        if self.methods.is_empty() {
            return bad("no methods configured".into());
        }
        let pool = self.pool.pool_size();
        if pool == 0 || self.pool.forests.iter().any(|f| f.n_trees == 0) {
            return bad("every forest needs at least one tree".into());
        }
        if self.n_splits < 2 || self.n_repeats == 0 {
            return bad(format!(
                "need n_splits >= 2 and n_repeats >= 1, got {} x {}",
                self.n_splits, self.n_repeats
            ));
        }
        if !(self.dsel_fraction > 0.0 && self.dsel_fraction < 1.0) {
            return bad(format!(
                "dsel_fraction must lie in (0, 1), got {}",
                self.dsel_fraction
            ));
        }
        if self.subset == Some(0) {
            return bad("subset size must be positive".into());
        }
        if self.methods.contains(&Method::StaticSelection)
            && !(self.pct_static > 0.0
                && self.pct_static <= 1.0
                && (self.pct_static * pool as f64).floor() >= 1.0)
        {
            return bad(format!(
                "pct_static {} selects no classifier from {pool}",
                self.pct_static
            ));
        }
        if (self.methods.contains(&Method::KnoraU) || self.methods.contains(&Method::KnoraE))
            && self.k_neighbors == 0
        {
            return bad("k_neighbors must be positive".into());
        }
        if self.methods.contains(&Method::DesClustering) {
            let n_acc = self.n_acc_for(pool);
            if self.j_values.is_empty() {
                return bad("des_clustering needs at least one J".into());
            }
            if n_acc == 0 || n_acc > pool {
                return bad(format!("n_acc {n_acc} outside 1..={pool}"));
            }
            if let Some(&j) = self.j_values.iter().find(|&&j| j == 0 || j > n_acc) {
                return bad(format!("J = {j} outside 1..={n_acc}"));
            }
            if self.k_clusters == 0 || self.k_clusters > u16::MAX as usize {
                return bad(format!("k_clusters {} out of range", self.k_clusters));
            }
            if self.kmeans.max_iter == 0
                || self.kmeans.n_init == 0
                || self.kmeans.tol.is_nan()
                || self.kmeans.tol < 0.0
            {
                return bad("kmeans needs max_iter >= 1, n_init >= 1, tol >= 0".into());
            }
        }
        Ok(())
    }
}
