use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tinydes::data::{load_csv, load_idx_pairs, Dataset, LabelColumn};
use tinydes::experiment::{
    emit_report, measure_inference, render_table, run_experiment_with, train_model, DatasetSource,
    DatasetSpec, ExperimentConfig, Method, DESK_SCALE_SAMPLES,
};
use tinydes::tinyformat::{emit_static_source, load_tiny, TinyModel};

#[derive(Parser)]
#[command(
    name = "tinydes",
    version,
    about = "Clustering-based dynamic ensemble selection for small devices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a DES-Clustering model on a dataset and write a .tdes file.
    Train(TrainArgs),
    /// Run repeated stratified cross-validation of the selection methods.
    Crossval(CrossvalArgs),
    /// Time a .tdes model on probe samples.
    BenchInfer(BenchArgs),
    /// Emit a C89 source file equivalent to a .tdes model.
    ExportSrc(ExportArgs),
    /// Print the manifest of a .tdes model.
    Inspect(InspectArgs),
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// Dataset file: an IDX image file (with --labels) or a CSV file. Repeatable;
    /// IDX pairs are concatenated.
    #[arg(long = "dataset", value_name = "PATH")]
    datasets: Vec<PathBuf>,
    /// IDX label file matching each --dataset.
    #[arg(long = "labels", value_name = "PATH")]
    labels: Vec<PathBuf>,
    /// CSV label column, by name or zero-based index.
    #[arg(long, value_name = "COLUMN")]
    label_column: Option<String>,
    /// Dataset name used in reports. Defaults to the first file's stem.
    #[arg(long)]
    name: Option<String>,
}

impl DataArgs {
    fn spec(&self) -> Result<Option<DatasetSpec>> {
        if self.datasets.is_empty() {
            if !self.labels.is_empty() {
                bail!("--labels given without --dataset");
            }
            return Ok(None);
        }
        let source = if !self.labels.is_empty() {
            if self.labels.len() != self.datasets.len() {
                bail!(
                    "{} --dataset files but {} --labels files",
                    self.datasets.len(),
                    self.labels.len()
                );
            }
            DatasetSource::Idx {
                pairs: self
                    .datasets
                    .iter()
                    .cloned()
                    .zip(self.labels.iter().cloned())
                    .collect(),
            }
        } else {
            if self.datasets.len() != 1 {
                bail!("CSV input takes a single --dataset");
            }
            let Some(col) = &self.label_column else {
                bail!("CSV input needs --label-column");
            };
            DatasetSource::Csv {
                path: self.datasets[0].clone(),
                label_column: col.clone(),
            }
        };
        let name = match &self.name {
            Some(n) => n.clone(),
            None => self.datasets[0]
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
        };
        Ok(Some(DatasetSpec { name, source }))
    }

    fn load(&self) -> Result<Dataset> {
        let Some(spec) = self.spec()? else {
            bail!("no --dataset given");
        };
        Ok(match spec.source {
            DatasetSource::Idx { pairs } => load_idx_pairs(&pairs)?,
            DatasetSource::Csv { path, label_column } => {
                let col: LabelColumn = label_column.parse().unwrap_or_else(|e| match e {});
                load_csv(path, &col)?
            }
            DatasetSource::Blobs { .. } => unreachable!("not constructed from flags"),
        })
    }
}

/// Protocol flags shared by `train` and `crossval`; each overrides the config.
#[derive(Args, Clone, Default)]
struct ProtocolArgs {
    /// Experiment config in TOML; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Clusters (regions of competence).
    #[arg(long)]
    clusters: Option<usize>,
    /// Accuracy shortlist size per cluster.
    #[arg(long)]
    n_acc: Option<usize>,
    /// Fraction of each training fold held out as DSEL.
    #[arg(long)]
    dsel_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use a stratified 5000-sample subset.
    #[arg(long, conflicts_with = "full")]
    desk_scale: bool,
    /// Use every sample.
    #[arg(long)]
    full: bool,
}

impl ProtocolArgs {
    fn base_config(&self, data: &DataArgs) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let mut cfg = ExperimentConfig::parse_toml(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                // dataset paths in a config file are relative to the file
                let dir = path.parent().unwrap_or(Path::new("."));
                for d in &mut cfg.datasets {
                    rebase(&mut d.source, dir);
                }
                cfg
            }
            None => ExperimentConfig::default(),
        };
        if let Some(spec) = data.spec()? {
            cfg.datasets = vec![spec];
        }
        if let Some(v) = self.clusters {
            cfg.k_clusters = v;
        }
        if let Some(v) = self.n_acc {
            cfg.n_acc = Some(v);
        }
        if let Some(v) = self.dsel_fraction {
            cfg.dsel_fraction = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.desk_scale {
            cfg.subset = Some(DESK_SCALE_SAMPLES);
        }
        if self.full {
            cfg.subset = None;
        }
        Ok(cfg)
    }
}

fn rebase(source: &mut DatasetSource, dir: &Path) {
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = dir.join(&*p);
        }
    };
    match source {
        DatasetSource::Idx { pairs } => pairs.iter_mut().for_each(|(a, b)| {
            fix(a);
            fix(b);
        }),
        DatasetSource::Csv { path, .. } => fix(path),
        DatasetSource::Blobs { .. } => {}
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Ensemble size per cluster.
    #[arg(long, default_value_t = 10)]
    j: usize,
    /// Output .tdes path; the manifest is written next to it.
    #[arg(long, default_value = "model.tdes")]
    out: PathBuf,
}

#[derive(Args)]
struct CrossvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Methods to evaluate (repeatable or comma separated).
    #[arg(long = "method", value_delimiter = ',')]
    methods: Vec<Method>,
    /// DES-Clustering ensemble sizes (repeatable or comma separated).
    #[arg(long, value_delimiter = ',')]
    j: Vec<usize>,
    /// Neighbourhood size for KNORA-U and KNORA-E.
    #[arg(long)]
    neighbors: Option<usize>,
    /// Fraction of the pool kept by Static Selection.
    #[arg(long)]
    pct_static: Option<f64>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Model to time.
    #[arg(long)]
    model: PathBuf,
    /// Probe samples (raw features); uniform random probes in [0, 1) when absent.
    #[command(flatten)]
    data: DataArgs,
    /// Number of probes used.
    #[arg(long, default_value_t = 1000)]
    probes: usize,
    #[arg(long, default_value_t = 1)]
    warmup: u32,
    #[arg(long, default_value_t = 5)]
    reps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    /// Output C file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    /// Model to describe. Its `.manifest` sidecar, when present, adds the tree remap.
    model: PathBuf,
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn read_model(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn manifest_path(model: &Path) -> PathBuf {
    model.with_extension("manifest")
}

fn train(args: TrainArgs) -> Result<()> {
    let cfg = args.protocol.base_config(&args.data)?;
    let data = match args.data.spec()? {
        Some(_) => args.data.load()?,
        None => match cfg.datasets.first() {
            Some(spec) => spec.load(Path::new("."))?,
            None => bail!("no dataset: pass --dataset or a --config with one"),
        },
    };
    if args.j == 0 || args.j > cfg.n_acc_for(cfg.pool.pool_size()) {
        bail!(
            "--j must lie in 1..={}",
            cfg.n_acc_for(cfg.pool.pool_size())
        );
    }
    let m = train_model(&data, &cfg, args.j)?;
    std::fs::write(&args.out, &m.export.bytes)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let mpath = manifest_path(&args.out);
    std::fs::write(&mpath, m.export.manifest.to_string())
        .with_context(|| format!("writing {}", mpath.display()))?;
    eprintln!(
        "wrote {} ({} bytes, {} of {} trees kept); pool trained on {} samples, DSEL {} samples, DSEL oracle rate {:.4}",
        args.out.display(),
        m.export.bytes.len(),
        m.export.model.pool_size(),
        cfg.pool.pool_size(),
        m.n_pool_train,
        m.n_dsel,
        m.dsel_oracle_rate
    );
    Ok(())
}

fn crossval(args: CrossvalArgs) -> Result<()> {
    let mut cfg = args.protocol.base_config(&args.data)?;
    if !args.methods.is_empty() {
        cfg.methods = args.methods;
    }
    if !args.j.is_empty() {
        cfg.j_values = args.j;
    }
    if let Some(v) = args.neighbors {
        cfg.k_neighbors = v;
    }
    if let Some(v) = args.pct_static {
        cfg.pct_static = v;
    }
    if let Some(v) = args.splits {
        cfg.n_splits = v;
    }
    if let Some(v) = args.repeats {
        cfg.n_repeats = v;
    }
    if let Some(v) = args.out {
        cfg.out_dir = v;
    }
    if cfg.datasets.is_empty() {
        bail!("no dataset: pass --dataset or a --config with one");
    }
    // absolute paths keep the written config.toml usable from anywhere
    let cwd = std::env::current_dir()?;
    for d in &mut cfg.datasets {
        rebase(&mut d.source, &cwd);
    }
    cfg.validate()?;
    let table = run_experiment_with(&cfg, Path::new("."), |line| eprintln!("{line}"))?;
    let files = emit_report(&table, &cfg.out_dir)?;
    emit(&render_table(&table))?;
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let bytes = read_model(&args.model)?;
    let mut engine = load_tiny(&bytes)?;
    let nf = engine.model().n_features();
    let probes = if args.data.datasets.is_empty() {
        let rows = tinydes::synthetic::uniform(args.probes.max(1), nf, 0.0, 1.0, args.seed);
        let flat = rows.into_iter().flatten().collect();
        let x = tinydes::Matrix::new(args.probes.max(1), nf, flat)?;
        Dataset::new(x, vec![0; args.probes.max(1)], 1)?
    } else {
        let d = args.data.load()?;
        let take: Vec<usize> = (0..d.n_samples().min(args.probes.max(1))).collect();
        d.subset(&take)?
    };
    let s = measure_inference(&mut engine, &probes, args.warmup, args.reps)?;
    emit(&format!(
        "probes        {}\nmean_ns       {:.1}\nstd_ns        {:.1}\nmean_cost     {:.3}\n",
        s.n_probes, s.mean_ns, s.std_ns, s.mean_cost
    ))
}

fn export_src(args: ExportArgs) -> Result<()> {
    let src = emit_static_source(&read_model(&args.model)?)?;
    match args.out {
        Some(p) => std::fs::write(&p, src).with_context(|| format!("writing {}", p.display()))?,
        None => emit(&src)?,
    }
    Ok(())
}

fn inspect(args: InspectArgs) -> Result<()> {
    let model = TinyModel::from_bytes(&read_model(&args.model)?)?;
    let sidecar = manifest_path(&args.model);
    let remap: Option<Vec<usize>> = std::fs::read_to_string(&sidecar).ok().map(|text| {
        text.lines()
            .filter_map(|l| l.strip_prefix("remap."))
            .filter(|l| !l.starts_with("count"))
            .filter_map(|l| l.split_once(" = ").and_then(|(_, v)| v.trim().parse().ok()))
            .collect()
    });
    emit(&model.manifest(remap.as_deref()).to_string())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(a) => train(a),
        Command::Crossval(a) => crossval(a),
        Command::BenchInfer(a) => bench(a),
        Command::ExportSrc(a) => export_src(a),
        Command::Inspect(a) => inspect(a),
    }
}
