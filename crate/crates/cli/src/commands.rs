use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use boltzmann_anomaly::anomaly::{classify, fit_threshold, free_energies};
use boltzmann_anomaly::datagen::{generate, split, GenConfig};
use boltzmann_anomaly::eval::{run_sweep, score, SweepPlan};
use boltzmann_anomaly::formats::{
    load_dataset, min_max_normalize, normalized_threshold, save_dataset, write_energy_table, write_epoch_report,
    write_sweep_records, write_verdicts, EnergyRow, Encoding, FileDigest, FormatError, ModelFile, RunManifest,
};
use boltzmann_anomaly::sampler::{derive_seed, SamplerConfig, SamplerKind};
use boltzmann_anomaly::training::{train, TrainConfig};
use boltzmann_anomaly::types::{BmTopology, Dataset, Laterals};
use boltzmann_anomaly::Error as CoreError;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_IO: u8 = 4;
pub const EXIT_MISMATCH: u8 = 5;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self { code, error: error.into() }
    }
}

fn core_code(e: &CoreError) -> u8 {
    match e {
        CoreError::PlacementInfeasible(_) => EXIT_INFEASIBLE,
        CoreError::ShapeMismatch { .. } | CoreError::LengthMismatch { .. } => EXIT_MISMATCH,
        CoreError::InvalidConfig(_)
        | CoreError::InvalidPlan(_)
        | CoreError::PercentileOutOfRange(_)
        | CoreError::TooLargeToEnumerate { .. }
        | CoreError::NonpositiveTemperature { .. } => EXIT_USAGE,
        _ => EXIT_IO,
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        Self::new(core_code(&e), e)
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Self::new(EXIT_IO, e)
    }
}

type CmdResult<T = ()> = std::result::Result<T, Failure>;

#[derive(Debug, Parser)]
#[command(name = "ebm", version, about = "Boltzmann-machine anomaly detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a clustered dataset with anomalies and split it into train/test CSVs.
    Gen(GenArgs),
    /// Train a model and fit its anomaly threshold.
    Train(TrainArgs),
    /// Score a dataset with a trained model.
    Score(ScoreArgs),
    /// Run the greedy hidden-units / epochs / batch-size sweep.
    Sweep(SweepArgs),
    /// Export per-row free energies for plotting.
    Energies(EnergiesArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 7)]
    bits: u32,
    #[arg(long, default_value_t = 5)]
    clusters: usize,
    #[arg(long, default_value_t = 200)]
    per_cluster: usize,
    #[arg(long, default_value_t = 7)]
    anomalies: usize,
    #[arg(long, default_value_t = 6.0)]
    std: f64,
    #[arg(long, default_value_t = 30.0)]
    sep: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    split_ratio: f64,
    /// Output directory for train.csv, test.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyArg {
    Rbm,
    SemiRestricted,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerArg {
    Exact,
    Gibbs,
    Sa,
}

#[derive(Debug, Args, Serialize)]
pub struct SamplerArgs {
    #[arg(long, value_enum, default_value_t = SamplerArg::Gibbs)]
    sampler: SamplerArg,
    /// States per model-phase sampler call.
    #[arg(long, default_value_t = 100)]
    reads: usize,
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// Metropolis sweeps per anneal.
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = 0.1)]
    beta_start: f64,
    /// Final inverse temperature; defaults to 1 / temperature.
    #[arg(long)]
    beta_end: Option<f64>,
    #[arg(long, default_value_t = 0)]
    sampler_seed: u64,
}

impl SamplerArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            kind: match self.sampler {
                SamplerArg::Exact => SamplerKind::ExactEnumeration,
                SamplerArg::Gibbs => SamplerKind::Gibbs,
                SamplerArg::Sa => SamplerKind::SimulatedAnnealing,
            },
            num_reads: self.reads,
            gibbs_burn_in: self.burn_in,
            gibbs_thin: self.thin,
            sa_sweeps: self.sweeps,
            sa_beta_start: self.beta_start,
            sa_beta_end: self.beta_end,
            rng_seed: self.sampler_seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Training dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Bits per coordinate used to encode the dataset.
    #[arg(long, default_value_t = 7)]
    bits: u32,
    /// Model JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch report CSV; defaults to `<out>.report.csv`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TopologyArg::Rbm)]
    topology: TopologyArg,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[command(flatten)]
    #[serde(flatten)]
    sampler: SamplerArgs,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    batch: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 95.0)]
    percentile: f64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 1.0)]
    effective_temperature: f64,
    /// Seeds weight initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Verdict CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Metrics JSON; defaults to `<out>.metrics.json`. Written only for labeled data.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Sweep plan JSON.
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 7)]
    bits: u32,
    /// Output directory for sweep.csv, chosen.json and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EnergiesArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Energy table CSV to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Energies(a) => cmd_energies(a),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn digests(paths: &[&Path]) -> CmdResult<Vec<FileDigest>> {
    paths.iter().map(|p| FileDigest::of(p).map_err(Failure::from)).collect()
}

struct ManifestDraft<'a> {
    command: &'a str,
    config: serde_json::Value,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<&'a Path>,
    outputs: Vec<&'a Path>,
    extra: serde_json::Value,
}

fn write_manifest(path: &Path, draft: ManifestDraft<'_>, started: Instant) -> CmdResult {
    let manifest = RunManifest {
        tool: "ebm".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: draft.command.into(),
        config: draft.config,
        seeds: draft.seeds,
        inputs: digests(&draft.inputs)?,
        outputs: digests(&draft.outputs)?,
        wall_time_secs: started.elapsed().as_secs_f64(),
        created_unix_secs: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        extra: draft.extra,
    };
    manifest.save(path)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("config types serialize")
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure::new(EXIT_IO, anyhow!("creating {}: {e}", dir.display())))
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let started = Instant::now();
    let cfg = GenConfig {
        dim: a.dim,
        bits_per_dim: a.bits,
        num_clusters: a.clusters,
        points_per_cluster: a.per_cluster,
        num_anomalies: a.anomalies,
        cluster_std: a.std,
        min_anomaly_separation: a.sep,
        seed: a.seed,
    };
    let data = generate(&cfg)?;
    let split_seed = derive_seed(a.seed, 1);
    let (train_set, test_set) = split(&data, a.split_ratio, split_seed)?;

    create_dir(&a.out)?;
    let train_path = a.out.join("train.csv");
    let test_path = a.out.join("test.csv");
    save_dataset(&train_path, &train_set)?;
    save_dataset(&test_path, &test_set)?;
    write_manifest(
        &a.out.join("manifest.json"),
        ManifestDraft {
            command: "gen",
            config: to_json(&a),
            seeds: BTreeMap::from([("generate".into(), a.seed), ("split".into(), split_seed)]),
            inputs: vec![],
            outputs: vec![&train_path, &test_path],
            extra: serde_json::json!({
                "total_points": data.len(),
                "train_points": train_set.len(),
                "test_points": test_set.len(),
            }),
        },
        started,
    )
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let started = Instant::now();
    let laterals = match a.topology {
        TopologyArg::Rbm => Laterals::None,
        TopologyArg::SemiRestricted => Laterals::VisibleVisible,
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        sampler: a.sampler.config(),
        shuffle_seed: a.seed,
        temperature: a.temperature,
        effective_temperature: a.effective_temperature,
    };
    cfg.validate()?;
    if !(a.percentile > 0.0 && a.percentile < 100.0) {
        return Err(CoreError::PercentileOutOfRange(a.percentile).into());
    }

    let data = load_dataset(&a.data, a.bits)?;
    if data.is_empty() {
        return Err(Failure::new(EXIT_IO, anyhow!("{} has no rows", a.data.display())));
    }
    let rows = data.encode()?;
    let topology = BmTopology {
        num_visible: rows.width,
        num_hidden: a.hidden,
        laterals,
    };
    let report = train(&rows, topology, &cfg)?;
    let threshold = fit_threshold(&report.params, &rows, a.percentile)?;

    let encoding = Encoding { dim: data.dim, bits_per_dim: data.bits_per_dim };
    ModelFile::new(&report.params, encoding, threshold, cfg.clone()).save(&a.out)?;
    let report_path = a.report.clone().unwrap_or_else(|| sibling(&a.out, "report.csv"));
    write_epoch_report(&report_path, &report.epochs)?;

    let epoch_times: Vec<f64> = report.epochs.iter().map(|e| e.wall_time_secs).collect();
    write_manifest(
        &sibling(&a.out, "manifest.json"),
        ManifestDraft {
            command: "train",
            config: serde_json::json!({ "args": to_json(&a), "resolved": to_json(&cfg), "topology": to_json(&topology) }),
            seeds: BTreeMap::from([("shuffle".into(), cfg.shuffle_seed), ("sampler".into(), cfg.sampler.rng_seed)]),
            inputs: vec![&a.data],
            outputs: vec![&a.out, &report_path],
            extra: serde_json::json!({ "epoch_wall_time_secs": epoch_times, "threshold": threshold }),
        },
        started,
    )
}

/// Loads a dataset in the model's encoding, mapping a dimension mismatch to exit 5.
fn load_for_model(path: &Path, model: &ModelFile) -> CmdResult<Dataset> {
    let data = load_dataset(path, model.encoding.bits_per_dim).map_err(|e| match e {
        FormatError::Model(CoreError::CoordinateOutOfRange { .. }) => Failure::new(EXIT_MISMATCH, e),
        other => other.into(),
    })?;
    if data.dim != model.encoding.dim {
        return Err(Failure::new(
            EXIT_MISMATCH,
            anyhow!(
                "{} has {} dimensions ({} bits) but the model expects {} ({} bits)",
                path.display(),
                data.dim,
                data.num_visible(),
                model.encoding.dim,
                model.topology.num_visible
            ),
        ));
    }
    Ok(data)
}

fn cmd_score(a: ScoreArgs) -> CmdResult {
    let started = Instant::now();
    let model = ModelFile::load(&a.model)?;
    let params = model.params()?;
    let data = load_for_model(&a.data, &model)?;
    let rows = data.encode()?;
    let verdicts = classify(&params, &model.threshold, &rows)?;
    write_verdicts(&a.out, &verdicts, data.labels.as_deref())?;

    let mut outputs: Vec<&Path> = vec![&a.out];
    let metrics_path = a.metrics.clone().unwrap_or_else(|| sibling(&a.out, "metrics.json"));
    let mut metrics_value = serde_json::Value::Null;
    if let Some(labels) = &data.labels {
        let metrics = score(&verdicts, labels)?;
        metrics_value = to_json(&metrics);
        std::fs::write(&metrics_path, serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n")
            .map_err(|e| Failure::new(EXIT_IO, anyhow!("writing {}: {e}", metrics_path.display())))?;
        outputs.push(&metrics_path);
    }
    write_manifest(
        &sibling(&a.out, "manifest.json"),
        ManifestDraft {
            command: "score",
            config: to_json(&a),
            seeds: BTreeMap::new(),
            inputs: vec![&a.model, &a.data],
            outputs,
            extra: serde_json::json!({ "metrics": metrics_value }),
        },
        started,
    )
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    let started = Instant::now();
    let text = std::fs::read_to_string(&a.plan)
        .map_err(|e| Failure::new(EXIT_IO, anyhow!("reading {}: {e}", a.plan.display())))?;
    let plan: SweepPlan = serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_IO, e))?;
    plan.validate()?;
    let train_set = load_dataset(&a.train, a.bits)?;
    let test_set = load_dataset(&a.test, a.bits)?;
    if test_set.labels.is_none() {
        return Err(Failure::new(EXIT_IO, anyhow!("{} must have a label column", a.test.display())));
    }
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Failure::new(EXIT_IO, anyhow!("sweep datasets must be nonempty")));
    }
    let report = run_sweep(&train_set, &test_set, &plan)?;

    create_dir(&a.out)?;
    let curve_path = a.out.join("sweep.csv");
    let chosen_path = a.out.join("chosen.json");
    write_sweep_records(&curve_path, &report.records)?;
    let chosen = serde_json::json!({ "chosen": report.chosen, "stages": report.stages });
    std::fs::write(&chosen_path, serde_json::to_string_pretty(&chosen).expect("report serializes") + "\n")
        .map_err(|e| Failure::new(EXIT_IO, anyhow!("writing {}: {e}", chosen_path.display())))?;
    write_manifest(
        &a.out.join("manifest.json"),
        ManifestDraft {
            command: "sweep",
            config: serde_json::json!({ "args": to_json(&a), "plan": to_json(&plan) }),
            seeds: BTreeMap::from([("plan".into(), plan.seed)]),
            inputs: vec![&a.plan, &a.train, &a.test],
            outputs: vec![&curve_path, &chosen_path],
            extra: serde_json::Value::Null,
        },
        started,
    )
}

fn cmd_energies(a: EnergiesArgs) -> CmdResult {
    let started = Instant::now();
    let sets: Vec<(&str, &PathBuf)> = [("train", a.train.as_ref()), ("test", a.test.as_ref())]
        .into_iter()
        .filter_map(|(tag, p)| p.map(|p| (tag, p)))
        .collect();
    if sets.is_empty() {
        return Err(Failure::new(EXIT_USAGE, anyhow!("pass at least one of --train / --test")));
    }
    let model = ModelFile::load(&a.model)?;
    let params = model.params()?;

    let mut rows = Vec::new();
    for (tag, path) in &sets {
        let data = load_for_model(path, &model)?;
        let energies = free_energies(&params, &data.encode()?)?;
        for (i, e) in energies.into_iter().enumerate() {
            rows.push(EnergyRow {
                split: tag.to_string(),
                row: i,
                free_energy: e,
                normalized: 0.0,
                label: data.labels.as_ref().map(|l| l[i]),
            });
        }
    }
    let energies: Vec<f64> = rows.iter().map(|r| r.free_energy).collect();
    for (r, n) in rows.iter_mut().zip(min_max_normalize(&energies)) {
        r.normalized = n;
    }
    let threshold = model.threshold.value;
    write_energy_table(&a.out, &rows, threshold, normalized_threshold(&energies, threshold))?;

    let mut inputs: Vec<&Path> = vec![&a.model];
    inputs.extend(sets.iter().map(|(_, p)| p.as_path()));
    write_manifest(
        &sibling(&a.out, "manifest.json"),
        ManifestDraft {
            command: "energies",
            config: to_json(&a),
            seeds: BTreeMap::new(),
            inputs,
            outputs: vec![&a.out],
            extra: serde_json::Value::Null,
        },
        started,
    )
}
