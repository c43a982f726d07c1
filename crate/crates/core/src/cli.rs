//! Command-line front end. The `dwc` binary is a thin wrapper around
//! [`run`].

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::aggregation::{entity_usage, SignatureDataset, UsageAggregate};
use crate::completeness::{completeness_report, SubsetOptions};
use crate::error::{Error, Result};
use crate::evaluation::{cross_validate, report, temporal_eval, CvOptions, EvalConfig};
use crate::ids::EntityId;
use crate::ingestion::{load_kb_snapshot, load_usage_log, UsageRecord};
use crate::models::{fit, load_model, save_model, ModelKind, TrainConfig};
use crate::synth::{generate, GenConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "dwc", version, about = "Demand-weighted completeness of a knowledge base")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Group usage records by class signature into a dataset.
    Aggregate(AggregateArgs),
    /// Fit one predictor on a dataset and save it.
    Train(TrainArgs),
    /// Grouped k-fold cross-validation of one predictor.
    Eval(EvalArgs),
    /// Train on one dataset and score later ones.
    Temporal(TemporalArgs),
    /// Score KB entities against predicted demand and rank gaps.
    Completeness(CompletenessArgs),
    /// Generate a synthetic KB with usage logs and ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Overwrite existing output.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub usage: Vec<PathBuf>,
    #[arg(long)]
    pub kb: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub min_support: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub o: OutArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Freq,
    Regr,
    Nn,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Freq => ModelKind::Frequency,
            ModelArg::Regr => ModelKind::Regression,
            ModelArg::Nn => ModelKind::Neural,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

/// Hyper-parameter flags shared by commands that fit models. Unset flags
/// fall back to the config file, then to built-in defaults.
#[derive(Debug, Default, Args)]
pub struct FitFlags {
    /// Flat `key = value` file with training and evaluation settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[command(flatten)]
    pub fit: FitFlags,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub o: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub weighted: Option<OnOff>,
    /// Folds trained concurrently; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub fit: FitFlags,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub o: OutArgs,
}

#[derive(Debug, Args)]
pub struct TemporalArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    pub future: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "nn")]
    pub model: ModelArg,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub fit: FitFlags,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub o: OutArgs,
}

#[derive(Debug, Args)]
pub struct CompletenessArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub kb: PathBuf,
    #[arg(long)]
    pub usage: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    /// File with one entity id per line; defaults to every KB entity.
    #[arg(long)]
    pub entities: Option<PathBuf>,
    /// Weight given to entities with no usage (0 leaves them out).
    #[arg(long, default_value_t = 0.0)]
    pub zero_usage_weight: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub o: OutArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Flat `key = value` generator settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub o: OutArgs,
}

/// Provenance record written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Input path to sha256 hex digest.
    pub inputs: BTreeMap<String, String>,
    pub tool_version: String,
    pub started_at: u64,
    pub finished_at: u64,
}

impl RunManifest {
    fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.to_owned(),
            config: serde_json::to_value(config).map_err(|e| Error::Format(e.to_string()))?,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            started_at: unix_now(),
            finished_at: 0,
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_sha256(path)?);
        Ok(())
    }

    fn write(mut self, path: &Path) -> Result<()> {
        self.finished_at = unix_now();
        write_json(path, &self)
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if entries.next().is_some() && !force {
            return Err(Error::Config(format!(
                "output directory {} is not empty (use --force to overwrite)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn prepare_file(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "{} exists (use --force to overwrite)",
            path.display()
        )));
    }
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

/// Merges a config file with explicit flags: flag over file over default.
fn resolve_config(fit: &FitFlags, threshold: Option<f64>, weighted: Option<OnOff>) -> Result<(TrainConfig, EvalConfig)> {
    let (mut train, mut eval) = match &fit.config {
        None => (TrainConfig::default(), EvalConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_fit_config(&text)?
        }
    };
    if let Some(v) = fit.seed {
        train.seed = v;
    }
    if let Some(v) = fit.epochs {
        train.epochs = v;
    }
    if let Some(v) = fit.lr {
        train.learning_rate = v;
    }
    if let Some(v) = fit.hidden {
        train.hidden = v;
    }
    if let Some(v) = fit.batch_size {
        train.batch_size = v;
    }
    if let Some(v) = fit.l2 {
        train.l2 = v;
    }
    if let Some(t) = threshold {
        train.threshold = t;
        eval.threshold = t;
    }
    if let Some(w) = weighted {
        eval.weight_by_usage = w == OnOff::On;
    }
    train.validate()?;
    eval.validate()?;
    Ok((train, eval))
}

/// Parses a flat `key = value` document holding any [`TrainConfig`] and
/// [`EvalConfig`] keys. A shared key such as `threshold` sets both.
pub fn parse_fit_config(text: &str) -> Result<(TrainConfig, EvalConfig)> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let known: BTreeSet<String> = [
        toml::Table::try_from(TrainConfig::default()),
        toml::Table::try_from(EvalConfig::default()),
    ]
    .into_iter()
    .flat_map(|t| t.expect("defaults serialize").into_iter().map(|(k, _)| k))
    .collect();
    if let Some(k) = table.keys().find(|k| !known.contains(*k)) {
        return Err(Error::Config(format!("unknown config key {k:?}")));
    }
    let train: TrainConfig = table.clone().try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let eval: EvalConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    Ok((train, eval))
}

fn load_records(paths: &[PathBuf], manifest: &mut RunManifest) -> Result<Vec<UsageRecord>> {
    let mut records = Vec::new();
    for p in paths {
        let log = load_usage_log(p)?;
        if !log.malformed.is_empty() {
            log::warn!("{}: skipped {} malformed lines", p.display(), log.malformed.len());
        }
        manifest.input(p)?;
        records.extend(log.records);
    }
    Ok(records)
}

fn cmd_aggregate(a: &AggregateArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Cfg {
        min_support: u64,
    }
    let mut manifest = RunManifest::new("aggregate", &Cfg { min_support: a.min_support })?;
    let kb = load_kb_snapshot(&a.kb)?;
    manifest.input(&a.kb)?;
    let records = load_records(&a.usage, &mut manifest)?;
    let agg = UsageAggregate::from_records(&records, &kb, false);
    let ds = agg.into_dataset(a.min_support)?;
    prepare_dir(&a.out, a.o.force)?;
    ds.save(a.out.join("dataset.ndjson"))?;
    manifest.write(&a.out.join(MANIFEST_FILE))?;
    println!(
        "{} signatures, {} classes, {} relations; {} records skipped (unknown entity)",
        ds.len(),
        ds.vocabulary.n_classes(),
        ds.vocabulary.n_relations(),
        agg.skipped_records
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let kind = ModelKind::from(a.model);
    let (train, _) = resolve_config(&a.fit, None, None)?;
    let mut manifest = RunManifest::new("train", &(kind, &train))?;
    manifest.seeds.insert("train".into(), train.seed);
    let ds = SignatureDataset::load(&a.dataset)?;
    manifest.input(&a.dataset)?;
    prepare_file(&a.out, a.o.force)?;
    let (model, summary) = fit(kind, &ds, &train)?;
    save_model(&model, &a.out)?;
    if let Some(loss) = summary.final_loss {
        log::info!("final loss {loss:.6}");
    }
    if let Some(res) = summary.residual {
        log::info!("training residual {res:.3e}");
    }
    let mut side = a.out.clone().into_os_string();
    side.push(".manifest.json");
    manifest.write(Path::new(&side))?;
    println!(
        "{} model: {} rows, {} parameters{}",
        kind.short_name(),
        summary.rows,
        summary.parameters,
        summary.final_loss.map(|l| format!(", final loss {l:.6}")).unwrap_or_default()
    );
    Ok(())
}

fn dataset_label(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let kind = ModelKind::from(a.model);
    let (train, eval) = resolve_config(&a.fit, a.threshold, a.weighted)?;
    #[derive(Serialize)]
    struct Cfg<'a> {
        model: ModelKind,
        folds: usize,
        train: &'a TrainConfig,
        eval: &'a EvalConfig,
    }
    let mut manifest = RunManifest::new(
        "eval",
        &Cfg {
            model: kind,
            folds: a.folds,
            train: &train,
            eval: &eval,
        },
    )?;
    manifest.seeds.insert("train".into(), train.seed);
    manifest.seeds.insert("folds".into(), train.seed);
    let ds = SignatureDataset::load(&a.dataset)?;
    manifest.input(&a.dataset)?;
    let opts = CvOptions {
        k: a.folds,
        seed: train.seed,
        jobs: a.jobs.max(1),
    };
    if a.folds < 2 {
        return Err(Error::Config(format!("--folds must be >= 2, got {}", a.folds)));
    }
    prepare_dir(&a.out, a.o.force)?;
    let cv = cross_validate(&ds, kind, &train, &eval, opts)?;
    let label = dataset_label(&a.dataset);
    let table = report::tsv_table([(kind.short_name(), label.as_str(), &cv.mean)]);
    write_text(&a.out.join("report.tsv"), &table)?;
    write_json(&a.out.join("report.json"), &cv)?;
    manifest.write(&a.out.join(MANIFEST_FILE))?;
    let head = cv.mean.headline(&eval);
    println!(
        "{} {}-fold {}: jaccard {:.4}, false_neg {:.4}, false_pos {:.4}",
        kind.short_name(),
        a.folds,
        if eval.weight_by_usage { "weighted" } else { "unweighted" },
        head.jaccard,
        head.false_neg,
        head.false_pos
    );
    Ok(())
}

fn cmd_temporal(a: &TemporalArgs) -> Result<()> {
    let kind = ModelKind::from(a.model);
    let (train, eval) = resolve_config(&a.fit, a.threshold, None)?;
    let mut manifest = RunManifest::new("temporal", &(kind, &train, &eval))?;
    manifest.seeds.insert("train".into(), train.seed);
    let base = SignatureDataset::load(&a.train)?;
    manifest.input(&a.train)?;
    let mut future = Vec::with_capacity(a.future.len());
    for p in &a.future {
        future.push((dataset_label(p), SignatureDataset::load(p)?));
        manifest.input(p)?;
    }
    prepare_dir(&a.out, a.o.force)?;
    let rep = temporal_eval(&base, &future, kind, &train, &eval)?;
    let base_label = dataset_label(&a.train);
    let rows = std::iter::once((kind.short_name(), base_label.as_str(), &rep.self_eval))
        .chain(rep.periods.iter().map(|r| (kind.short_name(), r.label.as_str(), &r.metrics)));
    let table = report::tsv_table(rows);
    write_text(&a.out.join("temporal.tsv"), &table)?;
    write_json(&a.out.join("temporal.json"), &rep)?;
    manifest.write(&a.out.join(MANIFEST_FILE))?;
    print!("{table}");
    Ok(())
}

fn cmd_completeness(a: &CompletenessArgs) -> Result<()> {
    let opts = SubsetOptions {
        threshold: a.threshold,
        zero_usage_weight: a.zero_usage_weight,
    };
    #[derive(Serialize)]
    struct Cfg {
        threshold: f64,
        top_k: usize,
        zero_usage_weight: f64,
    }
    let mut manifest = RunManifest::new(
        "completeness",
        &Cfg {
            threshold: a.threshold,
            top_k: a.top_k,
            zero_usage_weight: a.zero_usage_weight,
        },
    )?;
    let model = load_model(&a.model)?;
    manifest.input(&a.model)?;
    let kb = load_kb_snapshot(&a.kb)?;
    manifest.input(&a.kb)?;
    let records = load_records(std::slice::from_ref(&a.usage), &mut manifest)?;
    let usage = entity_usage(&records);
    let entities: Vec<EntityId> = match &a.entities {
        None => kb.entities.keys().cloned().collect(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            manifest.input(p)?;
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(EntityId::new)
                .collect::<Result<_>>()?
        }
    };
    prepare_dir(&a.out, a.o.force)?;
    let rep = completeness_report(&model, &kb, &entities, &usage, opts, a.top_k)?;

    let mut ent = String::from("entity\tscore\tmax_score\tweight\tmissing\tflag\n");
    for (e, w) in rep.per_entity.iter().zip(&rep.weights) {
        ent.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{}\t{}\t{:?}\n",
            e.entity,
            e.score,
            e.truncated_mass,
            w,
            e.missing.len(),
            e.flag
        ));
    }
    write_text(&a.out.join("entities.tsv"), &ent)?;
    let mut gaps = String::from("rank\trelation\tmass\tcompleteness_delta\tentities\n");
    for (i, g) in rep.gaps.iter().enumerate() {
        gaps.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\t{}\n",
            i + 1,
            g.relation,
            g.mass,
            g.completeness_delta,
            g.entities
        ));
    }
    write_text(&a.out.join("gaps.tsv"), &gaps)?;
    #[derive(Serialize)]
    struct Summary {
        threshold: f64,
        entities: usize,
        total_weight: f64,
        subset_score: f64,
        max_score: f64,
    }
    write_json(
        &a.out.join("summary.json"),
        &Summary {
            threshold: rep.threshold,
            entities: rep.per_entity.len(),
            total_weight: rep.total_weight,
            subset_score: rep.subset_score,
            max_score: rep.max_score,
        },
    )?;
    manifest.write(&a.out.join(MANIFEST_FILE))?;
    println!(
        "{} entities, completeness {:.4} of a possible {:.4}",
        rep.per_entity.len(),
        rep.subset_score,
        rep.max_score
    );
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => GenConfig::load(p)?,
        None => GenConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let mut manifest = RunManifest::new("synth", &cfg)?;
    manifest.seeds.insert("generator".into(), cfg.seed);
    if let Some(p) = &a.config {
        manifest.input(p)?;
    }
    prepare_dir(&a.out, a.o.force)?;
    let out = generate(&cfg)?;
    out.write(&a.out)?;
    manifest.write(&a.out.join(MANIFEST_FILE))?;
    println!(
        "{} entities, {} periods, {} clauses in the first period, {} entities with gaps",
        out.kb.len(),
        out.periods.len(),
        out.clauses_drawn[0],
        out.gaps.len()
    );
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Aggregate(a) => cmd_aggregate(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Temporal(a) => cmd_temporal(a),
        Command::Completeness(a) => cmd_completeness(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
