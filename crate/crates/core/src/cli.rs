//! Command-line front end: `generate`, `evaluate`, `ablate`, `select` and
//! `baseline`.
//!
//! Machine-readable results are written as JSON (and CSV for tables) into
//! the output directory; a short human-readable summary goes to stdout.
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 backend
//! error, 5 generation finished with skipped patients.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fidelity::{fidelity_report, FidelityReport};
use crate::generation::{
    build_kb, generate_dataset, load_kb_manifest, random_baseline, BackendConfig, GenerationConfig, GenerationError,
    HttpBackend, KbError, KbMode, LlmBackend, MockBackend, PersonaConfig, PersonaOverrides,
};
use crate::privacy::{privacy_report, PrivacyReport};
use crate::resampling::{bootstrap_delta, DeltaEstimate, FidelityMetric, ResamplingError, DEFAULT_RESAMPLES};
use crate::selection::{load_manifest, score_candidate, select, CandidateRecord, GateConfig, SelectionError, SelectionMode};
use crate::table::{load_table, stratified_split, CategoricalTable, DisorderSchema, TableError, SEX};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;
pub const EXIT_PARTIAL: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("backend error: {0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Data(_) => EXIT_DATA,
            Self::Backend(_) => EXIT_BACKEND,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Backend(_) => CliError::Backend(e.to_string()),
            GenerationError::Knowledge(_) | GenerationError::Persona(_) | GenerationError::PersonaOutsideSchema(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kgsynth", version, about = "Knowledge-guided synthetic questionnaire data: generation and evaluation")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic table with the persona/LLM loop.
    Generate(GenerateArgs),
    /// Fidelity and privacy report for a synthetic table against a real one.
    Evaluate(EvaluateArgs),
    /// Paired bootstrap deltas of knowledge variants against the no-retrieval variant.
    Ablate(AblateArgs),
    /// Privacy-gated selection among candidate samples listed in a manifest.
    Select(SelectArgs),
    /// Random chance-level baseline table.
    Baseline(BaselineArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Schema JSON; defaults to the built-in demo questionnaire.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Use a deterministic mock backend: `severity` (default), `cycle` or `constant:<score>`.
    #[arg(long, num_args = 0..=1, default_missing_value = "severity")]
    pub mock: Option<String>,
    /// Backend configuration JSON (endpoint, model, ...).
    #[arg(long)]
    pub backend: Option<PathBuf>,
    #[arg(long = "n")]
    pub n_patients: Option<usize>,
    /// Knowledge mode: none, dsm, icd or dual.
    #[arg(long)]
    pub kb: Option<KbMode>,
    /// Knowledge manifest JSON (required unless --kb none).
    #[arg(long)]
    pub kb_manifest: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_retries: Option<usize>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub syn: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Quasi-identifier columns for the k-map risk.
    #[arg(long, value_delimiter = ',', default_value = "sex,age")]
    pub qi: Vec<String>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Variant table as `<mode>=<csv>`; repeat for each mode, `none` is required.
    #[arg(long = "variant", value_parser = parse_variant, required = true)]
    pub variants: Vec<(KbMode, PathBuf)>,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    pub n_resamples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Stratification column for the split; `none` disables stratification.
    #[arg(long, default_value = SEX)]
    pub stratify: String,
    /// Seed of the train/tune split.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = GateConfig::default().eo_max)]
    pub eo_max: f64,
    #[arg(long, default_value_t = GateConfig::default().near_share_max)]
    pub near_share_max: f64,
    #[arg(long, default_value_t = GateConfig::default().q05_ham_min)]
    pub q05_ham_min: f64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

fn parse_variant(s: &str) -> Result<(KbMode, PathBuf), String> {
    let (mode, path) = s.split_once('=').ok_or_else(|| format!("expected <mode>=<path>, got `{s}`"))?;
    Ok((mode.parse()?, PathBuf::from(path)))
}

/// Generation run configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub schema: Option<PathBuf>,
    pub kb_mode: Option<KbMode>,
    pub kb_manifest: Option<PathBuf>,
    pub n_patients: Option<usize>,
    pub k: Option<usize>,
    pub master_seed: Option<u64>,
    pub max_retries: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub mock: Option<MockBackend>,
    pub backend: Option<BackendConfig>,
    #[serde(default)]
    pub persona: PersonaOverrides,
}

/// Questionnaire used when `generate` is run without a schema.
pub fn demo_schema() -> DisorderSchema {
    let texts = [
        "Felt sudden waves of fear or dread",
        "Felt anxious, worried, or nervous",
        "Had thoughts that something bad was about to happen",
        "Noticed a racing heart, sweating, or shortness of breath",
        "Felt tense muscles or on edge",
        "Avoided situations because they made me anxious",
        "Left situations early because of anxiety",
        "Spent a lot of time preparing for anxious situations",
        "Distracted myself to avoid thinking about worries",
        "Needed help from others to cope with anxiety",
    ];
    DisorderSchema::new("generic_anxiety", (1..=texts.len()).map(|i| format!("it{i}")).collect())
        .and_then(|s| s.with_item_texts(texts.iter().map(|t| t.to_string()).collect()))
        .expect("demo schema is valid")
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} `{}` not found", path.display())))
    }
}

fn load_schema(path: &Path) -> Result<Arc<DisorderSchema>, CliError> {
    require_file(path, "schema file")?;
    DisorderSchema::load(path)
        .map(Arc::new)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_data(path: &Path, schema: &Arc<DisorderSchema>) -> Result<CategoricalTable, CliError> {
    require_file(path, "table")?;
    load_table(path, Arc::clone(schema)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(data_err)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))
}

fn table_err(e: TableError) -> CliError {
    data_err(e)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run_with_args(std::env::args_os())
}

pub fn run(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| EXIT_OK),
        Command::Ablate(a) => cmd_ablate(a).map(|_| EXIT_OK),
        Command::Select(a) => cmd_select(a).map(|_| EXIT_OK),
        Command::Baseline(a) => cmd_baseline(a).map(|_| EXIT_OK),
    }
}

fn parse_mock(spec: &str) -> Result<MockBackend, CliError> {
    match spec {
        "severity" => Ok(MockBackend::Severity),
        "cycle" => Ok(MockBackend::ItemCycle(5)),
        other => other
            .strip_prefix("constant:")
            .and_then(|s| s.parse().ok())
            .map(MockBackend::Constant)
            .ok_or_else(|| CliError::Config(format!("unknown mock `{other}`"))),
    }
}

pub fn cmd_generate(args: GenerateArgs) -> Result<i32, CliError> {
    let file: RunConfigFile = match &args.config {
        Some(path) => {
            require_file(path, "run config")?;
            let text = fs::read_to_string(path).map_err(config_err)?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfigFile::default(),
    };
    let schema = match args.schema.or(file.schema) {
        Some(path) => load_schema(&path)?,
        None => Arc::new(demo_schema()),
    };
    let mode = args.kb.or(file.kb_mode).unwrap_or(KbMode::NoKb);
    let n_patients = args
        .n_patients
        .or(file.n_patients)
        .ok_or_else(|| CliError::Config("number of patients not given (--n)".into()))?;
    let seed = args
        .seed
        .or(file.master_seed)
        .ok_or_else(|| CliError::Config("seed not given (--seed)".into()))?;
    let out_dir = args.out_dir.or(file.out_dir).unwrap_or_else(|| PathBuf::from("out"));

    let mut config = GenerationConfig::new(mode);
    if let Some(k) = args.k.or(file.k) {
        config.k = k;
    }
    if let Some(r) = args.max_retries.or(file.max_retries) {
        config.max_retries = r;
    }
    if let Some(m) = args.max_in_flight.or(file.max_in_flight) {
        config.max_in_flight = m;
    }
    if config.k == 0 {
        return Err(CliError::Config("k must be at least 1".into()));
    }

    let backend: Box<dyn LlmBackend> = match (&args.mock, &args.backend) {
        (Some(spec), _) => Box::new(parse_mock(spec)?),
        (None, Some(path)) => {
            require_file(path, "backend config")?;
            let text = fs::read_to_string(path).map_err(config_err)?;
            let cfg: BackendConfig =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            config.temperature = cfg.temperature;
            config.max_tokens = cfg.max_tokens;
            Box::new(HttpBackend::new(cfg))
        }
        (None, None) => match (file.mock, file.backend) {
            (Some(mock), _) => Box::new(mock),
            (None, Some(cfg)) => {
                config.temperature = cfg.temperature;
                config.max_tokens = cfg.max_tokens;
                Box::new(HttpBackend::new(cfg))
            }
            (None, None) => {
                return Err(CliError::Config("no backend: pass --mock or --backend <config.json>".into()))
            }
        },
    };

    let index = if mode == KbMode::NoKb {
        None
    } else {
        let manifest = args
            .kb_manifest
            .or(file.kb_manifest)
            .ok_or_else(|| CliError::Config(format!("kb mode `{mode}` needs --kb-manifest")))?;
        require_file(&manifest, "knowledge manifest")?;
        let files = load_kb_manifest(&manifest).map_err(config_err)?;
        for f in &files {
            require_file(&f.path, "knowledge file")?;
        }
        Some(build_kb(&files).map_err(|e: KbError| CliError::Config(e.to_string()))?)
    };
    let personas = PersonaConfig::uniform(&schema).with_overrides(&file.persona);

    prepare_out_dir(&out_dir)?;
    let dataset = generate_dataset(n_patients, &schema, backend.as_ref(), index.as_ref(), &config, &personas, seed)?;
    let stem = format!("{}_{}", file_stem(schema.disorder_name()), mode.name());
    let csv_path = out_dir.join(format!("{stem}.csv"));
    dataset.table.save(&csv_path).map_err(table_err)?;
    write_json(&out_dir.join(format!("{stem}.runlog.json")), &dataset.log)?;
    println!(
        "generated {} of {} patients ({} mode) -> {}",
        dataset.log.n_generated,
        n_patients,
        mode,
        csv_path.display()
    );
    Ok(if dataset.shortfall() > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub disorder: String,
    pub n_real: usize,
    pub n_synthetic: usize,
    pub fidelity: FidelityReport,
    pub privacy: PrivacyReport,
}

pub fn cmd_evaluate(args: EvaluateArgs) -> Result<EvaluationReport, CliError> {
    let schema = load_schema(&args.schema)?;
    let real = load_data(&args.real, &schema)?;
    let syn = load_data(&args.syn, &schema)?;
    let qi: Vec<&str> = args.qi.iter().map(String::as_str).collect();
    let report = EvaluationReport {
        disorder: schema.disorder_name().to_string(),
        n_real: real.n_rows(),
        n_synthetic: syn.n_rows(),
        fidelity: fidelity_report(&real, &syn).map_err(data_err)?,
        privacy: privacy_report(&syn, &real, &qi).map_err(data_err)?,
    };
    prepare_out_dir(&args.out_dir)?;
    write_json(&args.out_dir.join("evaluation.json"), &report)?;
    let (f, p) = (&report.fidelity, &report.privacy);
    println!("{} (real n={}, synthetic n={})", report.disorder, report.n_real, report.n_synthetic);
    println!("  {:<24}{:>10}", "metric", "value");
    for (name, value) in [
        ("mean JSD", f.mean_jsd),
        ("MAE_V error", f.mae_v_error),
        ("ED^2 (Hamming)", f.energy_distance_sq),
        ("exact overlap", p.exact_overlap),
        ("NN q05 (normalized)", p.nn_q05_normalized),
        ("NN q05 (Hamming)", p.nn_q05_hamming),
        ("share d_ham <= 1", p.near_match_share_le1),
        ("k-map risk (avg)", p.k_map_risk_avg),
    ] {
        println!("  {name:<24}{value:>10.4}");
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub disorder: String,
    pub kb_condition: KbMode,
    #[serde(flatten)]
    pub estimate: DeltaEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub disorder: String,
    pub baseline: KbMode,
    pub n_resamples: usize,
    pub seed: u64,
    pub deltas: Vec<AblationRow>,
}

pub fn cmd_ablate(args: AblateArgs) -> Result<AblationReport, CliError> {
    let schema = load_schema(&args.schema)?;
    let mut variants: BTreeMap<KbMode, PathBuf> = BTreeMap::new();
    for (mode, path) in args.variants {
        if variants.insert(mode, path).is_some() {
            return Err(CliError::Config(format!("variant `{mode}` given twice")));
        }
    }
    let no_kb_path = variants
        .get(&KbMode::NoKb)
        .ok_or_else(|| CliError::Config("MissingNoKBVariant: a `none=<csv>` variant is required".into()))?;
    for path in variants.values().chain([&args.real]) {
        require_file(path, "table")?;
    }
    let real = load_data(&args.real, &schema)?;
    let no_kb = load_data(no_kb_path, &schema)?;
    let mut deltas = Vec::new();
    for (&mode, path) in variants.iter().filter(|(m, _)| **m != KbMode::NoKb) {
        let variant = load_data(path, &schema)?;
        for metric in FidelityMetric::ALL {
            let estimate = bootstrap_delta(&real, &no_kb, &variant, metric, args.n_resamples, args.seed).map_err(
                |e| match e {
                    ResamplingError::InsufficientResamples(_) => config_err(e),
                    ResamplingError::Metric(_) => data_err(e),
                },
            )?;
            deltas.push(AblationRow {
                disorder: schema.disorder_name().to_string(),
                kb_condition: mode,
                estimate,
            });
        }
    }
    let report = AblationReport {
        disorder: schema.disorder_name().to_string(),
        baseline: KbMode::NoKb,
        n_resamples: args.n_resamples,
        seed: args.seed,
        deltas,
    };
    prepare_out_dir(&args.out_dir)?;
    write_json(&args.out_dir.join("ablation.json"), &report)?;
    println!("{}: deltas vs none (positive = better than no retrieval)", report.disorder);
    println!("  {:<8}{:<8}{:>10}  {:<24}", "kb", "metric", "delta", "95% CI");
    for row in &report.deltas {
        let e = &row.estimate;
        println!(
            "  {:<8}{:<8}{:>10.4}  [{:.4}, {:.4}]",
            row.kb_condition.name(),
            e.metric_name.name(),
            e.point,
            e.ci_low,
            e.ci_high
        );
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    #[serde(flatten)]
    pub record: CandidateRecord,
    pub passes_gates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub winner_id: String,
    pub mode: SelectionMode,
    pub gates: GateConfig,
    pub train_rows: usize,
    pub tune_rows: usize,
    pub all_scores: Vec<ScoredCandidate>,
}

pub fn cmd_select(args: SelectArgs) -> Result<SelectionReport, CliError> {
    let schema = load_schema(&args.schema)?;
    let gates = GateConfig {
        eo_max: args.eo_max,
        near_share_max: args.near_share_max,
        q05_ham_min: args.q05_ham_min,
    };
    gates.validate().map_err(config_err)?;
    require_file(&args.manifest, "candidate manifest")?;
    let manifest = load_manifest(&args.manifest).map_err(config_err)?;
    if manifest.is_empty() {
        return Err(config_err(SelectionError::EmptyCandidateList));
    }
    for entry in &manifest {
        require_file(&entry.sample_path, "candidate sample")?;
    }
    let real = load_data(&args.real, &schema)?;
    let stratify = (args.stratify != "none").then_some(args.stratify.as_str());
    let (train, tune) = stratified_split(&real, args.train_fraction, stratify, args.seed).map_err(|e| match e {
        TableError::InvalidFraction(_) | TableError::UnknownColumn(_) => config_err(e),
        other => data_err(other),
    })?;
    let mut records = Vec::with_capacity(manifest.len());
    for entry in manifest {
        let sample = load_data(&entry.sample_path, &schema)?;
        let scores = score_candidate(&sample, &train, &tune).map_err(data_err)?;
        records.push(CandidateRecord {
            candidate_id: entry.candidate_id,
            sample_path: entry.sample_path,
            scores,
        });
    }
    let (winner, mode) = select(&records, &gates).map_err(data_err)?;
    let report = SelectionReport {
        winner_id: winner.candidate_id.clone(),
        mode,
        gates,
        train_rows: train.n_rows(),
        tune_rows: tune.n_rows(),
        all_scores: records
            .iter()
            .map(|r| ScoredCandidate {
                passes_gates: gates.passes(&r.scores),
                record: r.clone(),
            })
            .collect(),
    };
    prepare_out_dir(&args.out_dir)?;
    write_json(&args.out_dir.join("selection.json"), &report)?;
    println!(
        "split: {} train / {} tune rows; winner: {} ({:?})",
        report.train_rows, report.tune_rows, report.winner_id, report.mode
    );
    println!("  {:<24}{:>8}{:>8}{:>8}{:>8}  gates", "candidate", "jsd", "eo", "share", "q05");
    for c in &report.all_scores {
        let s = &c.record.scores;
        println!(
            "  {:<24}{:>8.4}{:>8.4}{:>8.4}{:>8.2}  {}",
            c.record.candidate_id,
            s.jsd,
            s.eo,
            s.near_share_le1,
            s.q05_ham,
            if c.passes_gates { "pass" } else { "fail" }
        );
    }
    Ok(report)
}

pub fn cmd_baseline(args: BaselineArgs) -> Result<PathBuf, CliError> {
    let schema = load_schema(&args.schema)?;
    let real = load_data(&args.real, &schema)?;
    let table = random_baseline(&real, args.seed).map_err(table_err)?;
    prepare_out_dir(&args.out_dir)?;
    let path = args.out_dir.join(format!("{}_random.csv", file_stem(schema.disorder_name())));
    table.save(&path).map_err(table_err)?;
    println!("random baseline with {} rows -> {}", table.n_rows(), path.display());
    Ok(path)
}
