//! Command-line front end. `run` returns the process exit status:
//! 0 on success, 1 when validation finds errors, 2 on operational failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adapt::{self, synthetic, topk_tokens, NliTriplet, ToyEncoder, TrainConfig, VocabProjection};
use crate::capst;
use crate::corpus::{self, CorpusEntry};
use crate::embed_store::{default_ids_path, read_embeddings, write_embeddings, EmbeddingMatrix};
use crate::judge::{Aspect, BackendKind, Judge, JudgeConfig};
use crate::report::{
    render, EmbeddingSummary, EvalReport, ExtractionResult, Format, Payload, TopkResult, TrainingResult,
    ValidationSummary,
};
use crate::retrieval::{eval_retrieval, rebias, BiasOrientation, RecallTable, Split, DEFAULT_KS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "careval", version, about = "Fine-grained video caption and retrieval evaluation")]
pub struct Cli {
    /// TOML file whose `[<subcommand>]` table supplies default flag values.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a corpus file for schema and content problems.
    #[command(args_override_self = true)]
    Validate(ValidateArgs),
    /// Summarize a corpus: counts per category, mean caption length, mean duration.
    #[command(args_override_self = true)]
    Stats(StatsArgs),
    /// Recall@K in both directions from text and video embedding files.
    #[command(args_override_self = true)]
    EvalRetrieval(EvalRetrievalArgs),
    /// Bias between spatial-split and temporal-split recall.
    #[command(args_override_self = true)]
    Rebias(RebiasArgs),
    /// CapST precision, recall, and F1 of predicted captions.
    #[command(args_override_self = true)]
    EvalCaption(EvalCaptionArgs),
    /// Run the judge's element extraction on free text.
    #[command(args_override_self = true)]
    ExtractElements(ExtractArgs),
    /// Train the toy contrastive text encoder.
    #[command(args_override_self = true)]
    TrainAdapt(TrainArgs),
    /// Encode texts with a trained toy encoder into a CAREEMB1 file.
    #[command(args_override_self = true)]
    EmbedText(EmbedTextArgs),
    /// Highest-logit vocabulary tokens for the embedding of each text.
    #[command(args_override_self = true)]
    TopkTokens(TopkArgs),
    /// Re-render a saved JSON report.
    #[command(args_override_self = true)]
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Stats(_) => "stats",
            Command::EvalRetrieval(_) => "eval-retrieval",
            Command::Rebias(_) => "rebias",
            Command::EvalCaption(_) => "eval-caption",
            Command::ExtractElements(_) => "extract-elements",
            Command::TrainAdapt(_) => "train-adapt",
            Command::EmbedText(_) => "embed-text",
            Command::TopkTokens(_) => "topk-tokens",
            Command::Report(_) => "report",
        }
    }
}

const SUBCOMMANDS: [&str; 10] = [
    "validate",
    "stats",
    "eval-retrieval",
    "rebias",
    "eval-caption",
    "extract-elements",
    "train-adapt",
    "embed-text",
    "topk-tokens",
    "report",
];

/// Where and how the report goes. Not part of the echoed configuration.
#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Stamp the report with the current UTC time.
    #[arg(long)]
    pub timestamp: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalRetrievalArgs {
    #[arg(long, value_name = "PATH")]
    pub text_emb: PathBuf,
    /// Defaults to `<text-emb>.ids`.
    #[arg(long, value_name = "PATH")]
    pub text_ids: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub video_emb: PathBuf,
    /// Defaults to `<video-emb>.ids`.
    #[arg(long, value_name = "PATH")]
    pub video_ids: Option<PathBuf>,
    #[arg(long, default_value = "general")]
    pub split: Split,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS)]
    pub ks: Vec<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RebiasArgs {
    /// Spatial-split recalls: t2v R@1,R@5,R@10 then v2t R@1,R@5,R@10.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub spatial: Vec<f64>,
    /// Temporal-split recalls in the same layout.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub temporal: Vec<f64>,
    /// Retrieval report to take the spatial table from, instead of `--spatial`.
    #[arg(long, value_name = "PATH", conflicts_with = "spatial")]
    pub spatial_report: Option<PathBuf>,
    #[arg(long, value_name = "PATH", conflicts_with = "temporal")]
    pub temporal_report: Option<PathBuf>,
    #[arg(long, default_value = "table3_compatible")]
    pub orientation: BiasOrientation,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct JudgeArgs {
    /// TOML file with judge settings; the flags below override it.
    #[arg(long, value_name = "PATH")]
    pub judge_config: Option<PathBuf>,
    #[arg(long)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub judge_model: Option<String>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub element_cap: Option<usize>,
}

impl JudgeArgs {
    pub fn resolve(&self) -> Result<JudgeConfig> {
        let mut cfg = match &self.judge_config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing judge config {}", p.display()))?
            }
            None => JudgeConfig::default(),
        };
        if let Some(b) = self.backend {
            cfg.backend = b;
        }
        if let Some(m) = &self.judge_model {
            cfg.model_name = m.clone();
        }
        if let Some(u) = &self.base_url {
            cfg.base_url = Some(u.clone());
        }
        if let Some(d) = &self.cache_dir {
            cfg.cache_dir = Some(d.clone());
        }
        if let Some(n) = self.max_in_flight {
            cfg.max_in_flight = n;
        }
        if let Some(n) = self.element_cap {
            cfg.element_cap = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalCaptionArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [Aspect::Event, Aspect::Object])]
    pub aspects: Vec<Aspect>,
    #[command(flatten)]
    pub judge: JudgeArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExtractArgs {
    #[arg(long, required = true)]
    pub text: Vec<String>,
    #[arg(long, default_value = "event")]
    pub aspect: Aspect,
    #[command(flatten)]
    pub judge: JudgeArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Newline-delimited JSON triplets.
    #[arg(long, value_name = "PATH", required_unless_present = "synthetic")]
    pub triplets: Option<PathBuf>,
    /// Generate this many synthetic topic triplets instead of reading a file.
    #[arg(long, value_name = "N", conflicts_with = "triplets")]
    pub synthetic: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[arg(long, value_name = "PATH")]
    pub held_out: Option<PathBuf>,
    /// Synthetic held-out triplets drawn from a different seed than training.
    #[arg(long, value_name = "N", conflicts_with = "held_out")]
    pub held_out_synthetic: Option<usize>,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().tau)]
    pub tau: f64,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().dim)]
    pub dim: usize,
    /// Where to save the trained encoder.
    #[arg(long, value_name = "PATH")]
    pub checkpoint_out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CaptionField {
    General,
    Spatial,
    Temporal,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmbedTextArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Embed one caption field of every corpus entry, keyed by entry id.
    #[arg(long, value_name = "PATH", required_unless_present = "texts")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "general")]
    pub field: CaptionField,
    /// Newline-delimited JSON `{"id": ..., "text": ...}` records.
    #[arg(long, value_name = "PATH", conflicts_with = "corpus")]
    pub texts: Option<PathBuf>,
    /// CAREEMB1 output; ids go to `<emb-out>.ids`.
    #[arg(long, value_name = "PATH")]
    pub emb_out: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TopkArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[arg(long, required = true)]
    pub text: Vec<String>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// A JSON report written by any other subcommand.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

fn toml_scalar(v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        other => bail!("unsupported config value {other}"),
    })
}

/// Flags for `subcommand` taken from its table in the config file. Keys are
/// flag names without the leading dashes; arrays become comma lists.
pub fn config_flags(text: &str, subcommand: &str) -> Result<Vec<String>> {
    let doc: toml::Table = toml::from_str(text).context("parsing config file")?;
    let Some(table) = doc.get(subcommand) else {
        return Ok(Vec::new());
    };
    let table = table
        .as_table()
        .ok_or_else(|| anyhow!("config entry `{subcommand}` must be a table"))?;
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => out.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items.iter().map(toml_scalar).collect::<Result<Vec<_>>>()?;
                out.push(format!("{flag}={}", parts.join(",")));
            }
            scalar => out.push(format!("{flag}={}", toml_scalar(scalar)?)),
        }
    }
    Ok(out)
}

/// Insert config-file flags right after the subcommand name, leaving out any
/// flag the user typed, so command-line values always win.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let mut config_path = None;
    for (i, a) in argv.iter().enumerate().skip(1) {
        if a == "--" {
            break;
        }
        if a == "--config" {
            config_path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let Some(pos) = argv.iter().skip(1).position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let pos = pos + 1;
    let text = fs::read_to_string(&path).with_context(|| format!("reading config file {path}"))?;
    let flag_name = |a: &str| a.split('=').next().unwrap_or(a).to_string();
    let typed: Vec<String> = argv[pos + 1..]
        .iter()
        .filter(|a| a.starts_with("--"))
        .map(|a| flag_name(a))
        .collect();
    let flags: Vec<String> = config_flags(&text, &argv[pos])?
        .into_iter()
        .filter(|f| !typed.contains(&flag_name(f)))
        .collect();
    let mut out = argv[..=pos].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

struct Outcome {
    report: EvalReport,
    /// Validation found errors; the report is still written.
    findings: bool,
}

fn echo(args: &impl Serialize) -> Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn emit(report: &EvalReport, out: &OutputArgs) -> Result<()> {
    let text = render(report, out.format);
    match &out.output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn ids_or_default(ids: &Option<PathBuf>, data: &Path) -> PathBuf {
    ids.clone().unwrap_or_else(|| default_ids_path(data))
}

fn load_recall_table(path: &Path, want: Split) -> Result<RecallTable> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report = EvalReport::from_json(&text).with_context(|| format!("parsing report {}", path.display()))?;
    let Payload::Retrieval(tables) = report.payload else {
        bail!("{} is not a retrieval report", path.display());
    };
    tables
        .into_iter()
        .find(|t| t.split == want)
        .ok_or_else(|| anyhow!("{} has no {want} table", path.display()))
}

fn recall_from(values: &[f64], report: &Option<PathBuf>, split: Split, flag: &str) -> Result<RecallTable> {
    match report {
        Some(p) => load_recall_table(p, split),
        None if values.is_empty() => bail!("give --{flag} or --{flag}-report"),
        None => Ok(RecallTable::from_r1_r5_r10(split, values)?),
    }
}

#[derive(Deserialize)]
struct TextRecord {
    id: String,
    text: String,
}

fn read_text_records(path: &Path) -> Result<Vec<TextRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1))
        })
        .collect()
}

fn field_text(e: &CorpusEntry, field: CaptionField) -> &str {
    match field {
        CaptionField::General => &e.captions.general,
        CaptionField::Spatial => &e.captions.spatial,
        CaptionField::Temporal => &e.captions.temporal,
    }
}

fn execute(command: &Command) -> Result<Outcome> {
    let name = command.name();
    let done = |report: EvalReport| Ok(Outcome { report, findings: false });
    match command {
        Command::Validate(a) => {
            let entries = corpus::load_corpus(&a.corpus)?;
            let summary = ValidationSummary::from_reports(entries.iter().map(corpus::validate_entry).collect());
            let findings = summary.errors > 0;
            let report = EvalReport::new(name, echo(a), Payload::Validation(summary));
            Ok(Outcome { report, findings })
        }
        Command::Stats(a) => {
            let entries = corpus::load_corpus(&a.corpus)?;
            done(EvalReport::new(name, echo(a), Payload::Stats(corpus::corpus_stats(&entries)?)))
        }
        Command::EvalRetrieval(a) => {
            let texts = read_embeddings(&a.text_emb, ids_or_default(&a.text_ids, &a.text_emb))?;
            let videos = read_embeddings(&a.video_emb, ids_or_default(&a.video_ids, &a.video_emb))?;
            let table = eval_retrieval(a.split, &texts, &videos, &a.ks)?;
            done(EvalReport::new(name, echo(a), Payload::Retrieval(vec![table])))
        }
        Command::Rebias(a) => {
            let s = recall_from(&a.spatial, &a.spatial_report, Split::Spatial, "spatial")?;
            let t = recall_from(&a.temporal, &a.temporal_report, Split::Temporal, "temporal")?;
            let score = rebias(&s, &t, a.orientation)?;
            done(
                EvalReport::new(name, echo(a), Payload::Rebias(score))
                    .with_provenance("orientation", a.orientation.provenance()),
            )
        }
        Command::EvalCaption(a) => {
            let cfg = a.judge.resolve()?;
            let entries = corpus::load_corpus(&a.corpus)?;
            let preds = corpus::load_predictions(&a.predictions, Some(&entries))?;
            let judge = Judge::new(cfg.clone())?;
            let outcomes = capst::evaluate_captions(&judge, &entries, &preds, &a.aspects)?;
            let result = capst::aggregate(&outcomes, &entries)?;
            let mut config = echo(a);
            config["judge_resolved"] = echo(&cfg);
            done(
                EvalReport::new(name, config, Payload::Capst(result))
                    .with_provenance("judge", capst::provenance(&judge)),
            )
        }
        Command::ExtractElements(a) => {
            let cfg = a.judge.resolve()?;
            let judge = Judge::new(cfg.clone())?;
            let mut results = Vec::new();
            for t in &a.text {
                let ex = judge.extract_elements(t, a.aspect)?;
                results.push(ExtractionResult {
                    text: t.clone(),
                    aspect: a.aspect,
                    elements: ex.elements.into_iter().map(|e| e.text).collect(),
                    truncated: ex.truncated,
                });
            }
            let mut config = echo(a);
            config["judge_resolved"] = echo(&cfg);
            done(
                EvalReport::new(name, config, Payload::Extraction(results))
                    .with_provenance("judge", capst::provenance(&judge)),
            )
        }
        Command::TrainAdapt(a) => {
            let triplets: Vec<NliTriplet> = match (&a.triplets, a.synthetic) {
                (Some(p), _) => adapt::load_triplets(p)?,
                (None, Some(n)) => synthetic::topic_triplets(n, a.data_seed),
                (None, None) => bail!("give --triplets or --synthetic"),
            };
            let held_out = match (&a.held_out, a.held_out_synthetic) {
                (Some(p), _) => Some(adapt::load_triplets(p)?),
                (None, Some(n)) => Some(synthetic::topic_triplets(n, held_out_seed(a.data_seed))),
                (None, None) => None,
            };
            let cfg = TrainConfig {
                epochs: a.epochs,
                batch_size: a.batch_size,
                learning_rate: a.learning_rate,
                tau: a.tau,
                seed: a.seed,
                dim: a.dim,
            };
            let (enc, summary) = adapt::train(&triplets, &cfg)?;
            enc.save(&a.checkpoint_out)?;
            let result = TrainingResult {
                config: cfg,
                summary,
                train_separation: adapt::separation(&enc, &triplets)?,
                held_out_separation: held_out.map(|h| adapt::separation(&enc, &h)).transpose()?,
            };
            done(EvalReport::new(name, echo(a), Payload::Training(result)))
        }
        Command::EmbedText(a) => {
            let enc = ToyEncoder::load(&a.checkpoint)?;
            let (ids, rows): (Vec<String>, Vec<Vec<f64>>) = match (&a.corpus, &a.texts) {
                (Some(p), _) => corpus::load_corpus(p)?
                    .iter()
                    .map(|e| (e.id.clone(), enc.encode(field_text(e, a.field))))
                    .unzip(),
                (None, Some(p)) => read_text_records(p)?
                    .into_iter()
                    .map(|r| {
                        let v = enc.encode(&r.text);
                        (r.id, v)
                    })
                    .unzip(),
                (None, None) => bail!("give --corpus or --texts"),
            };
            let m = EmbeddingMatrix::from_rows(ids, &rows)?;
            write_embeddings(&m, &a.emb_out, default_ids_path(&a.emb_out))?;
            let summary = EmbeddingSummary {
                rows: m.rows(),
                dim: m.dim(),
                output: a.emb_out.display().to_string(),
            };
            done(EvalReport::new(name, echo(a), Payload::Embedding(summary)))
        }
        Command::TopkTokens(a) => {
            let enc = ToyEncoder::load(&a.checkpoint)?;
            let proj = VocabProjection::from_encoder(&enc);
            let results = a
                .text
                .iter()
                .map(|t| {
                    Ok(TopkResult {
                        text: t.clone(),
                        tokens: topk_tokens(&enc.encode(t), &proj, a.k)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            done(EvalReport::new(name, echo(a), Payload::Topk(results)))
        }
        Command::Report(a) => {
            let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            let report = EvalReport::from_json(&text).with_context(|| format!("parsing {}", a.input.display()))?;
            done(report)
        }
    }
}

/// Seed for synthetic held-out data, distinct from the training data seed.
pub fn held_out_seed(data_seed: u64) -> u64 {
    data_seed ^ 0x5eed_0f4e_1d00
}

fn output_args(command: &Command) -> &OutputArgs {
    match command {
        Command::Validate(a) => &a.out,
        Command::Stats(a) => &a.out,
        Command::EvalRetrieval(a) => &a.out,
        Command::Rebias(a) => &a.out,
        Command::EvalCaption(a) => &a.out,
        Command::ExtractElements(a) => &a.out,
        Command::TrainAdapt(a) => &a.out,
        Command::EmbedText(a) => &a.out,
        Command::TopkTokens(a) => &a.out,
        Command::Report(a) => &a.out,
    }
}

fn run_parsed(cli: &Cli) -> Result<i32> {
    let out = output_args(&cli.command);
    let Outcome { mut report, findings } = execute(&cli.command)?;
    if out.timestamp {
        report.timestamp = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    }
    emit(&report, out)?;
    Ok(if findings { EXIT_FINDINGS } else { EXIT_OK })
}

/// Parse `argv` (including the program name) and run the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<String> = argv
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_FAILURE;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
        }
    };
    match run_parsed(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}
