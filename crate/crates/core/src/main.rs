use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use chisq_triage::corpus::{
    label_by_reference, parse_jsonl, parse_medline_xml, parse_tsv, split_folds, write_jsonl,
    ParseOutcome,
};
use chisq_triage::eval::{
    cohen_kappa, confusion, cross_validate_with, fit_threshold, mcnemar, metrics, ConfusionCounts,
    CrossValReport, MetricSet, ProfileSource,
};
use chisq_triage::synth::{self, SynthConfig};
use chisq_triage::text::{
    nb_cross_validate, FieldSelector, PipelineConfig, StemmerKind, StopwordList,
};
use chisq_triage::{
    build_indicator_profile, build_profile, score_corpus, Citation, DomainLabel, Error,
    ErrorPolicy, ExclusionList, IndicatorProfile, ReferenceList, Threshold, DEFAULT_CRITICAL_VALUE,
    VERSION,
};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_MISSING_ARTIFACT: u8 = 4;
const EXIT_ALIGNMENT: u8 = 5;

const ENV_PREFIX: &str = "TRIAGE_";

#[derive(Parser)]
#[command(
    name = "triage",
    version,
    about = "Chi-square indicator descriptor triage of MEDLINE citations"
)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// TOML file with default values for any option; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert MEDLINE XML, JSONL or TSV into the canonical JSONL corpus.
    Ingest(IngestArgs),
    /// Count descriptors and select chi-square indicators.
    Train(TrainArgs),
    /// Score citations against an indicator profile.
    Score(ScoreArgs),
    /// Cross-validate threshold selection and report metrics.
    Evaluate(EvaluateArgs),
    /// Compare the indicator scorer with naive Bayes and external predictions.
    Compare(CompareArgs),
    /// Write a labeled synthetic corpus with planted indicators.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Input corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Input format: xml, jsonl or tsv (default: from the file extension).
    #[arg(long)]
    format: Option<String>,
    /// Skip malformed records instead of stopping at the first one.
    #[arg(long)]
    skip_errors: bool,
    /// File listing the ids of genetic citations; all others are nongenetic.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// 1-based column of the id in the reference file.
    #[arg(long)]
    reference_column: Option<usize>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: CorpusArgs,
    /// Output JSONL corpus.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectionArgs {
    /// `check-tags` (bundled list), `none`, or a file with one descriptor per line.
    #[arg(long)]
    exclusion: Option<String>,
    #[arg(long)]
    critical_value: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: CorpusArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    input: CorpusArgs,
    /// Indicator profile written by `train`.
    #[arg(long)]
    indicators: Option<PathBuf>,
    /// Minimum score for the genetic label.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<i64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    /// Number of folds.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed indicator profile; without it the profile is rebuilt per fold.
    #[arg(long)]
    indicators: Option<PathBuf>,
    /// Rebuild the profile from each fold's training part even if one is given.
    #[arg(long)]
    refit: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: CorpusArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[command(flatten)]
    cv: CvArgs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: CorpusArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[command(flatten)]
    cv: CvArgs,
    /// Text fed to naive Bayes: title, abstract, title-abstract or descriptors.
    #[arg(long)]
    field: Option<String>,
    /// Stemmer for naive Bayes text features: lovins or none.
    #[arg(long)]
    stemmer: Option<String>,
    /// Stopword file (default: bundled SMART list).
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    min_df: Option<u64>,
    /// Laplace smoothing constant.
    #[arg(long)]
    alpha: Option<f64>,
    /// Leave naive Bayes out of the comparison.
    #[arg(long)]
    no_nb: bool,
    /// External predictions as `id,label` CSV; may be repeated.
    #[arg(long)]
    external: Vec<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    citations: Option<usize>,
    #[arg(long)]
    genetic_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSONL corpus.
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// failures

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn missing(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_MISSING_ARTIFACT,
            message: message.into(),
        }
    }

    fn alignment(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_ALIGNMENT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Xml { .. } | Error::Record { .. } | Error::Line { .. } => {
                EXIT_INPUT
            }
            Error::Model(_) => EXIT_INPUT,
            Error::DegenerateCorpus(_) | Error::DegenerateTable(_) => EXIT_DEGENERATE,
            Error::Alignment(_) => EXIT_ALIGNMENT,
            Error::InvalidArgument(_) | Error::UnknownDescriptor(_) => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

// ---------------------------------------------------------------------------
// settings: flag > config file > environment > default

struct Settings {
    file: toml::Table,
    resolved: BTreeMap<String, Value>,
}

impl Settings {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let path = path
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(format!("{ENV_PREFIX}CONFIG")).map(PathBuf::from));
        let file = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = fs::read_to_string(&p).map_err(|e| Failure::from(e).with_context(&p))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?
            }
        };
        Ok(Settings {
            file,
            resolved: BTreeMap::new(),
        })
    }

    fn lookup<T>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        let parse = |raw: &str, origin: String| {
            raw.parse::<T>()
                .map(Some)
                .map_err(|e| Failure::usage(format!("{origin}: invalid value {raw:?}: {e}")))
        };
        if let Some(v) = self.file.get(key) {
            let raw = match v {
                toml::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            return parse(&raw, format!("config key {key}"));
        }
        let var = format!("{ENV_PREFIX}{}", key.to_ascii_uppercase());
        if let Ok(raw) = std::env::var(&var) {
            return parse(&raw, var);
        }
        Ok(None)
    }

    fn get<T>(&mut self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr + Serialize + Clone,
        T::Err: std::fmt::Display,
    {
        let v = self.lookup(flag, key)?;
        self.record(key, &v);
        Ok(v)
    }

    fn get_or<T>(&mut self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T: FromStr + Serialize + Clone,
        T::Err: std::fmt::Display,
    {
        let v = self.lookup(flag, key)?.unwrap_or(default);
        self.record(key, &Some(v.clone()));
        Ok(v)
    }

    fn require<T>(&mut self, flag: Option<T>, key: &str) -> CliResult<T>
    where
        T: FromStr + Serialize + Clone,
        T::Err: std::fmt::Display,
    {
        self.get(flag, key)?.ok_or_else(|| {
            Failure::usage(format!(
                "missing required option --{}",
                key.replace('_', "-")
            ))
        })
    }

    fn get_flag(&mut self, flag: bool, key: &str) -> CliResult<bool> {
        let v = if flag {
            true
        } else {
            self.lookup(None, key)?.unwrap_or(false)
        };
        self.record(key, &Some(v));
        Ok(v)
    }

    fn record<T: Serialize>(&mut self, key: &str, v: &Option<T>) {
        let value = serde_json::to_value(v).unwrap_or(Value::Null);
        self.resolved.insert(key.to_owned(), value);
    }

    fn set(&mut self, key: &str, value: Value) {
        self.resolved.insert(key.to_owned(), value);
    }

    /// Resolved configuration with toolkit version and a hash of the settings.
    fn document(&self, command: &str) -> Value {
        let settings = serde_json::to_value(&self.resolved).expect("plain values");
        let canonical = serde_json::to_string(&json!({ "command": command, "settings": settings }))
            .expect("plain values");
        let hash = Sha256::digest(canonical.as_bytes());
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        json!({
            "command": command,
            "version": VERSION,
            "config_hash": hex,
            "settings": settings,
        })
    }

    fn config_hash(&self, command: &str) -> String {
        self.document(command)["config_hash"]
            .as_str()
            .unwrap_or_default()
            .to_owned()
    }
}

impl Failure {
    fn with_context(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

fn path_value(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

// ---------------------------------------------------------------------------
// io helpers

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::from(e).with_context(path))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::from(e).with_context(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Failure::from(io::Error::other(e)))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn finish<W: Write>(mut out: W) -> CliResult<()> {
    out.flush()?;
    Ok(())
}

fn out_dir(settings: &mut Settings, flag: Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = settings.get_or(flag.map(|p| path_value(&p)), "out_dir", ".".to_owned())?;
    let dir = PathBuf::from(dir);
    fs::create_dir_all(&dir).map_err(|e| Failure::from(e).with_context(&dir))?;
    Ok(dir)
}

fn write_config(settings: &Settings, command: &str, dir: &Path) -> CliResult<()> {
    write_json(&dir.join("config.json"), &settings.document(command))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Xml,
    Jsonl,
    Tsv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "xml" => Ok(Format::Xml),
            "jsonl" | "json" => Ok(Format::Jsonl),
            "tsv" => Ok(Format::Tsv),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

fn format_of(path: &Path) -> Format {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("xml") => Format::Xml,
        Some("tsv") | Some("txt") => Format::Tsv,
        _ => Format::Jsonl,
    }
}

fn read_corpus(settings: &mut Settings, args: CorpusArgs) -> CliResult<ParseOutcome> {
    let path = PathBuf::from(settings.require(args.corpus.map(|p| path_value(&p)), "corpus")?);
    let format = settings.get(args.format, "format")?;
    let format = format
        .map(|f| f.parse::<Format>().map_err(Failure::usage))
        .transpose()?
        .unwrap_or_else(|| format_of(&path));
    settings.set("format", json!(format));
    let skip = settings.get_flag(args.skip_errors, "skip_errors")?;
    let policy = if skip {
        ErrorPolicy::SkipAndReport
    } else {
        ErrorPolicy::FailFast
    };
    let input = open(&path)?;
    let mut outcome = match format {
        Format::Xml => parse_medline_xml(input, policy),
        Format::Jsonl => parse_jsonl(input, policy),
        Format::Tsv => parse_tsv(input, policy),
    }
    .map_err(|e| Failure::from(e).with_context(&path))?;
    for e in &outcome.errors {
        eprintln!("warning: {}: skipped {e}", path.display());
    }

    let reference = settings.get(args.reference.map(|p| path_value(&p)), "reference")?;
    let column = settings.get_or(args.reference_column, "reference_column", 1usize)?;
    if let Some(reference) = reference {
        let reference = PathBuf::from(reference);
        let list = ReferenceList::read(open(&reference)?, column)
            .map_err(|e| Failure::from(e).with_context(&reference))?;
        label_by_reference(&mut outcome.citations, &list);
    }
    Ok(outcome)
}

fn require_labels(citations: &[Citation]) -> CliResult<()> {
    if let Some(c) = citations.iter().find(|c| c.label.is_none()) {
        return Err(Failure::usage(format!(
            "citation {} has no label; pass --reference or a labeled corpus",
            c.id
        )));
    }
    Ok(())
}

fn exclusion_list(settings: &mut Settings, flag: Option<String>) -> CliResult<ExclusionList> {
    let spec = settings.get_or(flag, "exclusion", "check-tags".to_owned())?;
    match spec.as_str() {
        "check-tags" => Ok(ExclusionList::check_tags()),
        "none" => Ok(ExclusionList::empty()),
        path => {
            let p = Path::new(path);
            ExclusionList::read(open(p)?).map_err(|e| Failure::from(e).with_context(p))
        }
    }
}

fn critical_value(settings: &mut Settings, flag: Option<f64>) -> CliResult<f64> {
    let v = settings.get_or(flag, "critical_value", DEFAULT_CRITICAL_VALUE)?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(Failure::usage(format!(
            "critical value must be non-negative, got {v}"
        )));
    }
    Ok(v)
}

fn load_indicators(path: &Path) -> CliResult<IndicatorProfile> {
    if !path.exists() {
        return Err(Failure::missing(format!(
            "indicator profile {} not found; run `triage train` first",
            path.display()
        )));
    }
    IndicatorProfile::read_csv(open(path)?).map_err(|e| Failure::from(e).with_context(path))
}

fn write_citations_csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

// ---------------------------------------------------------------------------
// commands

#[derive(Serialize)]
struct IngestStats {
    citations: usize,
    skipped_records: usize,
    without_title: usize,
    without_abstract: usize,
    without_descriptors: usize,
    labeled_genetic: usize,
    labeled_nongenetic: usize,
}

fn cmd_ingest(settings: &mut Settings, args: IngestArgs) -> CliResult<()> {
    let outcome = read_corpus(settings, args.input)?;
    let out = PathBuf::from(settings.require(args.out.map(|p| path_value(&p)), "out")?);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let cs = &outcome.citations;
    let count = |f: &dyn Fn(&Citation) -> bool| cs.iter().filter(|c| f(c)).count();
    let stats = IngestStats {
        citations: cs.len(),
        skipped_records: outcome.errors.len(),
        without_title: count(&|c| c.title.is_empty()),
        without_abstract: count(&|c| c.abstract_text.is_none()),
        without_descriptors: count(&|c| c.descriptors.is_empty()),
        labeled_genetic: count(&|c| c.label == Some(DomainLabel::Genetic)),
        labeled_nongenetic: count(&|c| c.label == Some(DomainLabel::NonGenetic)),
    };
    let mut w = create(&out)?;
    write_jsonl(&mut w, cs)?;
    finish(w)?;
    let stats_path = out.with_extension("stats.json");
    let mut doc = serde_json::to_value(&stats).expect("plain values");
    doc["version"] = json!(VERSION);
    doc["config_hash"] = json!(settings.config_hash("ingest"));
    write_json(&stats_path, &doc)?;
    write_json(
        &out.with_extension("config.json"),
        &settings.document("ingest"),
    )?;
    let pct = |n: usize| {
        if cs.is_empty() {
            0.0
        } else {
            100.0 * n as f64 / cs.len() as f64
        }
    };
    println!("citations            {}", stats.citations);
    println!("skipped records      {}", stats.skipped_records);
    println!(
        "without abstract     {} ({:.1}%)",
        stats.without_abstract,
        pct(stats.without_abstract)
    );
    println!(
        "without descriptors  {} ({:.1}%)",
        stats.without_descriptors,
        pct(stats.without_descriptors)
    );
    Ok(())
}

fn cmd_train(settings: &mut Settings, args: TrainArgs) -> CliResult<()> {
    let outcome = read_corpus(settings, args.input)?;
    let exclusion = exclusion_list(settings, args.selection.exclusion)?;
    let critical = critical_value(settings, args.selection.critical_value)?;
    let dir = out_dir(settings, args.out_dir)?;
    let citations = outcome.citations;
    require_labels(&citations)?;

    let profile = build_profile(&citations, &exclusion)?;
    let selection = build_indicator_profile(&profile, &exclusion, critical)?;

    let mut w = create(&dir.join("frequency_profile.csv"))?;
    profile.write_csv(&mut w)?;
    finish(w)?;
    let mut w = create(&dir.join("indicators.csv"))?;
    selection.profile.write_csv(&mut w)?;
    finish(w)?;

    let s = &selection.summary;
    let summary = json!({
        "version": VERSION,
        "config_hash": settings.config_hash("train"),
        "citations": citations.len(),
        "genetic_citations": profile.genetic_total(),
        "nongenetic_citations": profile.nongenetic_total(),
        "without_descriptors": citations.iter().filter(|c| c.descriptors.is_empty()).count(),
        "critical_value": critical,
        "summary": s,
    });
    write_json(&dir.join("train_summary.json"), &summary)?;
    write_config(settings, "train", &dir)?;
    println!("descriptors   {}", s.descriptors);
    println!("excluded      {}", s.excluded);
    println!("significant   {} of {}", s.significant, s.tested);
    println!("positive      {}", s.positive);
    println!("negative      {}", s.negative);
    Ok(())
}

fn cmd_score(settings: &mut Settings, args: ScoreArgs) -> CliResult<()> {
    let outcome = read_corpus(settings, args.input)?;
    let indicators =
        PathBuf::from(settings.require(args.indicators.map(|p| path_value(&p)), "indicators")?);
    let threshold = settings.get(args.threshold, "threshold")?;
    let dir = out_dir(settings, args.out_dir)?;
    let profile = load_indicators(&indicators)?;
    let citations = outcome.citations;
    let report = score_corpus(&citations, &profile);

    let labeled = !citations.is_empty() && citations.iter().all(|c| c.label.is_some());
    let (theta, source) = match threshold {
        Some(t) => (t, "configured"),
        None if labeled => {
            let gold: Vec<DomainLabel> = citations.iter().filter_map(|c| c.label).collect();
            (
                fit_threshold(&report.values(), &gold)?.threshold.0,
                "fitted",
            )
        }
        None => (1, "default"),
    };
    settings.set("threshold", json!(theta));
    settings.set("threshold_source", json!(source));

    let mut w = create(&dir.join("scores.csv"))?;
    report.write_scores_csv(&mut w, Threshold(theta))?;
    finish(w)?;
    let mut w = create(&dir.join("histogram.csv"))?;
    report.write_histogram_csv(&mut w)?;
    finish(w)?;

    let genetic = report.values().iter().filter(|&&s| s >= theta).count();
    let mut summary = json!({
        "version": VERSION,
        "config_hash": settings.config_hash("score"),
        "citations": report.len(),
        "without_descriptors": report.without_descriptors,
        "threshold": theta,
        "threshold_source": source,
        "predicted_genetic": genetic,
        "predicted_nongenetic": report.len() - genetic,
    });
    if labeled {
        let gold: Vec<(&str, DomainLabel)> = citations
            .iter()
            .map(|c| (c.id.as_str(), c.label.expect("labeled")))
            .collect();
        let predicted: Vec<(&str, DomainLabel)> = report
            .scores
            .iter()
            .map(|(id, s)| (id.as_str(), Threshold(theta).classify(*s)))
            .collect();
        let counts = confusion(&predicted, &gold)?;
        summary["counts"] = json!(counts);
        summary["metrics"] = json!(metrics(&counts)?);
    }
    write_json(&dir.join("score_summary.json"), &summary)?;
    write_config(settings, "score", &dir)?;
    println!(
        "scored {} citations, threshold {theta} ({source})",
        report.len()
    );
    println!(
        "predicted genetic {genetic}, nongenetic {}",
        report.len() - genetic
    );
    Ok(())
}

struct CvSetup {
    k: usize,
    seed: u64,
    fixed: Option<IndicatorProfile>,
    exclusion: ExclusionList,
    critical: f64,
}

impl CvSetup {
    fn resolve(settings: &mut Settings, cv: CvArgs, selection: SelectionArgs) -> CliResult<Self> {
        let k = settings.get_or(cv.k, "k", 10usize)?;
        let seed = settings.get_or(cv.seed, "seed", 0u64)?;
        let refit = settings.get_flag(cv.refit, "refit")?;
        let indicators = settings.get(cv.indicators.map(|p| path_value(&p)), "indicators")?;
        let exclusion = exclusion_list(settings, selection.exclusion)?;
        let critical = critical_value(settings, selection.critical_value)?;
        let fixed = match indicators {
            Some(p) if !refit => Some(load_indicators(Path::new(&p))?),
            _ => None,
        };
        settings.set(
            "profile_source",
            json!(if fixed.is_some() {
                "fixed"
            } else {
                "refit-per-fold"
            }),
        );
        Ok(CvSetup {
            k,
            seed,
            fixed,
            exclusion,
            critical,
        })
    }

    fn source(&self) -> ProfileSource<'_> {
        match &self.fixed {
            Some(p) => ProfileSource::Fixed(p),
            None => ProfileSource::RefitPerFold {
                exclusion: &self.exclusion,
                critical_value: self.critical,
            },
        }
    }
}

fn write_calibration(path: &Path, report: &CrossValReport) -> CliResult<()> {
    let mut w = create(path)?;
    let folds: Vec<String> = (1..=report.k).map(|f| format!("fold{f}")).collect();
    writeln!(w, "theta,{},mean", folds.join(","))?;
    for p in &report.calibration {
        let cells: Vec<String> = p.per_fold.iter().map(|a| a.to_string()).collect();
        writeln!(w, "{},{},{}", p.theta, cells.join(","), p.mean)?;
    }
    finish(w)
}

fn write_predictions(path: &Path, report: &CrossValReport) -> CliResult<()> {
    let mut w = create(path)?;
    writeln!(w, "id,fold,score,predicted,gold")?;
    for p in &report.predictions {
        writeln!(
            w,
            "{},{},{},{},{}",
            write_citations_csv_field(&p.id),
            p.fold + 1,
            p.score,
            p.predicted,
            p.gold
        )?;
    }
    finish(w)
}

fn cmd_evaluate(settings: &mut Settings, args: EvaluateArgs) -> CliResult<()> {
    let outcome = read_corpus(settings, args.input)?;
    let setup = CvSetup::resolve(settings, args.cv, args.selection)?;
    let dir = out_dir(settings, args.out_dir)?;
    let citations = outcome.citations;
    require_labels(&citations)?;
    let folds = split_folds(&citations, setup.k, setup.seed)?;
    let report = cross_validate_with(&citations, &folds, setup.source())?;

    let mut doc = serde_json::to_value(&report).expect("plain values");
    let (modal, agreeing) = report.modal_theta();
    doc["modal_theta"] = json!({ "theta": modal, "folds": agreeing });
    doc["version"] = json!(VERSION);
    doc["config_hash"] = json!(settings.config_hash("evaluate"));
    write_json(&dir.join("cv_report.json"), &doc)?;
    write_calibration(&dir.join("calibration.csv"), &report)?;
    write_predictions(&dir.join("predictions.csv"), &report)?;
    write_config(settings, "evaluate", &dir)?;

    println!("fold  theta  train_acc  acc     rec     pre     f");
    for f in &report.folds {
        println!(
            "{:>4}  {:>5}  {:.4}     {:.4}  {:.4}  {:.4}  {:.4}",
            f.fold + 1,
            f.theta,
            f.train_accuracy,
            f.metrics.acc,
            f.metrics.rec,
            f.metrics.pre,
            f.metrics.f
        );
    }
    let m = &report.mean_metrics;
    println!(
        "mean  {:>5.2}             {:.4}  {:.4}  {:.4}  {:.4}",
        report.mean_theta, m.acc, m.rec, m.pre, m.f
    );
    println!("theta {modal} chosen in {agreeing} of {} folds", report.k);
    Ok(())
}

fn read_external(path: &Path, ids: &[&str]) -> CliResult<Vec<DomainLabel>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open(path)?);
    let mut by_id: BTreeMap<String, DomainLabel> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| {
            Failure::from(Error::Line {
                line: i + 2,
                message: e.to_string(),
            })
            .with_context(path)
        })?;
        let (Some(id), Some(label)) = (row.get(0), row.get(1)) else {
            return Err(Failure::from(Error::Line {
                line: i + 2,
                message: "expected id,label".into(),
            })
            .with_context(path));
        };
        let label: DomainLabel = label.parse().map_err(|e: Error| {
            Failure::from(Error::Line {
                line: i + 2,
                message: e.to_string(),
            })
            .with_context(path)
        })?;
        if by_id.insert(id.trim().to_owned(), label).is_some() {
            return Err(Failure::alignment(format!(
                "{}: duplicate id {id}",
                path.display()
            )));
        }
    }
    if let Some(unknown) = by_id.keys().find(|id| !ids.contains(&id.as_str())) {
        return Err(Failure::alignment(format!(
            "{}: id {unknown} is not in the corpus",
            path.display()
        )));
    }
    ids.iter()
        .map(|id| {
            by_id.get(*id).copied().ok_or_else(|| {
                Failure::alignment(format!("{}: no prediction for id {id}", path.display()))
            })
        })
        .collect()
}

#[derive(Serialize)]
struct SystemReport {
    name: String,
    counts: ConfusionCounts,
    metrics: MetricSet,
    fold_metrics: Vec<MetricSet>,
    mean_fold_metrics: MetricSet,
}

#[derive(Serialize)]
struct PairReport {
    a: String,
    b: String,
    pooled: chisq_triage::eval::McNemarResult,
    per_fold_statistic: Vec<f64>,
    mean_fold_statistic: f64,
    kappa: Option<f64>,
}

fn cmd_compare(settings: &mut Settings, args: CompareArgs) -> CliResult<()> {
    let outcome = read_corpus(settings, args.input)?;
    let setup = CvSetup::resolve(settings, args.cv, args.selection)?;
    let no_nb = settings.get_flag(args.no_nb, "no_nb")?;
    let field: FieldSelector = settings
        .get_or(args.field, "field", "descriptors".to_owned())?
        .parse()
        .map_err(|e: Error| Failure::usage(e.to_string()))?;
    let stemmer: StemmerKind = settings
        .get_or(args.stemmer, "stemmer", "lovins".to_owned())?
        .parse()
        .map_err(|e: Error| Failure::usage(e.to_string()))?;
    let min_df = settings.get_or(args.min_df, "min_df", 2u64)?;
    let alpha = settings.get_or(args.alpha, "alpha", 1.0f64)?;
    let stopwords = match settings.get(args.stopwords.map(|p| path_value(&p)), "stopwords")? {
        Some(p) => StopwordList::read(open(Path::new(&p))?)?,
        None => StopwordList::smart(),
    };
    let externals: Vec<PathBuf> = args.external;
    settings.set(
        "external",
        json!(externals.iter().map(|p| path_value(p)).collect::<Vec<_>>()),
    );
    let dir = out_dir(settings, args.out_dir)?;

    let citations = outcome.citations;
    require_labels(&citations)?;
    let gold: Vec<DomainLabel> = citations.iter().filter_map(|c| c.label).collect();
    let ids: Vec<&str> = citations.iter().map(|c| c.id.as_str()).collect();
    let folds = split_folds(&citations, setup.k, setup.seed)?;

    let mut systems: Vec<(String, Vec<DomainLabel>)> = Vec::new();
    let cv = cross_validate_with(&citations, &folds, setup.source())?;
    systems.push(("chi-square".into(), cv.predicted_labels()));
    if !no_nb {
        let config = PipelineConfig {
            field,
            stopwords,
            stemmer,
            min_df,
        };
        let nb = nb_cross_validate(&citations, &folds, &config, alpha)?;
        systems.push((
            format!("naive-bayes-{field}"),
            nb.into_iter().map(|p| p.0).collect(),
        ));
    }
    for path in &externals {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path_value(path));
        systems.push((name, read_external(path, &ids)?));
    }
    if systems.len() < 2 {
        return Err(Failure::usage(
            "need at least two prediction sources to compare",
        ));
    }

    let fold_members: Vec<Vec<usize>> = (0..folds.k).map(|f| folds.test_indices(f)).collect();
    let pick = |v: &[DomainLabel], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();

    let mut reports = Vec::new();
    for (name, pred) in &systems {
        let counts = ConfusionCounts::from_labels(pred, &gold)?;
        let fold_metrics = fold_members
            .iter()
            .map(|idx| {
                metrics(&ConfusionCounts::from_labels(
                    &pick(pred, idx),
                    &pick(&gold, idx),
                )?)
            })
            .collect::<chisq_triage::Result<Vec<_>>>()?;
        reports.push(SystemReport {
            name: name.clone(),
            counts,
            metrics: metrics(&counts)?,
            mean_fold_metrics: MetricSet::mean(&fold_metrics),
            fold_metrics,
        });
    }

    let mut pairs = Vec::new();
    for i in 0..systems.len() {
        for j in i + 1..systems.len() {
            let (a, pa) = &systems[i];
            let (b, pb) = &systems[j];
            let pooled = mcnemar(pa, pb, &gold)?;
            let per_fold = fold_members
                .iter()
                .map(|idx| {
                    mcnemar(&pick(pa, idx), &pick(pb, idx), &pick(&gold, idx)).map(|m| m.statistic)
                })
                .collect::<chisq_triage::Result<Vec<_>>>()?;
            let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
            pairs.push(PairReport {
                a: a.clone(),
                b: b.clone(),
                pooled,
                mean_fold_statistic: mean,
                per_fold_statistic: per_fold,
                kappa: cohen_kappa(pa, pb)?.kappa,
            });
        }
    }

    let doc = json!({
        "version": VERSION,
        "config_hash": settings.config_hash("compare"),
        "citations": citations.len(),
        "k": setup.k,
        "seed": setup.seed,
        "systems": reports,
        "pairs": pairs,
    });
    write_json(&dir.join("compare_report.json"), &doc)?;
    let mut w = create(&dir.join("metrics.csv"))?;
    writeln!(w, "system,accuracy,recall,precision,f")?;
    for r in &reports {
        let m = &r.metrics;
        writeln!(
            w,
            "{},{},{},{},{}",
            write_citations_csv_field(&r.name),
            m.acc,
            m.rec,
            m.pre,
            m.f
        )?;
    }
    finish(w)?;
    write_config(settings, "compare", &dir)?;

    println!(
        "{:<28} {:>7} {:>7} {:>7} {:>7}",
        "system", "acc", "rec", "pre", "f"
    );
    for r in &reports {
        let m = &r.metrics;
        println!(
            "{:<28} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
            r.name, m.acc, m.rec, m.pre, m.f
        );
    }
    for p in &pairs {
        println!(
            "McNemar {} vs {}: {:.4} (p = {:.4}, n01 = {}, n10 = {})",
            p.a, p.b, p.pooled.statistic, p.pooled.p_value, p.pooled.n01, p.pooled.n10
        );
    }
    Ok(())
}

fn cmd_synth(settings: &mut Settings, args: SynthArgs) -> CliResult<()> {
    let defaults = SynthConfig::default();
    let config = SynthConfig {
        citations: settings.get_or(args.citations, "citations", defaults.citations)?,
        genetic_fraction: settings.get_or(
            args.genetic_fraction,
            "genetic_fraction",
            defaults.genetic_fraction,
        )?,
        seed: settings.get_or(args.seed, "seed", defaults.seed)?,
        ..defaults
    };
    if !(0.0..=1.0).contains(&config.genetic_fraction) {
        return Err(Failure::usage("genetic fraction must lie in [0, 1]"));
    }
    let out = PathBuf::from(settings.require(args.out.map(|p| path_value(&p)), "out")?);
    let citations = synth::generate(&config);
    let mut w = create(&out)?;
    write_jsonl(&mut w, &citations)?;
    finish(w)?;
    write_json(
        &out.with_extension("config.json"),
        &settings.document("synth"),
    )?;
    println!("wrote {} citations to {}", citations.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    let workers = settings.lookup(cli.workers, "workers")?;
    if let Some(n) = workers {
        if n == 0 {
            return Err(Failure::usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&mut settings, a),
        Command::Train(a) => cmd_train(&mut settings, a),
        Command::Score(a) => cmd_score(&mut settings, a),
        Command::Evaluate(a) => cmd_evaluate(&mut settings, a),
        Command::Compare(a) => cmd_compare(&mut settings, a),
        Command::Synth(a) => cmd_synth(&mut settings, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
