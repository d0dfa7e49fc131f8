//! Command-line entry point: `train`, `predict`, `evaluate`, `simulate` and
//! `synth`.
//!
//! Exit status is 0 on success, 1 for bad input (arguments, config, data,
//! missing models) and 2 for internal failures.

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

pub use config::{render_train_config, Settings, KNOWN_KEYS};

use crate::corpus::{
    filter_language, filter_sexist, load_tsv, stratified_split, write_tsv, CorpusError, Language, Task, TextRecord,
};
use crate::encoder::ModelError;
use crate::ensemble::{
    majority_accuracy, simulate_vote_accuracy, train_ensemble, EnsembleManifest, EnsembleModel, SimulationError,
    TrainedEnsemble,
};
use crate::eval::{evaluate_task_with, render_report, EvalError, ReportFormat, ScoreOptions};
use crate::pipeline::{manifest_name, parse_predictions, write_predictions, PipelineError, PipelineModel};
use crate::synthetic::{synthetic_corpus, SyntheticSpec};
use crate::textprep::mask_mentions_urls;
use crate::tokenizer::{TokenizerError, Vocabulary};
use crate::trainer::{TrainConfig, TrainError};

pub const DEFAULT_VOCAB_SIZE: usize = 2000;
pub const DEFAULT_MIN_FREQUENCY: usize = 1;
pub const PREDICTIONS_FILE: &str = "predictions.tsv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

macro_rules! input_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}
input_errors!(CorpusError, TokenizerError, PipelineError, EvalError, SimulationError);

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteGradient(_) | TrainError::Model(ModelError::NonFinite { .. }) => {
                CliError::Internal(e.to_string())
            }
            e => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "exist-cascade",
    version,
    about = "Seed-ensembled sexism classifiers: train, predict, evaluate, simulate"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` config file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed for everything random
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override one config key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build vocabularies and train task1 ensembles and task2 models per language
    Train {
        #[command(flatten)]
        common: Common,
        /// Labeled training TSV
        #[arg(long, value_name = "PATH")]
        train: Option<PathBuf>,
    },
    /// Run the cascade over a TSV and write predictions.tsv
    Predict {
        #[command(flatten)]
        common: Common,
        /// Directory written by `train`
        #[arg(long, value_name = "DIR")]
        models: Option<PathBuf>,
        /// TSV to label
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Score predictions against gold labels, globally and per language
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        gold: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        predictions: Option<PathBuf>,
        /// text or json
        #[arg(long)]
        format: Option<String>,
    },
    /// Monte-Carlo majority-vote accuracy for a list of ensemble sizes
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated odd sizes, e.g. 1,3,5,7
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        correlation: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Write a seeded synthetic train.tsv and test.tsv
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        per_language: Option<usize>,
        #[arg(long)]
        ambiguity: Option<f64>,
    },
}

/// Config file, then `--set` pairs, then dedicated flags.
fn settings(common: &Common, flags: &[(&str, Option<String>)]) -> Result<Settings, CliError> {
    let mut s = match &common.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    for pair in &common.overrides {
        s.set_pair(pair)?;
    }
    let shared = [
        ("seed", common.seed.map(|v| v.to_string())),
        ("out", common.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in shared.iter().chain(flags) {
        if let Some(v) = v {
            s.set(k, v.clone())?;
        }
    }
    Ok(s)
}

fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::Internal(format!("writing {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("creating {}: {e}", dir.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Internal(format!("writing output: {e}")))
}

/// Parses `args` (program name first) and runs the command, printing to
/// `out`. Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 1;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train { common, train } => cmd_train(&settings(&common, &[("train", path_flag(&train))])?, out),
        Command::Predict { common, models, input } => cmd_predict(
            &settings(&common, &[("models", path_flag(&models)), ("input", path_flag(&input))])?,
            out,
        ),
        Command::Evaluate {
            common,
            gold,
            predictions,
            format,
        } => cmd_evaluate(
            &settings(
                &common,
                &[
                    ("gold", path_flag(&gold)),
                    ("predictions", path_flag(&predictions)),
                    ("format", format),
                ],
            )?,
            out,
        ),
        Command::Simulate {
            common,
            k,
            p,
            correlation,
            trials,
        } => cmd_simulate(
            &settings(
                &common,
                &[
                    ("k", k),
                    ("p", p.map(|v| v.to_string())),
                    ("correlation", correlation.map(|v| v.to_string())),
                    ("trials", trials.map(|v| v.to_string())),
                ],
            )?,
            out,
        ),
        Command::Synth {
            common,
            per_language,
            ambiguity,
        } => cmd_synth(
            &settings(
                &common,
                &[
                    ("per_language", per_language.map(|v| v.to_string())),
                    ("ambiguity", ambiguity.map(|v| v.to_string())),
                ],
            )?,
            out,
        ),
    }
}

fn checkpoint_name(task: Task, language: Language, seed: u64) -> String {
    format!("{task}.{language}.seed{seed}.ckpt")
}

fn vocab_name(language: Language) -> String {
    format!("vocab.{language}.txt")
}

fn log_training(log: &mut String, task: Task, language: Language, trained: &TrainedEnsemble) {
    for r in &trained.reports {
        for w in &r.warnings {
            writeln!(log, "{task} {language} seed={} warning: {w}", r.seed).unwrap();
        }
        for e in &r.history {
            writeln!(log, "{task} {language} seed={} {e}", r.seed).unwrap();
        }
        writeln!(
            log,
            "{task} {language} seed={} best_epoch={} best_dev_acc={:.6}",
            r.seed, r.best_epoch, r.best_dev_accuracy
        )
        .unwrap();
    }
}

fn ensemble_artifacts(e: &EnsembleModel, files: &mut Vec<(String, Vec<u8>)>) {
    let (task, language) = (e.task(), e.language());
    let members: Vec<PathBuf> = e
        .members()
        .iter()
        .map(|m| {
            let name = checkpoint_name(task, language, m.seed);
            files.push((name.clone(), m.to_checkpoint_bytes()));
            PathBuf::from(name)
        })
        .collect();
    let manifest = EnsembleManifest {
        task,
        language,
        vocab: vocab_name(language).into(),
        members,
    };
    files.push((manifest_name(task, language), manifest.to_file_string().into_bytes()));
}

/// Trains every language present in the training file. Nothing is written
/// until all models have trained.
pub fn cmd_train(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let seed: u64 = s.get("seed", 0)?;
    let config = s.train_config(seed)?;
    let vocab_size: usize = s.get("vocab_size", DEFAULT_VOCAB_SIZE)?;
    let min_frequency: usize = s.get("min_frequency", DEFAULT_MIN_FREQUENCY)?;
    let train_path = s.existing_path("train")?;
    let out_dir = s.path("out")?;

    let records = load_tsv(&train_path, true)?;
    for r in &records {
        r.require_label(Task::Task1)?;
        r.require_label(Task::Task2)?;
    }
    let languages: Vec<Language> = Language::ALL
        .iter()
        .copied()
        .filter(|l| records.iter().any(|r| r.language == *l))
        .collect();
    if languages.is_empty() {
        return Err(CliError::Input(format!("{}: no records", train_path.display())));
    }

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut log = String::new();
    for language in languages {
        let recs = filter_language(&records, language);
        // the vocabulary sees only the task1 training side of the split
        let split = stratified_split(&recs, config.train_fraction, Task::Task1, config.split_seed)?;
        let texts: Vec<String> = split.train.iter().map(|r| mask_mentions_urls(&r.text)).collect();
        let vocab = Arc::new(Vocabulary::build(&texts, vocab_size, min_frequency)?);
        writeln!(
            log,
            "{language}: {} records, vocabulary of {} tokens",
            recs.len(),
            vocab.len()
        )
        .unwrap();

        let task1 = train_ensemble(&recs, Task::Task1, language, vocab.clone(), &config)?;
        log_training(&mut log, Task::Task1, language, &task1);
        let sexist = filter_sexist(&recs)?;
        let task2_config = TrainConfig {
            seeds: vec![config.seeds[0]],
            ..config.clone()
        };
        let task2 = train_ensemble(&sexist, Task::Task2, language, vocab.clone(), &task2_config)?;
        log_training(&mut log, Task::Task2, language, &task2);

        files.push((vocab_name(language), vocab.to_file_string().into_bytes()));
        ensemble_artifacts(&task1.ensemble, &mut files);
        ensemble_artifacts(&task2.ensemble, &mut files);
    }
    files.push((
        "run.config".into(),
        render_train_config(&config, vocab_size, min_frequency).into_bytes(),
    ));

    create_dir(&out_dir)?;
    for (name, bytes) in &files {
        write_atomic(&out_dir.join(name), bytes)?;
    }
    let checkpoints = files.iter().filter(|(n, _)| n.ends_with(".ckpt")).count();
    writeln!(log, "wrote {checkpoints} checkpoints to {}", out_dir.display()).unwrap();
    emit(out, &log)
}

pub fn cmd_predict(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let models = s.existing_path("models")?;
    let input = s.existing_path("input")?;
    let out_dir = s.path("out")?;
    let pipeline = PipelineModel::load(&models)?;
    let records = load_tsv(&input, false)?;
    let rows = pipeline.predict_batch(&records)?;
    create_dir(&out_dir)?;
    let path = out_dir.join(PREDICTIONS_FILE);
    write_atomic(&path, write_predictions(&rows).as_bytes())?;
    emit(
        out,
        &format!("wrote {} predictions to {}\n", rows.len(), path.display()),
    )
}

pub fn cmd_evaluate(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let gold = load_tsv(s.existing_path("gold")?, true)?;
    let pred_path = s.existing_path("predictions")?;
    let contents =
        std::fs::read_to_string(&pred_path).map_err(|e| CliError::Input(format!("{}: {e}", pred_path.display())))?;
    let preds = parse_predictions(&contents)?;
    let format = match s.get::<String>("format", "text".into())?.as_str() {
        "text" => ReportFormat::Text,
        "json" => ReportFormat::Json,
        other => {
            return Err(CliError::Input(format!(
                "unknown report format `{other}` (text or json)"
            )))
        }
    };
    let options = ScoreOptions {
        include_zero_support: s.get("include_zero_support", true)?,
    };
    let reports =
        [Task::Task1, Task::Task2].map(|task| evaluate_task_with(&gold, &preds, task, options).map(|r| (task, r)));
    let mut text = String::new();
    match format {
        ReportFormat::Text => {
            for r in reports {
                let (task, report) = r?;
                writeln!(text, "task={task}").unwrap();
                text.push_str(&render_report(&report, format));
            }
        }
        ReportFormat::Json => {
            text.push('{');
            for (i, r) in reports.into_iter().enumerate() {
                let (task, report) = r?;
                if i > 0 {
                    text.push(',');
                }
                write!(text, "\"{task}\":{}", render_report(&report, format).trim_end()).unwrap();
            }
            text.push_str("}\n");
        }
    }
    if let Some(dir) = s.raw("out") {
        let dir = Path::new(dir);
        create_dir(dir)?;
        let name = if format == ReportFormat::Json {
            "report.json"
        } else {
            "report.txt"
        };
        write_atomic(&dir.join(name), text.as_bytes())?;
    }
    emit(out, &text)
}

pub fn cmd_simulate(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let ks: Vec<usize> = s.list("k")?.unwrap_or_else(|| vec![1, 3, 5, 7]);
    let p: f64 = s.get("p", 0.76)?;
    let correlation: f64 = s.get("correlation", 0.0)?;
    let trials: usize = s.get("trials", 100_000)?;
    let seed: u64 = s.get("seed", 0)?;
    if let Some(&k) = ks.iter().find(|k| k.is_multiple_of(2)) {
        return Err(SimulationError::EvenK(k).into());
    }
    let mut table = String::from("k\testimate\texpected\n");
    for k in ks {
        let estimate = simulate_vote_accuracy(k, p, correlation, trials, seed)?;
        // exact mean of the shared-coin mixture
        let expected = correlation * p + (1.0 - correlation) * majority_accuracy(k, p);
        writeln!(table, "{k}\t{estimate:.6}\t{expected:.6}").unwrap();
    }
    if let Some(dir) = s.raw("out") {
        let dir = Path::new(dir);
        create_dir(dir)?;
        write_atomic(&dir.join("simulation.tsv"), table.as_bytes())?;
    }
    emit(out, &table)
}

pub fn cmd_synth(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let seed: u64 = s.get("seed", 0)?;
    let ambiguity: f64 = s.get("ambiguity", SyntheticSpec::default().ambiguity)?;
    if !(0.0..=1.0).contains(&ambiguity) {
        return Err(CliError::Input(format!("ambiguity {ambiguity} outside [0, 1]")));
    }
    let per_language: usize = s.get("per_language", SyntheticSpec::default().per_language)?;
    let test_per_language: usize = s.get("test_per_language", 50)?;
    let out_dir = s.path("out")?;
    let train = synthetic_corpus(&SyntheticSpec {
        per_language,
        ambiguity,
        seed,
    });
    let test: Vec<TextRecord> = synthetic_corpus(&SyntheticSpec {
        per_language: test_per_language,
        ambiguity,
        seed: seed.wrapping_add(1),
    })
    .into_iter()
    .map(|r| TextRecord {
        id: format!("test-{}", r.id),
        ..r
    })
    .collect();
    create_dir(&out_dir)?;
    for (name, records) in [("train.tsv", &train), ("test.tsv", &test)] {
        write_atomic(&out_dir.join(name), write_tsv(records, true)?.as_bytes())?;
    }
    emit(
        out,
        &format!(
            "wrote {} train and {} test records to {}\n",
            train.len(),
            test.len(),
            out_dir.display()
        ),
    )
}
