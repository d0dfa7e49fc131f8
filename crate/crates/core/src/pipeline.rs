//! Language-routed task1 → task2 cascade.
//!
//! A record goes to its language's task1 ensemble. Texts voted non-sexist get
//! `non-sexist` for task2 as well; only texts voted sexist reach the task2
//! classifier, whose five outputs are the sexist categories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::corpus::{Language, Task, Task1Label, Task2Label, TextRecord};
use crate::ensemble::{EnsembleManifest, EnsembleModel, ManifestError};
use crate::tokenizer::Vocabulary;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("no {task} model for language {language}")]
    MissingModel { task: Task, language: Language },
    #[error("invalid pipeline: {0}")]
    Invalid(String),
    #[error("{} record(s) failed, first `{}`: {}", .0.len(), .0[0].0, .0[0].1)]
    Batch(Vec<(String, PipelineError)>),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("prediction file line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// One model consulted while predicting a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Invocation {
    pub task: Task,
    pub language: Language,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRow {
    pub id: String,
    pub task1: Task1Label,
    pub task2: Task2Label,
}

#[derive(Debug, Clone)]
pub struct PipelineModel {
    task1: BTreeMap<Language, EnsembleModel>,
    task2: BTreeMap<Language, EnsembleModel>,
}

/// File names used inside a model directory.
pub fn manifest_name(task: Task, language: Language) -> String {
    format!("{task}.{language}.manifest")
}

impl PipelineModel {
    /// Task2 entries are ensembles for uniformity; trained pipelines give
    /// them a single member.
    pub fn new(
        task1: BTreeMap<Language, EnsembleModel>,
        task2: BTreeMap<Language, EnsembleModel>,
    ) -> Result<Self, PipelineError> {
        for (task, map) in [(Task::Task1, &task1), (Task::Task2, &task2)] {
            for (lang, e) in map {
                if e.task() != task || e.language() != *lang {
                    return Err(PipelineError::Invalid(format!(
                        "{task}/{lang} slot holds a {}/{} ensemble",
                        e.task(),
                        e.language()
                    )));
                }
            }
        }
        Ok(PipelineModel { task1, task2 })
    }

    /// Loads every `<task>.<lang>.manifest` found in `dir`. Ensembles naming
    /// the same vocabulary file share one loaded copy.
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let mut vocabs: BTreeMap<std::path::PathBuf, Arc<Vocabulary>> = BTreeMap::new();
        let mut maps = [BTreeMap::new(), BTreeMap::new()];
        for task in Task::ALL.iter().copied() {
            for language in Language::ALL.iter().copied() {
                let path = dir.join(manifest_name(task, language));
                if !path.exists() {
                    continue;
                }
                let manifest = EnsembleManifest::read(&path)?;
                let vocab_path = dir.join(&manifest.vocab);
                let shared = vocabs.get(&vocab_path).cloned();
                let ensemble = EnsembleManifest::load(&path, shared)?;
                vocabs.entry(vocab_path).or_insert_with(|| ensemble.vocab().clone());
                maps[task.index()].insert(language, ensemble);
            }
        }
        let [task1, task2] = maps;
        if task1.is_empty() {
            return Err(PipelineError::Invalid(format!(
                "no task1 manifests in {}",
                dir.display()
            )));
        }
        Self::new(task1, task2)
    }

    pub fn ensemble(&self, task: Task, language: Language) -> Option<&EnsembleModel> {
        match task {
            Task::Task1 => self.task1.get(&language),
            Task::Task2 => self.task2.get(&language),
        }
    }

    pub fn ensemble_mut(&mut self, task: Task, language: Language) -> Option<&mut EnsembleModel> {
        match task {
            Task::Task1 => self.task1.get_mut(&language),
            Task::Task2 => self.task2.get_mut(&language),
        }
    }

    fn slot(&self, task: Task, language: Language) -> Result<&EnsembleModel, PipelineError> {
        self.ensemble(task, language)
            .ok_or(PipelineError::MissingModel { task, language })
    }

    /// Like [`predict_record`](Self::predict_record), also appending every
    /// model consulted to `audit`.
    pub fn predict_record_audited(
        &self,
        record: &TextRecord,
        audit: &mut Vec<Invocation>,
    ) -> Result<(Task1Label, Task2Label), PipelineError> {
        let language = record.language;
        let t1 = self.slot(Task::Task1, language)?;
        // fail before predicting so a missing slot is reported for every record
        let t2 = self.slot(Task::Task2, language)?;
        audit.push(Invocation {
            task: Task::Task1,
            language,
        });
        let task1 = Task1Label::from_index(t1.predict(&record.text).label_index).expect("two-class output");
        if task1 == Task1Label::NonSexist {
            return Ok((task1, Task2Label::NonSexist));
        }
        audit.push(Invocation {
            task: Task::Task2,
            language,
        });
        let category = t2.predict(&record.text).label_index;
        let task2 = Task2Label::from_category_index(category).expect("five-class output");
        Ok((task1, task2))
    }

    pub fn predict_record(&self, record: &TextRecord) -> Result<(Task1Label, Task2Label), PipelineError> {
        self.predict_record_audited(record, &mut Vec::new())
    }

    /// Predicts every record in input order. Failures are collected with
    /// their ids rather than stopping at the first.
    pub fn predict_batch(&self, records: &[TextRecord]) -> Result<Vec<PredictionRow>, PipelineError> {
        let mut rows = Vec::with_capacity(records.len());
        let mut failures = Vec::new();
        for r in records {
            match self.predict_record(r) {
                Ok((task1, task2)) => rows.push(PredictionRow {
                    id: r.id.clone(),
                    task1,
                    task2,
                }),
                Err(e) => failures.push((r.id.clone(), e)),
            }
        }
        if failures.is_empty() {
            Ok(rows)
        } else {
            Err(PipelineError::Batch(failures))
        }
    }
}

pub const PREDICTION_HEADER: &str = "id\ttask1\ttask2";

pub fn write_predictions(rows: &[PredictionRow]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(PREDICTION_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{}\t{}\t{}", r.id, r.task1, r.task2).unwrap();
    }
    out
}

pub fn parse_predictions(contents: &str) -> Result<Vec<PredictionRow>, PipelineError> {
    let mut lines = contents.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == PREDICTION_HEADER => {}
        _ => {
            return Err(PipelineError::Format {
                line: 1,
                reason: format!("expected header `{PREDICTION_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fail = |reason: String| PipelineError::Format { line: i + 1, reason };
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, t1, t2] = fields[..] else {
            return Err(fail(format!("expected 3 fields, found {}", fields.len())));
        };
        rows.push(PredictionRow {
            id: id.to_string(),
            task1: t1
                .parse()
                .map_err(|e: crate::corpus::UnknownLabel| fail(e.to_string()))?,
            task2: t2
                .parse()
                .map_err(|e: crate::corpus::UnknownLabel| fail(e.to_string()))?,
        });
    }
    Ok(rows)
}
