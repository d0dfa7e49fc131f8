//! Labeled text records: ingestion, filtering, splitting and label statistics.

mod labels;
mod split;
mod tsv;

use std::collections::BTreeMap;

pub use labels::{Language, Source, Task, Task1Label, Task2Label, UnknownLabel};
pub use split::{stratified_split, Split, SplitWarning};
pub use tsv::{load_tsv, parse_tsv, write_tsv, COLUMNS, LABEL_COLUMNS};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: input is not valid UTF-8")]
    Encoding { line: usize },
    #[error("missing column `{0}` in header")]
    MissingColumn(&'static str),
    #[error("duplicate column `{0}` in header")]
    DuplicateColumn(String),
    #[error("row {row}: expected {expected} tab-separated fields, found {found}")]
    FieldCount { row: usize, expected: usize, found: usize },
    #[error("row {row}: {source}")]
    Label {
        row: usize,
        #[source]
        source: UnknownLabel,
    },
    #[error("row {row}: {source}")]
    Record {
        row: usize,
        #[source]
        source: RecordError,
    },
    #[error("record `{id}` has no {task} label")]
    MissingLabel { id: String, task: Task },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    Fraction(f64),
    #[error("record `{id}` contains a tab or newline and cannot be written as TSV")]
    Unwritable { id: String },
}

/// A record that breaks one of the [`TextRecord`] invariants.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("record `{0}` has empty text")]
    EmptyText(String),
    #[error("record `{id}` pairs task1={task1} with task2={task2}")]
    InconsistentLabels {
        id: String,
        task1: Task1Label,
        task2: Task2Label,
    },
}

/// One corpus row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextRecord {
    pub id: String,
    pub source: Source,
    pub language: Language,
    pub text: String,
    pub task1: Option<Task1Label>,
    pub task2: Option<Task2Label>,
}

impl TextRecord {
    /// Builds a record, checking that the text is non-blank and the two
    /// label layers agree.
    pub fn new(
        id: impl Into<String>,
        source: Source,
        language: Language,
        text: impl Into<String>,
        task1: Option<Task1Label>,
        task2: Option<Task2Label>,
    ) -> Result<Self, RecordError> {
        let record = TextRecord {
            id: id.into(),
            source,
            language,
            text: text.into(),
            task1,
            task2,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.text.trim().is_empty() {
            return Err(RecordError::EmptyText(self.id.clone()));
        }
        if let (Some(task1), Some(task2)) = (self.task1, self.task2) {
            if task2.task1() != task1 {
                return Err(RecordError::InconsistentLabels {
                    id: self.id.clone(),
                    task1,
                    task2,
                });
            }
        }
        Ok(())
    }

    /// Canonical label string for `task`, if annotated.
    pub fn label(&self, task: Task) -> Option<&'static str> {
        match task {
            Task::Task1 => self.task1.map(Task1Label::as_str),
            Task::Task2 => self.task2.map(Task2Label::as_str),
        }
    }

    /// Same as [`TextRecord::label`] but fails with [`CorpusError::MissingLabel`].
    pub fn require_label(&self, task: Task) -> Result<&'static str, CorpusError> {
        self.label(task).ok_or_else(|| CorpusError::MissingLabel {
            id: self.id.clone(),
            task,
        })
    }
}

/// Order-preserving subset of records in `lang`.
pub fn filter_language(records: &[TextRecord], lang: Language) -> Vec<TextRecord> {
    records.iter().filter(|r| r.language == lang).cloned().collect()
}

/// Order-preserving subset of records annotated sexist at task1.
pub fn filter_sexist(records: &[TextRecord]) -> Result<Vec<TextRecord>, CorpusError> {
    let mut out = Vec::new();
    for r in records {
        match r.task1 {
            Some(Task1Label::Sexist) => out.push(r.clone()),
            Some(Task1Label::NonSexist) => {}
            None => {
                return Err(CorpusError::MissingLabel {
                    id: r.id.clone(),
                    task: Task::Task1,
                })
            }
        }
    }
    Ok(out)
}

/// Histogram over the task's full label set; absent labels map to zero.
pub fn class_counts(records: &[TextRecord], task: Task) -> Result<BTreeMap<&'static str, usize>, CorpusError> {
    let mut counts: BTreeMap<&'static str, usize> = task.label_names().into_iter().map(|l| (l, 0)).collect();
    for r in records {
        *counts.entry(r.require_label(task)?).or_default() += 1;
    }
    Ok(counts)
}
