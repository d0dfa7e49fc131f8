//! Plain-text description of an ensemble on disk.
//!
//! ```text
//! task = task1
//! language = en
//! vocab = vocab.en.txt
//! member = task1.en.seed1.ckpt
//! member = task1.en.seed2.ckpt
//! ```
//!
//! Relative paths resolve against the manifest's directory. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{EnsembleError, EnsembleModel};
use crate::corpus::{Language, Task};
use crate::encoder::{CheckpointError, ClassifierModel};
use crate::tokenizer::{TokenizerError, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("manifest is missing `{0}`")]
    Missing(&'static str),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error("{path}: {source}")]
    Checkpoint {
        path: String,
        #[source]
        source: CheckpointError,
    },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleManifest {
    pub task: Task,
    pub language: Language,
    pub vocab: PathBuf,
    pub members: Vec<PathBuf>,
}

impl EnsembleManifest {
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        writeln!(s, "task = {}", self.task).unwrap();
        writeln!(s, "language = {}", self.language).unwrap();
        writeln!(s, "vocab = {}", self.vocab.display()).unwrap();
        for m in &self.members {
            writeln!(s, "member = {}", m.display()).unwrap();
        }
        s
    }

    pub fn parse(contents: &str) -> Result<Self, ManifestError> {
        let (mut task, mut language, mut vocab) = (None, None, None);
        let mut members = Vec::new();
        for (i, raw) in contents.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |reason: String| ManifestError::Format { line: i + 1, reason };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail("expected `key = value`".into()))?;
            let value = value.trim();
            if value.is_empty() {
                return Err(fail(format!("empty value for `{}`", key.trim())));
            }
            let once = |slot: bool, k: &str| {
                if slot {
                    Err(fail(format!("`{k}` given twice")))
                } else {
                    Ok(())
                }
            };
            match key.trim() {
                "task" => {
                    once(task.is_some(), "task")?;
                    task = Some(value.parse::<Task>().map_err(|e| fail(e.to_string()))?);
                }
                "language" => {
                    once(language.is_some(), "language")?;
                    language = Some(value.parse::<Language>().map_err(|e| fail(e.to_string()))?);
                }
                "vocab" => {
                    once(vocab.is_some(), "vocab")?;
                    vocab = Some(PathBuf::from(value));
                }
                "member" => members.push(PathBuf::from(value)),
                other => return Err(fail(format!("unknown key `{other}`"))),
            }
        }
        if members.is_empty() {
            return Err(ManifestError::Missing("member"));
        }
        Ok(EnsembleManifest {
            task: task.ok_or(ManifestError::Missing("task"))?,
            language: language.ok_or(ManifestError::Missing("language"))?,
            vocab: vocab.ok_or(ManifestError::Missing("vocab"))?,
            members,
        })
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        let contents = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&contents)
    }

    /// Loads vocabulary and member checkpoints. `vocab` may be passed in to
    /// share one already-loaded vocabulary between ensembles.
    pub fn load(path: &Path, vocab: Option<Arc<Vocabulary>>) -> Result<EnsembleModel, ManifestError> {
        let manifest = Self::read(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let vocab = match vocab {
            Some(v) => v,
            None => Arc::new(Vocabulary::load(base.join(&manifest.vocab))?),
        };
        let members = manifest
            .members
            .iter()
            .map(|m| {
                let p = base.join(m);
                ClassifierModel::load(&p).map_err(|source| ManifestError::Checkpoint {
                    path: p.display().to_string(),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EnsembleModel::new(members, manifest.task, manifest.language, vocab)?)
    }
}
