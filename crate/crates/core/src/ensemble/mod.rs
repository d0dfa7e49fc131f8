//! Seed-varied ensembles combined by majority vote.

mod manifest;
mod simulate;

use std::sync::Arc;
use std::thread;

pub use manifest::{EnsembleManifest, ManifestError};
pub use simulate::{majority_accuracy, simulate_vote_accuracy, SimulationError};

use crate::corpus::{Language, SplitWarning, Task, TextRecord};
use crate::encoder::{ClassifierModel, Prediction};
use crate::tokenizer::{TokenSequence, Vocabulary};
use crate::trainer::{encode_text, n_classes, train_one_with_progress, EpochRecord, TrainConfig, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("no votes to combine")]
    NoVotes,
    #[error("{votes} votes but {confidences} confidence vectors")]
    LengthMismatch { votes: usize, confidences: usize },
    #[error("vote {vote} outside the {classes}-class label space")]
    VoteOutOfRange { vote: usize, classes: usize },
    #[error("invalid ensemble: {0}")]
    Invalid(String),
}

/// Combines member labels.
///
/// The label with the most votes wins. Among labels tied on votes, the one
/// with the largest probability summed over all members wins, then the
/// lowest index. `member_confidences[i]` is member `i`'s probability vector.
pub fn majority_vote(votes: &[usize], member_confidences: &[Vec<f64>]) -> Result<usize, EnsembleError> {
    if votes.is_empty() {
        return Err(EnsembleError::NoVotes);
    }
    if votes.len() != member_confidences.len() {
        return Err(EnsembleError::LengthMismatch {
            votes: votes.len(),
            confidences: member_confidences.len(),
        });
    }
    let classes = member_confidences.iter().map(Vec::len).max().unwrap_or(0);
    let mut counts = vec![0usize; classes];
    for &v in votes {
        *counts
            .get_mut(v)
            .ok_or(EnsembleError::VoteOutOfRange { vote: v, classes })? += 1;
    }
    let top = *counts.iter().max().unwrap();
    let tied: Vec<usize> = (0..classes).filter(|&l| counts[l] == top).collect();
    if let [only] = tied[..] {
        return Ok(only);
    }
    let mass = |l: usize| -> f64 {
        member_confidences
            .iter()
            .map(|c| c.get(l).copied().unwrap_or(0.0))
            .sum()
    };
    let mut best = tied[0];
    let mut best_mass = mass(best);
    for &l in &tied[1..] {
        let m = mass(l);
        if m > best_mass {
            best = l;
            best_mass = m;
        }
    }
    Ok(best)
}

/// Top vote count minus the next-highest count of any other label.
pub fn vote_margin(votes: &[usize], classes: usize) -> usize {
    let mut counts = vec![0usize; classes.max(votes.iter().map(|v| v + 1).max().unwrap_or(0))];
    for &v in votes {
        counts[v] += 1;
    }
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts.first().copied().unwrap_or(0) - counts.get(1).copied().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    pub label_index: usize,
    pub votes: Vec<usize>,
    pub margin: usize,
    pub members: Vec<Prediction>,
}

/// K classifiers sharing task, language, vocabulary and output space.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    members: Vec<ClassifierModel>,
    task: Task,
    language: Language,
    vocab: Arc<Vocabulary>,
}

impl EnsembleModel {
    pub fn new(
        members: Vec<ClassifierModel>,
        task: Task,
        language: Language,
        vocab: Arc<Vocabulary>,
    ) -> Result<Self, EnsembleError> {
        let invalid = |m: String| Err(EnsembleError::Invalid(m));
        let Some(first) = members.first() else {
            return invalid("an ensemble needs at least one member".into());
        };
        let classes = n_classes(task);
        for (i, m) in members.iter().enumerate() {
            if m.config.n_classes != classes {
                return invalid(format!(
                    "member {i} has {} classes, {task} needs {classes}",
                    m.config.n_classes
                ));
            }
            if m.config.vocab_size != vocab.len() {
                return invalid(format!(
                    "member {i} expects {} tokens, vocabulary has {}",
                    m.config.vocab_size,
                    vocab.len()
                ));
            }
            if m.config.max_len != first.config.max_len || m.config.max_len < 3 {
                return invalid(format!("member {i} has max_len {}", m.config.max_len));
            }
            if members[..i].iter().any(|o| o.seed == m.seed) {
                return invalid(format!("seed {} appears twice", m.seed));
            }
        }
        Ok(EnsembleModel {
            members,
            task,
            language,
            vocab,
        })
    }

    pub fn members(&self) -> &[ClassifierModel] {
        &self.members
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn max_len(&self) -> usize {
        self.members[0].config.max_len
    }

    pub fn n_classes(&self) -> usize {
        self.members[0].config.n_classes
    }

    pub fn encode(&self, text: &str) -> TokenSequence {
        encode_text(&self.vocab, text, self.max_len()).expect("max_len >= 3 checked at construction")
    }

    pub fn predict_sequence(&self, seq: &TokenSequence) -> EnsemblePrediction {
        let members: Vec<Prediction> = self
            .members
            .iter()
            .map(|m| m.predict(seq).expect("vocabulary and members agree on ids and length"))
            .collect();
        let votes: Vec<usize> = members.iter().map(|p| p.label_index).collect();
        let confidences: Vec<Vec<f64>> = members.iter().map(|p| p.probabilities.clone()).collect();
        let label_index = majority_vote(&votes, &confidences).expect("one vote per member");
        let margin = vote_margin(&votes, self.n_classes());
        EnsemblePrediction {
            label_index,
            votes,
            margin,
            members,
        }
    }

    /// Masks, encodes and votes on one raw text.
    pub fn predict(&self, text: &str) -> EnsemblePrediction {
        self.predict_sequence(&self.encode(text))
    }
}

#[derive(Debug, Clone)]
pub struct MemberReport {
    pub seed: u64,
    pub best_dev_accuracy: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub warnings: Vec<SplitWarning>,
}

#[derive(Debug, Clone)]
pub struct TrainedEnsemble {
    pub ensemble: EnsembleModel,
    pub reports: Vec<MemberReport>,
}

/// Trains one member per `config.seeds` entry on the same records and the
/// same split, each on its own thread. Members come back in seed order.
pub fn train_ensemble(
    records: &[TextRecord],
    task: Task,
    language: Language,
    vocab: Arc<Vocabulary>,
    config: &TrainConfig,
) -> Result<TrainedEnsemble, TrainError> {
    config.validate()?;
    let results: Vec<_> = thread::scope(|scope| {
        let handles: Vec<_> = config
            .seeds
            .iter()
            .map(|&seed| {
                let vocab = &vocab;
                scope.spawn(move || train_one_with_progress(records, task, language, vocab, config, seed, &mut |_| {}))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });
    let mut members = Vec::with_capacity(results.len());
    let mut reports = Vec::with_capacity(results.len());
    for (outcome, &seed) in results.into_iter().zip(&config.seeds) {
        let outcome = outcome?;
        reports.push(MemberReport {
            seed,
            best_dev_accuracy: outcome.best_dev_accuracy,
            best_epoch: outcome.best_epoch,
            history: outcome.history,
            warnings: outcome.warnings,
        });
        members.push(outcome.model);
    }
    let ensemble = EnsembleModel::new(members, task, language, vocab).map_err(|e| TrainError::Config(e.to_string()))?;
    Ok(TrainedEnsemble { ensemble, reports })
}
