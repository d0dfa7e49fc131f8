//! Supervised training of one encoder: Adam over shuffled mini-batches,
//! dev accuracy after every epoch, and best-epoch checkpoint selection.

mod adam;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{adam_step, update_slice, AdamConfig, AdamState};

use crate::corpus::{stratified_split, CorpusError, Language, SplitWarning, Task, Task1Label, TextRecord};
use crate::encoder::{ClassifierModel, ModelConfig, ModelError};
use crate::textprep::mask_mentions_urls;
use crate::tokenizer::{TokenSequence, TokenizerError, Vocabulary};

/// ChaCha stream ids derived from one member seed. Stream 0 initializes weights.
const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("record `{id}` is {found}, expected {expected}")]
    WrongLanguage {
        id: String,
        found: Language,
        expected: Language,
    },
    #[error("record `{0}` is not sexist; task2 classifiers train on sexist records only")]
    NotSexist(String),
    #[error("class `{0}` has no training examples after the split")]
    EmptyClass(&'static str),
    #[error("the dev split is empty")]
    EmptyDev,
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
}

/// Encoder dimensions that do not depend on the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderShape {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub dropout_rate: f64,
}

impl Default for EncoderShape {
    fn default() -> Self {
        EncoderShape {
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 128,
            dropout_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub train_fraction: f64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// One ensemble member per seed.
    pub seeds: Vec<u64>,
    pub max_len: usize,
    /// Keys the train/dev split; shared by all members.
    pub split_seed: u64,
    pub shape: EncoderShape,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            train_fraction: 0.8,
            batch_size: 16,
            adam: AdamConfig::default(),
            seeds: vec![1, 2, 3],
            max_len: 64,
            split_seed: 0,
            shape: EncoderShape::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: String| Err(TrainError::Config(m));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!("train_fraction {} outside (0, 1)", self.train_fraction));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.max_len < 3 {
            return fail(format!("max_len must be at least 3, got {}", self.max_len));
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return fail(format!("seed {s} is repeated"));
            }
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return fail(format!("learning_rate {} must be positive", a.learning_rate));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return fail("adam betas must lie in [0, 1)".into());
        }
        if a.epsilon.is_nan() || a.epsilon <= 0.0 {
            return fail("adam epsilon must be positive".into());
        }
        Ok(())
    }

    pub fn model_config(&self, vocab_size: usize, n_classes: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            max_len: self.max_len,
            d_model: self.shape.d_model,
            n_heads: self.shape.n_heads,
            n_layers: self.shape.n_layers,
            d_ff: self.shape.d_ff,
            n_classes,
            dropout_rate: self.shape.dropout_rate,
        }
    }
}

/// Number of classifier outputs for a task. Task2 classifiers only separate
/// the five sexist categories.
pub fn n_classes(task: Task) -> usize {
    match task {
        Task::Task1 => Task1Label::ALL.len(),
        Task::Task2 => crate::corpus::Task2Label::SEXIST_CATEGORIES.len(),
    }
}

/// Classifier output index of a record's gold label.
pub fn target_index(record: &TextRecord, task: Task) -> Result<usize, TrainError> {
    let missing = || CorpusError::MissingLabel {
        id: record.id.clone(),
        task,
    };
    match task {
        Task::Task1 => Ok(record.task1.ok_or_else(missing)?.index()),
        Task::Task2 => record
            .task2
            .ok_or_else(missing)?
            .category_index()
            .ok_or_else(|| TrainError::NotSexist(record.id.clone())),
    }
}

/// Masks and encodes one text.
pub fn encode_text(vocab: &Vocabulary, text: &str, max_len: usize) -> Result<TokenSequence, TokenizerError> {
    vocab.encode(&mask_mentions_urls(text), max_len)
}

pub fn encode_examples(
    records: &[TextRecord],
    task: Task,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<(TokenSequence, usize)>, TrainError> {
    records
        .iter()
        .map(|r| Ok((encode_text(vocab, &r.text, max_len)?, target_index(r, task)?)))
        .collect()
}

/// Fraction of examples whose argmax matches the label, dropout off.
pub fn accuracy(model: &ClassifierModel, examples: &[(TokenSequence, usize)]) -> Result<f64, ModelError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (seq, label) in examples {
        if model.predict(seq)?.label_index == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

/// Epoch-by-epoch optimization state for one model.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: ClassifierModel,
    adam: AdamState,
    adam_config: AdamConfig,
    batch_size: usize,
    shuffle_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
    epochs_run: usize,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Trainer {
    /// Shuffling and dropout streams are keyed by the model's own seed.
    pub fn new(model: ClassifierModel, adam_config: AdamConfig, batch_size: usize) -> Self {
        let seed = model.seed;
        Trainer {
            adam: AdamState::new(&model.config),
            model,
            adam_config,
            batch_size: batch_size.max(1),
            shuffle_rng: stream(seed, SHUFFLE_STREAM),
            dropout_rng: stream(seed, DROPOUT_STREAM),
            epochs_run: 0,
        }
    }

    pub fn model(&self) -> &ClassifierModel {
        &self.model
    }

    pub fn into_model(self) -> ClassifierModel {
        self.model
    }

    pub fn epochs_run(&self) -> usize {
        self.epochs_run
    }

    /// One pass over `examples` in a fresh random order. Returns the mean
    /// training loss (dropout active) over the epoch.
    pub fn run_epoch(&mut self, examples: &[(TokenSequence, usize)]) -> Result<f64, TrainError> {
        if examples.is_empty() {
            return Err(TrainError::Config("no training examples".into()));
        }
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut self.shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(self.batch_size) {
            let batch: Vec<(TokenSequence, usize)> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let (loss, grads) = self.model.loss_and_grad(&batch, Some(&mut self.dropout_rng))?;
            adam_step(&mut self.model, &grads, &mut self.adam, &self.adam_config)?;
            total += loss * chunk.len() as f64;
        }
        self.epochs_run += 1;
        Ok(total / examples.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
}

impl std::fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "epoch={} train_loss={:.6} dev_acc={:.6}",
            self.epoch, self.train_loss, self.dev_accuracy
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the best dev accuracy.
    pub model: ClassifierModel,
    pub best_dev_accuracy: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub warnings: Vec<SplitWarning>,
}

/// Trains for `epochs` epochs, keeping the weights of the epoch with the
/// highest dev accuracy (the earliest such epoch on ties).
pub fn fit(
    initial: ClassifierModel,
    train: &[(TokenSequence, usize)],
    dev: &[(TokenSequence, usize)],
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(ClassifierModel, f64, usize, Vec<EpochRecord>), TrainError> {
    let mut trainer = Trainer::new(initial, config.adam, config.batch_size);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ClassifierModel)> = None;
    for epoch in 1..=config.epochs {
        let train_loss = trainer.run_epoch(train)?;
        let dev_accuracy = accuracy(trainer.model(), dev)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            dev_accuracy,
        };
        on_epoch(&record);
        history.push(record);
        if best.as_ref().is_none_or(|(acc, _, _)| dev_accuracy > *acc) {
            best = Some((dev_accuracy, epoch, trainer.model().clone()));
        }
    }
    let (acc, epoch, model) = best.expect("epochs >= 1");
    Ok((model, acc, epoch, history))
}

/// Trains one classifier on language-filtered, labeled records.
///
/// The records are split per class with `config.split_seed`; the weights,
/// batch order and dropout masks all derive from `seed`.
pub fn train_one(
    records: &[TextRecord],
    task: Task,
    language: Language,
    vocab: &Vocabulary,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    train_one_with_progress(records, task, language, vocab, config, seed, &mut |_| {})
}

pub fn train_one_with_progress(
    records: &[TextRecord],
    task: Task,
    language: Language,
    vocab: &Vocabulary,
    config: &TrainConfig,
    seed: u64,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if let Some(r) = records.iter().find(|r| r.language != language) {
        return Err(TrainError::WrongLanguage {
            id: r.id.clone(),
            found: r.language,
            expected: language,
        });
    }
    for r in records {
        target_index(r, task)?;
    }
    let split = stratified_split(records, config.train_fraction, task, config.split_seed)?;
    let train = encode_examples(&split.train, task, vocab, config.max_len)?;
    let dev = encode_examples(&split.dev, task, vocab, config.max_len)?;
    let classes = n_classes(task);
    for class in 0..classes {
        if !train.iter().any(|(_, y)| *y == class) {
            let label = match task {
                Task::Task1 => Task1Label::ALL[class].as_str(),
                Task::Task2 => crate::corpus::Task2Label::SEXIST_CATEGORIES[class].as_str(),
            };
            return Err(TrainError::EmptyClass(label));
        }
    }
    if dev.is_empty() {
        return Err(TrainError::EmptyDev);
    }
    let initial = ClassifierModel::init(config.model_config(vocab.len(), classes), seed)?;
    let (model, best_dev_accuracy, best_epoch, history) = fit(initial, &train, &dev, config, on_epoch)?;
    Ok(TrainOutcome {
        model,
        best_dev_accuracy,
        best_epoch,
        history,
        warnings: split.warnings,
    })
}
