//! A small BERT-style transformer encoder classifier with analytic gradients.
//!
//! Token + learned position embeddings feed `n_layers` post-norm blocks
//! (multi-head self-attention, then a GELU feed-forward, each wrapped in a
//! residual connection and layer norm). The hidden state at the `[CLS]`
//! position goes through one linear layer and a softmax.

mod checkpoint;
mod forward;
mod params;

use ndarray::{Array1, Array2};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{CheckpointError, CHECKPOINT_VERSION};
pub use forward::{ActivationTape, LN_EPS};
pub use params::{LayerParams, Params};

/// Standard deviation of the embedding initialization.
pub const EMBEDDING_STD: f64 = 0.02;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("non-finite loss {loss} on batch element {index} (gold label {label}, p(gold) = {prob})")]
    NonFinite {
        loss: f64,
        index: usize,
        label: usize,
        prob: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub n_classes: usize,
    pub dropout_rate: f64,
}

impl ModelConfig {
    /// Desk-scale defaults: d_model 64, 4 heads, 2 layers, d_ff 128, dropout 0.1.
    pub fn desk(vocab_size: usize, max_len: usize, n_classes: usize) -> Self {
        ModelConfig {
            vocab_size,
            max_len,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 128,
            n_classes,
            dropout_rate: 0.1,
        }
    }

    /// d_model 8, 2 heads, 1 layer, d_ff 16, no dropout. Used for gradient checks.
    pub fn tiny(vocab_size: usize, max_len: usize, n_classes: usize) -> Self {
        ModelConfig {
            vocab_size,
            max_len,
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            d_ff: 16,
            n_classes,
            dropout_rate: 0.0,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("max_len", self.max_len),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("d_ff", self.d_ff),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Config(format!("{name} must be at least 1")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !matches!(self.n_classes, 2 | 5) {
            return Err(ModelError::Config(format!(
                "n_classes must be 2 or 5, got {}",
                self.n_classes
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Output distribution of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub label_index: usize,
}

impl Prediction {
    pub fn from_probabilities(probabilities: Vec<f64>) -> Self {
        let label_index = argmax(&probabilities);
        Prediction {
            probabilities,
            label_index,
        }
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub config: ModelConfig,
    pub seed: u64,
    pub params: Params,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

fn embedding(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    // Uniform on [-a, a] has standard deviation a / sqrt(3).
    let bound = EMBEDDING_STD * 3f64.sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

impl ClassifierModel {
    /// Draws fresh weights from a ChaCha8 stream keyed by `seed`.
    ///
    /// Weight matrices are Xavier-uniform, embeddings uniform with standard
    /// deviation [`EMBEDDING_STD`], biases zero and layer-norm gains one.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d_model;
        let mut params = Params::zeros(&config);
        params.token_embeddings = embedding(&mut rng, config.vocab_size, d);
        params.position_embeddings = embedding(&mut rng, config.max_len, d);
        for layer in &mut params.layers {
            layer.wq = xavier(&mut rng, d, d);
            layer.wk = xavier(&mut rng, d, d);
            layer.wv = xavier(&mut rng, d, d);
            layer.wo = xavier(&mut rng, d, d);
            layer.w1 = xavier(&mut rng, d, config.d_ff);
            layer.w2 = xavier(&mut rng, config.d_ff, d);
            layer.ln1_gain = Array1::ones(d);
            layer.ln2_gain = Array1::ones(d);
        }
        params.head_weight = xavier(&mut rng, d, config.n_classes);
        Ok(ClassifierModel { config, seed, params })
    }
}
