//! Parameter tensors of one encoder, and same-shaped gradient / moment buffers.

use ndarray::{Array1, Array2};

use super::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln1_gain: Array1<f64>,
    pub ln1_bias: Array1<f64>,
    /// `[d_model × d_ff]`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `[d_ff × d_model]`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub ln2_gain: Array1<f64>,
    pub ln2_bias: Array1<f64>,
}

impl LayerParams {
    fn zeros(d: usize, ff: usize) -> Self {
        let m = |r, c| Array2::zeros((r, c));
        let v = |n| Array1::zeros(n);
        LayerParams {
            wq: m(d, d),
            bq: v(d),
            wk: m(d, d),
            bk: v(d),
            wv: m(d, d),
            bv: v(d),
            wo: m(d, d),
            bo: v(d),
            ln1_gain: v(d),
            ln1_bias: v(d),
            w1: m(d, ff),
            b1: v(ff),
            w2: m(ff, d),
            b2: v(d),
            ln2_gain: v(d),
            ln2_bias: v(d),
        }
    }
}

/// All trainable tensors. Row-vector convention: activations are
/// `[positions × features]` and weights multiply on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub token_embeddings: Array2<f64>,
    pub position_embeddings: Array2<f64>,
    pub layers: Vec<LayerParams>,
    /// `[d_model × n_classes]`
    pub head_weight: Array2<f64>,
    pub head_bias: Array1<f64>,
}

const LAYER_TENSORS: [&str; 16] = [
    "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln1_gain", "ln1_bias", "w1", "b1", "w2", "b2", "ln2_gain",
    "ln2_bias",
];

macro_rules! layer_slices {
    ($layer:expr, $as:ident) => {
        [
            $layer.wq.$as(),
            $layer.bq.$as(),
            $layer.wk.$as(),
            $layer.bk.$as(),
            $layer.wv.$as(),
            $layer.bv.$as(),
            $layer.wo.$as(),
            $layer.bo.$as(),
            $layer.ln1_gain.$as(),
            $layer.ln1_bias.$as(),
            $layer.w1.$as(),
            $layer.b1.$as(),
            $layer.w2.$as(),
            $layer.b2.$as(),
            $layer.ln2_gain.$as(),
            $layer.ln2_bias.$as(),
        ]
    };
}

impl Params {
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.d_model;
        Params {
            token_embeddings: Array2::zeros((config.vocab_size, d)),
            position_embeddings: Array2::zeros((config.max_len, d)),
            layers: (0..config.n_layers)
                .map(|_| LayerParams::zeros(d, config.d_ff))
                .collect(),
            head_weight: Array2::zeros((d, config.n_classes)),
            head_bias: Array1::zeros(config.n_classes),
        }
    }

    /// Tensor names in the canonical order used by checkpoints and optimizers.
    pub fn names(&self) -> Vec<String> {
        let mut names = vec!["token_embeddings".to_string(), "position_embeddings".to_string()];
        for l in 0..self.layers.len() {
            names.extend(LAYER_TENSORS.iter().map(|t| format!("layer{l}.{t}")));
        }
        names.push("head_weight".into());
        names.push("head_bias".into());
        names
    }

    /// Flat views of every tensor, in [`Params::names`] order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<Option<&[f64]>> = vec![self.token_embeddings.as_slice(), self.position_embeddings.as_slice()];
        for layer in &self.layers {
            out.extend(layer_slices!(layer, as_slice));
        }
        out.push(self.head_weight.as_slice());
        out.push(self.head_bias.as_slice());
        out.into_iter().map(|s| s.expect("parameters are contiguous")).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<Option<&mut [f64]>> = vec![
            self.token_embeddings.as_slice_mut(),
            self.position_embeddings.as_slice_mut(),
        ];
        for layer in &mut self.layers {
            out.extend(layer_slices!(layer, as_slice_mut));
        }
        out.push(self.head_weight.as_slice_mut());
        out.push(self.head_bias.as_slice_mut());
        out.into_iter().map(|s| s.expect("parameters are contiguous")).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: f64, other: &Params) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for dst in self.slices_mut() {
            dst.iter_mut().for_each(|d| *d *= alpha);
        }
    }

    pub fn same_shape(&self, other: &Params) -> bool {
        let a = self.slices();
        let b = other.slices();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    }
}
