//! Forward pass, activation tape, and the matching reverse-mode pass.
//!
//! Only the `true_length` non-padding positions are materialized. Padding
//! keys are masked out of every attention softmax (their weight is exactly
//! zero, as with a −∞ score), and padding queries never reach the `[CLS]`
//! output, so dropping those rows changes nothing downstream.

use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ClassifierModel, LayerParams, ModelError, Params, Prediction};
use crate::tokenizer::TokenSequence;

pub const LN_EPS: f64 = 1e-5;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn add_bias(x: &mut Array2<f64>, b: &Array1<f64>) {
    *x += &b.view().insert_axis(Axis(0));
}

/// Inverted-dropout mask (entries 0 or 1/(1-p)), or `None` when inactive.
fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: Option<&mut ChaCha8Rng>) -> Option<Array2<f64>> {
    let rng = rng?;
    if rate == 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    Some(Array2::from_shape_simple_fn((rows, cols), || {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    }))
}

#[derive(Debug, Clone)]
struct NormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, gain: &Array1<f64>, bias: &Array1<f64>) -> (Array2<f64>, NormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row -= mean;
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *inv = 1.0 / (var + LN_EPS).sqrt();
        row *= *inv;
    }
    let mut y = &xhat * &gain.view().insert_axis(Axis(0));
    add_bias(&mut y, bias);
    (y, NormCache { xhat, inv_std })
}

/// Returns d(input); accumulates gain/bias gradients.
fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &NormCache,
    gain: &Array1<f64>,
    dgain: &mut Array1<f64>,
    dbias: &mut Array1<f64>,
) -> Array2<f64> {
    *dgain += &(dy * &cache.xhat).sum_axis(Axis(0));
    *dbias += &dy.sum_axis(Axis(0));
    let d = dy.ncols() as f64;
    let mut dx = dy * &gain.view().insert_axis(Axis(0));
    for ((mut row, xhat), &inv) in dx.rows_mut().into_iter().zip(cache.xhat.rows()).zip(&cache.inv_std) {
        let mean = row.sum() / d;
        let proj = row.dot(&xhat) / d;
        Zip::from(&mut row).and(&xhat).for_each(|g, &xh| {
            *g = inv * (*g - mean - xh * proj);
        });
    }
    dx
}

#[derive(Debug, Clone)]
struct LayerTape {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// One `[n × n]` attention matrix per head.
    attention: Vec<Array2<f64>>,
    context: Array2<f64>,
    attn_dropout: Option<Array2<f64>>,
    norm1: NormCache,
    normed1: Array2<f64>,
    hidden_pre: Array2<f64>,
    hidden: Array2<f64>,
    ffn_dropout: Option<Array2<f64>>,
    norm2: NormCache,
}

/// Everything the reverse pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ActivationTape {
    ids: Vec<usize>,
    embed_dropout: Option<Array2<f64>>,
    layers: Vec<LayerTape>,
    cls: Array1<f64>,
    probabilities: Array1<f64>,
}

impl ActivationTape {
    /// Attention weights of `head` in `layer`, `[true_length × true_length]`.
    pub fn attention(&self, layer: usize, head: usize) -> &Array2<f64> {
        &self.layers[layer].attention[head]
    }

    /// Final hidden state at the `[CLS]` position.
    pub fn cls_hidden(&self) -> ArrayView1<'_, f64> {
        self.cls.view()
    }
}

impl ClassifierModel {
    fn check_input(&self, seq: &TokenSequence) -> Result<Vec<usize>, ModelError> {
        let cfg = &self.config;
        if seq.max_len() != cfg.max_len {
            return Err(ModelError::Input(format!(
                "sequence length {} does not match model max_len {}",
                seq.max_len(),
                cfg.max_len
            )));
        }
        if seq.true_length == 0 || seq.true_length > seq.max_len() {
            return Err(ModelError::Input(format!(
                "true_length {} out of range",
                seq.true_length
            )));
        }
        // Padding ids are never read, but must still be valid.
        if let Some(id) = seq.ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
            return Err(ModelError::Input(format!(
                "token id {id} >= vocab_size {}",
                cfg.vocab_size
            )));
        }
        Ok(seq.active_ids().iter().map(|&id| id as usize).collect())
    }

    /// Runs the encoder on `seq`.
    ///
    /// Dropout is applied only when `dropout` supplies a random stream (the
    /// training mode); masks are drawn from it in a fixed order, so equal
    /// stream states give equal outputs.
    pub fn forward(
        &self,
        seq: &TokenSequence,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(Prediction, ActivationTape), ModelError> {
        let ids = self.check_input(seq)?;
        let cfg = &self.config;
        let p = &self.params;
        let n = ids.len();
        let d = cfg.d_model;
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let rate = cfg.dropout_rate;

        let mut x = Array2::zeros((n, d));
        for (i, &id) in ids.iter().enumerate() {
            let mut row = x.row_mut(i);
            row += &p.token_embeddings.row(id);
            row += &p.position_embeddings.row(i);
        }
        let embed_dropout = dropout_mask(n, d, rate, dropout.as_deref_mut());
        if let Some(m) = &embed_dropout {
            x *= m;
        }

        let mut layers = Vec::with_capacity(cfg.n_layers);
        for lp in &p.layers {
            let mut q = x.dot(&lp.wq);
            add_bias(&mut q, &lp.bq);
            let mut k = x.dot(&lp.wk);
            add_bias(&mut k, &lp.bk);
            let mut v = x.dot(&lp.wv);
            add_bias(&mut v, &lp.bv);

            let mut context = Array2::zeros((n, d));
            let mut attention = Vec::with_capacity(cfg.n_heads);
            for h in 0..cfg.n_heads {
                let cols = s![.., h * dh..(h + 1) * dh];
                let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
                for mut row in scores.rows_mut() {
                    softmax_in_place(row.as_slice_mut().expect("row-major scores"));
                }
                context.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
                attention.push(scores);
            }

            let mut attn_out = context.dot(&lp.wo);
            add_bias(&mut attn_out, &lp.bo);
            let attn_dropout = dropout_mask(n, d, rate, dropout.as_deref_mut());
            if let Some(m) = &attn_dropout {
                attn_out *= m;
            }
            let (normed1, norm1) = layer_norm(&(&x + &attn_out), &lp.ln1_gain, &lp.ln1_bias);

            let mut hidden_pre = normed1.dot(&lp.w1);
            add_bias(&mut hidden_pre, &lp.b1);
            let hidden = hidden_pre.mapv(gelu);
            let mut ffn_out = hidden.dot(&lp.w2);
            add_bias(&mut ffn_out, &lp.b2);
            let ffn_dropout = dropout_mask(n, d, rate, dropout.as_deref_mut());
            if let Some(m) = &ffn_dropout {
                ffn_out *= m;
            }
            let (out, norm2) = layer_norm(&(&normed1 + &ffn_out), &lp.ln2_gain, &lp.ln2_bias);

            layers.push(LayerTape {
                input: std::mem::replace(&mut x, out),
                q,
                k,
                v,
                attention,
                context,
                attn_dropout,
                norm1,
                normed1,
                hidden_pre,
                hidden,
                ffn_dropout,
                norm2,
            });
        }

        let cls = x.row(0).to_owned();
        let mut logits = cls.dot(&p.head_weight) + &p.head_bias;
        softmax_in_place(logits.as_slice_mut().expect("contiguous logits"));
        let probabilities = logits;
        let prediction = Prediction::from_probabilities(probabilities.to_vec());
        let tape = ActivationTape {
            ids,
            embed_dropout,
            layers,
            cls,
            probabilities,
        };
        Ok((prediction, tape))
    }

    /// Class probabilities with dropout off.
    pub fn predict(&self, seq: &TokenSequence) -> Result<Prediction, ModelError> {
        self.forward(seq, None).map(|(p, _)| p)
    }

    /// Accumulates into `grads` the gradient of a loss whose derivative with
    /// respect to this example's logits is `dlogits`.
    pub fn backward(&self, tape: &ActivationTape, dlogits: ArrayView1<'_, f64>, grads: &mut Params) {
        let p = &self.params;
        let cfg = &self.config;
        let n = tape.ids.len();
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();

        grads.head_weight += &outer(tape.cls.view(), dlogits);
        grads.head_bias += &dlogits;
        let mut dx = Array2::zeros((n, cfg.d_model));
        dx.row_mut(0).assign(&p.head_weight.dot(&dlogits));

        for (layer, (lp, g)) in tape
            .layers
            .iter()
            .zip(p.layers.iter().zip(grads.layers.iter_mut()))
            .rev()
        {
            dx = layer_backward(layer, lp, g, dx, cfg.n_heads, dh, scale);
        }

        if let Some(m) = &tape.embed_dropout {
            dx *= m;
        }
        for (i, &id) in tape.ids.iter().enumerate() {
            let row = dx.row(i);
            let mut tok = grads.token_embeddings.row_mut(id);
            tok += &row;
            let mut pos = grads.position_embeddings.row_mut(i);
            pos += &row;
        }
    }

    /// Mean cross-entropy over `batch` and its exact gradient.
    pub fn loss_and_grad(
        &self,
        batch: &[(TokenSequence, usize)],
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Params), ModelError> {
        if batch.is_empty() {
            return Err(ModelError::Input("empty batch".into()));
        }
        let weight = 1.0 / batch.len() as f64;
        let mut grads = Params::zeros(&self.config);
        let mut loss = 0.0;
        for (index, (seq, label)) in batch.iter().enumerate() {
            let label = *label;
            if label >= self.config.n_classes {
                return Err(ModelError::Input(format!(
                    "label {label} >= n_classes {}",
                    self.config.n_classes
                )));
            }
            let (_, tape) = self.forward(seq, dropout.as_deref_mut())?;
            let prob = tape.probabilities[label];
            let term = -prob.ln();
            if !term.is_finite() {
                return Err(ModelError::NonFinite {
                    loss: term,
                    index,
                    label,
                    prob,
                });
            }
            loss += weight * term;
            let mut dlogits = &tape.probabilities * weight;
            dlogits[label] -= weight;
            self.backward(&tape, dlogits.view(), &mut grads);
        }
        Ok((loss, grads))
    }
}

fn outer(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array2<f64> {
    let a = a.insert_axis(Axis(1));
    let b = b.insert_axis(Axis(0));
    a.dot(&b)
}

fn layer_backward(
    t: &LayerTape,
    lp: &LayerParams,
    g: &mut LayerParams,
    dout: Array2<f64>,
    n_heads: usize,
    dh: usize,
    scale: f64,
) -> Array2<f64> {
    // out = LN2(normed1 + drop(ffn(normed1)))
    let dres2 = layer_norm_backward(&dout, &t.norm2, &lp.ln2_gain, &mut g.ln2_gain, &mut g.ln2_bias);
    let mut dffn = dres2.clone();
    if let Some(m) = &t.ffn_dropout {
        dffn *= m;
    }
    g.w2 += &t.hidden.t().dot(&dffn);
    g.b2 += &dffn.sum_axis(Axis(0));
    let mut dpre = dffn.dot(&lp.w2.t());
    Zip::from(&mut dpre)
        .and(&t.hidden_pre)
        .for_each(|d, &h| *d *= gelu_grad(h));
    g.w1 += &t.normed1.t().dot(&dpre);
    g.b1 += &dpre.sum_axis(Axis(0));
    let dnormed1 = dres2 + dpre.dot(&lp.w1.t());

    // normed1 = LN1(input + drop(attn(input)))
    let dres1 = layer_norm_backward(&dnormed1, &t.norm1, &lp.ln1_gain, &mut g.ln1_gain, &mut g.ln1_bias);
    let mut dattn = dres1.clone();
    if let Some(m) = &t.attn_dropout {
        dattn *= m;
    }
    g.wo += &t.context.t().dot(&dattn);
    g.bo += &dattn.sum_axis(Axis(0));
    let dcontext = dattn.dot(&lp.wo.t());

    let mut dq = Array2::zeros(t.q.raw_dim());
    let mut dk = Array2::zeros(t.k.raw_dim());
    let mut dv = Array2::zeros(t.v.raw_dim());
    for h in 0..n_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let attn = &t.attention[h];
        let dctx = dcontext.slice(cols);
        let dattn_w = dctx.dot(&t.v.slice(cols).t());
        dv.slice_mut(cols).assign(&attn.t().dot(&dctx));
        // softmax Jacobian, row by row
        let mut dscores = attn * &dattn_w;
        let row_dots = dscores.sum_axis(Axis(1));
        Zip::from(dscores.rows_mut())
            .and(attn.rows())
            .and(&row_dots)
            .for_each(|mut ds, a, &dot| {
                Zip::from(&mut ds).and(&a).for_each(|x, &av| *x -= av * dot);
            });
        dscores *= scale;
        dq.slice_mut(cols).assign(&dscores.dot(&t.k.slice(cols)));
        dk.slice_mut(cols).assign(&dscores.t().dot(&t.q.slice(cols)));
    }

    g.wq += &t.input.t().dot(&dq);
    g.bq += &dq.sum_axis(Axis(0));
    g.wk += &t.input.t().dot(&dk);
    g.bk += &dk.sum_axis(Axis(0));
    g.wv += &t.input.t().dot(&dv);
    g.bv += &dv.sum_axis(Axis(0));
    dres1 + dq.dot(&lp.wq.t()) + dk.dot(&lp.wk.t()) + dv.dot(&lp.wv.t())
}
