//! Central-difference gradient oracle, independent of the analytic backward pass.

use exist_cascade::encoder::{ClassifierModel, Params};
use exist_cascade::tokenizer::{TokenSequence, CLS, PAD, SEP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor. Entries whose true gradient is zero (the key bias, by
/// softmax shift invariance) are compared on an absolute scale: at this floor
/// the 1e-4 tolerance means |a - n| <= 1e-10, still above the ~1e-11
/// round-off of a 1e-5 difference quotient.
pub const REL_FLOOR: f64 = 1e-6;

pub fn sequence(body: &[u32], max_len: usize) -> TokenSequence {
    let mut ids = vec![CLS];
    ids.extend_from_slice(body);
    ids.push(SEP);
    let true_length = ids.len();
    ids.resize(max_len, PAD);
    let mask = (0..max_len).map(|i| u8::from(i < true_length)).collect();
    TokenSequence { ids, mask, true_length }
}

/// Moves every parameter (including zero biases and unit gains) off its
/// initial value so no gradient is trivially structured.
pub fn jitter(model: &mut ClassifierModel, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in model.params.slices_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
}

fn loss_of(model: &ClassifierModel, batch: &[(TokenSequence, usize)], dropout_seed: Option<u64>) -> f64 {
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    model.loss_and_grad(batch, rng.as_mut()).unwrap().0
}

/// Per-tensor worst relative error `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn check(
    model: &ClassifierModel,
    batch: &[(TokenSequence, usize)],
    dropout_seed: Option<u64>,
) -> Vec<(String, f64)> {
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    let (_, analytic): (f64, Params) = model.loss_and_grad(batch, rng.as_mut()).unwrap();
    let names = model.params.names();
    let analytic = analytic.slices();
    let mut probe = model.clone();
    let mut out = Vec::new();
    for (t, name) in names.iter().enumerate() {
        let mut worst = 0.0f64;
        for (i, &a) in analytic[t].iter().enumerate() {
            let orig = probe.params.slices()[t][i];
            probe.params.slices_mut()[t][i] = orig + FD_STEP;
            let plus = loss_of(&probe, batch, dropout_seed);
            probe.params.slices_mut()[t][i] = orig - FD_STEP;
            let minus = loss_of(&probe, batch, dropout_seed);
            probe.params.slices_mut()[t][i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
        }
        out.push((name.clone(), worst));
    }
    out
}
