//! Seeded, per-class proportional train/dev splitting.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Task, TextRecord};

/// Slack for products like `0.29 * 100` landing just under an integer.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitWarning {
    pub label: &'static str,
    pub count: usize,
}

impl std::fmt::Display for SplitWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "class `{}` has only {} member(s); placed entirely in train",
            self.label, self.count
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<TextRecord>,
    pub dev: Vec<TextRecord>,
    pub warnings: Vec<SplitWarning>,
}

/// Per-class train sizes.
///
/// Each class gets `floor(count * fraction)`; the records still needed to
/// reach `round(total * fraction)` go one each to the classes with the
/// largest fractional remainder, ties resolved by label order (the map's
/// iteration order).
pub(crate) fn train_quotas(counts: &BTreeMap<&'static str, usize>, fraction: f64) -> BTreeMap<&'static str, usize> {
    let total: usize = counts.values().sum();
    let target = ((total as f64) * fraction).round() as usize;
    let mut quotas = BTreeMap::new();
    let mut remainders = Vec::new();
    for (&label, &count) in counts {
        let exact = count as f64 * fraction;
        let floor = ((exact + FLOOR_SLACK).floor() as usize).min(count);
        quotas.insert(label, floor);
        remainders.push((label, (exact - floor as f64).max(0.0)));
    }
    // Stable sort keeps label order among equal remainders.
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut leftover = target.saturating_sub(quotas.values().sum());
    for (label, _) in remainders {
        if leftover == 0 {
            break;
        }
        let quota = quotas.get_mut(label).unwrap();
        if *quota < counts[label] {
            *quota += 1;
            leftover -= 1;
        }
    }
    quotas
}

/// Splits `records` into train and dev, class by class.
///
/// Members of each class are shuffled by a PRNG keyed on `seed` before the
/// first quota of them go to train. Both halves keep input order. Classes
/// with fewer than two members go wholly to train and produce a warning.
pub fn stratified_split(
    records: &[TextRecord],
    train_fraction: f64,
    task: Task,
    seed: u64,
) -> Result<Split, CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::Fraction(train_fraction));
    }
    let mut members: BTreeMap<&'static str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        members.entry(r.require_label(task)?).or_default().push(i);
    }

    let mut warnings = Vec::new();
    let mut in_train = vec![false; records.len()];
    let mut eligible = BTreeMap::new();
    for (&label, idx) in &members {
        if idx.len() < 2 {
            warnings.push(SplitWarning {
                label,
                count: idx.len(),
            });
            for &i in idx {
                in_train[i] = true;
            }
        } else {
            eligible.insert(label, idx.len());
        }
    }

    let quotas = train_quotas(&eligible, train_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (label, quota) in quotas {
        let mut idx = members[label].clone();
        idx.shuffle(&mut rng);
        for &i in &idx[..quota] {
            in_train[i] = true;
        }
    }

    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (r, t) in records.iter().zip(in_train) {
        if t {
            train.push(r.clone());
        } else {
            dev.push(r.clone());
        }
    }
    Ok(Split { train, dev, warnings })
}
