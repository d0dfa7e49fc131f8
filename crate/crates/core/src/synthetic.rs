//! Seeded synthetic corpora in the EXIST schema.
//!
//! Each text mixes filler words of its language with cue words tied to its
//! fine-grained label. With probability `ambiguity` the cue words are drawn
//! for a uniformly random label instead, which caps attainable accuracy and
//! gives classifiers something to disagree about. Some texts open with a
//! handle or end with a link so the masking path is exercised.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Language, Source, Task2Label, TextRecord};

const FILLER_EN: &[&str] = &[
    "the", "a", "is", "this", "that", "really", "so", "just", "today", "people", "you", "think", "about", "they",
    "what", "all", "again", "here", "my", "one",
];
const FILLER_ES: &[&str] = &[
    "el", "la", "es", "esto", "que", "muy", "tan", "solo", "hoy", "gente", "tú", "piensa", "sobre", "ellos", "todo",
    "pues", "otra", "aquí", "mi", "una",
];

fn cues(language: Language, label: Task2Label) -> &'static [&'static str] {
    use Task2Label::*;
    match (language, label) {
        (Language::En, NonSexist) => &["coffee", "weekend", "football", "music", "friend", "garden"],
        (Language::En, IdeologicalInequality) => &["equality", "quota", "wage", "feminism", "rights"],
        (Language::En, StereotypingDominance) => &["kitchen", "emotional", "bossy", "obey", "driving"],
        (Language::En, Objectification) => &["body", "curves", "outfit", "rate", "legs"],
        (Language::En, SexualViolence) => &["grope", "assault", "harass", "unwanted", "force"],
        (Language::En, MisogynyNonSexualViolence) => &["hate", "stupid", "trash", "slap", "worthless"],
        (Language::Es, NonSexist) => &["café", "finde", "fútbol", "música", "amiga", "jardín"],
        (Language::Es, IdeologicalInequality) => &["igualdad", "cuota", "salario", "feminismo", "derechos"],
        (Language::Es, StereotypingDominance) => &["cocina", "emocional", "mandona", "obedece", "conducir"],
        (Language::Es, Objectification) => &["cuerpo", "curvas", "vestido", "puntuar", "piernas"],
        (Language::Es, SexualViolence) => &["manosear", "agresión", "acosar", "indeseado", "forzar"],
        (Language::Es, MisogynyNonSexualViolence) => &["odio", "estúpida", "basura", "bofetada", "inútil"],
    }
}

/// Label mix roughly following the EXIST training distribution.
const LABEL_WEIGHTS: [(Task2Label, u32); 6] = [
    (Task2Label::NonSexist, 3600),
    (Task2Label::IdeologicalInequality, 866),
    (Task2Label::StereotypingDominance, 809),
    (Task2Label::Objectification, 500),
    (Task2Label::SexualViolence, 517),
    (Task2Label::MisogynyNonSexualViolence, 685),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    /// Records generated for each of English and Spanish.
    pub per_language: usize,
    /// Probability that a text's cue words come from a random label.
    pub ambiguity: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            per_language: 200,
            ambiguity: 0.1,
            seed: 0,
        }
    }
}

fn draw_label(rng: &mut ChaCha8Rng) -> Task2Label {
    let total: u32 = LABEL_WEIGHTS.iter().map(|(_, w)| w).sum();
    let mut x = rng.random_range(0..total);
    for (label, w) in LABEL_WEIGHTS {
        if x < w {
            return label;
        }
        x -= w;
    }
    unreachable!()
}

fn compose(rng: &mut ChaCha8Rng, language: Language, cue_label: Task2Label) -> String {
    let filler = match language {
        Language::En => FILLER_EN,
        Language::Es => FILLER_ES,
    };
    let mut words: Vec<String> = (0..rng.random_range(3..8))
        .map(|_| filler.choose(rng).unwrap().to_string())
        .collect();
    for _ in 0..rng.random_range(1..3) {
        let at = rng.random_range(0..=words.len());
        words.insert(at, cues(language, cue_label).choose(rng).unwrap().to_string());
    }
    if rng.random_bool(0.3) {
        words.insert(0, format!("@user{}", rng.random_range(0..50)));
    }
    if rng.random_bool(0.2) {
        words.push(format!("https://t.co/{:x}", rng.random::<u32>()));
    }
    words.join(" ")
}

/// Labeled records, English first then Spanish, ids `en-0`, `en-1`, …
pub fn synthetic_corpus(spec: &SyntheticSpec) -> Vec<TextRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(2 * spec.per_language);
    for language in Language::ALL.iter().copied() {
        for i in 0..spec.per_language {
            let label = draw_label(&mut rng);
            let cue_label = if rng.random_bool(spec.ambiguity.clamp(0.0, 1.0)) {
                *Task2Label::ALL.choose(&mut rng).unwrap()
            } else {
                label
            };
            let text = compose(&mut rng, language, cue_label);
            let source = if rng.random_bool(0.8) {
                Source::Twitter
            } else {
                Source::Gab
            };
            let record = TextRecord::new(
                format!("{language}-{i}"),
                source,
                language,
                text,
                Some(label.task1()),
                Some(label),
            )
            .expect("generated records are valid");
            out.push(record);
        }
    }
    out
}

/// `n` single-language records whose binary label is fully determined by a
/// keyword; classes alternate sexist / non-sexist.
pub fn separable_corpus(n: usize, language: Language, seed: u64) -> Vec<TextRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 {
                Task2Label::SEXIST_CATEGORIES[(i / 2) % 5]
            } else {
                Task2Label::NonSexist
            };
            let text = compose(&mut rng, language, label);
            TextRecord::new(
                format!("{language}-{i}"),
                Source::Twitter,
                language,
                text,
                Some(label.task1()),
                Some(label),
            )
            .expect("generated records are valid")
        })
        .collect()
}
