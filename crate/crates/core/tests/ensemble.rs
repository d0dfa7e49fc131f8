use std::collections::BTreeMap;
use std::sync::Arc;

use exist_cascade::corpus::{filter_language, filter_sexist, Language, Task};
use exist_cascade::ensemble::{train_ensemble, EnsembleManifest, EnsembleModel};
use exist_cascade::pipeline::PipelineModel;
use exist_cascade::synthetic::{synthetic_corpus, SyntheticSpec};
use exist_cascade::textprep::mask_mentions_urls;
use exist_cascade::tokenizer::Vocabulary;
use exist_cascade::trainer::{EncoderShape, TrainConfig};

fn quick() -> TrainConfig {
    TrainConfig {
        epochs: 2,
        max_len: 24,
        shape: EncoderShape {
            d_model: 16,
            n_heads: 2,
            n_layers: 1,
            d_ff: 32,
            dropout_rate: 0.1,
        },
        ..TrainConfig::default()
    }
}

fn data(language: Language) -> (Vec<exist_cascade::corpus::TextRecord>, Arc<Vocabulary>) {
    let records = filter_language(
        &synthetic_corpus(&SyntheticSpec {
            per_language: 120,
            ..Default::default()
        }),
        language,
    );
    let texts: Vec<String> = records.iter().map(|r| mask_mentions_urls(&r.text)).collect();
    (records, Arc::new(Vocabulary::build(&texts, 500, 1).unwrap()))
}

#[test]
fn members_follow_seeds_and_reruns_are_identical() {
    let (records, vocab) = data(Language::En);
    let a = train_ensemble(&records, Task::Task1, Language::En, vocab.clone(), &quick()).unwrap();
    let b = train_ensemble(&records, Task::Task1, Language::En, vocab, &quick()).unwrap();
    let seeds: Vec<u64> = a.ensemble.members().iter().map(|m| m.seed).collect();
    assert_eq!(seeds, [1, 2, 3]);
    assert_eq!(a.reports.iter().map(|r| r.seed).collect::<Vec<_>>(), seeds);
    for (x, y) in a.ensemble.members().iter().zip(b.ensemble.members()) {
        assert_eq!(x.to_checkpoint_bytes(), y.to_checkpoint_bytes());
    }
    assert_ne!(a.ensemble.members()[0].params, a.ensemble.members()[1].params);
}

#[test]
fn manifest_round_trip_through_disk() {
    let (records, vocab) = data(Language::Es);
    let e = train_ensemble(&records, Task::Task1, Language::Es, vocab.clone(), &quick())
        .unwrap()
        .ensemble;
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("v.txt"), vocab.to_file_string()).unwrap();
    let mut members = Vec::new();
    for m in e.members() {
        let name = format!("m{}.ckpt", m.seed);
        std::fs::write(dir.path().join(&name), m.to_checkpoint_bytes()).unwrap();
        members.push(name.into());
    }
    let manifest = EnsembleManifest {
        task: Task::Task1,
        language: Language::Es,
        vocab: "v.txt".into(),
        members,
    };
    let path = dir.path().join("task1.es.manifest");
    std::fs::write(&path, manifest.to_file_string()).unwrap();
    let loaded = EnsembleManifest::load(&path, None).unwrap();
    assert_eq!(loaded, e);
    for text in ["hola @amiga que tal", "odio esto https://t.co/x"] {
        assert_eq!(loaded.predict(text), e.predict(text));
    }
}

fn trained(language: Language, shift: u64) -> (EnsembleModel, EnsembleModel) {
    let (records, vocab) = data(language);
    let cfg = TrainConfig {
        seeds: vec![1 + shift, 2 + shift, 3 + shift],
        ..quick()
    };
    let t1 = train_ensemble(&records, Task::Task1, language, vocab.clone(), &cfg)
        .unwrap()
        .ensemble;
    let sexist = filter_sexist(&records).unwrap();
    let cfg2 = TrainConfig {
        seeds: vec![1 + shift],
        ..cfg
    };
    let t2 = train_ensemble(&sexist, Task::Task2, language, vocab, &cfg2)
        .unwrap()
        .ensemble;
    (t1, t2)
}

#[test]
fn changing_spanish_models_never_changes_english_predictions() {
    let (en1, en2) = trained(Language::En, 0);
    let (es1, es2) = trained(Language::Es, 0);
    let (es1b, es2b) = trained(Language::Es, 10);
    let build = |a: &EnsembleModel, b: &EnsembleModel| {
        PipelineModel::new(
            BTreeMap::from([(Language::En, en1.clone()), (Language::Es, a.clone())]),
            BTreeMap::from([(Language::En, en2.clone()), (Language::Es, b.clone())]),
        )
        .unwrap()
    };
    let p = build(&es1, &es2);
    let q = build(&es1b, &es2b);
    let records = synthetic_corpus(&SyntheticSpec {
        per_language: 60,
        seed: 9,
        ..Default::default()
    });
    let (rp, rq) = (p.predict_batch(&records).unwrap(), q.predict_batch(&records).unwrap());
    let mut es_differs = false;
    for ((r, a), b) in records.iter().zip(&rp).zip(&rq) {
        if r.language == Language::En {
            assert_eq!(a, b);
        } else {
            es_differs |= a != b;
        }
    }
    assert!(
        es_differs,
        "the swapped Spanish models should change at least one Spanish prediction"
    );
}
