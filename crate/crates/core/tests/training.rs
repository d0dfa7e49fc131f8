use std::time::Instant;

use exist_cascade::corpus::{Language, Task};
use exist_cascade::encoder::ClassifierModel;
use exist_cascade::synthetic::separable_corpus;
use exist_cascade::tokenizer::Vocabulary;
use exist_cascade::trainer::{accuracy, encode_examples, TrainConfig, Trainer};

#[test]
fn default_config_overfits_keyword_corpus() {
    let start = Instant::now();
    let records = separable_corpus(32, Language::En, 0);
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let vocab = Vocabulary::build(&texts, 400, 1).unwrap();
    let config = TrainConfig::default();
    let examples = encode_examples(&records, Task::Task1, &vocab, config.max_len).unwrap();
    let model = ClassifierModel::init(config.model_config(vocab.len(), 2), 1).unwrap();
    let mut trainer = Trainer::new(model, config.adam, config.batch_size);
    let first_loss = trainer.run_epoch(&examples).unwrap();
    let mut last_loss = first_loss;
    let mut reached = None;
    for epoch in 2..=200 {
        last_loss = trainer.run_epoch(&examples).unwrap();
        if accuracy(trainer.model(), &examples).unwrap() == 1.0 {
            reached = Some(epoch);
            break;
        }
    }
    println!(
        "reached 100% at {reached:?}, loss {first_loss} -> {last_loss}, {:?}",
        start.elapsed()
    );
    assert!(reached.is_some());
    assert!(last_loss < first_loss);
}
