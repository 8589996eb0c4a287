//! Generate the benchmark corpus, run all three systems and print the
//! comparison table:
//!
//! ```text
//! cargo run --release -p radner --example compare_systems
//! ```

use radner::corpus_io::GOLD_SOURCE;
use radner::datagen::{generate_corpus, split_corpus};
use radner::eval::{compare_systems, score_strict};
use radner::gazetteer::{self, DisambigConfig};
use radner::neural::{self, Mode, TrainConfig};
use radner::{ruler, stock};

fn main() {
    let corpus = generate_corpus(&stock::benchmark_config()).expect("generation");
    let (dev, mut test) = split_corpus(&corpus, 5.0 / 7.0, 42).expect("split");
    eprintln!(
        "generated {} reports; training on {}, evaluating on {}",
        corpus.documents.len(),
        dev.documents.len(),
        test.documents.len()
    );

    let ruleset = stock::ruleset();
    for doc in &mut test.documents {
        ruler::annotate_document(doc, &ruleset);
    }

    let (dict, map) = stock::concept_resources();
    let (model, _) =
        gazetteer::train_disambiguator(&dev, &dict, &map, &DisambigConfig::default(), GOLD_SOURCE)
            .expect("disambiguator training");
    for doc in &mut test.documents {
        gazetteer::annotate_document(doc, &dict, &map, Some(&model)).expect("gazetteer");
    }

    let mut config = TrainConfig::new(1);
    config.mode = Mode::Monolithic;
    config.epochs = 8;
    eprintln!("training the neural tagger ({} epochs)...", config.epochs);
    let bundle = neural::train_tagger(&dev, None, &config, GOLD_SOURCE).expect("training");
    bundle.annotate_corpus(&mut test).expect("prediction");

    let reports = vec![
        score_strict(&test, GOLD_SOURCE, ruler::RULER_SOURCE).unwrap(),
        score_strict(&test, GOLD_SOURCE, gazetteer::GAZETTEER_SOURCE).unwrap(),
        score_strict(&test, GOLD_SOURCE, neural::NEURAL_SOURCE).unwrap(),
    ];
    print!("{}", compare_systems(&reports, None, false).unwrap());
}
