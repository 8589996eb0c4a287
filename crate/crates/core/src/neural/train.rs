//! Training loop: per-sentence adaptive-moment updates with gradient
//! clipping, and the best-dev-F1 epoch snapshot.

use std::collections::BTreeSet;

use crate::bio::{bio_decode, bio_encode, BioLabel};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::types::{Corpus, EntityMention, EntityType, Sentence};

use super::crf::{nll_and_grads, viterbi, TransitionMask, Transitions};
use super::model::{
    encode_inputs, init_params, label_alphabet, load_pretrained_embeddings, Dims, Layout, Tagger,
    TaggerModel, VocabMaps,
};
use super::TrainConfig;

/// One training example: a sentence and its gold label indices.
struct Example {
    sentence: Sentence,
    gold: Vec<usize>,
}

fn project_mentions(mentions: &[EntityMention], only: Option<EntityType>) -> Vec<EntityMention> {
    match only {
        None => mentions.to_vec(),
        Some(t) => mentions
            .iter()
            .filter(|m| m.entity_type == t)
            .copied()
            .collect(),
    }
}

/// Turn a corpus into training examples for one model. In bag mode gold
/// labels are projected to the model's single type.
fn examples(
    corpus: &Corpus,
    gold_source: &str,
    vocab: &VocabMaps,
    only: Option<EntityType>,
) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for doc in &corpus.documents {
        let mentions = doc.mentions(gold_source);
        for sentence in &doc.sentences {
            if sentence.is_empty() {
                continue;
            }
            let in_sentence: Vec<EntityMention> = mentions
                .iter()
                .filter(|m| m.sentence == sentence.index)
                .copied()
                .collect();
            let projected = project_mentions(&in_sentence, only);
            let labels = bio_encode(sentence.len(), &projected)?;
            let gold = labels
                .iter()
                .map(|l| {
                    vocab.label_index(l).ok_or_else(|| {
                        Error::Resource(format!("label {l} outside the model's alphabet"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(Example {
                sentence: sentence.clone(),
                gold,
            });
        }
    }
    Ok(out)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - Self::BETA1.powi(self.t as i32);
        let b2t = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= self.lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

fn clip_global_norm(grads: &mut [f64], max_norm: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
}

/// Predicted mentions for one sentence under one model.
pub(super) fn decode_sentence(
    model: &TaggerModel,
    layout: &Layout,
    mask: &TransitionMask,
    sentence: &Sentence,
) -> Result<Vec<EntityMention>> {
    if sentence.is_empty() {
        return Ok(Vec::new());
    }
    let tagger = Tagger::new(&model.dims, layout, &model.params);
    let trace = tagger.forward(encode_inputs(sentence, &model.vocab));
    let trans = Transitions::new(tagger.transitions(), model.dims.num_labels);
    let (path, _) = viterbi(&trace.emissions, trans, mask)?;
    let labels: Vec<BioLabel> = path.iter().map(|&j| model.vocab.labels[j]).collect();
    // Stray I- labels from the model are repaired, not rejected.
    bio_decode(&labels, sentence.index, true)
}

/// Micro F1 of exact span+type matches, for dev-set model selection.
fn micro_f1(model: &TaggerModel, examples: &[Example], only: Option<EntityType>) -> Result<f64> {
    let layout = model.layout();
    let mask = TransitionMask::for_labels(&model.vocab.labels);
    let mut tp = 0usize;
    let mut n_gold = 0usize;
    let mut n_pred = 0usize;
    for ex in examples {
        let predicted = decode_sentence(model, &layout, &mask, &ex.sentence)?;
        let gold_labels: Vec<BioLabel> = ex.gold.iter().map(|&j| model.vocab.labels[j]).collect();
        let gold = bio_decode(&gold_labels, ex.sentence.index, false)?;
        let gold: BTreeSet<_> = project_mentions(&gold, only).into_iter().collect();
        let predicted: BTreeSet<_> = predicted.into_iter().collect();
        tp += predicted.intersection(&gold).count();
        n_gold += gold.len();
        n_pred += predicted.len();
    }
    let p = if n_pred == 0 { 0.0 } else { tp as f64 / n_pred as f64 };
    let r = if n_gold == 0 { 0.0 } else { tp as f64 / n_gold as f64 };
    Ok(crate::eval::f1(p, r))
}

/// Train one model (the joint model, or one per-type model in bag mode).
pub(super) fn train_one(
    train: &Corpus,
    dev: Option<&Corpus>,
    config: &TrainConfig,
    gold_source: &str,
    entity_type: Option<EntityType>,
    types: &[EntityType],
    seed_stream: u64,
) -> Result<TaggerModel> {
    let labels = match entity_type {
        Some(t) => label_alphabet(&[t]),
        None => label_alphabet(types),
    };
    let vocab = VocabMaps::build(train, labels)?;
    let dims = Dims {
        vocab_words: vocab.words.len(),
        vocab_chars: vocab.chars.len(),
        num_labels: vocab.labels.len(),
        word_dim: config.word_dim,
        char_dim: config.char_dim,
        char_hidden: config.char_hidden,
        word_hidden: config.word_hidden,
    };
    let layout = Layout::new(&dims);
    let mut rng = Rng::new(config.seed).fork(seed_stream);
    let mut params = init_params(&layout, &mut rng);
    if let Some(path) = &config.embeddings {
        load_pretrained_embeddings(path, &vocab, &dims, &layout, &mut params)?;
    }

    let train_examples = examples(train, gold_source, &vocab, entity_type)?;
    if train_examples.is_empty() {
        return Err(Error::Invalid("no non-empty training sentences".to_string()));
    }
    let dev_examples = match dev {
        Some(c) => Some(examples(c, gold_source, &vocab, entity_type)?),
        None => None,
    };

    let mut model = TaggerModel {
        entity_type,
        vocab,
        dims,
        params,
        epoch_losses: Vec::with_capacity(config.epochs),
    };
    let mut adam = Adam::new(layout.total, config.learning_rate);
    let mut grads = vec![0.0; layout.total];
    let mut order: Vec<usize> = (0..train_examples.len()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;

    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let ex = &train_examples[idx];
            grads.iter_mut().for_each(|g| *g = 0.0);
            let tagger = Tagger::new(&model.dims, &layout, &model.params);
            let trace = tagger.forward(encode_inputs(&ex.sentence, &model.vocab));
            let trans = Transitions::new(tagger.transitions(), model.dims.num_labels);
            let (nll, d_emissions, d_trans) = nll_and_grads(&trace.emissions, trans, &ex.gold)?;
            epoch_loss += nll;
            tagger.backward(&trace, &d_emissions, &mut grads);
            grads[layout.trans.clone()]
                .iter_mut()
                .zip(&d_trans)
                .for_each(|(g, d)| *g += d);
            clip_global_norm(&mut grads, config.clip_norm);
            adam.step(&mut model.params, &grads);
        }
        model.epoch_losses.push(epoch_loss / train_examples.len() as f64);
        if let Some(dev_examples) = &dev_examples {
            let f1 = micro_f1(&model, dev_examples, entity_type)?;
            let improved = best.as_ref().is_none_or(|(b, _)| f1 > *b);
            if improved {
                best = Some((f1, model.params.clone()));
            }
        }
    }
    if let Some((_, snapshot)) = best {
        model.params = snapshot;
    }
    Ok(model)
}
