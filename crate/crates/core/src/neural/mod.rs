//! Neural sequence tagger: a character-level bidirectional recurrent encoder
//! feeding word representations into a word-level bidirectional layer with a
//! linear-chain CRF on top. Trains either one model per entity type
//! ("bag-of-models") or a single joint model ("monolithic"), with exact
//! Viterbi decoding under structural BIO masking.
//!
//! Everything runs at 64-bit precision on flat parameter vectors, making
//! training bitwise reproducible for a given seed and configuration.

pub mod crf;
pub mod math;
pub mod model;

mod lstm;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Corpus, Document, EntityMention, EntityType};

pub use crf::{forward_log_z, nll_and_grads, sequence_score, viterbi, TransitionMask, Transitions};
pub use model::{
    encode_inputs, label_alphabet, Dims, Layout, Tagger, TaggerModel, TokenFeatures, VocabMaps,
};

/// Annotation source written by this system.
pub const NEURAL_SOURCE: &str = "neural";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One model per entity type, predictions merged.
    Bag,
    /// A single joint model over the full label space.
    Monolithic,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Bag => "bag",
            Mode::Monolithic => "monolithic",
        }
    }
}

fn default_word_dim() -> usize {
    64
}
fn default_char_dim() -> usize {
    16
}
fn default_char_hidden() -> usize {
    16
}
fn default_word_hidden() -> usize {
    64
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    40
}
fn default_clip_norm() -> f64 {
    5.0
}
fn default_mode() -> Mode {
    Mode::Bag
}

/// Training configuration. The seed is mandatory; everything else has the
/// stock defaults. Unknown keys in a config file are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_word_dim")]
    pub word_dim: usize,
    #[serde(default = "default_char_dim")]
    pub char_dim: usize,
    #[serde(default = "default_char_hidden")]
    pub char_hidden: usize,
    #[serde(default = "default_word_hidden")]
    pub word_hidden: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_clip_norm")]
    pub clip_norm: f64,
    /// Optional plain-text pretrained word embeddings (`word v1 v2 ...`);
    /// absent means random initialization.
    #[serde(default)]
    pub embeddings: Option<std::path::PathBuf>,
}

impl TrainConfig {
    pub fn new(seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            mode: default_mode(),
            word_dim: default_word_dim(),
            char_dim: default_char_dim(),
            char_hidden: default_char_hidden(),
            word_hidden: default_word_hidden(),
            learning_rate: default_learning_rate(),
            epochs: default_epochs(),
            clip_norm: default_clip_norm(),
            embeddings: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.word_dim,
            self.char_dim,
            self.char_hidden,
            self.word_hidden,
            self.epochs,
        ];
        if dims.contains(&0) {
            return Err(Error::Config("dimensions and epochs must be positive".into()));
        }
        let finite_positive = |v: f64| v.is_finite() && v > 0.0;
        if !finite_positive(self.learning_rate) || !finite_positive(self.clip_norm) {
            return Err(Error::Config("learning rate and clip norm must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<TrainConfig> {
        let config: TrainConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("bad training config: {e}")))?;
        config.validate()?;
        Ok(config)
    }
}

/// A trained tagger: per-type models in bag mode, or one joint model.
#[derive(Debug, Clone)]
pub struct NeuralTaggerBundle {
    pub mode: Mode,
    /// Bag: one model per configured type, in enumeration order, each with
    /// `entity_type` set. Monolithic: a single model with `entity_type` none.
    pub models: Vec<TaggerModel>,
    /// Merge priority for bag predictions (the fixed enumeration order).
    pub priority: Vec<EntityType>,
}

/// Entity types occurring in the gold annotations, in enumeration order.
fn gold_types(corpus: &Corpus, gold_source: &str) -> Vec<EntityType> {
    let mut present = [false; EntityType::ALL.len()];
    for doc in &corpus.documents {
        for m in doc.mentions(gold_source) {
            present[m.entity_type.index()] = true;
        }
    }
    EntityType::ALL
        .iter()
        .copied()
        .filter(|t| present[t.index()])
        .collect()
}

/// Train a tagger on `train`, selecting each model's best epoch by dev-set
/// F1 when a dev corpus is given. Bag mode trains one model per entity type
/// present in the training gold (concurrently; each model draws from its own
/// seeded stream, so the result is independent of scheduling). The monolithic
/// model uses the full label space of all entity types.
pub fn train_tagger(
    train: &Corpus,
    dev: Option<&Corpus>,
    config: &TrainConfig,
    gold_source: &str,
) -> Result<NeuralTaggerBundle> {
    config.validate()?;
    if train.documents.is_empty() {
        return Err(Error::Invalid("empty training corpus".to_string()));
    }
    if !train.has_source(gold_source) {
        return Err(Error::MissingSource(gold_source.to_string()));
    }
    match config.mode {
        Mode::Monolithic => {
            let model = train::train_one(
                train,
                dev,
                config,
                gold_source,
                None,
                &EntityType::ALL,
                0,
            )?;
            Ok(NeuralTaggerBundle {
                mode: Mode::Monolithic,
                models: vec![model],
                priority: EntityType::ALL.to_vec(),
            })
        }
        Mode::Bag => {
            let types = gold_types(train, gold_source);
            if types.is_empty() {
                return Err(Error::Invalid(
                    "training corpus has no gold mentions".to_string(),
                ));
            }
            // Per-type models train concurrently; each draws from its own
            // seed stream, so the outcome is independent of scheduling.
            let threads = std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
                .min(types.len());
            let mut results: Vec<Option<Result<TaggerModel>>> =
                (0..types.len()).map(|_| None).collect();
            std::thread::scope(|scope| {
                let types = &types;
                let mut handles = Vec::with_capacity(threads);
                for worker in 0..threads {
                    handles.push(scope.spawn(move || {
                        let mut out = Vec::new();
                        for (i, &t) in types.iter().enumerate() {
                            if i % threads != worker {
                                continue;
                            }
                            let stream = 1 + t.index() as u64;
                            let model = train::train_one(
                                train,
                                dev,
                                config,
                                gold_source,
                                Some(t),
                                &[],
                                stream,
                            );
                            out.push((i, model));
                        }
                        out
                    }));
                }
                for handle in handles {
                    for (i, model) in handle.join().expect("training thread panicked") {
                        results[i] = Some(model);
                    }
                }
            });
            let models = results
                .into_iter()
                .map(|r| r.expect("every type trained"))
                .collect::<Result<Vec<_>>>()?;
            Ok(NeuralTaggerBundle {
                mode: Mode::Bag,
                models,
                priority: EntityType::ALL.to_vec(),
            })
        }
    }
}

/// Resolve bag-of-models conflicts: longer span wins, equal spans go to the
/// earlier type in the priority list, remaining overlaps go leftmost.
pub fn merge_bag_predictions(
    per_type: &[(EntityType, Vec<EntityMention>)],
    priority: &[EntityType],
) -> Vec<EntityMention> {
    let rank = |t: EntityType| {
        priority
            .iter()
            .position(|p| *p == t)
            .unwrap_or(priority.len())
    };
    let mut candidates: Vec<EntityMention> = per_type
        .iter()
        .flat_map(|(_, mentions)| mentions.iter().copied())
        .collect();
    candidates.sort_by_key(|m| {
        (
            m.sentence,
            std::cmp::Reverse(m.len()),
            m.start_tok,
            rank(m.entity_type),
        )
    });
    let mut kept: Vec<EntityMention> = Vec::new();
    for m in candidates {
        if !kept.iter().any(|k| k.overlaps(&m)) {
            kept.push(m);
        }
    }
    kept.sort();
    kept
}

impl NeuralTaggerBundle {
    /// Predict mentions for one document under the "neural" source.
    pub fn annotate_document(&self, doc: &mut Document) -> Result<()> {
        self.validate()?;
        let layouts: Vec<Layout> = self.models.iter().map(TaggerModel::layout).collect();
        let masks: Vec<TransitionMask> = self
            .models
            .iter()
            .map(|m| TransitionMask::for_labels(&m.vocab.labels))
            .collect();
        let mut mentions: Vec<EntityMention> = Vec::new();
        for sentence in &doc.sentences {
            match self.mode {
                Mode::Monolithic => {
                    mentions.extend(train::decode_sentence(
                        &self.models[0],
                        &layouts[0],
                        &masks[0],
                        sentence,
                    )?);
                }
                Mode::Bag => {
                    let mut per_type = Vec::with_capacity(self.models.len());
                    for (i, model) in self.models.iter().enumerate() {
                        let decoded =
                            train::decode_sentence(model, &layouts[i], &masks[i], sentence)?;
                        per_type.push((model.entity_type.unwrap(), decoded));
                    }
                    mentions.extend(merge_bag_predictions(&per_type, &self.priority));
                }
            }
        }
        doc.set_annotations(NEURAL_SOURCE, mentions);
        Ok(())
    }

    /// Predict mentions for every document of a corpus.
    pub fn annotate_corpus(&self, corpus: &mut Corpus) -> Result<()> {
        for doc in &mut corpus.documents {
            self.annotate_document(doc)?;
        }
        Ok(())
    }

    /// Consistency of the bundle parts (types, modes, label alphabets).
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Monolithic => {
                if self.models.len() != 1 || self.models[0].entity_type.is_some() {
                    return Err(Error::Resource(
                        "monolithic bundle must hold exactly one untyped model".to_string(),
                    ));
                }
            }
            Mode::Bag => {
                if self.models.is_empty() {
                    return Err(Error::Resource("bag bundle has no models".to_string()));
                }
                for model in &self.models {
                    let Some(t) = model.entity_type else {
                        return Err(Error::Resource(
                            "bag bundle contains an untyped model".to_string(),
                        ));
                    };
                    if model.vocab.labels != label_alphabet(&[t]) {
                        return Err(Error::Resource(format!(
                            "model for {t} has a mismatched label alphabet"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Write the bundle as a directory: a `bundle.json` manifest plus one
    /// model file per part (`model.<type>.json`, or `model.joint.json`).
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = BundleManifest {
            format_version: 1,
            mode: self.mode,
            types: self
                .models
                .iter()
                .filter_map(|m| m.entity_type)
                .collect(),
        };
        let path = dir.join("bundle.json");
        std::fs::write(
            &path,
            serde_json::to_string_pretty(&manifest).expect("manifest serialization"),
        )
        .map_err(|e| Error::io(&path, e))?;
        for model in &self.models {
            let name = match model.entity_type {
                Some(t) => format!("model.{t}.json"),
                None => "model.joint.json".to_string(),
            };
            let path = dir.join(name);
            std::fs::write(&path, model.to_json(self.mode.as_str()))
                .map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Load a bundle directory, verifying that every part is present and
    /// consistent with the manifest.
    pub fn load(dir: &Path) -> Result<NeuralTaggerBundle> {
        let manifest_path = dir.join("bundle.json");
        let manifest_text =
            std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: BundleManifest = serde_json::from_str(&manifest_text)
            .map_err(|e| Error::Model(format!("bad bundle manifest: {e}")))?;
        if manifest.format_version != 1 {
            return Err(Error::Model(format!(
                "unsupported bundle format version {}",
                manifest.format_version
            )));
        }
        let mut models = Vec::new();
        match manifest.mode {
            Mode::Monolithic => {
                let path = dir.join("model.joint.json");
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::Model(format!("bundle part {} unreadable: {e}", path.display()))
                })?;
                let (model, mode) = TaggerModel::from_json(&text)?;
                if mode != "monolithic" || model.entity_type.is_some() {
                    return Err(Error::Resource(format!(
                        "{}: expected a monolithic model",
                        path.display()
                    )));
                }
                models.push(model);
            }
            Mode::Bag => {
                for t in &manifest.types {
                    let path = dir.join(format!("model.{t}.json"));
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        Error::Model(format!("bundle part {} unreadable: {e}", path.display()))
                    })?;
                    let (model, mode) = TaggerModel::from_json(&text)?;
                    if mode != "bag" || model.entity_type != Some(*t) {
                        return Err(Error::Resource(format!(
                            "{}: expected a bag model for {t}",
                            path.display()
                        )));
                    }
                    models.push(model);
                }
            }
        }
        let bundle = NeuralTaggerBundle {
            mode: manifest.mode,
            models,
            priority: EntityType::ALL.to_vec(),
        };
        bundle.validate()?;
        Ok(bundle)
    }
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    format_version: u32,
    mode: Mode,
    types: Vec<EntityType>,
}
