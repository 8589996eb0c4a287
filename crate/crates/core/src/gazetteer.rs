//! Concept-gazetteer NER: dictionary matching of concept mentions, a
//! concept-to-entity-type map, and a trainable disambiguator for concepts
//! that map to more than one type.
//!
//! Disambiguation is multinomial logistic regression over a bag of lowercased
//! context words in a ±5 token window around the match, one classifier per
//! ambiguous concept, trained by full-batch gradient descent at 64-bit
//! precision. Training is deterministic: weights start at zero and the
//! objective is convex.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phrases::PhraseMatcher;
use crate::types::{Corpus, Document, EntityMention, EntityType, Sentence};

/// Annotation source written by this system.
pub const GAZETTEER_SOURCE: &str = "gazetteer";

/// Default context window, in tokens on each side of a match.
pub const CONTEXT_WINDOW: usize = 5;

/// Surface phrases mapped to sets of concept ids.
#[derive(Debug, Clone, Default)]
pub struct ConceptDictionary {
    matcher: PhraseMatcher<BTreeSet<String>>,
}

impl ConceptDictionary {
    pub fn len(&self) -> usize {
        self.matcher.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matcher.is_empty()
    }
}

/// Concept id → entity types, in fallback priority order. A concept with two
/// or more types is ambiguous.
#[derive(Debug, Clone, Default)]
pub struct ConceptMap {
    map: BTreeMap<String, Vec<EntityType>>,
}

impl ConceptMap {
    pub fn types(&self, concept: &str) -> Result<&[EntityType]> {
        self.map
            .get(concept)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Resource(format!("concept {concept:?} missing from map")))
    }

    pub fn is_ambiguous(&self, concept: &str) -> bool {
        self.map.get(concept).is_some_and(|t| t.len() >= 2)
    }

    pub fn ambiguous_concepts(&self) -> impl Iterator<Item = &str> {
        self.map
            .iter()
            .filter(|(_, t)| t.len() >= 2)
            .map(|(c, _)| c.as_str())
    }
}

/// Load the dictionary (`phrase<TAB>concept_id[,concept_id...]`) and the map
/// (`concept_id<TAB>entity_type[,entity_type...]`). Every concept id used in
/// the dictionary must appear in the map.
pub fn load_concept_resources(
    dict_path: &Path,
    map_path: &Path,
) -> Result<(ConceptDictionary, ConceptMap)> {
    let dict_text = std::fs::read_to_string(dict_path).map_err(|e| Error::io(dict_path, e))?;
    let map_text = std::fs::read_to_string(map_path).map_err(|e| Error::io(map_path, e))?;
    parse_concept_resources(
        &dict_text,
        &dict_path.display().to_string(),
        &map_text,
        &map_path.display().to_string(),
    )
}

pub fn parse_concept_resources(
    dict_text: &str,
    dict_origin: &str,
    map_text: &str,
    map_origin: &str,
) -> Result<(ConceptDictionary, ConceptMap)> {
    let mut map = BTreeMap::new();
    for (lineno0, line) in map_text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (concept, types) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: map_origin.to_string(),
            line: lineno0 + 1,
            msg: "expected `concept_id<TAB>entity_type[,entity_type...]`".to_string(),
        })?;
        let types: Vec<EntityType> = types
            .split(',')
            .map(|t| {
                t.trim().parse().map_err(|_| Error::Parse {
                    path: map_origin.to_string(),
                    line: lineno0 + 1,
                    msg: format!("unknown entity type {:?}", t.trim()),
                })
            })
            .collect::<Result<_>>()?;
        if types.is_empty() {
            return Err(Error::Parse {
                path: map_origin.to_string(),
                line: lineno0 + 1,
                msg: "concept maps to no types".to_string(),
            });
        }
        map.insert(concept.trim().to_string(), types);
    }
    let map = ConceptMap { map };

    let mut matcher: PhraseMatcher<BTreeSet<String>> = PhraseMatcher::new();
    for (lineno0, line) in dict_text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (phrase, ids) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: dict_origin.to_string(),
            line: lineno0 + 1,
            msg: "expected `phrase<TAB>concept_id[,concept_id...]`".to_string(),
        })?;
        let tokens: Vec<String> = phrase.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(Error::Parse {
                path: dict_origin.to_string(),
                line: lineno0 + 1,
                msg: "empty phrase".to_string(),
            });
        }
        let mut id_set = BTreeSet::new();
        for id in ids.split(',') {
            let id = id.trim();
            if id.is_empty() {
                return Err(Error::Parse {
                    path: dict_origin.to_string(),
                    line: lineno0 + 1,
                    msg: "empty concept id".to_string(),
                });
            }
            if !map.map.contains_key(id) {
                return Err(Error::Resource(format!(
                    "{dict_origin}:{}: concept {id:?} not present in the concept map",
                    lineno0 + 1
                )));
            }
            id_set.insert(id.to_string());
        }
        let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        match matcher.get_mut(&lower) {
            Some(existing) => existing.extend(id_set),
            None => {
                matcher.insert(&tokens, id_set);
            }
        }
    }
    Ok((ConceptDictionary { matcher }, map))
}

/// A dictionary hit: token span plus the concept ids on that span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptMatch {
    pub start_tok: usize,
    pub end_tok: usize,
    pub concepts: BTreeSet<String>,
}

/// Case-insensitive, left-to-right longest match (the same policy as the
/// rule-based lexicon).
pub fn match_concepts(sentence: &Sentence, dict: &ConceptDictionary) -> Vec<ConceptMatch> {
    let lower = sentence.lower_tokens();
    dict.matcher
        .find(&lower)
        .into_iter()
        .map(|(start, end, ids)| ConceptMatch {
            start_tok: start,
            end_tok: end,
            concepts: ids.clone(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Disambiguation

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConceptClassifier {
    pub classes: Vec<EntityType>,
    /// Frozen feature vocabulary (lowercased context words), in
    /// first-occurrence order; the implicit last column is the bias.
    pub features: Vec<String>,
    /// Row-major `classes.len() × (features.len() + 1)` weights.
    pub weights: Vec<f64>,
}

impl ConceptClassifier {
    fn feature_index(&self) -> HashMap<&str, usize> {
        self.features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect()
    }

    /// Class probabilities for a bag of context words.
    pub fn predict(&self, context: &[String]) -> Vec<f64> {
        let index = self.feature_index();
        let x = featurize(context, &index, self.features.len());
        softmax(&scores(&self.weights, &x, self.classes.len()))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DisambiguationModel {
    pub window: usize,
    pub per_concept: BTreeMap<String, ConceptClassifier>,
    /// Ambiguous concepts with no training instances; they fall back to the
    /// first type in map order at inference.
    pub untrained: BTreeSet<String>,
}

impl DisambiguationModel {
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            format_version: u32,
            window: usize,
            per_concept: &'a BTreeMap<String, ConceptClassifier>,
            untrained: &'a BTreeSet<String>,
        }
        serde_json::to_string_pretty(&File {
            format_version: 1,
            window: self.window,
            per_concept: &self.per_concept,
            untrained: &self.untrained,
        })
        .expect("model serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            format_version: u32,
            window: usize,
            per_concept: BTreeMap<String, ConceptClassifier>,
            untrained: BTreeSet<String>,
        }
        let file: File =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("bad model JSON: {e}")))?;
        if file.format_version != 1 {
            return Err(Error::Model(format!(
                "unsupported disambiguator format version {}",
                file.format_version
            )));
        }
        for (concept, clf) in &file.per_concept {
            if clf.weights.len() != clf.classes.len() * (clf.features.len() + 1) {
                return Err(Error::Model(format!(
                    "concept {concept:?}: weight array has wrong length"
                )));
            }
            if !clf.weights.iter().all(|w| w.is_finite()) {
                return Err(Error::Model(format!("concept {concept:?}: non-finite weights")));
            }
        }
        Ok(DisambiguationModel {
            window: file.window,
            per_concept: file.per_concept,
            untrained: file.untrained,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisambigConfig {
    pub window: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for DisambigConfig {
    fn default() -> Self {
        DisambigConfig {
            window: CONTEXT_WINDOW,
            learning_rate: 0.25,
            epochs: 300,
        }
    }
}

impl DisambigConfig {
    pub fn from_json(text: &str) -> Result<DisambigConfig> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("bad disambiguator config: {e}")))
    }
}

/// Bag-of-words context around a span: up to `window` tokens on each side,
/// lowercased; the matched tokens themselves are excluded.
pub fn context_bag(
    sentence: &Sentence,
    start_tok: usize,
    end_tok: usize,
    window: usize,
) -> Vec<String> {
    let lo = start_tok.saturating_sub(window);
    let hi = (end_tok + window).min(sentence.len());
    let mut bag = Vec::new();
    for (i, tok) in sentence.tokens.iter().enumerate().take(hi).skip(lo) {
        if i < start_tok || i >= end_tok {
            bag.push(tok.text.to_lowercase());
        }
    }
    bag
}

fn featurize(context: &[String], index: &HashMap<&str, usize>, n_features: usize) -> Vec<f64> {
    let mut x = vec![0.0; n_features + 1];
    for word in context {
        if let Some(&i) = index.get(word.as_str()) {
            x[i] += 1.0;
        }
    }
    x[n_features] = 1.0; // bias
    x
}

fn scores(weights: &[f64], x: &[f64], n_classes: usize) -> Vec<f64> {
    let dim = x.len();
    (0..n_classes)
        .map(|k| {
            weights[k * dim..(k + 1) * dim]
                .iter()
                .zip(x)
                .map(|(w, xi)| w * xi)
                .sum()
        })
        .collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Mean cross-entropy loss and gradient for one concept's classifier.
pub(crate) fn softmax_ce_loss_grad(
    weights: &[f64],
    instances: &[(Vec<f64>, usize)],
    n_classes: usize,
) -> (f64, Vec<f64>) {
    let n = instances.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for (x, gold) in instances {
        let p = softmax(&scores(weights, x, n_classes));
        loss -= p[*gold].max(f64::MIN_POSITIVE).ln();
        let dim = x.len();
        for k in 0..n_classes {
            let delta = p[k] - if k == *gold { 1.0 } else { 0.0 };
            for (j, xi) in x.iter().enumerate() {
                grad[k * dim + j] += delta * xi / n;
            }
        }
    }
    (loss / n, grad)
}

/// Per-epoch mean losses observed while fitting each concept.
#[derive(Debug, Clone, Default)]
pub struct DisambigTrainReport {
    pub losses_per_concept: BTreeMap<String, Vec<f64>>,
}

/// Train one classifier per ambiguous concept from gold-annotated data.
///
/// Training instances for a concept are dictionary matches whose span
/// coincides exactly with a gold mention of one of the concept's candidate
/// types. Ambiguous concepts with no instances are flagged untrained and
/// fall back to map order at inference.
pub fn train_disambiguator(
    corpus: &Corpus,
    dict: &ConceptDictionary,
    map: &ConceptMap,
    config: &DisambigConfig,
    gold_source: &str,
) -> Result<(DisambiguationModel, DisambigTrainReport)> {
    // (context bag, gold class) per ambiguous concept.
    let mut instances: BTreeMap<String, Vec<(Vec<String>, usize)>> = BTreeMap::new();
    for concept in map.ambiguous_concepts() {
        instances.insert(concept.to_string(), Vec::new());
    }
    for doc in &corpus.documents {
        let gold = doc.mentions(gold_source);
        for sentence in &doc.sentences {
            for hit in match_concepts(sentence, dict) {
                let gold_mention = gold.iter().find(|m| {
                    m.sentence == sentence.index
                        && m.start_tok == hit.start_tok
                        && m.end_tok == hit.end_tok
                });
                let Some(gold_mention) = gold_mention else { continue };
                for concept in &hit.concepts {
                    let Some(types) = map.map.get(concept) else { continue };
                    if types.len() < 2 {
                        continue;
                    }
                    let Some(class) = types.iter().position(|t| *t == gold_mention.entity_type)
                    else {
                        continue;
                    };
                    let bag = context_bag(sentence, hit.start_tok, hit.end_tok, config.window);
                    instances.get_mut(concept).unwrap().push((bag, class));
                }
            }
        }
    }

    let mut model = DisambiguationModel {
        window: config.window,
        ..Default::default()
    };
    let mut report = DisambigTrainReport::default();
    for (concept, data) in instances {
        if data.is_empty() {
            model.untrained.insert(concept);
            continue;
        }
        let classes = map.map[&concept].clone();
        // Freeze the feature vocabulary in first-occurrence order.
        let mut features: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for (bag, _) in &data {
            for word in bag {
                if !index.contains_key(word) {
                    index.insert(word.clone(), features.len());
                    features.push(word.clone());
                }
            }
        }
        let borrowed: HashMap<&str, usize> = index.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let encoded: Vec<(Vec<f64>, usize)> = data
            .iter()
            .map(|(bag, class)| (featurize(bag, &borrowed, features.len()), *class))
            .collect();
        let mut weights = vec![0.0; classes.len() * (features.len() + 1)];
        let mut losses = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            let (loss, grad) = softmax_ce_loss_grad(&weights, &encoded, classes.len());
            losses.push(loss);
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= config.learning_rate * g;
            }
        }
        report.losses_per_concept.insert(concept.clone(), losses);
        model.per_concept.insert(
            concept,
            ConceptClassifier {
                classes,
                features,
                weights,
            },
        );
    }
    Ok((model, report))
}

/// Resolve one concept id on a matched span to an entity type, plus the
/// classifier confidence when a trained model applied.
pub fn disambiguate(
    concept: &str,
    context: &[String],
    map: &ConceptMap,
    model: Option<&DisambiguationModel>,
) -> Result<(EntityType, Option<f64>)> {
    let types = map.types(concept)?;
    if types.len() == 1 {
        return Ok((types[0], None));
    }
    if let Some(clf) = model.and_then(|m| m.per_concept.get(concept)) {
        let probs = clf.predict(context);
        // Argmax with ties resolved by map order.
        let mut best = 0;
        for (k, p) in probs.iter().enumerate().skip(1) {
            if *p > probs[best] {
                best = k;
            }
        }
        return Ok((clf.classes[best], Some(probs[best])));
    }
    Ok((types[0], None))
}

/// Annotate a document: dictionary matches become mentions, each typed by
/// disambiguating its concept ids. Spans carrying several ids take the
/// highest-scoring resolution; with no trained classifier involved, the first
/// id in sorted order wins. Mentions land under the "gazetteer" source.
pub fn annotate_document(
    doc: &mut Document,
    dict: &ConceptDictionary,
    map: &ConceptMap,
    model: Option<&DisambiguationModel>,
) -> Result<()> {
    let window = model.map_or(CONTEXT_WINDOW, |m| m.window);
    let mut mentions = Vec::new();
    for sentence in &doc.sentences {
        for hit in match_concepts(sentence, dict) {
            let context = context_bag(sentence, hit.start_tok, hit.end_tok, window);
            let mut resolved: Option<(EntityType, Option<f64>)> = None;
            for concept in &hit.concepts {
                let (t, score) = disambiguate(concept, &context, map, model)?;
                let better = match (&resolved, score) {
                    (None, _) => true,
                    (Some((_, None)), Some(_)) => true,
                    (Some((_, Some(best))), Some(s)) => s > *best,
                    _ => false,
                };
                if better {
                    resolved = Some((t, score));
                }
            }
            if let Some((t, _)) = resolved {
                mentions.push(EntityMention::new(t, sentence.index, hit.start_tok, hit.end_tok));
            }
        }
    }
    doc.set_annotations(GAZETTEER_SOURCE, mentions);
    Ok(())
}
