//! Deterministic synthetic report generator with gold annotations by
//! construction.
//!
//! Sentences come from templates whose `{group}` slots are filled from typed
//! filler pools; each filled slot is recorded as a gold mention. Generation
//! keeps sampling templates until the per-type mention targets are met
//! exactly, then distributes the sentences over the requested number of
//! reports, padding each report with entity-free distractor sentences.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus_io::GOLD_SOURCE;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::textproc::{self, TagLexicon};
use crate::types::{Corpus, Document, EntityMention, EntityType, Section, Sentence, Token};

fn default_weight() -> u32 {
    1
}

/// A typed filler pool referenced by template slots.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotGroup {
    pub entity_type: EntityType,
    pub fillers: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    /// Space-separated tokens; `{group}` markers name slot groups.
    pub text: String,
    /// Relative selection weight among the candidates for a type.
    #[serde(default = "default_weight")]
    pub weight: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub reports: usize,
    #[serde(default)]
    pub name: Option<String>,
    /// Exact per-type mention counts to generate.
    pub targets: BTreeMap<EntityType, usize>,
    pub groups: BTreeMap<String, SlotGroup>,
    pub templates: Vec<Template>,
    #[serde(default)]
    pub distractors: Vec<String>,
    #[serde(default)]
    pub distractors_per_report: usize,
}

impl GenConfig {
    pub fn from_json(text: &str) -> Result<GenConfig> {
        let config: GenConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("bad generator config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<GenConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reports == 0 {
            return Err(Error::Config("reports must be positive".to_string()));
        }
        if self.distractors_per_report > 0 && self.distractors.is_empty() {
            return Err(Error::Config(
                "distractors_per_report set but the distractor pool is empty".to_string(),
            ));
        }
        for (name, group) in &self.groups {
            if group.fillers.is_empty() {
                return Err(Error::Config(format!("group {name:?} has no fillers")));
            }
        }
        let compiled = self.compile()?;
        for (&t, &count) in &self.targets {
            if count == 0 {
                continue;
            }
            let reachable = compiled.iter().any(|c| c.slot_types.contains(&t));
            if !reachable {
                return Err(Error::Config(format!(
                    "target for {t} is unreachable: no template has a slot of that type"
                )));
            }
        }
        Ok(())
    }

    fn compile(&self) -> Result<Vec<CompiledTemplate>> {
        self.templates
            .iter()
            .enumerate()
            .map(|(i, t)| CompiledTemplate::parse(i, t, &self.groups))
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Part {
    Word(String),
    Slot(String),
}

#[derive(Debug, Clone)]
struct CompiledTemplate {
    weight: u32,
    parts: Vec<Part>,
    slot_types: Vec<EntityType>,
}

impl CompiledTemplate {
    fn parse(
        index: usize,
        template: &Template,
        groups: &BTreeMap<String, SlotGroup>,
    ) -> Result<CompiledTemplate> {
        let mut parts = Vec::new();
        let mut slot_types = Vec::new();
        for token in template.text.split_whitespace() {
            if let Some(name) = token.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
                let group = groups.get(name).ok_or_else(|| {
                    Error::Config(format!("template references unknown group {name:?}"))
                })?;
                slot_types.push(group.entity_type);
                parts.push(Part::Slot(name.to_string()));
            } else {
                parts.push(Part::Word(token.to_string()));
            }
        }
        if parts.is_empty() {
            return Err(Error::Config(format!("template {index} is empty")));
        }
        Ok(CompiledTemplate {
            weight: template.weight,
            parts,
            slot_types,
        })
    }

    /// A template fits when it has at least one slot of the wanted type and
    /// its whole slot multiset stays within the remaining targets.
    fn fits(&self, wanted: EntityType, remaining: &BTreeMap<EntityType, usize>) -> bool {
        if !self.slot_types.contains(&wanted) {
            return false;
        }
        let mut need: BTreeMap<EntityType, usize> = BTreeMap::new();
        for &t in &self.slot_types {
            *need.entry(t).or_insert(0) += 1;
        }
        need.iter()
            .all(|(t, n)| remaining.get(t).copied().unwrap_or(0) >= *n)
    }
}

struct GenSentence {
    tokens: Vec<String>,
    mentions: Vec<(EntityType, usize, usize)>,
}

/// Generate a corpus meeting the per-type targets exactly; gold mentions are
/// recorded during slot filling under the "gold" source. Deterministic for a
/// given config.
pub fn generate_corpus(config: &GenConfig) -> Result<Corpus> {
    generate_corpus_with(config, &crate::stock::tag_lexicon())
}

pub fn generate_corpus_with(config: &GenConfig, tags: &TagLexicon) -> Result<Corpus> {
    config.validate()?;
    let templates = config.compile()?;
    let mut rng = Rng::new(config.seed);
    let mut remaining: BTreeMap<EntityType, usize> = config
        .targets
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(&t, &n)| (t, n))
        .collect();

    let mut sentences: Vec<GenSentence> = Vec::new();
    while let Some(wanted) = EntityType::ALL
        .iter()
        .copied()
        .find(|t| remaining.get(t).copied().unwrap_or(0) > 0)
    {
        let candidates: Vec<&CompiledTemplate> = templates
            .iter()
            .filter(|c| c.fits(wanted, &remaining))
            .collect();
        if candidates.is_empty() {
            return Err(Error::Config(format!(
                "target for {wanted} is unreachable with the remaining budget"
            )));
        }
        let weights: Vec<u32> = candidates.iter().map(|c| c.weight.max(1)).collect();
        let template = candidates[rng.weighted(&weights)];
        let mut tokens = Vec::new();
        let mut mentions = Vec::new();
        for part in &template.parts {
            match part {
                Part::Word(w) => tokens.push(w.clone()),
                Part::Slot(name) => {
                    let group = &config.groups[name];
                    let filler = &group.fillers[rng.below(group.fillers.len())];
                    let start = tokens.len();
                    tokens.extend(filler.split_whitespace().map(str::to_string));
                    mentions.push((group.entity_type, start, tokens.len()));
                    *remaining.get_mut(&group.entity_type).unwrap() -= 1;
                }
            }
        }
        sentences.push(GenSentence { tokens, mentions });
    }

    // Spread entity sentences over reports, then pad with distractors.
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    rng.shuffle(&mut order);
    let mut per_report: Vec<Vec<Option<usize>>> = vec![Vec::new(); config.reports];
    for (i, &sent_idx) in order.iter().enumerate() {
        per_report[i % config.reports].push(Some(sent_idx));
    }
    for report in per_report.iter_mut() {
        for _ in 0..config.distractors_per_report {
            report.push(None);
        }
        rng.shuffle(report);
    }

    let mut corpus = Corpus::new(config.name.clone().unwrap_or_else(|| "synthetic".to_string()));
    let width = config.reports.to_string().len().max(4);
    for (doc_idx, slots) in per_report.iter().enumerate() {
        let mut doc = Document::new(format!("syn-{:0width$}", doc_idx + 1));
        let mut text = String::from("Report:\n");
        let body_start = text.len();
        let mut gold = Vec::new();
        for (sent_idx, slot) in slots.iter().enumerate() {
            let (tokens, mentions): (Vec<String>, Vec<(EntityType, usize, usize)>) = match slot {
                Some(i) => (sentences[*i].tokens.clone(), sentences[*i].mentions.clone()),
                None => {
                    let d = &config.distractors[rng.below(config.distractors.len())];
                    (d.split_whitespace().map(str::to_string).collect(), Vec::new())
                }
            };
            let mut sentence = Sentence {
                index: sent_idx,
                tokens: Vec::with_capacity(tokens.len()),
            };
            for (i, word) in tokens.iter().enumerate() {
                if i > 0 {
                    text.push(' ');
                }
                let start = text.len();
                text.push_str(word);
                sentence.tokens.push(Token::new(word.clone(), start, text.len()));
            }
            text.push('\n');
            textproc::pos_tag(&mut sentence, tags);
            for &(t, start, end) in &mentions {
                gold.push(EntityMention::new(t, sent_idx, start, end));
            }
            doc.sentences.push(sentence);
        }
        doc.sections = vec![Section {
            label: "Report".to_string(),
            start: body_start,
            end: text.len(),
        }];
        doc.raw_text = text;
        doc.set_annotations(GOLD_SOURCE, gold);
        corpus.documents.push(doc);
    }
    corpus.validate()?;
    Ok(corpus)
}

/// Document-level split into (dev, test): a seeded shuffle, then the first
/// round(n·fraction) documents (clamped so both halves are non-empty).
pub fn split_corpus(corpus: &Corpus, dev_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(Error::Config(format!(
            "dev fraction must be strictly between 0 and 1, got {dev_fraction}"
        )));
    }
    let n = corpus.documents.len();
    if n < 2 {
        return Err(Error::Invalid(format!("cannot split a corpus of {n} documents")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let dev_n = ((n as f64 * dev_fraction).round() as usize).clamp(1, n - 1);
    let pick = |indices: &[usize]| {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted
            .iter()
            .map(|&i| corpus.documents[i].clone())
            .collect::<Vec<_>>()
    };
    let dev = Corpus {
        name: format!("{}-dev", corpus.name),
        documents: pick(&order[..dev_n]),
    };
    let test = Corpus {
        name: format!("{}-test", corpus.name),
        documents: pick(&order[dev_n..]),
    };
    Ok((dev, test))
}
