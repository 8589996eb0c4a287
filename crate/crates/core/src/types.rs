//! Document and annotation data model shared by all tagging systems.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::PosTag;

/// Closed inventory of entity types. The declaration order is fixed: it is
/// the order used for report rows, tie-breaking and bag-of-models priorities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    IschaemicStroke,
    HaemorrhagicStroke,
    Stroke,
    GliomaTumour,
    MeningiomaTumour,
    MetastasisTumour,
    Tumour,
    SubduralHaematoma,
    SmallVesselDisease,
    Atrophy,
    Microhaemorrhage,
    SubarachnoidHaemorrhage,
    HaemorrhagicTransformation,
    LocCortical,
    LocDeep,
    TimeOld,
    TimeRecent,
}

impl EntityType {
    pub const ALL: [EntityType; 17] = [
        EntityType::IschaemicStroke,
        EntityType::HaemorrhagicStroke,
        EntityType::Stroke,
        EntityType::GliomaTumour,
        EntityType::MeningiomaTumour,
        EntityType::MetastasisTumour,
        EntityType::Tumour,
        EntityType::SubduralHaematoma,
        EntityType::SmallVesselDisease,
        EntityType::Atrophy,
        EntityType::Microhaemorrhage,
        EntityType::SubarachnoidHaemorrhage,
        EntityType::HaemorrhagicTransformation,
        EntityType::LocCortical,
        EntityType::LocDeep,
        EntityType::TimeOld,
        EntityType::TimeRecent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EntityType::IschaemicStroke => "ischaemic_stroke",
            EntityType::HaemorrhagicStroke => "haemorrhagic_stroke",
            EntityType::Stroke => "stroke",
            EntityType::GliomaTumour => "glioma_tumour",
            EntityType::MeningiomaTumour => "meningioma_tumour",
            EntityType::MetastasisTumour => "metastasis_tumour",
            EntityType::Tumour => "tumour",
            EntityType::SubduralHaematoma => "subdural_haematoma",
            EntityType::SmallVesselDisease => "small_vessel_disease",
            EntityType::Atrophy => "atrophy",
            EntityType::Microhaemorrhage => "microhaemorrhage",
            EntityType::SubarachnoidHaemorrhage => "subarachnoid_haemorrhage",
            EntityType::HaemorrhagicTransformation => "haemorrhagic_transformation",
            EntityType::LocCortical => "loc_cortical",
            EntityType::LocDeep => "loc_deep",
            EntityType::TimeOld => "time_old",
            EntityType::TimeRecent => "time_recent",
        }
    }

    /// Position in the fixed enumeration order.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&t| t == self).unwrap()
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntityType::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownEntityType(s.to_string()))
    }
}

/// A single token with byte offsets into the document text (half-open).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
    pub pos: Option<PosTag>,
}

impl Token {
    pub fn new(text: impl Into<String>, char_start: usize, char_end: usize) -> Self {
        Token {
            text: text.into(),
            char_start,
            char_end,
            pos: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    /// Ordinal within the document.
    pub index: usize,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Lowercased token texts, the normalization used by all phrase matching.
    pub fn lower_tokens(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.text.to_lowercase()).collect()
    }
}

/// A typed token-span annotation. Spans are half-open token index ranges
/// within one sentence. Field order makes the derived ordering
/// (sentence, start, end, type) the canonical sort for mention lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub sentence: usize,
    pub start_tok: usize,
    pub end_tok: usize,
    pub entity_type: EntityType,
}

impl EntityMention {
    pub fn new(entity_type: EntityType, sentence: usize, start_tok: usize, end_tok: usize) -> Self {
        EntityMention {
            sentence,
            start_tok,
            end_tok,
            entity_type,
        }
    }

    pub fn len(&self) -> usize {
        self.end_tok - self.start_tok
    }

    pub fn is_empty(&self) -> bool {
        self.start_tok >= self.end_tok
    }

    pub fn overlaps(&self, other: &EntityMention) -> bool {
        self.sentence == other.sentence
            && self.start_tok < other.end_tok
            && other.start_tok < self.end_tok
    }
}

/// A labeled contiguous byte range of the document text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

/// One report. Annotation sources are named strings so that multiple
/// annotators and systems can coexist on the same document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub sections: Vec<Section>,
    pub sentences: Vec<Sentence>,
    pub annotations: BTreeMap<String, Vec<EntityMention>>,
}

impl Document {
    pub fn new(id: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn mentions(&self, source: &str) -> &[EntityMention] {
        self.annotations.get(source).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Install an annotation layer, keeping mentions in canonical order.
    pub fn set_annotations(&mut self, source: impl Into<String>, mut mentions: Vec<EntityMention>) {
        mentions.sort();
        self.annotations.insert(source.into(), mentions);
    }

    pub fn validate(&self) -> Result<()> {
        for sentence in &self.sentences {
            let mut prev_end = None;
            for tok in &sentence.tokens {
                if tok.char_start >= tok.char_end {
                    return Err(Error::Invalid(format!(
                        "doc {}: token {:?} has empty span",
                        self.id, tok.text
                    )));
                }
                if tok.char_end > self.raw_text.len() {
                    return Err(Error::Invalid(format!(
                        "doc {}: token {:?} extends past document text",
                        self.id, tok.text
                    )));
                }
                if self.raw_text.get(tok.char_start..tok.char_end) != Some(tok.text.as_str()) {
                    return Err(Error::Invalid(format!(
                        "doc {}: token {:?} does not match text at {}..{}",
                        self.id, tok.text, tok.char_start, tok.char_end
                    )));
                }
                if let Some(end) = prev_end {
                    if tok.char_start < end {
                        return Err(Error::Invalid(format!(
                            "doc {}: tokens overlap at byte {}",
                            self.id, tok.char_start
                        )));
                    }
                }
                prev_end = Some(tok.char_end);
            }
        }
        for (source, mentions) in &self.annotations {
            for pair in mentions.windows(2) {
                if pair[0].overlaps(&pair[1]) {
                    return Err(Error::Invalid(format!(
                        "doc {}: source {:?} has overlapping mentions {:?} and {:?}",
                        self.id, source, pair[0], pair[1]
                    )));
                }
            }
            for m in mentions {
                let n = self
                    .sentences
                    .get(m.sentence)
                    .map(Sentence::len)
                    .ok_or_else(|| {
                        Error::Invalid(format!(
                            "doc {}: mention {:?} refers to missing sentence {}",
                            self.id, m, m.sentence
                        ))
                    })?;
                if m.start_tok >= m.end_tok || m.end_tok > n {
                    return Err(Error::Invalid(format!(
                        "doc {}: mention {:?} out of bounds (sentence length {})",
                        self.id, m, n
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(name: impl Into<String>) -> Self {
        Corpus {
            name: name.into(),
            documents: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for doc in &self.documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate document id {:?}", doc.id)));
            }
            doc.validate()?;
        }
        Ok(())
    }

    /// True if at least one document carries the annotation source.
    pub fn has_source(&self, source: &str) -> bool {
        self.documents.iter().any(|d| d.annotations.contains_key(source))
    }
}
