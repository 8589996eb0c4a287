//! BIO tag codec for token-level sequence labeling.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::types::{EntityMention, EntityType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioLabel {
    O,
    B(EntityType),
    I(EntityType),
}

impl BioLabel {
    pub fn entity_type(self) -> Option<EntityType> {
        match self {
            BioLabel::O => None,
            BioLabel::B(t) | BioLabel::I(t) => Some(t),
        }
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioLabel::O => f.write_str("O"),
            BioLabel::B(t) => write!(f, "B-{t}"),
            BioLabel::I(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for BioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(BioLabel::O);
        }
        if let Some(t) = s.strip_prefix("B-") {
            return Ok(BioLabel::B(t.parse()?));
        }
        if let Some(t) = s.strip_prefix("I-") {
            return Ok(BioLabel::I(t.parse()?));
        }
        Err(Error::UnknownLabel(s.to_string()))
    }
}

/// Encode non-overlapping mentions of one sentence as a BIO label per token.
/// Mention sentence indices are ignored; spans must lie within `len`.
pub fn bio_encode(len: usize, mentions: &[EntityMention]) -> Result<Vec<BioLabel>> {
    let mut labels = vec![BioLabel::O; len];
    let mut sorted: Vec<&EntityMention> = mentions.iter().collect();
    sorted.sort();
    let mut prev_end = 0;
    for (i, m) in sorted.iter().enumerate() {
        if m.start_tok >= m.end_tok || m.end_tok > len {
            return Err(Error::Invalid(format!(
                "mention {:?} out of bounds for sentence of length {len}",
                m
            )));
        }
        if i > 0 && m.start_tok < prev_end {
            return Err(Error::Overlap(format!(
                "mention at [{}, {}) overlaps previous ending at {}",
                m.start_tok, m.end_tok, prev_end
            )));
        }
        prev_end = m.end_tok;
        labels[m.start_tok] = BioLabel::B(m.entity_type);
        for slot in labels.iter_mut().take(m.end_tok).skip(m.start_tok + 1) {
            *slot = BioLabel::I(m.entity_type);
        }
    }
    Ok(labels)
}

/// Decode a BIO sequence back into mentions (sentence index `sentence`).
///
/// With `repair` an I- label with no preceding B-/I- of the same type is
/// treated as B-; without it the sequence is rejected. Gold data is loaded
/// without repair; system output, which may contain stray I- labels, is
/// decoded with repair.
pub fn bio_decode(labels: &[BioLabel], sentence: usize, repair: bool) -> Result<Vec<EntityMention>> {
    let mut mentions = Vec::new();
    let mut open: Option<(EntityType, usize)> = None;
    for (i, &label) in labels.iter().enumerate() {
        match label {
            BioLabel::O => {
                if let Some((t, start)) = open.take() {
                    mentions.push(EntityMention::new(t, sentence, start, i));
                }
            }
            BioLabel::B(t) => {
                if let Some((prev, start)) = open.take() {
                    mentions.push(EntityMention::new(prev, sentence, start, i));
                }
                open = Some((t, i));
            }
            BioLabel::I(t) => match open {
                Some((prev, _)) if prev == t => {}
                _ => {
                    if !repair {
                        return Err(Error::Decode {
                            pos: i,
                            msg: format!("I-{t} without preceding B-{t}"),
                        });
                    }
                    if let Some((prev, start)) = open.take() {
                        mentions.push(EntityMention::new(prev, sentence, start, i));
                    }
                    open = Some((t, i));
                }
            },
        }
    }
    if let Some((t, start)) = open {
        mentions.push(EntityMention::new(t, sentence, start, labels.len()));
    }
    Ok(mentions)
}
