//! Corpus statistics and keyword-based report filtering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Corpus, EntityType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub corpus: String,
    pub source: String,
    pub reports: usize,
    pub sentences: usize,
    pub entities: usize,
    pub per_type: BTreeMap<EntityType, usize>,
}

impl StatsReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "corpus: {}  (source {:?})", self.corpus, self.source).unwrap();
        writeln!(out, "reports:   {}", self.reports).unwrap();
        writeln!(out, "sentences: {}", self.sentences).unwrap();
        writeln!(out, "entities:  {}", self.entities).unwrap();
        for t in EntityType::ALL {
            if let Some(n) = self.per_type.get(&t) {
                writeln!(out, "  {:<28} {}", t.name(), n).unwrap();
            }
        }
        out
    }
}

/// Count reports, sentences and entities under one annotation source.
/// An empty corpus yields all zeros; a non-empty corpus where no document
/// carries the source is an error (documents with the source but no mentions
/// count as zero).
pub fn corpus_stats(corpus: &Corpus, source: &str) -> Result<StatsReport> {
    if !corpus.documents.is_empty() && !corpus.has_source(source) {
        return Err(Error::MissingSource(source.to_string()));
    }
    let mut per_type = BTreeMap::new();
    let mut entities = 0;
    let mut sentences = 0;
    for doc in &corpus.documents {
        sentences += doc.sentences.len();
        for m in doc.mentions(source) {
            entities += 1;
            *per_type.entry(m.entity_type).or_insert(0) += 1;
        }
    }
    Ok(StatsReport {
        corpus: corpus.name.clone(),
        source: source.to_string(),
        reports: corpus.documents.len(),
        sentences,
        entities,
        per_type,
    })
}

/// A keyword pattern: case-insensitive token match, with a trailing `*`
/// meaning prefix match.
#[derive(Debug, Clone)]
pub struct KeywordPattern {
    text: String,
    prefix: bool,
}

impl KeywordPattern {
    pub fn parse(pattern: &str) -> Result<Self> {
        let pattern = pattern.trim();
        if pattern.is_empty() || pattern == "*" {
            return Err(Error::Invalid("empty keyword pattern".to_string()));
        }
        match pattern.strip_suffix('*') {
            Some(stem) => Ok(KeywordPattern {
                text: stem.to_lowercase(),
                prefix: true,
            }),
            None => Ok(KeywordPattern {
                text: pattern.to_lowercase(),
                prefix: false,
            }),
        }
    }

    pub fn matches(&self, token_lower: &str) -> bool {
        if self.prefix {
            token_lower.starts_with(&self.text)
        } else {
            token_lower == self.text
        }
    }
}

/// Keep exactly the documents containing at least one token matching one of
/// the patterns. The input corpus is untouched.
pub fn filter_corpus(corpus: &Corpus, keywords: &[String]) -> Result<Corpus> {
    if keywords.is_empty() {
        return Err(Error::Invalid("keyword list is empty".to_string()));
    }
    let patterns: Vec<KeywordPattern> = keywords
        .iter()
        .map(|k| KeywordPattern::parse(k))
        .collect::<Result<_>>()?;
    let documents = corpus
        .documents
        .iter()
        .filter(|doc| {
            doc.sentences.iter().flat_map(|s| &s.tokens).any(|tok| {
                let lower = tok.text.to_lowercase();
                patterns.iter().any(|p| p.matches(&lower))
            })
        })
        .cloned()
        .collect();
    Ok(Corpus {
        name: corpus.name.clone(),
        documents,
    })
}
