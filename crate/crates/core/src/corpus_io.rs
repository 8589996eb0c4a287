//! Corpus serialization: CoNLL and JSONL formats.
//!
//! CoNLL: one token per line (`token<TAB>pos<TAB>biotag`), a blank line ends a
//! sentence, and a `-DOCSTART- <doc_id>` line begins a document. The format
//! carries exactly one annotation layer, stored under the "gold" source; raw
//! text is reconstructed by joining tokens with spaces within a sentence and
//! newlines between sentences, under a single "preamble" section.
//!
//! JSONL: one document object per line with the full data model (offsets,
//! sections, every annotation source). Writing either format is
//! byte-deterministic for identical input.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bio::{bio_decode, bio_encode, BioLabel};
use crate::error::{Error, Result};
use crate::textproc::PosTag;
use crate::types::{Corpus, Document, EntityMention, Section, Sentence, Token};

/// Annotation source under which CoNLL labels are stored.
pub const GOLD_SOURCE: &str = "gold";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Conll,
    Jsonl,
}

impl CorpusFormat {
    /// Guess from a file extension; defaults to JSONL.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("conll") | Some("tsv") | Some("txt") => CorpusFormat::Conll,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conll" => Ok(CorpusFormat::Conll),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(Error::Invalid(format!("unknown corpus format {other:?}"))),
        }
    }
}

pub fn read_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    let corpus = match format {
        CorpusFormat::Conll => parse_conll(&text, &path.display().to_string(), name)?,
        CorpusFormat::Jsonl => parse_jsonl(&text, &path.display().to_string(), name)?,
    };
    corpus.validate()?;
    Ok(corpus)
}

pub fn write_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    let text = match format {
        CorpusFormat::Conll => render_conll(corpus, GOLD_SOURCE)?,
        CorpusFormat::Jsonl => render_jsonl(corpus)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// CoNLL

pub fn parse_conll(text: &str, origin: &str, name: String) -> Result<Corpus> {
    struct PendingDoc {
        id: String,
        sentences: Vec<(usize, Vec<(String, PosTag, BioLabel)>)>, // (first line, tokens)
    }

    let mut corpus = Corpus::new(name);
    let mut doc: Option<PendingDoc> = None;
    let mut sent: Vec<(String, PosTag, BioLabel)> = Vec::new();
    let mut sent_first_line = 0usize;

    let flush_sentence =
        |doc: &mut Option<PendingDoc>, sent: &mut Vec<(String, PosTag, BioLabel)>, first: usize| -> Result<()> {
            if sent.is_empty() {
                return Ok(());
            }
            let doc = doc.as_mut().ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: first,
                msg: "token line before any -DOCSTART-".to_string(),
            })?;
            doc.sentences.push((first, std::mem::take(sent)));
            Ok(())
        };

    let finish_doc = |corpus: &mut Corpus, pending: PendingDoc| -> Result<()> {
        let mut document = Document::new(pending.id);
        let mut text = String::new();
        let mut gold: Vec<EntityMention> = Vec::new();
        for (sent_idx, (first_line, rows)) in pending.sentences.into_iter().enumerate() {
            if sent_idx > 0 {
                text.push('\n');
            }
            let mut tokens = Vec::with_capacity(rows.len());
            let mut labels = Vec::with_capacity(rows.len());
            for (i, (word, pos, label)) in rows.into_iter().enumerate() {
                if i > 0 {
                    text.push(' ');
                }
                let start = text.len();
                text.push_str(&word);
                let mut tok = Token::new(word, start, text.len());
                tok.pos = Some(pos);
                tokens.push(tok);
                labels.push(label);
            }
            let mentions = bio_decode(&labels, sent_idx, false).map_err(|e| match e {
                Error::Decode { pos, msg } => Error::Parse {
                    path: origin.to_string(),
                    line: first_line + pos,
                    msg,
                },
                other => other,
            })?;
            gold.extend(mentions);
            document.sentences.push(Sentence {
                index: sent_idx,
                tokens,
            });
        }
        document.sections = vec![Section {
            label: "preamble".to_string(),
            start: 0,
            end: text.len(),
        }];
        document.raw_text = text;
        document.set_annotations(GOLD_SOURCE, gold);
        corpus.documents.push(document);
        Ok(())
    };

    for (lineno0, line) in text.lines().enumerate() {
        let lineno = lineno0 + 1;
        if let Some(rest) = line.strip_prefix("-DOCSTART-") {
            flush_sentence(&mut doc, &mut sent, sent_first_line)?;
            if let Some(pending) = doc.take() {
                finish_doc(&mut corpus, pending)?;
            }
            let id = rest.trim();
            if id.is_empty() {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: lineno,
                    msg: "-DOCSTART- without a document id".to_string(),
                });
            }
            doc = Some(PendingDoc {
                id: id.to_string(),
                sentences: Vec::new(),
            });
            continue;
        }
        if line.trim().is_empty() {
            flush_sentence(&mut doc, &mut sent, sent_first_line)?;
            continue;
        }
        let mut parts = line.split('\t');
        let (word, pos, tag) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(w), Some(p), Some(t), None) if !w.is_empty() => (w, p, t),
            _ => {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: lineno,
                    msg: "expected `token<TAB>pos<TAB>biotag`".to_string(),
                })
            }
        };
        let pos: PosTag = pos.parse().map_err(|_| Error::Parse {
            path: origin.to_string(),
            line: lineno,
            msg: format!("unknown POS tag {pos:?}"),
        })?;
        let label: BioLabel = tag.parse().map_err(|_| Error::Parse {
            path: origin.to_string(),
            line: lineno,
            msg: format!("unknown BIO label {tag:?}"),
        })?;
        if sent.is_empty() {
            sent_first_line = lineno;
        }
        sent.push((word.to_string(), pos, label));
    }
    flush_sentence(&mut doc, &mut sent, sent_first_line)?;
    if let Some(pending) = doc.take() {
        finish_doc(&mut corpus, pending)?;
    }
    Ok(corpus)
}

/// Render the given annotation source of a corpus as CoNLL text.
pub fn render_conll(corpus: &Corpus, source: &str) -> Result<String> {
    let mut out = String::new();
    for doc in &corpus.documents {
        writeln!(out, "-DOCSTART- {}", doc.id).unwrap();
        let mentions = doc.mentions(source);
        for sentence in &doc.sentences {
            let in_sentence: Vec<EntityMention> = mentions
                .iter()
                .filter(|m| m.sentence == sentence.index)
                .copied()
                .collect();
            let labels = bio_encode(sentence.len(), &in_sentence)?;
            for (tok, label) in sentence.tokens.iter().zip(&labels) {
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    tok.text,
                    tok.pos.unwrap_or(PosTag::Other),
                    label
                )
                .unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// JSONL

#[derive(Serialize, Deserialize)]
struct JsonDoc {
    id: String,
    text: String,
    sections: Vec<JsonSection>,
    sentences: Vec<JsonSentence>,
    annotations: std::collections::BTreeMap<String, Vec<JsonMention>>,
}

#[derive(Serialize, Deserialize)]
struct JsonSection {
    label: String,
    start: usize,
    end: usize,
}

#[derive(Serialize, Deserialize)]
struct JsonSentence {
    tokens: Vec<JsonToken>,
}

#[derive(Serialize, Deserialize)]
struct JsonToken {
    text: String,
    start: usize,
    end: usize,
    pos: Option<PosTag>,
}

#[derive(Serialize, Deserialize)]
struct JsonMention {
    #[serde(rename = "type")]
    entity_type: crate::types::EntityType,
    sent: usize,
    start_tok: usize,
    end_tok: usize,
}

pub fn parse_jsonl(text: &str, origin: &str, name: String) -> Result<Corpus> {
    let mut corpus = Corpus::new(name);
    for (lineno0, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonDoc = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: lineno0 + 1,
            msg: e.to_string(),
        })?;
        let mut doc = Document::new(parsed.id);
        doc.raw_text = parsed.text;
        doc.sections = parsed
            .sections
            .into_iter()
            .map(|s| Section {
                label: s.label,
                start: s.start,
                end: s.end,
            })
            .collect();
        doc.sentences = parsed
            .sentences
            .into_iter()
            .enumerate()
            .map(|(i, s)| Sentence {
                index: i,
                tokens: s
                    .tokens
                    .into_iter()
                    .map(|t| Token {
                        text: t.text,
                        char_start: t.start,
                        char_end: t.end,
                        pos: t.pos,
                    })
                    .collect(),
            })
            .collect();
        for (source, mentions) in parsed.annotations {
            let mentions = mentions
                .into_iter()
                .map(|m| EntityMention::new(m.entity_type, m.sent, m.start_tok, m.end_tok))
                .collect();
            doc.set_annotations(source, mentions);
        }
        corpus.documents.push(doc);
    }
    Ok(corpus)
}

pub fn render_jsonl(corpus: &Corpus) -> Result<String> {
    let mut out = String::new();
    for doc in &corpus.documents {
        let json = JsonDoc {
            id: doc.id.clone(),
            text: doc.raw_text.clone(),
            sections: doc
                .sections
                .iter()
                .map(|s| JsonSection {
                    label: s.label.clone(),
                    start: s.start,
                    end: s.end,
                })
                .collect(),
            sentences: doc
                .sentences
                .iter()
                .map(|s| JsonSentence {
                    tokens: s
                        .tokens
                        .iter()
                        .map(|t| JsonToken {
                            text: t.text.clone(),
                            start: t.char_start,
                            end: t.char_end,
                            pos: t.pos,
                        })
                        .collect(),
                })
                .collect(),
            annotations: doc
                .annotations
                .iter()
                .map(|(source, mentions)| {
                    (
                        source.clone(),
                        mentions
                            .iter()
                            .map(|m| JsonMention {
                                entity_type: m.entity_type,
                                sent: m.sentence,
                                start_tok: m.start_tok,
                                end_tok: m.end_tok,
                            })
                            .collect(),
                    )
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&json).expect("document serialization"));
        out.push('\n');
    }
    Ok(out)
}
