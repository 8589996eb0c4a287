//! Deterministic text preprocessing: sectioning, tokenization, sentence
//! splitting and coarse POS tagging.
//!
//! The stages are pure functions over the input bytes. Tokenization is
//! lossless: token offsets index the original text, so concatenating token
//! texts with their original gaps reconstructs the input exactly.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Section, Sentence, Token};

/// Coarse ten-tag POS tagset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    N,
    V,
    Adj,
    Adv,
    Prep,
    Det,
    Conj,
    Num,
    Punc,
    Other,
}

impl PosTag {
    pub fn name(self) -> &'static str {
        match self {
            PosTag::N => "N",
            PosTag::V => "V",
            PosTag::Adj => "ADJ",
            PosTag::Adv => "ADV",
            PosTag::Prep => "PREP",
            PosTag::Det => "DET",
            PosTag::Conj => "CONJ",
            PosTag::Num => "NUM",
            PosTag::Punc => "PUNC",
            PosTag::Other => "OTHER",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PosTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" => Ok(PosTag::N),
            "V" => Ok(PosTag::V),
            "ADJ" => Ok(PosTag::Adj),
            "ADV" => Ok(PosTag::Adv),
            "PREP" => Ok(PosTag::Prep),
            "DET" => Ok(PosTag::Det),
            "CONJ" => Ok(PosTag::Conj),
            "NUM" => Ok(PosTag::Num),
            "PUNC" => Ok(PosTag::Punc),
            "OTHER" => Ok(PosTag::Other),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// Strings treated as non-sentence-final, e.g. "e.g." or "dr.". Entries are
/// stored lowercased and must end with a period.
#[derive(Debug, Clone, Default)]
pub struct AbbreviationList {
    entries: BTreeSet<String>,
}

impl AbbreviationList {
    pub fn from_entries<I: IntoIterator<Item = S>, S: Into<String>>(entries: I) -> Result<Self> {
        let mut set = BTreeSet::new();
        for e in entries {
            let e = e.into().to_lowercase();
            if !e.ends_with('.') {
                return Err(Error::Invalid(format!(
                    "abbreviation {:?} does not end with '.'",
                    e
                )));
            }
            set.insert(e);
        }
        Ok(AbbreviationList { entries: set })
    }

    /// One entry per line; blank lines and `#` comments are skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !line.ends_with('.') {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: lineno + 1,
                    msg: format!("abbreviation {:?} does not end with '.'", line),
                });
            }
            set.insert(line.to_lowercase());
        }
        Ok(AbbreviationList { entries: set })
    }

    pub fn contains(&self, word_with_period: &str) -> bool {
        self.entries.contains(word_with_period)
    }
}

/// Word-to-tag lookup used before the suffix heuristics.
#[derive(Debug, Clone, Default)]
pub struct TagLexicon {
    map: HashMap<String, PosTag>,
}

impl TagLexicon {
    /// `word<TAB>tag` per line; blank lines and `#` comments are skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (word, tag) = match (parts.next(), parts.next(), parts.next()) {
                (Some(w), Some(t), None) if !w.is_empty() => (w, t),
                _ => {
                    return Err(Error::Parse {
                        path: origin.to_string(),
                        line: lineno + 1,
                        msg: "expected `word<TAB>tag`".to_string(),
                    })
                }
            };
            let tag: PosTag = tag.parse().map_err(|_| Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: format!("unknown POS tag {:?}", tag),
            })?;
            map.insert(word.to_lowercase(), tag);
        }
        Ok(TagLexicon { map })
    }

    pub fn lookup(&self, word: &str) -> Option<PosTag> {
        self.map.get(&word.to_lowercase()).copied()
    }
}

/// Split a report into labeled sections.
///
/// A header is a line of at most six words ending with a colon; it opens a
/// section labeled with the line content minus the colon. Header lines
/// themselves belong to no section, so they are never tokenized. Text before
/// the first header is labeled "preamble". Always total: text without headers
/// becomes a single preamble section.
pub fn section_report(text: &str) -> Vec<Section> {
    fn is_header(line: &str) -> Option<&str> {
        let trimmed = line.trim();
        let title = trimmed.strip_suffix(':')?;
        if title.is_empty() || title.contains(':') {
            return None;
        }
        let words = title.split_whitespace().count();
        if words == 0 || words > 6 {
            return None;
        }
        Some(title)
    }

    let mut sections: Vec<Section> = Vec::new();
    let mut current: Option<(String, usize)> = None; // (label, content start)
    let mut pos = 0;
    let preamble_start = 0;
    let mut saw_header = false;

    for line in text.split_inclusive('\n') {
        let line_start = pos;
        pos += line.len();
        if let Some(title) = is_header(line) {
            let prev_end = line_start;
            if let Some((label, start)) = current.take() {
                sections.push(Section {
                    label,
                    start,
                    end: prev_end,
                });
            } else if prev_end > preamble_start {
                sections.push(Section {
                    label: "preamble".to_string(),
                    start: preamble_start,
                    end: prev_end,
                });
            }
            saw_header = true;
            current = Some((title.trim().to_string(), pos));
        }
    }
    match current {
        Some((label, start)) => sections.push(Section {
            label,
            start,
            end: text.len(),
        }),
        None if !saw_header => sections.push(Section {
            label: "preamble".to_string(),
            start: 0,
            end: text.len(),
        }),
        None => {}
    }
    sections
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Whitespace tokenization with leading and trailing punctuation split into
/// their own single-character tokens. Internal hyphens, periods and digits
/// stay attached, so "left-sided", "e.g" (after its final period is split
/// off) and "1.5" are single tokens. Offsets are byte offsets into `text`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let bytes_base = 0usize;
    let mut chunk_start = None;
    let mut iter = text.char_indices().peekable();
    let mut chunks: Vec<(usize, usize)> = Vec::new();
    while let Some((i, c)) = iter.next() {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                chunks.push((s, i));
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
        if iter.peek().is_none() {
            if let Some(s) = chunk_start.take() {
                chunks.push((s, i + c.len_utf8()));
            }
        }
    }
    for (start, end) in chunks {
        let mut s = start;
        let mut e = end;
        // Leading punctuation, one token per character.
        while s < e {
            let c = text[s..e].chars().next().unwrap();
            if is_punct(c) && text[s..e].chars().nth(1).is_some() {
                tokens.push(Token::new(c.to_string(), bytes_base + s, bytes_base + s + c.len_utf8()));
                s += c.len_utf8();
            } else {
                break;
            }
        }
        // Trailing punctuation, collected and emitted after the core.
        let mut trailing: Vec<(usize, usize)> = Vec::new();
        while e > s {
            let c = text[s..e].chars().next_back().unwrap();
            if is_punct(c) && e - c.len_utf8() > s {
                trailing.push((e - c.len_utf8(), e));
                e -= c.len_utf8();
            } else {
                break;
            }
        }
        if s < e {
            tokens.push(Token::new(text[s..e].to_string(), bytes_base + s, bytes_base + e));
        }
        for (ts, te) in trailing.into_iter().rev() {
            tokens.push(Token::new(text[ts..te].to_string(), bytes_base + ts, bytes_base + te));
        }
    }
    tokens
}

/// Group a token stream into sentences. Breaks occur after ".", "!" or "?"
/// tokens — unless the preceding token, lowercased and rejoined with its
/// period, is a known abbreviation — and at any inter-token gap containing a
/// newline (reports are line-oriented; each list item ends a sentence).
/// Sentence indices are assigned by the caller.
pub fn split_sentences(text: &str, tokens: &[Token], abbrevs: &AbbreviationList) -> Vec<Vec<Token>> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    for (k, tok) in tokens.iter().enumerate() {
        current.push(tok.clone());
        let mut boundary = false;
        if matches!(tok.text.as_str(), "." | "!" | "?") {
            let is_abbrev = tok.text == "."
                && k > 0
                && abbrevs.contains(&format!("{}.", tokens[k - 1].text.to_lowercase()));
            boundary = !is_abbrev;
        }
        if !boundary {
            if let Some(next) = tokens.get(k + 1) {
                let gap = &text[tok.char_end..next.char_start];
                if gap.contains('\n') {
                    boundary = true;
                }
            }
        }
        if boundary && !current.is_empty() {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

/// Tag every token: lexicon lookup first, then suffix heuristics
/// (all-punctuation → PUNC, leading digit → NUM, -ly → ADV, -ic/-al → ADJ),
/// defaulting to N.
pub fn pos_tag(sentence: &mut Sentence, lexicon: &TagLexicon) {
    for tok in &mut sentence.tokens {
        tok.pos = Some(guess_tag(&tok.text, lexicon));
    }
}

fn guess_tag(text: &str, lexicon: &TagLexicon) -> PosTag {
    if let Some(tag) = lexicon.lookup(text) {
        return tag;
    }
    if text.chars().all(is_punct) {
        return PosTag::Punc;
    }
    if text.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        return PosTag::Num;
    }
    let lower = text.to_lowercase();
    if lower.ends_with("ly") {
        return PosTag::Adv;
    }
    if lower.ends_with("ic") || lower.ends_with("al") {
        return PosTag::Adj;
    }
    PosTag::N
}

/// Run the full pipeline over raw text: sectioning, per-section tokenization,
/// sentence splitting and POS tagging. Sentence indices are global across
/// sections.
pub fn process(
    text: &str,
    abbrevs: &AbbreviationList,
    lexicon: &TagLexicon,
) -> (Vec<Section>, Vec<Sentence>) {
    let sections = section_report(text);
    let mut sentences = Vec::new();
    for section in &sections {
        let content = &text[section.start..section.end];
        let mut tokens = tokenize(content);
        for tok in &mut tokens {
            tok.char_start += section.start;
            tok.char_end += section.start;
        }
        for group in split_sentences(text, &tokens, abbrevs) {
            let mut sentence = Sentence {
                index: sentences.len(),
                tokens: group,
            };
            pos_tag(&mut sentence, lexicon);
            sentences.push(sentence);
        }
    }
    (sections, sentences)
}
