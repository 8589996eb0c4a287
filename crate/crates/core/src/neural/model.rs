//! The tagger network: word embeddings concatenated with a character-level
//! bidirectional recurrent encoding feed a word-level bidirectional layer,
//! whose states project to per-label emission scores for the CRF.
//!
//! All parameters live in one flat f64 vector in a fixed layout, which keeps
//! the optimizer, the finite-difference checks and the on-disk format (flat
//! arrays in documented row-major order) trivial.

use std::collections::HashMap;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bio::BioLabel;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::types::{Corpus, EntityType, Sentence};

use super::lstm::{lstm_backward, lstm_forward, LstmGrads, LstmTrace, LstmWeights};
use super::math::{add_assign, matvec_acc, matvec_t_acc, outer_acc};

pub const PAD: usize = 0;
pub const UNK: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab_words: usize,
    pub vocab_chars: usize,
    pub num_labels: usize,
    pub word_dim: usize,
    pub char_dim: usize,
    pub char_hidden: usize,
    pub word_hidden: usize,
}

/// Byte map of the flat parameter vector.
///
/// Order: word embeddings (V×d_w), char embeddings (C×d_c), char LSTM
/// forward (Wx 4c×d_c, Wh 4c×c, b 4c), char LSTM backward (same), word LSTM
/// forward (Wx 4h×(d_w+2c), Wh 4h×h, b 4h), word LSTM backward (same),
/// emission projection (L×2h weight, L bias), transitions ((L+2)²). All
/// matrices row-major.
#[derive(Debug, Clone)]
pub struct Layout {
    pub word_emb: Range<usize>,
    pub char_emb: Range<usize>,
    pub char_fwd: LstmRanges,
    pub char_bwd: LstmRanges,
    pub word_fwd: LstmRanges,
    pub word_bwd: LstmRanges,
    pub proj_w: Range<usize>,
    pub proj_b: Range<usize>,
    pub trans: Range<usize>,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub struct LstmRanges {
    pub wx: Range<usize>,
    pub wh: Range<usize>,
    pub b: Range<usize>,
}

impl Layout {
    pub fn new(d: &Dims) -> Layout {
        let mut cursor = 0usize;
        let mut take = |len: usize| {
            let r = cursor..cursor + len;
            cursor += len;
            r
        };
        let lstm = |take: &mut dyn FnMut(usize) -> Range<usize>, in_dim: usize, hid: usize| {
            LstmRanges {
                wx: take(4 * hid * in_dim),
                wh: take(4 * hid * hid),
                b: take(4 * hid),
            }
        };
        let word_emb = take(d.vocab_words * d.word_dim);
        let char_emb = take(d.vocab_chars * d.char_dim);
        let char_fwd = lstm(&mut take, d.char_dim, d.char_hidden);
        let char_bwd = lstm(&mut take, d.char_dim, d.char_hidden);
        let word_in = d.word_dim + 2 * d.char_hidden;
        let word_fwd = lstm(&mut take, word_in, d.word_hidden);
        let word_bwd = lstm(&mut take, word_in, d.word_hidden);
        let proj_w = take(d.num_labels * 2 * d.word_hidden);
        let proj_b = take(d.num_labels);
        let trans = take((d.num_labels + 2) * (d.num_labels + 2));
        Layout {
            word_emb,
            char_emb,
            char_fwd,
            char_bwd,
            word_fwd,
            word_bwd,
            proj_w,
            proj_b,
            trans,
            total: cursor,
        }
    }
}

/// Word, character and label vocabularies. Word and char index 0 is PAD and
/// index 1 is UNK; unseen items map to UNK.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabMaps {
    pub words: Vec<String>,
    pub chars: Vec<char>,
    pub labels: Vec<BioLabel>,
    word_index: HashMap<String, usize>,
    char_index: HashMap<char, usize>,
}

impl VocabMaps {
    fn from_parts(words: Vec<String>, chars: Vec<char>, labels: Vec<BioLabel>) -> VocabMaps {
        let word_index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let char_index = chars.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        VocabMaps {
            words,
            chars,
            labels,
            word_index,
            char_index,
        }
    }

    /// Collect every training word and character in first-occurrence order.
    pub fn build(corpus: &Corpus, labels: Vec<BioLabel>) -> Result<VocabMaps> {
        if corpus.documents.is_empty() {
            return Err(Error::Invalid("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut words: Vec<String> = vec!["<pad>".into(), "<unk>".into()];
        let mut chars: Vec<char> = vec!['\u{0}', '\u{1}'];
        let mut word_seen: HashMap<String, usize> = HashMap::new();
        let mut char_seen: HashMap<char, usize> = HashMap::new();
        for doc in &corpus.documents {
            for sentence in &doc.sentences {
                for tok in &sentence.tokens {
                    if !word_seen.contains_key(&tok.text) {
                        word_seen.insert(tok.text.clone(), words.len());
                        words.push(tok.text.clone());
                    }
                    for c in tok.text.chars() {
                        if let std::collections::hash_map::Entry::Vacant(e) = char_seen.entry(c) {
                            e.insert(chars.len());
                            chars.push(c);
                        }
                    }
                }
            }
        }
        Ok(VocabMaps::from_parts(words, chars, labels))
    }

    pub fn word(&self, text: &str) -> usize {
        self.word_index.get(text).copied().unwrap_or(UNK)
    }

    pub fn char(&self, c: char) -> usize {
        self.char_index.get(&c).copied().unwrap_or(UNK)
    }

    pub fn label_index(&self, label: &BioLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// The BIO label alphabet for a type set: O first, then B-t and I-t per type
/// in the fixed enumeration order. Label order drives Viterbi tie-breaking.
pub fn label_alphabet(types: &[EntityType]) -> Vec<BioLabel> {
    let mut labels = vec![BioLabel::O];
    let mut sorted = types.to_vec();
    sorted.sort();
    sorted.dedup();
    for t in sorted {
        labels.push(BioLabel::B(t));
        labels.push(BioLabel::I(t));
    }
    labels
}

/// Per-token input descriptor: a word index plus one index per character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenFeatures {
    pub word: usize,
    pub chars: Vec<usize>,
}

/// One descriptor per token; characters of out-of-vocabulary words are still
/// mapped individually.
pub fn encode_inputs(sentence: &Sentence, vocab: &VocabMaps) -> Vec<TokenFeatures> {
    sentence
        .tokens
        .iter()
        .map(|tok| TokenFeatures {
            word: vocab.word(&tok.text),
            chars: tok.text.chars().map(|c| vocab.char(c)).collect(),
        })
        .collect()
}

/// Everything cached by the forward pass that the backward pass needs.
pub struct ForwardTrace {
    pub features: Vec<TokenFeatures>,
    char_inputs: Vec<Vec<Vec<f64>>>,
    char_fwd: Vec<LstmTrace>,
    char_bwd: Vec<LstmTrace>,
    word_inputs: Vec<Vec<f64>>,
    word_fwd: LstmTrace,
    word_bwd: LstmTrace,
    hidden: Vec<Vec<f64>>,
    pub emissions: Vec<Vec<f64>>,
}

pub struct Tagger<'a> {
    pub dims: &'a Dims,
    pub layout: &'a Layout,
    pub params: &'a [f64],
}

impl<'a> Tagger<'a> {
    pub fn new(dims: &'a Dims, layout: &'a Layout, params: &'a [f64]) -> Tagger<'a> {
        debug_assert_eq!(params.len(), layout.total);
        Tagger { dims, layout, params }
    }

    fn lstm_weights(&self, r: &LstmRanges, in_dim: usize, hidden: usize) -> LstmWeights<'a> {
        LstmWeights {
            wx: &self.params[r.wx.clone()],
            wh: &self.params[r.wh.clone()],
            b: &self.params[r.b.clone()],
            in_dim,
            hidden,
        }
    }

    pub fn transitions(&self) -> &'a [f64] {
        &self.params[self.layout.trans.clone()]
    }

    /// Emission matrix (n×L) plus the cached activations.
    pub fn forward(&self, features: Vec<TokenFeatures>) -> ForwardTrace {
        let d = self.dims;
        let n = features.len();
        let char_f = self.lstm_weights(&self.layout.char_fwd, d.char_dim, d.char_hidden);
        let char_b = self.lstm_weights(&self.layout.char_bwd, d.char_dim, d.char_hidden);
        let word_in_dim = d.word_dim + 2 * d.char_hidden;
        let word_f = self.lstm_weights(&self.layout.word_fwd, word_in_dim, d.word_hidden);
        let word_b = self.lstm_weights(&self.layout.word_bwd, word_in_dim, d.word_hidden);
        let word_emb = &self.params[self.layout.word_emb.clone()];
        let char_emb = &self.params[self.layout.char_emb.clone()];

        let mut char_inputs = Vec::with_capacity(n);
        let mut char_fwd = Vec::with_capacity(n);
        let mut char_bwd = Vec::with_capacity(n);
        let mut word_inputs = Vec::with_capacity(n);
        for feat in &features {
            let inputs: Vec<Vec<f64>> = feat
                .chars
                .iter()
                .map(|&c| char_emb[c * d.char_dim..(c + 1) * d.char_dim].to_vec())
                .collect();
            let reversed: Vec<Vec<f64>> = inputs.iter().rev().cloned().collect();
            let fwd = lstm_forward(&char_f, &inputs);
            let bwd = lstm_forward(&char_b, &reversed);
            let mut x = Vec::with_capacity(word_in_dim);
            x.extend_from_slice(&word_emb[feat.word * d.word_dim..(feat.word + 1) * d.word_dim]);
            x.extend_from_slice(fwd.final_h());
            x.extend_from_slice(bwd.final_h());
            char_inputs.push(inputs);
            char_fwd.push(fwd);
            char_bwd.push(bwd);
            word_inputs.push(x);
        }
        let reversed_words: Vec<Vec<f64>> = word_inputs.iter().rev().cloned().collect();
        let word_fwd = lstm_forward(&word_f, &word_inputs);
        let word_bwd = lstm_forward(&word_b, &reversed_words);

        let proj_w = &self.params[self.layout.proj_w.clone()];
        let proj_b = &self.params[self.layout.proj_b.clone()];
        let mut hidden = Vec::with_capacity(n);
        let mut emissions = Vec::with_capacity(n);
        for t in 0..n {
            let mut h = Vec::with_capacity(2 * d.word_hidden);
            h.extend_from_slice(&word_fwd.h[t]);
            h.extend_from_slice(&word_bwd.h[n - 1 - t]);
            let mut e = proj_b.to_vec();
            matvec_acc(proj_w, d.num_labels, 2 * d.word_hidden, &h, &mut e);
            hidden.push(h);
            emissions.push(e);
        }
        ForwardTrace {
            features,
            char_inputs,
            char_fwd,
            char_bwd,
            word_inputs,
            word_fwd,
            word_bwd,
            hidden,
            emissions,
        }
    }

    /// Backpropagate the emission gradient through the whole network,
    /// accumulating into `grads` (same layout as the parameters).
    pub fn backward(&self, trace: &ForwardTrace, d_emissions: &[Vec<f64>], grads: &mut [f64]) {
        debug_assert_eq!(grads.len(), self.layout.total);
        let d = self.dims;
        let n = trace.features.len();
        if n == 0 {
            return;
        }
        let word_in_dim = d.word_dim + 2 * d.char_hidden;

        // Projection layer.
        let proj_w = &self.params[self.layout.proj_w.clone()];
        let mut dh = vec![vec![0.0; 2 * d.word_hidden]; n];
        {
            // Split borrows: proj_w grad and proj_b grad are disjoint ranges.
            let (gw_range, gb_range) = (self.layout.proj_w.clone(), self.layout.proj_b.clone());
            for t in 0..n {
                outer_acc(&mut grads[gw_range.clone()], &d_emissions[t], &trace.hidden[t]);
                add_assign(&mut grads[gb_range.clone()], &d_emissions[t]);
                matvec_t_acc(
                    proj_w,
                    d.num_labels,
                    2 * d.word_hidden,
                    &d_emissions[t],
                    &mut dh[t],
                );
            }
        }

        // Word-level bidirectional layer.
        let dh_fwd: Vec<Vec<f64>> = dh.iter().map(|v| v[..d.word_hidden].to_vec()).collect();
        let dh_bwd: Vec<Vec<f64>> = (0..n)
            .map(|s| dh[n - 1 - s][d.word_hidden..].to_vec())
            .collect();
        let word_f = self.lstm_weights(&self.layout.word_fwd, word_in_dim, d.word_hidden);
        let word_b = self.lstm_weights(&self.layout.word_bwd, word_in_dim, d.word_hidden);
        let mut dx = vec![vec![0.0; word_in_dim]; n];
        let mut dx_rev = vec![vec![0.0; word_in_dim]; n];
        {
            let r = &self.layout.word_fwd;
            let (head, rest) = grads.split_at_mut(r.wh.start);
            let (mid, tail) = rest.split_at_mut(r.b.start - r.wh.start);
            let mut g = LstmGrads {
                wx: &mut head[r.wx.clone()],
                wh: mid,
                b: &mut tail[..4 * d.word_hidden],
            };
            lstm_backward(&word_f, &trace.word_inputs, &trace.word_fwd, &dh_fwd, &mut g, &mut dx);
        }
        let reversed_words: Vec<Vec<f64>> = trace.word_inputs.iter().rev().cloned().collect();
        {
            let r = &self.layout.word_bwd;
            let (head, rest) = grads.split_at_mut(r.wh.start);
            let (mid, tail) = rest.split_at_mut(r.b.start - r.wh.start);
            let mut g = LstmGrads {
                wx: &mut head[r.wx.clone()],
                wh: mid,
                b: &mut tail[..4 * d.word_hidden],
            };
            lstm_backward(&word_b, &reversed_words, &trace.word_bwd, &dh_bwd, &mut g, &mut dx_rev);
        }
        for t in 0..n {
            add_assign(&mut dx[t], &dx_rev[n - 1 - t]);
        }

        // Split word-layer input gradients into embedding and char parts.
        let char_f = self.lstm_weights(&self.layout.char_fwd, d.char_dim, d.char_hidden);
        let char_b = self.lstm_weights(&self.layout.char_bwd, d.char_dim, d.char_hidden);
        for t in 0..n {
            let feat = &trace.features[t];
            let w_row = feat.word * d.word_dim;
            {
                let gemb = &mut grads[self.layout.word_emb.clone()];
                add_assign(&mut gemb[w_row..w_row + d.word_dim], &dx[t][..d.word_dim]);
            }
            let m = feat.chars.len();
            let d_fwd_final = &dx[t][d.word_dim..d.word_dim + d.char_hidden];
            let d_bwd_final = &dx[t][d.word_dim + d.char_hidden..];
            let mut dh_char_f = vec![vec![0.0; d.char_hidden]; m];
            let mut dh_char_b = vec![vec![0.0; d.char_hidden]; m];
            dh_char_f[m - 1].copy_from_slice(d_fwd_final);
            dh_char_b[m - 1].copy_from_slice(d_bwd_final);
            let mut d_char_in = vec![vec![0.0; d.char_dim]; m];
            let mut d_char_in_rev = vec![vec![0.0; d.char_dim]; m];
            {
                let r = &self.layout.char_fwd;
                let (head, rest) = grads.split_at_mut(r.wh.start);
                let (mid, tail) = rest.split_at_mut(r.b.start - r.wh.start);
                let mut g = LstmGrads {
                    wx: &mut head[r.wx.clone()],
                    wh: mid,
                    b: &mut tail[..4 * d.char_hidden],
                };
                lstm_backward(
                    &char_f,
                    &trace.char_inputs[t],
                    &trace.char_fwd[t],
                    &dh_char_f,
                    &mut g,
                    &mut d_char_in,
                );
            }
            let reversed: Vec<Vec<f64>> = trace.char_inputs[t].iter().rev().cloned().collect();
            {
                let r = &self.layout.char_bwd;
                let (head, rest) = grads.split_at_mut(r.wh.start);
                let (mid, tail) = rest.split_at_mut(r.b.start - r.wh.start);
                let mut g = LstmGrads {
                    wx: &mut head[r.wx.clone()],
                    wh: mid,
                    b: &mut tail[..4 * d.char_hidden],
                };
                lstm_backward(
                    &char_b,
                    &reversed,
                    &trace.char_bwd[t],
                    &dh_char_b,
                    &mut g,
                    &mut d_char_in_rev,
                );
            }
            let gch = &mut grads[self.layout.char_emb.clone()];
            for (s, &c) in feat.chars.iter().enumerate() {
                let row = c * d.char_dim;
                add_assign(&mut gch[row..row + d.char_dim], &d_char_in[s]);
                add_assign(&mut gch[row..row + d.char_dim], &d_char_in_rev[m - 1 - s]);
            }
        }
    }
}

/// Uniform random initialization of all parameters.
pub(crate) fn init_params(layout: &Layout, rng: &mut Rng) -> Vec<f64> {
    (0..layout.total).map(|_| rng.uniform(-0.1, 0.1)).collect()
}

/// Overwrite word embedding rows with vectors from a plain-text
/// `word v1 v2 ...` file, for the words present in the vocabulary. Vector
/// length must equal the configured word dimension.
pub fn load_pretrained_embeddings(
    path: &Path,
    vocab: &VocabMaps,
    dims: &Dims,
    layout: &Layout,
    params: &mut [f64],
) -> Result<usize> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut loaded = 0;
    for (lineno0, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap();
        let values: Vec<f64> = parts
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno0 + 1,
                    msg: format!("bad float {v:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dims.word_dim {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno0 + 1,
                msg: format!(
                    "embedding has {} values, model expects {}",
                    values.len(),
                    dims.word_dim
                ),
            });
        }
        let idx = vocab.word(word);
        if idx != UNK || word == "<unk>" {
            let emb = &mut params[layout.word_emb.clone()];
            emb[idx * dims.word_dim..(idx + 1) * dims.word_dim].copy_from_slice(&values);
            loaded += 1;
        }
    }
    Ok(loaded)
}

// ---------------------------------------------------------------------------
// On-disk format

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    mode: String,
    entity_type: Option<EntityType>,
    vocab: VocabFile,
    dims: Dims,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    words: Vec<String>,
    /// All characters from index 2 on, concatenated; 0 and 1 are PAD/UNK.
    chars: String,
    labels: Vec<String>,
}

/// One trained model: the joint model in monolithic mode, or one per-type
/// model in bag mode.
#[derive(Debug, Clone)]
pub struct TaggerModel {
    pub entity_type: Option<EntityType>,
    pub vocab: VocabMaps,
    pub dims: Dims,
    pub params: Vec<f64>,
    /// Mean training loss per epoch, kept in memory only.
    pub epoch_losses: Vec<f64>,
}

impl TaggerModel {
    pub fn layout(&self) -> Layout {
        Layout::new(&self.dims)
    }

    pub fn to_json(&self, mode: &str) -> String {
        let file = ModelFile {
            format_version: 1,
            mode: mode.to_string(),
            entity_type: self.entity_type,
            vocab: VocabFile {
                words: self.vocab.words.clone(),
                chars: self.vocab.chars[2..].iter().collect(),
                labels: self.vocab.labels.iter().map(|l| l.to_string()).collect(),
            },
            dims: self.dims,
            weights: self.params.clone(),
        };
        serde_json::to_string(&file).expect("model serialization")
    }

    pub fn from_json(text: &str) -> Result<(TaggerModel, String)> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("bad model JSON: {e}")))?;
        if file.format_version != 1 {
            return Err(Error::Model(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        let labels: Vec<BioLabel> = file
            .vocab
            .labels
            .iter()
            .map(|l| l.parse())
            .collect::<Result<_>>()?;
        let mut chars: Vec<char> = vec!['\u{0}', '\u{1}'];
        chars.extend(file.vocab.chars.chars());
        let vocab = VocabMaps::from_parts(file.vocab.words, chars, labels);
        let dims = file.dims;
        if vocab.words.len() != dims.vocab_words
            || vocab.chars.len() != dims.vocab_chars
            || vocab.labels.len() != dims.num_labels
        {
            return Err(Error::Resource(format!(
                "model vocab sizes do not match dims: {} words / {} chars / {} labels vs {:?}",
                vocab.words.len(),
                vocab.chars.len(),
                vocab.labels.len(),
                dims
            )));
        }
        let layout = Layout::new(&dims);
        if file.weights.len() != layout.total {
            return Err(Error::Model(format!(
                "weight array has {} values, layout needs {}",
                file.weights.len(),
                layout.total
            )));
        }
        if !file.weights.iter().all(|w| w.is_finite()) {
            return Err(Error::Model("non-finite weights".to_string()));
        }
        Ok((
            TaggerModel {
                entity_type: file.entity_type,
                vocab,
                dims,
                params: file.weights,
                epoch_losses: Vec::new(),
            },
            file.mode,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Document, Token};

    fn tiny_corpus() -> Corpus {
        let mut corpus = Corpus::new("t");
        let mut doc = Document::new("d");
        let words = ["old", "infarct", "seen"];
        let mut text = String::new();
        let mut tokens = Vec::new();
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            let start = text.len();
            text.push_str(w);
            tokens.push(Token::new(*w, start, text.len()));
        }
        doc.raw_text = text;
        doc.sentences = vec![Sentence { index: 0, tokens }];
        corpus.documents.push(doc);
        corpus
    }

    fn tiny_dims(vocab: &VocabMaps) -> Dims {
        Dims {
            vocab_words: vocab.words.len(),
            vocab_chars: vocab.chars.len(),
            num_labels: vocab.labels.len(),
            word_dim: 4,
            char_dim: 3,
            char_hidden: 2,
            word_hidden: 3,
        }
    }

    #[test]
    fn vocab_counts_reserved_slots() {
        let corpus = tiny_corpus();
        let vocab = VocabMaps::build(&corpus, label_alphabet(&[EntityType::Stroke])).unwrap();
        // 3 unique words + PAD + UNK.
        assert_eq!(vocab.words.len(), 5);
        assert_eq!(vocab.word("infarct"), 3);
        assert_eq!(vocab.word("xyzzy"), UNK);
        // Every character of every training token is present.
        for w in ["old", "infarct", "seen"] {
            for c in w.chars() {
                assert_ne!(vocab.char(c), UNK, "missing char {c}");
            }
        }
        assert_eq!(vocab.char('Q'), UNK);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(VocabMaps::build(&Corpus::new("e"), vec![BioLabel::O]).is_err());
    }

    #[test]
    fn label_alphabet_layout() {
        let labels = label_alphabet(&[EntityType::Tumour, EntityType::Stroke]);
        assert_eq!(labels[0], BioLabel::O);
        // Types in enumeration order regardless of argument order.
        assert_eq!(labels[1], BioLabel::B(EntityType::Stroke));
        assert_eq!(labels[2], BioLabel::I(EntityType::Stroke));
        assert_eq!(labels[3], BioLabel::B(EntityType::Tumour));
        assert_eq!(labels[4], BioLabel::I(EntityType::Tumour));
    }

    #[test]
    fn encode_inputs_maps_words_and_chars() {
        let corpus = tiny_corpus();
        let vocab = VocabMaps::build(&corpus, label_alphabet(&[EntityType::Stroke])).unwrap();
        let sentence = &corpus.documents[0].sentences[0];
        let feats = encode_inputs(sentence, &vocab);
        assert_eq!(feats.len(), 3);
        assert_eq!(feats[1].word, vocab.word("infarct"));
        assert_eq!(feats[1].chars.len(), 7);
        // Unseen word: UNK index but chars still mapped.
        let mut s2 = sentence.clone();
        s2.tokens[0].text = "dense".into();
        s2.tokens[0].char_end = s2.tokens[0].char_start + 5;
        let feats2 = encode_inputs(&s2, &vocab);
        assert_eq!(feats2[0].word, UNK);
        assert_eq!(feats2[0].chars.len(), 5);
        assert!(feats2[0].chars.iter().any(|&c| c != UNK));
        // Empty sentence → empty features.
        let empty = Sentence { index: 0, tokens: vec![] };
        assert!(encode_inputs(&empty, &vocab).is_empty());
    }

    #[test]
    fn emission_shape_and_zero_weight_bias() {
        let corpus = tiny_corpus();
        let vocab = VocabMaps::build(&corpus, label_alphabet(&[EntityType::Stroke])).unwrap();
        let dims = tiny_dims(&vocab);
        let layout = Layout::new(&dims);
        let mut params = vec![0.0; layout.total];
        // Set only the projection bias: every emission row must equal it.
        let bias = [0.3, -0.2, 0.5];
        params[layout.proj_b.clone()].copy_from_slice(&bias);
        let tagger = Tagger::new(&dims, &layout, &params);
        let feats = encode_inputs(&corpus.documents[0].sentences[0], &vocab);
        let trace = tagger.forward(feats);
        assert_eq!(trace.emissions.len(), 3);
        for row in &trace.emissions {
            assert_eq!(row.len(), dims.num_labels);
            for (v, b) in row.iter().zip(&bias) {
                assert_eq!(v, b);
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let corpus = tiny_corpus();
        let vocab = VocabMaps::build(&corpus, label_alphabet(&[EntityType::Stroke])).unwrap();
        let dims = tiny_dims(&vocab);
        let layout = Layout::new(&dims);
        let mut rng = Rng::new(3);
        let params = init_params(&layout, &mut rng);
        let tagger = Tagger::new(&dims, &layout, &params);
        let feats = encode_inputs(&corpus.documents[0].sentences[0], &vocab);
        let a = tagger.forward(feats.clone()).emissions;
        let b = tagger.forward(feats).emissions;
        assert_eq!(a, b);
    }

    #[test]
    fn model_json_roundtrip_is_exact() {
        let corpus = tiny_corpus();
        let vocab = VocabMaps::build(&corpus, label_alphabet(&[EntityType::Stroke])).unwrap();
        let dims = tiny_dims(&vocab);
        let layout = Layout::new(&dims);
        let mut rng = Rng::new(17);
        let model = TaggerModel {
            entity_type: Some(EntityType::Stroke),
            vocab,
            dims,
            params: init_params(&layout, &mut rng),
            epoch_losses: vec![],
        };
        let json = model.to_json("bag");
        let (back, mode) = TaggerModel::from_json(&json).unwrap();
        assert_eq!(mode, "bag");
        assert_eq!(back.params, model.params); // bitwise
        assert_eq!(back.vocab, model.vocab);
        assert_eq!(back.dims, model.dims);
    }

    #[test]
    fn corrupt_model_is_rejected() {
        let corpus = tiny_corpus();
        let vocab = VocabMaps::build(&corpus, label_alphabet(&[EntityType::Stroke])).unwrap();
        let dims = tiny_dims(&vocab);
        let layout = Layout::new(&dims);
        let model = TaggerModel {
            entity_type: None,
            vocab,
            dims,
            params: vec![0.0; layout.total],
            epoch_losses: vec![],
        };
        let json = model.to_json("monolithic");
        // Truncated weights.
        let bad = json.replace("\"weights\":[0.0,", "\"weights\":[");
        assert!(TaggerModel::from_json(&bad).is_err());
    }
}
