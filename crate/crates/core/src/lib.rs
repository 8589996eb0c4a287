//! Named-entity recognition over radiology-style reports, three ways: a
//! rule/lexicon pipeline, a character-aware recurrent tagger with a
//! linear-chain CRF, and a concept gazetteer with a learned disambiguator —
//! all evaluated under one strict CoNLL-style harness on synthetic corpora.

pub mod bio;
pub mod corpus_io;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod gazetteer;
pub mod neural;
pub mod phrases;
pub mod ruler;
pub mod stats;
pub mod stock;
pub mod textproc;
pub mod types;

pub(crate) mod rng;

pub use error::{Error, ErrorCategory, Result};
pub use types::{Corpus, Document, EntityMention, EntityType, Section, Sentence, Token};
