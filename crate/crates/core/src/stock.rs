//! Stock resources shipped with the crate: the reference lexicon and rule
//! set, concept resources for the gazetteer, POS and abbreviation tables, and
//! the synthetic-corpus generator configurations. The files live under
//! `data/` and are embedded here so the toolkit works without any paths.

use crate::datagen::GenConfig;
use crate::gazetteer::{parse_concept_resources, ConceptDictionary, ConceptMap};
use crate::ruler::{parse_ruleset, RuleSet};
use crate::textproc::{AbbreviationList, TagLexicon};

pub const LEXICON: &str = include_str!("../data/lexicon.tsv");
pub const RULES: &str = include_str!("../data/rules.txt");
pub const ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");
pub const POS_LEXICON: &str = include_str!("../data/pos_lexicon.tsv");
pub const CONCEPT_DICT: &str = include_str!("../data/concept_dict.tsv");
pub const CONCEPT_MAP: &str = include_str!("../data/concept_map.tsv");
pub const GENCONFIG_BENCHMARK: &str = include_str!("../data/genconfig.json");
pub const GENCONFIG_MEMORIZE: &str = include_str!("../data/genconfig_memorize.json");

pub fn ruleset() -> RuleSet {
    parse_ruleset(LEXICON, "stock:lexicon.tsv", RULES, "stock:rules.txt")
        .expect("stock ruleset parses")
}

pub fn abbreviations() -> AbbreviationList {
    AbbreviationList::parse(ABBREVIATIONS, "stock:abbreviations.txt")
        .expect("stock abbreviations parse")
}

pub fn tag_lexicon() -> TagLexicon {
    TagLexicon::parse(POS_LEXICON, "stock:pos_lexicon.tsv").expect("stock POS lexicon parses")
}

pub fn concept_resources() -> (ConceptDictionary, ConceptMap) {
    parse_concept_resources(
        CONCEPT_DICT,
        "stock:concept_dict.tsv",
        CONCEPT_MAP,
        "stock:concept_map.tsv",
    )
    .expect("stock concept resources parse")
}

/// Configuration of the 700-report benchmark corpus (split 500 dev / 200
/// test by the evaluation workflow).
pub fn benchmark_config() -> GenConfig {
    GenConfig::from_json(GENCONFIG_BENCHMARK).expect("stock benchmark config parses")
}

/// Configuration of the 30-sentence memorization fixture.
pub fn memorization_config() -> GenConfig {
    GenConfig::from_json(GENCONFIG_MEMORIZE).expect("stock memorization config parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::GOLD_SOURCE;
    use crate::stats::corpus_stats;
    use crate::types::EntityType;

    #[test]
    fn stock_resources_parse() {
        let rs = ruleset();
        assert!(rs.lexicon.len() >= 150, "lexicon has {}", rs.lexicon.len());
        assert!(rs.rules.len() >= 15, "rules have {}", rs.rules.len());
        let (dict, map) = concept_resources();
        assert!(dict.len() >= 140, "dictionary has {}", dict.len());
        assert!(map.is_ambiguous("C0038454"));
        abbreviations();
        tag_lexicon();
    }

    #[test]
    fn lexicon_covers_every_type_except_time() {
        let rs = ruleset();
        for t in EntityType::ALL {
            if matches!(t, EntityType::TimeOld | EntityType::TimeRecent) {
                continue;
            }
            assert!(
                rs.lexicon.iter().any(|e| e.entity_type == t),
                "no lexicon entry for {t}"
            );
        }
        // Time types are produced by rules instead.
        for name in ["time-old", "time-recent"] {
            assert!(rs.rules.iter().any(|r| r.name == name));
        }
    }

    #[test]
    fn memorization_fixture_has_thirty_sentences() {
        let corpus = crate::datagen::generate_corpus(&memorization_config()).unwrap();
        let stats = corpus_stats(&corpus, GOLD_SOURCE).unwrap();
        assert_eq!(stats.sentences, 30);
        assert_eq!(stats.entities, 20);
        assert_eq!(stats.reports, 10);
    }

    #[test]
    fn benchmark_config_is_valid() {
        let config = benchmark_config();
        assert_eq!(config.reports, 700);
        // The per-type proportions follow the scaled frequency profile, e.g.
        // ischaemic : haemorrhagic stays roughly 697 : 344.
        let isch = config.targets[&EntityType::IschaemicStroke] as f64;
        let haem = config.targets[&EntityType::HaemorrhagicStroke] as f64;
        let ratio = isch / haem;
        assert!(
            (ratio - 697.0 / 344.0).abs() < 0.1,
            "ischaemic:haemorrhagic ratio {ratio}"
        );
        assert_eq!(config.targets[&EntityType::GliomaTumour], 0);
    }
}
