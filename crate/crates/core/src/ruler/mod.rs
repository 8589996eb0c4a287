//! Rule-based NER: longest-match lexicon annotation followed by prioritized
//! contextual rewrite rules over token patterns.
//!
//! A rule's pattern is a sequence of token predicates, each optionally marked
//! `?`. `LEX(type)` matches the full extent of an active mention of that type
//! starting at the scan position, which is what lets retype and delete
//! actions target whole mentions. Rules run in descending priority order
//! (ties broken by file order), each scanning a sentence left to right and
//! resuming after every match. A retype or delete consumes its target
//! mention, so lower-priority rules can no longer fire on it. A rule whose
//! new mention would overlap a surviving mention loses: the new mention is
//! dropped and the conflict is recorded in the diagnostics channel.

mod dsl;

pub use dsl::{load_ruleset, parse_ruleset};

use crate::error::{Error, Result};
use crate::phrases::PhraseMatcher;
use crate::textproc::{self, AbbreviationList, PosTag, TagLexicon};
use crate::types::{Document, EntityMention, EntityType, Sentence};

/// Annotation source written by this system.
pub const RULER_SOURCE: &str = "ruler";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub phrase: Vec<String>,
    pub entity_type: EntityType,
}

#[derive(Debug, Clone)]
pub enum Atom {
    /// Case-insensitive literal token.
    Literal(String),
    /// Regular expression matched against the whole raw token text.
    Regex(regex::Regex),
    /// Full extent of an active mention of the given type.
    Lex(EntityType),
    Pos(PosTag),
    Any,
}

#[derive(Debug, Clone)]
pub struct PatternAtom {
    pub atom: Atom,
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleAction {
    /// Create a mention of the type over the tokens matched by pattern atoms
    /// `span.0 .. span.1`.
    Assign { entity_type: EntityType, span: (usize, usize) },
    /// Consume the mention bound by the first LEX atom and create a mention
    /// of the new type over the whole match.
    Retype(EntityType),
    /// Consume the mention bound by the first LEX atom.
    Delete,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub priority: i64,
    pub pattern: Vec<PatternAtom>,
    pub action: RuleAction,
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    pub lexicon: Vec<LexiconEntry>,
    /// Sorted by descending priority, ties in file order.
    pub rules: Vec<Rule>,
    matcher: PhraseMatcher<EntityType>,
}

impl RuleSet {
    pub fn build(lexicon: Vec<LexiconEntry>, mut rules: Vec<Rule>) -> Result<Self> {
        let mut matcher = PhraseMatcher::new();
        for entry in &lexicon {
            if entry.phrase.is_empty() {
                return Err(Error::Invalid("empty lexicon phrase".to_string()));
            }
            if matcher.insert(&entry.phrase, entry.entity_type).is_some() {
                return Err(Error::Invalid(format!(
                    "duplicate lexicon phrase {:?}",
                    entry.phrase.join(" ")
                )));
            }
        }
        let mut names = std::collections::HashSet::new();
        for rule in &rules {
            if !names.insert(rule.name.clone()) {
                return Err(Error::Invalid(format!("duplicate rule name {:?}", rule.name)));
            }
            rule.validate()?;
        }
        // Stable sort keeps file order within a priority level.
        rules.sort_by_key(|r| std::cmp::Reverse(r.priority));
        Ok(RuleSet {
            lexicon,
            rules,
            matcher,
        })
    }
}

impl Rule {
    fn validate(&self) -> Result<()> {
        if !self.pattern.iter().any(|a| !a.optional) {
            return Err(Error::Invalid(format!(
                "rule {:?}: pattern needs at least one non-optional atom",
                self.name
            )));
        }
        match &self.action {
            RuleAction::Assign { span: (i, j), .. } => {
                if i >= j || *j > self.pattern.len() {
                    return Err(Error::Invalid(format!(
                        "rule {:?}: SPAN {i}..{j} outside pattern of {} atoms",
                        self.name,
                        self.pattern.len()
                    )));
                }
            }
            RuleAction::Retype(_) | RuleAction::Delete => {
                let has_lex = self
                    .pattern
                    .iter()
                    .any(|a| matches!(a.atom, Atom::Lex(_)) && !a.optional);
                if !has_lex {
                    return Err(Error::Invalid(format!(
                        "rule {:?}: retype/delete requires a non-optional LEX atom",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Left-to-right longest-match lexicon pass. Matching is case-insensitive;
/// the produced mentions never overlap.
pub fn apply_lexicon(sentence: &Sentence, ruleset: &RuleSet) -> Vec<EntityMention> {
    let lower = sentence.lower_tokens();
    ruleset
        .matcher
        .find(&lower)
        .into_iter()
        .map(|(start, end, &t)| EntityMention::new(t, sentence.index, start, end))
        .collect()
}

/// One pattern match: per-atom token ranges plus the mention bound by the
/// first LEX atom, if any.
struct PatternMatch {
    ranges: Vec<(usize, usize)>,
    end: usize,
    lex_target: Option<EntityMention>,
}

fn atom_match(
    atom: &Atom,
    pos: usize,
    sentence: &Sentence,
    lower: &[String],
    active: &[EntityMention],
) -> Option<usize> {
    if pos >= sentence.len() {
        return None;
    }
    match atom {
        Atom::Literal(s) => (lower[pos] == *s).then_some(pos + 1),
        Atom::Regex(re) => re.is_match(&sentence.tokens[pos].text).then_some(pos + 1),
        Atom::Pos(tag) => (sentence.tokens[pos].pos == Some(*tag)).then_some(pos + 1),
        Atom::Any => Some(pos + 1),
        Atom::Lex(t) => active
            .iter()
            .find(|m| m.start_tok == pos && m.entity_type == *t)
            .map(|m| m.end_tok),
    }
}

fn try_match(
    rule: &Rule,
    start: usize,
    sentence: &Sentence,
    lower: &[String],
    active: &[EntityMention],
) -> Option<PatternMatch> {
    fn rec(
        pattern: &[PatternAtom],
        idx: usize,
        pos: usize,
        sentence: &Sentence,
        lower: &[String],
        active: &[EntityMention],
        ranges: &mut Vec<(usize, usize)>,
    ) -> Option<usize> {
        let Some(pa) = pattern.get(idx) else {
            return Some(pos);
        };
        // Greedy: try consuming first, then (for optional atoms) skipping.
        if let Some(next) = atom_match(&pa.atom, pos, sentence, lower, active) {
            ranges.push((pos, next));
            if let Some(end) = rec(pattern, idx + 1, next, sentence, lower, active, ranges) {
                return Some(end);
            }
            ranges.pop();
        }
        if pa.optional {
            ranges.push((pos, pos));
            if let Some(end) = rec(pattern, idx + 1, pos, sentence, lower, active, ranges) {
                return Some(end);
            }
            ranges.pop();
        }
        None
    }

    let mut ranges = Vec::with_capacity(rule.pattern.len());
    let end = rec(&rule.pattern, 0, start, sentence, lower, active, &mut ranges)?;
    let lex_target = rule
        .pattern
        .iter()
        .zip(&ranges)
        .find(|(pa, (s, e))| matches!(pa.atom, Atom::Lex(_)) && s < e)
        .and_then(|(pa, (s, e))| {
            let Atom::Lex(t) = pa.atom else { unreachable!() };
            active
                .iter()
                .find(|m| m.start_tok == *s && m.end_tok == *e && m.entity_type == t)
                .copied()
        });
    Some(PatternMatch {
        ranges,
        end,
        lex_target,
    })
}

/// Apply the rule cascade to one sentence's lexicon mentions.
pub fn apply_rules(
    sentence: &Sentence,
    lexicon_mentions: Vec<EntityMention>,
    ruleset: &RuleSet,
    diagnostics: &mut Vec<String>,
) -> Vec<EntityMention> {
    let lower = sentence.lower_tokens();
    let mut active = lexicon_mentions;
    active.sort();
    for rule in &ruleset.rules {
        let mut pos = 0;
        while pos < sentence.len() {
            let Some(found) = try_match(rule, pos, sentence, &lower, &active) else {
                pos += 1;
                continue;
            };
            // A match never consumes zero tokens: patterns have at least one
            // non-optional atom and every atom consumes at least one token.
            debug_assert!(found.end > pos);
            apply_action(rule, &found, sentence.index, &mut active, diagnostics);
            pos = found.end;
        }
    }
    active.sort();
    active
}

fn apply_action(
    rule: &Rule,
    found: &PatternMatch,
    sentence: usize,
    active: &mut Vec<EntityMention>,
    diagnostics: &mut Vec<String>,
) {
    let nonempty = |ranges: &[(usize, usize)]| -> Option<(usize, usize)> {
        let lo = ranges.iter().filter(|(s, e)| s < e).map(|r| r.0).min()?;
        let hi = ranges.iter().filter(|(s, e)| s < e).map(|r| r.1).max()?;
        Some((lo, hi))
    };
    let mut insert = |mention: EntityMention, active: &mut Vec<EntityMention>| {
        if let Some(conflict) = active.iter().find(|m| m.overlaps(&mention)) {
            diagnostics.push(format!(
                "rule {:?}: dropped {} [{}, {}) overlapping {} [{}, {}) in sentence {}",
                rule.name,
                mention.entity_type,
                mention.start_tok,
                mention.end_tok,
                conflict.entity_type,
                conflict.start_tok,
                conflict.end_tok,
                sentence,
            ));
        } else {
            active.push(mention);
            active.sort();
        }
    };
    match &rule.action {
        RuleAction::Assign { entity_type, span } => {
            let Some((lo, hi)) = nonempty(&found.ranges[span.0..span.1]) else {
                return; // designated atoms all skipped
            };
            insert(EntityMention::new(*entity_type, sentence, lo, hi), active);
        }
        RuleAction::Retype(entity_type) => {
            let Some(target) = found.lex_target else { return };
            active.retain(|m| m != &target);
            let Some((lo, hi)) = nonempty(&found.ranges) else { return };
            insert(EntityMention::new(*entity_type, sentence, lo, hi), active);
        }
        RuleAction::Delete => {
            let Some(target) = found.lex_target else { return };
            active.retain(|m| m != &target);
        }
    }
}

/// Annotate an already-tokenized document, storing mentions under the
/// "ruler" source. Returns conflict diagnostics.
pub fn annotate_document(doc: &mut Document, ruleset: &RuleSet) -> Vec<String> {
    let mut diagnostics = Vec::new();
    let mut mentions = Vec::new();
    for sentence in &doc.sentences {
        let from_lexicon = apply_lexicon(sentence, ruleset);
        mentions.extend(apply_rules(sentence, from_lexicon, ruleset, &mut diagnostics));
    }
    doc.set_annotations(RULER_SOURCE, mentions);
    diagnostics
}

/// Run the preprocessing pipeline on raw text and annotate the result.
pub fn annotate_text(
    id: &str,
    raw_text: &str,
    ruleset: &RuleSet,
    abbrevs: &AbbreviationList,
    tag_lexicon: &TagLexicon,
) -> (Document, Vec<String>) {
    let (sections, sentences) = textproc::process(raw_text, abbrevs, tag_lexicon);
    let mut doc = Document::new(id);
    doc.raw_text = raw_text.to_string();
    doc.sections = sections;
    doc.sentences = sentences;
    let diagnostics = annotate_document(&mut doc, ruleset);
    (doc, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Token;
    use EntityType::*;

    fn sentence(words: &str) -> Sentence {
        let mut start = 0;
        let tokens = words
            .split_whitespace()
            .map(|w| {
                let t = Token::new(w, start, start + w.len());
                start += w.len() + 1;
                t
            })
            .collect();
        Sentence { index: 0, tokens }
    }

    fn ruleset(lexicon: &[(&str, EntityType)], rules: Vec<Rule>) -> RuleSet {
        let lexicon = lexicon
            .iter()
            .map(|(p, t)| LexiconEntry {
                phrase: p.split_whitespace().map(str::to_string).collect(),
                entity_type: *t,
            })
            .collect();
        RuleSet::build(lexicon, rules).unwrap()
    }

    fn lit(s: &str) -> PatternAtom {
        PatternAtom {
            atom: Atom::Literal(s.to_string()),
            optional: false,
        }
    }

    fn lex(t: EntityType) -> PatternAtom {
        PatternAtom {
            atom: Atom::Lex(t),
            optional: false,
        }
    }

    #[test]
    fn lexicon_longest_match() {
        let rs = ruleset(&[("stroke", Stroke), ("ischaemic stroke", IschaemicStroke)], vec![]);
        let got = apply_lexicon(&sentence("old ischaemic stroke"), &rs);
        assert_eq!(got, vec![EntityMention::new(IschaemicStroke, 0, 1, 3)]);
    }

    #[test]
    fn lexicon_multiword() {
        let rs = ruleset(&[("small vessel disease", SmallVesselDisease)], vec![]);
        let got = apply_lexicon(&sentence("Extensive small vessel disease ."), &rs);
        assert_eq!(got, vec![EntityMention::new(SmallVesselDisease, 0, 1, 4)]);
    }

    #[test]
    fn lexicon_no_match() {
        let rs = ruleset(&[("stroke", Stroke)], vec![]);
        assert!(apply_lexicon(&sentence("normal study"), &rs).is_empty());
    }

    #[test]
    fn lexicon_is_case_insensitive() {
        let rs = ruleset(&[("stroke", Stroke)], vec![]);
        let a = apply_lexicon(&sentence("STROKE"), &rs);
        let b = apply_lexicon(&sentence("stroke"), &rs);
        assert_eq!(a, b);
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn retype_covers_the_whole_match() {
        let rule = Rule {
            name: "haem".into(),
            priority: 10,
            pattern: vec![lit("haemorrhagic"), lex(Stroke)],
            action: RuleAction::Retype(HaemorrhagicStroke),
        };
        let rs = ruleset(&[("stroke", Stroke)], vec![rule]);
        let s = sentence("large haemorrhagic stroke");
        let mut diags = Vec::new();
        let got = apply_rules(&s, apply_lexicon(&s, &rs), &rs, &mut diags);
        assert_eq!(got, vec![EntityMention::new(HaemorrhagicStroke, 0, 1, 3)]);
        assert!(diags.is_empty());
    }

    #[test]
    fn optional_any_matches_both_gap_sizes() {
        let rule = Rule {
            name: "old-isch".into(),
            priority: 10,
            pattern: vec![
                lit("old"),
                PatternAtom { atom: Atom::Any, optional: true },
                lex(IschaemicStroke),
            ],
            action: RuleAction::Assign {
                entity_type: TimeOld,
                span: (0, 1),
            },
        };
        let rs = ruleset(&[("ischaemic stroke", IschaemicStroke)], vec![rule]);
        let mut diags = Vec::new();
        for text in ["old ischaemic stroke", "old left ischaemic stroke"] {
            let s = sentence(text);
            let got = apply_rules(&s, apply_lexicon(&s, &rs), &rs, &mut diags);
            assert!(
                got.contains(&EntityMention::new(TimeOld, 0, 0, 1)),
                "no time_old in {text:?}: {got:?}"
            );
        }
    }

    #[test]
    fn empty_rule_list_is_identity() {
        let rs = ruleset(&[("stroke", Stroke)], vec![]);
        let s = sentence("a stroke here");
        let lexed = apply_lexicon(&s, &rs);
        let mut diags = Vec::new();
        assert_eq!(apply_rules(&s, lexed.clone(), &rs, &mut diags), lexed);
    }

    #[test]
    fn delete_consumes_target() {
        let rule = Rule {
            name: "mass-effect".into(),
            priority: 10,
            pattern: vec![lex(Tumour), lit("effect")],
            action: RuleAction::Delete,
        };
        let rs = ruleset(&[("mass", Tumour)], vec![rule]);
        let s = sentence("no mass effect seen");
        let mut diags = Vec::new();
        let got = apply_rules(&s, apply_lexicon(&s, &rs), &rs, &mut diags);
        assert!(got.is_empty());
    }

    #[test]
    fn overlapping_assign_is_dropped_with_diagnostic() {
        let rule = Rule {
            name: "bare-haem".into(),
            priority: 1,
            pattern: vec![lit("haemorrhage")],
            action: RuleAction::Assign {
                entity_type: HaemorrhagicStroke,
                span: (0, 1),
            },
        };
        let rs = ruleset(
            &[("subarachnoid haemorrhage", SubarachnoidHaemorrhage)],
            vec![rule],
        );
        let s = sentence("subarachnoid haemorrhage seen");
        let mut diags = Vec::new();
        let got = apply_rules(&s, apply_lexicon(&s, &rs), &rs, &mut diags);
        assert_eq!(got, vec![EntityMention::new(SubarachnoidHaemorrhage, 0, 0, 2)]);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].contains("bare-haem"));
    }

    #[test]
    fn priority_order_decides_conflicts() {
        // Two rules assign different types to the same token; the higher
        // priority one wins regardless of file order.
        let make = |name: &str, priority: i64, t: EntityType| Rule {
            name: name.into(),
            priority,
            pattern: vec![lit("old")],
            action: RuleAction::Assign {
                entity_type: t,
                span: (0, 1),
            },
        };
        let s = sentence("old lesion");
        for (p_a, p_b, winner) in [(5, 1, TimeOld), (1, 5, TimeRecent)] {
            let rs = ruleset(
                &[],
                vec![make("a", p_a, TimeOld), make("b", p_b, TimeRecent)],
            );
            let mut diags = Vec::new();
            let got = apply_rules(&s, vec![], &rs, &mut diags);
            assert_eq!(got[0].entity_type, winner);
            assert_eq!(diags.len(), 1);
        }
    }

    #[test]
    fn rules_do_not_refire_on_consumed_mentions() {
        // First rule deletes the mention; second (lower priority) rule would
        // retype it but finds nothing to bind.
        let delete = Rule {
            name: "del".into(),
            priority: 10,
            pattern: vec![lex(Stroke)],
            action: RuleAction::Delete,
        };
        let retype = Rule {
            name: "re".into(),
            priority: 1,
            pattern: vec![lex(Stroke)],
            action: RuleAction::Retype(IschaemicStroke),
        };
        let rs = ruleset(&[("stroke", Stroke)], vec![delete, retype]);
        let s = sentence("a stroke here");
        let mut diags = Vec::new();
        assert!(apply_rules(&s, apply_lexicon(&s, &rs), &rs, &mut diags).is_empty());
    }

    #[test]
    fn duplicate_rule_names_rejected() {
        let r = |name: &str| Rule {
            name: name.into(),
            priority: 1,
            pattern: vec![lit("x")],
            action: RuleAction::Assign {
                entity_type: Stroke,
                span: (0, 1),
            },
        };
        assert!(RuleSet::build(vec![], vec![r("a"), r("a")]).is_err());
    }

    #[test]
    fn outputs_never_overlap() {
        // Randomized layouts: lexicon plus an aggressive assign rule.
        let rule = Rule {
            name: "grab".into(),
            priority: 5,
            pattern: vec![lit("x"), PatternAtom { atom: Atom::Any, optional: true }],
            action: RuleAction::Assign {
                entity_type: Atrophy,
                span: (0, 2),
            },
        };
        let rs = ruleset(&[("x y", Tumour), ("y", Stroke)], vec![rule]);
        let mut rng = crate::rng::Rng::new(11);
        for _ in 0..200 {
            let len = 1 + rng.below(8);
            let words: Vec<&str> = (0..len)
                .map(|_| ["x", "y", "z"][rng.below(3)])
                .collect();
            let s = sentence(&words.join(" "));
            let mut diags = Vec::new();
            let got = apply_rules(&s, apply_lexicon(&s, &rs), &rs, &mut diags);
            for pair in got.windows(2) {
                assert!(!pair[0].overlaps(&pair[1]), "overlap on {words:?}: {got:?}");
            }
        }
    }
}
