//! Parsers for the lexicon file and the line-oriented rule DSL.
//!
//! Rule lines have the shape
//!
//! ```text
//! RULE <name> PRIORITY <int>: <atom> <atom> ... => <action>
//! ```
//!
//! with atoms `"literal"`, `/regex/`, `LEX(type)`, `POS(tag)` and `ANY`, each
//! optionally suffixed `?`, and actions `ASSIGN <type> SPAN <i>..<j>`,
//! `RETYPE <type>` or `DELETE`. Literals match case-insensitively; regexes
//! are anchored to the whole token and see its raw text (use `(?i:...)` for
//! case-insensitive alternations). Blank lines and `#` comments are skipped
//! in both files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::EntityType;

use super::{Atom, LexiconEntry, PatternAtom, Rule, RuleAction, RuleSet};

pub fn load_ruleset(lexicon_path: &Path, rules_path: &Path) -> Result<RuleSet> {
    let lexicon_text =
        std::fs::read_to_string(lexicon_path).map_err(|e| Error::io(lexicon_path, e))?;
    let rules_text = std::fs::read_to_string(rules_path).map_err(|e| Error::io(rules_path, e))?;
    parse_ruleset(
        &lexicon_text,
        &lexicon_path.display().to_string(),
        &rules_text,
        &rules_path.display().to_string(),
    )
}

pub fn parse_ruleset(
    lexicon_text: &str,
    lexicon_origin: &str,
    rules_text: &str,
    rules_origin: &str,
) -> Result<RuleSet> {
    let lexicon = parse_lexicon(lexicon_text, lexicon_origin)?;
    let rules = parse_rules(rules_text, rules_origin)?;
    RuleSet::build(lexicon, rules)
}

pub fn parse_lexicon(text: &str, origin: &str) -> Result<Vec<LexiconEntry>> {
    let mut entries = Vec::new();
    for (lineno0, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (phrase, ty) = match (parts.next(), parts.next(), parts.next()) {
            (Some(p), Some(t), None) if !p.trim().is_empty() => (p, t),
            _ => {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: lineno0 + 1,
                    msg: "expected `phrase<TAB>entity_type`".to_string(),
                })
            }
        };
        let entity_type: EntityType = ty.trim().parse().map_err(|_| Error::Parse {
            path: origin.to_string(),
            line: lineno0 + 1,
            msg: format!("unknown entity type {:?}", ty.trim()),
        })?;
        entries.push(LexiconEntry {
            phrase: phrase.split_whitespace().map(str::to_string).collect(),
            entity_type,
        });
    }
    Ok(entries)
}

pub fn parse_rules(text: &str, origin: &str) -> Result<Vec<Rule>> {
    let mut rules = Vec::new();
    for (lineno0, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        rules.push(RuleParser::new(line, origin, lineno0 + 1).parse()?);
    }
    Ok(rules)
}

struct RuleParser<'a> {
    line: &'a str,
    origin: &'a str,
    lineno: usize,
    pos: usize,
}

impl<'a> RuleParser<'a> {
    fn new(line: &'a str, origin: &'a str, lineno: usize) -> Self {
        RuleParser {
            line,
            origin,
            lineno,
            pos: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Syntax {
            path: self.origin.to_string(),
            line: self.lineno,
            col: self.pos + 1,
            msg: msg.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.line[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.line.len() - trimmed.len();
    }

    fn eat_keyword(&mut self, kw: &str) -> Result<()> {
        self.skip_ws();
        if self.rest().starts_with(kw) {
            self.pos += kw.len();
            Ok(())
        } else {
            Err(self.err(format!("expected {kw:?}")))
        }
    }

    fn eat_word(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .find(char::is_whitespace)
            .unwrap_or(rest.len());
        if end == 0 {
            return Err(self.err("expected a word"));
        }
        self.pos += end;
        Ok(&rest[..end])
    }

    fn parse(mut self) -> Result<Rule> {
        self.eat_keyword("RULE")?;
        let name = self.eat_word()?.to_string();
        self.eat_keyword("PRIORITY")?;
        let prio_word = self.eat_word()?;
        let prio_word = match prio_word.strip_suffix(':') {
            Some(w) => {
                // colon attached to the number
                w
            }
            None => {
                self.eat_keyword(":")?;
                prio_word
            }
        };
        let priority: i64 = prio_word
            .parse()
            .map_err(|_| self.err(format!("invalid priority {prio_word:?}")))?;

        let mut pattern = Vec::new();
        loop {
            self.skip_ws();
            if self.rest().starts_with("=>") {
                self.pos += 2;
                break;
            }
            if self.rest().is_empty() {
                return Err(self.err("expected `=>` before end of line"));
            }
            pattern.push(self.parse_atom(&name)?);
        }
        if pattern.is_empty() {
            return Err(self.err("pattern is empty"));
        }
        let action = self.parse_action()?;
        self.skip_ws();
        if !self.rest().is_empty() && !self.rest().starts_with('#') {
            return Err(self.err(format!("trailing input {:?}", self.rest())));
        }
        Ok(Rule {
            name,
            priority,
            pattern,
            action,
        })
    }

    fn parse_atom(&mut self, rule_name: &str) -> Result<PatternAtom> {
        self.skip_ws();
        let rest = self.rest();
        let atom = if let Some(after) = rest.strip_prefix('"') {
            let close = after
                .find('"')
                .ok_or_else(|| self.err("unterminated literal"))?;
            self.pos += 1 + close + 1;
            Atom::Literal(after[..close].to_lowercase())
        } else if let Some(after) = rest.strip_prefix('/') {
            let close = after
                .find('/')
                .ok_or_else(|| self.err("unterminated regex"))?;
            let src = &after[..close];
            self.pos += 1 + close + 1;
            let compiled = regex::Regex::new(&format!("^(?:{src})$")).map_err(|e| {
                self.err(format!("rule {rule_name:?}: invalid regex /{src}/: {e}"))
            })?;
            Atom::Regex(compiled)
        } else if let Some(after) = rest.strip_prefix("LEX(") {
            let close = after.find(')').ok_or_else(|| self.err("unterminated LEX("))?;
            let ty = after[..close].trim();
            self.pos += 4 + close + 1;
            Atom::Lex(
                ty.parse()
                    .map_err(|_| self.err(format!("unknown entity type {ty:?}")))?,
            )
        } else if let Some(after) = rest.strip_prefix("POS(") {
            let close = after.find(')').ok_or_else(|| self.err("unterminated POS("))?;
            let tag = after[..close].trim();
            self.pos += 4 + close + 1;
            Atom::Pos(
                tag.parse()
                    .map_err(|_| self.err(format!("unknown POS tag {tag:?}")))?,
            )
        } else if rest.starts_with("ANY") {
            self.pos += 3;
            Atom::Any
        } else {
            return Err(self.err(format!(
                "expected an atom, found {:?}",
                rest.split_whitespace().next().unwrap_or("")
            )));
        };
        let optional = self.rest().starts_with('?');
        if optional {
            self.pos += 1;
        }
        Ok(PatternAtom { atom, optional })
    }

    fn parse_action(&mut self) -> Result<RuleAction> {
        self.skip_ws();
        if self.rest().starts_with("ASSIGN") {
            self.pos += "ASSIGN".len();
            let ty = self.eat_word()?;
            let entity_type: EntityType = ty
                .parse()
                .map_err(|_| self.err(format!("unknown entity type {ty:?}")))?;
            self.eat_keyword("SPAN")?;
            let span_word = self.eat_word()?;
            let (i, j) = span_word
                .split_once("..")
                .ok_or_else(|| self.err(format!("expected `i..j`, found {span_word:?}")))?;
            let i: usize = i
                .parse()
                .map_err(|_| self.err(format!("invalid span start {i:?}")))?;
            let j: usize = j
                .parse()
                .map_err(|_| self.err(format!("invalid span end {j:?}")))?;
            Ok(RuleAction::Assign {
                entity_type,
                span: (i, j),
            })
        } else if self.rest().starts_with("RETYPE") {
            self.pos += "RETYPE".len();
            let ty = self.eat_word()?;
            Ok(RuleAction::Retype(ty.parse().map_err(|_| {
                self.err(format!("unknown entity type {ty:?}"))
            })?))
        } else if self.rest().starts_with("DELETE") {
            self.pos += "DELETE".len();
            Ok(RuleAction::Delete)
        } else {
            Err(self.err("expected ASSIGN, RETYPE or DELETE"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ruler::{apply_lexicon, apply_rules};
    use crate::types::{Sentence, Token};

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

    #[test]
    fn lexicon_line_parses_multi_token_phrase() {
        let entries =
            parse_lexicon("small vessel disease\tsmall_vessel_disease\n", "t").unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].phrase, vec!["small", "vessel", "disease"]);
        assert_eq!(entries[0].entity_type, EntityType::SmallVesselDisease);
    }

    #[test]
    fn lexicon_rejects_unknown_type() {
        let err = parse_lexicon("stroke\tcva\n", "lex.tsv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn rule_line_full_shape() {
        let rules = parse_rules(
            r#"RULE haem PRIORITY 90: /haemorrhagic|hemorrhagic/ LEX(stroke) => RETYPE haemorrhagic_stroke"#,
            "t",
        )
        .unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].name, "haem");
        assert_eq!(rules[0].priority, 90);
        assert_eq!(rules[0].pattern.len(), 2);
        assert_eq!(
            rules[0].action,
            RuleAction::Retype(EntityType::HaemorrhagicStroke)
        );
    }

    #[test]
    fn rule_assign_with_span_and_optional() {
        let rules = parse_rules(
            r#"RULE sub PRIORITY 70: "subdural" ANY? /collection|collections/ => ASSIGN subdural_haematoma SPAN 0..3"#,
            "t",
        )
        .unwrap();
        assert!(rules[0].pattern[1].optional);
        assert_eq!(
            rules[0].action,
            RuleAction::Assign {
                entity_type: EntityType::SubduralHaematoma,
                span: (0, 3)
            }
        );
    }

    #[test]
    fn malformed_regex_names_the_rule() {
        let err = parse_rules(r#"RULE bad PRIORITY 1: /([a-z/ => DELETE"#, "rules.txt").unwrap_err();
        match err {
            Error::Syntax { line, msg, .. } => {
                assert_eq!(line, 1);
                assert!(msg.contains("bad"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = parse_rules("RULE x PRIORITY one: ANY => DELETE", "rules.txt").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, .. }));
        let err = parse_rules("\n\nRULE x PRIORITY 1: => DELETE", "rules.txt").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 3, .. }));
    }

    #[test]
    fn duplicate_rule_name_is_a_load_error() {
        let text = "RULE a PRIORITY 1: ANY => DELETE\nRULE a PRIORITY 2: ANY => DELETE\n";
        // DELETE without LEX is invalid too, so use valid bodies.
        let text = text.replace("=> DELETE", "=> ASSIGN stroke SPAN 0..1");
        let err = parse_ruleset("", "lex", &text, "rules").unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }

    #[test]
    fn parsed_ruleset_end_to_end() {
        let lexicon = "stroke\tstroke\ncva\tstroke\n";
        let rules = r#"
# retype when an ischaemic cue precedes a bare stroke mention
RULE isch PRIORITY 90: /(?i:ischaemic|ischemic|thrombotic)/ LEX(stroke) => RETYPE ischaemic_stroke
RULE old PRIORITY 50: /(?i:old|mature)/ => ASSIGN time_old SPAN 0..1
"#;
        let rs = parse_ruleset(lexicon, "lex", rules, "rules").unwrap();
        let s = sentence("Old thrombotic cva noted");
        let mut diags = Vec::new();
        let got = apply_rules(&s, apply_lexicon(&s, &rs), &rs, &mut diags);
        assert_eq!(
            got,
            vec![
                crate::types::EntityMention::new(EntityType::TimeOld, 0, 0, 1),
                crate::types::EntityMention::new(EntityType::IschaemicStroke, 0, 1, 3),
            ]
        );
    }
}
