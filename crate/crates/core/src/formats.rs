//! Grouped and ungrouped training/inference formats.
//!
//! Ungrouped target:
//!
//! ```text
//! - A.
//! - B.
//! ```
//!
//! Grouped target, one token-delimited group per input sentence with no
//! separator between groups:
//!
//! ```text
//! <s>- A.</s><s>- B.
//! - C.</s>
//! ```
//!
//! Inputs are the instruction, a newline, then the passage (ungrouped) or the
//! token-wrapped sentences (grouped). Parsing is strict: malformed output is
//! reported, never repaired.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Passage, Proposition, PropositionSet, SetMode};

pub const DEFAULT_INSTRUCTION: &str =
    "Split the passage into propositions: simple, self-contained sentences, each stating a single fact.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormatConfig {
    pub start_token: String,
    pub end_token: String,
    pub bullet: String,
    pub instruction: String,
}

impl Default for FormatConfig {
    fn default() -> Self {
        FormatConfig {
            start_token: "<s>".into(),
            end_token: "</s>".into(),
            bullet: "- ".into(),
            instruction: DEFAULT_INSTRUCTION.into(),
        }
    }
}

impl FormatConfig {
    pub fn validate(&self) -> Result<(), FormatError> {
        let bad = |reason: &str| Err(FormatError::InvalidConfig(reason.to_owned()));
        if self.start_token.is_empty() || self.end_token.is_empty() {
            return bad("sentence tokens must be non-empty");
        }
        if self.start_token == self.end_token {
            return bad("start and end tokens must differ");
        }
        if self.start_token.contains(&self.end_token) || self.end_token.contains(&self.start_token) {
            return bad("one sentence token contains the other");
        }
        if self.bullet.trim().is_empty() {
            return bad("bullet must contain a non-whitespace character");
        }
        Ok(())
    }

    fn bullet_marker(&self) -> &str {
        self.bullet.trim()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("invalid format config: {0}")]
    InvalidConfig(String),
    #[error("no gold propositions to render")]
    EmptyGold,
    #[error("grouped rendering needs grouped propositions")]
    NotGrouped,
    #[error("expected {expected} groups, found {found}")]
    GroupCountMismatch { expected: usize, found: usize },
    #[error("group {group} has no propositions")]
    EmptyGroup { group: usize },
    #[error("text {text:?} contains a sentence token")]
    TokenCollision { text: String },
    #[error("proposition {text:?} spans several lines")]
    MultilineProposition { text: String },
    #[error("unbalanced sentence tokens at byte {offset}: {detail}")]
    UnbalancedTokens { offset: usize, detail: String },
    #[error("unexpected text outside sentence tokens at byte {offset}")]
    StrayText { offset: usize },
    #[error("group {group} line {line:?} does not start with the bullet")]
    MissingBullet { group: usize, line: String },
    #[error("no bullet lines found")]
    NoPropositionsFound,
    #[error("n_sentences must be at least 1")]
    NoSentences,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    #[serde(rename = "input")]
    pub input_text: String,
    #[serde(rename = "target")]
    pub target_text: String,
    pub mode: SetMode,
    pub source_id: String,
}

fn check_proposition(p: &Proposition, cfg: &FormatConfig) -> Result<(), FormatError> {
    let text = p.text();
    if text.contains(&cfg.start_token) || text.contains(&cfg.end_token) {
        return Err(FormatError::TokenCollision { text: text.to_owned() });
    }
    if text.contains(['\n', '\r']) {
        return Err(FormatError::MultilineProposition { text: text.to_owned() });
    }
    Ok(())
}

fn bullet_lines<'a>(props: impl Iterator<Item = &'a Proposition>, cfg: &FormatConfig) -> String {
    props.map(|p| format!("{}{}", cfg.bullet, p.text())).collect::<Vec<_>>().join("\n")
}

pub fn render_ungrouped(
    passage: &Passage,
    gold: &PropositionSet,
    cfg: &FormatConfig,
) -> Result<TrainingRecord, FormatError> {
    cfg.validate()?;
    if gold.is_empty() {
        return Err(FormatError::EmptyGold);
    }
    for p in gold.iter() {
        check_proposition(p, cfg)?;
    }
    Ok(TrainingRecord {
        input_text: format!("{}\n{}", cfg.instruction, passage.text),
        target_text: bullet_lines(gold.iter(), cfg),
        mode: SetMode::Ungrouped,
        source_id: passage.id.clone(),
    })
}

/// Instruction plus the token-wrapped sentences; this is the model input of
/// the grouped format.
pub fn render_grouped_input(passage: &Passage, cfg: &FormatConfig) -> Result<String, FormatError> {
    cfg.validate()?;
    let mut input = format!("{}\n", cfg.instruction);
    for s in &passage.sentences {
        if s.text.contains(&cfg.start_token) || s.text.contains(&cfg.end_token) {
            return Err(FormatError::TokenCollision { text: s.text.clone() });
        }
        input.push_str(&cfg.start_token);
        input.push_str(&s.text);
        input.push_str(&cfg.end_token);
    }
    Ok(input)
}

pub fn render_grouped(
    passage: &Passage,
    gold: &PropositionSet,
    cfg: &FormatConfig,
) -> Result<TrainingRecord, FormatError> {
    cfg.validate()?;
    if gold.mode() != SetMode::Grouped {
        return Err(FormatError::NotGrouped);
    }
    if gold.groups().len() != passage.sentences.len() {
        return Err(FormatError::GroupCountMismatch { expected: passage.sentences.len(), found: gold.groups().len() });
    }
    let mut target = String::new();
    for (g, group) in gold.groups().iter().enumerate() {
        if group.is_empty() {
            return Err(FormatError::EmptyGroup { group: g });
        }
        for p in group {
            check_proposition(p, cfg)?;
        }
        target.push_str(&cfg.start_token);
        target.push_str(&bullet_lines(group.iter(), cfg));
        target.push_str(&cfg.end_token);
    }
    Ok(TrainingRecord {
        input_text: render_grouped_input(passage, cfg)?,
        target_text: target,
        mode: SetMode::Grouped,
        source_id: passage.id.clone(),
    })
}

/// Bullet text of one line, `None` for lines without the bullet.
fn strip_bullet<'a>(line: &'a str, cfg: &FormatConfig) -> Option<&'a str> {
    line.trim().strip_prefix(cfg.bullet_marker()).map(str::trim)
}

/// Parses grouped model output into `n_sentences` attributed groups.
pub fn parse_grouped_output(raw: &str, n_sentences: usize, cfg: &FormatConfig) -> Result<PropositionSet, FormatError> {
    cfg.validate()?;
    if n_sentences == 0 {
        return Err(FormatError::NoSentences);
    }
    let (start, end) = (cfg.start_token.as_str(), cfg.end_token.as_str());
    let starts = raw.matches(start).count();
    let ends = raw.matches(end).count();
    if starts != ends {
        return Err(FormatError::UnbalancedTokens {
            offset: raw.len(),
            detail: format!("{starts} start tokens vs {ends} end tokens"),
        });
    }

    let mut groups: Vec<Vec<Proposition>> = Vec::new();
    let mut pos = 0;
    loop {
        let rest = &raw[pos..];
        let skipped = rest.len() - rest.trim_start().len();
        pos += skipped;
        let rest = &raw[pos..];
        if rest.is_empty() {
            break;
        }
        if rest.starts_with(end) {
            return Err(FormatError::UnbalancedTokens { offset: pos, detail: "end token without start".into() });
        }
        if !rest.starts_with(start) {
            return Err(FormatError::StrayText { offset: pos });
        }
        let body_start = pos + start.len();
        let body_rest = &raw[body_start..];
        let next_end = body_rest.find(end);
        let next_start = body_rest.find(start);
        let body_len = match (next_end, next_start) {
            (Some(e), Some(s)) if s < e => {
                return Err(FormatError::UnbalancedTokens {
                    offset: body_start + s,
                    detail: "start token inside an open group".into(),
                })
            }
            (Some(e), _) => e,
            (None, _) => {
                return Err(FormatError::UnbalancedTokens { offset: pos, detail: "group is never closed".into() })
            }
        };
        let g = groups.len();
        let mut group = Vec::new();
        for line in raw[body_start..body_start + body_len].lines() {
            let line = line.trim_end();
            if line.trim().is_empty() {
                continue;
            }
            match strip_bullet(line, cfg) {
                Some("") => continue,
                Some(text) => group.push(Proposition::attributed(text, g).expect("non-empty")),
                None => return Err(FormatError::MissingBullet { group: g, line: line.to_owned() }),
            }
        }
        if group.is_empty() {
            return Err(FormatError::EmptyGroup { group: g });
        }
        groups.push(group);
        pos = body_start + body_len + end.len();
    }
    if groups.len() != n_sentences {
        return Err(FormatError::GroupCountMismatch { expected: n_sentences, found: groups.len() });
    }
    Ok(PropositionSet::from_groups(groups).expect("groups attributed by position"))
}

/// Parses bullet-list output. Lines without the bullet are ignored.
pub fn parse_ungrouped_output(raw: &str, cfg: &FormatConfig) -> Result<PropositionSet, FormatError> {
    cfg.validate()?;
    let props: Vec<&str> = raw.lines().filter_map(|l| strip_bullet(l, cfg)).filter(|t| !t.is_empty()).collect();
    if props.is_empty() {
        return Err(FormatError::NoPropositionsFound);
    }
    Ok(PropositionSet::ungrouped(props).expect("non-empty lines"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FormatConfig {
        FormatConfig::default()
    }

    #[test]
    fn ungrouped_rendering() {
        let passage = Passage::new("p", "A. B.");
        let rec = render_ungrouped(&passage, &PropositionSet::ungrouped(["A.", "B."]).unwrap(), &cfg()).unwrap();
        assert_eq!(rec.target_text, "- A.\n- B.");
        assert_eq!(rec.input_text, format!("{DEFAULT_INSTRUCTION}\nA. B."));
        assert_eq!(rec.mode, SetMode::Ungrouped);
        let one = render_ungrouped(&passage, &PropositionSet::ungrouped(["A."]).unwrap(), &cfg()).unwrap();
        assert_eq!(one.target_text, "- A.");
        let empty = PropositionSet::ungrouped(Vec::<&str>::new()).unwrap();
        assert_eq!(render_ungrouped(&passage, &empty, &cfg()), Err(FormatError::EmptyGold));
    }

    #[test]
    fn grouped_rendering() {
        let passage = Passage::new("p", "Alpha one. Beta two.");
        let gold = PropositionSet::grouped(vec![vec!["A."], vec!["B.", "C."]]).unwrap();
        let rec = render_grouped(&passage, &gold, &cfg()).unwrap();
        assert_eq!(rec.target_text, "<s>- A.</s><s>- B.\n- C.</s>");
        assert!(rec.input_text.ends_with("\n<s>Alpha one.</s><s>Beta two.</s>"));

        let single = Passage::new("q", "Only one.");
        let rec = render_grouped(&single, &PropositionSet::grouped(vec![vec!["A."]]).unwrap(), &cfg()).unwrap();
        assert_eq!(rec.target_text, "<s>- A.</s>");

        let wrong = PropositionSet::grouped(vec![vec!["A."]]).unwrap();
        assert_eq!(
            render_grouped(&passage, &wrong, &cfg()),
            Err(FormatError::GroupCountMismatch { expected: 2, found: 1 })
        );
        let hole = PropositionSet::grouped(vec![vec!["A."], vec![]]).unwrap();
        assert_eq!(render_grouped(&passage, &hole, &cfg()), Err(FormatError::EmptyGroup { group: 1 }));
        let flat = PropositionSet::ungrouped(["A.", "B."]).unwrap();
        assert_eq!(render_grouped(&passage, &flat, &cfg()), Err(FormatError::NotGrouped));
    }

    #[test]
    fn token_collision_rejected() {
        let passage = Passage::new("p", "One.");
        let gold = PropositionSet::grouped(vec![vec!["A <s> b."]]).unwrap();
        assert!(matches!(render_grouped(&passage, &gold, &cfg()), Err(FormatError::TokenCollision { .. })));
        let bad_sentence = Passage::new("p", "One </s> two.");
        let gold = PropositionSet::grouped(vec![vec!["A."]]).unwrap();
        assert!(matches!(render_grouped(&bad_sentence, &gold, &cfg()), Err(FormatError::TokenCollision { .. })));
        let multi = PropositionSet::ungrouped(["A\nB"]).unwrap();
        assert!(matches!(render_ungrouped(&passage, &multi, &cfg()), Err(FormatError::MultilineProposition { .. })));
    }

    #[test]
    fn grouped_parse_errors() {
        assert_eq!(
            parse_grouped_output("<s>- A.</s><s>- B.</s>", 3, &cfg()),
            Err(FormatError::GroupCountMismatch { expected: 3, found: 2 })
        );
        assert!(matches!(
            parse_grouped_output("<s>- A.<s>- B.</s>", 2, &cfg()),
            Err(FormatError::UnbalancedTokens { .. })
        ));
        assert!(matches!(
            parse_grouped_output("<s>- A.<s>- B.</s></s>", 1, &cfg()),
            Err(FormatError::UnbalancedTokens { offset: 7, .. })
        ));
        assert!(matches!(
            parse_grouped_output("</s>- A.<s>", 1, &cfg()),
            Err(FormatError::UnbalancedTokens { offset: 0, .. })
        ));
        assert_eq!(parse_grouped_output("<s></s>", 1, &cfg()), Err(FormatError::EmptyGroup { group: 0 }));
        assert_eq!(parse_grouped_output("<s>- \n</s>", 1, &cfg()), Err(FormatError::EmptyGroup { group: 0 }));
        assert_eq!(parse_grouped_output("x<s>- A.</s>", 1, &cfg()), Err(FormatError::StrayText { offset: 0 }));
        assert!(matches!(
            parse_grouped_output("<s>A.</s>", 1, &cfg()),
            Err(FormatError::MissingBullet { group: 0, .. })
        ));
        assert_eq!(parse_grouped_output("<s>- A.</s>", 0, &cfg()), Err(FormatError::NoSentences));
    }

    #[test]
    fn grouped_parse_tolerates_whitespace() {
        let set = parse_grouped_output("  <s>\n- A.  \n\n- B.\n</s>\n<s>- C.</s>\n", 2, &cfg()).unwrap();
        assert_eq!(set.groups()[0].iter().map(|p| p.text()).collect::<Vec<_>>(), vec!["A.", "B."]);
        assert_eq!(set.groups()[1][0].sentence_index(), Some(1));
    }

    #[test]
    fn ungrouped_parse() {
        let texts =
            |raw: &str| parse_ungrouped_output(raw, &cfg()).map(|s| s.texts().map(str::to_owned).collect::<Vec<_>>());
        assert_eq!(texts("- A.\n- B.").unwrap(), vec!["A.", "B."]);
        assert_eq!(texts("\n- A.\n\n- B.\n").unwrap(), vec!["A.", "B."]);
        assert_eq!(texts("no bullets here"), Err(FormatError::NoPropositionsFound));
        let set = parse_ungrouped_output("- A.", &cfg()).unwrap();
        assert!(set.iter().all(|p| p.sentence_index().is_none()));
    }

    #[test]
    fn config_validation() {
        let same = FormatConfig { end_token: "<s>".into(), ..cfg() };
        assert!(matches!(same.validate(), Err(FormatError::InvalidConfig(_))));
        let empty = FormatConfig { start_token: String::new(), ..cfg() };
        assert!(empty.validate().is_err());
        let blank_bullet = FormatConfig { bullet: "  ".into(), ..cfg() };
        assert!(blank_bullet.validate().is_err());
    }

    #[test]
    fn training_record_json_schema() {
        let rec = TrainingRecord {
            input_text: "i".into(),
            target_text: "t".into(),
            mode: SetMode::Grouped,
            source_id: "x".into(),
        };
        assert_eq!(
            serde_json::to_string(&rec).unwrap(),
            r#"{"input":"i","target":"t","mode":"grouped","source_id":"x"}"#
        );
    }
}
