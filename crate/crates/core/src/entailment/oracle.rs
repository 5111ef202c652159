use std::collections::HashSet;

use super::{check_pair, EntailmentScore, EntailmentScorer, ScoreError};
use crate::text::normalize_tokens;

/// Fraction of the claim's distinct tokens that also occur in the premise.
///
/// Both sides go through [`normalize_tokens`] and are compared as sets. A
/// claim with no tokens left after normalization scores 1.
pub fn lexical_oracle_score(premise: &str, claim: &str) -> EntailmentScore {
    let claim: HashSet<String> = normalize_tokens(claim).into_iter().collect();
    if claim.is_empty() {
        return EntailmentScore::ONE;
    }
    let premise: HashSet<String> = normalize_tokens(premise).into_iter().collect();
    let hits = claim.iter().filter(|t| premise.contains(*t)).count();
    EntailmentScore::clamped(hits as f64 / claim.len() as f64)
}

/// Deterministic offline scorer backed by [`lexical_oracle_score`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalOracle;

impl EntailmentScorer for LexicalOracle {
    fn score(&self, premise: &str, claim: &str) -> Result<EntailmentScore, ScoreError> {
        check_pair(premise, claim)?;
        Ok(lexical_oracle_score(premise, claim))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(p: &str, c: &str) -> f64 {
        lexical_oracle_score(p, c).value()
    }

    #[test]
    fn containment_and_disjoint() {
        assert_eq!(s("the cat sat on the mat", "the cat sat"), 1.0);
        assert_eq!(s("The price is low.", "the price is low"), 1.0);
        assert_eq!(s("a b", "c"), 0.0);
    }

    #[test]
    fn partial_overlap() {
        // claim {a, x}; only a appears in the premise
        assert_eq!(s("a b c d", "a x"), 0.5);
        // claim {the, books, are, cheap}; the and books appear
        assert_eq!(s("The books download fast.", "The books are cheap."), 0.5);
    }

    #[test]
    fn punctuation_only_claim_scores_one() {
        assert_eq!(s("anything", "?!"), 1.0);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(LexicalOracle.score("", "x"), Err(ScoreError::EmptyInput)));
        assert!(matches!(LexicalOracle.score("x", "  "), Err(ScoreError::EmptyInput)));
    }

    #[test]
    fn batch_matches_single() {
        let pairs = [("a b", "a"), ("a b", "c"), ("a b", "a")];
        let got = LexicalOracle.score_batch(&pairs).unwrap();
        assert_eq!(got, vec![EntailmentScore::ONE, EntailmentScore::ZERO, EntailmentScore::ONE]);
        assert!(LexicalOracle.score_batch(&[]).unwrap().is_empty());
        match LexicalOracle.score_batch(&[("a", "b"), ("", "b")]) {
            Err(ScoreError::Batch { offset: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn bounded(p in "\\PC{0,40}", c in "\\PC{0,40}") {
            let v = s(&p, &c);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn reflexive(x in "[a-zA-Z ,.'!]{1,40}") {
            prop_assert_eq!(s(&x, &x), 1.0);
        }

        #[test]
        fn monotone_in_premise(p in "[a-e ]{0,20}", extra in "[a-h ]{0,20}", c in "[a-h ]{1,20}") {
            let base = s(&p, &c);
            let extended = s(&format!("{p} {extra}"), &c);
            prop_assert!(extended >= base);
        }
    }
}
