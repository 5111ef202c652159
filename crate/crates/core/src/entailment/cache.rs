use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use lru::LruCache;

use super::{EntailmentScore, EntailmentScorer, ScoreError, ScorePair};

type Key = (String, String);

/// LRU cache in front of another scorer.
///
/// Keys are the full `(premise, claim)` strings, so a hit always returns the
/// exact score stored for that pair.
pub struct CachedScorer<S> {
    inner: S,
    cache: Mutex<LruCache<Key, EntailmentScore>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<S: EntailmentScorer> CachedScorer<S> {
    pub fn new(inner: S, capacity: NonZeroUsize) -> Self {
        CachedScorer {
            inner,
            cache: Mutex::new(LruCache::new(capacity)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lookup(&self, premise: &str, claim: &str) -> Option<EntailmentScore> {
        let key = (premise.to_owned(), claim.to_owned());
        self.cache.lock().unwrap().get(&key).copied()
    }
}

impl<S: EntailmentScorer> EntailmentScorer for CachedScorer<S> {
    fn score(&self, premise: &str, claim: &str) -> Result<EntailmentScore, ScoreError> {
        if let Some(hit) = self.lookup(premise, claim) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let score = self.inner.score(premise, claim)?;
        self.cache.lock().unwrap().put((premise.to_owned(), claim.to_owned()), score);
        Ok(score)
    }

    fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<EntailmentScore>, ScoreError> {
        let mut out: Vec<Option<EntailmentScore>> = Vec::with_capacity(pairs.len());
        // distinct missing pairs, remembering the first position of each
        let mut pending: Vec<ScorePair<'_>> = Vec::new();
        let mut first_pos: Vec<usize> = Vec::new();
        let mut slot_of: HashMap<ScorePair<'_>, usize> = HashMap::new();
        {
            let mut cache = self.cache.lock().unwrap();
            for (i, &(p, c)) in pairs.iter().enumerate() {
                match cache.get(&(p.to_owned(), c.to_owned())) {
                    Some(&hit) => {
                        self.hits.fetch_add(1, Ordering::Relaxed);
                        out.push(Some(hit));
                    }
                    None => {
                        slot_of.entry((p, c)).or_insert_with(|| {
                            pending.push((p, c));
                            first_pos.push(i);
                            pending.len() - 1
                        });
                        out.push(None);
                    }
                }
            }
        }
        if !pending.is_empty() {
            self.misses.fetch_add(pending.len() as u64, Ordering::Relaxed);
            let fresh = self.inner.score_batch(&pending).map_err(|e| match e {
                ScoreError::Batch { offset, source } => {
                    ScoreError::Batch { offset: first_pos.get(offset).copied().unwrap_or(offset), source }
                }
                other => other,
            })?;
            let mut cache = self.cache.lock().unwrap();
            for (&(p, c), &score) in pending.iter().zip(&fresh) {
                cache.put((p.to_owned(), c.to_owned()), score);
            }
            for (slot, &(p, c)) in out.iter_mut().zip(pairs) {
                if slot.is_none() {
                    *slot = Some(fresh[slot_of[&(p, c)]]);
                }
            }
        }
        Ok(out.into_iter().map(|s| s.expect("every slot filled")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entailment::LexicalOracle;
    use std::sync::atomic::AtomicUsize;

    struct Counting {
        calls: AtomicUsize,
    }

    impl EntailmentScorer for Counting {
        fn score(&self, premise: &str, claim: &str) -> Result<EntailmentScore, ScoreError> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            LexicalOracle.score(premise, claim)
        }
    }

    fn cached(cap: usize) -> CachedScorer<Counting> {
        CachedScorer::new(Counting { calls: AtomicUsize::new(0) }, NonZeroUsize::new(cap).unwrap())
    }

    #[test]
    fn hit_returns_stored_score() {
        let s = cached(8);
        let a = s.score("a b", "a c").unwrap();
        let b = s.score("a b", "a c").unwrap();
        assert_eq!(a, b);
        assert_eq!(s.inner().calls.load(Ordering::Relaxed), 1);
        assert_eq!((s.hits(), s.misses()), (1, 1));
    }

    #[test]
    fn batch_dedupes_and_fills() {
        let s = cached(8);
        s.score("x", "x").unwrap();
        let pairs = [("a b", "a"), ("x", "x"), ("a b", "a"), ("a b", "c")];
        let got = s.score_batch(&pairs).unwrap();
        let want = LexicalOracle.score_batch(&pairs).unwrap();
        assert_eq!(got, want);
        // one earlier call, then two distinct misses
        assert_eq!(s.inner().calls.load(Ordering::Relaxed), 3);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn evicts_least_recently_used() {
        let s = cached(2);
        s.score("a", "a").unwrap();
        s.score("b", "b").unwrap();
        s.score("a", "a").unwrap();
        s.score("c", "c").unwrap();
        assert_eq!(s.len(), 2);
        s.score("b", "b").unwrap();
        assert_eq!(s.inner().calls.load(Ordering::Relaxed), 4);
    }

    #[test]
    fn batch_error_reports_original_index() {
        let s = cached(8);
        s.score("ok", "ok").unwrap();
        match s.score_batch(&[("ok", "ok"), ("a", "a"), ("", "z")]) {
            Err(ScoreError::Batch { offset: 2, source }) => {
                assert!(matches!(*source, ScoreError::EmptyInput))
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
