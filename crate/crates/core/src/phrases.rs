//! Longest-match phrase lookup over lowercased token sequences, shared by the
//! rule-based lexicon and the concept gazetteer.

use std::collections::HashMap;

/// Maps token phrases to a payload. Matching is left-to-right: at each
/// position the longest matching phrase wins and scanning resumes after it,
/// so the produced spans never overlap.
#[derive(Debug, Clone, Default)]
pub struct PhraseMatcher<T> {
    map: HashMap<Vec<String>, T>,
    max_len: usize,
}

impl<T> PhraseMatcher<T> {
    pub fn new() -> Self {
        PhraseMatcher {
            map: HashMap::new(),
            max_len: 0,
        }
    }

    /// Insert a phrase (tokens are lowercased here). Returns the previous
    /// payload if the phrase was already present.
    pub fn insert(&mut self, phrase: &[impl AsRef<str>], payload: T) -> Option<T> {
        let key: Vec<String> = phrase.iter().map(|t| t.as_ref().to_lowercase()).collect();
        assert!(!key.is_empty(), "phrase must be non-empty");
        self.max_len = self.max_len.max(key.len());
        self.map.insert(key, payload)
    }

    pub fn get_mut(&mut self, phrase: &[String]) -> Option<&mut T> {
        self.map.get_mut(phrase)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    /// Longest-match scan. `tokens_lower` must already be lowercased.
    pub fn find<'a>(&'a self, tokens_lower: &[String]) -> Vec<(usize, usize, &'a T)> {
        let n = tokens_lower.len();
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            let mut matched = false;
            let upper = self.max_len.min(n - i);
            for len in (1..=upper).rev() {
                if let Some(payload) = self.map.get(&tokens_lower[i..i + len]) {
                    out.push((i, i + len, payload));
                    i += len;
                    matched = true;
                    break;
                }
            }
            if !matched {
                i += 1;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lower(s: &str) -> Vec<String> {
        s.split_whitespace().map(|t| t.to_lowercase()).collect()
    }

    #[test]
    fn longest_match_wins() {
        let mut m = PhraseMatcher::new();
        m.insert(&["stroke"], 1);
        m.insert(&["ischaemic", "stroke"], 2);
        let hits = m.find(&lower("old ischaemic stroke"));
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].0, hits[0].1, *hits[0].2), (1, 3, 2));
    }

    #[test]
    fn scanning_resumes_after_match() {
        let mut m = PhraseMatcher::new();
        m.insert(&["small", "vessel", "disease"], 1);
        m.insert(&["disease"], 2);
        let hits = m.find(&lower("extensive small vessel disease today"));
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].0, hits[0].1), (1, 4));
    }

    #[test]
    fn matches_are_case_insensitive_via_normalization() {
        let mut m = PhraseMatcher::new();
        m.insert(&["Stroke"], 1);
        assert_eq!(m.find(&lower("STROKE")).len(), 1);
    }

    #[test]
    fn no_match_yields_empty() {
        let m: PhraseMatcher<u8> = PhraseMatcher::new();
        assert!(m.find(&lower("nothing here")).is_empty());
    }
}
