//! Shared text processing: one tokenizer for every metric and model, plus
//! n-gram extraction, Porter stemming, and the synonym table used by the
//! METEOR synonym stage.

mod porter;

pub use porter::stem;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::{Error, Result};

/// Lowercased tokens with no interior whitespace and no empties.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl std::ops::Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl From<TokenSeq> for Vec<String> {
    fn from(seq: TokenSeq) -> Vec<String> {
        seq.0
    }
}

/// Lowercases, splits on Unicode whitespace, and strips punctuation from
/// token edges. Interior punctuation (hyphens) survives; tokens that were
/// only punctuation vanish.
pub fn tokenize(text: &str) -> TokenSeq {
    TokenSeq(
        text.to_lowercase()
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
            .filter(|w| !w.is_empty())
            .map(String::from)
            .collect(),
    )
}

/// Sliding-window n-gram multiset over a token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts {
    pub n: usize,
    pub counts: BTreeMap<Vec<String>, usize>,
}

impl NGramCounts {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn get(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }
}

pub fn ngrams(tokens: &[String], n: usize) -> NGramCounts {
    assert!(n >= 1, "n-gram order must be at least 1");
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    NGramCounts { n, counts }
}

/// Disjoint synonym groups; two tokens are synonyms when they share a
/// group. Ships with the color-domain pairs the synthetic corpus uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymTable {
    groups: Vec<BTreeSet<String>>,
    lookup: BTreeMap<String, usize>,
}

impl SynonymTable {
    pub fn builtin() -> Self {
        SynonymTable::from_groups(vec![
            vec!["gray", "grey"],
            vec!["purple", "violet"],
            vec!["cyan", "turquoise"],
            vec!["dark", "deep"],
            vec!["light", "pale"],
        ])
        .expect("builtin groups are disjoint")
    }

    pub fn empty() -> Self {
        SynonymTable { groups: Vec::new(), lookup: BTreeMap::new() }
    }

    fn from_groups(raw: Vec<Vec<&str>>) -> Result<Self> {
        let mut table = SynonymTable::empty();
        for group in raw {
            table.add_group(group.into_iter().map(String::from))?;
        }
        Ok(table)
    }

    fn add_group(&mut self, tokens: impl Iterator<Item = String>) -> Result<()> {
        let id = self.groups.len();
        let mut group = BTreeSet::new();
        for tok in tokens {
            if tok.chars().any(char::is_whitespace) || tok.is_empty() {
                return Err(Error::Invalid(format!("synonym token {tok:?} is not a single word")));
            }
            if self.lookup.contains_key(&tok) {
                return Err(Error::Invalid(format!(
                    "synonym token {tok:?} appears in two groups; groups must be disjoint"
                )));
            }
            group.insert(tok);
        }
        if group.len() < 2 {
            return Err(Error::Invalid("synonym groups need at least 2 tokens".into()));
        }
        for tok in &group {
            self.lookup.insert(tok.clone(), id);
        }
        self.groups.push(group);
        Ok(())
    }

    /// Parses one group per line, tokens space-separated; `#` starts a
    /// comment line.
    pub fn from_str(text: &str) -> Result<Self> {
        let mut table = SynonymTable::empty();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            table.add_group(line.split_whitespace().map(|t| t.to_lowercase()))?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str(&text).map_err(|e| match e {
            Error::Invalid(msg) => Error::parse(path, 0, msg),
            other => other,
        })
    }

    pub fn group_id(&self, token: &str) -> Option<usize> {
        self.lookup.get(token).copied()
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        match (self.group_id(a), self.group_id(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_lowercases_and_strips_punctuation() {
        assert_eq!(tokenize("The DARK blue!").as_slice(), ["the", "dark", "blue"]);
        assert_eq!(tokenize("").as_slice(), [] as [&str; 0]);
        assert_eq!(tokenize("blue-green one").as_slice(), ["blue-green", "one"]);
        assert_eq!(tokenize("  ...  ?! ").as_slice(), [] as [&str; 0]);
        assert_eq!(tokenize("it's the #1 pick.").as_slice(), ["it's", "the", "1", "pick"]);
    }

    #[test]
    fn ngram_examples() {
        let toks = |s: &str| -> Vec<String> { s.split(' ').map(String::from).collect() };
        let uni = ngrams(&toks("a b a"), 1);
        assert_eq!(uni.get(&toks("a")), 2);
        assert_eq!(uni.get(&toks("b")), 1);
        let bi = ngrams(&toks("a b a"), 2);
        assert_eq!(bi.get(&toks("a b")), 1);
        assert_eq!(bi.get(&toks("b a")), 1);
        assert_eq!(bi.total(), 2);
        assert!(ngrams(&toks("a b a"), 4).counts.is_empty());
    }

    #[test]
    fn synonym_builtin_and_parsing() {
        let syn = SynonymTable::builtin();
        assert!(syn.are_synonyms("gray", "grey"));
        assert!(syn.are_synonyms("purple", "violet"));
        assert!(!syn.are_synonyms("gray", "violet"));
        assert!(!syn.are_synonyms("blue", "blue"), "no group membership, no synonymy");

        let parsed = SynonymTable::from_str("# colors\nGray grey\n\ncrimson scarlet red\n").unwrap();
        assert!(parsed.are_synonyms("gray", "grey"));
        assert!(parsed.are_synonyms("crimson", "red"));

        assert!(SynonymTable::from_str("a b\nb c\n").is_err(), "overlapping groups rejected");
        assert!(SynonymTable::from_str("alone\n").is_err());
    }

    proptest! {
        #[test]
        fn tokenize_idempotent_on_joined_output(text in ".{0,80}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join());
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn tokens_are_lowercase_and_nonempty(text in ".{0,80}") {
            for tok in &tokenize(&text) {
                prop_assert!(!tok.is_empty());
                prop_assert!(!tok.chars().any(char::is_whitespace));
                prop_assert_eq!(tok.to_lowercase(), tok.clone());
            }
        }

        #[test]
        fn ngram_count_sum_law(words in prop::collection::vec("[a-c]{1,2}", 0..12), n in 1usize..5) {
            let counts = ngrams(&words, n);
            let expected = words.len().saturating_sub(n - 1);
            let expected = if words.len() < n { 0 } else { expected };
            prop_assert_eq!(counts.total(), expected);
        }
    }
}
