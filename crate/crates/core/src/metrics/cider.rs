//! CIDEr: consensus scoring via TF-IDF n-gram cosine similarity.
//!
//! Each corpus instance contributes one "document", the union of its
//! reference n-grams, to the IDF statistics. N-grams absent from the table
//! are treated as occurring in a single document, so rare wording is never
//! rewarded with unbounded weight.

use std::collections::BTreeMap;

use crate::corpus::Corpus;
use crate::textproc::ngrams;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CiderParams {
    pub max_n: usize,
    /// Per-n weights, summing to 1.
    pub weights: Vec<f64>,
    pub scale: f64,
}

impl CiderParams {
    pub fn with_max_n(max_n: usize) -> Self {
        assert!(max_n >= 1, "CIDEr needs max_n >= 1");
        CiderParams {
            max_n,
            weights: vec![1.0 / max_n as f64; max_n],
            scale: 10.0,
        }
    }
}

impl Default for CiderParams {
    fn default() -> Self {
        CiderParams::with_max_n(4)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    /// tables[k] maps (k+1)-grams to their idf weight.
    tables: Vec<BTreeMap<Vec<String>, f64>>,
    num_documents: usize,
}

impl IdfTable {
    pub fn num_documents(&self) -> usize {
        self.num_documents
    }

    pub fn max_n(&self) -> usize {
        self.tables.len()
    }

    /// ln(D / df), where unseen n-grams get df = 1.
    pub fn idf(&self, gram: &[String]) -> f64 {
        let stored = self
            .tables
            .get(gram.len().wrapping_sub(1))
            .and_then(|t| t.get(gram));
        match stored {
            Some(&v) => v,
            None => (self.num_documents as f64).ln(),
        }
    }
}

pub fn compute_idf(corpus: &Corpus, max_n: usize) -> Result<IdfTable> {
    assert!(max_n >= 1, "CIDEr needs max_n >= 1");
    let documents: Vec<&_> = corpus
        .instances
        .iter()
        .filter(|inst| inst.references.iter().any(|r| !r.trim().is_empty()))
        .collect();
    if documents.is_empty() {
        return Err(Error::Usage(
            "idf table needs a corpus with at least one referenced instance".into(),
        ));
    }
    let d = documents.len() as f64;
    let mut tables = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let mut df: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        for inst in &documents {
            let mut seen: BTreeMap<Vec<String>, ()> = BTreeMap::new();
            for reference in &inst.references {
                let toks = crate::textproc::tokenize(reference);
                for gram in ngrams(&toks, n).counts.into_keys() {
                    seen.insert(gram, ());
                }
            }
            for gram in seen.into_keys() {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
        tables.push(
            df.into_iter()
                .map(|(gram, count)| (gram, (d / count as f64).ln()))
                .collect(),
        );
    }
    Ok(IdfTable {
        tables,
        num_documents: documents.len(),
    })
}

fn tfidf_vector(tokens: &[String], n: usize, idf: &IdfTable) -> BTreeMap<Vec<String>, f64> {
    ngrams(tokens, n)
        .counts
        .into_iter()
        .map(|(gram, count)| {
            let w = count as f64 * idf.idf(&gram);
            (gram, w)
        })
        .collect()
}

fn norm(v: &BTreeMap<Vec<String>, f64>) -> f64 {
    v.values().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(a: &BTreeMap<Vec<String>, f64>, b: &BTreeMap<Vec<String>, f64>) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a
        .iter()
        .filter_map(|(gram, x)| b.get(gram).map(|y| x * y))
        .sum();
    dot / (na * nb)
}

pub fn cider(
    candidate: &[String],
    references: &[Vec<String>],
    idf: &IdfTable,
    params: &CiderParams,
) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::Usage("cider requires at least one reference".into()));
    }
    assert_eq!(
        params.weights.len(),
        params.max_n,
        "CIDEr weights must cover 1..=max_n"
    );
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let mut score = 0.0;
    for (n, &w) in (1..=params.max_n).zip(&params.weights) {
        let cand_vec = tfidf_vector(candidate, n, idf);
        let mean: f64 = references
            .iter()
            .map(|r| cosine(&cand_vec, &tfidf_vector(r, n, idf)))
            .sum::<f64>()
            / references.len() as f64;
        score += w * mean;
    }
    Ok(params.scale * score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Color, ColorContext, Corpus, EvalInstance};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        if s.is_empty() {
            Vec::new()
        } else {
            s.split(' ').map(String::from).collect()
        }
    }

    fn instance(id: &str, refs: &[&str]) -> EvalInstance {
        let grey = Color::new(0.0, 0.0, 0.5).unwrap();
        EvalInstance {
            context: ColorContext {
                context_id: id.to_string(),
                pair_id: None,
                colors: [grey, grey, grey],
                target_index: 0,
            },
            candidates: Vec::new(),
            references: refs.iter().map(|r| r.to_string()).collect(),
        }
    }

    fn corpus(instances: Vec<EvalInstance>) -> Corpus {
        Corpus {
            instances,
            config_line: None,
        }
    }

    #[test]
    fn identity_with_positive_idf_scores_scale() {
        let c = corpus(vec![
            instance("c0", &["the dark blue one"]),
            instance("c1", &["bright red fish thing"]),
        ]);
        let idf = compute_idf(&c, 4).unwrap();
        let cand = toks("the dark blue one");
        let got = cider(&cand, &[cand.clone()], &idf, &CiderParams::default()).unwrap();
        assert_abs_diff_eq!(got, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn disjoint_ngrams_score_zero() {
        let c = corpus(vec![
            instance("c0", &["the dark blue one"]),
            instance("c1", &["bright red fish thing"]),
        ]);
        let idf = compute_idf(&c, 4).unwrap();
        let got = cider(&toks("purple"), &[toks("the dark blue one")], &idf, &CiderParams::default()).unwrap();
        assert_eq!(got, 0.0);
    }

    #[test]
    fn all_zero_idf_hits_vector_guard() {
        // Every candidate n-gram appears in both documents, so idf = 0
        // everywhere and the candidate vector vanishes.
        let c = corpus(vec![
            instance("c0", &["the blue one"]),
            instance("c1", &["the blue one"]),
        ]);
        let idf = compute_idf(&c, 4).unwrap();
        let cand = toks("the blue one");
        let got = cider(&cand, &[cand.clone()], &idf, &CiderParams::default()).unwrap();
        assert_eq!(got, 0.0);
    }

    #[test]
    fn idf_values_match_direct_formula() {
        let mut instances = vec![instance("c0", &["unique wording here today"])];
        for k in 1..10 {
            instances.push(instance(&format!("c{k}"), &["shared phrase every time"]));
        }
        let c = corpus(instances);
        let idf = compute_idf(&c, 2).unwrap();
        assert_eq!(idf.num_documents(), 10);
        assert_abs_diff_eq!(idf.idf(&toks("unique")), 10f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(idf.idf(&toks("unique wording")), 10f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            idf.idf(&toks("shared")),
            (10f64 / 9.0).ln(),
            epsilon = 1e-12
        );
        // Unseen n-grams fall back to df = 1.
        assert_abs_diff_eq!(idf.idf(&toks("never seen")), 10f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn idf_of_universal_ngram_is_zero() {
        let c = corpus(vec![
            instance("c0", &["blue one", "extra words"]),
            instance("c1", &["blue one"]),
        ]);
        let idf = compute_idf(&c, 1).unwrap();
        assert_eq!(idf.idf(&toks("blue")), 0.0);
        assert_eq!(idf.idf(&toks("one")), 0.0);
        assert!(idf.idf(&toks("extra")) > 0.0);
    }

    #[test]
    fn idf_build_is_deterministic() {
        let c = corpus(vec![
            instance("c0", &["the dark blue one"]),
            instance("c1", &["bright red fish thing"]),
        ]);
        assert_eq!(compute_idf(&c, 4).unwrap(), compute_idf(&c, 4).unwrap());
    }

    #[test]
    fn empty_inputs() {
        let c = corpus(vec![instance("c0", &["blue"])]);
        let idf = compute_idf(&c, 4).unwrap();
        assert_eq!(
            cider(&toks(""), &[toks("blue")], &idf, &CiderParams::default()).unwrap(),
            0.0
        );
        assert!(matches!(
            cider(&toks("blue"), &[], &idf, &CiderParams::default()),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            compute_idf(&corpus(vec![]), 4),
            Err(Error::Usage(_))
        ));
    }

    fn phrase(max: usize) -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec("[a-d]", 0..max)
    }

    proptest! {
        #[test]
        fn score_within_scale(cand in phrase(8), refs in prop::collection::vec(phrase(8), 1..4)) {
            let c = corpus(vec![
                instance("c0", &["a b c d"]),
                instance("c1", &["c d a a"]),
                instance("c2", &["b b d c"]),
            ]);
            let idf = compute_idf(&c, 4).unwrap();
            let params = CiderParams::default();
            let s = cider(&cand, &refs, &idf, &params).unwrap();
            prop_assert!(s >= 0.0 && s <= params.scale + 1e-9);
        }

        #[test]
        fn reference_order_changes_nothing(cand in phrase(8), refs in prop::collection::vec(phrase(8), 1..4)) {
            let c = corpus(vec![
                instance("c0", &["a b c d"]),
                instance("c1", &["c d a a"]),
            ]);
            let idf = compute_idf(&c, 4).unwrap();
            let mut rev = refs.clone();
            rev.reverse();
            let a = cider(&cand, &refs, &idf, &CiderParams::default()).unwrap();
            let b = cider(&cand, &rev, &idf, &CiderParams::default()).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
