//! ROUGE-L: longest-common-subsequence F-score, maximized over references.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct RougeParams {
    /// Recall emphasis in the F-score.
    pub beta: f64,
}

impl Default for RougeParams {
    fn default() -> Self {
        RougeParams { beta: 1.2 }
    }
}

/// Classic dynamic-programming LCS length.
pub fn lcs_length(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &[String], references: &[Vec<String>], params: &RougeParams) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::Usage("rouge_l requires at least one reference".into()));
    }
    assert!(params.beta > 0.0, "ROUGE-L beta must be positive");
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let beta2 = params.beta * params.beta;
    let mut best: f64 = 0.0;
    for reference in references {
        if reference.is_empty() {
            continue;
        }
        let l = lcs_length(candidate, reference) as f64;
        if l == 0.0 {
            continue;
        }
        let recall = l / reference.len() as f64;
        let precision = l / candidate.len() as f64;
        let f = (1.0 + beta2) * recall * precision / (recall + beta2 * precision);
        best = best.max(f);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        if s.is_empty() {
            Vec::new()
        } else {
            s.split(' ').map(String::from).collect()
        }
    }

    #[test]
    fn identity_scores_one() {
        let cand = toks("the dark blue one");
        assert_abs_diff_eq!(
            rouge_l(&cand, &[cand.clone()], &RougeParams::default()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn f_beta_reference_value() {
        let got = rouge_l(
            &toks("the blue one"),
            &[toks("the dark blue one")],
            &RougeParams::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(got, 0.8356164383561644, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_tokens_score_zero() {
        assert_eq!(
            rouge_l(&toks("red fish"), &[toks("blue one")], &RougeParams::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(rouge_l(&toks(""), &[toks("blue")], &RougeParams::default()).unwrap(), 0.0);
        assert!(matches!(
            rouge_l(&toks("blue"), &[], &RougeParams::default()),
            Err(Error::Usage(_))
        ));
    }

    /// Exponential-time reference implementation used only for testing.
    fn lcs_brute(a: &[String], b: &[String]) -> usize {
        if a.is_empty() || b.is_empty() {
            0
        } else if a[0] == b[0] {
            1 + lcs_brute(&a[1..], &b[1..])
        } else {
            lcs_brute(&a[1..], b).max(lcs_brute(a, &b[1..]))
        }
    }

    fn token_vec(max: usize) -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec("[a-c]", 0..max)
    }

    proptest! {
        #[test]
        fn lcs_matches_brute_force(a in token_vec(8), b in token_vec(8)) {
            prop_assert_eq!(lcs_length(&a, &b), lcs_brute(&a, &b));
        }

        #[test]
        fn score_in_unit_interval(cand in token_vec(8), refs in prop::collection::vec(token_vec(8), 1..4)) {
            let s = rouge_l(&cand, &refs, &RougeParams::default()).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn reference_order_is_irrelevant(cand in token_vec(8), refs in prop::collection::vec(token_vec(8), 1..4)) {
            let mut rev = refs.clone();
            rev.reverse();
            prop_assert_eq!(
                rouge_l(&cand, &refs, &RougeParams::default()).unwrap(),
                rouge_l(&cand, &rev, &RougeParams::default()).unwrap()
            );
        }

        #[test]
        fn added_reference_never_hurts(cand in token_vec(8), refs in prop::collection::vec(token_vec(8), 1..3), extra in token_vec(8)) {
            let before = rouge_l(&cand, &refs, &RougeParams::default()).unwrap();
            let mut more = refs.clone();
            more.push(extra);
            let after = rouge_l(&cand, &more, &RougeParams::default()).unwrap();
            prop_assert!(after >= before);
        }

        #[test]
        fn self_reference_forces_one(cand in prop::collection::vec("[a-c]", 1..8), refs in prop::collection::vec(token_vec(8), 0..3)) {
            let mut refs = refs;
            refs.push(cand.clone());
            let s = rouge_l(&cand, &refs, &RougeParams::default()).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
