//! Sentence-level BLEU: clipped modified n-gram precision with a brevity
//! penalty. Zero counts at order n >= 2 get epsilon numerator smoothing,
//! so BLEU-1 is smoothing-free. Orders the candidate is too short to
//! instantiate count as vacuously perfect.

use crate::textproc::ngrams;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct BleuParams {
    pub max_n: usize,
    /// Per-order weights; must sum to 1.
    pub weights: Vec<f64>,
    /// Added to the numerator when a precision count is zero, n >= 2 only.
    pub smoothing_epsilon: f64,
}

impl BleuParams {
    pub fn with_max_n(max_n: usize) -> Self {
        assert!(max_n >= 1, "BLEU needs max_n >= 1");
        BleuParams {
            max_n,
            weights: vec![1.0 / max_n as f64; max_n],
            smoothing_epsilon: 0.1,
        }
    }
}

impl Default for BleuParams {
    fn default() -> Self {
        BleuParams::with_max_n(4)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    pub score: f64,
    pub per_n_precisions: Vec<f64>,
    pub brevity_penalty: f64,
}

pub fn bleu(candidate: &[String], references: &[Vec<String>], params: &BleuParams) -> Result<BleuScore> {
    if references.is_empty() {
        return Err(Error::Usage("bleu requires at least one reference".into()));
    }
    assert!(
        (params.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9
            && params.weights.len() == params.max_n,
        "BLEU weights must be one per order and sum to 1"
    );
    if candidate.is_empty() {
        return Ok(BleuScore {
            score: 0.0,
            per_n_precisions: vec![0.0; params.max_n],
            brevity_penalty: 0.0,
        });
    }

    let c = candidate.len();
    let mut precisions = Vec::with_capacity(params.max_n);
    for n in 1..=params.max_n {
        let cand_grams = ngrams(candidate, n);
        let mut clipped = 0usize;
        for (gram, &count) in &cand_grams.counts {
            let max_ref = references.iter().map(|r| ngrams(r, n).get(gram)).max().unwrap_or(0);
            clipped += count.min(max_ref);
        }
        let denom = c.saturating_sub(n - 1);
        if denom == 0 {
            // The candidate has no n-grams of this order, so the precision
            // constraint is vacuous and must not drag the geometric mean down.
            precisions.push(1.0);
            continue;
        }
        let mut numer = clipped as f64;
        if clipped == 0 && n >= 2 {
            numer += params.smoothing_epsilon;
        }
        precisions.push(numer / denom as f64);
    }

    // Reference length nearest the candidate length; ties pick the shorter.
    let r = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap();
    let brevity_penalty = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };

    let score = if precisions.iter().any(|&p| p == 0.0) {
        0.0
    } else {
        let log_sum: f64 = precisions
            .iter()
            .zip(&params.weights)
            .map(|(p, w)| w * p.ln())
            .sum();
        brevity_penalty * log_sum.exp()
    };
    Ok(BleuScore { score, per_n_precisions: precisions, brevity_penalty })
}
