//! METEOR: unigram alignment with a fragmentation penalty.
//!
//! Tokens may match exactly, by shared stem, or by synonym group, depending on
//! which stages are enabled. Among alignments with the maximal number of
//! matches the one with the fewest chunks is chosen; the search is exact,
//! which is affordable because referring expressions are short.

use crate::textproc::{stem, SynonymTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchStage {
    Exact,
    Stem,
    Synonym,
}

#[derive(Debug, Clone)]
pub struct MeteorParams {
    /// Recall weight in the harmonic mean.
    pub alpha: f64,
    /// Fragmentation exponent.
    pub beta: f64,
    /// Fragmentation weight.
    pub gamma: f64,
    pub stages: Vec<MatchStage>,
}

impl Default for MeteorParams {
    fn default() -> Self {
        MeteorParams {
            alpha: 0.9,
            beta: 3.0,
            gamma: 0.5,
            stages: vec![MatchStage::Exact, MatchStage::Stem, MatchStage::Synonym],
        }
    }
}

fn pair_allowed(a: &str, b: &str, stages: &[MatchStage], syn: &SynonymTable) -> bool {
    stages.iter().any(|stage| match stage {
        MatchStage::Exact => a == b,
        MatchStage::Stem => stem(a) == stem(b),
        MatchStage::Synonym => syn.are_synonyms(a, b),
    })
}

struct AlignSearch<'a> {
    allowed: &'a [Vec<bool>],
    n_cand: usize,
    n_ref: usize,
    used: Vec<bool>,
    best: (usize, usize),
}

impl AlignSearch<'_> {
    /// Depth-first over candidate positions; prunes branches that cannot
    /// reach the incumbent (max matches, then min chunks).
    fn dfs(&mut self, i: usize, m: usize, ch: usize, last: Option<(usize, usize)>) {
        let upper = m + (self.n_cand - i);
        if upper < self.best.0 || (upper == self.best.0 && ch > self.best.1) {
            return;
        }
        if i == self.n_cand {
            if m > self.best.0 || (m == self.best.0 && ch < self.best.1) {
                self.best = (m, ch);
            }
            return;
        }
        // Continuing the previous run first reaches good incumbents early.
        let preferred = match last {
            Some((pi, pj)) if pi + 1 == i => Some(pj + 1),
            _ => None,
        };
        let order = preferred
            .into_iter()
            .chain((0..self.n_ref).filter(|&j| Some(j) != preferred));
        let mut candidates: Vec<usize> = Vec::with_capacity(self.n_ref);
        for j in order {
            if j < self.n_ref && self.allowed[i][j] && !self.used[j] {
                candidates.push(j);
            }
        }
        for j in candidates {
            let next_ch = match last {
                Some((pi, pj)) if pi + 1 == i && pj + 1 == j => ch,
                _ => ch + 1,
            };
            self.used[j] = true;
            self.dfs(i + 1, m + 1, next_ch, Some((i, j)));
            self.used[j] = false;
        }
        self.dfs(i + 1, m, ch, last);
    }
}

/// Maximal match count and, among such alignments, the minimal chunk count.
fn best_alignment(allowed: &[Vec<bool>], n_ref: usize) -> (usize, usize) {
    let n_cand = allowed.len();
    let mut search = AlignSearch {
        allowed,
        n_cand,
        n_ref,
        used: vec![false; n_ref],
        best: (0, usize::MAX),
    };
    search.dfs(0, 0, 0, None);
    if search.best.0 == 0 {
        (0, 0)
    } else {
        search.best
    }
}

fn score_from_counts(m: usize, ch: usize, n_cand: usize, n_ref: usize, params: &MeteorParams) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let m = m as f64;
    let precision = m / n_cand as f64;
    let recall = m / n_ref as f64;
    let f_mean = precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
    let penalty = params.gamma * (ch as f64 / m).powf(params.beta);
    f_mean * (1.0 - penalty)
}

/// The alignment statistics behind a single-reference METEOR score: the
/// maximal one-to-one match count under the configured stages and, among
/// maximal alignments, the minimal chunk count.
pub fn meteor_alignment(
    candidate: &[String],
    reference: &[String],
    params: &MeteorParams,
    syn: &SynonymTable,
) -> (usize, usize) {
    let allowed: Vec<Vec<bool>> = candidate
        .iter()
        .map(|a| reference.iter().map(|b| pair_allowed(a, b, &params.stages, syn)).collect())
        .collect();
    best_alignment(&allowed, reference.len())
}

pub fn meteor(
    candidate: &[String],
    references: &[Vec<String>],
    params: &MeteorParams,
    syn: &SynonymTable,
) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::Usage("meteor requires at least one reference".into()));
    }
    assert!(
        (0.0..=1.0).contains(&params.alpha) && (0.0..=1.0).contains(&params.gamma) && params.beta > 0.0,
        "METEOR parameters out of range"
    );
    let mut best: f64 = 0.0;
    for reference in references {
        if candidate.is_empty() || reference.is_empty() {
            continue;
        }
        let allowed: Vec<Vec<bool>> = candidate
            .iter()
            .map(|a| reference.iter().map(|b| pair_allowed(a, b, &params.stages, syn)).collect())
            .collect();
        let (m, ch) = best_alignment(&allowed, reference.len());
        best = best.max(score_from_counts(m, ch, candidate.len(), reference.len(), params));
    }
    Ok(best)
}
