//! Communication-based scoring: how much probability does a listener put on
//! the color the speaker meant?
//!
//! The general form compares the speaker's distribution over the three
//! context colors to the listener's by KL divergence. Speakers here are
//! point-mass (all mass on the target), so the divergence collapses to the
//! negative log-likelihood of the target, and scores are reported through
//! the transform `prob = exp(-m)`, the listener's probability for the
//! target itself.

use std::path::Path;

use serde::Deserialize;

use crate::corpus::{Corpus, QualityCategory};
use crate::jsonfmt::Json;
use crate::listeners::{Listener, ListenerDistribution};
use crate::{Error, Result};

/// Speaker's distribution over the three context colors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeakerDistribution {
    probs: [f64; 3],
}

impl SpeakerDistribution {
    /// All probability mass on the speaker's target color.
    pub fn point_mass(target: usize) -> SpeakerDistribution {
        assert!(target < 3, "target index {target} out of range");
        let mut probs = [0.0; 3];
        probs[target] = 1.0;
        SpeakerDistribution { probs }
    }

    pub fn new(probs: [f64; 3]) -> Result<SpeakerDistribution> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Usage(format!(
                "speaker probabilities must be finite and non-negative, got {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Usage(format!(
                "speaker probabilities sum to {total}, not 1"
            )));
        }
        Ok(SpeakerDistribution { probs })
    }

    pub fn probs(&self) -> [f64; 3] {
        self.probs
    }
}

/// A communication score in both reporting forms: `m` is the divergence
/// (or NLL), `prob` the listener probability `exp(-m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommScore {
    pub m: f64,
    pub prob: f64,
}

impl CommScore {
    pub fn from_m(m: f64) -> CommScore {
        debug_assert!(m >= 0.0 || m.is_nan());
        CommScore { m, prob: (-m).exp() }
    }
}

/// KL divergence of the listener from the speaker,
/// `sum_i s_i (ln s_i - ln l_i)`, with the conventions `0 * ln(0/x) = 0`
/// and `s_i > 0, l_i = 0 -> +inf`.
///
/// Both inputs are validated simplexes by construction. The result is
/// clamped at zero: rounding in the 1e-9 simplex tolerance can otherwise
/// produce divergences a few ulps below the mathematical floor.
pub fn kl_score(s: &SpeakerDistribution, l: &ListenerDistribution) -> f64 {
    let lp = l.probs();
    let mut sum = 0.0;
    for i in 0..3 {
        if s.probs[i] == 0.0 {
            continue;
        }
        // ln(0) = -inf makes the required +inf fall out of the subtraction.
        sum += s.probs[i] * (s.probs[i].ln() - lp[i].ln());
    }
    sum.max(0.0)
}

/// Negative log-likelihood of the target, `-ln l[target]`; identical to
/// `kl_score(point_mass(target), l)` including the zero clamp.
pub fn nll_score(l: &ListenerDistribution, target: usize) -> f64 {
    assert!(target < 3, "target index {target} out of range");
    (-l.prob(target).ln()).max(0.0)
}

/// One scored candidate under one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub context_id: String,
    pub candidate: String,
    pub category: QualityCategory,
    pub metric: String,
    pub score: f64,
}

/// Scores for a corpus, one row per (candidate, metric), serialized as
/// JSON Lines with an optional `{"config": ...}` header preserved verbatim.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    pub config_line: Option<String>,
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> ScoreTable {
        ScoreTable { rows, config_line: None }
    }

    /// Metric names present, deduplicated in first-appearance order.
    pub fn metrics(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for row in &self.rows {
            if !seen.contains(&row.metric) {
                seen.push(row.metric.clone());
            }
        }
        seen
    }
}

fn row_json(row: &ScoreRow) -> Json {
    Json::obj([
        ("context_id", Json::s(&row.context_id)),
        ("candidate", Json::s(&row.candidate)),
        ("category", Json::s(row.category.as_str())),
        ("metric", Json::s(&row.metric)),
        ("score", Json::f6(row.score)),
    ])
}

pub fn save_score_table(table: &ScoreTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    if let Some(header) = &table.config_line {
        out.push_str(header);
        out.push('\n');
    }
    for row in &table.rows {
        out.push_str(&row_json(row).to_compact());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
struct LineRow {
    context_id: String,
    candidate: String,
    category: String,
    metric: String,
    score: f64,
}

pub fn load_score_table(path: &Path) -> Result<ScoreTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table = ScoreTable::default();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        if table.config_line.is_none() && table.rows.is_empty() && is_config_header(line) {
            table.config_line = Some(line.to_string());
            continue;
        }
        let raw: LineRow =
            serde_json::from_str(line).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let category = QualityCategory::parse(&raw.category)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if !raw.score.is_finite() {
            return Err(Error::parse(path, lineno, "score is not finite"));
        }
        table.rows.push(ScoreRow {
            context_id: raw.context_id,
            candidate: raw.candidate,
            category,
            metric: raw.metric,
            score: raw.score,
        });
    }
    Ok(table)
}

fn is_config_header(line: &str) -> bool {
    match serde_json::from_str::<serde_json::Value>(line) {
        Ok(serde_json::Value::Object(map)) => map.len() == 1 && map.contains_key("config"),
        _ => false,
    }
}

/// Scores every candidate of every instance by the listener's probability
/// for the target color, `prob = exp(-nll)`. Rows are ordered by
/// (context_id, candidate index) regardless of corpus order.
pub fn evaluate(listener: &dyn Listener, metric: &str, corpus: &Corpus) -> ScoreTable {
    let mut indices: Vec<usize> = (0..corpus.instances.len()).collect();
    indices.sort_by(|&a, &b| {
        corpus.instances[a]
            .context
            .context_id
            .cmp(&corpus.instances[b].context.context_id)
    });
    let mut rows = Vec::with_capacity(corpus.candidate_count());
    for idx in indices {
        let inst = &corpus.instances[idx];
        for cand in &inst.candidates {
            let dist = listener.distribution(&cand.text, &inst.context);
            let score = CommScore::from_m(nll_score(&dist, inst.context.target_index));
            rows.push(ScoreRow {
                context_id: inst.context.context_id.clone(),
                candidate: cand.text.clone(),
                category: cand.category,
                metric: metric.to_string(),
                score: score.prob,
            });
        }
    }
    ScoreTable::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{
        generate_synthetic, Candidate, Color, ColorContext, ColorLexicon, EvalInstance,
        GenerateConfig,
    };
    use crate::listeners::OracleListener;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn listener_dist(probs: [f64; 3]) -> ListenerDistribution {
        ListenerDistribution::new(probs).unwrap()
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        for probs in [[1.0 / 3.0; 3], [0.5, 0.3, 0.2], [1.0, 0.0, 0.0]] {
            let s = SpeakerDistribution::new(probs).unwrap();
            assert_eq!(kl_score(&s, &listener_dist(probs)), 0.0);
        }
    }

    #[test]
    fn kl_point_mass_example() {
        let s = SpeakerDistribution::point_mass(0);
        let l = listener_dist([0.5, 0.3, 0.2]);
        assert_abs_diff_eq!(kl_score(&s, &l), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn kl_two_term_example_matches_direct_summation() {
        let s = SpeakerDistribution::new([0.5, 0.5, 0.0]).unwrap();
        let l = listener_dist([0.25, 0.75, 0.0]);
        assert_abs_diff_eq!(kl_score(&s, &l), 0.14384103622589042, epsilon = 1e-15);
    }

    #[test]
    fn kl_diverges_when_listener_excludes_supported_color() {
        let s = SpeakerDistribution::new([0.5, 0.5, 0.0]).unwrap();
        let l = listener_dist([1.0, 0.0, 0.0]);
        let m = kl_score(&s, &l);
        assert!(m.is_infinite() && m > 0.0);
        assert_eq!(CommScore::from_m(m).prob, 0.0);
    }

    #[test]
    fn speaker_distribution_rejects_non_simplex() {
        assert!(matches!(
            SpeakerDistribution::new([0.5, 0.2, 0.2]),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            SpeakerDistribution::new([1.5, -0.5, 0.0]),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            SpeakerDistribution::new([f64::NAN, 0.5, 0.5]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn nll_examples() {
        assert_eq!(nll_score(&listener_dist([1.0, 0.0, 0.0]), 0), 0.0);
        assert_abs_diff_eq!(
            nll_score(&listener_dist([1.0 / 3.0; 3]), 1),
            3.0f64.ln(),
            epsilon = 1e-15
        );
        let m = nll_score(&listener_dist([0.5, 0.5, 0.0]), 0);
        assert_abs_diff_eq!(m, std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(CommScore::from_m(m).prob, 0.5, epsilon = 1e-12);
        // Zero mass on the target diverges rather than erroring.
        assert!(nll_score(&listener_dist([0.5, 0.5, 0.0]), 2).is_infinite());
    }

    #[test]
    fn comm_score_prob_is_exp_of_negated_m() {
        for m in [0.0, 0.1, 1.0, 700.0, f64::INFINITY] {
            let score = CommScore::from_m(m);
            assert!(score.prob >= 0.0 && score.prob <= 1.0);
            assert_abs_diff_eq!(score.prob, (-m).exp(), epsilon = 1e-12);
        }
        assert_eq!(CommScore::from_m(f64::INFINITY).prob, 0.0);
    }

    fn hand_corpus() -> Corpus {
        // Colors chosen so the builtin lexicon resolves "dark blue" to the
        // target only, "blue" to the target and one distractor, and "green"
        // to a distractor only.
        let colors = [
            Color::new(230.0, 0.8, 0.3).unwrap(),
            Color::new(230.0, 0.8, 0.9).unwrap(),
            Color::new(120.0, 0.8, 0.9).unwrap(),
        ];
        let instance = |id: &str| EvalInstance {
            context: ColorContext {
                context_id: id.to_string(),
                pair_id: None,
                colors,
                target_index: 0,
            },
            candidates: vec![
                Candidate {
                    text: "dark blue".into(),
                    category: QualityCategory::Descriptive,
                },
                Candidate {
                    text: "blue".into(),
                    category: QualityCategory::Ambiguous,
                },
                Candidate {
                    text: "green".into(),
                    category: QualityCategory::Misleading,
                },
            ],
            references: vec!["dark blue".into()],
        };
        Corpus::new(vec![instance("ctx-b"), instance("ctx-a")])
    }

    #[test]
    fn evaluate_oracle_matches_closed_forms_and_sorts_rows() {
        let corpus = hand_corpus();

        let sharp = OracleListener::new(ColorLexicon::builtin(), 0.0).unwrap();
        let table = evaluate(&sharp, "oracle", &corpus);
        assert_eq!(table.rows.len(), 6);
        // Sorted by context_id even though the corpus lists ctx-b first.
        assert_eq!(table.rows[0].context_id, "ctx-a");
        assert_eq!(table.rows[3].context_id, "ctx-b");
        assert_eq!(table.rows[0].score, 1.0); // descriptive, epsilon = 0
        assert_eq!(table.rows[1].score, 0.5); // two-way ambiguous
        assert_eq!(table.rows[2].score, 0.0); // misleading: -ln 0 = +inf

        let smoothed = OracleListener::new(ColorLexicon::builtin(), 0.01).unwrap();
        let table = evaluate(&smoothed, "oracle", &corpus);
        assert_abs_diff_eq!(table.rows[0].score, 0.99 + 0.01 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(table.rows[2].score, 0.01 / 3.0, epsilon = 1e-12);
        assert!(table.rows.iter().all(|r| r.metric == "oracle"));
    }

    #[test]
    fn oracle_category_means_are_ordered_on_generated_corpora() {
        for seed in [3, 11, 29] {
            let corpus = generate_synthetic(&GenerateConfig {
                n_pairs: 15,
                refs_per_context: 2,
                seed,
                lexicon: ColorLexicon::builtin(),
            })
            .unwrap();
            let listener = OracleListener::new(ColorLexicon::builtin(), 0.01).unwrap();
            let table = evaluate(&listener, "oracle", &corpus);
            let mean = |cat: QualityCategory| {
                let scores: Vec<f64> = table
                    .rows
                    .iter()
                    .filter(|r| r.category == cat)
                    .map(|r| r.score)
                    .collect();
                assert!(!scores.is_empty());
                scores.iter().sum::<f64>() / scores.len() as f64
            };
            let d = mean(QualityCategory::Descriptive);
            let a = mean(QualityCategory::Ambiguous);
            let m = mean(QualityCategory::Misleading);
            assert!(d > a && a > m, "seed {seed}: {d} {a} {m}");
        }
    }

    #[test]
    fn score_table_round_trips_with_header() {
        let corpus = hand_corpus();
        let listener = OracleListener::new(ColorLexicon::builtin(), 0.01).unwrap();
        let mut table = evaluate(&listener, "oracle", &corpus);
        table.config_line = Some(r#"{"config":{"metrics":"oracle"}}"#.into());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.jsonl");
        save_score_table(&table, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().starts_with(r#"{"config":"#));
        assert!(
            text.lines().nth(1).unwrap().starts_with(
                r#"{"context_id":"ctx-a","candidate":"dark blue","category":"descriptive","metric":"oracle","score":0.993333}"#
            ),
            "unexpected row line: {}",
            text.lines().nth(1).unwrap()
        );

        let loaded = load_score_table(&path).unwrap();
        assert_eq!(loaded.config_line, table.config_line);
        assert_eq!(loaded.rows.len(), table.rows.len());
        // Scores re-read at the six-decimal file precision.
        for (a, b) in loaded.rows.iter().zip(&table.rows) {
            assert_eq!(a.context_id, b.context_id);
            assert_eq!(a.metric, b.metric);
            assert_abs_diff_eq!(a.score, b.score, epsilon = 5e-7);
        }

        let again = dir.path().join("again.jsonl");
        save_score_table(&loaded, &again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn score_table_load_reports_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.jsonl");
        std::fs::write(&path, "{\"context_id\":\"c\"}\n").unwrap();
        assert!(matches!(
            load_score_table(&path),
            Err(Error::Parse { line: 1, .. })
        ));

        std::fs::write(
            &path,
            r#"{"context_id":"c","candidate":"x","category":"sideways","metric":"m","score":0.5}"#,
        )
        .unwrap();
        let msg = load_score_table(&path).unwrap_err().to_string();
        assert!(msg.contains("sideways"), "{msg}");

        std::fs::write(
            &path,
            r#"{"context_id":"c","candidate":"x","category":"ambiguous","metric":"m","score":null}"#,
        )
        .unwrap();
        assert!(load_score_table(&path).is_err());
    }

    #[test]
    fn metrics_listing_preserves_first_appearance_order() {
        let mut table = ScoreTable::default();
        for metric in ["bleu1", "oracle", "bleu1", "cider"] {
            table.rows.push(ScoreRow {
                context_id: "c".into(),
                candidate: "x".into(),
                category: QualityCategory::Descriptive,
                metric: metric.into(),
                score: 0.0,
            });
        }
        assert_eq!(table.metrics(), ["bleu1", "oracle", "cider"]);
    }

    fn simplex_strategy() -> impl Strategy<Value = [f64; 3]> {
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_filter_map("degenerate", |(a, b, c)| {
            let total = a + b + c;
            if total < 1e-6 {
                return None;
            }
            Some([a / total, b / total, c / total])
        })
    }

    proptest! {
        #[test]
        fn point_mass_kl_equals_nll(probs in simplex_strategy(), target in 0usize..3) {
            let l = ListenerDistribution::new(probs);
            prop_assume!(l.is_ok());
            let l = l.unwrap();
            let kl = kl_score(&SpeakerDistribution::point_mass(target), &l);
            let nll = nll_score(&l, target);
            prop_assert_eq!(kl, nll);
        }

        #[test]
        fn kl_is_non_negative(s in simplex_strategy(), l in simplex_strategy()) {
            let s = SpeakerDistribution::new(s);
            let l = ListenerDistribution::new(l);
            prop_assume!(s.is_ok() && l.is_ok());
            let m = kl_score(&s.unwrap(), &l.unwrap());
            prop_assert!(m >= 0.0);
        }

        #[test]
        fn prob_transform_is_strictly_decreasing(m in 0.0f64..40.0, delta in 1e-6f64..10.0) {
            prop_assert!(CommScore::from_m(m).prob > CommScore::from_m(m + delta).prob);
        }
    }
}
