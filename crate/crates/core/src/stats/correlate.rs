//! Correlation of metric scores against candidate quality categories, the
//! machine-readable form of a metric-comparison table.
//!
//! Each candidate's category maps to a numeric grade (descriptive 1,
//! ambiguous 2, misleading 3), so a metric that rewards good utterances
//! correlates *negatively*; the report carries signed coefficients and
//! their magnitudes side by side. Williams' test compares every pair of
//! metrics through their shared category variable.
//!
//! Metrics may cover different candidate subsets (imported human judgments
//! often do). Per-metric coefficients use all of that metric's candidates;
//! a Williams entry re-computes all three correlations on the candidates
//! the two metrics share, and is omitted when that intersection is smaller
//! than 4 or either metric is degenerate on it.

use std::collections::BTreeMap;

use super::{kendall_tau_b_test, pearson, pearson_test, spearman_test, williams_t};
use crate::commeval::ScoreTable;
use crate::corpus::{Corpus, QualityCategory};
use crate::jsonfmt::Json;
use crate::{Error, Result};

/// Signed coefficients with their two-sided p-values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationValues {
    pub pearson: f64,
    pub pearson_p: f64,
    pub spearman: f64,
    pub spearman_p: f64,
    pub kendall_tau_b: f64,
    pub kendall_tau_b_p: f64,
}

/// One metric's row; `values` is None when the correlation is undefined,
/// with `note` saying why (constant scores, too few points).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCorrelation {
    pub metric: String,
    pub n: usize,
    pub values: Option<CorrelationValues>,
    pub note: Option<String>,
}

/// Williams' test between two metrics' category correlations, computed on
/// the candidates both metrics scored.
#[derive(Debug, Clone, PartialEq)]
pub struct WilliamsEntry {
    pub metric_a: String,
    pub metric_b: String,
    pub n: usize,
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    /// Distinct (context, candidate) units scored by at least one metric.
    pub n: usize,
    pub metrics: Vec<MetricCorrelation>,
    pub williams: Vec<WilliamsEntry>,
}

/// Scores of one metric keyed by (context_id, candidate text), with the
/// category grade as the y value. Duplicate rows average.
type MetricSeries = BTreeMap<(String, String), (f64, f64)>;

fn category_map(corpus: &Corpus) -> Result<BTreeMap<(String, String), QualityCategory>> {
    let mut map = BTreeMap::new();
    for inst in &corpus.instances {
        for cand in &inst.candidates {
            let key = (inst.context.context_id.clone(), cand.text.clone());
            if let Some(prev) = map.insert(key, cand.category) {
                if prev != cand.category {
                    return Err(Error::Invalid(format!(
                        "candidate {:?} in context {:?} listed with two categories",
                        cand.text, inst.context.context_id
                    )));
                }
            }
        }
    }
    Ok(map)
}

fn metric_series(
    scores: &ScoreTable,
    categories: &BTreeMap<(String, String), QualityCategory>,
) -> Result<BTreeMap<String, MetricSeries>> {
    // (sum, count) per key first, averaged afterwards.
    let mut sums: BTreeMap<String, BTreeMap<(String, String), (f64, usize)>> = BTreeMap::new();
    for row in &scores.rows {
        let key = (row.context_id.clone(), row.candidate.clone());
        let category = categories.get(&key).ok_or_else(|| {
            Error::Invalid(format!(
                "scored candidate {:?} in context {:?} not present in the corpus",
                row.candidate, row.context_id
            ))
        })?;
        if *category != row.category {
            return Err(Error::Invalid(format!(
                "candidate {:?} in context {:?} is {} in the corpus but {} in the score table",
                row.candidate,
                row.context_id,
                category.as_str(),
                row.category.as_str()
            )));
        }
        let entry = sums.entry(row.metric.clone()).or_default().entry(key).or_insert((0.0, 0));
        entry.0 += row.score;
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(metric, keyed)| {
            let series = keyed
                .into_iter()
                .map(|(key, (sum, count))| {
                    let grade = f64::from(categories[&key].score());
                    (key, (sum / count as f64, grade))
                })
                .collect();
            (metric, series)
        })
        .collect())
}

fn correlate_series(xs: &[f64], ys: &[f64]) -> Result<CorrelationValues> {
    let (pearson, pearson_p) = pearson_test(xs, ys)?;
    let (spearman, spearman_p) = spearman_test(xs, ys)?;
    let (kendall_tau_b, kendall_tau_b_p) = kendall_tau_b_test(xs, ys)?;
    Ok(CorrelationValues {
        pearson,
        pearson_p,
        spearman,
        spearman_p,
        kendall_tau_b,
        kendall_tau_b_p,
    })
}

pub fn correlate(scores: &ScoreTable, corpus: &Corpus) -> Result<CorrelationReport> {
    if scores.rows.is_empty() {
        return Err(Error::Usage("score table has no rows to correlate".into()));
    }
    let categories = category_map(corpus)?;
    let by_metric = metric_series(scores, &categories)?;

    let mut all_keys = std::collections::BTreeSet::new();
    for series in by_metric.values() {
        all_keys.extend(series.keys().cloned());
    }

    // First-appearance order from the table, not BTreeMap order, so the
    // report reads in the order the metrics were requested.
    let order = scores.metrics();
    let mut metrics = Vec::with_capacity(order.len());
    for name in &order {
        let series = &by_metric[name];
        let xs: Vec<f64> = series.values().map(|&(x, _)| x).collect();
        let ys: Vec<f64> = series.values().map(|&(_, y)| y).collect();
        let row = match correlate_series(&xs, &ys) {
            Ok(values) => MetricCorrelation {
                metric: name.clone(),
                n: xs.len(),
                values: Some(values),
                note: None,
            },
            Err(Error::Invalid(msg)) | Err(Error::Usage(msg)) => MetricCorrelation {
                metric: name.clone(),
                n: xs.len(),
                values: None,
                note: Some(msg),
            },
            Err(other) => return Err(other),
        };
        metrics.push(row);
    }

    let mut williams = Vec::new();
    for i in 0..order.len() {
        for j in (i + 1)..order.len() {
            if let Some(entry) = williams_pair(&order[i], &order[j], &by_metric) {
                williams.push(entry);
            }
        }
    }

    Ok(CorrelationReport { n: all_keys.len(), metrics, williams })
}

/// Joint Williams' test on the candidates both metrics scored; None when
/// the shared sample is too small or a correlation is undefined on it.
fn williams_pair(
    a: &str,
    b: &str,
    by_metric: &BTreeMap<String, MetricSeries>,
) -> Option<WilliamsEntry> {
    let (sa, sb) = (&by_metric[a], &by_metric[b]);
    let mut xa = Vec::new();
    let mut xb = Vec::new();
    let mut ys = Vec::new();
    for (key, &(x, y)) in sa {
        if let Some(&(other, _)) = sb.get(key) {
            xa.push(x);
            xb.push(other);
            ys.push(y);
        }
    }
    if ys.len() < 4 {
        return None;
    }
    let r12 = pearson(&ys, &xa).ok()?;
    let r13 = pearson(&ys, &xb).ok()?;
    let r23 = pearson(&xa, &xb).ok()?;
    let result = williams_t(r12, r13, r23, ys.len()).ok()?;
    Some(WilliamsEntry {
        metric_a: a.to_string(),
        metric_b: b.to_string(),
        n: ys.len(),
        t: result.t,
        p: result.p,
        df: result.df,
    })
}

fn metric_json(row: &MetricCorrelation) -> Json {
    let mut pairs = vec![
        ("metric".to_string(), Json::s(&row.metric)),
        ("n".to_string(), Json::i(row.n as i64)),
    ];
    match &row.values {
        Some(v) => {
            for (key, value, p) in [
                ("pearson", v.pearson, v.pearson_p),
                ("spearman", v.spearman, v.spearman_p),
                ("kendall_tau_b", v.kendall_tau_b, v.kendall_tau_b_p),
            ] {
                pairs.push((key.to_string(), Json::num(value)));
                pairs.push((format!("{key}_abs"), Json::num(value.abs())));
                pairs.push((format!("{key}_p"), Json::num(p)));
            }
        }
        None => {
            let note = row.note.as_deref().unwrap_or("correlation undefined");
            pairs.push(("error".to_string(), Json::s(note)));
        }
    }
    Json::Obj(pairs)
}

/// Fixed-key-order JSON form; `config` (when given) leads for consistency
/// with the other output files.
pub fn report_json(report: &CorrelationReport, config: Option<Json>) -> Json {
    let mut pairs = Vec::new();
    if let Some(cfg) = config {
        pairs.push(("config".to_string(), cfg));
    }
    pairs.push(("n".to_string(), Json::i(report.n as i64)));
    pairs.push((
        "metrics".to_string(),
        Json::arr(report.metrics.iter().map(metric_json)),
    ));
    pairs.push((
        "williams".to_string(),
        Json::arr(report.williams.iter().map(|w| {
            Json::obj([
                ("metric_a", Json::s(&w.metric_a)),
                ("metric_b", Json::s(&w.metric_b)),
                ("n", Json::i(w.n as i64)),
                ("t", Json::num(w.t)),
                ("p", Json::num(w.p)),
                ("df", Json::i(w.df as i64)),
            ])
        })),
    ));
    Json::Obj(pairs)
}

impl CorrelationReport {
    /// Row for `metric`, if present.
    pub fn metric(&self, metric: &str) -> Option<&MetricCorrelation> {
        self.metrics.iter().find(|m| m.metric == metric)
    }

    /// Williams entry for the unordered pair, if present.
    pub fn williams_for(&self, a: &str, b: &str) -> Option<&WilliamsEntry> {
        self.williams.iter().find(|w| {
            (w.metric_a == a && w.metric_b == b) || (w.metric_a == b && w.metric_b == a)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commeval::{evaluate, ScoreRow};
    use crate::corpus::{generate_synthetic, ColorLexicon, GenerateConfig};
    use crate::listeners::OracleListener;
    use approx::assert_abs_diff_eq;

    fn synthetic(n_pairs: usize, seed: u64) -> Corpus {
        generate_synthetic(&GenerateConfig {
            n_pairs,
            refs_per_context: 2,
            seed,
            lexicon: ColorLexicon::builtin(),
        })
        .unwrap()
    }

    fn oracle_scores(corpus: &Corpus, epsilon: f64) -> ScoreTable {
        let listener = OracleListener::new(ColorLexicon::builtin(), epsilon).unwrap();
        evaluate(&listener, "oracle", corpus)
    }

    #[test]
    fn sharp_oracle_has_unit_spearman_magnitude() {
        let corpus = synthetic(12, 3);
        let report = correlate(&oracle_scores(&corpus, 0.0), &corpus).unwrap();
        assert_eq!(report.n, corpus.candidate_count());
        let row = report.metric("oracle").unwrap();
        let v = row.values.as_ref().unwrap();
        // Higher prob on better candidates: strong negative correlation
        // with the 1/2/3 grade, unit magnitude under ranks.
        assert!(v.spearman < 0.0);
        assert_abs_diff_eq!(v.spearman.abs(), 1.0, epsilon = 1e-12);
        assert!(v.pearson < 0.0 && v.kendall_tau_b < 0.0);
        assert!(v.spearman_p < 1e-6);
    }

    #[test]
    fn constant_metric_is_flagged_not_fatal() {
        let corpus = synthetic(4, 9);
        let mut table = oracle_scores(&corpus, 0.01);
        let constant_rows: Vec<ScoreRow> = table
            .rows
            .iter()
            .map(|r| ScoreRow { metric: "flat".into(), score: 0.75, ..r.clone() })
            .collect();
        table.rows.extend(constant_rows);

        let report = correlate(&table, &corpus).unwrap();
        let flat = report.metric("flat").unwrap();
        assert!(flat.values.is_none());
        assert!(flat.note.as_ref().unwrap().contains("variance"));
        // The healthy metric still reports, and no Williams entry mentions
        // the degenerate one.
        assert!(report.metric("oracle").unwrap().values.is_some());
        assert!(report.williams.is_empty());
    }

    #[test]
    fn williams_block_covers_metric_pairs() {
        let corpus = synthetic(10, 21);
        let mut table = oracle_scores(&corpus, 0.01);
        let noisy: Vec<ScoreRow> = table
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| ScoreRow {
                metric: "wobble".into(),
                score: r.score * 0.5 + ((i * 2654435761) % 97) as f64 / 97.0,
                ..r.clone()
            })
            .collect();
        table.rows.extend(noisy);

        let report = correlate(&table, &corpus).unwrap();
        assert_eq!(report.williams.len(), 1);
        let w = report.williams_for("oracle", "wobble").unwrap();
        assert_eq!(w.metric_a, "oracle");
        assert_eq!(w.n, corpus.candidate_count());
        assert_eq!(w.df, w.n - 3);
        assert!(w.p > 0.0 && w.p <= 1.0);
        assert!(report.williams_for("oracle", "absent").is_none());
    }

    #[test]
    fn orphan_and_mismatched_rows_are_named() {
        let corpus = synthetic(3, 2);
        let mut table = oracle_scores(&corpus, 0.01);
        table.rows.push(ScoreRow {
            context_id: "nowhere".into(),
            candidate: "ghost".into(),
            category: QualityCategory::Descriptive,
            metric: "oracle".into(),
            score: 0.5,
        });
        let msg = correlate(&table, &corpus).unwrap_err().to_string();
        assert!(msg.contains("ghost") && msg.contains("nowhere"), "{msg}");

        let mut table = oracle_scores(&corpus, 0.01);
        table.rows[0].category = QualityCategory::Misleading;
        let msg = correlate(&table, &corpus).unwrap_err().to_string();
        assert!(msg.contains("descriptive") && msg.contains("misleading"), "{msg}");

        let empty = ScoreTable::default();
        assert!(matches!(correlate(&empty, &corpus), Err(Error::Usage(_))));
    }

    #[test]
    fn duplicate_rows_average_and_partial_coverage_joins() {
        let corpus = synthetic(6, 13);
        let mut table = oracle_scores(&corpus, 0.01);
        // Score the same candidates twice with symmetric noise: averages
        // land back on the original values.
        let (plus, minus): (Vec<ScoreRow>, Vec<ScoreRow>) = table
            .rows
            .iter()
            .map(|r| {
                let a = ScoreRow { metric: "dup".into(), score: r.score + 0.01, ..r.clone() };
                let b = ScoreRow { metric: "dup".into(), score: r.score - 0.01, ..r.clone() };
                (a, b)
            })
            .unzip();
        table.rows.extend(plus);
        table.rows.extend(minus);
        // A metric covering only half the candidates still correlates and
        // joins with the others on the shared subset.
        let partial: Vec<ScoreRow> = table
            .rows
            .iter()
            .filter(|r| r.metric == "oracle")
            .take(table.rows.len() / 6)
            .map(|r| ScoreRow { metric: "half".into(), ..r.clone() })
            .collect();
        let half_n = partial.len();
        table.rows.extend(partial);

        let report = correlate(&table, &corpus).unwrap();
        let dup = report.metric("dup").unwrap();
        let oracle = report.metric("oracle").unwrap();
        assert_eq!(dup.n, oracle.n);
        assert_abs_diff_eq!(
            dup.values.as_ref().unwrap().pearson,
            oracle.values.as_ref().unwrap().pearson,
            epsilon = 1e-9
        );
        let half = report.metric("half").unwrap();
        assert_eq!(half.n, half_n);
        let w = report.williams_for("oracle", "half").unwrap();
        assert_eq!(w.n, half_n);
    }

    #[test]
    fn report_serializes_with_fixed_key_order() {
        let corpus = synthetic(5, 8);
        let report = correlate(&oracle_scores(&corpus, 0.01), &corpus).unwrap();
        let with_config = report_json(
            &report,
            Some(Json::obj([("scores", Json::s("scores.jsonl"))])),
        );
        let text = with_config.to_pretty();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["config"]["scores"], "scores.jsonl");
        assert_eq!(parsed["n"], corpus.candidate_count() as u64);
        assert_eq!(parsed["metrics"][0]["metric"], "oracle");
        assert!(parsed["metrics"][0]["spearman_abs"].as_f64().unwrap() > 0.9);
        assert!(parsed["williams"].as_array().unwrap().is_empty());
        assert!(text.find("\"n\"").unwrap() < text.find("\"metrics\"").unwrap());
        assert!(text.find("\"metrics\"").unwrap() < text.find("\"williams\"").unwrap());

        // Identical input -> identical bytes.
        let report2 = correlate(&oracle_scores(&corpus, 0.01), &corpus).unwrap();
        assert_eq!(report_json(&report2, None).to_pretty(), report_json(&report, None).to_pretty());
    }
}
