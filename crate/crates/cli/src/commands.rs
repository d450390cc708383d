use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use refeval_core::commeval::{evaluate, load_score_table, save_score_table, ScoreRow, ScoreTable};
use refeval_core::corpus::{
    generate_synthetic, load_corpus, save_corpus, ColorLexicon, Corpus, CorpusFormat,
    GenerateConfig, QualityCategory,
};
use refeval_core::jsonfmt::Json;
use refeval_core::listeners::{
    listener_accuracy, load_embedding_file, load_model, save_model, train_literal,
    train_pragmatic, Listener, OracleListener, SavedModel, TrainConfig, DEFAULT_ORACLE_EPSILON,
};
use refeval_core::metrics::{
    bleu, cider, compute_idf, meteor, rouge_l, BleuParams, CiderParams, MeteorParams, RougeParams,
};
use refeval_core::stats::{correlate, gaussian_kde, report_json, KdeGrid};
use refeval_core::textproc::{tokenize, SynonymTable};
use refeval_core::{colorspace::FeatureMode, Error, Result};

use crate::config::{require, FileConfig};
use crate::{CorrelateArgs, GenArgs, ReportArgs, ScoreArgs, TrainArgs};

/// Writes through a temp file in the destination directory and renames it
/// into place, so readers never observe a partial file.
fn atomic_write_with(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::Builder::new()
        .prefix(".refeval-")
        .suffix(".tmp")
        .tempfile_in(dir)
        .map_err(|e| Error::io(dir, e))?
        .into_temp_path();
    write(&tmp)?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))
}

fn atomic_write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    atomic_write_with(path, |tmp| std::fs::write(tmp, bytes).map_err(|e| Error::io(tmp, e)))
}

/// The `{"config": ...}` header line shared by corpus and score files.
fn config_header(cfg: &Json) -> String {
    Json::obj([("config", cfg.clone())]).to_compact()
}

/// Paths are echoed exactly as given so reruns with the same arguments
/// produce byte-identical output files.
fn path_json(path: &Path) -> Json {
    Json::s(path.to_string_lossy())
}

fn opt_path_json(path: &Option<PathBuf>) -> Json {
    path.as_ref().map_or(Json::Null, |p| path_json(p))
}

fn seed_json(seed: u64) -> Result<Json> {
    let v = i64::try_from(seed)
        .map_err(|_| Error::Usage(format!("seed {seed} exceeds {}", i64::MAX)))?;
    Ok(Json::i(v))
}

fn load_corpus_at(path: &Path) -> Result<Corpus> {
    load_corpus(path, CorpusFormat::from_path(path))
}

pub fn run_gen(args: GenArgs, file: &FileConfig) -> Result<()> {
    let pairs = require("pairs", args.pairs.or(file.usize_value("gen", "pairs")?))?;
    let refs = require("refs", args.refs.or(file.usize_value("gen", "refs")?))?;
    let seed = args.seed.or(file.u64_value("gen", "seed")?).unwrap_or(0);
    let lexicon_path = args.lexicon.or(file.path_value("gen", "lexicon")?);
    let out = require("out", args.out.or(file.path_value("gen", "out")?))?;

    let lexicon = match &lexicon_path {
        Some(p) => ColorLexicon::load(p)?,
        None => ColorLexicon::builtin(),
    };
    let cfg = Json::obj([
        ("command", Json::s("gen")),
        ("pairs", Json::i(pairs as i64)),
        ("refs", Json::i(refs as i64)),
        ("seed", seed_json(seed)?),
        ("lexicon", opt_path_json(&lexicon_path)),
        ("out", path_json(&out)),
    ]);

    let mut corpus = generate_synthetic(&GenerateConfig {
        n_pairs: pairs,
        refs_per_context: refs,
        seed,
        lexicon,
    })?;
    corpus.config_line = Some(config_header(&cfg));
    atomic_write_with(&out, |tmp| save_corpus(&corpus, tmp))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ModelKind {
    Literal,
    Pragmatic,
}

impl ModelKind {
    fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "literal" => Ok(ModelKind::Literal),
            "pragmatic" => Ok(ModelKind::Pragmatic),
            other => Err(Error::Usage(format!(
                "unknown model {other:?}; expected literal or pragmatic"
            ))),
        }
    }
}

/// Decorrelates the holdout split from the trainer, which is seeded from
/// the same value.
const SPLIT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Splits whole pair groups (both contexts of a pair stay on one side) so
/// holdout colors are never seen in training.
fn split_holdout(corpus: &Corpus, fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, inst) in corpus.instances.iter().enumerate() {
        let key = inst.context.pair_id.as_deref().unwrap_or(&inst.context.context_id);
        groups.entry(key).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::Usage(
            "--holdout needs a corpus with at least two context groups".into(),
        ));
    }
    let mut order: Vec<Vec<usize>> = groups.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_STREAM);
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let n_hold = ((order.len() as f64 * fraction).round() as usize).clamp(1, order.len() - 1);
    let pick = |slices: &[Vec<usize>]| {
        let mut idx: Vec<usize> = slices.iter().flatten().copied().collect();
        idx.sort_unstable();
        Corpus::new(idx.into_iter().map(|i| corpus.instances[i].clone()).collect())
    };
    Ok((pick(&order[n_hold..]), pick(&order[..n_hold])))
}

pub fn run_train(args: TrainArgs, file: &FileConfig) -> Result<()> {
    let model = require("model", args.model.or(file.string_value("train", "model")?))?;
    let corpus_path = require("corpus", args.corpus.or(file.path_value("train", "corpus")?))?;
    let out = require("out", args.out.or(file.path_value("train", "out")?))?;
    let epochs = args.epochs.or(file.usize_value("train", "epochs")?).unwrap_or(10);
    let lr = args.lr.or(file.f64_value("train", "lr")?).unwrap_or(1e-3);
    let seed = args.seed.or(file.u64_value("train", "seed")?).unwrap_or(0);
    let features = args
        .features
        .or(file.string_value("train", "features")?)
        .unwrap_or_else(|| "raw_hsv".to_string());
    let embeddings = args.embeddings.or(file.path_value("train", "embeddings")?);
    let holdout = args.holdout.or(file.f64_value("train", "holdout")?);

    let kind = ModelKind::parse(&model)?;
    let feature_mode = FeatureMode::parse(&features)?;
    if embeddings.is_some() && kind == ModelKind::Literal {
        return Err(Error::Usage(
            "--embeddings only applies to the pragmatic model".into(),
        ));
    }
    if let Some(h) = holdout {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Usage(format!(
                "--holdout must lie strictly between 0 and 1, got {h}"
            )));
        }
    }
    let cfg = Json::obj([
        ("command", Json::s("train")),
        ("model", Json::s(&model)),
        ("corpus", path_json(&corpus_path)),
        ("out", path_json(&out)),
        ("epochs", Json::i(epochs as i64)),
        ("lr", Json::num(lr)),
        ("seed", seed_json(seed)?),
        ("features", Json::s(feature_mode.as_str())),
        ("embeddings", opt_path_json(&embeddings)),
        ("holdout", holdout.map_or(Json::Null, Json::num)),
    ]);

    let full = load_corpus_at(&corpus_path)?;
    let (train_corpus, holdout_corpus) = match holdout {
        Some(h) => {
            let (t, held) = split_holdout(&full, h, seed)?;
            (t, Some(held))
        }
        None => (full, None),
    };

    let mut train_cfg = TrainConfig {
        epochs,
        learning_rate: lr,
        seed,
        feature_mode,
        ..TrainConfig::default()
    };
    let pretrained = embeddings.as_ref().map(|p| load_embedding_file(p)).transpose()?;
    if let Some(dim) = pretrained.as_ref().and_then(|t| t.values().next().map(Vec::len)) {
        train_cfg.embedding_dim = dim;
    }
    let saved = match kind {
        ModelKind::Literal => SavedModel::Literal(train_literal(&train_corpus, &train_cfg)?.0),
        ModelKind::Pragmatic => SavedModel::Pragmatic(
            train_pragmatic(&train_corpus, &train_cfg, pretrained.as_ref())?.0,
        ),
    };
    atomic_write_with(&out, |tmp| save_model(&saved, tmp))?;

    if let Some(held) = &holdout_corpus {
        let listener: &dyn Listener = match &saved {
            SavedModel::Literal(m) => m,
            SavedModel::Pragmatic(m) => m,
        };
        let acc = listener_accuracy(listener, held)?;
        let line = Json::obj([
            ("config", cfg),
            (
                "holdout",
                Json::obj([
                    ("accuracy", Json::num(acc.accuracy())),
                    ("correct", Json::i(acc.correct as i64)),
                    ("ties", Json::i(acc.ties as i64)),
                    ("total", Json::i(acc.total as i64)),
                ]),
            ),
        ])
        .to_compact();
        println!("{line}");
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum MetricKind {
    Bleu(usize),
    Meteor,
    RougeL,
    Cider,
    Oracle,
    Literal,
    Pragmatic,
    HumanImport,
}

fn parse_metric(name: &str) -> Result<MetricKind> {
    match name {
        "bleu1" => Ok(MetricKind::Bleu(1)),
        "bleu2" => Ok(MetricKind::Bleu(2)),
        "bleu3" => Ok(MetricKind::Bleu(3)),
        "bleu4" => Ok(MetricKind::Bleu(4)),
        "meteor" => Ok(MetricKind::Meteor),
        "rouge-l" => Ok(MetricKind::RougeL),
        "cider" => Ok(MetricKind::Cider),
        "oracle" => Ok(MetricKind::Oracle),
        "literal" => Ok(MetricKind::Literal),
        "pragmatic" => Ok(MetricKind::Pragmatic),
        "human-import" => Ok(MetricKind::HumanImport),
        other => Err(Error::Usage(format!(
            "unknown metric {other:?}; expected bleu1-bleu4, meteor, rouge-l, cider, \
             oracle, literal, pragmatic, or human-import"
        ))),
    }
}

fn parse_metric_list(list: &str) -> Result<Vec<(String, MetricKind)>> {
    let mut metrics = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind = parse_metric(name)?;
        if metrics.iter().any(|(n, _)| n == name) {
            return Err(Error::Usage(format!("metric {name:?} listed twice")));
        }
        metrics.push((name.to_string(), kind));
    }
    if metrics.is_empty() {
        return Err(Error::Usage("--metrics lists no metric names".into()));
    }
    Ok(metrics)
}

/// `--model name=path` entries merged over any `[score.model]` config table.
fn resolve_models(args: &[String], file: &FileConfig) -> Result<BTreeMap<String, PathBuf>> {
    let mut models: BTreeMap<String, PathBuf> = file
        .string_map("score", "model")?
        .into_iter()
        .map(|(k, v)| (k, PathBuf::from(v)))
        .collect();
    for spec in args {
        let (name, path) = spec.split_once('=').ok_or_else(|| {
            Error::Usage(format!("--model expects name=path, got {spec:?}"))
        })?;
        models.insert(name.to_string(), PathBuf::from(path));
    }
    for name in models.keys() {
        if name != "literal" && name != "pragmatic" {
            return Err(Error::Usage(format!(
                "--model names a listener that takes no model file: {name:?}"
            )));
        }
    }
    Ok(models)
}

fn load_listener_model(path: &Path, kind: ModelKind) -> Result<SavedModel> {
    let saved = load_model(path)?;
    let matches = matches!(
        (&saved, kind),
        (SavedModel::Literal(_), ModelKind::Literal)
            | (SavedModel::Pragmatic(_), ModelKind::Pragmatic)
    );
    if !matches {
        return Err(Error::Invalid(format!(
            "model file {} holds a {} model",
            path.display(),
            saved.kind()
        )));
    }
    Ok(saved)
}

pub fn run_score(args: ScoreArgs, file: &FileConfig) -> Result<()> {
    let metrics_list =
        require("metrics", args.metrics.or(file.string_value("score", "metrics")?))?;
    let corpus_path = require("corpus", args.corpus.or(file.path_value("score", "corpus")?))?;
    let out = require("out", args.out.or(file.path_value("score", "out")?))?;
    let human = args.human.or(file.path_value("score", "human")?);
    let lexicon_path = args.lexicon.or(file.path_value("score", "lexicon")?);

    let metrics = parse_metric_list(&metrics_list)?;
    let models = resolve_models(&args.model, file)?;
    for (name, kind) in &metrics {
        match kind {
            MetricKind::Literal | MetricKind::Pragmatic if !models.contains_key(name) => {
                return Err(Error::Usage(format!(
                    "metric {name:?} needs --model {name}=<path>"
                )));
            }
            MetricKind::HumanImport if human.is_none() => {
                return Err(Error::Usage("metric \"human-import\" needs --human <path>".into()));
            }
            _ => {}
        }
    }

    let cfg = Json::obj([
        ("command", Json::s("score")),
        ("metrics", Json::s(&metrics_list)),
        ("corpus", path_json(&corpus_path)),
        ("out", path_json(&out)),
        (
            "models",
            Json::obj(models.iter().map(|(k, v)| (k.as_str(), path_json(v)))),
        ),
        ("human", opt_path_json(&human)),
        ("lexicon", opt_path_json(&lexicon_path)),
        ("oracle_epsilon", Json::num(DEFAULT_ORACLE_EPSILON)),
    ]);

    let corpus = load_corpus_at(&corpus_path)?;
    let mut order: Vec<usize> = (0..corpus.instances.len()).collect();
    order.sort_by(|&a, &b| {
        corpus.instances[a].context.context_id.cmp(&corpus.instances[b].context.context_id)
    });
    let cand_tokens: Vec<Vec<Vec<String>>> = corpus
        .instances
        .iter()
        .map(|inst| inst.candidates.iter().map(|c| Vec::from(tokenize(&c.text))).collect())
        .collect();
    let ref_tokens: Vec<Vec<Vec<String>>> = corpus
        .instances
        .iter()
        .map(|inst| inst.references.iter().map(|r| Vec::from(tokenize(r))).collect())
        .collect();

    let needs_cider = metrics.iter().any(|(_, k)| *k == MetricKind::Cider);
    let idf = if needs_cider { Some(compute_idf(&corpus, 4)?) } else { None };
    let synonyms = SynonymTable::builtin();
    let lexicon = match &lexicon_path {
        Some(p) => ColorLexicon::load(p)?,
        None => ColorLexicon::builtin(),
    };

    let mut table = ScoreTable::default();
    table.config_line = Some(config_header(&cfg));
    for (name, kind) in &metrics {
        match kind {
            MetricKind::Bleu(_)
            | MetricKind::Meteor
            | MetricKind::RougeL
            | MetricKind::Cider => {
                for &ii in &order {
                    let inst = &corpus.instances[ii];
                    let refs = &ref_tokens[ii];
                    for (ci, cand) in inst.candidates.iter().enumerate() {
                        let toks = &cand_tokens[ii][ci];
                        let score = match kind {
                            MetricKind::Bleu(n) => {
                                bleu(toks, refs, &BleuParams::with_max_n(*n))?.score
                            }
                            MetricKind::Meteor => {
                                meteor(toks, refs, &MeteorParams::default(), &synonyms)?
                            }
                            MetricKind::RougeL => rouge_l(toks, refs, &RougeParams::default())?,
                            MetricKind::Cider => cider(
                                toks,
                                refs,
                                idf.as_ref().expect("idf computed when cider requested"),
                                &CiderParams::default(),
                            )?,
                            _ => unreachable!(),
                        };
                        table.rows.push(ScoreRow {
                            context_id: inst.context.context_id.clone(),
                            candidate: cand.text.clone(),
                            category: cand.category,
                            metric: name.clone(),
                            score,
                        });
                    }
                }
            }
            MetricKind::Oracle => {
                let listener = OracleListener::new(lexicon.clone(), DEFAULT_ORACLE_EPSILON)?;
                table.rows.extend(evaluate(&listener, name, &corpus).rows);
            }
            MetricKind::Literal | MetricKind::Pragmatic => {
                let saved = load_listener_model(
                    &models[name],
                    if *kind == MetricKind::Literal {
                        ModelKind::Literal
                    } else {
                        ModelKind::Pragmatic
                    },
                )?;
                let listener: &dyn Listener = match &saved {
                    SavedModel::Literal(m) => m,
                    SavedModel::Pragmatic(m) => m,
                };
                table.rows.extend(evaluate(listener, name, &corpus).rows);
            }
            MetricKind::HumanImport => {
                let path = human.as_ref().expect("checked above");
                let imported = load_score_table(path)?;
                table.rows.extend(imported.rows.into_iter().map(|mut row| {
                    row.metric = "human".to_string();
                    row
                }));
            }
        }
    }
    atomic_write_with(&out, |tmp| save_score_table(&table, tmp))
}

pub fn run_correlate(args: CorrelateArgs, file: &FileConfig) -> Result<()> {
    let scores_path =
        require("scores", args.scores.or(file.path_value("correlate", "scores")?))?;
    let corpus_path =
        require("corpus", args.corpus.or(file.path_value("correlate", "corpus")?))?;
    let out = require("out", args.out.or(file.path_value("correlate", "out")?))?;

    let cfg = Json::obj([
        ("command", Json::s("correlate")),
        ("scores", path_json(&scores_path)),
        ("corpus", path_json(&corpus_path)),
        ("out", path_json(&out)),
    ]);
    let scores = load_score_table(&scores_path)?;
    let corpus = load_corpus_at(&corpus_path)?;
    let report = correlate(&scores, &corpus)?;
    let json = report_json(&report, Some(cfg));
    atomic_write_bytes(&out, (json.to_pretty() + "\n").as_bytes())
}

fn parse_grid(spec: &str) -> Result<KdeGrid> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let bad = || Error::Usage(format!("--grid expects lo,hi,steps, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let steps: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) || steps < 2 {
        return Err(Error::Usage(format!(
            "--grid needs finite lo < hi and steps >= 2, got {spec:?}"
        )));
    }
    Ok(KdeGrid { lo, hi, steps })
}

pub fn run_report(args: ReportArgs, file: &FileConfig) -> Result<()> {
    let scores_path = require("scores", args.scores.or(file.path_value("report", "scores")?))?;
    let out = require("out", args.out.or(file.path_value("report", "out")?))?;
    let bandwidth = args
        .bandwidth
        .or(file.f64_value("report", "bandwidth")?)
        .unwrap_or(0.2);
    let grid_spec = require("grid", args.grid.or(file.string_value("report", "grid")?))?;

    if !(bandwidth > 0.0) {
        return Err(Error::Usage(format!("--bandwidth must be positive, got {bandwidth}")));
    }
    let grid = parse_grid(&grid_spec)?;
    let cfg = Json::obj([
        ("command", Json::s("report")),
        ("scores", path_json(&scores_path)),
        ("out", path_json(&out)),
        ("bandwidth", Json::num(bandwidth)),
        ("grid", Json::s(&grid_spec)),
    ]);

    let table = load_score_table(&scores_path)?;
    if table.rows.is_empty() {
        return Err(Error::Usage(format!(
            "score table {} has no rows",
            scores_path.display()
        )));
    }
    let mut groups = Vec::new();
    for metric in table.metrics() {
        for category in QualityCategory::ALL {
            let samples: Vec<f64> = table
                .rows
                .iter()
                .filter(|r| r.metric == metric && r.category == category)
                .map(|r| r.score)
                .collect();
            if samples.is_empty() {
                eprintln!(
                    "warning: no {} scores for metric {metric:?}; group omitted",
                    category.as_str()
                );
                continue;
            }
            let curve = gaussian_kde(&samples, bandwidth, &grid)?;
            let n = samples.len();
            let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = samples.iter().sum::<f64>() / n as f64;
            groups.push(Json::obj([
                ("metric", Json::s(&metric)),
                ("category", Json::s(category.as_str())),
                ("n", Json::i(n as i64)),
                ("min", Json::num(min)),
                ("mean", Json::num(mean)),
                ("max", Json::num(max)),
                ("density", Json::arr(curve.density.into_iter().map(Json::num))),
            ]));
        }
    }
    let json = Json::obj([
        ("config", cfg),
        ("bandwidth", Json::num(bandwidth)),
        (
            "grid",
            Json::obj([
                ("lo", Json::num(grid.lo)),
                ("hi", Json::num(grid.hi)),
                ("steps", Json::i(grid.steps as i64)),
            ]),
        ),
        ("groups", Json::arr(groups)),
    ]);
    atomic_write_bytes(&out, (json.to_pretty() + "\n").as_bytes())
}
