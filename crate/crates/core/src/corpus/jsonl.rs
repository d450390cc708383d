//! Corpus serialization. Files are JSON Lines, one instance per line,
//! optionally preceded by a header line `{"config": ...}` echoing the
//! configuration that produced the file. The header is preserved verbatim
//! so load followed by save is byte-identical on canonical files.

use std::path::Path;

use serde::Deserialize;

use crate::corpus::{Candidate, Color, ColorContext, Corpus, EvalInstance, QualityCategory};
use crate::jsonfmt::Json;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Picks a format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let corpus = match format {
        CorpusFormat::Jsonl => load_jsonl(path)?,
        CorpusFormat::Csv => super::load_corpus_csv(path, &super::CsvColumnMap::default())?,
    };
    corpus.validate()?;
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = String::new();
    if let Some(header) = &corpus.config_line {
        out.push_str(header);
        out.push('\n');
    }
    for inst in &corpus.instances {
        out.push_str(&instance_json(inst).to_compact());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub(crate) fn instance_json(inst: &EvalInstance) -> Json {
    let ctx = &inst.context;
    Json::obj([
        ("context_id", Json::s(&ctx.context_id)),
        (
            "pair_id",
            match &ctx.pair_id {
                Some(p) => Json::s(p),
                None => Json::Null,
            },
        ),
        (
            "colors",
            Json::arr(ctx.colors.iter().map(|c| {
                Json::arr([Json::f6(c.h), Json::f6(c.s), Json::f6(c.v)])
            })),
        ),
        ("target_index", Json::i(ctx.target_index as i64)),
        (
            "candidates",
            Json::arr(inst.candidates.iter().map(|c| {
                Json::obj([
                    ("text", Json::s(&c.text)),
                    ("category", Json::s(c.category.as_str())),
                ])
            })),
        ),
        ("references", Json::arr(inst.references.iter().map(|r| Json::s(r)))),
    ])
}

#[derive(Deserialize)]
struct LineInstance {
    context_id: String,
    #[serde(default)]
    pair_id: Option<String>,
    colors: Vec<[f64; 3]>,
    target_index: usize,
    #[serde(default)]
    candidates: Vec<LineCandidate>,
    references: Vec<String>,
}

#[derive(Deserialize)]
struct LineCandidate {
    text: String,
    category: String,
}

fn load_jsonl(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut corpus = Corpus::default();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        if corpus.config_line.is_none() && corpus.instances.is_empty() && is_config_header(line) {
            corpus.config_line = Some(line.to_string());
            continue;
        }
        let raw: LineInstance = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        corpus.instances.push(instance_from_line(raw).map_err(|e| match e {
            Error::Invalid(msg) => Error::parse(path, lineno, msg),
            other => other,
        })?);
    }
    Ok(corpus)
}

/// A header line is a one-key object `{"config": ...}`.
fn is_config_header(line: &str) -> bool {
    match serde_json::from_str::<serde_json::Value>(line) {
        Ok(serde_json::Value::Object(map)) => map.len() == 1 && map.contains_key("config"),
        _ => false,
    }
}

fn instance_from_line(raw: LineInstance) -> Result<EvalInstance> {
    let colors: [Color; 3] = raw
        .colors
        .iter()
        .map(|[h, s, v]| Color::new(*h, *s, *v))
        .collect::<Result<Vec<_>>>()?
        .try_into()
        .map_err(|_| {
            Error::Invalid(format!(
                "context {:?}: expected 3 colors, got {}",
                raw.context_id,
                raw.colors.len()
            ))
        })?;
    if raw.target_index > 2 {
        return Err(Error::Invalid(format!(
            "context {:?}: target_index {} not in 0..=2",
            raw.context_id, raw.target_index
        )));
    }
    let candidates = raw
        .candidates
        .into_iter()
        .map(|c| {
            Ok(Candidate { text: c.text, category: QualityCategory::parse(&c.category)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalInstance {
        context: ColorContext {
            context_id: raw.context_id,
            pair_id: raw.pair_id,
            colors,
            target_index: raw.target_index,
        },
        candidates,
        references: raw.references,
    })
}
