//! CSV ingestion for external reference-game exports: one row per
//! utterance, grouped into instances by game and round id. Speaker rows
//! whose click succeeded become references; rows never become candidates,
//! so ingested corpora are typically scored against imported human
//! utterances or freshly attached candidates.

use std::collections::BTreeSet;
use std::path::Path;

use crate::corpus::{Color, ColorContext, Corpus, EvalInstance};
use crate::{Error, Result};

/// Maps the required roles onto concrete column names. Defaults follow
/// the common export layout `game_id, round_id, utterance, role,
/// clicked_correct, target_index, colH1..colV3`.
#[derive(Debug, Clone)]
pub struct CsvColumnMap {
    pub game_id: String,
    pub round_id: String,
    pub utterance: String,
    pub role: String,
    pub clicked_correct: String,
    pub target_index: String,
    /// Per color: the H, S, V column names.
    pub color_columns: [[String; 3]; 3],
    /// Value of the role column marking speaker rows.
    pub speaker_role: String,
}

impl Default for CsvColumnMap {
    fn default() -> Self {
        let col = |axis: &str, i: usize| format!("col{axis}{i}");
        CsvColumnMap {
            game_id: "game_id".into(),
            round_id: "round_id".into(),
            utterance: "utterance".into(),
            role: "role".into(),
            clicked_correct: "clicked_correct".into(),
            target_index: "target_index".into(),
            color_columns: [1, 2, 3].map(|i| ["H", "S", "V"].map(|a| col(a, i))),
            speaker_role: "speaker".into(),
        }
    }
}

struct ColumnIndices {
    game_id: usize,
    round_id: usize,
    utterance: usize,
    role: usize,
    clicked_correct: usize,
    target_index: usize,
    colors: [[usize; 3]; 3],
}

fn resolve_columns(path: &Path, headers: &csv::StringRecord, map: &CsvColumnMap) -> Result<ColumnIndices> {
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::parse(path, 1, format!("missing required column {name:?}"))
        })
    };
    Ok(ColumnIndices {
        game_id: find(&map.game_id)?,
        round_id: find(&map.round_id)?,
        utterance: find(&map.utterance)?,
        role: find(&map.role)?,
        clicked_correct: find(&map.clicked_correct)?,
        target_index: find(&map.target_index)?,
        colors: [
            [find(&map.color_columns[0][0])?, find(&map.color_columns[0][1])?, find(&map.color_columns[0][2])?],
            [find(&map.color_columns[1][0])?, find(&map.color_columns[1][1])?, find(&map.color_columns[1][2])?],
            [find(&map.color_columns[2][0])?, find(&map.color_columns[2][1])?, find(&map.color_columns[2][2])?],
        ],
    })
}

/// Loads and groups a reference-game CSV. Instances keep the first-seen
/// order of their (game, round) keys; rounds whose successful speaker
/// utterances are all empty are dropped, since an instance without
/// references cannot be scored.
pub fn load_corpus_csv(path: &Path, map: &CsvColumnMap) -> Result<Corpus> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::parse(path, 0, e.to_string()),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let cols = resolve_columns(path, &headers, map)?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::BTreeMap<String, (ColorContext, Vec<String>, usize)> =
        std::collections::BTreeMap::new();

    for (i, record) in reader.records().enumerate() {
        let lineno = i + 2; // header occupies line 1
        let record = record.map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let field = |idx: usize| -> Result<&str> {
            record.get(idx).ok_or_else(|| {
                Error::parse(path, lineno, format!("row has only {} fields", record.len()))
            })
        };

        let game = field(cols.game_id)?.trim().to_string();
        let round = field(cols.round_id)?.trim().to_string();
        if game.is_empty() || round.is_empty() {
            return Err(Error::parse(path, lineno, "empty game_id or round_id"));
        }
        let key = format!("{game}:{round}");

        let parse_f64 = |idx: usize, what: &str| -> Result<f64> {
            let raw = field(idx)?;
            raw.trim().parse::<f64>().map_err(|_| {
                Error::parse(path, lineno, format!("field {what} is not a number: {raw:?}"))
            })
        };
        let mut colors = Vec::with_capacity(3);
        for (ci, axes) in cols.colors.iter().enumerate() {
            let h = parse_f64(axes[0], &format!("colH{}", ci + 1))?;
            let s = parse_f64(axes[1], &format!("colS{}", ci + 1))?;
            let v = parse_f64(axes[2], &format!("colV{}", ci + 1))?;
            colors.push(Color::new(h, s, v).map_err(|e| match e {
                Error::Invalid(msg) => Error::parse(path, lineno, msg),
                other => other,
            })?);
        }
        let colors: [Color; 3] = colors.try_into().unwrap();
        let target_raw = field(cols.target_index)?.trim();
        let target_index: usize = target_raw.parse().ok().filter(|t| *t <= 2).ok_or_else(|| {
            Error::parse(path, lineno, format!("target_index must be 0..=2, got {target_raw:?}"))
        })?;

        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            (
                ColorContext {
                    context_id: key.clone(),
                    pair_id: None,
                    colors,
                    target_index,
                },
                Vec::new(),
                lineno,
            )
        });
        if entry.0.colors != colors || entry.0.target_index != target_index {
            return Err(Error::parse(
                path,
                lineno,
                format!("round {key:?} repeats with different colors or target (first seen at line {})", entry.2),
            ));
        }

        let role = field(cols.role)?.trim();
        let clicked = is_truthy(field(cols.clicked_correct)?);
        let utterance = field(cols.utterance)?.trim().to_string();
        if role.eq_ignore_ascii_case(&map.speaker_role) && clicked && !utterance.is_empty() {
            entry.1.push(utterance);
        }
    }

    let mut instances = Vec::new();
    for key in order {
        let (context, references, _) = groups.remove(&key).unwrap();
        if references.is_empty() {
            continue;
        }
        instances.push(EvalInstance { context, candidates: Vec::new(), references });
    }

    // Distinct ids are guaranteed by grouping, but the shared validator
    // still runs in load_corpus; sanity-check here for direct callers.
    let ids: BTreeSet<_> = instances.iter().map(|i| &i.context.context_id).collect();
    debug_assert_eq!(ids.len(), instances.len());
    Ok(Corpus::new(instances))
}

fn is_truthy(s: &str) -> bool {
    matches!(s.trim().to_ascii_lowercase().as_str(), "true" | "1" | "yes" | "y")
}
