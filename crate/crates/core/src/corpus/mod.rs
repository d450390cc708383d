//! Data model for reference-game corpora: colors, contexts, graded
//! candidates, and whole-corpus validation, plus file ingestion and the
//! synthetic generator.

mod csv_ingest;
mod generate;
mod jsonl;
mod lexicon;

pub use csv_ingest::{load_corpus_csv, CsvColumnMap};
pub use generate::{dedupe_misleading, generate_synthetic, GenerateConfig, DEFAULT_DEDUPE_THRESHOLD};
pub use jsonl::{load_corpus, save_corpus, CorpusFormat};
pub use lexicon::{ColorLexicon, HueInterval, Modifier, Region};

use crate::{Error, Result};

/// One color swatch in HSV: `h` in `[0, 360)` degrees, `s` and `v` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Color {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl Color {
    pub fn new(h: f64, s: f64, v: f64) -> Result<Self> {
        if !(0.0..360.0).contains(&h) || !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&v) {
            return Err(Error::Invalid(format!(
                "color ({h}, {s}, {v}) outside h in [0,360), s in [0,1], v in [0,1]"
            )));
        }
        Ok(Color { h, s, v })
    }
}

/// Candidate quality grade. Lower scores are better utterances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum QualityCategory {
    /// Fits the target and no distractor.
    Descriptive,
    /// Fits the target and at least one distractor.
    Ambiguous,
    /// Fits only a distractor.
    Misleading,
}

impl QualityCategory {
    pub const ALL: [QualityCategory; 3] =
        [QualityCategory::Descriptive, QualityCategory::Ambiguous, QualityCategory::Misleading];

    /// Numeric grade used as the correlation target: 1, 2, 3.
    pub fn score(self) -> u8 {
        match self {
            QualityCategory::Descriptive => 1,
            QualityCategory::Ambiguous => 2,
            QualityCategory::Misleading => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QualityCategory::Descriptive => "descriptive",
            QualityCategory::Ambiguous => "ambiguous",
            QualityCategory::Misleading => "misleading",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "descriptive" => Ok(QualityCategory::Descriptive),
            "ambiguous" => Ok(QualityCategory::Ambiguous),
            "misleading" => Ok(QualityCategory::Misleading),
            other => Err(Error::Invalid(format!("unknown quality category {other:?}"))),
        }
    }
}

/// An utterance to be scored, with its quality grade.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub text: String,
    pub category: QualityCategory,
}

/// Three colors and which of them is the speaker's target. `pair_id` links
/// the two contexts that share a color multiset but differ in target.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorContext {
    pub context_id: String,
    pub pair_id: Option<String>,
    pub colors: [Color; 3],
    pub target_index: usize,
}

impl ColorContext {
    pub fn target(&self) -> &Color {
        &self.colors[self.target_index]
    }

    pub fn distractor_indices(&self) -> [usize; 2] {
        match self.target_index {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }
}

/// One scoring unit: a context, the candidates to score in it, and the
/// reference descriptions of its target.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalInstance {
    pub context: ColorContext,
    pub candidates: Vec<Candidate>,
    pub references: Vec<String>,
}

/// A full corpus plus the raw header line (if any) carrying the resolved
/// configuration that produced it. The header is kept verbatim so that
/// loading and re-saving a canonical file reproduces it byte for byte.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub instances: Vec<EvalInstance>,
    pub config_line: Option<String>,
}

impl Corpus {
    pub fn new(instances: Vec<EvalInstance>) -> Self {
        Corpus { instances, config_line: None }
    }

    pub fn candidate_count(&self) -> usize {
        self.instances.iter().map(|i| i.candidates.len()).sum()
    }

    /// Checks every type invariant: color ranges are enforced at
    /// construction, so this validates identifiers, counts, and pair
    /// consistency.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for inst in &self.instances {
            let id = &inst.context.context_id;
            if id.trim().is_empty() {
                return Err(Error::Invalid("empty context_id".into()));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::Invalid(format!("duplicate context_id {id:?}")));
            }
            if inst.context.target_index > 2 {
                return Err(Error::Invalid(format!(
                    "context {id:?}: target_index {} not in 0..=2",
                    inst.context.target_index
                )));
            }
            if inst.references.is_empty() {
                return Err(Error::Invalid(format!("context {id:?}: no references")));
            }
            if inst.references.iter().any(|r| r.trim().is_empty()) {
                return Err(Error::Invalid(format!("context {id:?}: empty reference text")));
            }
            if let Some(c) = inst.candidates.iter().find(|c| c.text.trim().is_empty()) {
                return Err(Error::Invalid(format!(
                    "context {id:?}: empty {} candidate text",
                    c.category.as_str()
                )));
            }
        }
        self.validate_pairs()
    }

    fn validate_pairs(&self) -> Result<()> {
        let mut groups: std::collections::BTreeMap<&str, Vec<&EvalInstance>> =
            std::collections::BTreeMap::new();
        for inst in &self.instances {
            if let Some(pid) = &inst.context.pair_id {
                groups.entry(pid).or_default().push(inst);
            }
        }
        for (pid, members) in groups {
            if members.len() > 2 {
                return Err(Error::Invalid(format!(
                    "pair {pid:?} has {} contexts; at most 2 allowed",
                    members.len()
                )));
            }
            if members.len() == 2 {
                let (a, b) = (&members[0].context, &members[1].context);
                if sorted_colors(&a.colors) != sorted_colors(&b.colors) {
                    return Err(Error::Invalid(format!(
                        "pair {pid:?}: contexts do not share a color multiset"
                    )));
                }
                if a.target() == b.target() {
                    return Err(Error::Invalid(format!(
                        "pair {pid:?}: contexts share the same target color"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn sorted_colors(colors: &[Color; 3]) -> Vec<(u64, u64, u64)> {
    // Bit-exact multiset comparison; paired contexts carry identical floats.
    let mut keys: Vec<_> = colors
        .iter()
        .map(|c| (c.h.to_bits(), c.s.to_bits(), c.v.to_bits()))
        .collect();
    keys.sort_unstable();
    keys
}
