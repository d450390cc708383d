//! Color term lexicon: maps single-word terms to HSV regions and modifier
//! words to saturation/value restrictions. Shared by the synthetic
//! generator (to realize candidate categories) and the oracle listener
//! (to resolve which context colors an utterance fits).

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::corpus::Color;
use crate::{Error, Result};

/// Hue arc `[lo, hi)` in degrees; wraps through 0 when `lo > hi`.
/// `(0, 360)` covers every hue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HueInterval {
    pub lo: f64,
    pub hi: f64,
}

impl HueInterval {
    pub const FULL: HueInterval = HueInterval { lo: 0.0, hi: 360.0 };

    pub fn contains(&self, h: f64) -> bool {
        if self.lo <= self.hi {
            (self.lo..self.hi).contains(&h)
        } else {
            h >= self.lo || h < self.hi
        }
    }

    /// Arc length in degrees.
    pub fn width(&self) -> f64 {
        if self.lo <= self.hi {
            self.hi - self.lo
        } else {
            360.0 - self.lo + self.hi
        }
    }
}

/// An axis-aligned HSV box; `s` and `v` are closed intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub hue: HueInterval,
    pub s: (f64, f64),
    pub v: (f64, f64),
}

impl Region {
    pub fn contains(&self, c: &Color) -> bool {
        self.hue.contains(c.h)
            && (self.s.0..=self.s.1).contains(&c.s)
            && (self.v.0..=self.v.1).contains(&c.v)
    }

    pub fn is_empty(&self) -> bool {
        self.hue.width() <= 0.0 || self.s.0 > self.s.1 || self.v.0 > self.v.1
    }

    /// True when the two boxes cannot share any color.
    pub fn disjoint(&self, other: &Region) -> bool {
        let hue_disjoint = if self.hue == HueInterval::FULL || other.hue == HueInterval::FULL {
            false
        } else {
            // Compare on the unwrapped circle: arcs are disjoint when
            // neither endpoint of one lies inside the other.
            !(self.hue.contains(other.hue.lo)
                || other.hue.contains(self.hue.lo)
                || self.hue == other.hue)
        };
        hue_disjoint
            || self.s.1 < other.s.0
            || other.s.1 < self.s.0
            || self.v.1 < other.v.0
            || other.v.1 < self.v.0
    }
}

/// A modifier word restricts saturation and/or value but leaves hue free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modifier {
    pub s: Option<(f64, f64)>,
    pub v: Option<(f64, f64)>,
}

impl Modifier {
    /// The modifier read as a standalone predicate over colors.
    pub fn region(&self) -> Region {
        Region {
            hue: HueInterval::FULL,
            s: self.s.unwrap_or((0.0, 1.0)),
            v: self.v.unwrap_or((0.0, 1.0)),
        }
    }

    /// Restricts a term's region by this modifier.
    pub fn apply(&self, r: &Region) -> Region {
        let own = self.region();
        Region {
            hue: r.hue,
            s: (r.s.0.max(own.s.0), r.s.1.min(own.s.1)),
            v: (r.v.0.max(own.v.0), r.v.1.min(own.v.1)),
        }
    }
}

/// Lookup tables for color terms and modifiers. Terms with identical
/// regions are treated as synonyms (aliases) of each other.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorLexicon {
    terms: BTreeMap<String, Region>,
    modifiers: BTreeMap<String, Modifier>,
}

impl ColorLexicon {
    /// Basic English color vocabulary. Chromatic terms partition the hue
    /// circle at s >= 0.5; gray and white occupy the low-saturation core.
    /// Orange and brown share a hue band and split on value.
    pub fn builtin() -> Self {
        let chroma = |lo: f64, hi: f64| Region {
            hue: HueInterval { lo, hi },
            s: (0.5, 1.0),
            v: (0.2, 1.0),
        };
        let mut terms = BTreeMap::new();
        terms.insert("red".into(), chroma(345.0, 15.0));
        terms.insert(
            "orange".into(),
            Region { hue: HueInterval { lo: 15.0, hi: 45.0 }, s: (0.5, 1.0), v: (0.55, 1.0) },
        );
        terms.insert(
            "brown".into(),
            Region { hue: HueInterval { lo: 15.0, hi: 45.0 }, s: (0.5, 1.0), v: (0.15, 0.5) },
        );
        terms.insert("yellow".into(), chroma(45.0, 70.0));
        terms.insert("green".into(), chroma(70.0, 150.0));
        terms.insert("cyan".into(), chroma(150.0, 200.0));
        terms.insert("turquoise".into(), chroma(150.0, 200.0));
        terms.insert("blue".into(), chroma(200.0, 260.0));
        terms.insert("purple".into(), chroma(260.0, 290.0));
        terms.insert("violet".into(), chroma(260.0, 290.0));
        terms.insert("pink".into(), chroma(290.0, 345.0));
        let low_sat = |s_hi: f64, v: (f64, f64)| Region {
            hue: HueInterval::FULL,
            s: (0.0, s_hi),
            v,
        };
        terms.insert("gray".into(), low_sat(0.15, (0.15, 0.8)));
        terms.insert("grey".into(), low_sat(0.15, (0.15, 0.8)));
        terms.insert("white".into(), low_sat(0.12, (0.85, 1.0)));

        let mut modifiers = BTreeMap::new();
        modifiers.insert("dark".into(), Modifier { s: None, v: Some((0.0, 0.5)) });
        modifiers.insert("deep".into(), Modifier { s: None, v: Some((0.0, 0.5)) });
        modifiers.insert("light".into(), Modifier { s: None, v: Some((0.6, 1.0)) });
        modifiers.insert("pale".into(), Modifier { s: None, v: Some((0.6, 1.0)) });

        let lex = ColorLexicon { terms, modifiers };
        lex.validate().expect("builtin lexicon is well formed");
        lex
    }

    /// Loads a lexicon from a TOML file:
    ///
    /// ```toml
    /// [terms.blue]
    /// h = [200.0, 260.0]   # hue arc [lo, hi), wraps when lo > hi
    /// s = [0.5, 1.0]       # optional, default [0, 1]
    /// v = [0.2, 1.0]       # optional, default [0, 1]
    ///
    /// [modifiers.dark]
    /// v = [0.0, 0.5]       # s and v both optional
    /// ```
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Invalid(msg) => Error::parse(path, 0, msg),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct FileRegion {
            h: Option<[f64; 2]>,
            s: Option<[f64; 2]>,
            v: Option<[f64; 2]>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct FileModifier {
            s: Option<[f64; 2]>,
            v: Option<[f64; 2]>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct FileLexicon {
            terms: BTreeMap<String, FileRegion>,
            #[serde(default)]
            modifiers: BTreeMap<String, FileModifier>,
        }

        let file: FileLexicon =
            toml::from_str(text).map_err(|e| Error::Invalid(format!("lexicon: {e}")))?;
        let terms = file
            .terms
            .into_iter()
            .map(|(name, r)| {
                let hue = r
                    .h
                    .map(|[lo, hi]| HueInterval { lo, hi })
                    .unwrap_or(HueInterval::FULL);
                (name, Region { hue, s: pair(r.s), v: pair(r.v) })
            })
            .collect();
        let modifiers = file
            .modifiers
            .into_iter()
            .map(|(name, m)| {
                (name, Modifier { s: m.s.map(|[a, b]| (a, b)), v: m.v.map(|[a, b]| (a, b)) })
            })
            .collect();
        let lex = ColorLexicon { terms, modifiers };
        lex.validate()?;
        Ok(lex)
    }

    fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Invalid("lexicon has no terms".into()));
        }
        for (name, region) in &self.terms {
            check_word(name, self.modifiers.contains_key(name))?;
            if region.is_empty() || !valid_unit(region.s) || !valid_unit(region.v) {
                return Err(Error::Invalid(format!("lexicon term {name:?} has an empty region")));
            }
            if !(0.0..=360.0).contains(&region.hue.lo) || !(0.0..=360.0).contains(&region.hue.hi) {
                return Err(Error::Invalid(format!(
                    "lexicon term {name:?} hue bounds outside [0, 360]"
                )));
            }
        }
        for (name, m) in &self.modifiers {
            check_word(name, false)?;
            if m.s.is_some_and(|s| !valid_unit(s)) || m.v.is_some_and(|v| !valid_unit(v)) {
                return Err(Error::Invalid(format!("lexicon modifier {name:?} is empty")));
            }
        }
        Ok(())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &Region)> {
        self.terms.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn modifiers(&self) -> impl Iterator<Item = (&str, &Modifier)> {
        self.modifiers.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn term_region(&self, word: &str) -> Option<&Region> {
        self.terms.get(word)
    }

    pub fn modifier(&self, word: &str) -> Option<&Modifier> {
        self.modifiers.get(word)
    }

    /// Terms whose region equals `term`'s region, excluding `term` itself.
    pub fn aliases_of(&self, term: &str) -> Vec<&str> {
        match self.terms.get(term) {
            None => Vec::new(),
            Some(region) => self
                .terms
                .iter()
                .filter(|(name, r)| name.as_str() != term && *r == region)
                .map(|(name, _)| name.as_str())
                .collect(),
        }
    }

    /// Modifier names with an identical effect, mirroring [`Self::aliases_of`].
    pub fn modifier_aliases_of(&self, name: &str) -> Vec<&str> {
        match self.modifiers.get(name) {
            None => Vec::new(),
            Some(m) => self
                .modifiers
                .iter()
                .filter(|(n, other)| n.as_str() != name && *other == m)
                .map(|(n, _)| n.as_str())
                .collect(),
        }
    }

    /// Resolves which of the three context colors an utterance fits:
    /// a color fits when every recognized term or modifier in the
    /// utterance holds for it. Returns `None` when no token is in the
    /// lexicon, so callers can fall back to a uniform guess.
    pub fn matched_colors(&self, tokens: &[String], colors: &[Color; 3]) -> Option<[bool; 3]> {
        let mut any = false;
        let mut fits = [true; 3];
        for tok in tokens {
            let region = match (self.terms.get(tok.as_str()), self.modifiers.get(tok.as_str())) {
                (Some(r), _) => *r,
                (None, Some(m)) => m.region(),
                (None, None) => continue,
            };
            any = true;
            for (i, c) in colors.iter().enumerate() {
                fits[i] = fits[i] && region.contains(c);
            }
        }
        any.then_some(fits)
    }
}

fn pair(x: Option<[f64; 2]>) -> (f64, f64) {
    x.map(|[a, b]| (a, b)).unwrap_or((0.0, 1.0))
}

fn valid_unit((lo, hi): (f64, f64)) -> bool {
    (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi
}

fn check_word(name: &str, clashes_with_modifier: bool) -> Result<()> {
    if name.is_empty()
        || name.chars().any(|c| c.is_whitespace() || c.is_uppercase())
    {
        return Err(Error::Invalid(format!(
            "lexicon entry {name:?} must be a single lowercase word"
        )));
    }
    if clashes_with_modifier {
        return Err(Error::Invalid(format!(
            "lexicon entry {name:?} is both a term and a modifier"
        )));
    }
    Ok(())
}
