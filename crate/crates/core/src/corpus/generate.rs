//! Synthetic reference-game generator. Each pair of contexts shares three
//! colors: two drawn from one term's region in opposite value bands and a
//! third from a disjoint term. That layout makes all three candidate
//! categories realizable by construction, and every category claim is
//! re-verified against the lexicon before a pair is accepted.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::colorspace::{ciede2000, color_to_lab};
use crate::corpus::{
    Candidate, Color, ColorContext, ColorLexicon, Corpus, EvalInstance, Modifier, QualityCategory,
    Region,
};
use crate::textproc::tokenize;
use crate::{Error, Result};

/// Default CIEDE2000 cutoff for [`dedupe_misleading`].
pub const DEFAULT_DEDUPE_THRESHOLD: f64 = 20.0;

/// Probability that a reference renders a term through one of its aliases.
const ALIAS_PROB: f64 = 0.5;

/// Attempts per pair before giving up on the lexicon.
const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub n_pairs: usize,
    pub refs_per_context: usize,
    pub seed: u64,
    pub lexicon: ColorLexicon,
}

const DESC_A: [&str; 3] = ["{m} {A}", "the {m} {A}", "the {m} {A} one"];
const AMB_A: [&str; 3] = ["{A}", "the {A}", "the {A} one"];
const DESC_B: [&str; 5] = ["{B}", "the {B}", "the {B} one", "{mp} {B}", "the {mp} {B} one"];
const AMB_B: [&str; 2] = ["{mp}", "the {mp} one"];

// Reference phrasings deliberately avoid repeating the bare candidate
// templates: real speakers paraphrase, and near-verbatim references would
// hand n-gram metrics an unrealistically clean signal.
const REFS_A: [&str; 12] = [
    "it is the {m} {A} one",
    "the {m} {A} swatch",
    "{m} {A} color",
    "that {m} {A} one",
    "pick the {m} {A} one",
    "kind of a {m} {A} shade",
    "the one that is {m} {A}",
    "more of a {m} {A} color",
    "the {A} one that looks {m}",
    "the {m} shade of {A}",
    "i would say {m} {A}",
    "go with the {m} {A} one",
];
const REFS_B: [&str; 12] = [
    "it is the {B} one",
    "the {B} swatch",
    "{B} color",
    "that {B} one",
    "pick the {B} one",
    "kind of a {B} shade",
    "the one that is {B}",
    "more of a {B} color",
    "the {mp} {B} one",
    "the {B} one that looks {mp}",
    "i would say {B}",
    "go with the {B} one",
];

pub fn generate_synthetic(cfg: &GenerateConfig) -> Result<Corpus> {
    if cfg.n_pairs < 1 {
        return Err(Error::Usage("n_pairs must be at least 1".into()));
    }
    if cfg.refs_per_context < 1 {
        return Err(Error::Usage("refs_per_context must be at least 1".into()));
    }
    let lex = &cfg.lexicon;
    let canon = canonical_terms(lex);
    if canon.len() < 6 {
        return Err(Error::Usage(format!(
            "lexicon has {} base terms; at least 6 required",
            canon.len()
        )));
    }
    let mod_pairs = disjoint_modifier_pairs(lex);
    if mod_pairs.is_empty() {
        return Err(Error::Usage(
            "lexicon needs two modifiers with disjoint regions".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut instances = Vec::with_capacity(2 * cfg.n_pairs);
    for pair_idx in 0..cfg.n_pairs {
        let pair_id = format!("pair-{pair_idx:04}");
        let (a, b) = realize_pair(&mut rng, cfg, &canon, &mod_pairs, &pair_id)?;
        instances.push(a);
        instances.push(b);
    }
    let corpus = Corpus::new(instances);
    corpus.validate()?;
    Ok(corpus)
}

/// One term per distinct region, first name in lexicographic order. The
/// remaining names act as rendering synonyms only.
fn canonical_terms(lex: &ColorLexicon) -> Vec<(String, Region)> {
    let mut out: Vec<(String, Region)> = Vec::new();
    for (name, region) in lex.terms() {
        if !out.iter().any(|(_, r)| r == region) {
            out.push((name.to_string(), *region));
        }
    }
    out
}

fn disjoint_modifier_pairs(lex: &ColorLexicon) -> Vec<(String, Modifier, String, Modifier)> {
    let mods: Vec<(String, Modifier)> =
        lex.modifiers().map(|(n, m)| (n.to_string(), *m)).collect();
    let mut pairs = Vec::new();
    for i in 0..mods.len() {
        for j in (i + 1)..mods.len() {
            if mods[i].1.region().disjoint(&mods[j].1.region()) {
                pairs.push((mods[i].0.clone(), mods[i].1, mods[j].0.clone(), mods[j].1));
            }
        }
    }
    pairs
}

fn realize_pair(
    rng: &mut ChaCha8Rng,
    cfg: &GenerateConfig,
    canon: &[(String, Region)],
    mod_pairs: &[(String, Modifier, String, Modifier)],
    pair_id: &str,
) -> Result<(EvalInstance, EvalInstance)> {
    let lex = &cfg.lexicon;
    for _ in 0..MAX_ATTEMPTS {
        let (n1, m1, n2, m2) = pick(rng, mod_pairs);
        let ((m_name, m), (mp_name, mp)) = if rng.random::<bool>() {
            ((n1.as_str(), m1), (n2.as_str(), m2))
        } else {
            ((n2.as_str(), m2), (n1.as_str(), m1))
        };

        // A must be sampleable in both value bands, B in the mp band and
        // fully separated from A.
        let a_pool: Vec<&(String, Region)> = canon
            .iter()
            .filter(|(_, r)| sample_box(&m.apply(r)).is_some() && sample_box(&mp.apply(r)).is_some())
            .collect();
        if a_pool.is_empty() {
            continue;
        }
        let (a_name, a_region) = pick(rng, &a_pool);
        let b_pool: Vec<&(String, Region)> = canon
            .iter()
            .filter(|(n, r)| n != a_name && r.disjoint(a_region) && sample_box(&mp.apply(r)).is_some())
            .collect();
        if b_pool.is_empty() {
            continue;
        }
        let (b_name, b_region) = pick(rng, &b_pool);

        let c1 = draw_color(rng, &sample_box(&m.apply(a_region)).unwrap());
        let c2 = draw_color(rng, &sample_box(&mp.apply(a_region)).unwrap());
        let c3 = draw_color(rng, &sample_box(&mp.apply(b_region)).unwrap());

        let slots_a = [slot("{m}", m_name, lex.modifier_aliases_of(m_name)),
                       slot("{A}", a_name, lex.aliases_of(a_name))];
        let slots_b = [slot("{mp}", mp_name, lex.modifier_aliases_of(mp_name)),
                       slot("{B}", b_name, lex.aliases_of(b_name))];
        let subs_a = canonical_subs(&slots_a);
        let subs_b = canonical_subs(&slots_b);
        let desc_a = render(pick(rng, &DESC_A), &subs_a);
        let amb_a = render(pick(rng, &AMB_A), &subs_a);
        let desc_b = render(pick(rng, &DESC_B), &subs_b);
        let amb_b = render(pick(rng, &AMB_B), &subs_b);
        let refs_a = render_refs(rng, &REFS_A, cfg.refs_per_context, &slots_a);
        let refs_b = render_refs(rng, &REFS_B, cfg.refs_per_context, &slots_b);

        let ctx_a = place(rng, format!("{pair_id}-a"), pair_id, [c1, c2, c3], 0);
        let ctx_b = place(rng, format!("{pair_id}-b"), pair_id, [c1, c2, c3], 2);

        let inst_a = EvalInstance {
            context: ctx_a,
            candidates: vec![
                Candidate { text: desc_a.clone(), category: QualityCategory::Descriptive },
                Candidate { text: amb_a, category: QualityCategory::Ambiguous },
                Candidate { text: desc_b.clone(), category: QualityCategory::Misleading },
            ],
            references: refs_a,
        };
        let inst_b = EvalInstance {
            context: ctx_b,
            candidates: vec![
                Candidate { text: desc_b, category: QualityCategory::Descriptive },
                Candidate { text: amb_b, category: QualityCategory::Ambiguous },
                Candidate { text: desc_a, category: QualityCategory::Misleading },
            ],
            references: refs_b,
        };

        if verify_instance(lex, &inst_a) && verify_instance(lex, &inst_b) {
            return Ok((inst_a, inst_b));
        }
    }
    Err(Error::Invalid(format!(
        "context pair {pair_id}: lexicon cannot realize all three candidate categories"
    )))
}

/// Checks the category semantics of every candidate and reference against
/// the lexicon before the pair is accepted.
fn verify_instance(lex: &ColorLexicon, inst: &EvalInstance) -> bool {
    let target = inst.context.target_index;
    let only_target =
        |fits: [bool; 3]| fits[target] && fits.iter().filter(|&&f| f).count() == 1;
    for cand in &inst.candidates {
        let Some(fits) = lex.matched_colors(&tokenize(&cand.text), &inst.context.colors) else {
            return false;
        };
        let ok = match cand.category {
            QualityCategory::Descriptive => only_target(fits),
            QualityCategory::Ambiguous => fits[target] && fits.iter().filter(|&&f| f).count() >= 2,
            QualityCategory::Misleading => !fits[target] && fits.iter().any(|&f| f),
        };
        if !ok {
            return false;
        }
    }
    inst.references.iter().all(|r| {
        lex.matched_colors(&tokenize(r), &inst.context.colors)
            .is_some_and(only_target)
    })
}

fn place(
    rng: &mut ChaCha8Rng,
    context_id: String,
    pair_id: &str,
    colors: [Color; 3],
    target: usize,
) -> ColorContext {
    let mut order = [0usize, 1, 2];
    fisher_yates(rng, &mut order);
    let placed = [colors[order[0]], colors[order[1]], colors[order[2]]];
    let target_index = order.iter().position(|&i| i == target).unwrap();
    ColorContext { context_id, pair_id: Some(pair_id.to_string()), colors: placed, target_index }
}

fn render(template: &str, subs: &[(&str, String)]) -> String {
    let mut out = template.to_string();
    for (key, val) in subs {
        out = out.replace(key, val);
    }
    out
}

/// A template placeholder, the surface the candidates use for it, and the
/// interchangeable alternatives references may swap in.
struct Slot {
    key: &'static str,
    canonical: String,
    aliases: Vec<String>,
}

fn slot(key: &'static str, canonical: &str, aliases: Vec<&str>) -> Slot {
    Slot {
        key,
        canonical: canonical.to_string(),
        aliases: aliases.into_iter().map(str::to_string).collect(),
    }
}

fn canonical_subs(slots: &[Slot]) -> Vec<(&str, String)> {
    slots.iter().map(|s| (s.key, s.canonical.clone())).collect()
}

fn render_refs(rng: &mut ChaCha8Rng, templates: &[&str], k: usize, slots: &[Slot]) -> Vec<String> {
    let mut perm: Vec<usize> = (0..templates.len()).collect();
    fisher_yates(rng, &mut perm);
    (0..k)
        .map(|i| {
            let template = templates[perm[i % templates.len()]];
            let subs: Vec<(&str, String)> = slots
                .iter()
                .map(|s| {
                    let surface = if !s.aliases.is_empty() && rng.random::<f64>() < ALIAS_PROB {
                        s.aliases[rng.random_range(0..s.aliases.len())].clone()
                    } else {
                        s.canonical.clone()
                    };
                    (s.key, surface)
                })
                .collect();
            render(template, &subs)
        })
        .collect()
}

/// Shrinks a region away from its own boundary so sampled colors stay
/// strictly inside it (and outside every disjoint neighbor). Returns
/// `None` when the region is too thin to sample safely.
struct SampleBox {
    hue_lo: f64,
    hue_width: f64,
    s: (f64, f64),
    v: (f64, f64),
}

fn sample_box(region: &Region) -> Option<SampleBox> {
    let hue_margin = (region.hue.width() * 0.2).min(3.0);
    let hue_width = region.hue.width() - 2.0 * hue_margin;
    let s = shrink(region.s)?;
    let v = shrink(region.v)?;
    if hue_width <= 0.0 {
        return None;
    }
    Some(SampleBox { hue_lo: region.hue.lo + hue_margin, hue_width, s, v })
}

fn shrink((lo, hi): (f64, f64)) -> Option<(f64, f64)> {
    let width = hi - lo;
    if width < 0.02 {
        return None;
    }
    let margin = width * 0.08;
    Some((lo + margin, hi - margin))
}

fn draw_color(rng: &mut ChaCha8Rng, sb: &SampleBox) -> Color {
    // Quantized to the canonical file precision so that serializing a
    // generated corpus is lossless.
    let h = quant6((sb.hue_lo + uniform(rng, 0.0, sb.hue_width)).rem_euclid(360.0)).rem_euclid(360.0);
    let s = quant6(uniform(rng, sb.s.0, sb.s.1));
    let v = quant6(uniform(rng, sb.v.0, sb.v.1));
    Color::new(h, s, v).expect("sample boxes stay inside valid HSV bounds")
}

fn quant6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    &xs[rng.random_range(0..xs.len())]
}

fn fisher_yates<T>(rng: &mut ChaCha8Rng, xs: &mut [T]) {
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
}

/// Removes misleading candidates whose text also appears in the
/// instance's own references, provided the target and the candidate's
/// source color differ by at least `threshold` under CIEDE2000. Close
/// colors keep their duplicates: identical descriptions are legitimate
/// when the colors are nearly indistinguishable. The source color is the
/// paired context's target when the pair is present, otherwise the
/// distractor nearest the target.
pub fn dedupe_misleading(mut corpus: Corpus, threshold: f64) -> Result<Corpus> {
    if !(threshold >= 0.0) {
        return Err(Error::Usage(format!("dedupe threshold must be >= 0, got {threshold}")));
    }
    let mut pair_targets: std::collections::BTreeMap<String, Vec<(usize, Color)>> =
        std::collections::BTreeMap::new();
    for (idx, inst) in corpus.instances.iter().enumerate() {
        if let Some(pid) = &inst.context.pair_id {
            pair_targets.entry(pid.clone()).or_default().push((idx, *inst.context.target()));
        }
    }

    for (idx, inst) in corpus.instances.iter_mut().enumerate() {
        let ctx = &inst.context;
        let target = *ctx.target();
        let paired_target = ctx.pair_id.as_ref().and_then(|pid| {
            pair_targets.get(pid).and_then(|members| {
                members.iter().find(|(i, _)| *i != idx).map(|(_, c)| *c)
            })
        });
        let source = paired_target.unwrap_or_else(|| {
            let [d0, d1] = ctx.distractor_indices();
            let dist = |i: usize| ciede2000(&color_to_lab(&ctx.colors[i]), &color_to_lab(&target));
            if dist(d0) <= dist(d1) { ctx.colors[d0] } else { ctx.colors[d1] }
        });
        let references = &inst.references;
        inst.candidates.retain(|cand| {
            if cand.category != QualityCategory::Misleading {
                return true;
            }
            let duplicated = references.iter().any(|r| r.trim() == cand.text.trim());
            if !duplicated {
                return true;
            }
            let de = ciede2000(&color_to_lab(&target), &color_to_lab(&source));
            de < threshold
        });
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n_pairs: usize, refs: usize, seed: u64) -> GenerateConfig {
        GenerateConfig {
            n_pairs,
            refs_per_context: refs,
            seed,
            lexicon: ColorLexicon::builtin(),
        }
    }

    #[test]
    fn generates_paired_contexts_with_all_categories() {
        let corpus = generate_synthetic(&config(180, 5, 7)).unwrap();
        assert_eq!(corpus.instances.len(), 360);
        for inst in &corpus.instances {
            assert_eq!(inst.references.len(), 5);
            for cat in QualityCategory::ALL {
                assert!(
                    inst.candidates.iter().any(|c| c.category == cat),
                    "{} missing {}",
                    inst.context.context_id,
                    cat.as_str()
                );
            }
        }
        corpus.validate().unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic(&config(1, 1, 0)).unwrap();
        let b = generate_synthetic(&config(1, 1, 0)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&config(1, 1, 1)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn category_semantics_hold_under_region_predicates() {
        let lex = ColorLexicon::builtin();
        let corpus = generate_synthetic(&config(50, 3, 3)).unwrap();
        for inst in &corpus.instances {
            let target = inst.context.target_index;
            for cand in &inst.candidates {
                let fits = lex
                    .matched_colors(&tokenize(&cand.text), &inst.context.colors)
                    .expect("candidates use lexicon vocabulary");
                let hits = fits.iter().filter(|&&f| f).count();
                match cand.category {
                    QualityCategory::Descriptive => {
                        assert!(fits[target] && hits == 1, "{:?}", cand.text)
                    }
                    QualityCategory::Ambiguous => {
                        assert!(fits[target] && hits >= 2, "{:?}", cand.text)
                    }
                    QualityCategory::Misleading => {
                        assert!(!fits[target] && hits >= 1, "{:?}", cand.text)
                    }
                }
            }
        }
    }

    #[test]
    fn misleading_is_paired_descriptive() {
        let corpus = generate_synthetic(&config(20, 2, 11)).unwrap();
        for pair in corpus.instances.chunks(2) {
            let desc = |i: &EvalInstance| {
                i.candidates
                    .iter()
                    .find(|c| c.category == QualityCategory::Descriptive)
                    .unwrap()
                    .text
                    .clone()
            };
            let misl = |i: &EvalInstance| {
                i.candidates
                    .iter()
                    .find(|c| c.category == QualityCategory::Misleading)
                    .unwrap()
                    .text
                    .clone()
            };
            assert_eq!(desc(&pair[0]), misl(&pair[1]));
            assert_eq!(desc(&pair[1]), misl(&pair[0]));
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(matches!(generate_synthetic(&config(0, 5, 0)), Err(Error::Usage(_))));
        assert!(matches!(generate_synthetic(&config(5, 0, 0)), Err(Error::Usage(_))));
        let tiny = ColorLexicon::from_toml_str(
            r#"
            [terms.blue]
            h = [200.0, 260.0]
            [terms.green]
            h = [70.0, 150.0]
            [modifiers.dark]
            v = [0.0, 0.5]
            [modifiers.light]
            v = [0.6, 1.0]
            "#,
        )
        .unwrap();
        let cfg = GenerateConfig { n_pairs: 1, refs_per_context: 1, seed: 0, lexicon: tiny };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Usage(_))));
    }

    #[test]
    fn generation_error_names_failing_context() {
        // Six nested hue intervals: every pair overlaps, so no disjoint
        // B term ever exists and the pair cannot be realized.
        let stuck = ColorLexicon::from_toml_str(
            r#"
            [terms.a1]
            h = [0.0, 120.0]
            [terms.b2]
            h = [10.0, 110.0]
            [terms.c3]
            h = [20.0, 100.0]
            [terms.d4]
            h = [30.0, 90.0]
            [terms.e5]
            h = [40.0, 80.0]
            [terms.f6]
            h = [50.0, 70.0]
            [modifiers.dark]
            v = [0.0, 0.5]
            [modifiers.light]
            v = [0.6, 1.0]
            "#,
        )
        .unwrap();
        let cfg = GenerateConfig { n_pairs: 1, refs_per_context: 1, seed: 0, lexicon: stuck };
        let err = generate_synthetic(&cfg).unwrap_err();
        assert!(err.to_string().contains("pair-0000"), "{err}");
    }

    #[test]
    fn dedupe_removes_far_duplicates_only() {
        let mut corpus = generate_synthetic(&config(4, 3, 5)).unwrap();
        // Plant the misleading text into the first instance's references.
        let misl = corpus.instances[0]
            .candidates
            .iter()
            .find(|c| c.category == QualityCategory::Misleading)
            .unwrap()
            .text
            .clone();
        corpus.instances[0].references.push(misl.clone());

        // Paired targets sit in opposite value bands of different hue
        // regions; their distance comfortably exceeds 20.
        let deduped = dedupe_misleading(corpus.clone(), 20.0).unwrap();
        assert!(deduped.instances[0]
            .candidates
            .iter()
            .all(|c| c.category != QualityCategory::Misleading));
        // Other instances keep theirs.
        assert!(deduped.instances[1]
            .candidates
            .iter()
            .any(|c| c.category == QualityCategory::Misleading));

        // A huge threshold retains the duplicate.
        let kept = dedupe_misleading(corpus.clone(), 1e9).unwrap();
        assert!(kept.instances[0]
            .candidates
            .iter()
            .any(|c| c.category == QualityCategory::Misleading));

        assert!(dedupe_misleading(corpus, -1.0).is_err());
    }
}
