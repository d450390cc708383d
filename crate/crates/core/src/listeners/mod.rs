//! Listener models: given an utterance and a three-color context, produce a
//! distribution over which color was meant. Three families live here: an
//! analytic oracle driven by the color lexicon, a trainable literal listener
//! (LSTM encoder scoring colors by a learned quadratic form), and a pragmatic
//! listener that Bayes-inverts a color-conditioned language model.

mod literal;
mod model_io;
pub(crate) mod nn;
mod pragmatic;

pub use literal::{
    literal_distribution, literal_gradient_check, train_literal, LiteralListenerModel,
};
pub use model_io::{load_model, save_model, SavedModel};
pub use nn::softmax3;
pub use pragmatic::{
    lm_logprob, load_embedding_file, pragmatic_distribution, pragmatic_gradient_check,
    train_pragmatic, PragmaticSpeakerLM,
};

use crate::colorspace::FeatureMode;
use crate::corpus::{ColorContext, ColorLexicon, Corpus};
use crate::textproc::tokenize;
use crate::{Error, Result};

pub const DEFAULT_ORACLE_EPSILON: f64 = 0.01;

/// Probability over the three context colors; nonnegative, sums to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListenerDistribution {
    probs: [f64; 3],
}

impl ListenerDistribution {
    pub fn new(probs: [f64; 3]) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Usage(format!(
                "listener distribution {probs:?} is not a simplex"
            )));
        }
        Ok(ListenerDistribution { probs })
    }

    pub fn uniform() -> Self {
        ListenerDistribution { probs: [1.0 / 3.0; 3] }
    }

    pub fn from_scores(scores: [f64; 3]) -> Self {
        ListenerDistribution { probs: softmax3(scores) }
    }

    pub fn probs(&self) -> [f64; 3] {
        self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    /// Lowest-index argmax and whether the maximum was shared.
    pub fn argmax(&self) -> (usize, bool) {
        let mut best = 0;
        for k in 1..3 {
            if self.probs[k] > self.probs[best] {
                best = k;
            }
        }
        let tied = (0..3).filter(|&k| self.probs[k] == self.probs[best]).count() > 1;
        (best, tied)
    }
}

/// Anything that can interpret an utterance in a color context.
pub trait Listener {
    fn distribution(&self, utterance: &str, ctx: &ColorContext) -> ListenerDistribution;
}

/// Analytic stand-in for a human listener: intersect the lexicon predicates
/// of the utterance's known terms, spread mass uniformly over the surviving
/// colors, and mix in epsilon of uniform smoothing.
pub fn oracle_distribution(
    utterance: &str,
    ctx: &ColorContext,
    lexicon: &ColorLexicon,
    epsilon: f64,
) -> ListenerDistribution {
    assert!(
        (0.0..1.0).contains(&epsilon),
        "oracle epsilon must lie in [0, 1)"
    );
    let tokens = tokenize(utterance);
    let survivors = lexicon
        .matched_colors(&tokens, &ctx.colors)
        .filter(|mask| mask.iter().any(|&m| m));
    let base = match survivors {
        None => [1.0 / 3.0; 3],
        Some(mask) => {
            let n = mask.iter().filter(|&&m| m).count() as f64;
            mask.map(|m| if m { 1.0 / n } else { 0.0 })
        }
    };
    let probs = base.map(|b| (1.0 - epsilon) * b + epsilon / 3.0);
    ListenerDistribution { probs }
}

#[derive(Debug, Clone)]
pub struct OracleListener {
    lexicon: ColorLexicon,
    epsilon: f64,
}

impl OracleListener {
    pub fn new(lexicon: ColorLexicon, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::Usage(format!(
                "oracle epsilon must lie in [0, 1), got {epsilon}"
            )));
        }
        Ok(OracleListener { lexicon, epsilon })
    }
}

impl Listener for OracleListener {
    fn distribution(&self, utterance: &str, ctx: &ColorContext) -> ListenerDistribution {
        oracle_distribution(utterance, ctx, &self.lexicon, self.epsilon)
    }
}

/// Shared training hyperparameters for both trainable listeners.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub clip_norm: f64,
    pub feature_mode: FeatureMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            embedding_dim: 50,
            hidden_dim: 50,
            clip_norm: 5.0,
            feature_mode: FeatureMode::RawHsv,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.epochs == 0
            || self.batch_size == 0
            || self.embedding_dim == 0
            || self.hidden_dim == 0
            || !(self.learning_rate > 0.0)
            || !(self.clip_norm > 0.0)
        {
            return Err(Error::Usage(
                "training config values must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How often a listener's argmax recovers the target from the reference
/// utterances; ties break to the lowest index but are also counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccuracyReport {
    pub correct: usize,
    pub ties: usize,
    pub total: usize,
}

impl AccuracyReport {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

pub fn listener_accuracy(listener: &dyn Listener, corpus: &Corpus) -> Result<AccuracyReport> {
    let mut report = AccuracyReport { correct: 0, ties: 0, total: 0 };
    for inst in &corpus.instances {
        for reference in &inst.references {
            let dist = listener.distribution(reference, &inst.context);
            let (argmax, tied) = dist.argmax();
            report.total += 1;
            if tied {
                report.ties += 1;
            }
            if argmax == inst.context.target_index {
                report.correct += 1;
            }
        }
    }
    if report.total == 0 {
        return Err(Error::Usage(
            "accuracy needs a corpus with at least one reference".into(),
        ));
    }
    Ok(report)
}
