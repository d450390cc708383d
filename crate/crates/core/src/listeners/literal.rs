//! Literal listener: an LSTM reads the utterance, two affine heads turn the
//! final hidden state into a mean color vector and an unconstrained square
//! matrix, and each context color is scored by the quadratic form
//! score(f) = -(f - mu)' Sigma (f - mu). Softmax over the three scores gives
//! the distribution; training minimizes cross-entropy of the target index.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::nn::{
    clip_global_norm, shuffle, Adam, Affine, FlatParams, LstmCache, LstmCell, LstmGrads, Vocab,
};
use super::{Listener, ListenerDistribution, TrainConfig};
use crate::colorspace::{color_features, FeatureMode};
use crate::corpus::{ColorContext, Corpus};
use crate::textproc::tokenize;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LiteralListenerModel {
    pub(crate) vocab: Vocab,
    pub(crate) embedding: Array2<f64>, // V x d_e
    pub(crate) cell: LstmCell,         // input d_e
    pub(crate) mu_head: Affine,        // F x d_h
    pub(crate) sigma_head: Affine,     // F^2 x d_h
    pub(crate) feature_mode: FeatureMode,
}

struct LiteralGrads {
    embedding: Array2<f64>,
    cell: LstmGrads,
    mu_head: Affine,
    sigma_head: Affine,
}

struct Encoded {
    ids: Vec<usize>,
    caches: Vec<LstmCache>,
    h: Array1<f64>,
}

impl LiteralListenerModel {
    pub(crate) fn random_from_vocab(
        rng: &mut ChaCha8Rng,
        vocab: Vocab,
        cfg: &TrainConfig,
    ) -> LiteralListenerModel {
        let f_dim = cfg.feature_mode.dim();
        let mut sigma_head = Affine::new(rng, f_dim * f_dim, cfg.hidden_dim);
        // Bias starts at the identity matrix so the initial score is plain
        // negative squared distance to mu.
        for k in 0..f_dim {
            sigma_head.b[k * f_dim + k] = 1.0;
        }
        LiteralListenerModel {
            embedding: super::nn::uniform_init(rng, vocab.len(), cfg.embedding_dim, 0.1),
            cell: LstmCell::new(rng, cfg.embedding_dim, cfg.hidden_dim),
            mu_head: Affine::new(rng, f_dim, cfg.hidden_dim),
            sigma_head,
            vocab,
            feature_mode: cfg.feature_mode,
        }
    }

    /// Untrained model with the vocabulary of `corpus`; chance-level by
    /// construction, useful as a baseline.
    pub fn random_init(corpus: &Corpus, cfg: &TrainConfig) -> Result<LiteralListenerModel> {
        cfg.validate()?;
        let vocab = corpus_vocab(corpus)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(LiteralListenerModel::random_from_vocab(&mut rng, vocab, cfg))
    }

    /// Zero-weight shell with the right shapes, for deserialization.
    pub(crate) fn zeros(
        vocab: Vocab,
        embedding_dim: usize,
        hidden_dim: usize,
        feature_mode: FeatureMode,
    ) -> LiteralListenerModel {
        let f_dim = feature_mode.dim();
        LiteralListenerModel {
            embedding: Array2::zeros((vocab.len(), embedding_dim)),
            cell: LstmCell {
                w_ih: Array2::zeros((4 * hidden_dim, embedding_dim)),
                w_hh: Array2::zeros((4 * hidden_dim, hidden_dim)),
                b: Array1::zeros(4 * hidden_dim),
                hidden: hidden_dim,
            },
            mu_head: Affine {
                w: Array2::zeros((f_dim, hidden_dim)),
                b: Array1::zeros(f_dim),
            },
            sigma_head: Affine {
                w: Array2::zeros((f_dim * f_dim, hidden_dim)),
                b: Array1::zeros(f_dim * f_dim),
            },
            vocab,
            feature_mode,
        }
    }

    pub fn vocab_tokens(&self) -> &[String] {
        self.vocab.tokens()
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.cell.hidden
    }

    pub fn feature_mode(&self) -> FeatureMode {
        self.feature_mode
    }

    fn input_ids(&self, utterance: &str) -> Vec<usize> {
        let mut ids = vec![self.vocab.bos()];
        ids.extend(tokenize(utterance).iter().map(|t| self.vocab.id(t)));
        ids
    }

    fn encode(&self, utterance: &str) -> Encoded {
        let ids = self.input_ids(utterance);
        let (mut h, mut c) = self.cell.zero_state();
        let mut caches = Vec::with_capacity(ids.len());
        for &id in &ids {
            let x = self.embedding.row(id).to_owned();
            let (h_new, c_new, cache) = self.cell.step(&x, &h, &c);
            h = h_new;
            c = c_new;
            caches.push(cache);
        }
        Encoded { ids, caches, h }
    }

    fn context_scores(&self, h: &Array1<f64>, ctx: &ColorContext) -> ([f64; 3], ScoreCache) {
        let f_dim = self.feature_mode.dim();
        let mu = self.mu_head.forward(h);
        let sigma_flat = self.sigma_head.forward(h);
        let sigma = Array2::from_shape_fn((f_dim, f_dim), |(i, j)| sigma_flat[i * f_dim + j]);
        let mut scores = [0.0; 3];
        let mut deltas = Vec::with_capacity(3);
        for (k, color) in ctx.colors.iter().enumerate() {
            let f = Array1::from(color_features(color, self.feature_mode).values);
            let d = &f - &mu;
            scores[k] = -d.dot(&sigma.dot(&d));
            deltas.push(d);
        }
        (scores, ScoreCache { sigma, deltas })
    }

    /// Cross-entropy of the target under the model, for one sample.
    fn sample_loss(&self, utterance: &str, ctx: &ColorContext) -> f64 {
        let probs = literal_distribution(self, utterance, ctx).probs();
        -probs[ctx.target_index].ln()
    }

    /// Adds this sample's parameter gradients to `grads`; returns the loss.
    fn sample_grads(&self, utterance: &str, ctx: &ColorContext, grads: &mut LiteralGrads) -> f64 {
        let f_dim = self.feature_mode.dim();
        let encoded = self.encode(utterance);
        let (scores, sc) = self.context_scores(&encoded.h, ctx);
        let probs = super::nn::softmax3(scores);
        let loss = -probs[ctx.target_index].ln();

        // d loss / d score_k = p_k - [k == target]
        let mut dscore = probs;
        dscore[ctx.target_index] -= 1.0;

        let mut dmu = Array1::zeros(f_dim);
        let mut dsigma = Array2::zeros((f_dim, f_dim));
        let sigma_sym = &sc.sigma + &sc.sigma.t();
        for k in 0..3 {
            let d = &sc.deltas[k];
            // score = -d' Sigma d: d(score)/d(Sigma) = -d d', d(score)/d(mu) = (Sigma + Sigma') d
            dsigma -= &(super::nn::outer(d, d) * dscore[k]);
            dmu += &(sigma_sym.dot(d) * dscore[k]);
        }
        let dsigma_flat = Array1::from_iter(dsigma.iter().cloned());
        let mut dh = self.mu_head.backward(&encoded.h, &dmu, &mut grads.mu_head);
        dh += &self
            .sigma_head
            .backward(&encoded.h, &dsigma_flat, &mut grads.sigma_head);

        let mut dc = Array1::zeros(self.cell.hidden);
        for (t, cache) in encoded.caches.iter().enumerate().rev() {
            let (dx, dh_prev, dc_prev) = self.cell.backward_step(cache, &dh, &dc, &mut grads.cell);
            let id = encoded.ids[t];
            let mut row = grads.embedding.row_mut(id);
            row += &dx;
            dh = dh_prev;
            dc = dc_prev;
        }
        loss
    }

    fn zero_grads(&self) -> LiteralGrads {
        LiteralGrads {
            embedding: Array2::zeros(self.embedding.dim()),
            cell: self.cell.zero_grads(),
            mu_head: self.mu_head.zeros_like(),
            sigma_head: self.sigma_head.zeros_like(),
        }
    }
}

/// Values from the forward pass reused by the backward pass; the deltas
/// are f - mu per context color.
struct ScoreCache {
    sigma: Array2<f64>,
    deltas: Vec<Array1<f64>>,
}

impl FlatParams for LiteralListenerModel {
    fn flat_len(&self) -> usize {
        self.embedding.flat_len()
            + self.cell.flat_len()
            + self.mu_head.flat_len()
            + self.sigma_head.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.embedding.write_flat(out);
        self.cell.write_flat(out);
        self.mu_head.write_flat(out);
        self.sigma_head.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut at = self.embedding.read_flat(src);
        at += self.cell.read_flat(&src[at..]);
        at += self.mu_head.read_flat(&src[at..]);
        at += self.sigma_head.read_flat(&src[at..]);
        at
    }
}

impl FlatParams for LiteralGrads {
    fn flat_len(&self) -> usize {
        self.embedding.flat_len()
            + self.cell.flat_len()
            + self.mu_head.flat_len()
            + self.sigma_head.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.embedding.write_flat(out);
        self.cell.write_flat(out);
        self.mu_head.write_flat(out);
        self.sigma_head.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut at = self.embedding.read_flat(src);
        at += self.cell.read_flat(&src[at..]);
        at += self.mu_head.read_flat(&src[at..]);
        at += self.sigma_head.read_flat(&src[at..]);
        at
    }
}

pub fn literal_distribution(
    model: &LiteralListenerModel,
    utterance: &str,
    ctx: &ColorContext,
) -> ListenerDistribution {
    let encoded = model.encode(utterance);
    let (scores, _) = model.context_scores(&encoded.h, ctx);
    ListenerDistribution::from_scores(scores)
}

impl Listener for LiteralListenerModel {
    fn distribution(&self, utterance: &str, ctx: &ColorContext) -> ListenerDistribution {
        literal_distribution(self, utterance, ctx)
    }
}

pub(crate) fn corpus_vocab(corpus: &Corpus) -> Result<Vocab> {
    let mut words: Vec<String> = Vec::new();
    for inst in &corpus.instances {
        for reference in &inst.references {
            words.extend(Vec::from(tokenize(reference)));
        }
    }
    if words.is_empty() {
        return Err(Error::Usage(
            "training needs a corpus with reference utterances".into(),
        ));
    }
    Ok(Vocab::build(words.iter().map(String::as_str)))
}

/// Trains on (reference utterance -> target index) pairs; returns the model
/// and the mean loss per epoch.
pub fn train_literal(corpus: &Corpus, cfg: &TrainConfig) -> Result<(LiteralListenerModel, Vec<f64>)> {
    cfg.validate()?;
    let vocab = corpus_vocab(corpus)?;
    let samples: Vec<(&str, &ColorContext)> = corpus
        .instances
        .iter()
        .flat_map(|inst| {
            inst.references
                .iter()
                .map(move |r| (r.as_str(), &inst.context))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LiteralListenerModel::random_from_vocab(&mut rng, vocab, cfg);
    let mut adam = Adam::new(model.flat_len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        shuffle(&mut rng, &mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zero_grads();
            for &s in batch {
                let (utterance, ctx) = samples[s];
                epoch_loss += model.sample_grads(utterance, ctx, &mut grads);
            }
            let mut flat_grads = grads.to_flat();
            let inv = 1.0 / batch.len() as f64;
            for g in &mut flat_grads {
                *g *= inv;
            }
            clip_global_norm(&mut flat_grads, cfg.clip_norm);
            let mut params = model.to_flat();
            adam.step(&mut params, &flat_grads);
            model.set_flat(&params);
        }
        epoch_losses.push(epoch_loss / samples.len() as f64);
    }
    Ok((model, epoch_losses))
}

/// Worst relative error between the analytic gradient and a central finite
/// difference of the sample loss, probing every parameter of a freshly
/// initialized model on the corpus's first reference. Differences are
/// scaled by max(|analytic|, |numeric|, step).
pub fn literal_gradient_check(corpus: &Corpus, cfg: &TrainConfig, step: f64) -> Result<f64> {
    cfg.validate()?;
    if !(step > 0.0) {
        return Err(Error::Usage(format!("finite-difference step must be positive, got {step}")));
    }
    let inst = corpus
        .instances
        .first()
        .filter(|inst| !inst.references.is_empty())
        .ok_or_else(|| Error::Usage("gradient check needs an instance with references".into()))?;
    let model = LiteralListenerModel::random_init(corpus, cfg)?;
    let utterance = inst.references[0].as_str();
    let ctx = &inst.context;

    let mut grads = model.zero_grads();
    model.sample_grads(utterance, ctx, &mut grads);
    let analytic = grads.to_flat();

    let base = model.to_flat();
    let mut worst = 0.0f64;
    for k in 0..base.len() {
        let mut probe = model.clone();
        let mut theta = base.clone();
        theta[k] = base[k] + step;
        probe.set_flat(&theta);
        let up = probe.sample_loss(utterance, ctx);
        theta[k] = base[k] - step;
        probe.set_flat(&theta);
        let down = probe.sample_loss(utterance, ctx);
        let numeric = (up - down) / (2.0 * step);
        let scale = analytic[k].abs().max(numeric.abs()).max(step);
        worst = worst.max(((analytic[k] - numeric) / scale).abs());
    }
    Ok(worst)
}
