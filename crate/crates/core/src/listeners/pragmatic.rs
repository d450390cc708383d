//! Pragmatic listener: a conditional LSTM language model scores
//! P(utterance | color) for each context color, and Bayes' rule with a
//! uniform prior turns the three scores into a listener distribution.
//! The color's feature vector is concatenated to every input embedding.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use super::literal::corpus_vocab;
use super::nn::{
    clip_global_norm, log_softmax, shuffle, softmax3, Adam, Affine, FlatParams, LstmCache,
    LstmCell, LstmGrads, Vocab,
};
use super::{Listener, ListenerDistribution, TrainConfig};
use crate::colorspace::{color_features, ColorFeatureVector, FeatureMode};
use crate::corpus::{ColorContext, Corpus};
use crate::textproc::tokenize;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PragmaticSpeakerLM {
    pub(crate) vocab: Vocab,
    pub(crate) embedding: Array2<f64>, // V x d_e
    pub(crate) cell: LstmCell,         // input d_e + F
    pub(crate) out: Affine,            // V x d_h
    pub(crate) feature_mode: FeatureMode,
}

struct LmGrads {
    embedding: Array2<f64>,
    cell: LstmGrads,
    out: Affine,
}

impl PragmaticSpeakerLM {
    fn random_from_vocab(
        rng: &mut ChaCha8Rng,
        vocab: Vocab,
        cfg: &TrainConfig,
        pretrained: Option<&EmbeddingTable>,
    ) -> Result<PragmaticSpeakerLM> {
        let mut embedding = super::nn::uniform_init(rng, vocab.len(), cfg.embedding_dim, 0.1);
        if let Some(table) = pretrained {
            for (row, token) in vocab.tokens().iter().enumerate() {
                if let Some(vec) = table.get(token) {
                    if vec.len() != cfg.embedding_dim {
                        return Err(Error::Usage(format!(
                            "pretrained embedding for {token:?} has {} dims, model wants {}",
                            vec.len(),
                            cfg.embedding_dim
                        )));
                    }
                    for (k, &v) in vec.iter().enumerate() {
                        embedding[(row, k)] = v;
                    }
                }
            }
        }
        Ok(PragmaticSpeakerLM {
            embedding,
            cell: LstmCell::new(
                rng,
                cfg.embedding_dim + cfg.feature_mode.dim(),
                cfg.hidden_dim,
            ),
            out: Affine::new(rng, vocab.len(), cfg.hidden_dim),
            vocab,
            feature_mode: cfg.feature_mode,
        })
    }

    /// Zero-weight shell with the right shapes, for deserialization.
    pub(crate) fn zeros(
        vocab: Vocab,
        embedding_dim: usize,
        hidden_dim: usize,
        feature_mode: FeatureMode,
    ) -> PragmaticSpeakerLM {
        let input = embedding_dim + feature_mode.dim();
        PragmaticSpeakerLM {
            embedding: Array2::zeros((vocab.len(), embedding_dim)),
            cell: LstmCell {
                w_ih: Array2::zeros((4 * hidden_dim, input)),
                w_hh: Array2::zeros((4 * hidden_dim, hidden_dim)),
                b: Array1::zeros(4 * hidden_dim),
                hidden: hidden_dim,
            },
            out: Affine {
                w: Array2::zeros((vocab.len(), hidden_dim)),
                b: Array1::zeros(vocab.len()),
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

    /// (input ids, target ids): BOS-started inputs, EOS-terminated targets.
    fn teacher_forced_ids(&self, utterance: &str) -> (Vec<usize>, Vec<usize>) {
        let token_ids: Vec<usize> = tokenize(utterance).iter().map(|t| self.vocab.id(t)).collect();
        let mut inputs = vec![self.vocab.bos()];
        inputs.extend(&token_ids);
        let mut targets = token_ids;
        targets.push(self.vocab.eos());
        (inputs, targets)
    }

    fn step_input(&self, id: usize, features: &Array1<f64>) -> Array1<f64> {
        let d_e = self.embedding.ncols();
        let mut x = Array1::zeros(d_e + features.len());
        for k in 0..d_e {
            x[k] = self.embedding[(id, k)];
        }
        for (k, &f) in features.iter().enumerate() {
            x[d_e + k] = f;
        }
        x
    }

    /// Log-probabilities over the next token after consuming `prefix_ids`
    /// (which must start with BOS), conditioned on the color features.
    /// Test oracle: forward() must equal a sum of these per-step terms.
    #[cfg(test)]
    fn next_token_logprobs(
        &self,
        prefix_ids: &[usize],
        features: &Array1<f64>,
    ) -> Array1<f64> {
        let (mut h, mut c) = self.cell.zero_state();
        for &id in prefix_ids {
            let x = self.step_input(id, features);
            let (h_new, c_new, _) = self.cell.step(&x, &h, &c);
            h = h_new;
            c = c_new;
        }
        log_softmax(&self.out.forward(&h))
    }

    fn features_array(&self, features: &ColorFeatureVector) -> Array1<f64> {
        assert_eq!(
            features.mode, self.feature_mode,
            "feature mode mismatch between model and input"
        );
        Array1::from(features.values.clone())
    }

    /// Teacher-forced NLL pieces for one (utterance, color) pair.
    fn forward(&self, utterance: &str, features: &Array1<f64>) -> LmForward {
        let (inputs, targets) = self.teacher_forced_ids(utterance);
        let (mut h, mut c) = self.cell.zero_state();
        let mut caches = Vec::with_capacity(inputs.len());
        let mut hs = Vec::with_capacity(inputs.len());
        let mut logprob = 0.0;
        let mut step_logprobs = Vec::with_capacity(inputs.len());
        for (&id, &target) in inputs.iter().zip(&targets) {
            let x = self.step_input(id, features);
            let (h_new, c_new, cache) = self.cell.step(&x, &h, &c);
            h = h_new;
            c = c_new;
            let lp = log_softmax(&self.out.forward(&h));
            logprob += lp[target];
            step_logprobs.push(lp);
            caches.push(cache);
            hs.push(h.clone());
        }
        LmForward {
            inputs,
            targets,
            caches,
            hs,
            step_logprobs,
            logprob,
        }
    }

    fn zero_grads(&self) -> LmGrads {
        LmGrads {
            embedding: Array2::zeros(self.embedding.dim()),
            cell: self.cell.zero_grads(),
            out: self.out.zeros_like(),
        }
    }

    /// Accumulates gradients of the utterance NLL; returns the loss.
    fn sample_grads(&self, utterance: &str, features: &Array1<f64>, grads: &mut LmGrads) -> f64 {
        let fwd = self.forward(utterance, features);
        let d_e = self.embedding.ncols();
        let mut dh_next = Array1::zeros(self.cell.hidden);
        let mut dc_next = Array1::zeros(self.cell.hidden);
        for t in (0..fwd.inputs.len()).rev() {
            // d NLL / d logits = softmax - onehot(target)
            let mut dlogits = fwd.step_logprobs[t].mapv(f64::exp);
            dlogits[fwd.targets[t]] -= 1.0;
            let mut dh = self.out.backward(&fwd.hs[t], &dlogits, &mut grads.out);
            dh += &dh_next;
            let (dx, dh_prev, dc_prev) =
                self.cell
                    .backward_step(&fwd.caches[t], &dh, &dc_next, &mut grads.cell);
            let id = fwd.inputs[t];
            let mut row = grads.embedding.row_mut(id);
            for k in 0..d_e {
                row[k] += dx[k];
            }
            // Gradient w.r.t. the color features is discarded: they are data.
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        -fwd.logprob
    }
}

struct LmForward {
    inputs: Vec<usize>,
    targets: Vec<usize>,
    caches: Vec<LstmCache>,
    hs: Vec<Array1<f64>>,
    step_logprobs: Vec<Array1<f64>>,
    logprob: f64,
}

impl FlatParams for PragmaticSpeakerLM {
    fn flat_len(&self) -> usize {
        self.embedding.flat_len() + self.cell.flat_len() + self.out.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.embedding.write_flat(out);
        self.cell.write_flat(out);
        self.out.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut at = self.embedding.read_flat(src);
        at += self.cell.read_flat(&src[at..]);
        at += self.out.read_flat(&src[at..]);
        at
    }
}

impl FlatParams for LmGrads {
    fn flat_len(&self) -> usize {
        self.embedding.flat_len() + self.cell.flat_len() + self.out.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.embedding.write_flat(out);
        self.cell.write_flat(out);
        self.out.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut at = self.embedding.read_flat(src);
        at += self.cell.read_flat(&src[at..]);
        at += self.out.read_flat(&src[at..]);
        at
    }
}

/// Teacher-forced log P(utterance, EOS | color); always <= 0, never NaN.
pub fn lm_logprob(
    model: &PragmaticSpeakerLM,
    utterance: &str,
    features: &ColorFeatureVector,
) -> f64 {
    let f = model.features_array(features);
    model.forward(utterance, &f).logprob
}

/// probs[i] proportional to P(u | color_i); uniform prior over the three
/// colors, normalized in log space with max subtraction.
pub fn pragmatic_distribution(
    model: &PragmaticSpeakerLM,
    utterance: &str,
    ctx: &ColorContext,
) -> ListenerDistribution {
    let logprobs: Vec<f64> = ctx
        .colors
        .iter()
        .map(|c| {
            let f = model.features_array(&color_features(c, model.feature_mode));
            model.forward(utterance, &f).logprob
        })
        .collect();
    if logprobs.iter().any(|lp| !lp.is_finite()) {
        return ListenerDistribution::uniform();
    }
    ListenerDistribution::new(softmax3([logprobs[0], logprobs[1], logprobs[2]]))
        .unwrap_or_else(|_| ListenerDistribution::uniform())
}

impl Listener for PragmaticSpeakerLM {
    fn distribution(&self, utterance: &str, ctx: &ColorContext) -> ListenerDistribution {
        pragmatic_distribution(self, utterance, ctx)
    }
}

pub type EmbeddingTable = BTreeMap<String, Vec<f64>>;

/// One token per line followed by whitespace-separated floats; all rows must
/// share one dimension.
pub fn load_embedding_file(path: &Path) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table = EmbeddingTable::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts
            .next()
            .ok_or_else(|| Error::parse(path, lineno, "missing token"))?
            .to_lowercase();
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno, format!("bad float {p:?}")))
            })
            .collect::<Result<_>>()?;
        if values.is_empty() {
            return Err(Error::parse(path, lineno, "embedding row has no values"));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("embedding row has {} values, expected {d}", values.len()),
                ));
            }
            _ => {}
        }
        table.insert(token, values);
    }
    if table.is_empty() {
        return Err(Error::parse(path, 0, "embedding file has no rows"));
    }
    Ok(table)
}

/// Trains the conditional LM on (reference utterance, target color) pairs
/// with next-token cross-entropy; returns the model and per-epoch mean NLL.
pub fn train_pragmatic(
    corpus: &Corpus,
    cfg: &TrainConfig,
    pretrained: Option<&EmbeddingTable>,
) -> Result<(PragmaticSpeakerLM, Vec<f64>)> {
    cfg.validate()?;
    let vocab = corpus_vocab(corpus)?;
    let samples: Vec<(&str, Array1<f64>)> = corpus
        .instances
        .iter()
        .flat_map(|inst| {
            let f = Array1::from(color_features(inst.context.target(), cfg.feature_mode).values);
            inst.references
                .iter()
                .map(move |r| (r.as_str(), f.clone()))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = PragmaticSpeakerLM::random_from_vocab(&mut rng, vocab, cfg, pretrained)?;
    let mut adam = Adam::new(model.flat_len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        shuffle(&mut rng, &mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zero_grads();
            for &s in batch {
                let (utterance, ref features) = samples[s];
                epoch_loss += model.sample_grads(utterance, features, &mut grads);
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
/// difference of the utterance NLL, probing every parameter of a freshly
/// initialized model on the corpus's first reference. Differences are
/// scaled by max(|analytic|, |numeric|, step).
pub fn pragmatic_gradient_check(corpus: &Corpus, cfg: &TrainConfig, step: f64) -> Result<f64> {
    cfg.validate()?;
    if !(step > 0.0) {
        return Err(Error::Usage(format!("finite-difference step must be positive, got {step}")));
    }
    let inst = corpus
        .instances
        .first()
        .filter(|inst| !inst.references.is_empty())
        .ok_or_else(|| Error::Usage("gradient check needs an instance with references".into()))?;
    let vocab = corpus_vocab(corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = PragmaticSpeakerLM::random_from_vocab(&mut rng, vocab, cfg, None)?;
    let utterance = inst.references[0].as_str();
    let features =
        Array1::from(color_features(inst.context.target(), cfg.feature_mode).values);

    let mut grads = model.zero_grads();
    model.sample_grads(utterance, &features, &mut grads);
    let analytic = grads.to_flat();

    let base = model.to_flat();
    let mut worst = 0.0f64;
    for k in 0..base.len() {
        let mut probe = model.clone();
        let mut theta = base.clone();
        theta[k] = base[k] + step;
        probe.set_flat(&theta);
        let up = -probe.forward(utterance, &features).logprob;
        theta[k] = base[k] - step;
        probe.set_flat(&theta);
        let down = -probe.forward(utterance, &features).logprob;
        let numeric = (up - down) / (2.0 * step);
        let scale = analytic[k].abs().max(numeric.abs()).max(step);
        worst = worst.max(((analytic[k] - numeric) / scale).abs());
    }
    Ok(worst)
}
