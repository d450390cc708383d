//! Minimal neural-net plumbing for the two trainable listeners: an LSTM
//! cell with explicit backward passes, affine heads, Adam on a flattened
//! parameter vector, and a shared vocabulary with BOS/EOS/UNK.
//!
//! Everything is f64 and single-threaded; model sizes are tens of tokens and
//! a few dozen hidden units, so clarity wins over throughput.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

/// Token table with the three specials at fixed leading indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Specials first, then the given tokens deduplicated in sorted order.
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut tokens: Vec<String> = vec![BOS.into(), EOS.into(), UNK.into()];
        let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
        for w in words {
            if w != BOS && w != EOS && w != UNK {
                seen.insert(w, ());
            }
        }
        tokens.extend(seen.into_keys().map(String::from));
        Vocab::from_tokens(tokens)
    }

    /// Rebuilds from a serialized token list (specials must lead).
    pub fn from_tokens(tokens: Vec<String>) -> Vocab {
        assert!(
            tokens.len() >= 3 && tokens[0] == BOS && tokens[1] == EOS && tokens[2] == UNK,
            "vocabulary must start with the special tokens"
        );
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn bos(&self) -> usize {
        0
    }

    pub fn eos(&self) -> usize {
        1
    }

    pub fn unk(&self) -> usize {
        2
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or_else(|| self.unk())
    }
}

pub fn uniform_init(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>() * 2.0 * bound - bound)
}

/// y = W x + b with cached input for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Affine {
    pub fn new(rng: &mut ChaCha8Rng, out_dim: usize, in_dim: usize) -> Affine {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Affine {
            w: uniform_init(rng, out_dim, in_dim, bound),
            b: Array1::zeros(out_dim),
        }
    }

    pub fn forward(&self, x: &Array1<f64>) -> Array1<f64> {
        self.w.dot(x) + &self.b
    }

    /// Accumulates parameter gradients and returns dx.
    pub fn backward(&self, x: &Array1<f64>, dy: &Array1<f64>, grads: &mut Affine) -> Array1<f64> {
        grads.w += &outer(dy, x);
        grads.b += dy;
        self.w.t().dot(dy)
    }

    pub fn zeros_like(&self) -> Affine {
        Affine {
            w: Array2::zeros(self.w.dim()),
            b: Array1::zeros(self.b.len()),
        }
    }
}

pub fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let (n, m) = (a.len(), b.len());
    Array2::from_shape_fn((n, m), |(i, j)| a[i] * b[j])
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Single LSTM cell; the stacked weight rows follow gate order
/// input, forget, cell candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_ih: Array2<f64>, // (4h, input)
    pub w_hh: Array2<f64>, // (4h, h)
    pub b: Array1<f64>,    // (4h,)
    pub hidden: usize,
}

/// Per-step values required by the backward pass.
pub struct LstmCache {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub o: Array1<f64>,
    pub tanh_c: Array1<f64>,
}

pub struct LstmGrads {
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub b: Array1<f64>,
}

impl LstmCell {
    pub fn new(rng: &mut ChaCha8Rng, input_dim: usize, hidden: usize) -> LstmCell {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut b = Array1::zeros(4 * hidden);
        // Forget-gate bias starts at 1 so memory survives early training.
        for k in hidden..2 * hidden {
            b[k] = 1.0;
        }
        LstmCell {
            w_ih: uniform_init(rng, 4 * hidden, input_dim, bound),
            w_hh: uniform_init(rng, 4 * hidden, hidden, bound),
            b,
            hidden,
        }
    }

    pub fn zero_state(&self) -> (Array1<f64>, Array1<f64>) {
        (Array1::zeros(self.hidden), Array1::zeros(self.hidden))
    }

    pub fn step(
        &self,
        x: &Array1<f64>,
        h_prev: &Array1<f64>,
        c_prev: &Array1<f64>,
    ) -> (Array1<f64>, Array1<f64>, LstmCache) {
        let h = self.hidden;
        let z = self.w_ih.dot(x) + self.w_hh.dot(h_prev) + &self.b;
        let mut i = Array1::zeros(h);
        let mut f = Array1::zeros(h);
        let mut g = Array1::zeros(h);
        let mut o = Array1::zeros(h);
        for k in 0..h {
            i[k] = sigmoid(z[k]);
            f[k] = sigmoid(z[h + k]);
            g[k] = z[2 * h + k].tanh();
            o[k] = sigmoid(z[3 * h + k]);
        }
        let c = &f * c_prev + &i * &g;
        let tanh_c = c.mapv(f64::tanh);
        let h_new = &o * &tanh_c;
        let cache = LstmCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        (h_new, c, cache)
    }

    /// One step of backpropagation through time. `dh`/`dc` are the losses'
    /// gradients w.r.t. this step's outputs; returns (dx, dh_prev, dc_prev).
    pub fn backward_step(
        &self,
        cache: &LstmCache,
        dh: &Array1<f64>,
        dc: &Array1<f64>,
        grads: &mut LstmGrads,
    ) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        let h = self.hidden;
        let dc_total = dc + &(dh * &cache.o * cache.tanh_c.mapv(|t| 1.0 - t * t));
        let d_o = dh * &cache.tanh_c;
        let d_i = &dc_total * &cache.g;
        let d_f = &dc_total * &cache.c_prev;
        let d_g = &dc_total * &cache.i;
        let mut dz = Array1::zeros(4 * h);
        for k in 0..h {
            dz[k] = d_i[k] * cache.i[k] * (1.0 - cache.i[k]);
            dz[h + k] = d_f[k] * cache.f[k] * (1.0 - cache.f[k]);
            dz[2 * h + k] = d_g[k] * (1.0 - cache.g[k] * cache.g[k]);
            dz[3 * h + k] = d_o[k] * cache.o[k] * (1.0 - cache.o[k]);
        }
        grads.w_ih += &outer(&dz, &cache.x);
        grads.w_hh += &outer(&dz, &cache.h_prev);
        grads.b += &dz;
        let dx = self.w_ih.t().dot(&dz);
        let dh_prev = self.w_hh.t().dot(&dz);
        let dc_prev = &dc_total * &cache.f;
        (dx, dh_prev, dc_prev)
    }

    pub fn zero_grads(&self) -> LstmGrads {
        LstmGrads {
            w_ih: Array2::zeros(self.w_ih.dim()),
            w_hh: Array2::zeros(self.w_hh.dim()),
            b: Array1::zeros(self.b.len()),
        }
    }
}

/// Flatten/unflatten model parameters in a fixed order so the optimizer,
/// serialization, and the finite-difference check all agree on layout.
pub trait FlatParams {
    fn flat_len(&self) -> usize;
    fn write_flat(&self, out: &mut Vec<f64>);
    fn read_flat(&mut self, src: &[f64]) -> usize;

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        self.write_flat(&mut out);
        debug_assert_eq!(out.len(), self.flat_len());
        out
    }

    fn set_flat(&mut self, data: &[f64]) {
        assert_eq!(data.len(), self.flat_len(), "parameter payload size mismatch");
        let used = self.read_flat(data);
        debug_assert_eq!(used, data.len());
    }
}

impl FlatParams for Array1<f64> {
    fn flat_len(&self) -> usize {
        self.len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend(self.iter());
    }

    fn read_flat(&mut self, src: &[f64]) -> usize {
        for (dst, &v) in self.iter_mut().zip(src) {
            *dst = v;
        }
        self.len()
    }
}

impl FlatParams for Array2<f64> {
    fn flat_len(&self) -> usize {
        self.len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend(self.iter());
    }

    fn read_flat(&mut self, src: &[f64]) -> usize {
        for (dst, &v) in self.iter_mut().zip(src) {
            *dst = v;
        }
        self.len()
    }
}

impl FlatParams for Affine {
    fn flat_len(&self) -> usize {
        self.w.flat_len() + self.b.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.w.write_flat(out);
        self.b.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64]) -> usize {
        let a = self.w.read_flat(src);
        a + self.b.read_flat(&src[a..])
    }
}

impl FlatParams for LstmCell {
    fn flat_len(&self) -> usize {
        self.w_ih.flat_len() + self.w_hh.flat_len() + self.b.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.w_ih.write_flat(out);
        self.w_hh.write_flat(out);
        self.b.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut at = self.w_ih.read_flat(src);
        at += self.w_hh.read_flat(&src[at..]);
        at += self.b.read_flat(&src[at..]);
        at
    }
}

impl FlatParams for LstmGrads {
    fn flat_len(&self) -> usize {
        self.w_ih.flat_len() + self.w_hh.flat_len() + self.b.flat_len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.w_ih.write_flat(out);
        self.w_hh.write_flat(out);
        self.b.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut at = self.w_ih.read_flat(src);
        at += self.w_hh.read_flat(&src[at..]);
        at += self.b.read_flat(&src[at..]);
        at
    }
}

/// Adam with bias correction; operates on the flattened parameter vector.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grads[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grads[k] * grads[k];
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            params[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// In-place Fisher-Yates shuffle driven by the training RNG.
pub fn shuffle(rng: &mut ChaCha8Rng, xs: &mut [usize]) {
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
}

/// Scales the gradient vector down to `max_norm` when it exceeds it.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
}

/// Numerically stable softmax over three scores.
pub fn softmax3(scores: [f64; 3]) -> [f64; 3] {
    let max = scores[0].max(scores[1]).max(scores[2]);
    let exps = scores.map(|s| (s - max).exp());
    let sum: f64 = exps.iter().sum();
    exps.map(|e| e / sum)
}

/// log softmax over a logits vector, stable under large magnitudes.
pub fn log_softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.mapv(|z| z - log_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn vocab_assigns_specials_and_sorts_the_rest() {
        let v = Vocab::build(["blue", "the", "blue", "dark"]);
        assert_eq!(v.tokens(), &[BOS, EOS, UNK, "blue", "dark", "the"]);
        assert_eq!(v.id("blue"), 3);
        assert_eq!(v.id("never-seen"), v.unk());
        let rebuilt = Vocab::from_tokens(v.tokens().to_vec());
        assert_eq!(rebuilt, v);
    }

    #[test]
    fn softmax3_matches_reference_and_normalizes() {
        let p = softmax3([-1.0, -2.0, -3.0]);
        assert_abs_diff_eq!(p[0], 0.6652409557748219, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.24472847105479767, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.09003057317038046, epsilon = 1e-12);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // Shift invariance.
        let q = softmax3([99.0, 98.0, 97.0]);
        for k in 0..3 {
            assert_abs_diff_eq!(p[k], q[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn log_softmax_normalizes() {
        let logits = Array1::from(vec![0.3, -2.0, 5.0, 1.1]);
        let lp = log_softmax(&logits);
        let total: f64 = lp.iter().map(|&x| x.exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert!(lp.iter().all(|&x| x < 0.0));
    }

    #[test]
    fn flat_round_trip_preserves_every_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cell = LstmCell::new(&mut rng, 5, 4);
        let flat = cell.to_flat();
        assert_eq!(flat.len(), 4 * 4 * 5 + 4 * 4 * 4 + 16);
        let mut other = LstmCell::new(&mut rng, 5, 4);
        assert_ne!(other, cell);
        other.set_flat(&flat);
        assert_eq!(other, cell);
    }

    #[test]
    fn clip_leaves_small_gradients_alone() {
        let mut g = vec![0.3, -0.4];
        clip_global_norm(&mut g, 5.0);
        assert_eq!(g, vec![0.3, -0.4]);
        let mut big = vec![30.0, -40.0];
        clip_global_norm(&mut big, 5.0);
        assert_abs_diff_eq!(big[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(big[1], -4.0, epsilon = 1e-12);
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cell = LstmCell::new(&mut rng, 3, 4);
        for k in 0..4 {
            assert_eq!(cell.b[k], 0.0);
            assert_eq!(cell.b[4 + k], 1.0);
            assert_eq!(cell.b[8 + k], 0.0);
            assert_eq!(cell.b[12 + k], 0.0);
        }
    }

    /// Checks the LSTM backward pass against central finite differences on a
    /// scalar loss: L = sum(h_T) after two steps.
    #[test]
    fn lstm_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cell = LstmCell::new(&mut rng, 3, 4);
        let x0 = Array1::from(vec![0.1, -0.4, 0.7]);
        let x1 = Array1::from(vec![-0.2, 0.5, 0.3]);

        let loss = |cell: &LstmCell| -> f64 {
            let (h0, c0) = cell.zero_state();
            let (h1, c1, _) = cell.step(&x0, &h0, &c0);
            let (h2, _, _) = cell.step(&x1, &h1, &c1);
            h2.sum()
        };

        // Analytic gradients.
        let (h0, c0) = cell.zero_state();
        let (h1, c1, cache1) = cell.step(&x0, &h0, &c0);
        let (_h2, _c2, cache2) = cell.step(&x1, &h1, &c1);
        let mut grads = cell.zero_grads();
        let dh2 = Array1::ones(4);
        let dc2 = Array1::zeros(4);
        let (_dx1, dh1, dc1) = cell.backward_step(&cache2, &dh2, &dc2, &mut grads);
        let (_dx0, _dh0, _dc0) = cell.backward_step(&cache1, &dh1, &dc1, &mut grads);
        let analytic = grads.to_flat();

        // Numeric gradients.
        let h = 1e-4;
        let base = cell.to_flat();
        let mut numeric = Vec::with_capacity(base.len());
        for k in 0..base.len() {
            let mut probe = cell.clone();
            let mut theta = base.clone();
            theta[k] = base[k] + h;
            probe.set_flat(&theta);
            let up = loss(&probe);
            theta[k] = base[k] - h;
            probe.set_flat(&theta);
            let down = loss(&probe);
            numeric.push((up - down) / (2.0 * h));
        }

        for (a, n) in analytic.iter().zip(&numeric) {
            let scale = a.abs().max(n.abs()).max(1e-4);
            assert!(
                ((a - n) / scale).abs() < 1e-3,
                "gradient mismatch: analytic {a}, numeric {n}"
            );
        }
    }
}
