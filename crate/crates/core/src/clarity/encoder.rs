//! A small self-attention sentence encoder with hand-written gradients.
//!
//! Architecture, for an input of `n` rows (optional soft-prompt rows
//! followed by token embeddings) of width `d`:
//!
//! ```text
//! X       = [P; E[tokens]]
//! A       = softmax(X Wq (X Wk)^T / sqrt(d))      row-wise
//! U       = X + A X Wv
//! H       = U + tanh(U W1 + b1)
//! z       = mean of the pooled rows of H
//! ```
//!
//! Tokens are hashed lowercase words, so the vocabulary is open.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ClarityError;
use crate::io::{self, sha256_hex, IoError};
use crate::text::{fnv1a, word_tokens};

pub const MAX_SEQUENCE_LENGTH: usize = 128;

/// Which hidden states are averaged into the sentence embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Every position, soft-prompt rows included.
    #[default]
    Mean,
    /// Token positions only.
    MeanTokens,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub name: String,
    pub vocab_buckets: usize,
    pub dim: usize,
    pub max_len: usize,
    #[serde(default)]
    pub pooling: Pooling,
}

impl EncoderConfig {
    pub fn small() -> Self {
        Self {
            name: "hashed-attn-small".into(),
            vocab_buckets: 1 << 13,
            dim: 64,
            max_len: MAX_SEQUENCE_LENGTH,
            pooling: Pooling::Mean,
        }
    }

    pub fn base() -> Self {
        Self {
            name: "hashed-attn-base".into(),
            vocab_buckets: 1 << 14,
            dim: 128,
            max_len: MAX_SEQUENCE_LENGTH,
            pooling: Pooling::Mean,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "small" | "hashed-attn-small" => Some(Self::small()),
            "base" | "hashed-attn-base" => Some(Self::base()),
            _ => None,
        }
    }

    /// Hashed word ids, truncated to `max_len`.
    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        let buckets = self.vocab_buckets as u64;
        word_tokens(text)
            .iter()
            .take(self.max_len)
            .map(|t| (fnv1a(t.as_bytes()) % buckets) as usize)
            .collect()
    }

    pub fn validate(&self) -> Result<(), ClarityError> {
        if self.dim == 0 || self.vocab_buckets == 0 || self.max_len == 0 {
            return Err(ClarityError::InvalidConfig(
                "encoder dim, vocab_buckets and max_len must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderMode {
    Finetunable,
    Frozen,
}

/// Identity of an encoder: what a model artifact records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderHandle {
    pub name: String,
    pub dim: usize,
    pub mode: EncoderMode,
    pub parameter_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    pub emb: Array2<f64>,
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
}

impl EncoderWeights {
    fn tensors(&self) -> [&[f64]; 6] {
        [
            self.emb.as_slice().expect("standard layout"),
            self.wq.as_slice().expect("standard layout"),
            self.wk.as_slice().expect("standard layout"),
            self.wv.as_slice().expect("standard layout"),
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.parameter_count() * 8);
        for t in self.tensors() {
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }
}

/// Gradients with respect to the encoder weights. Embedding gradients are
/// kept per touched row.
#[derive(Debug, Clone)]
pub struct EncoderGrads {
    pub emb_rows: BTreeMap<usize, Vec<f64>>,
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
}

impl EncoderGrads {
    pub fn zeros(dim: usize) -> Self {
        Self {
            emb_rows: BTreeMap::new(),
            wq: Array2::zeros((dim, dim)),
            wk: Array2::zeros((dim, dim)),
            wv: Array2::zeros((dim, dim)),
            w1: Array2::zeros((dim, dim)),
            b1: Array1::zeros(dim),
        }
    }

    pub fn scale(&mut self, f: f64) {
        for g in self.emb_rows.values_mut() {
            g.iter_mut().for_each(|x| *x *= f);
        }
        for m in [&mut self.wq, &mut self.wk, &mut self.wv, &mut self.w1] {
            *m *= f;
        }
        self.b1 *= f;
    }
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    tokens: Vec<usize>,
    n_prompt: usize,
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    a: Array2<f64>,
    u: Array2<f64>,
    f: Array2<f64>,
    pool: (usize, usize),
    pub z: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    config: EncoderConfig,
    mode: EncoderMode,
    pub(crate) weights: EncoderWeights,
}

impl Encoder {
    /// Random initialization; embeddings are unit-variance, projections
    /// are scaled by `1/sqrt(d)`.
    pub fn new(config: EncoderConfig, seed: u64) -> Result<Self, ClarityError> {
        config.validate()?;
        let d = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).expect("valid normal");
        let proj = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("valid normal");
        let mut draw = |rows: usize, cols: usize, dist: &Normal<f64>| {
            Array2::from_shape_fn((rows, cols), |_| dist.sample(&mut rng))
        };
        let emb = draw(config.vocab_buckets, d, &unit);
        let wq = draw(d, d, &proj);
        let wk = draw(d, d, &proj);
        let wv = draw(d, d, &proj) * 0.5;
        let w1 = draw(d, d, &proj);
        Ok(Self {
            weights: EncoderWeights {
                emb,
                wq,
                wk,
                wv,
                w1,
                b1: Array1::zeros(d),
            },
            config,
            mode: EncoderMode::Finetunable,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn mode(&self) -> EncoderMode {
        self.mode
    }

    pub fn weights(&self) -> &EncoderWeights {
        &self.weights
    }

    pub fn frozen(mut self) -> Self {
        self.mode = EncoderMode::Frozen;
        self
    }

    pub fn unfrozen(mut self) -> Self {
        self.mode = EncoderMode::Finetunable;
        self
    }

    /// SHA-256 over the little-endian bytes of every weight tensor.
    pub fn parameter_digest(&self) -> String {
        sha256_hex(&self.weights.to_bytes())
    }

    pub fn handle(&self) -> EncoderHandle {
        EncoderHandle {
            name: self.config.name.clone(),
            dim: self.config.dim,
            mode: self.mode,
            parameter_digest: self.parameter_digest(),
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        self.config.tokenize(text)
    }

    pub fn embed(&self, text: &str) -> Array1<f64> {
        self.forward(&self.tokenize(text), None).z
    }

    pub fn forward(&self, tokens: &[usize], prompt: Option<ArrayView2<'_, f64>>) -> Trace {
        let d = self.config.dim;
        let w = &self.weights;
        let m = prompt.map_or(0, |p| p.nrows());
        let n = m + tokens.len();
        let mut x = Array2::zeros((n, d));
        if let Some(p) = prompt {
            x.slice_mut(s![..m, ..]).assign(&p);
        }
        for (i, &t) in tokens.iter().enumerate() {
            x.row_mut(m + i).assign(&w.emb.row(t));
        }
        let q = x.dot(&w.wq);
        let k = x.dot(&w.wk);
        let v = x.dot(&w.wv);
        let mut a = q.dot(&k.t()) / (d as f64).sqrt();
        for mut row in a.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row /= sum;
        }
        let u = &x + &a.dot(&v);
        let mut f = u.dot(&w.w1) + &w.b1;
        f.mapv_inplace(f64::tanh);
        let h = &u + &f;
        let pool = match self.config.pooling {
            Pooling::MeanTokens if !tokens.is_empty() => (m, n),
            _ => (0, n),
        };
        let z = if n == 0 {
            Array1::zeros(d)
        } else {
            h.slice(s![pool.0..pool.1, ..])
                .mean_axis(Axis(0))
                .expect("non-empty pool")
        };
        Trace {
            tokens: tokens.to_vec(),
            n_prompt: m,
            x,
            q,
            k,
            v,
            a,
            u,
            f,
            pool,
            z,
        }
    }

    /// Backpropagate `dz = dL/dz`. Accumulates weight gradients into
    /// `grads` when given and returns `dL/dX` (prompt rows first).
    pub fn backward(&self, trace: &Trace, dz: ArrayView1<'_, f64>, grads: Option<&mut EncoderGrads>) -> Array2<f64> {
        let d = self.config.dim;
        let w = &self.weights;
        let n = trace.x.nrows();
        if n == 0 {
            return Array2::zeros((0, d));
        }
        let (lo, hi) = trace.pool;
        let mut dh = Array2::zeros((n, d));
        let share = dz.to_owned() / (hi - lo) as f64;
        dh.slice_mut(s![lo..hi, ..])
            .assign(&share.broadcast((hi - lo, d)).expect("broadcast"));

        // H = U + tanh(U W1 + b1)
        let g = &dh * &trace.f.mapv(|f| 1.0 - f * f);
        let du = &dh + &g.dot(&w.w1.t());
        // U = X + A V
        let da = du.dot(&trace.v.t());
        let dv = trace.a.t().dot(&du);
        let row_dot = (&trace.a * &da).sum_axis(Axis(1));
        let mut ds = &da - &row_dot.insert_axis(Axis(1));
        ds *= &trace.a;
        ds /= (d as f64).sqrt();
        let dq = ds.dot(&trace.k);
        let dk = ds.t().dot(&trace.q);

        let mut dx = du;
        dx += &dq.dot(&w.wq.t());
        dx += &dk.dot(&w.wk.t());
        dx += &dv.dot(&w.wv.t());

        if let Some(gr) = grads {
            gr.w1 += &trace.u.t().dot(&g);
            gr.b1 += &g.sum_axis(Axis(0));
            gr.wq += &trace.x.t().dot(&dq);
            gr.wk += &trace.x.t().dot(&dk);
            gr.wv += &trace.x.t().dot(&dv);
            for (i, &t) in trace.tokens.iter().enumerate() {
                let row = dx.row(trace.n_prompt + i);
                let acc = gr.emb_rows.entry(t).or_insert_with(|| vec![0.0; d]);
                for (a, r) in acc.iter_mut().zip(row.iter()) {
                    *a += r;
                }
            }
        }
        dx
    }

    /// Write `encoder.json` and `encoder.bin` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), ClarityError> {
        fs::create_dir_all(dir).map_err(|source| IoError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let header = CheckpointHeader {
            config: self.config.clone(),
            parameter_digest: self.parameter_digest(),
        };
        io::write_json(dir.join("encoder.json"), &header)?;
        let bin = dir.join("encoder.bin");
        fs::write(&bin, self.weights.to_bytes()).map_err(|source| IoError::Write { path: bin, source })?;
        Ok(())
    }

    /// Load a checkpoint written by [`Encoder::save`], verifying its digest.
    /// The loaded encoder is finetunable.
    pub fn load(dir: &Path) -> Result<Self, ClarityError> {
        let header: CheckpointHeader = io::read_json(dir.join("encoder.json"))?;
        header.config.validate()?;
        let bin = dir.join("encoder.bin");
        let bytes = fs::read(&bin).map_err(|source| IoError::Read { path: bin, source })?;
        let d = header.config.dim;
        let v = header.config.vocab_buckets;
        let expected = (v * d + 4 * d * d + d) * 8;
        if bytes.len() != expected {
            return Err(ClarityError::InvalidConfig(format!(
                "encoder.bin has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let mut vals = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let mut take = |rows: usize, cols: usize| {
            Array2::from_shape_vec((rows, cols), vals.by_ref().take(rows * cols).collect()).expect("sized")
        };
        let emb = take(v, d);
        let wq = take(d, d);
        let wk = take(d, d);
        let wv = take(d, d);
        let w1 = take(d, d);
        let b1 = take(1, d).into_shape_with_order(d).expect("row");
        let enc = Self {
            config: header.config,
            mode: EncoderMode::Finetunable,
            weights: EncoderWeights {
                emb,
                wq,
                wk,
                wv,
                w1,
                b1,
            },
        };
        let actual = enc.parameter_digest();
        if actual != header.parameter_digest {
            return Err(ClarityError::DigestMismatch {
                expected: header.parameter_digest,
                actual,
            });
        }
        Ok(enc)
    }

    pub(crate) fn apply(&mut self, grads: &EncoderGrads, opt: &mut EncoderOptimizer) {
        let d = self.config.dim;
        opt.emb
            .step_rows(self.weights.emb.as_slice_mut().expect("layout"), d, &grads.emb_rows);
        for (p, g, o) in [
            (&mut self.weights.wq, &grads.wq, &mut opt.wq),
            (&mut self.weights.wk, &grads.wk, &mut opt.wk),
            (&mut self.weights.wv, &grads.wv, &mut opt.wv),
            (&mut self.weights.w1, &grads.w1, &mut opt.w1),
        ] {
            o.step(p.as_slice_mut().expect("layout"), g.as_slice().expect("layout"));
        }
        opt.b1.step(
            self.weights.b1.as_slice_mut().expect("layout"),
            grads.b1.as_slice().expect("layout"),
        );
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: EncoderConfig,
    parameter_digest: String,
}

/// One Adam state per weight tensor.
pub(crate) struct EncoderOptimizer {
    emb: crate::optim::Adam,
    wq: crate::optim::Adam,
    wk: crate::optim::Adam,
    wv: crate::optim::Adam,
    w1: crate::optim::Adam,
    b1: crate::optim::Adam,
}

impl EncoderOptimizer {
    pub(crate) fn new(enc: &Encoder, lr: f64) -> Self {
        use crate::optim::Adam;
        let d = enc.dim();
        Self {
            emb: Adam::new(enc.weights.emb.len(), lr),
            wq: Adam::new(d * d, lr),
            wk: Adam::new(d * d, lr),
            wv: Adam::new(d * d, lr),
            w1: Adam::new(d * d, lr),
            b1: Adam::new(d, lr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn tiny(pooling: Pooling) -> Encoder {
        let cfg = EncoderConfig {
            name: "tiny".into(),
            vocab_buckets: 11,
            dim: 4,
            max_len: 16,
            pooling,
        };
        let mut e = Encoder::new(cfg, 7).unwrap();
        e.weights.b1 = Array1::from(vec![0.1, -0.2, 0.05, 0.3]);
        e
    }

    /// Scalar objective `c · z` used for finite differences.
    fn objective(e: &Encoder, tokens: &[usize], prompt: Option<&Array2<f64>>, c: &Array1<f64>) -> f64 {
        e.forward(tokens, prompt.map(|p| p.view())).z.dot(c)
    }

    fn check_matrix(
        e: &Encoder,
        tokens: &[usize],
        prompt: Option<&Array2<f64>>,
        c: &Array1<f64>,
        pick: fn(&mut EncoderWeights) -> &mut Array2<f64>,
        analytic: &Array2<f64>,
    ) {
        let h = 1e-6;
        let shape = analytic.dim();
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let mut plus = e.clone();
                pick(&mut plus.weights)[[i, j]] += h;
                let mut minus = e.clone();
                pick(&mut minus.weights)[[i, j]] -= h;
                let numeric = (objective(&plus, tokens, prompt, c) - objective(&minus, tokens, prompt, c)) / (2.0 * h);
                assert!(
                    (numeric - analytic[[i, j]]).abs() < 1e-6,
                    "[{i},{j}] numeric {numeric} analytic {}",
                    analytic[[i, j]]
                );
            }
        }
    }

    fn gradient_check(pooling: Pooling) {
        let e = tiny(pooling);
        let tokens = [3usize, 5, 3, 9];
        let prompt = Array2::from_shape_fn((2, 4), |(i, j)| 0.3 * (i as f64) - 0.2 * (j as f64) + 0.1);
        let c = Array1::from(vec![0.7, -1.1, 0.4, 0.9]);

        let trace = e.forward(&tokens, Some(prompt.view()));
        let mut grads = EncoderGrads::zeros(4);
        let dx = e.backward(&trace, c.view(), Some(&mut grads));

        check_matrix(&e, &tokens, Some(&prompt), &c, |w| &mut w.wq, &grads.wq);
        check_matrix(&e, &tokens, Some(&prompt), &c, |w| &mut w.wk, &grads.wk);
        check_matrix(&e, &tokens, Some(&prompt), &c, |w| &mut w.wv, &grads.wv);
        check_matrix(&e, &tokens, Some(&prompt), &c, |w| &mut w.w1, &grads.w1);
        check_matrix(&e, &tokens, Some(&prompt), &c, |w| &mut w.emb, &{
            let mut full = Array2::zeros((11, 4));
            for (r, g) in &grads.emb_rows {
                full.row_mut(*r).assign(&Array1::from(g.clone()));
            }
            full
        });

        let h = 1e-6;
        for j in 0..4 {
            let mut plus = e.clone();
            plus.weights.b1[j] += h;
            let mut minus = e.clone();
            minus.weights.b1[j] -= h;
            let numeric = (objective(&plus, &tokens, Some(&prompt), &c)
                - objective(&minus, &tokens, Some(&prompt), &c))
                / (2.0 * h);
            assert!((numeric - grads.b1[j]).abs() < 1e-6);
        }
        for i in 0..2 {
            for j in 0..4 {
                let mut p = prompt.clone();
                p[[i, j]] += h;
                let mut mn = prompt.clone();
                mn[[i, j]] -= h;
                let numeric =
                    (objective(&e, &tokens, Some(&p), &c) - objective(&e, &tokens, Some(&mn), &c)) / (2.0 * h);
                assert!((numeric - dx[[i, j]]).abs() < 1e-6, "prompt [{i},{j}]");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_mean_pooling() {
        gradient_check(Pooling::Mean);
    }

    #[test]
    fn gradients_match_finite_differences_token_pooling() {
        gradient_check(Pooling::MeanTokens);
    }

    #[test]
    fn empty_input_embeds_to_zero() {
        let e = tiny(Pooling::Mean);
        let z = e.embed("!!! ...");
        assert!(z.iter().all(|&x| x == 0.0));
        assert_eq!(z.len(), 4);
    }

    #[test]
    fn tokenization_truncates_and_is_stable() {
        let e = tiny(Pooling::Mean);
        let long = "word ".repeat(40);
        assert_eq!(e.tokenize(&long).len(), 16);
        assert_eq!(e.tokenize("Coal coal"), e.tokenize("coal COAL"));
    }

    #[test]
    fn digest_tracks_weights() {
        let e = tiny(Pooling::Mean);
        let d0 = e.parameter_digest();
        assert_eq!(d0, e.clone().frozen().parameter_digest());
        let mut f = e.clone();
        f.weights.wq[[0, 0]] += 1e-12;
        assert_ne!(d0, f.parameter_digest());
        assert_eq!(Encoder::new(e.config().clone(), 7).unwrap().weights.emb, e.weights.emb);
    }

    #[test]
    fn checkpoint_round_trip() {
        let e = tiny(Pooling::MeanTokens);
        let dir = tempfile::tempdir().unwrap();
        e.save(dir.path()).unwrap();
        let back = Encoder::load(dir.path()).unwrap();
        assert_eq!(back, e);

        let bin = dir.path().join("encoder.bin");
        let mut bytes = fs::read(&bin).unwrap();
        bytes[0] ^= 1;
        fs::write(&bin, bytes).unwrap();
        assert!(matches!(
            Encoder::load(dir.path()),
            Err(ClarityError::DigestMismatch { .. })
        ));
    }
}
