use std::collections::HashMap;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{Encoder, EncoderConfig, EncoderGrads, EncoderMode, EncoderOptimizer};
use super::pairs::PairBatch;
use super::ClarityError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastiveOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ContrastiveOptions {
    fn default() -> Self {
        Self {
            epochs: 1,
            learning_rate: 0.005,
            batch_size: 16,
            seed: 0,
        }
    }
}

/// Pair-set losses around a fine-tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    /// Mean loss over all pairs before the first update.
    pub initial: f64,
    /// Running mean of the batch losses seen during each epoch.
    pub epoch_means: Vec<f64>,
    /// Mean loss over all pairs after the last update.
    pub final_loss: f64,
}

const NORM_FLOOR: f64 = 1e-12;

fn cosine(a: &Array1<f64>, b: &Array1<f64>) -> (f64, f64, f64) {
    let na = a.dot(a).sqrt();
    let nb = b.dot(b).sqrt();
    if na < NORM_FLOOR || nb < NORM_FLOOR {
        return (0.0, na, nb);
    }
    (a.dot(b) / (na * nb), na, nb)
}

/// `(cos(za, zb) - target)^2` and its gradients with respect to both
/// embeddings.
pub fn cosine_loss(za: &Array1<f64>, zb: &Array1<f64>, target: f64) -> (f64, Array1<f64>, Array1<f64>) {
    let (cos, na, nb) = cosine(za, zb);
    let loss = (cos - target).powi(2);
    if na < NORM_FLOOR || nb < NORM_FLOOR {
        return (loss, Array1::zeros(za.len()), Array1::zeros(zb.len()));
    }
    let r = 2.0 * (cos - target);
    let ga = (zb / (na * nb) - za * (cos / (na * na))) * r;
    let gb = (za / (na * nb) - zb * (cos / (nb * nb))) * r;
    (loss, ga, gb)
}

pub(crate) struct TokenCache {
    config: EncoderConfig,
    seen: HashMap<String, Vec<usize>>,
}

impl TokenCache {
    pub(crate) fn new(config: &EncoderConfig) -> Self {
        Self {
            config: config.clone(),
            seen: HashMap::new(),
        }
    }

    pub(crate) fn get(&mut self, text: &str) -> &[usize] {
        if !self.seen.contains_key(text) {
            let t = self.config.tokenize(text);
            self.seen.insert(text.to_string(), t);
        }
        &self.seen[text]
    }
}

/// Mean cosine-regression loss of `encoder` over every pair.
pub fn pair_set_loss(encoder: &Encoder, pairs: &PairBatch) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let mut cache: HashMap<&str, Array1<f64>> = HashMap::new();
    let mut total = 0.0;
    for p in &pairs.pairs {
        let za = cache
            .entry(&p.text_a)
            .or_insert_with(|| encoder.embed(&p.text_a))
            .clone();
        let zb = cache
            .entry(&p.text_b)
            .or_insert_with(|| encoder.embed(&p.text_b))
            .clone();
        total += cosine_loss(&za, &zb, p.target).0;
    }
    total / pairs.len() as f64
}

/// Siamese fine-tuning: both texts of a pair go through the same encoder
/// and the cosine of their embeddings is regressed onto the pair target.
/// Every encoder weight is updated (Adam, mini-batches).
pub fn finetune_encoder_contrastive(
    encoder: &Encoder,
    pairs: &PairBatch,
    opts: &ContrastiveOptions,
) -> Result<(Encoder, LossTrace), ClarityError> {
    if encoder.mode() == EncoderMode::Frozen {
        return Err(ClarityError::EncoderFrozen);
    }
    if opts.batch_size == 0 || (opts.learning_rate.is_nan() || opts.learning_rate <= 0.0) {
        return Err(ClarityError::InvalidConfig(
            "batch_size and learning_rate must be positive".into(),
        ));
    }
    let initial = pair_set_loss(encoder, pairs);
    if !initial.is_finite() {
        return Err(ClarityError::NonFiniteLoss { epoch: 0, step: 0 });
    }
    let mut enc = encoder.clone();
    let mut opt = EncoderOptimizer::new(&enc, opts.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_means = Vec::with_capacity(opts.epochs);
    let mut tokens = TokenCache::new(encoder.config());

    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (step, batch) in order.chunks(opts.batch_size).enumerate() {
            let mut grads = EncoderGrads::zeros(enc.dim());
            let mut batch_loss = 0.0;
            for &i in batch {
                let p = &pairs.pairs[i];
                let ta = enc.forward(tokens.get(&p.text_a), None);
                let tb = enc.forward(tokens.get(&p.text_b), None);
                let (loss, ga, gb) = cosine_loss(&ta.z, &tb.z, p.target);
                batch_loss += loss;
                enc.backward(&ta, ga.view(), Some(&mut grads));
                enc.backward(&tb, gb.view(), Some(&mut grads));
            }
            if !batch_loss.is_finite() {
                return Err(ClarityError::NonFiniteLoss { epoch, step });
            }
            sum += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            enc.apply(&grads, &mut opt);
        }
        epoch_means.push(if pairs.is_empty() {
            0.0
        } else {
            sum / pairs.len() as f64
        });
    }

    let final_loss = pair_set_loss(&enc, pairs);
    if !final_loss.is_finite() {
        return Err(ClarityError::NonFiniteLoss {
            epoch: opts.epochs,
            step: 0,
        });
    }
    Ok((
        enc,
        LossTrace {
            initial,
            epoch_means,
            final_loss,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clarity::pairs::generate_contrastive_pairs;
    use crate::label::ClarityLabel::{self, *};

    fn toy() -> Vec<(&'static str, ClarityLabel)> {
        vec![
            (
                "The Fund excludes issuers deriving more than 5% of revenue from thermal coal.",
                Specific,
            ),
            (
                "The Fund will not invest in companies that manufacture controversial weapons.",
                Specific,
            ),
            (
                "Issuers with an MSCI ESG rating below BB are removed from the universe.",
                Specific,
            ),
            ("At least 80% of net assets are invested in green bonds.", Specific),
            (
                "The Adviser may consider ESG factors in its investment process.",
                Ambiguous,
            ),
            (
                "The Adviser believes sustainable companies may perform better over time.",
                Ambiguous,
            ),
            (
                "ESG considerations can be one of many factors the Adviser evaluates.",
                Ambiguous,
            ),
            (
                "The portfolio managers generally seek companies with strong ESG practices.",
                Ambiguous,
            ),
            ("ESG stands for environmental, social and governance.", Generic),
            (
                "Environmental factors include climate change and resource depletion.",
                Generic,
            ),
            (
                "Governance factors relate to board structure and executive pay.",
                Generic,
            ),
            ("Social factors include labor standards and human rights.", Generic),
        ]
    }

    fn small() -> Encoder {
        let cfg = EncoderConfig {
            vocab_buckets: 512,
            dim: 16,
            ..EncoderConfig::small()
        };
        Encoder::new(cfg, 3).unwrap()
    }

    #[test]
    fn cosine_gradient_matches_finite_differences() {
        let a = Array1::from(vec![0.3, -1.2, 0.5]);
        let b = Array1::from(vec![1.0, 0.4, -0.7]);
        let (_, ga, gb) = cosine_loss(&a, &b, 1.0);
        let h = 1e-6;
        for i in 0..3 {
            let mut ap = a.clone();
            ap[i] += h;
            let mut am = a.clone();
            am[i] -= h;
            let num = (cosine_loss(&ap, &b, 1.0).0 - cosine_loss(&am, &b, 1.0).0) / (2.0 * h);
            assert!((num - ga[i]).abs() < 1e-7);
            let mut bp = b.clone();
            bp[i] += h;
            let mut bm = b.clone();
            bm[i] -= h;
            let num = (cosine_loss(&a, &bp, 1.0).0 - cosine_loss(&a, &bm, 1.0).0) / (2.0 * h);
            assert!((num - gb[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn one_epoch_lowers_pair_loss() {
        let pairs = generate_contrastive_pairs(&toy(), 4, 1, true).unwrap();
        let enc = small();
        let (tuned, trace) = finetune_encoder_contrastive(&enc, &pairs, &ContrastiveOptions::default()).unwrap();
        assert_eq!(trace.epoch_means.len(), 1);
        assert!(trace.final_loss < trace.initial, "{trace:?}");
        assert_eq!(tuned.dim(), enc.dim());
        assert_ne!(tuned.parameter_digest(), enc.parameter_digest());
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let pairs = generate_contrastive_pairs(&toy(), 2, 1, true).unwrap();
        let enc = small();
        let opts = ContrastiveOptions {
            epochs: 0,
            ..Default::default()
        };
        let (same, trace) = finetune_encoder_contrastive(&enc, &pairs, &opts).unwrap();
        assert_eq!(same.parameter_digest(), enc.parameter_digest());
        assert_eq!(trace.initial, trace.final_loss);
    }

    #[test]
    fn frozen_encoders_are_rejected() {
        let pairs = generate_contrastive_pairs(&toy(), 1, 1, true).unwrap();
        let enc = small().frozen();
        assert!(matches!(
            finetune_encoder_contrastive(&enc, &pairs, &ContrastiveOptions::default()),
            Err(ClarityError::EncoderFrozen)
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let pairs = generate_contrastive_pairs(&toy(), 2, 1, true).unwrap();
        let mut enc = small();
        enc.weights.wq[[0, 0]] = f64::NAN;
        assert!(matches!(
            finetune_encoder_contrastive(&enc, &pairs, &ContrastiveOptions::default()),
            Err(ClarityError::NonFiniteLoss { .. })
        ));
    }
}
