use ndarray::{s, Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::contrastive::TokenCache;
use super::encoder::Encoder;
use super::head::{require_all_classes, LinearHead, NUM_CLASSES};
use super::model::{ClarityModel, ClarityTrainingMeta, ModelKind};
use super::ClarityError;
use crate::label::{ClarityLabel, ClassLabel};
use crate::optim::Adam;

pub const DEFAULT_VIRTUAL_TOKENS: usize = 20;

/// Trainable virtual-token embeddings prepended to every input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftPrompt {
    pub num_virtual_tokens: usize,
    pub embeddings: Array2<f64>,
}

impl SoftPrompt {
    /// Rows drawn at random from the encoder's token-embedding table.
    pub fn from_vocabulary(encoder: &Encoder, num_virtual_tokens: usize, rng: &mut impl Rng) -> Self {
        let emb = &encoder.weights().emb;
        let mut embeddings = Array2::zeros((num_virtual_tokens, encoder.dim()));
        for mut row in embeddings.rows_mut() {
            row.assign(&emb.row(rng.gen_range(0..emb.nrows())));
        }
        Self {
            num_virtual_tokens,
            embeddings,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), ClarityError> {
        if self.embeddings.dim() != (self.num_virtual_tokens, dim) {
            return Err(ClarityError::InvalidConfig(format!(
                "soft prompt shape {:?}, expected ({}, {dim})",
                self.embeddings.dim(),
                self.num_virtual_tokens
            )));
        }
        if self.embeddings.iter().any(|x| !x.is_finite()) {
            return Err(ClarityError::InvalidConfig("soft prompt has non-finite values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptOptions {
    pub num_virtual_tokens: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self {
            num_virtual_tokens: DEFAULT_VIRTUAL_TOKENS,
            epochs: 20,
            learning_rate: 0.01,
            batch_size: 8,
            seed: 0,
        }
    }
}

/// Soft-prompt rows plus the linear head.
pub fn trainable_parameter_count(num_virtual_tokens: usize, hidden: usize) -> usize {
    num_virtual_tokens * hidden + hidden * NUM_CLASSES + NUM_CLASSES
}

/// Learn a soft prompt and a linear head on top of a frozen encoder.
///
/// The encoder is only borrowed; its digest is re-checked after training.
/// Cross-entropy gradients flow through the encoder into the prompt rows,
/// but no encoder weight is touched.
pub fn train_prompt_tuned<S: AsRef<str>>(
    encoder: &Encoder,
    labeled: &[(S, ClarityLabel)],
    opts: &PromptOptions,
) -> Result<ClarityModel, ClarityError> {
    let labels: Vec<ClarityLabel> = labeled.iter().map(|(_, l)| *l).collect();
    require_all_classes(&labels)?;
    if opts.num_virtual_tokens == 0 {
        return Err(ClarityError::InvalidConfig(
            "num_virtual_tokens must be at least 1".into(),
        ));
    }
    if opts.batch_size == 0 || (opts.learning_rate.is_nan() || opts.learning_rate <= 0.0) {
        return Err(ClarityError::InvalidConfig(
            "batch_size and learning_rate must be positive".into(),
        ));
    }
    let digest_before = encoder.parameter_digest();
    let d = encoder.dim();
    let m = opts.num_virtual_tokens;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut prompt = SoftPrompt::from_vocabulary(encoder, m, &mut rng);
    let mut head = LinearHead::zeros(d);
    let mut opt_p = Adam::new(m * d, opts.learning_rate);
    let mut opt_w = Adam::new(NUM_CLASSES * d, opts.learning_rate);
    let mut opt_b = Adam::new(NUM_CLASSES, opts.learning_rate);
    let mut tokens = TokenCache::new(encoder.config());
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    let mut loss_trace = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (step, batch) in order.chunks(opts.batch_size).enumerate() {
            let mut gp = Array2::<f64>::zeros((m, d));
            let mut gw = Array2::<f64>::zeros((NUM_CLASSES, d));
            let mut gb = Array1::<f64>::zeros(NUM_CLASSES);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (text, label) = &labeled[i];
                let trace = encoder.forward(tokens.get(text.as_ref()), Some(prompt.embeddings.view()));
                let mut p = head.probs(trace.z.view());
                batch_loss -= p[label.index()].max(f64::MIN_POSITIVE).ln();
                p[label.index()] -= 1.0;
                let dlogits = Array1::from(p.to_vec());
                for c in 0..NUM_CLASSES {
                    gw.row_mut(c).scaled_add(dlogits[c], &trace.z);
                }
                gb += &dlogits;
                let dz = head.weights.t().dot(&dlogits);
                let dx = encoder.backward(&trace, dz.view(), None);
                gp += &dx.slice(s![..m, ..]);
            }
            if !batch_loss.is_finite() {
                return Err(ClarityError::NonFiniteLoss { epoch, step });
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            gp *= scale;
            gw *= scale;
            gb *= scale;
            opt_p.step(
                prompt.embeddings.as_slice_mut().expect("layout"),
                gp.as_slice().expect("layout"),
            );
            opt_w.step(
                head.weights.as_slice_mut().expect("layout"),
                gw.as_slice().expect("layout"),
            );
            opt_b.step(
                head.bias.as_slice_mut().expect("layout"),
                gb.as_slice().expect("layout"),
            );
        }
        loss_trace.push(epoch_loss / labeled.len() as f64);
    }

    let digest_after = encoder.parameter_digest();
    if digest_after != digest_before {
        return Err(ClarityError::DigestMismatch {
            expected: digest_before,
            actual: digest_after,
        });
    }
    prompt.validate(d)?;
    Ok(ClarityModel {
        kind: ModelKind::PromptTuned,
        encoder: encoder.clone().frozen(),
        head,
        prompt: Some(prompt),
        label_order: ClarityLabel::ALL.to_vec(),
        training_meta: ClarityTrainingMeta {
            seed: opts.seed,
            epochs: opts.epochs,
            pair_count: None,
            num_virtual_tokens: Some(m),
            trainable_parameters: trainable_parameter_count(m, d),
            loss_trace,
        },
    })
}
