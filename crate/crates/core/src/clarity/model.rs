use std::fs;
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::contrastive::{finetune_encoder_contrastive, ContrastiveOptions, LossTrace};
use super::encoder::{Encoder, EncoderHandle, EncoderMode};
use super::head::{argmax_canonical, require_all_classes, HeadOptions, LinearHead, NUM_CLASSES};
use super::pairs::generate_contrastive_pairs;
use super::prompt::SoftPrompt;
use super::ClarityError;
use crate::eval::{compute_metrics, MetricsError, MetricsReport};
use crate::io::{self, IoError};
use crate::label::{ClarityLabel, ClassLabel};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    ContrastiveHead,
    PromptTuned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarityTrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_virtual_tokens: Option<usize>,
    pub trainable_parameters: usize,
    /// Per-epoch mean training loss.
    #[serde(default)]
    pub loss_trace: Vec<f64>,
}

/// A trained three-class clarity classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClarityModel {
    pub kind: ModelKind,
    pub encoder: Encoder,
    pub head: LinearHead,
    pub prompt: Option<SoftPrompt>,
    pub label_order: Vec<ClarityLabel>,
    pub training_meta: ClarityTrainingMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClarityPrediction {
    pub label: ClarityLabel,
    /// Probabilities in canonical label order.
    pub probs: [f64; NUM_CLASSES],
}

/// One line of a prediction JSON Lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sentence_id: String,
    pub label: ClarityLabel,
    pub probs: [f64; NUM_CLASSES],
}

fn l2_normalized(mut z: Array1<f64>) -> Array1<f64> {
    let n = z.dot(&z).sqrt();
    if n > 0.0 {
        z /= n;
    }
    z
}

impl ClarityModel {
    pub fn encoder_handle(&self) -> EncoderHandle {
        self.encoder.handle()
    }

    /// The vector the head sees. Contrastive models use the unit-length
    /// embedding (the space their encoder was tuned in); prompt-tuned
    /// models use the pooled state of the prompted input.
    pub fn features(&self, text: &str) -> Array1<f64> {
        match (&self.kind, &self.prompt) {
            (ModelKind::PromptTuned, Some(p)) => {
                self.encoder
                    .forward(&self.encoder.tokenize(text), Some(p.embeddings.view()))
                    .z
            }
            _ => l2_normalized(self.encoder.embed(text)),
        }
    }

    pub fn validate(&self) -> Result<(), ClarityError> {
        let bad = |m: &str| Err(ClarityError::InvalidConfig(m.to_string()));
        if self.label_order != ClarityLabel::ALL {
            return bad("label order must be Specific, Ambiguous, Generic");
        }
        if self.head.dim() != self.encoder.dim() || self.head.bias.len() != NUM_CLASSES {
            return bad("head shape does not match the encoder");
        }
        match (self.kind, &self.prompt) {
            (ModelKind::PromptTuned, Some(p)) => {
                if self.encoder.mode() != EncoderMode::Frozen {
                    return bad("prompt-tuned models need a frozen encoder");
                }
                p.validate(self.encoder.dim())
            }
            (ModelKind::ContrastiveHead, None) => Ok(()),
            _ => bad("a soft prompt is present iff the model is prompt-tuned"),
        }
    }

    /// Write the artifact directory: `manifest.json`, `head.json`,
    /// optional `prompt.json`, and the encoder checkpoint in `encoder/`.
    pub fn save(&self, dir: &Path) -> Result<(), ClarityError> {
        self.validate()?;
        fs::create_dir_all(dir).map_err(|source| IoError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let manifest = Manifest {
            format_version: MODEL_FORMAT_VERSION,
            kind: self.kind,
            encoder: self.encoder_handle(),
            label_order: self.label_order.clone(),
            training_meta: self.training_meta.clone(),
        };
        io::write_json(dir.join("manifest.json"), &manifest)?;
        io::write_json(dir.join("head.json"), &self.head)?;
        if let Some(p) = &self.prompt {
            io::write_json(dir.join("prompt.json"), p)?;
        }
        self.encoder.save(&dir.join("encoder"))
    }

    pub fn load(dir: &Path) -> Result<Self, ClarityError> {
        let manifest: Manifest = io::read_json(dir.join("manifest.json"))?;
        if manifest.format_version != MODEL_FORMAT_VERSION {
            return Err(ClarityError::FormatVersion(manifest.format_version));
        }
        let mut encoder = Encoder::load(&dir.join("encoder"))?;
        if encoder.parameter_digest() != manifest.encoder.parameter_digest {
            return Err(ClarityError::DigestMismatch {
                expected: manifest.encoder.parameter_digest,
                actual: encoder.parameter_digest(),
            });
        }
        if manifest.encoder.mode == EncoderMode::Frozen {
            encoder = encoder.frozen();
        }
        let head: LinearHead = io::read_json(dir.join("head.json"))?;
        let prompt_path = dir.join("prompt.json");
        let prompt = if prompt_path.exists() {
            Some(io::read_json::<SoftPrompt>(prompt_path)?)
        } else {
            None
        };
        let model = Self {
            kind: manifest.kind,
            encoder,
            head,
            prompt,
            label_order: manifest.label_order,
            training_meta: manifest.training_meta,
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    kind: ModelKind,
    encoder: EncoderHandle,
    label_order: Vec<ClarityLabel>,
    training_meta: ClarityTrainingMeta,
}

/// Fit the linear head on embeddings from `encoder`, which is not changed.
pub fn train_head<S: AsRef<str>>(
    encoder: &Encoder,
    labeled: &[(S, ClarityLabel)],
    seed: u64,
) -> Result<ClarityModel, ClarityError> {
    train_head_with(encoder, labeled, seed, &HeadOptions::default())
}

pub fn train_head_with<S: AsRef<str>>(
    encoder: &Encoder,
    labeled: &[(S, ClarityLabel)],
    seed: u64,
    opts: &HeadOptions,
) -> Result<ClarityModel, ClarityError> {
    let labels: Vec<ClarityLabel> = labeled.iter().map(|(_, l)| *l).collect();
    require_all_classes(&labels)?;
    let features: Vec<Array1<f64>> = labeled
        .iter()
        .map(|(t, _)| l2_normalized(encoder.embed(t.as_ref())))
        .collect();
    let head = LinearHead::fit(&features, &labels, opts)?;
    Ok(ClarityModel {
        kind: ModelKind::ContrastiveHead,
        encoder: encoder.clone(),
        training_meta: ClarityTrainingMeta {
            seed,
            epochs: 0,
            pair_count: None,
            num_virtual_tokens: None,
            trainable_parameters: head.parameter_count(),
            loss_trace: Vec::new(),
        },
        head,
        prompt: None,
        label_order: ClarityLabel::ALL.to_vec(),
    })
}

/// Pair generation, Siamese fine-tuning and head fitting in one call.
pub fn train_contrastive_classifier<S: AsRef<str>>(
    encoder: &Encoder,
    labeled: &[(S, ClarityLabel)],
    r_per_item: usize,
    opts: &ContrastiveOptions,
) -> Result<(ClarityModel, LossTrace), ClarityError> {
    let labels: Vec<ClarityLabel> = labeled.iter().map(|(_, l)| *l).collect();
    require_all_classes(&labels)?;
    let pairs = generate_contrastive_pairs(labeled, r_per_item, opts.seed, true)?;
    let (tuned, trace) = finetune_encoder_contrastive(encoder, &pairs, opts)?;
    let mut model = train_head(&tuned, labeled, opts.seed)?;
    model.training_meta.epochs = opts.epochs;
    model.training_meta.pair_count = Some(pairs.len());
    model.training_meta.trainable_parameters += tuned.weights().parameter_count();
    model.training_meta.loss_trace = trace.epoch_means.clone();
    Ok((model, trace))
}

pub fn predict_clarity(model: &ClarityModel, sentence: &str) -> ClarityPrediction {
    let probs = model.head.probs(model.features(sentence).view());
    ClarityPrediction {
        label: argmax_canonical(&probs),
        probs,
    }
}

/// Predict many sentences, sharded across the available cores. Output
/// order matches input order.
pub fn predict_batch<S: AsRef<str> + Sync>(model: &ClarityModel, sentences: &[S]) -> Vec<ClarityPrediction> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = sentences.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = sentences
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|s| predict_clarity(model, s.as_ref()))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("prediction worker panicked"))
            .collect()
    })
}

pub fn evaluate_clarity<S: AsRef<str> + Sync>(
    model: &ClarityModel,
    test: &[(S, ClarityLabel)],
) -> Result<MetricsReport, MetricsError> {
    let texts: Vec<&str> = test.iter().map(|(t, _)| t.as_ref()).collect();
    let preds = predict_batch(model, &texts);
    let pairs: Vec<(ClarityLabel, ClarityLabel)> = test.iter().zip(&preds).map(|((_, g), p)| (*g, p.label)).collect();
    compute_metrics(&pairs)
}
