use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{RelevanceError, SparseVec, TermFeaturizer};
use crate::eval::{compute_metrics, MetricsError, MetricsReport};
use crate::io::{self, IoError};
use crate::label::RelevanceLabel;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const MIN_TRAINING_SIZE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelevanceHyper {
    /// Inverse regularization strengths searched by cross-validation.
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub max_iter: usize,
    /// Stop when the gradient's max-norm drops below this.
    pub tol: f64,
    /// Reweight classes inversely to their frequency.
    pub class_weighted: bool,
    pub threshold: f64,
}

impl Default for RelevanceHyper {
    fn default() -> Self {
        Self {
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            folds: 5,
            max_iter: 500,
            tol: 1e-6,
            class_weighted: true,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    /// Selected inverse regularization strength.
    pub c: f64,
    /// Mean held-out ESG F1 per grid value, in grid order.
    pub cv_f1: Vec<(f64, f64)>,
    /// Weights for `[ESG, NonESG]`.
    pub class_weights: [f64; 2],
    pub n_train: usize,
    pub iterations: usize,
    /// Left empty unless the caller stamps one, so reruns stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

/// TF-IDF logistic regression. `score = sigmoid(w·x + b)` is P(ESG).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRelevanceModel {
    pub format_version: u32,
    pub featurizer: TermFeaturizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    pub training_meta: TrainingMeta,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(w: &[f64], x: &SparseVec) -> f64 {
    x.iter().map(|&(c, v)| w[c] * v).sum()
}

struct Problem<'a> {
    xs: &'a [&'a SparseVec],
    ys: &'a [f64],
    sample_weight: &'a [f64],
    dim: usize,
}

/// Minimize `mean(s_i * logloss_i) + |w|^2 / (2 C n)` by Nesterov-accelerated
/// gradient descent with adaptive restart. Full-batch, so deterministic.
fn fit_logistic(p: &Problem<'_>, c: f64, max_iter: usize, tol: f64) -> (Vec<f64>, f64, usize) {
    let n = p.xs.len() as f64;
    let l2 = 1.0 / (c * n);
    let max_x2 =
        p.xs.iter()
            .map(|x| x.iter().map(|(_, v)| v * v).sum::<f64>())
            .fold(0.0, f64::max);
    let max_s = p.sample_weight.iter().copied().fold(0.0, f64::max);
    let lipschitz = 0.25 * max_s * (max_x2 + 1.0) + l2;
    let step = 1.0 / lipschitz;

    let mut w = vec![0.0; p.dim];
    let mut b = 0.0;
    let mut w_prev = w.clone();
    let mut b_prev;
    let mut momentum = 1.0f64;
    let mut yw = w.clone();
    let mut yb = b;
    let mut grad = vec![0.0; p.dim];
    let mut iterations = 0;

    for it in 0..max_iter {
        iterations = it + 1;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for ((x, &y), &s) in p.xs.iter().zip(p.ys).zip(p.sample_weight) {
            let r = s * (sigmoid(dot(&yw, x) + yb) - y) / n;
            for &(col, v) in x.iter() {
                grad[col] += r * v;
            }
            gb += r;
        }
        for (g, wi) in grad.iter_mut().zip(&yw) {
            *g += l2 * wi;
        }
        let gmax = grad.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax < tol {
            w.copy_from_slice(&yw);
            b = yb;
            break;
        }
        std::mem::swap(&mut w_prev, &mut w);
        b_prev = std::mem::replace(&mut b, yb - step * gb);
        for ((wi, yi), g) in w.iter_mut().zip(&yw).zip(&grad) {
            *wi = yi - step * g;
        }
        // restart momentum when the step moves against the gradient
        let progress: f64 = grad
            .iter()
            .zip(w.iter().zip(&w_prev))
            .map(|(g, (a, bp))| g * (a - bp))
            .sum::<f64>()
            + gb * (b - b_prev);
        if progress > 0.0 {
            momentum = 1.0;
        }
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next;
        momentum = next;
        for ((yi, wi), wp) in yw.iter_mut().zip(&w).zip(&w_prev) {
            *yi = wi + beta * (wi - wp);
        }
        yb = b + beta * (b - b_prev);
    }
    (w, b, iterations)
}

fn esg_f1(gold: &[f64], pred: &[f64]) -> f64 {
    let (mut tp, mut fp, mut fne) = (0.0, 0.0, 0.0);
    for (&g, &p) in gold.iter().zip(pred) {
        match (g == 1.0, p == 1.0) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fne += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fne)
    }
}

/// Fit the featurizer and a cross-validated logistic regression.
pub fn train_relevance<S: AsRef<str>>(
    labeled: &[(S, RelevanceLabel)],
    hyper: &RelevanceHyper,
    seed: u64,
) -> Result<LinearRelevanceModel, RelevanceError> {
    if labeled.len() < MIN_TRAINING_SIZE {
        let has_both = labeled.iter().any(|(_, l)| *l == RelevanceLabel::Esg)
            && labeled.iter().any(|(_, l)| *l == RelevanceLabel::NonEsg);
        if !labeled.is_empty() && !has_both {
            return Err(RelevanceError::SingleClassTrainingSet);
        }
        return Err(RelevanceError::TooFewExamples(labeled.len()));
    }
    let n_esg = labeled.iter().filter(|(_, l)| *l == RelevanceLabel::Esg).count();
    let n_non = labeled.len() - n_esg;
    if n_esg == 0 || n_non == 0 {
        return Err(RelevanceError::SingleClassTrainingSet);
    }
    if hyper.c_grid.is_empty() || hyper.folds < 2 {
        return Err(RelevanceError::Malformed("empty C grid or fewer than 2 folds".into()));
    }

    let texts: Vec<&str> = labeled.iter().map(|(t, _)| t.as_ref()).collect();
    let featurizer = TermFeaturizer::fit(&texts)?;
    let xs: Vec<SparseVec> = texts.iter().map(|t| featurizer.transform(t)).collect();
    let ys: Vec<f64> = labeled
        .iter()
        .map(|(_, l)| if *l == RelevanceLabel::Esg { 1.0 } else { 0.0 })
        .collect();
    let n = labeled.len() as f64;
    let class_weights = if hyper.class_weighted {
        [n / (2.0 * n_esg as f64), n / (2.0 * n_non as f64)]
    } else {
        [1.0, 1.0]
    };
    let sw: Vec<f64> = ys
        .iter()
        .map(|&y| if y == 1.0 { class_weights[0] } else { class_weights[1] })
        .collect();
    let dim = featurizer.vocabulary_size();

    // stratified folds
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0usize; xs.len()];
    for class in [1.0, 0.0] {
        let mut idx: Vec<usize> = (0..xs.len()).filter(|&i| ys[i] == class).collect();
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            fold[i] = k % hyper.folds;
        }
    }

    let mut cv_f1 = Vec::with_capacity(hyper.c_grid.len());
    for &c in &hyper.c_grid {
        let mut gold = Vec::with_capacity(xs.len());
        let mut pred = Vec::with_capacity(xs.len());
        for f in 0..hyper.folds {
            let train: Vec<usize> = (0..xs.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..xs.len()).filter(|&i| fold[i] == f).collect();
            let txs: Vec<&SparseVec> = train.iter().map(|&i| &xs[i]).collect();
            let tys: Vec<f64> = train.iter().map(|&i| ys[i]).collect();
            let tsw: Vec<f64> = train.iter().map(|&i| sw[i]).collect();
            let problem = Problem {
                xs: &txs,
                ys: &tys,
                sample_weight: &tsw,
                dim,
            };
            let (w, b, _) = fit_logistic(&problem, c, hyper.max_iter, hyper.tol);
            for &i in &test {
                gold.push(ys[i]);
                let p = sigmoid(dot(&w, &xs[i]) + b);
                pred.push(if p >= hyper.threshold { 1.0 } else { 0.0 });
            }
        }
        cv_f1.push((c, esg_f1(&gold, &pred)));
    }
    let best_c = cv_f1
        .iter()
        .fold(None::<(f64, f64)>, |best, &(c, f)| match best {
            Some((_, bf)) if bf >= f => best,
            _ => Some((c, f)),
        })
        .map(|(c, _)| c)
        .expect("non-empty grid");

    let all: Vec<&SparseVec> = xs.iter().collect();
    let problem = Problem {
        xs: &all,
        ys: &ys,
        sample_weight: &sw,
        dim,
    };
    let (weights, bias, iterations) = fit_logistic(&problem, best_c, hyper.max_iter, hyper.tol);
    Ok(LinearRelevanceModel {
        format_version: MODEL_FORMAT_VERSION,
        featurizer,
        weights,
        bias,
        threshold: hyper.threshold,
        training_meta: TrainingMeta {
            seed,
            c: best_c,
            cv_f1,
            class_weights,
            n_train: labeled.len(),
            iterations,
            date: None,
        },
    })
}

/// Label and P(ESG). Sentences with no known tokens score `sigmoid(bias)`.
pub fn predict_relevance(model: &LinearRelevanceModel, text: &str) -> (RelevanceLabel, f64) {
    let x = model.featurizer.transform(text);
    let score = sigmoid(dot(&model.weights, &x) + model.bias);
    let label = if score >= model.threshold {
        RelevanceLabel::Esg
    } else {
        RelevanceLabel::NonEsg
    };
    (label, score)
}

pub fn evaluate_relevance<S: AsRef<str>>(
    model: &LinearRelevanceModel,
    test: &[(S, RelevanceLabel)],
) -> Result<MetricsReport, MetricsError> {
    let pairs: Vec<(RelevanceLabel, RelevanceLabel)> = test
        .iter()
        .map(|(t, gold)| (*gold, predict_relevance(model, t.as_ref()).0))
        .collect();
    compute_metrics(&pairs)
}

impl LinearRelevanceModel {
    pub fn validate(&self) -> Result<(), RelevanceError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(RelevanceError::FormatVersion(self.format_version));
        }
        if self.weights.len() != self.featurizer.vocabulary_size() {
            return Err(RelevanceError::Malformed(format!(
                "{} weights for a vocabulary of {}",
                self.weights.len(),
                self.featurizer.vocabulary_size()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        io::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let model: Self = io::read_json(path)?;
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use RelevanceLabel::*;

    fn separable(n: usize) -> Vec<(String, RelevanceLabel)> {
        (0..n)
            .map(|i| {
                if i % 3 == 0 {
                    (format!("The fund applies esg screening rule {i}."), Esg)
                } else {
                    (format!("Shares are priced daily at net asset value {i}."), NonEsg)
                }
            })
            .collect()
    }

    #[test]
    fn separable_by_one_token() {
        let train = separable(60);
        let model = train_relevance(&train, &RelevanceHyper::default(), 7).unwrap();
        let holdout: Vec<(String, RelevanceLabel)> = vec![
            ("Our esg policy excludes issuers.".into(), Esg),
            ("Dividends are paid quarterly.".into(), NonEsg),
            ("ESG screening applies.".into(), Esg),
            ("The net asset value is computed daily.".into(), NonEsg),
        ];
        let r = evaluate_relevance(&model, &holdout).unwrap();
        assert_eq!(r.accuracy, 1.0);
        let (label, _) = predict_relevance(&model, "ESG screening applies.");
        assert_eq!(label, Esg);
    }

    #[test]
    fn single_class_and_too_small() {
        let one: Vec<_> = (0..30).map(|i| (format!("esg {i}"), Esg)).collect();
        assert_eq!(
            train_relevance(&one, &RelevanceHyper::default(), 0).unwrap_err(),
            RelevanceError::SingleClassTrainingSet
        );
        let small = separable(10);
        assert_eq!(
            train_relevance(&small, &RelevanceHyper::default(), 0).unwrap_err(),
            RelevanceError::TooFewExamples(10)
        );
    }

    #[test]
    fn out_of_vocabulary_scores_bias_only() {
        let model = train_relevance(&separable(40), &RelevanceHyper::default(), 1).unwrap();
        let (_, score) = predict_relevance(&model, "zzz qqq");
        assert_eq!(score, sigmoid(model.bias));
        for s in ["", "esg", "value", "esg value esg"] {
            let (_, p) = predict_relevance(&model, s);
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn bit_identical_under_fixed_seed() {
        let data = separable(45);
        let a = train_relevance(&data, &RelevanceHyper::default(), 3).unwrap();
        let b = train_relevance(&data, &RelevanceHyper::default(), 3).unwrap();
        let bits = |m: &LinearRelevanceModel| m.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.bias.to_bits(), b.bias.to_bits());
    }

    #[test]
    fn beats_majority_baseline_on_training_data() {
        let data = separable(60);
        let model = train_relevance(&data, &RelevanceHyper::default(), 5).unwrap();
        let r = evaluate_relevance(&model, &data).unwrap();
        assert!(r.accuracy >= 40.0 / 60.0);
    }

    #[test]
    fn artifact_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("relevance.json");
        let model = train_relevance(&separable(30), &RelevanceHyper::default(), 2).unwrap();
        model.save(&p).unwrap();
        let loaded = LinearRelevanceModel::load(&p).unwrap();
        assert_eq!(loaded, model);
        let json = std::fs::read_to_string(&p).unwrap();
        assert!(json.contains("\"format_version\": 1"));

        let mut bad = model.clone();
        bad.weights.pop();
        assert!(bad.validate().is_err());
        bad = model;
        bad.format_version = 9;
        assert_eq!(bad.validate(), Err(RelevanceError::FormatVersion(9)));
    }
}
