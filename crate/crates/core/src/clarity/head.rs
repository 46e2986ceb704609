use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::ClarityError;
use crate::label::{ClarityLabel, ClassLabel};
use crate::optim::Adam;

pub const NUM_CLASSES: usize = 3;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|l| (l - max).exp());
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Index of the largest entry; ties go to the earliest label in canonical
/// order.
pub fn argmax_canonical(values: &[f64; NUM_CLASSES]) -> ClarityLabel {
    let mut best = 0;
    for i in 1..NUM_CLASSES {
        if values[i] > values[best] {
            best = i;
        }
    }
    ClarityLabel::ALL[best]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadOptions {
    pub l2: f64,
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for HeadOptions {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            iterations: 500,
            learning_rate: 0.05,
        }
    }
}

/// Multinomial logistic regression: `logits = W z + b`, rows in canonical
/// label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearHead {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: Array2::zeros((NUM_CLASSES, dim)),
            bias: Array1::zeros(NUM_CLASSES),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn logits(&self, z: ArrayView1<'_, f64>) -> [f64; NUM_CLASSES] {
        let l = self.weights.dot(&z) + &self.bias;
        [l[0], l[1], l[2]]
    }

    pub fn probs(&self, z: ArrayView1<'_, f64>) -> [f64; NUM_CLASSES] {
        softmax(&self.logits(z))
    }

    /// Full-batch Adam on mean cross-entropy plus `l2/2 |W|^2`, starting
    /// from zero. Deterministic.
    pub fn fit(features: &[Array1<f64>], labels: &[ClarityLabel], opts: &HeadOptions) -> Result<Self, ClarityError> {
        require_all_classes(labels)?;
        let dim = features.first().map_or(0, Array1::len);
        let n = features.len() as f64;
        let mut head = Self::zeros(dim);
        let mut opt_w = Adam::new(NUM_CLASSES * dim, opts.learning_rate);
        let mut opt_b = Adam::new(NUM_CLASSES, opts.learning_rate);
        for _ in 0..opts.iterations {
            let mut gw = &head.weights * opts.l2;
            let mut gb = Array1::zeros(NUM_CLASSES);
            for (z, y) in features.iter().zip(labels) {
                let mut p = head.probs(z.view());
                p[y.index()] -= 1.0;
                for c in 0..NUM_CLASSES {
                    let r = p[c] / n;
                    gw.row_mut(c).scaled_add(r, z);
                    gb[c] += r;
                }
            }
            opt_w.step(
                head.weights.as_slice_mut().expect("layout"),
                gw.as_slice().expect("layout"),
            );
            opt_b.step(
                head.bias.as_slice_mut().expect("layout"),
                gb.as_slice().expect("layout"),
            );
        }
        Ok(head)
    }
}

pub(crate) fn require_all_classes(labels: &[ClarityLabel]) -> Result<(), ClarityError> {
    for l in ClarityLabel::ALL {
        if !labels.contains(l) {
            return Err(ClarityError::MissingClass(*l));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Three Gaussian clusters, centers 10 apart per axis, sigma 0.5.
    fn clusters(n_per: usize, seed: u64) -> (Vec<Array1<f64>>, Vec<ClarityLabel>, Vec<Array1<f64>>) {
        let dim = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let centers: Vec<Array1<f64>> = (0..3)
            .map(|c| Array1::from_shape_fn(dim, |j| if j % 3 == c { 10.0 } else { 0.0 }))
            .collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..n_per {
                xs.push(center + &Array1::from_shape_fn(dim, |_| noise.sample(&mut rng)));
                ys.push(ClarityLabel::ALL[c]);
            }
        }
        (xs, ys, centers)
    }

    fn nearest_centroid(x: &Array1<f64>, centroids: &[Array1<f64>]) -> ClarityLabel {
        let d: Vec<f64> = centroids.iter().map(|c| (x - c).mapv(|v| v * v).sum()).collect();
        let best = (0..3).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        ClarityLabel::ALL[best]
    }

    #[test]
    fn separable_clusters_match_nearest_centroid() {
        let (xs, ys, _) = clusters(30, 1);
        let head = LinearHead::fit(&xs, &ys, &HeadOptions::default()).unwrap();
        // centroids estimated from the training points, as the oracle would
        let centroids: Vec<Array1<f64>> = (0..3)
            .map(|c| {
                let pts: Vec<&Array1<f64>> = xs
                    .iter()
                    .zip(&ys)
                    .filter(|(_, y)| y.index() == c)
                    .map(|(x, _)| x)
                    .collect();
                pts.iter().fold(Array1::zeros(8), |acc, x| acc + *x) / pts.len() as f64
            })
            .collect();
        let (test_x, test_y, _) = clusters(50, 2);
        for (x, y) in test_x.iter().zip(&test_y) {
            let pred = argmax_canonical(&head.probs(x.view()));
            assert_eq!(pred, *y);
            assert_eq!(pred, nearest_centroid(x, &centroids));
        }
    }

    #[test]
    fn missing_class() {
        let xs = vec![Array1::zeros(2), Array1::ones(2)];
        let ys = vec![ClarityLabel::Specific, ClarityLabel::Generic];
        assert!(matches!(
            LinearHead::fit(&xs, &ys, &HeadOptions::default()),
            Err(ClarityError::MissingClass(ClarityLabel::Ambiguous))
        ));
    }

    #[test]
    fn ties_break_in_canonical_order() {
        assert_eq!(argmax_canonical(&[1.0, 1.0, 1.0]), ClarityLabel::Specific);
        assert_eq!(argmax_canonical(&[0.0, 2.0, 2.0]), ClarityLabel::Ambiguous);
        assert_eq!(argmax_canonical(&[0.0, 1.0, 2.0]), ClarityLabel::Generic);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 999.0, -1000.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
    }
}
