//! Adam with bias correction, for dense slices and lazily updated rows.

use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    fn update(&mut self, offset: usize, params: &mut [f64], grads: &[f64]) {
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[offset + i];
            let v = &mut self.v[offset + i];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }

    /// One step over the whole parameter vector.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.len(), "parameter length");
        assert_eq!(grads.len(), self.len(), "gradient length");
        self.t += 1;
        self.update(0, params, grads);
    }

    /// One step touching only the rows present in `rows` (row-major
    /// `params`, `width` columns). Untouched rows keep their moments.
    pub fn step_rows(&mut self, params: &mut [f64], width: usize, rows: &BTreeMap<usize, Vec<f64>>) {
        assert_eq!(params.len(), self.len(), "parameter length");
        self.t += 1;
        for (&r, g) in rows {
            let lo = r * width;
            self.update(lo, &mut params[lo..lo + width], g);
        }
    }
}
