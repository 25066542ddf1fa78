//! The two-layer per-class scorer and its manual gradients.
//!
//! Class `i` scores an input `X` by summing a smoothed ReLU of
//! `<w_{i,r}, x_p>` over its `m` filters and all `P` patches. There is no
//! weight sharing across classes, so the gradient of `F_i` touches only
//! class `i`'s filters.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::datagen::{dot, PatchMatrix};
use crate::powi;

/// Smoothed-ReLU parameters: polynomial exponent `q` and threshold
/// `lambda` where the activation turns linear.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActivationParams {
    pub q: u32,
    pub lambda: f64,
}

impl ActivationParams {
    pub fn new(q: u32, lambda: f64) -> Self {
        assert!(q >= 2, "activation exponent must be >= 2");
        assert!(lambda > 0.0 && lambda <= 1.0, "lambda must lie in (0, 1]");
        Self { q, lambda }
    }

    /// Default for `k` classes: q = 3, lambda = 1/polylog(k).
    pub fn for_classes(k: usize) -> Self {
        Self::new(3, 1.0 / crate::datagen::polylog(k))
    }
}

/// Piecewise activation: zero for z <= 0, `z^q / (q lambda^{q-1})` on
/// `[0, lambda]`, and `z - (1 - 1/q) lambda` beyond. Continuous and once
/// differentiable everywhere.
pub fn smoothed_relu(z: f64, act: ActivationParams) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= act.lambda {
        z - (1.0 - 1.0 / act.q as f64) * act.lambda
    } else {
        powi(z, act.q) / (act.q as f64 * powi(act.lambda, act.q - 1))
    }
}

/// Derivative of [`smoothed_relu`]: `(z/lambda)^{q-1}` on the polynomial
/// piece, clamped to {0, 1} outside it.
pub fn smoothed_relu_grad(z: f64, act: ActivationParams) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= act.lambda {
        1.0
    } else {
        powi(z / act.lambda, act.q - 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    k: usize,
    m: usize,
    d: usize,
    pub act: ActivationParams,
    pub sigma0: f64,
    /// Flat weights, index `(i * m + r) * d + c`.
    w: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShapeMismatch {
    pub expected_d: usize,
    pub got_d: usize,
}

impl fmt::Display for ShapeMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input patch dimension {} does not match network dimension {}", self.got_d, self.expected_d)
    }
}

impl core::error::Error for ShapeMismatch {}

impl Network {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn from_weights(k: usize, m: usize, d: usize, act: ActivationParams, sigma0: f64, w: Vec<f64>) -> Self {
        assert_eq!(w.len(), k * m * d, "weight vector length mismatch");
        Self { k, m, d, act, sigma0, w }
    }

    pub fn filter(&self, class: usize, r: usize) -> &[f64] {
        let base = (class * self.m + r) * self.d;
        &self.w[base..base + self.d]
    }

    pub fn zeros(k: usize, m: usize, d: usize, act: ActivationParams) -> Self {
        Self { k, m, d, act, sigma0: 0.0, w: vec![0.0; k * m * d] }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|x| x.is_finite())
    }

    fn check_shape(&self, x: &PatchMatrix) -> Result<(), ShapeMismatch> {
        if x.d() != self.d {
            Err(ShapeMismatch { expected_d: self.d, got_d: x.d() })
        } else {
            Ok(())
        }
    }

    /// Logits: `F_i(X) = sum_r sum_p smoothed_relu(<w_{i,r}, x_p>)`.
    pub fn forward(&self, x: &PatchMatrix) -> Result<Vec<f64>, ShapeMismatch> {
        self.check_shape(x)?;
        let mut logits = vec![0.0; self.k];
        for i in 0..self.k {
            let mut acc = 0.0;
            for r in 0..self.m {
                let w = self.filter(i, r);
                for p in 0..x.patches() {
                    acc += smoothed_relu(dot(w, x.patch(p)), self.act);
                }
            }
            logits[i] = acc;
        }
        Ok(logits)
    }

    /// Per-class weight gradients:
    /// `dF_i/dw_{i,r} = sum_p smoothed_relu_grad(<w_{i,r}, x_p>) x_p`,
    /// returned flat in the same layout as [`Network::weights`]. Gradients
    /// of `F_i` with respect to other classes' filters are identically
    /// zero, so only the diagonal blocks are materialized.
    pub fn forward_grad(&self, x: &PatchMatrix) -> Result<Vec<f64>, ShapeMismatch> {
        self.check_shape(x)?;
        let mut grad = vec![0.0; self.w.len()];
        for i in 0..self.k {
            for r in 0..self.m {
                let w = self.filter(i, r);
                let base = (i * self.m + r) * self.d;
                let g = &mut grad[base..base + self.d];
                for p in 0..x.patches() {
                    let col = x.patch(p);
                    let slope = smoothed_relu_grad(dot(w, col), self.act);
                    if slope != 0.0 {
                        for (gc, xc) in g.iter_mut().zip(col) {
                            *gc += slope * xc;
                        }
                    }
                }
            }
        }
        Ok(grad)
    }
}

/// Fresh network with i.i.d. `N(0, sigma0^2)` weights.
pub fn init_network<R: Rng>(
    k: usize,
    m: usize,
    d: usize,
    act: ActivationParams,
    sigma0: f64,
    rng: &mut R,
) -> Network {
    assert!(sigma0 > 0.0, "initialization scale must be positive");
    let w = (0..k * m * d)
        .map(|_| sigma0 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Network { k, m, d, act, sigma0, w }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn act(q: u32, lambda: f64) -> ActivationParams {
        ActivationParams::new(q, lambda)
    }

    #[test]
    fn smoothed_relu_branches() {
        let a = act(3, 0.25);
        assert_eq!(smoothed_relu(-0.5, a), 0.0);
        // Boundary: lambda^q / (q lambda^{q-1}) = lambda / q.
        let at_lambda = smoothed_relu(0.25, a);
        assert!((at_lambda - 0.25 / 3.0).abs() < 1e-15);
        let linear = 0.25 - (1.0 - 1.0 / 3.0) * 0.25;
        assert!((at_lambda - linear).abs() < 1e-15);
        // Middle branch worked value: 0.1^3 / (3 * 0.25^2).
        let mid = smoothed_relu(0.1, a);
        assert!((mid - 0.001 / (3.0 * 0.0625)).abs() < 1e-15);
    }

    #[test]
    fn smoothed_relu_grad_branches() {
        let a = act(2, 0.5);
        assert_eq!(smoothed_relu_grad(0.7, a), 1.0);
        assert_eq!(smoothed_relu_grad(-0.1, a), 0.0);
        assert!((smoothed_relu_grad(0.25, a) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn smoothed_relu_grad_matches_finite_difference() {
        let a = act(3, 0.3);
        let h = 1e-6;
        let mut z = -0.5;
        while z <= 1.0 {
            let fd = (smoothed_relu(z + h, a) - smoothed_relu(z - h, a)) / (2.0 * h);
            let an = smoothed_relu_grad(z, a);
            assert!((fd - an).abs() < 1e-6, "z={z}: fd={fd} analytic={an}");
            z += 0.0173; // step avoids landing exactly on the kinks
        }
    }

    #[test]
    fn smoothed_relu_monotone_and_below_relu() {
        let a = act(4, 0.6);
        let mut prev = 0.0;
        let mut z = -1.0;
        while z <= 2.0 {
            let v = smoothed_relu(z, a);
            assert!(v >= prev - 1e-15);
            assert!(v <= z.max(0.0) + 1e-15);
            prev = v;
            z += 0.01;
        }
    }

    #[test]
    fn forward_linear_branch_single_patch() {
        // One filter equal to the feature vector; input c*v with c >= lambda.
        let a = act(3, 0.25);
        let d = 4;
        let v = [0.5, 0.5, 0.5, 0.5];
        let c = 1.2;
        let x = PatchMatrix::from_vec(d, 1, v.iter().map(|e| e * c).collect());
        let net = Network::from_weights(1, 1, d, a, 0.1, v.to_vec());
        let logits = net.forward(&x).unwrap();
        assert!((logits[0] - (c - (1.0 - 1.0 / 3.0) * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn forward_zero_weights_zero_logits() {
        let net = Network::zeros(2, 3, 5, act(3, 0.2));
        let x = PatchMatrix::from_vec(5, 2, vec![0.3; 10]);
        assert_eq!(net.forward(&x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_matches_naive_loop() {
        let a = act(3, 0.2);
        let mut rng = substream(42, "net");
        let net = init_network(2, 3, 6, a, 0.5, &mut rng);
        let x = PatchMatrix::from_vec(6, 4, (0..24).map(|i| ((i as f64) * 0.37).sin()).collect());
        let logits = net.forward(&x).unwrap();
        for i in 0..2 {
            let mut want = 0.0;
            for r in 0..3 {
                for p in 0..4 {
                    let mut pre = 0.0;
                    for c in 0..6 {
                        pre += net.filter(i, r)[c] * x.patch(p)[c];
                    }
                    want += smoothed_relu(pre, a);
                }
            }
            assert!((logits[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_shape_mismatch() {
        let net = Network::zeros(2, 2, 5, act(3, 0.2));
        let x = PatchMatrix::zeros(4, 3);
        assert!(net.forward(&x).is_err());
        assert!(net.forward_grad(&x).is_err());
    }

    #[test]
    fn init_rejects_zero_scale() {
        let mut rng = substream(1, "init");
        let result = std::panic::catch_unwind(core::panic::AssertUnwindSafe(|| {
            init_network(2, 2, 4, act(3, 0.2), 0.0, &mut rng)
        }));
        assert!(result.is_err());
    }

    #[test]
    fn init_variance_matches_sigma0() {
        let mut rng = substream(2, "init");
        let sigma0 = 0.3;
        let net = init_network(5, 10, 200, act(3, 0.2), sigma0, &mut rng); // 10^4 coords
        let n = net.weights().len() as f64;
        let mean: f64 = net.weights().iter().sum::<f64>() / n;
        let var: f64 = net.weights().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!((var / (sigma0 * sigma0) - 1.0).abs() < 0.05, "variance ratio {}", var / (sigma0 * sigma0));
    }

    #[test]
    fn init_distinct_seeds_differ() {
        let a = init_network(2, 2, 4, act(3, 0.2), 0.1, &mut substream(3, "init"));
        let b = init_network(2, 2, 4, act(3, 0.2), 0.1, &mut substream(4, "init"));
        assert_ne!(a.weights(), b.weights());
    }

    #[test]
    fn forward_grad_zero_weights_is_zero() {
        let net = Network::zeros(2, 2, 4, act(3, 0.2));
        let x = PatchMatrix::from_vec(4, 2, vec![0.5; 8]);
        let g = net.forward_grad(&x).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_grad_matches_finite_difference() {
        let a = act(3, 0.3);
        let mut rng = substream(5, "net");
        let (k, m, d, patches) = (2, 3, 5, 3);
        let net = init_network(k, m, d, a, 0.4, &mut rng);
        let x = PatchMatrix::from_vec(
            d,
            patches,
            (0..d * patches).map(|i| ((i as f64) * 0.61).cos() * 0.8).collect(),
        );
        let analytic = net.forward_grad(&x).unwrap();
        let h = 1e-5;
        for i in 0..k {
            for idx in 0..m * d {
                let flat = i * m * d + idx;
                let mut plus = net.clone();
                plus.weights_mut()[flat] += h;
                let mut minus = net.clone();
                minus.weights_mut()[flat] -= h;
                let fd = (plus.forward(&x).unwrap()[i] - minus.forward(&x).unwrap()[i]) / (2.0 * h);
                let an = analytic[flat];
                let denom = an.abs().max(fd.abs()).max(1e-6);
                assert!(
                    ((an - fd) / denom).abs() < 1e-5 || (an - fd).abs() < 1e-8,
                    "coord {flat}: analytic {an} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn forward_scaling_down_never_increases_logits() {
        let mut rng = substream(6, "net");
        let net = init_network(3, 2, 6, act(3, 0.25), 0.5, &mut rng);
        let x = PatchMatrix::from_vec(6, 3, (0..18).map(|i| ((i * 7 % 5) as f64) * 0.2 - 0.3).collect());
        let full = net.forward(&x).unwrap();
        for &c in &[1.0, 0.9, 0.5, 0.1] {
            let scaled = net.forward(&x.scaled(c)).unwrap();
            for (s, f) in scaled.iter().zip(&full) {
                assert!(s <= &(f + 1e-12));
            }
        }
    }
}
