//! Desk-scale simulator for out-of-distribution detection on a multi-view
//! synthetic data model.
//!
//! The crate provides, in dependency order:
//!
//! - [`rng`] — named, seeded RNG substreams so every draw in an experiment
//!   descends deterministically from one root seed.
//! - [`datagen`] — synthetic in-distribution (multi-view / single-view),
//!   out-of-distribution, and wild-mixed datasets over an orthonormal
//!   feature dictionary, with full per-sample provenance.
//! - [`network`] — the two-layer per-class scorer with a smoothed ReLU
//!   activation, plus manual gradients.
//! - [`objectives`] — cross-entropy, outlier-exposure (OE), and MVOL
//!   losses, their closed-form logit gradients, SGD training, and the
//!   distillation regimes.
//! - [`detection`] — MaxLogit / MSP / energy scores and the threshold
//!   detector.
//! - [`metrics`] — FPR at fixed TPR, AUROC, FNR, and ID accuracy.
//! - [`diagnostics`] — oracle checks tying generated data and trained
//!   networks back to the data model: dominant-class coefficient mass,
//!   feature-coverage matrices, calibration checks, and error-bound
//!   verdicts.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats, and the
//! experiment harness live in the companion `mvol-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod datagen;
pub mod detection;
pub mod diagnostics;
pub mod metrics;
pub mod network;
pub mod objectives;
pub mod rng;

/// Integer power by repeated multiplication. Exponents here are tiny
/// (the activation exponent q), so this beats pulling in a float `pow`.
#[inline]
pub(crate) fn powi(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::powi;

    #[test]
    fn powi_small_exponents() {
        assert_eq!(powi(2.0, 0), 1.0);
        assert_eq!(powi(2.0, 3), 8.0);
        assert_eq!(powi(-1.5, 2), 2.25);
    }
}
