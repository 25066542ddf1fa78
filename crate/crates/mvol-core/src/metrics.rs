//! Detection and classification metrics.
//!
//! FPR at a fixed TPR uses the detector's own threshold rule; AUROC is the
//! Mann-Whitney statistic computed by midranks (ties count one half); the
//! FNR surrogate thresholds at the highest observed OOD score so that every
//! outlier would be caught.

use alloc::vec::Vec;
use core::fmt;

use crate::datagen::Dataset;
use crate::detection::{choose_tau, detect, DetectError, ScoreKind, ScoredSet};
use crate::network::{Network, ShapeMismatch};

/// Evaluation summary for one scoring function on one ID/OOD pair.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub score_name: ScoreKind,
    /// FPR measured at the calibrated threshold.
    pub fpr_at_tpr: f64,
    pub tpr_target: f64,
    pub auroc: f64,
    pub tau: f64,
    /// ID fraction at or below the highest OOD score (plus margin).
    pub fnr: f64,
    pub ood_margin: f64,
    /// Absent when the evaluation has no labeled ID samples (score import).
    pub id_accuracy: Option<f64>,
    pub n_id: usize,
    pub n_ood: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetricError {
    MissingSplit(&'static str),
    Detect(DetectError),
    Shape(ShapeMismatch),
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingSplit(which) => write!(f, "no {which} scores in the set"),
            Self::Detect(e) => write!(f, "{e}"),
            Self::Shape(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for MetricError {}

impl From<DetectError> for MetricError {
    fn from(e: DetectError) -> Self {
        Self::Detect(e)
    }
}

impl From<ShapeMismatch> for MetricError {
    fn from(e: ShapeMismatch) -> Self {
        Self::Shape(e)
    }
}

fn split(scored: &ScoredSet) -> Result<(Vec<f64>, Vec<f64>), MetricError> {
    scored.validate()?;
    let id = scored.id_scores();
    let ood = scored.ood_scores();
    if id.is_empty() {
        return Err(MetricError::MissingSplit("id"));
    }
    if ood.is_empty() {
        return Err(MetricError::MissingSplit("ood"));
    }
    Ok((id, ood))
}

/// Calibrate the threshold on the ID scores and report the fraction of OOD
/// scores the detector passes as ID. Returns `(fpr, tau)`.
pub fn fpr_at_tpr(scored: &ScoredSet, tpr_target: f64) -> Result<(f64, f64), MetricError> {
    let (id, ood) = split(scored)?;
    let tau = choose_tau(&id, tpr_target)?;
    let fp = ood.iter().filter(|&&s| detect(s, tau) == 1).count();
    Ok((fp as f64 / ood.len() as f64, tau))
}

/// Probability that a random ID score exceeds a random OOD score, ties at
/// one half, computed via midranks in O(n log n).
pub fn auroc(scored: &ScoredSet) -> Result<f64, MetricError> {
    let (id, ood) = split(scored)?;
    let n_id = id.len();
    let n_ood = ood.len();
    let mut all: Vec<(f64, bool)> = id
        .iter()
        .map(|&s| (s, true))
        .chain(ood.iter().map(|&s| (s, false)))
        .collect();
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // Midranks over tie groups; accumulate the rank sum of the ID split.
    let mut rank_sum_id = 0.0f64;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let midrank = (i + j + 2) as f64 / 2.0; // ranks are 1-based
        for item in &all[i..=j] {
            if item.1 {
                rank_sum_id += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_id - (n_id * (n_id + 1)) as f64 / 2.0;
    Ok(u / (n_id as f64 * n_ood as f64))
}

/// The error-bound surrogate: set the threshold at the highest OOD score
/// plus `ood_margin` (so every outlier is caught) and report the fraction
/// of ID scores that fail to clear it.
pub fn fnr_at_ood_sup(scored: &ScoredSet, ood_margin: f64) -> Result<f64, MetricError> {
    let (id, ood) = split(scored)?;
    let tau = ood.iter().copied().fold(f64::NEG_INFINITY, f64::max) + ood_margin;
    let fn_count = id.iter().filter(|&&s| detect(s, tau) == 0).count();
    Ok(fn_count as f64 / id.len() as f64)
}

/// Fraction of labeled samples whose argmax logit matches the label; argmax
/// ties resolve to the lowest class index. Panics if the dataset carries no
/// labeled samples.
pub fn id_accuracy(net: &Network, dataset: &Dataset) -> Result<f64, MetricError> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for s in &dataset.samples {
        let Some(y) = s.label else { continue };
        let logits = net.forward(&s.x)?;
        total += 1;
        if crate::argmax_lowest(&logits) == y {
            correct += 1;
        }
    }
    assert!(total > 0, "id_accuracy needs at least one labeled sample");
    Ok(correct as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{make_feature_dictionary, make_id_dataset, GenConfig};
    use crate::detection::ScoreKind;
    use crate::network::{ActivationParams, Network};
    use crate::rng::substream;
    use alloc::vec;
    use alloc::vec::Vec;
    use rand::Rng;

    fn scored(id: &[f64], ood: &[f64]) -> ScoredSet {
        let mut s = ScoredSet::new(ScoreKind::MaxLogit);
        for &v in id {
            s.push(v, true);
        }
        for &v in ood {
            s.push(v, false);
        }
        s
    }

    #[test]
    fn fpr_worked_example() {
        let id: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let set = scored(&id, &[0.5, 50.5, 200.0]);
        let (fpr, tau) = fpr_at_tpr(&set, 0.95).unwrap();
        assert_eq!(tau, 5.0);
        assert!((fpr - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fpr_perfect_separation_and_identical_splits() {
        let set = scored(&[5.0, 6.0, 7.0], &[1.0, 2.0]);
        let (fpr, _) = fpr_at_tpr(&set, 0.95).unwrap();
        assert_eq!(fpr, 0.0);

        let vals: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let set = scored(&vals, &vals);
        let (fpr, _) = fpr_at_tpr(&set, 0.95).unwrap();
        assert!((fpr - 0.95).abs() <= 1.0 / 200.0 + 1e-12, "fpr {fpr}");
    }

    #[test]
    fn fpr_moves_against_tau_as_target_rises() {
        // Raising the TPR target pushes the threshold down (tau is antitone
        // in the target), which can only let more OOD scores through.
        let mut rng = substream(5, "fpr");
        let id: Vec<f64> = (0..150).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let ood: Vec<f64> = (0..150).map(|_| rng.gen_range(-2.0..1.0)).collect();
        let set = scored(&id, &ood);
        let mut prev_fpr = 0.0;
        let mut prev_tau = f64::INFINITY;
        for t in [0.5, 0.7, 0.9, 0.95, 0.99] {
            let (fpr, tau) = fpr_at_tpr(&set, t).unwrap();
            assert!(tau <= prev_tau + 1e-12, "tau not antitone at target {t}");
            assert!(fpr >= prev_fpr - 1e-12, "fpr dropped as the target rose at {t}");
            prev_fpr = fpr;
            prev_tau = tau;
        }
    }

    #[test]
    fn auroc_small_cases() {
        assert_eq!(auroc(&scored(&[2.0, 3.0], &[1.0])).unwrap(), 1.0);
        assert_eq!(auroc(&scored(&[1.0, 3.0], &[2.0])).unwrap(), 0.5);
    }

    #[test]
    fn auroc_matches_pairwise_brute_force() {
        let mut rng = substream(6, "auroc");
        for trial in 0..200 {
            let n_id = 1 + rng.gen_range(0..40usize);
            let n_ood = 1 + rng.gen_range(0..40usize);
            let gen = |rng: &mut rand_chacha::ChaCha12Rng, n: usize| -> Vec<f64> {
                (0..n)
                    .map(|_| {
                        if trial % 4 == 0 {
                            rng.gen_range(0..5) as f64 // heavy ties
                        } else {
                            rng.gen_range(-1.0..1.0)
                        }
                    })
                    .collect()
            };
            let id = gen(&mut rng, n_id);
            let ood = gen(&mut rng, n_ood);
            let fast = auroc(&scored(&id, &ood)).unwrap();
            let mut acc = 0.0;
            for &a in &id {
                for &b in &ood {
                    acc += if a > b {
                        1.0
                    } else if a == b {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
            let brute = acc / (n_id * n_ood) as f64;
            assert!((fast - brute).abs() < 1e-12, "trial {trial}: {fast} vs {brute}");
        }
    }

    #[test]
    fn auroc_symmetry_and_monotone_invariance() {
        let mut rng = substream(7, "auroc2");
        let id: Vec<f64> = (0..80).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ood: Vec<f64> = (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = auroc(&scored(&id, &ood)).unwrap();
        let swapped = auroc(&scored(&ood, &id)).unwrap();
        assert!((a + swapped - 1.0).abs() < 1e-12);

        let warp = |v: &[f64]| -> Vec<f64> { v.iter().map(|&x| libm::exp(2.0 * x) + x).collect() };
        let b = auroc(&scored(&warp(&id), &warp(&ood))).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn fnr_surrogate_cases() {
        // Perfect separation with zero margin.
        assert_eq!(fnr_at_ood_sup(&scored(&[2.0, 3.0], &[1.0]), 0.0).unwrap(), 0.0);
        // Half the ID mass sits at or below the top OOD score.
        let v = fnr_at_ood_sup(&scored(&[1.0, 2.0, 3.0, 4.0], &[2.5]), 0.0).unwrap();
        assert_eq!(v, 0.5);
        // Monotone in the margin.
        let set = scored(&[1.0, 2.0, 3.0, 4.0], &[0.5]);
        let mut prev = 0.0;
        for margin in [0.0, 0.6, 1.6, 2.6, 4.0] {
            let f = fnr_at_ood_sup(&set, margin).unwrap();
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn missing_splits_are_rejected() {
        let empty_ood = scored(&[1.0], &[]);
        assert!(matches!(auroc(&empty_ood), Err(MetricError::MissingSplit("ood"))));
        let empty_id = scored(&[], &[1.0]);
        assert!(matches!(fpr_at_tpr(&empty_id, 0.95), Err(MetricError::MissingSplit("id"))));
        assert!(matches!(
            fnr_at_ood_sup(&empty_ood, 0.0),
            Err(MetricError::MissingSplit("ood"))
        ));
    }

    #[test]
    fn zero_network_accuracy_equals_class_zero_share() {
        // All logits tie at zero, so every prediction is class 0.
        let mut cfg = GenConfig::for_shape(2, 8, 6, 1);
        cfg.m = 2;
        let dict = make_feature_dictionary(cfg.k, cfg.d, &mut substream(8, "dict")).unwrap();
        let ds = make_id_dataset(&dict, &cfg, 400, 8).unwrap();
        let net = Network::zeros(cfg.k, cfg.m, cfg.d, ActivationParams::for_classes(cfg.k));
        let acc = id_accuracy(&net, &ds).unwrap();
        let class0 =
            ds.samples.iter().filter(|s| s.label == Some(0)).count() as f64 / ds.len() as f64;
        assert_eq!(acc, class0);
        assert!((acc - 0.5).abs() < 0.08, "labels should be near balanced, got {acc}");
    }

    #[test]
    fn accuracy_matches_naive_loop() {
        let mut cfg = GenConfig::for_shape(3, 8, 6, 1);
        cfg.m = 2;
        let dict = make_feature_dictionary(cfg.k, cfg.d, &mut substream(9, "dict")).unwrap();
        let ds = make_id_dataset(&dict, &cfg, 100, 9).unwrap();
        let net = crate::network::init_network(
            cfg.k,
            cfg.m,
            cfg.d,
            ActivationParams::for_classes(cfg.k),
            0.3,
            &mut substream(9, "init"),
        );
        let fast = id_accuracy(&net, &ds).unwrap();
        let mut correct = 0usize;
        for s in &ds.samples {
            let logits = net.forward(&s.x).unwrap();
            let mut best = 0;
            for i in 1..logits.len() {
                if logits[i] > logits[best] {
                    best = i;
                }
            }
            if best == s.label.unwrap() {
                correct += 1;
            }
        }
        assert_eq!(fast, correct as f64 / ds.len() as f64);
    }

    #[test]
    fn eval_report_serializes_when_enabled() {
        let report = EvalReport {
            score_name: ScoreKind::MaxLogit,
            fpr_at_tpr: 0.1,
            tpr_target: 0.95,
            auroc: 0.97,
            tau: 1.5,
            fnr: 0.02,
            ood_margin: 0.0,
            id_accuracy: Some(0.99),
            n_id: 10,
            n_ood: 10,
        };
        assert!(report.fpr_at_tpr >= 0.0 && report.fpr_at_tpr <= 1.0);
        assert!(report.auroc >= 0.0 && report.auroc <= 1.0);
        let _ = vec![report];
    }
}
