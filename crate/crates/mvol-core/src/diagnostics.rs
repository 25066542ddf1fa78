//! Checks tying generated data and trained networks back to the data
//! model: dominant-class coefficient mass, the ID/OOD mass-separation
//! property, feature-coverage matrices, calibration (equal-coverage)
//! checks, and the error-bound verdicts built on them.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::datagen::{Dataset, FeatureDictionary, FeatureId, Sample};
use crate::network::Network;

/// The class with the largest total coefficient mass over its two features,
/// and that mass. Ties resolve to the lowest class index; a sample with no
/// features reports class 0 with mass 0.
pub fn dominant_class(sample: &Sample) -> (usize, f64) {
    let mut mass: BTreeMap<usize, f64> = BTreeMap::new();
    for pl in &sample.placements {
        *mass.entry(pl.feature.class).or_insert(0.0) += pl.coeff_sum();
    }
    let mut best = (0usize, 0.0f64);
    for (&class, &m) in &mass {
        if m > best.1 {
            best = (class, m);
        }
    }
    best
}

/// Report of the mass-separation check between an ID set and an OOD set:
/// every ID sample should carry strictly more dominant-class mass than any
/// OOD sample.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeparationReport {
    pub min_id_mass: f64,
    pub max_ood_mass: f64,
    /// `min_id_mass - max_ood_mass`; positive iff the property holds.
    pub margin: f64,
    /// ID samples at or below the OOD maximum plus OOD samples at or above
    /// the ID minimum.
    pub violations: usize,
    pub holds: bool,
    /// Set when one side was empty, which makes the check vacuous.
    pub vacuous: bool,
}

pub fn check_separation(id_set: &Dataset, ood_set: &Dataset) -> SeparationReport {
    let id_mass: Vec<f64> = id_set.samples.iter().map(|s| dominant_class(s).1).collect();
    let ood_mass: Vec<f64> = ood_set.samples.iter().map(|s| dominant_class(s).1).collect();
    if id_mass.is_empty() || ood_mass.is_empty() {
        return SeparationReport {
            min_id_mass: f64::NAN,
            max_ood_mass: f64::NAN,
            margin: f64::NAN,
            violations: 0,
            holds: true,
            vacuous: true,
        };
    }
    let min_id = id_mass.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ood = ood_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violations = id_mass.iter().filter(|&&z| z <= max_ood).count()
        + ood_mass.iter().filter(|&&z| z >= min_id).count();
    SeparationReport {
        min_id_mass: min_id,
        max_ood_mass: max_ood,
        margin: min_id - max_ood,
        violations,
        holds: min_id > max_ood,
        vacuous: false,
    }
}

/// Per-feature alignment of a network with the dictionary.
///
/// `total[(i, l)]` sums the positive parts of the filter/feature inner
/// products over class `i`'s filters; `peak` keeps the largest single
/// filter's alignment. A feature counts as learned when its total clears
/// the threshold.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureCoverage {
    pub k: usize,
    /// Flat over `2 * class + view`.
    pub total: Vec<f64>,
    pub peak: Vec<f64>,
    pub learned: Vec<bool>,
    pub threshold: f64,
}

impl FeatureCoverage {
    pub fn total_of(&self, f: FeatureId) -> f64 {
        self.total[f.flat()]
    }

    pub fn peak_of(&self, f: FeatureId) -> f64 {
        self.peak[f.flat()]
    }

    pub fn is_learned(&self, f: FeatureId) -> bool {
        self.learned[f.flat()]
    }

    pub fn learned_per_class(&self, class: usize) -> usize {
        self.learned[2 * class..2 * class + 2].iter().filter(|&&b| b).count()
    }

    pub fn learned_count(&self) -> usize {
        self.learned.iter().filter(|&&b| b).count()
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Compute the coverage matrices. With `threshold = None` the learned
/// cutoff adapts to the network: half the median of the entries that clear
/// a floor of `10 * sigma0 * sqrt(d)`, never below the floor itself (an
/// untrained network keeps alignments at the initialization scale, a
/// learned feature sits at order one).
pub fn feature_coverage(
    net: &Network,
    dict: &FeatureDictionary,
    threshold: Option<f64>,
) -> FeatureCoverage {
    assert_eq!(net.d(), dict.d(), "network and dictionary dimension mismatch");
    assert_eq!(net.k(), dict.k(), "network and dictionary class count mismatch");
    let k = net.k();
    let mut total = Vec::with_capacity(2 * k);
    let mut peak = Vec::with_capacity(2 * k);
    for flat in 0..2 * k {
        let f = FeatureId::from_flat(flat);
        let v = dict.vector(f);
        let mut sum = 0.0f64;
        let mut max = 0.0f64;
        for r in 0..net.m() {
            let a = crate::datagen::dot(net.filter(f.class, r), v).max(0.0);
            sum += a;
            max = max.max(a);
        }
        total.push(sum);
        peak.push(max);
    }
    let floor = 10.0 * net.sigma0 * libm::sqrt(net.d() as f64);
    let threshold = threshold.unwrap_or_else(|| {
        let mut cleared: Vec<f64> = total.iter().copied().filter(|&t| t >= floor).collect();
        if cleared.is_empty() {
            floor
        } else {
            cleared.sort_unstable_by(f64::total_cmp);
            (0.5 * median(&cleared)).max(floor)
        }
    });
    let learned = total.iter().map(|&t| t >= threshold).collect();
    FeatureCoverage { k, total, peak, learned, threshold }
}

/// Which features the calibration check compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CoverageMode {
    /// All 2k features.
    AllFeatures,
    /// Only features the coverage threshold marks as learned.
    LearnedOnly,
}

/// Result of the equal-coverage calibration check: over the relevant
/// feature set, the spread of total alignments relative to the largest one.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationReport {
    pub mode: CoverageMode,
    pub tol: f64,
    pub passed: bool,
    /// Relative spread `(max - min) / max` over the considered entries.
    pub max_rel_dev: f64,
    /// The entries realizing the spread, as flat feature indices.
    pub worst_pair: Option<(usize, usize)>,
    pub considered: usize,
    /// Fewer than two comparable entries, or all of them zero.
    pub degenerate: bool,
}

/// Check whether the considered coverage entries agree to within `tol`
/// relative deviation.
pub fn check_assumption(
    net: &Network,
    dict: &FeatureDictionary,
    mode: CoverageMode,
    tol: f64,
) -> CalibrationReport {
    let cov = feature_coverage(net, dict, None);
    check_assumption_with(&cov, mode, tol)
}

/// Same check against an already computed coverage.
pub fn check_assumption_with(
    cov: &FeatureCoverage,
    mode: CoverageMode,
    tol: f64,
) -> CalibrationReport {
    let entries: Vec<usize> = (0..2 * cov.k)
        .filter(|&flat| match mode {
            CoverageMode::AllFeatures => true,
            CoverageMode::LearnedOnly => cov.learned[flat],
        })
        .collect();
    if entries.len() < 2 {
        return CalibrationReport {
            mode,
            tol,
            passed: true,
            max_rel_dev: 0.0,
            worst_pair: None,
            considered: entries.len(),
            degenerate: true,
        };
    }
    let mut lo = entries[0];
    let mut hi = entries[0];
    for &e in &entries[1..] {
        if cov.total[e] < cov.total[lo] {
            lo = e;
        }
        if cov.total[e] > cov.total[hi] {
            hi = e;
        }
    }
    if cov.total[hi] <= 0.0 {
        // Everything zero: equal by definition.
        return CalibrationReport {
            mode,
            tol,
            passed: true,
            max_rel_dev: 0.0,
            worst_pair: None,
            considered: entries.len(),
            degenerate: true,
        };
    }
    let rel = (cov.total[hi] - cov.total[lo]) / cov.total[hi];
    CalibrationReport {
        mode,
        tol,
        passed: rel <= tol,
        max_rel_dev: rel,
        worst_pair: Some((lo, hi)),
        considered: entries.len(),
        degenerate: false,
    }
}

/// Status of one error bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BoundStatus {
    Holds,
    Violated,
    /// The calibration precondition failed, so the bound is not asserted.
    NotAsserted,
}

/// FNR plus the calibration report of the model it came from.
#[derive(Clone, Debug)]
pub struct TheoremInput {
    pub fnr: f64,
    pub calibration: CalibrationReport,
}

/// Verdict over the two error bounds and the single-vs-distilled ordering.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TheoremVerdict {
    /// Bound for the single model: FNR <= (1 - mu)/2 + slack.
    pub single_bound: BoundStatus,
    pub single_limit: f64,
    pub single_fnr: f64,
    /// Bound for the distilled model: FNR <= slack.
    pub distill_bound: BoundStatus,
    pub distill_limit: f64,
    pub distill_fnr: f64,
    /// Whether the distilled model's FNR is at most the single model's.
    pub distill_not_worse: bool,
    pub mu: f64,
    pub slack: f64,
}

/// Evaluate the error bounds: the single model against `(1 - mu)/2 + slack`
/// and the distilled model against `slack` alone. Either bound is reported
/// as `NotAsserted` when its model failed the calibration check.
pub fn check_theorem_bounds(
    single: &TheoremInput,
    distill: &TheoremInput,
    mu: f64,
    slack: f64,
) -> TheoremVerdict {
    let single_limit = 0.5 * (1.0 - mu) + slack;
    let distill_limit = slack;
    let status = |input: &TheoremInput, limit: f64| -> BoundStatus {
        if !input.calibration.passed {
            BoundStatus::NotAsserted
        } else if input.fnr <= limit {
            BoundStatus::Holds
        } else {
            BoundStatus::Violated
        }
    };
    TheoremVerdict {
        single_bound: status(single, single_limit),
        single_limit,
        single_fnr: single.fnr,
        distill_bound: status(distill, distill_limit),
        distill_limit,
        distill_fnr: distill.fnr,
        distill_not_worse: distill.fnr <= single.fnr,
        mu,
        slack,
    }
}
