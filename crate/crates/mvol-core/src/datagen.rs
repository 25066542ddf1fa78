//! Synthetic dataset generation over an orthonormal feature dictionary.
//!
//! Every class owns two unit feature vectors. In-distribution samples carry
//! both of them (multi-view) or essentially one (single-view) at high
//! coefficient mass, plus a sparse set of other classes' features at low
//! mass ("minor" features). Out-of-distribution samples carry only minor
//! features. All coefficients, patch assignments, and feature choices are
//! recorded on the sample so downstream checks can work from provenance
//! instead of inference.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::{substream, substream_indexed};

/// Upper end of the main-feature coefficient interval.
pub const Z_MAX_MAIN: f64 = 2.0;
/// Lower end of the minor-feature coefficient interval.
pub const Z_MIN_MINOR: f64 = 0.2;
/// The secondary-main interval is `[rho, RHO_MULT * rho]`.
pub const RHO_MULT: f64 = 2.0;

/// The concrete stand-in for "polylog(k)" used by every default that needs
/// one: `(log2(k + 2))^2`. Fixing one function keeps runs reproducible.
pub fn polylog(k: usize) -> f64 {
    let l = libm::log2(k as f64 + 2.0);
    l * l
}

/// Closed interval for coefficient sums.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }
}

/// Identifies one dictionary feature: `(class, view)` with `view` in {0, 1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId {
    pub class: usize,
    pub view: usize,
}

impl FeatureId {
    pub const fn new(class: usize, view: usize) -> Self {
        Self { class, view }
    }

    /// Flat index into the dictionary: `2 * class + view`.
    pub fn flat(&self) -> usize {
        2 * self.class + self.view
    }

    pub fn from_flat(i: usize) -> Self {
        Self { class: i / 2, view: i % 2 }
    }
}

/// The 2k orthonormal feature vectors.
#[derive(Clone, Debug)]
pub struct FeatureDictionary {
    k: usize,
    d: usize,
    /// Row-major, row `FeatureId::flat`, each row a unit d-vector.
    vectors: Vec<f64>,
}

impl FeatureDictionary {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn num_features(&self) -> usize {
        2 * self.k
    }

    pub fn vector(&self, f: FeatureId) -> &[f64] {
        let i = f.flat();
        &self.vectors[i * self.d..(i + 1) * self.d]
    }

    pub fn vector_flat(&self, flat: usize) -> &[f64] {
        &self.vectors[flat * self.d..(flat + 1) * self.d]
    }

    /// Iterate features in flat order.
    pub fn feature_ids(&self) -> impl Iterator<Item = FeatureId> {
        (0..2 * self.k).map(FeatureId::from_flat)
    }
}

/// Generation parameters. Field names follow the data model's symbols where
/// they have one; intervals are stored explicitly so individual roles can be
/// overridden without touching the others.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenConfig {
    /// Class count.
    pub k: usize,
    /// Patch dimension.
    pub d: usize,
    /// Patches per sample.
    pub patches: usize,
    /// Width of the downstream per-class network.
    pub m: usize,
    /// Feature sparsity: each candidate minor feature is included with
    /// probability `sparsity / k`.
    pub sparsity: f64,
    /// Disjoint patches carrying each used feature.
    pub patches_per_feature: usize,
    /// Std of the Gaussian noise on feature patches.
    pub sigma_p: f64,
    /// Cap of the uniform per-feature contamination on every patch.
    pub gamma: f64,
    /// Multi-view fraction of ID data.
    pub mu: f64,
    /// Scale of the secondary main feature on single-view samples.
    pub rho: f64,
    /// Scale of minor features on single-view samples.
    pub gamma_sv: f64,
    /// Coefficient-sum intervals by role.
    pub mv_main: Interval,
    pub mv_minor: Interval,
    pub ood_feat: Interval,
    pub sv_main: Interval,
    pub sv_second: Interval,
    pub sv_minor: Interval,
    /// Std of the Gaussian noise on patches that carry no feature.
    pub offpatch_noise_scale: f64,
    /// When true, an OOD draw with no features is kept as pure noise
    /// instead of being redrawn.
    pub allow_pure_noise_ood: bool,
}

impl GenConfig {
    /// Defaults for a given shape. Scale parameters follow the data model's
    /// prescriptions with [`polylog`] filled in:
    /// `sigma_p = 1/(sqrt(d) * polylog(k))`, `gamma = 1/k^1.5`,
    /// `rho = k^-0.01`, `gamma_sv = 1/polylog(k)`, off-patch noise
    /// `gamma * k / sqrt(d)`.
    pub fn for_shape(k: usize, d: usize, patches: usize, patches_per_feature: usize) -> Self {
        let plg = polylog(k);
        let kf = k as f64;
        let sqrt_d = libm::sqrt(d as f64);
        let gamma = 1.0 / libm::pow(kf, 1.5);
        let rho = libm::pow(kf, -0.01);
        let gamma_sv = 1.0 / plg;
        Self {
            k,
            d,
            patches,
            m: 10,
            sparsity: 1.5f64.min(libm::pow(kf, 0.2)),
            patches_per_feature,
            sigma_p: 1.0 / (sqrt_d * plg),
            gamma,
            mu: 0.8,
            rho,
            gamma_sv,
            mv_main: Interval::new(1.0, Z_MAX_MAIN),
            mv_minor: Interval::new(Z_MIN_MINOR, 0.4),
            ood_feat: Interval::new(Z_MIN_MINOR, 0.4),
            sv_main: Interval::new(1.0, Z_MAX_MAIN),
            sv_second: Interval::new(rho, RHO_MULT * rho),
            sv_minor: Interval::new(gamma_sv / 2.0, gamma_sv),
            offpatch_noise_scale: gamma * kf / sqrt_d,
            allow_pure_noise_ood: false,
        }
    }

    /// The default desk-scale shape: k=10, d=64, P=16, C_p=2.
    pub fn desk_default() -> Self {
        Self::for_shape(10, 64, 16, 2)
    }

    /// Two classes, four features, fixed weights: mains carry exactly 1,
    /// minors exactly 0.1, and single-view samples drop the unpicked main
    /// entirely. This is the sharpest setting for watching which features a
    /// network picks up.
    pub fn two_class_fixed_weights() -> Self {
        let mut cfg = Self::for_shape(2, 16, 8, 2);
        cfg.m = 4;
        cfg.sparsity = 1.0;
        cfg.gamma = 1e-3;
        cfg.mv_main = Interval::new(1.0, 1.0);
        cfg.mv_minor = Interval::new(0.1, 0.1);
        cfg.ood_feat = Interval::new(0.1, 0.1);
        cfg.sv_main = Interval::new(1.0, 1.0);
        cfg.rho = 0.0;
        cfg.sv_second = Interval::new(0.0, 0.0);
        cfg.gamma_sv = 0.1;
        cfg.sv_minor = Interval::new(0.1, 0.1);
        cfg.offpatch_noise_scale = cfg.sigma_p;
        cfg
    }

    /// Expected number of minor features on an ID sample.
    pub fn expected_minor_count(&self) -> f64 {
        2.0 * (self.k as f64 - 1.0) * self.sparsity / self.k as f64
    }

    pub fn validate(&self) -> Result<(), GenConfigError> {
        if self.k == 0 {
            return Err(GenConfigError::BadField("k must be positive"));
        }
        if self.d < 2 * self.k {
            return Err(GenConfigError::DimensionTooSmall { k: self.k, d: self.d });
        }
        if self.m == 0 {
            return Err(GenConfigError::BadField("m must be positive"));
        }
        let s_max = libm::pow(self.k as f64, 0.2);
        if !(0.0..=s_max).contains(&self.sparsity) {
            return Err(GenConfigError::SparsityOutOfRange { s: self.sparsity, max: s_max });
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(GenConfigError::BadField("mu must lie in [0, 1]"));
        }
        if self.patches_per_feature == 0 {
            return Err(GenConfigError::BadField("patches_per_feature must be positive"));
        }
        let needed = (2.0 + self.expected_minor_count()) * self.patches_per_feature as f64;
        if needed > self.patches as f64 {
            return Err(GenConfigError::PatchBudgetTooTight {
                expected_needed: needed,
                patches: self.patches,
            });
        }
        for (name, iv) in [
            ("mv_main", self.mv_main),
            ("mv_minor", self.mv_minor),
            ("ood_feat", self.ood_feat),
            ("sv_main", self.sv_main),
            ("sv_second", self.sv_second),
            ("sv_minor", self.sv_minor),
        ] {
            if !(iv.lo <= iv.hi) || iv.lo < 0.0 {
                return Err(GenConfigError::BadInterval { name });
            }
        }
        if self.mv_minor.hi > 0.4 || self.ood_feat.hi > 0.4 {
            return Err(GenConfigError::BadField("minor/OOD intervals must stay within [0, 0.4]"));
        }
        for (name, v) in [
            ("sigma_p", self.sigma_p),
            ("gamma", self.gamma),
            ("rho", self.rho),
            ("gamma_sv", self.gamma_sv),
            ("offpatch_noise_scale", self.offpatch_noise_scale),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                let _ = name;
                return Err(GenConfigError::BadField("scale parameters must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GenConfigError {
    DimensionTooSmall { k: usize, d: usize },
    SparsityOutOfRange { s: f64, max: f64 },
    PatchBudgetTooTight { expected_needed: f64, patches: usize },
    BadInterval { name: &'static str },
    BadField(&'static str),
}

impl fmt::Display for GenConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionTooSmall { k, d } => {
                write!(f, "patch dimension {d} too small for 2k = {} features", 2 * k)
            }
            Self::SparsityOutOfRange { s, max } => {
                write!(f, "sparsity {s} outside [0, k^0.2 = {max:.4}]")
            }
            Self::PatchBudgetTooTight { expected_needed, patches } => write!(
                f,
                "expected patch demand {expected_needed:.1} exceeds available {patches}"
            ),
            Self::BadInterval { name } => write!(f, "interval {name} is empty or negative"),
            Self::BadField(msg) => write!(f, "{msg}"),
        }
    }
}

impl core::error::Error for GenConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub enum DatagenError {
    Config(GenConfigError),
    /// The drawn feature set needs more disjoint patches than the sample has.
    PatchBudgetExceeded { needed: usize, available: usize },
}

impl fmt::Display for DatagenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "invalid generation config: {e}"),
            Self::PatchBudgetExceeded { needed, available } => {
                write!(f, "feature draw needs {needed} patches, only {available} available")
            }
        }
    }
}

impl core::error::Error for DatagenError {}

impl From<GenConfigError> for DatagenError {
    fn from(e: GenConfigError) -> Self {
        Self::Config(e)
    }
}

/// Dense d x P matrix, column-major (one column per patch).
#[derive(Clone, Debug, PartialEq)]
pub struct PatchMatrix {
    d: usize,
    patches: usize,
    data: Vec<f64>,
}

impl PatchMatrix {
    pub fn zeros(d: usize, patches: usize) -> Self {
        Self { d, patches, data: vec![0.0; d * patches] }
    }

    pub fn from_vec(d: usize, patches: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), d * patches, "patch matrix data length mismatch");
        Self { d, patches, data }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn patches(&self) -> usize {
        self.patches
    }

    pub fn patch(&self, p: usize) -> &[f64] {
        &self.data[p * self.d..(p + 1) * self.d]
    }

    pub fn patch_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p * self.d..(p + 1) * self.d]
    }

    /// Column-major backing storage.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { d: self.d, patches: self.patches, data: self.data.iter().map(|x| x * c).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SampleKind {
    MultiViewId,
    SingleViewId,
    Ood,
}

/// Where one feature was written: its patches and the coefficient on each.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub feature: FeatureId,
    pub patches: Vec<usize>,
    pub coeffs: Vec<f64>,
}

impl Placement {
    pub fn coeff_sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

/// One generated sample with full provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: PatchMatrix,
    pub kind: SampleKind,
    /// Class index; absent exactly for OOD samples.
    pub label: Option<usize>,
    /// The dominant view of a single-view sample; absent otherwise.
    pub picked_view: Option<usize>,
    /// One entry per used feature, in draw order (mains first, then minors
    /// ascending by flat feature index).
    pub placements: Vec<Placement>,
}

impl Sample {
    pub fn uses(&self, f: FeatureId) -> bool {
        self.placements.iter().any(|pl| pl.feature == f)
    }

    pub fn coeff_sum(&self, f: FeatureId) -> Option<f64> {
        self.placements.iter().find(|pl| pl.feature == f).map(Placement::coeff_sum)
    }

    /// Total coefficient mass on both features of `class`.
    pub fn class_mass(&self, class: usize) -> f64 {
        self.placements
            .iter()
            .filter(|pl| pl.feature.class == class)
            .map(Placement::coeff_sum)
            .sum()
    }

    /// All patch indices that carry a feature.
    pub fn feature_patches(&self) -> Vec<usize> {
        let mut v: Vec<usize> =
            self.placements.iter().flat_map(|pl| pl.patches.iter().copied()).collect();
        v.sort_unstable();
        v
    }
}

/// An ordered, reproducible collection of samples.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub config: GenConfig,
    pub seed: u64,
    /// ID fraction mixed into a wild set; 0 for every other kind of set.
    pub alpha: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Build the 2k orthonormal feature vectors as a random rotation of an
/// orthonormal basis subset (Gram-Schmidt on Gaussian draws, with one
/// re-orthogonalization pass to push cross terms to machine precision).
pub fn make_feature_dictionary<R: Rng>(
    k: usize,
    d: usize,
    rng: &mut R,
) -> Result<FeatureDictionary, DatagenError> {
    if d < 2 * k {
        return Err(GenConfigError::DimensionTooSmall { k, d }.into());
    }
    let n = 2 * k;
    let mut vectors = vec![0.0f64; n * d];
    let mut i = 0;
    while i < n {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for _pass in 0..2 {
            for j in 0..i {
                let u = &vectors[j * d..(j + 1) * d];
                let proj = dot(&v, u);
                for (vc, uc) in v.iter_mut().zip(u) {
                    *vc -= proj * uc;
                }
            }
        }
        let norm = libm::sqrt(dot(&v, &v));
        if norm < 1e-8 {
            continue; // degenerate draw; redraw this vector
        }
        for (slot, vc) in vectors[i * d..(i + 1) * d].iter_mut().zip(&v) {
            *slot = vc / norm;
        }
        i += 1;
    }
    Ok(FeatureDictionary { k, d, vectors })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draw `count` distinct patch indices from `[0, patches)` by partial
/// Fisher-Yates.
fn draw_patches<R: Rng>(patches: usize, count: usize, rng: &mut R) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..patches).collect();
    for i in 0..count {
        let j = rng.gen_range(i..patches);
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}

/// Split `total` over `parts` nonnegative coefficients by a uniform-simplex
/// draw (sorted-uniform gaps).
fn split_total<R: Rng>(total: f64, parts: usize, rng: &mut R) -> Vec<f64> {
    if parts == 1 {
        return vec![total];
    }
    let mut cuts: Vec<f64> = (0..parts - 1).map(|_| rng.gen_range(0.0..=1.0)).collect();
    cuts.sort_unstable_by(f64::total_cmp);
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0.0;
    for c in cuts {
        out.push((c - prev) * total);
        prev = c;
    }
    out.push((1.0 - prev) * total);
    out
}

/// Write the placements and the noise into a fresh patch matrix.
fn render<R: Rng>(
    dict: &FeatureDictionary,
    cfg: &GenConfig,
    placements: &[Placement],
    rng: &mut R,
) -> PatchMatrix {
    let mut x = PatchMatrix::zeros(cfg.d, cfg.patches);
    let mut on_feature = vec![false; cfg.patches];
    for pl in placements {
        let v = dict.vector(pl.feature);
        for (&p, &z) in pl.patches.iter().zip(&pl.coeffs) {
            on_feature[p] = true;
            let col = x.patch_mut(p);
            for (xc, vc) in col.iter_mut().zip(v) {
                *xc += z * vc;
            }
        }
    }
    // Every patch gets feature noise from the whole dictionary plus
    // Gaussian noise whose scale depends on whether it carries a feature.
    for p in 0..cfg.patches {
        let sigma = if on_feature[p] { cfg.sigma_p } else { cfg.offpatch_noise_scale };
        for flat in 0..dict.num_features() {
            let a = rng.gen_range(0.0..=cfg.gamma);
            let v = dict.vector_flat(flat);
            let col = x.patch_mut(p);
            for (xc, vc) in col.iter_mut().zip(v) {
                *xc += a * vc;
            }
        }
        let col = x.patch_mut(p);
        for xc in col.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *xc += sigma * g;
        }
    }
    x
}

/// Assign patches and coefficients for the given `(feature, interval)` roles.
fn place<R: Rng>(
    cfg: &GenConfig,
    roles: &[(FeatureId, Interval)],
    rng: &mut R,
) -> Result<Vec<Placement>, DatagenError> {
    let needed = roles.len() * cfg.patches_per_feature;
    if needed > cfg.patches {
        return Err(DatagenError::PatchBudgetExceeded { needed, available: cfg.patches });
    }
    let slots = draw_patches(cfg.patches, needed, rng);
    let totals: Vec<f64> = roles.iter().map(|(_, iv)| iv.sample(rng)).collect();
    let mut placements = Vec::with_capacity(roles.len());
    for (i, ((feature, _), total)) in roles.iter().zip(totals).enumerate() {
        let patches =
            slots[i * cfg.patches_per_feature..(i + 1) * cfg.patches_per_feature].to_vec();
        let coeffs = split_total(total, cfg.patches_per_feature, rng);
        placements.push(Placement { feature: *feature, patches, coeffs });
    }
    Ok(placements)
}

/// Independently include each candidate feature with probability `s/k`.
fn draw_minor_features<R: Rng>(
    cfg: &GenConfig,
    skip_class: Option<usize>,
    rng: &mut R,
) -> Vec<FeatureId> {
    let p = (cfg.sparsity / cfg.k as f64).clamp(0.0, 1.0);
    let mut out = Vec::new();
    for flat in 0..2 * cfg.k {
        let f = FeatureId::from_flat(flat);
        if Some(f.class) == skip_class {
            continue;
        }
        if rng.gen_bool(p) {
            out.push(f);
        }
    }
    out
}

/// Draw one multi-view ID sample of class `y`: both main features at mass
/// in `mv_main`, each candidate minor feature with probability `s/k` at
/// mass in `mv_minor`.
pub fn sample_multiview<R: Rng>(
    dict: &FeatureDictionary,
    cfg: &GenConfig,
    y: usize,
    rng: &mut R,
) -> Result<Sample, DatagenError> {
    assert!(y < cfg.k, "label out of range");
    let minors = draw_minor_features(cfg, Some(y), rng);
    let mut roles = vec![
        (FeatureId::new(y, 0), cfg.mv_main),
        (FeatureId::new(y, 1), cfg.mv_main),
    ];
    roles.extend(minors.into_iter().map(|f| (f, cfg.mv_minor)));
    let placements = place(cfg, &roles, rng)?;
    let x = render(dict, cfg, &placements, rng);
    Ok(Sample { x, kind: SampleKind::MultiViewId, label: Some(y), picked_view: None, placements })
}

/// Draw one single-view ID sample of class `y`: a uniformly picked main view
/// at mass in `sv_main`, the other main at mass in `sv_second`, minors at
/// mass in `sv_minor`.
pub fn sample_singleview<R: Rng>(
    dict: &FeatureDictionary,
    cfg: &GenConfig,
    y: usize,
    rng: &mut R,
) -> Result<Sample, DatagenError> {
    assert!(y < cfg.k, "label out of range");
    let picked: usize = rng.gen_range(0..2);
    let minors = draw_minor_features(cfg, Some(y), rng);
    let mut roles = vec![
        (FeatureId::new(y, picked), cfg.sv_main),
        (FeatureId::new(y, 1 - picked), cfg.sv_second),
    ];
    roles.extend(minors.into_iter().map(|f| (f, cfg.sv_minor)));
    let placements = place(cfg, &roles, rng)?;
    let x = render(dict, cfg, &placements, rng);
    Ok(Sample {
        x,
        kind: SampleKind::SingleViewId,
        label: Some(y),
        picked_view: Some(picked),
        placements,
    })
}

/// Draw one OOD sample: each dictionary feature independently with
/// probability `s/k`, at minor mass in `ood_feat`. Feature draws that come
/// up empty or exceed the patch budget are redrawn (up to 100 attempts)
/// unless `allow_pure_noise_ood` keeps empty draws.
pub fn sample_ood<R: Rng>(
    dict: &FeatureDictionary,
    cfg: &GenConfig,
    rng: &mut R,
) -> Sample {
    for _attempt in 0..100 {
        let feats = draw_minor_features(cfg, None, rng);
        if feats.is_empty() && !cfg.allow_pure_noise_ood {
            continue;
        }
        let roles: Vec<(FeatureId, Interval)> =
            feats.into_iter().map(|f| (f, cfg.ood_feat)).collect();
        match place(cfg, &roles, rng) {
            Ok(placements) => {
                let x = render(dict, cfg, &placements, rng);
                return Sample { x, kind: SampleKind::Ood, label: None, picked_view: None, placements };
            }
            Err(_) => continue,
        }
    }
    // Unreachable for any config that passes validation; fall back to pure noise.
    let x = render(dict, cfg, &[], rng);
    Sample { x, kind: SampleKind::Ood, label: None, picked_view: None, placements: Vec::new() }
}

/// Draw one ID sample with a fresh label: multi-view with probability `mu`,
/// single-view otherwise. Patch-budget overflows are redrawn from the same
/// stream so the result stays deterministic.
fn sample_id<R: Rng>(dict: &FeatureDictionary, cfg: &GenConfig, rng: &mut R) -> Sample {
    let y = rng.gen_range(0..cfg.k);
    let multi = rng.gen_bool(cfg.mu);
    for _attempt in 0..100 {
        let res = if multi {
            sample_multiview(dict, cfg, y, rng)
        } else {
            sample_singleview(dict, cfg, y, rng)
        };
        if let Ok(s) = res {
            return s;
        }
    }
    unreachable!("patch budget misconfigured despite validation");
}

/// Generate `n` ID samples. Each sample draws from its own substream of
/// `(seed, index)`, so generation order and thread count cannot change the
/// result.
pub fn make_id_dataset(
    dict: &FeatureDictionary,
    cfg: &GenConfig,
    n: usize,
    seed: u64,
) -> Result<Dataset, DatagenError> {
    cfg.validate()?;
    let samples = (0..n)
        .map(|i| {
            let mut rng = substream_indexed(seed, "id-sample", i as u64);
            sample_id(dict, cfg, &mut rng)
        })
        .collect();
    Ok(Dataset { samples, config: cfg.clone(), seed, alpha: 0.0 })
}

/// Generate a wild auxiliary set of `m` samples: `floor(alpha * m)` ID
/// samples (labels kept in provenance only) and the rest OOD, shuffled
/// deterministically.
pub fn make_wild_dataset(
    dict: &FeatureDictionary,
    cfg: &GenConfig,
    m: usize,
    alpha: f64,
    seed: u64,
) -> Result<Dataset, DatagenError> {
    cfg.validate()?;
    assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1]");
    let n_id = libm::floor(alpha * m as f64) as usize;
    let mut samples: Vec<Sample> = (0..m)
        .map(|i| {
            let mut rng = substream_indexed(seed, "wild-sample", i as u64);
            if i < n_id {
                sample_id(dict, cfg, &mut rng)
            } else {
                sample_ood(dict, cfg, &mut rng)
            }
        })
        .collect();
    let mut shuffle_rng = substream(seed, "wild-shuffle");
    for i in (1..samples.len()).rev() {
        let j = shuffle_rng.gen_range(0..=i);
        samples.swap(i, j);
    }
    Ok(Dataset { samples, config: cfg.clone(), seed, alpha })
}
