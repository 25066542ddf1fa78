//! Training objectives and the SGD loop.
//!
//! Three objectives are supported:
//!
//! - `CeOnly`: plain cross-entropy on labeled ID data.
//! - `Oe`: cross-entropy plus the outlier-exposure confidence term that
//!   pushes the softmax on auxiliary outliers toward uniform.
//! - `Mvol`: cross-entropy plus a soft-label term on outliers whose
//!   per-class targets are the current softmax clipped at `epsilon`, so
//!   minor-feature responses are moderated instead of crushed.
//!
//! The outlier terms have closed-form logit gradients (`q_i - 1/k` for OE,
//! `q_i * sum(p) - p_i` for MVOL); the update chains them through the
//! network's manual gradient. The clipped soft labels are taken from the
//! pre-step network and receive no gradient.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::datagen::{Dataset, PatchMatrix, Sample};
use crate::network::{smoothed_relu, smoothed_relu_grad, Network, ShapeMismatch};
use crate::rng::substream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Objective {
    CeOnly,
    Oe,
    Mvol,
}

impl Objective {
    pub fn uses_aux(self) -> bool {
        !matches!(self, Objective::CeOnly)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::CeOnly => "ce_only",
            Objective::Oe => "oe",
            Objective::Mvol => "mvol",
        })
    }
}

/// How the final model is produced.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Regime {
    /// One network trained from scratch.
    Single,
    /// `teachers` networks trained independently with cross-entropy, their
    /// averaged temperature softmax distilled into one student.
    EnsembleDistill { teachers: usize, temperature: f64, ce_weight: f64 },
    /// The one-teacher special case of ensemble distillation.
    SelfDistill { temperature: f64, ce_weight: f64 },
}

/// Nesterov momentum / weight decay used when `TrainPlan::momentum` is set.
pub const MOMENTUM: f64 = 0.9;
pub const WEIGHT_DECAY: f64 = 5e-4;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainPlan {
    pub objective: Objective,
    /// Weight of the outlier loss term.
    pub beta: f64,
    /// MVOL soft-label clip threshold.
    pub epsilon: f64,
    /// Learning rate on the ID term.
    pub eta: f64,
    /// Learning rate on the outlier term (scaled by `beta`).
    pub eta_prime: f64,
    pub epochs: usize,
    pub batch_size_id: usize,
    pub batch_size_ood: usize,
    pub regime: Regime,
    pub seed: u64,
    /// Epochs at which the learning rates are multiplied by `lr_decay_factor`.
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    /// Adds Nesterov momentum 0.9 and weight decay 5e-4 to the update.
    pub momentum: bool,
    /// Stop after the first epoch whose training accuracy reaches this
    /// level. Used by the feature-lottery experiments, where a network is
    /// trained just until it fits most of the data.
    pub stop_at_train_acc: Option<f64>,
}

impl TrainPlan {
    /// The clip threshold used at desk scale: 0.1 up to ten classes,
    /// 0.02 beyond.
    pub fn epsilon_for_classes(k: usize) -> f64 {
        if k <= 10 {
            0.1
        } else {
            0.02
        }
    }

    /// Desk-scale schedule: 60 epochs at 0.05 with x0.1 decays at 30 and 45,
    /// batches 64/64, beta 0.5.
    pub fn desk_default(objective: Objective, k: usize, seed: u64) -> Self {
        Self {
            objective,
            beta: 0.5,
            epsilon: Self::epsilon_for_classes(k),
            eta: 0.05,
            eta_prime: 0.05,
            epochs: 60,
            batch_size_id: 64,
            batch_size_ood: 64,
            regime: Regime::Single,
            seed,
            lr_decay_epochs: vec![30, 45],
            lr_decay_factor: 0.1,
            momentum: false,
            stop_at_train_acc: None,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.beta < 0.0 {
            return Err(TrainError::BadPlan("beta must be >= 0"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(TrainError::BadPlan("epsilon must lie in (0, 1)"));
        }
        if self.eta <= 0.0 || self.eta_prime <= 0.0 {
            return Err(TrainError::BadPlan("learning rates must be positive"));
        }
        if self.batch_size_id == 0 || self.batch_size_ood == 0 {
            return Err(TrainError::BadPlan("batch sizes must be positive"));
        }
        if let Regime::EnsembleDistill { teachers, .. } = self.regime {
            if teachers == 0 {
                return Err(TrainError::BadPlan("ensemble needs at least one teacher"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainError {
    EmptyDataset(&'static str),
    BadPlan(&'static str),
    /// Loss or weights stopped being finite.
    NumericFailure { epoch: usize },
    /// Soft labels do not line up with the ID dataset.
    Misaligned { expected: usize, got: usize },
    Shape(ShapeMismatch),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyDataset(which) => write!(f, "empty dataset: {which}"),
            Self::BadPlan(msg) => write!(f, "invalid train plan: {msg}"),
            Self::NumericFailure { epoch } => write!(f, "non-finite values at epoch {epoch}"),
            Self::Misaligned { expected, got } => {
                write!(f, "soft labels cover {got} samples, dataset has {expected}")
            }
            Self::Shape(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<ShapeMismatch> for TrainError {
    fn from(e: ShapeMismatch) -> Self {
        Self::Shape(e)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// `-log softmax_y(logits)`, computed without forming the softmax.
pub fn cross_entropy_logits(logits: &[f64], y: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse: f64 = libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
    -(logits[y] - max - lse)
}

/// Clip a softmax vector at `epsilon`: the per-class soft target used by the
/// MVOL outlier term. The result is deliberately not renormalized, so its
/// sum is at most 1.
pub fn clip_soft_label(softmax: &[f64], epsilon: f64) -> Vec<f64> {
    softmax.iter().map(|&q| q.min(epsilon)).collect()
}

/// Evaluate the clipped soft label of `net` on one input.
pub fn mvol_soft_label(
    net: &Network,
    x: &PatchMatrix,
    epsilon: f64,
) -> Result<Vec<f64>, ShapeMismatch> {
    Ok(clip_soft_label(&softmax(&net.forward(x)?), epsilon))
}

/// Target against which a logit gradient is taken.
#[derive(Clone, Copy, Debug)]
pub enum LogitTarget<'a> {
    /// One-hot cross-entropy: gradient `q - e_y`.
    Class(usize),
    /// Uniform confidence target: gradient `q_i - 1/k`.
    Uniform,
    /// Self-clipped soft target `p = min(q, epsilon)`:
    /// gradient `q_i * sum(p) - p_i`.
    ClipSelf { epsilon: f64 },
    /// Fixed soft target (need not sum to 1): gradient `q_i * sum(p) - p_i`.
    Soft(&'a [f64]),
}

/// Closed-form gradient of the corresponding loss term with respect to the
/// logits.
pub fn loss_logit_grad(logits: &[f64], target: LogitTarget<'_>) -> Vec<f64> {
    let q = softmax(logits);
    match target {
        LogitTarget::Class(y) => {
            let mut g = q;
            g[y] -= 1.0;
            g
        }
        LogitTarget::Uniform => {
            let inv_k = 1.0 / logits.len() as f64;
            q.iter().map(|&qi| qi - inv_k).collect()
        }
        LogitTarget::ClipSelf { epsilon } => {
            let p = clip_soft_label(&q, epsilon);
            let p_sum: f64 = p.iter().sum();
            q.iter().zip(&p).map(|(&qi, &pi)| qi * p_sum - pi).collect()
        }
        LogitTarget::Soft(p) => {
            debug_assert_eq!(p.len(), logits.len());
            let p_sum: f64 = p.iter().sum();
            q.iter().zip(p).map(|(&qi, &pi)| qi * p_sum - pi).collect()
        }
    }
}

fn mean_ce(net: &Network, batch: &[&Sample]) -> Result<f64, TrainError> {
    let mut acc = 0.0;
    for s in batch {
        let y = s.label.expect("ID batch sample missing label");
        acc += cross_entropy_logits(&net.forward(&s.x)?, y);
    }
    Ok(acc / batch.len() as f64)
}

/// Mean outlier confidence term of OE: `sum_i -(1/k) log softmax_i`.
fn mean_oe_term(net: &Network, batch: &[&Sample]) -> Result<f64, TrainError> {
    let k_inv = 1.0 / net.k() as f64;
    let mut acc = 0.0;
    for s in batch {
        let logits = net.forward(&s.x)?;
        let q = softmax(&logits);
        acc += q.iter().map(|&qi| -k_inv * libm::log(qi)).sum::<f64>();
    }
    Ok(acc / batch.len() as f64)
}

/// Mean outlier term of MVOL with soft labels from `net_t`:
/// `sum_i -p_i log softmax_i`.
fn mean_mvol_term(
    net: &Network,
    net_t: &Network,
    batch: &[&Sample],
    epsilon: f64,
) -> Result<f64, TrainError> {
    let mut acc = 0.0;
    for s in batch {
        let p = mvol_soft_label(net_t, &s.x, epsilon)?;
        let q = softmax(&net.forward(&s.x)?);
        acc += p.iter().zip(&q).map(|(&pi, &qi)| -pi * libm::log(qi)).sum::<f64>();
    }
    Ok(acc / batch.len() as f64)
}

/// OE objective value: mean ID cross-entropy plus `beta` times the mean
/// uniform-confidence term on outliers.
pub fn oe_loss(
    net: &Network,
    batch_id: &[&Sample],
    batch_ood: &[&Sample],
    beta: f64,
) -> Result<f64, TrainError> {
    if batch_id.is_empty() || batch_ood.is_empty() {
        return Err(TrainError::EmptyDataset("oe_loss batch"));
    }
    Ok(mean_ce(net, batch_id)? + beta * mean_oe_term(net, batch_ood)?)
}

/// MVOL objective value. `net_t` supplies the clipped soft labels (the
/// current iterate, detached from the gradient).
pub fn mvol_loss(
    net: &Network,
    net_t: &Network,
    batch_id: &[&Sample],
    batch_ood: &[&Sample],
    beta: f64,
    epsilon: f64,
) -> Result<f64, TrainError> {
    if batch_id.is_empty() || batch_ood.is_empty() {
        return Err(TrainError::EmptyDataset("mvol_loss batch"));
    }
    Ok(mean_ce(net, batch_id)? + beta * mean_mvol_term(net, net_t, batch_ood, epsilon)?)
}

/// Scratch buffers reused across a training run.
struct Scratch {
    /// Pre-activations, indexed `(i * m + r) * patches + p`.
    pre: Vec<f64>,
    logits: Vec<f64>,
    grad: Vec<f64>,
    velocity: Vec<f64>,
}

impl Scratch {
    fn new(net: &Network, max_patches: usize) -> Self {
        Self {
            pre: vec![0.0; net.k() * net.m() * max_patches],
            logits: vec![0.0; net.k()],
            grad: vec![0.0; net.weights().len()],
            velocity: vec![0.0; net.weights().len()],
        }
    }
}

/// Forward pass that also records pre-activations for the backward pass.
fn forward_recording(
    net: &Network,
    x: &PatchMatrix,
    scratch: &mut Scratch,
) -> Result<(), ShapeMismatch> {
    let (k, m) = (net.k(), net.m());
    let patches = x.patches();
    if x.d() != net.d() {
        return Err(ShapeMismatch { expected_d: net.d(), got_d: x.d() });
    }
    for i in 0..k {
        let mut logit = 0.0;
        for r in 0..m {
            let w = net.filter(i, r);
            let base = (i * m + r) * patches;
            for p in 0..patches {
                let pre = crate::datagen::dot(w, x.patch(p));
                scratch.pre[base + p] = pre;
                logit += smoothed_relu(pre, net.act);
            }
        }
        scratch.logits[i] = logit;
    }
    Ok(())
}

/// Accumulate `scale * g_i * dF_i/dw` into the gradient buffer, reusing the
/// recorded pre-activations.
fn accumulate(net: &Network, x: &PatchMatrix, g: &[f64], scale: f64, scratch: &mut Scratch) {
    let (k, m, d) = (net.k(), net.m(), net.d());
    let patches = x.patches();
    for i in 0..k {
        let gi = g[i] * scale;
        if gi == 0.0 {
            continue;
        }
        for r in 0..m {
            let base = (i * m + r) * patches;
            let gbase = (i * m + r) * d;
            for p in 0..patches {
                let slope = smoothed_relu_grad(scratch.pre[base + p], net.act);
                if slope == 0.0 {
                    continue;
                }
                let c = gi * slope;
                let col = x.patch(p);
                let gw = &mut scratch.grad[gbase..gbase + d];
                for (gc, xc) in gw.iter_mut().zip(col) {
                    *gc += c * xc;
                }
            }
        }
    }
}

/// Per-sample ID logit gradient: one-hot cross-entropy, optionally blended
/// with a temperature-scaled soft target.
fn id_logit_grad(
    logits: &[f64],
    y: usize,
    soft: Option<(&[f64], f64, f64)>, // (target, temperature, ce_weight)
) -> Vec<f64> {
    match soft {
        None => loss_logit_grad(logits, LogitTarget::Class(y)),
        Some((p, temperature, ce_weight)) => {
            let hard = loss_logit_grad(logits, LogitTarget::Class(y));
            let scaled: Vec<f64> = logits.iter().map(|&z| z / temperature).collect();
            let soft_grad = loss_logit_grad(&scaled, LogitTarget::Soft(p));
            hard.iter()
                .zip(&soft_grad)
                .map(|(&h, &s)| ce_weight * h + (1.0 - ce_weight) * s / temperature)
                .collect()
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn step_with_rates(
    net: &mut Network,
    batch_id: &[(&Sample, Option<&[f64]>)],
    batch_ood: &[&Sample],
    plan: &TrainPlan,
    eta: f64,
    eta_prime: f64,
    distill: Option<(f64, f64)>, // (temperature, ce_weight)
    scratch: &mut Scratch,
) -> Result<(), TrainError> {
    scratch.grad.fill(0.0);

    if !batch_id.is_empty() {
        let scale = 1.0 / batch_id.len() as f64;
        for (s, soft) in batch_id {
            let y = s.label.expect("ID batch sample missing label");
            forward_recording(net, &s.x, scratch)?;
            let logits = scratch.logits.clone();
            let g = match (soft, distill) {
                (Some(p), Some((t, cw))) => id_logit_grad(&logits, y, Some((p, t, cw))),
                _ => id_logit_grad(&logits, y, None),
            };
            accumulate(net, &s.x, &g, scale, scratch);
        }
    }

    if plan.objective.uses_aux() && !batch_ood.is_empty() {
        // The outlier term enters with rate eta_prime * beta; with
        // eta_prime = eta this is exact gradient descent on the combined
        // beta-weighted objective. Soft labels come from the pre-step
        // weights, which are constant while the batch gradient accumulates.
        let scale = (eta_prime / eta) * plan.beta / batch_ood.len() as f64;
        for s in batch_ood {
            forward_recording(net, &s.x, scratch)?;
            let logits = scratch.logits.clone();
            let g = match plan.objective {
                Objective::Oe => loss_logit_grad(&logits, LogitTarget::Uniform),
                Objective::Mvol => {
                    loss_logit_grad(&logits, LogitTarget::ClipSelf { epsilon: plan.epsilon })
                }
                Objective::CeOnly => unreachable!(),
            };
            accumulate(net, &s.x, &g, scale, scratch);
        }
    }

    let w = net.weights_mut();
    if plan.momentum {
        for j in 0..w.len() {
            let g = scratch.grad[j] + WEIGHT_DECAY * w[j];
            scratch.velocity[j] = MOMENTUM * scratch.velocity[j] + g;
            w[j] -= eta * (g + MOMENTUM * scratch.velocity[j]);
        }
    } else {
        for (wc, gc) in w.iter_mut().zip(&scratch.grad) {
            *wc -= eta * gc;
        }
    }
    Ok(())
}

/// One minibatch update at the plan's base rates. The ID term moves with
/// `eta`, the outlier term with `eta_prime * beta / |batch_ood|`, both
/// chained through the network's manual gradient.
pub fn sgd_step(
    net: &mut Network,
    batch_id: &[&Sample],
    batch_ood: &[&Sample],
    plan: &TrainPlan,
) -> Result<(), TrainError> {
    plan.validate()?;
    let max_patches = batch_id
        .iter()
        .chain(batch_ood.iter())
        .map(|s| s.x.patches())
        .max()
        .unwrap_or(0);
    let mut scratch = Scratch::new(net, max_patches);
    let id: Vec<(&Sample, Option<&[f64]>)> = batch_id.iter().map(|s| (*s, None)).collect();
    step_with_rates(net, &id, batch_ood, plan, plan.eta, plan.eta_prime, None, &mut scratch)
}

/// Per-epoch training trace.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    pub epoch: usize,
    pub id_loss: f64,
    pub ood_loss: f64,
    pub train_acc: f64,
    pub maxlogit_mean_id: f64,
    pub maxlogit_mean_ood: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub net: Network,
    pub trace: Vec<TraceRow>,
}

/// Trace statistics are computed over a deterministic prefix of this size.
const TRACE_SUBSET: usize = 1000;

fn trace_row(
    net: &Network,
    id: &Dataset,
    aux: Option<&Dataset>,
    plan: &TrainPlan,
    epoch: usize,
) -> Result<TraceRow, TrainError> {
    let n = id.len().min(TRACE_SUBSET);
    let mut id_loss = 0.0;
    let mut correct = 0usize;
    let mut maxlogit_id = 0.0;
    for s in &id.samples[..n] {
        let logits = net.forward(&s.x)?;
        let y = s.label.expect("ID sample missing label");
        id_loss += cross_entropy_logits(&logits, y);
        if crate::argmax_lowest(&logits) == y {
            correct += 1;
        }
        maxlogit_id += logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    id_loss /= n as f64;
    let train_acc = correct as f64 / n as f64;
    maxlogit_id /= n as f64;

    let (ood_loss, maxlogit_ood) = match aux {
        Some(aux) if plan.objective.uses_aux() && !aux.is_empty() => {
            let m = aux.len().min(TRACE_SUBSET);
            let batch: Vec<&Sample> = aux.samples[..m].iter().collect();
            let loss = match plan.objective {
                Objective::Oe => mean_oe_term(net, &batch)?,
                Objective::Mvol => mean_mvol_term(net, net, &batch, plan.epsilon)?,
                Objective::CeOnly => unreachable!(),
            };
            let mut ml = 0.0;
            for s in &batch {
                let logits = net.forward(&s.x)?;
                ml += logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            (loss, ml / m as f64)
        }
        _ => (0.0, 0.0),
    };

    if !(id_loss.is_finite() && ood_loss.is_finite() && net.is_finite()) {
        return Err(TrainError::NumericFailure { epoch });
    }
    Ok(TraceRow {
        epoch,
        id_loss,
        ood_loss,
        train_acc,
        maxlogit_mean_id: maxlogit_id,
        maxlogit_mean_ood: maxlogit_ood,
    })
}

fn shuffled<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

fn train_impl(
    init: &Network,
    id: &Dataset,
    aux: Option<&Dataset>,
    soft: Option<&SoftLabelSet>,
    plan: &TrainPlan,
) -> Result<TrainOutcome, TrainError> {
    plan.validate()?;
    if id.is_empty() {
        return Err(TrainError::EmptyDataset("id"));
    }
    if plan.objective.uses_aux() && aux.map_or(true, Dataset::is_empty) {
        return Err(TrainError::EmptyDataset("aux"));
    }
    let distill = match soft {
        Some(set) => {
            if set.labels.len() != id.len() {
                return Err(TrainError::Misaligned { expected: id.len(), got: set.labels.len() });
            }
            Some((set.temperature, set.ce_weight))
        }
        None => None,
    };

    let mut net = init.clone();
    let max_patches = id
        .samples
        .iter()
        .chain(aux.into_iter().flat_map(|a| a.samples.iter()))
        .map(|s| s.x.patches())
        .max()
        .unwrap_or(0);
    let mut scratch = Scratch::new(&net, max_patches);
    let mut rng = substream(plan.seed, "train-shuffle");
    let mut trace = Vec::with_capacity(plan.epochs);

    let aux_len = aux.map_or(0, Dataset::len);
    let mut ood_order: Vec<usize> = Vec::new();
    let mut ood_cursor = 0usize;

    for epoch in 0..plan.epochs {
        let decay_steps = plan.lr_decay_epochs.iter().filter(|&&e| epoch >= e).count();
        let factor = crate::powi(plan.lr_decay_factor, decay_steps as u32);
        let eta = plan.eta * factor;
        let eta_prime = plan.eta_prime * factor;

        let id_order = shuffled(id.len(), &mut rng);
        for chunk in id_order.chunks(plan.batch_size_id) {
            let batch_id: Vec<(&Sample, Option<&[f64]>)> = chunk
                .iter()
                .map(|&i| {
                    let target = soft.map(|s| s.labels[i].as_slice());
                    (&id.samples[i], target)
                })
                .collect();

            let mut batch_ood: Vec<&Sample> = Vec::new();
            if plan.objective.uses_aux() {
                let aux = aux.expect("aux presence checked above");
                for _ in 0..plan.batch_size_ood.min(aux_len) {
                    if ood_cursor >= ood_order.len() {
                        ood_order = shuffled(aux_len, &mut rng);
                        ood_cursor = 0;
                    }
                    batch_ood.push(&aux.samples[ood_order[ood_cursor]]);
                    ood_cursor += 1;
                }
            }

            step_with_rates(
                &mut net,
                &batch_id,
                &batch_ood,
                plan,
                eta,
                eta_prime,
                distill,
                &mut scratch,
            )?;
        }
        let row = trace_row(&net, id, aux, plan, epoch)?;
        let reached = plan.stop_at_train_acc.is_some_and(|t| row.train_acc >= t);
        trace.push(row);
        if reached {
            break;
        }
    }

    Ok(TrainOutcome { net, trace })
}

/// Minibatch SGD from `init` under `plan`. `aux` may be a pure outlier set
/// or a wild mix; its samples are treated as unlabeled outliers either way.
pub fn train(
    init: &Network,
    id: &Dataset,
    aux: Option<&Dataset>,
    plan: &TrainPlan,
) -> Result<TrainOutcome, TrainError> {
    train_impl(init, id, aux, None, plan)
}

/// Distillation targets for an ID dataset: per sample, the teachers'
/// temperature-softmax averaged over the ensemble.
#[derive(Clone, Debug)]
pub struct SoftLabelSet {
    pub labels: Vec<Vec<f64>>,
    pub temperature: f64,
    pub ce_weight: f64,
}

/// Average the teachers' temperature-scaled softmax over the ID set.
pub fn distill_labels(
    teachers: &[Network],
    id: &Dataset,
    temperature: f64,
    ce_weight: f64,
) -> Result<SoftLabelSet, TrainError> {
    assert!(!teachers.is_empty(), "distillation needs at least one teacher");
    assert!(temperature > 0.0, "temperature must be positive");
    let mut labels = Vec::with_capacity(id.len());
    for s in &id.samples {
        let mut acc = vec![0.0f64; teachers[0].k()];
        for t in teachers {
            let logits = t.forward(&s.x).map_err(TrainError::Shape)?;
            let scaled: Vec<f64> = logits.iter().map(|&z| z / temperature).collect();
            for (a, q) in acc.iter_mut().zip(softmax(&scaled)) {
                *a += q;
            }
        }
        for a in acc.iter_mut() {
            *a /= teachers.len() as f64;
        }
        labels.push(acc);
    }
    Ok(SoftLabelSet { labels, temperature, ce_weight })
}

/// Train a student whose ID loss blends one-hot cross-entropy (weight
/// `ce_weight`) with cross-entropy against the soft labels at the soft
/// set's temperature; the outlier term follows `plan.objective` unchanged.
pub fn train_distilled(
    init: &Network,
    id: &Dataset,
    aux: Option<&Dataset>,
    soft: &SoftLabelSet,
    plan: &TrainPlan,
) -> Result<TrainOutcome, TrainError> {
    train_impl(init, id, aux, Some(soft), plan)
}
