//! Scoring functions and the threshold detector.
//!
//! A sample is declared ID when its score is strictly above the threshold;
//! the boundary counts as OOD. The threshold is calibrated on ID scores so
//! that at least the requested fraction lands strictly above it.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::datagen::PatchMatrix;
use crate::network::{Network, ShapeMismatch};
use crate::objectives::softmax;

/// Which scoring function produced a set of scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScoreKind {
    MaxLogit,
    Msp,
    Energy,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::MaxLogit, ScoreKind::Msp, ScoreKind::Energy];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "maxlogit" => Some(Self::MaxLogit),
            "msp" => Some(Self::Msp),
            "energy" => Some(Self::Energy),
            _ => None,
        }
    }

    /// Score a raw logit vector.
    pub fn of_logits(self, logits: &[f64]) -> f64 {
        match self {
            ScoreKind::MaxLogit => max_of(logits),
            ScoreKind::Msp => max_of(&softmax(logits)),
            ScoreKind::Energy => log_sum_exp(logits),
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::MaxLogit => "maxlogit",
            ScoreKind::Msp => "msp",
            ScoreKind::Energy => "energy",
        })
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = max_of(logits);
    max + libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>())
}

/// Largest logit.
pub fn maxlogit_score(net: &Network, x: &PatchMatrix) -> Result<f64, ShapeMismatch> {
    Ok(max_of(&net.forward(x)?))
}

/// Largest softmax probability.
pub fn msp_score(net: &Network, x: &PatchMatrix) -> Result<f64, ShapeMismatch> {
    Ok(max_of(&softmax(&net.forward(x)?)))
}

/// `log sum_i exp(F_i)`, computed with max subtraction.
pub fn energy_score(net: &Network, x: &PatchMatrix) -> Result<f64, ShapeMismatch> {
    Ok(log_sum_exp(&net.forward(x)?))
}

/// The threshold detector: 1 (ID) iff `score > tau`, 0 (OOD) otherwise.
pub fn detect(score: f64, tau: f64) -> u8 {
    if score > tau {
        1
    } else {
        0
    }
}

/// Scores for a mixed evaluation set, with the ID/OOD ground truth kept in
/// a parallel vector.
#[derive(Clone, Debug)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub is_id: Vec<bool>,
    pub score_name: ScoreKind,
}

impl ScoredSet {
    pub fn new(score_name: ScoreKind) -> Self {
        Self { scores: Vec::new(), is_id: Vec::new(), score_name }
    }

    pub fn push(&mut self, score: f64, is_id: bool) {
        self.scores.push(score);
        self.is_id.push(is_id);
    }

    pub fn id_scores(&self) -> Vec<f64> {
        self.scores.iter().zip(&self.is_id).filter_map(|(&s, &id)| id.then_some(s)).collect()
    }

    pub fn ood_scores(&self) -> Vec<f64> {
        self.scores.iter().zip(&self.is_id).filter_map(|(&s, &id)| (!id).then_some(s)).collect()
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        if self.scores.len() != self.is_id.len() {
            return Err(DetectError::LengthMismatch);
        }
        if self.scores.iter().any(|s| !s.is_finite()) {
            return Err(DetectError::NonFiniteScore);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DetectError {
    EmptyScores,
    LengthMismatch,
    NonFiniteScore,
    /// One side of the ID/OOD split has no samples.
    MissingSplit(String),
}

impl fmt::Display for DetectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyScores => f.write_str("no scores supplied"),
            Self::LengthMismatch => f.write_str("scores and labels differ in length"),
            Self::NonFiniteScore => f.write_str("non-finite score"),
            Self::MissingSplit(which) => write!(f, "no {which} scores in the set"),
        }
    }
}

impl core::error::Error for DetectError {}

/// The largest observed score `tau` such that the fraction of `id_scores`
/// strictly above it is at least `tpr_target`. When no observed score
/// qualifies (degenerate ties, or a target of 1.0), the threshold moves
/// just below the minimum so every ID sample clears it.
pub fn choose_tau(id_scores: &[f64], tpr_target: f64) -> Result<f64, DetectError> {
    if id_scores.is_empty() {
        return Err(DetectError::EmptyScores);
    }
    assert!(tpr_target > 0.0 && tpr_target <= 1.0, "tpr_target must lie in (0, 1]");
    let mut sorted = id_scores.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;

    // Walk distinct values upward; the achieved TPR at a value is monotone
    // decreasing, so the last qualifying value is the answer.
    let mut best: Option<f64> = None;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let above = (n - j - 1) as f64;
        if above / nf >= tpr_target {
            best = Some(sorted[i]);
            i = j + 1;
        } else {
            break;
        }
    }
    Ok(best.unwrap_or_else(|| next_below(sorted[0])))
}

fn next_below(x: f64) -> f64 {
    let y = f64::next_down(x);
    debug_assert!(y < x);
    y
}
