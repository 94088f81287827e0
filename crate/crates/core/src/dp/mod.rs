//! Privacy budgets, noise mechanisms and budget accounting.

mod ledger;

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{exp, expm1, floor, ln, log1p, pow, sqrt};

pub use ledger::{Charge, PrivacyLedger, Scope, Share};

/// An `(ε, δ)` pair with `ε > 0` and `0 ≤ δ < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter { name: "epsilon", value: epsilon });
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter { name: "delta", value: delta });
        }
        Ok(Self { epsilon, delta })
    }

    /// Pure `ε`-differential privacy.
    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

/// Whether a release carries its stated guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    /// Noise calibrated to the stated privacy guarantee.
    Strict,
    /// Noise scaled below the calibrated level; no formal guarantee.
    Heuristic,
    /// Noise disabled (test mode).
    NonPrivate,
}

impl Strictness {
    pub fn from_multiplier(multiplier: f64) -> Self {
        if multiplier >= 1.0 {
            Strictness::Strict
        } else if multiplier > 0.0 {
            Strictness::Heuristic
        } else {
            Strictness::NonPrivate
        }
    }

    /// The weaker of two guarantees.
    pub fn combine(self, other: Self) -> Self {
        use Strictness::*;
        match (self, other) {
            (NonPrivate, _) | (_, NonPrivate) => NonPrivate,
            (Heuristic, _) | (_, Heuristic) => Heuristic,
            _ => Strict,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    DiscreteLaplace,
    Gaussian,
}

/// A noise distribution: kind, calibrated scale (Laplace scale `b` or
/// Gaussian standard deviation) and a multiplier on that scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub scale: f64,
    /// `1` for calibrated noise; below `1` the release is heuristic.
    pub multiplier: f64,
}

impl NoiseSpec {
    pub fn effective_scale(&self) -> f64 {
        self.scale * self.multiplier
    }

    pub fn strictness(&self) -> Strictness {
        Strictness::from_multiplier(self.multiplier)
    }
}

/// The noise shrink factor `(240 d)^{−1/d}` used by the heuristic variants.
pub fn heuristic_noise_multiplier(d: usize) -> f64 {
    let d = d.max(1) as f64;
    pow(240.0 * d, -1.0 / d)
}

/// Two-sided geometric noise with `Pr[Z = z] ∝ exp(−|z| / scale)`.
///
/// Drawn as the difference of two geometric variables, each obtained as
/// `⌊scale · E⌋` for a standard exponential `E`.
pub fn sample_discrete_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<i64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter { name: "scale", value: scale });
    }
    let mut geometric = || {
        let u: f64 = rng.random();
        floor(-scale * ln(1.0 - u)) as i64
    };
    Ok(geometric() - geometric())
}

/// `Var Z = 2α / (1 − α)²` with `α = e^{−1/scale}`.
pub fn discrete_laplace_variance(scale: f64) -> f64 {
    let a = exp(-1.0 / scale);
    2.0 * a / ((1.0 - a) * (1.0 - a))
}

/// `Pr[Z = 0] = (1 − α) / (1 + α)`.
pub fn discrete_laplace_zero_mass(scale: f64) -> f64 {
    let a = exp(-1.0 / scale);
    (1.0 - a) / (1.0 + a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationWarning {
    /// The classical Gaussian calibration is only proven for `ε < 1`.
    EpsilonAtLeastOne,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianCalibration {
    /// Variance `σ² = Δ₂² · 2 ln(1.25/δ) / ε²` before any multiplier.
    pub sigma2: f64,
    pub warning: Option<CalibrationWarning>,
}

impl GaussianCalibration {
    pub fn sigma(&self) -> f64 {
        sqrt(self.sigma2)
    }
}

/// Calibrates the Gaussian mechanism for L2 sensitivity `sensitivity`.
pub fn gaussian_calibration(sensitivity: f64, budget: &PrivacyBudget) -> Result<GaussianCalibration> {
    if !(sensitivity >= 0.0) || !sensitivity.is_finite() {
        return Err(Error::InvalidParameter { name: "sensitivity", value: sensitivity });
    }
    if !(budget.delta > 0.0) {
        return Err(Error::InvalidParameter { name: "delta", value: budget.delta });
    }
    let sigma2 = sensitivity * sensitivity * 2.0 * ln(1.25 / budget.delta) / (budget.epsilon * budget.epsilon);
    let warning = (budget.epsilon >= 1.0).then_some(CalibrationWarning::EpsilonAtLeastOne);
    Ok(GaussianCalibration { sigma2, warning })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianRelease {
    pub values: Vec<f64>,
    pub calibration: GaussianCalibration,
    pub noise: NoiseSpec,
}

/// Adds i.i.d. `N(0, (multiplier · σ)²)` noise to every coordinate of `values`.
pub fn gaussian_mechanism<R: Rng + ?Sized>(
    values: &[f64],
    sensitivity: f64,
    budget: &PrivacyBudget,
    multiplier: f64,
    rng: &mut R,
) -> Result<GaussianRelease> {
    if !(multiplier >= 0.0) || !multiplier.is_finite() {
        return Err(Error::InvalidParameter { name: "multiplier", value: multiplier });
    }
    let calibration = gaussian_calibration(sensitivity, budget)?;
    let noise = NoiseSpec { kind: NoiseKind::Gaussian, scale: calibration.sigma(), multiplier };
    let s = noise.effective_scale();
    let values = values
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v + s * z
        })
        .collect();
    Ok(GaussianRelease { values, calibration, noise })
}

/// Selection probabilities `∝ exp(ε u_i / (2 Δ))`.
pub fn exponential_mechanism_probabilities(utilities: &[f64], sensitivity: f64, epsilon: f64) -> Result<Vec<f64>> {
    if utilities.is_empty() {
        return Err(Error::Invalid("exponential mechanism needs at least one candidate"));
    }
    if !(sensitivity > 0.0) || !sensitivity.is_finite() {
        return Err(Error::InvalidParameter { name: "sensitivity", value: sensitivity });
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter { name: "epsilon", value: epsilon });
    }
    if utilities.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFinite("utilities"));
    }
    let scores: Vec<f64> = utilities.iter().map(|u| epsilon * u / (2.0 * sensitivity)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores.iter().map(|s| exp(s - max)).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Index drawn by the exponential mechanism.
pub fn exponential_mechanism<R: Rng + ?Sized>(utilities: &[f64], sensitivity: f64, epsilon: f64, rng: &mut R) -> Result<usize> {
    let probs = exponential_mechanism_probabilities(utilities, sensitivity, epsilon)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1))
}

fn check_rate(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "q", value: q })
    }
}

/// Privacy of an `ε`-DP mechanism run on a rate-`q` subsample:
/// `ln(1 + q (e^ε − 1))`.
pub fn amplified_epsilon(epsilon: f64, q: f64) -> Result<f64> {
    check_rate(q)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter { name: "epsilon", value: epsilon });
    }
    Ok(log1p(q * expm1(epsilon)))
}

/// Inverse of [`amplified_epsilon`]: the base `ε` whose amplification is `target`.
pub fn epsilon_before_amplification(target: f64, q: f64) -> Result<f64> {
    check_rate(q)?;
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::InvalidParameter { name: "epsilon", value: target });
    }
    Ok(log1p(expm1(target) / q))
}
