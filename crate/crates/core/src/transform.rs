//! Transformation functions `G(a, b)` relating a source value `a` and an
//! auxiliary value `b` to the target value, their inverses in `b`, and the
//! estimators that turn noisy target labels into auxiliary labels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HtlError, Result};
use crate::predictor::Predictor;

/// Smallest admissible `|a + α|` for the scale family's auxiliary labels.
pub const SCALE_GUARD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Family {
    /// `G(a, b) = αa + b`.
    Offset { alpha: f64 },
    /// `G(a, b) = (a + α)b`.
    Scale { alpha: f64 },
    /// `G(a, b) = b`.
    NonTransfer,
    /// `G(a, b) = β·a·ln b`, `b > 0`.
    Loglinear { beta: f64 },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Offset { alpha } => write!(f, "offset(alpha={alpha})"),
            Family::Scale { alpha } => write!(f, "scale(alpha={alpha})"),
            Family::NonTransfer => f.write_str("non_transfer"),
            Family::Loglinear { beta } => write!(f, "loglinear(beta={beta})"),
        }
    }
}

/// A transformation family member with its regularity constants: `G` is
/// `lipschitz`-Lipschitz on the working box and auxiliary values are bounded
/// by `aux_bound`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformationFunction {
    family: Family,
    lipschitz: f64,
    aux_bound: f64,
}

impl TransformationFunction {
    pub fn new(family: Family, lipschitz: f64, aux_bound: f64) -> Result<Self> {
        match family {
            Family::Loglinear { beta } if beta == 0.0 || !beta.is_finite() => {
                return Err(HtlError::domain("beta", beta, "β ≠ 0"));
            }
            Family::Offset { alpha } | Family::Scale { alpha } if !alpha.is_finite() => {
                return Err(HtlError::domain("alpha", alpha, "finite"));
            }
            _ => {}
        }
        if !(lipschitz > 0.0) {
            return Err(HtlError::domain("lipschitz_L", lipschitz, "L > 0"));
        }
        if !(aux_bound > 0.0) {
            return Err(HtlError::domain("aux_bound_B", aux_bound, "B > 0"));
        }
        Ok(TransformationFunction {
            family,
            lipschitz,
            aux_bound,
        })
    }

    /// Offset family with `L = √(1 + α²)` and no auxiliary bound.
    pub fn offset(alpha: f64) -> Self {
        Self::new(Family::Offset { alpha }, (1.0 + alpha * alpha).sqrt(), f64::INFINITY)
            .expect("finite alpha")
    }

    /// Scale family. `L = 1/SCALE_GUARD²` is the Lipschitz constant of the
    /// guarded auxiliary labels for targets bounded by 1; rescale it with
    /// [`TransformationFunction::with_bounds`] for other label ranges.
    pub fn scale(alpha: f64) -> Self {
        Self::new(Family::Scale { alpha }, 1.0 / (SCALE_GUARD * SCALE_GUARD), f64::INFINITY)
            .expect("finite alpha")
    }

    pub fn non_transfer() -> Self {
        Self::new(Family::NonTransfer, 1.0, f64::INFINITY).expect("valid constants")
    }

    pub fn loglinear(beta: f64) -> Result<Self> {
        Self::new(Family::Loglinear { beta }, 1.0, f64::INFINITY)
    }

    pub fn with_bounds(self, lipschitz: f64, aux_bound: f64) -> Result<Self> {
        Self::new(self.family, lipschitz, aux_bound)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn aux_bound(&self) -> f64 {
        self.aux_bound
    }

    /// Whether `b ↦ G(a, b)` is affine for every `a`.
    pub fn affine_in_b(&self) -> bool {
        !matches!(self.family, Family::Loglinear { .. })
    }

    /// Distance from the non-transfer map used to break selection ties:
    /// `|α|` for offsets, 0 for non-transfer, infinite otherwise.
    pub fn transfer_strength(&self) -> f64 {
        match self.family {
            Family::NonTransfer => 0.0,
            Family::Offset { alpha } => alpha.abs(),
            _ => f64::INFINITY,
        }
    }

    pub fn eval(&self, a: f64, b: f64) -> Result<f64> {
        match self.family {
            Family::Offset { alpha } => Ok(alpha * a + b),
            Family::Scale { alpha } => Ok((a + alpha) * b),
            Family::NonTransfer => Ok(b),
            Family::Loglinear { beta } => {
                if b <= 0.0 {
                    Err(HtlError::domain("b", b, "b > 0 for the loglinear family"))
                } else {
                    Ok(beta * a * b.ln())
                }
            }
        }
    }

    /// `G_a⁻¹(c)`: the `b` with `G(a, b) = c`.
    pub fn inverse(&self, a: f64, c: f64) -> Result<f64> {
        match self.family {
            Family::Offset { alpha } => Ok(c - alpha * a),
            Family::Scale { alpha } => {
                let s = a + alpha;
                if s == 0.0 {
                    Err(HtlError::Singular(format!("a + alpha = {s} (a = {a}, alpha = {alpha})")))
                } else {
                    Ok(c / s)
                }
            }
            Family::NonTransfer => Ok(c),
            Family::Loglinear { beta } => {
                let s = beta * a;
                if s == 0.0 {
                    Err(HtlError::Singular(format!("beta * a = 0 (a = {a}, beta = {beta})")))
                } else {
                    Ok((c / s).exp())
                }
            }
        }
    }

    /// The induced auxiliary function `w_G(x) = G⁻¹_{f_so(x)}(f_ta(x))`.
    pub fn auxiliary_truth(
        &self,
        source: &dyn Predictor,
        target: &dyn Predictor,
        x: &[f64],
    ) -> Result<f64> {
        self.inverse(source.predict(x), target.predict(x))
    }
}

impl fmt::Display for TransformationFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.family.fmt(f)
    }
}

/// How noisy target labels become auxiliary labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum EstimatorMode {
    /// `H(a, y) = G_a⁻¹(y)`; unbiased when `G` is affine in `b`.
    DirectInverse,
    /// Regression calibration for the loglinear family under Gaussian noise
    /// of variance `sigma2`: `H(a, y) = exp(y/(βa) + σ²a²)`.
    Calibrated { sigma2: f64 },
}

/// The auxiliary-label estimator `H_G`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxiliaryEstimator {
    transformation: TransformationFunction,
    mode: EstimatorMode,
    noiseless: bool,
}

impl AuxiliaryEstimator {
    /// Direct inverse; only for families affine in `b`.
    pub fn direct(transformation: TransformationFunction) -> Result<Self> {
        Self::new(transformation, EstimatorMode::DirectInverse, false)
    }

    /// Direct inverse for any family, on the promise that target labels
    /// carry no noise.
    pub fn direct_noiseless(transformation: TransformationFunction) -> Self {
        Self::new(transformation, EstimatorMode::DirectInverse, true)
            .expect("noiseless direct inverse is always admissible")
    }

    pub fn calibrated(transformation: TransformationFunction, sigma2: f64) -> Result<Self> {
        Self::new(transformation, EstimatorMode::Calibrated { sigma2 }, false)
    }

    pub fn new(transformation: TransformationFunction, mode: EstimatorMode, noiseless: bool) -> Result<Self> {
        let est = AuxiliaryEstimator {
            transformation,
            mode,
            noiseless,
        };
        est.check()?;
        Ok(est)
    }

    fn check(&self) -> Result<()> {
        match self.mode {
            EstimatorMode::DirectInverse if !self.transformation.affine_in_b() && !self.noiseless => {
                Err(HtlError::Config(format!(
                    "direct inverse is biased for {}; use calibration or declare noiseless labels",
                    self.transformation
                )))
            }
            EstimatorMode::Calibrated { .. }
                if !matches!(self.transformation.family(), Family::Loglinear { .. }) =>
            {
                Err(HtlError::Config(format!(
                    "calibration is only defined for the loglinear family, not {}",
                    self.transformation
                )))
            }
            EstimatorMode::Calibrated { sigma2 } if !(sigma2 >= 0.0) => {
                Err(HtlError::domain("sigma2", sigma2, "σ² ≥ 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn transformation(&self) -> &TransformationFunction {
        &self.transformation
    }

    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }

    /// Auxiliary label `H_G(â, y)` from a source prediction `â` and a target
    /// label `y`.
    ///
    /// For the scale family the denominator `â + α` is pushed away from zero
    /// to magnitude [`SCALE_GUARD`] (sign kept, zero maps to `+SCALE_GUARD`),
    /// which keeps `H` bounded and Lipschitz in `â`.
    pub fn apply(&self, a_hat: f64, y: f64) -> Result<f64> {
        self.check()?;
        match (self.mode, self.transformation.family()) {
            (EstimatorMode::DirectInverse, Family::Scale { alpha }) => {
                let s = a_hat + alpha;
                let guarded = if s.abs() >= SCALE_GUARD {
                    s
                } else if s < 0.0 {
                    -SCALE_GUARD
                } else {
                    SCALE_GUARD
                };
                Ok(y / guarded)
            }
            (EstimatorMode::DirectInverse, _) => self.transformation.inverse(a_hat, y),
            (EstimatorMode::Calibrated { sigma2 }, Family::Loglinear { beta }) => {
                let s = beta * a_hat;
                if s == 0.0 {
                    return Err(HtlError::Singular(format!(
                        "beta * a = 0 (a = {a_hat}, beta = {beta})"
                    )));
                }
                Ok((y / s + sigma2 * a_hat * a_hat).exp())
            }
            (EstimatorMode::Calibrated { .. }, _) => unreachable!("rejected by check"),
        }
    }
}

/// Pooled within-point variance `ΣᵢΣⱼ(Y_ij − Ȳ_i)² / Σᵢ(n_i − 1)`.
///
/// Points with a single replicate contribute to neither sum.
pub fn estimate_sigma2(replicates: &[Vec<f64>]) -> Result<f64> {
    let mut ss = 0.0;
    let mut dof = 0usize;
    for group in replicates.iter().filter(|g| g.len() >= 2) {
        let mean = group.iter().sum::<f64>() / group.len() as f64;
        ss += group.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>();
        dof += group.len() - 1;
    }
    if dof == 0 {
        return Err(HtlError::InsufficientReplicates);
    }
    Ok(ss / dof as f64)
}

/// Finite cover `{G(a, b) = kεa + b : k = −K..K}` of the linear offset class
/// `{αa + b : |α| ≤ L_α, |a| ≤ L_a}` with `ε = L_α / 2K`.
///
/// The grid spans `[−L_α/2, L_α/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedFamily {
    l_alpha: f64,
    l_a: f64,
    k: usize,
    epsilon: f64,
    members: Vec<TransformationFunction>,
}

impl QuantizedFamily {
    pub fn l_alpha(&self) -> f64 {
        self.l_alpha
    }

    pub fn l_a(&self) -> f64 {
        self.l_a
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn members(&self) -> &[TransformationFunction] {
        &self.members
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| match m.family() {
                Family::Offset { alpha } => alpha,
                _ => unreachable!("quantized members are offsets"),
            })
            .collect()
    }
}

pub fn quantize_offset_family(l_alpha: f64, l_a: f64, k: usize) -> Result<QuantizedFamily> {
    if !(l_alpha > 0.0 && l_alpha.is_finite()) {
        return Err(HtlError::domain("L_alpha", l_alpha, "L_α > 0"));
    }
    if !(l_a > 0.0 && l_a.is_finite()) {
        return Err(HtlError::domain("L_a", l_a, "L_a > 0"));
    }
    if k == 0 {
        return Err(HtlError::InvalidInput("K must be at least 1".into()));
    }
    let epsilon = l_alpha / (2 * k) as f64;
    let lipschitz = (1.0 + l_alpha * l_alpha).sqrt();
    let k_i = k as i64;
    let members = (-k_i..=k_i)
        .map(|j| {
            TransformationFunction::new(Family::Offset { alpha: j as f64 * epsilon }, lipschitz, f64::INFINITY)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedFamily {
        l_alpha,
        l_a,
        k,
        epsilon,
        members,
    })
}
