//! Nadaraya–Watson kernel smoothing.
//!
//! Predictions are `Σ w_i(x) Y_i` with `w_i(x) ∝ K(‖x − X_i‖₂ / h)`. When no
//! training point carries positive kernel mass the predictor falls back to
//! the label of the nearest training point (lowest index on ties), so every
//! prediction is a convex combination of training labels.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{HtlError, Result};
use crate::predictor::Predictor;

/// Radial profile `K(u)`, `u ≥ 0`.
///
/// All shapes except `Gaussian` vanish for `u > 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingKernel {
    Boxcar,
    Epanechnikov,
    /// `exp(−u²/2)` on `[0, 1]`, zero beyond.
    #[default]
    TruncatedGaussian,
    /// Untruncated `exp(−u²/2)`.
    Gaussian,
}

impl SmoothingKernel {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            SmoothingKernel::Boxcar => (u <= 1.0) as u8 as f64,
            SmoothingKernel::Epanechnikov => {
                if u <= 1.0 {
                    1.0 - u * u
                } else {
                    0.0
                }
            }
            SmoothingKernel::TruncatedGaussian => {
                if u <= 1.0 {
                    (-0.5 * u * u).exp()
                } else {
                    0.0
                }
            }
            SmoothingKernel::Gaussian => (-0.5 * u * u).exp(),
        }
    }

    pub fn compact(self) -> bool {
        !matches!(self, SmoothingKernel::Gaussian)
    }

    /// Kernel value from a squared distance already divided by `h²`.
    #[inline]
    fn eval_sq(self, u2: f64) -> f64 {
        match self {
            SmoothingKernel::Boxcar => 1.0,
            SmoothingKernel::Epanechnikov => 1.0 - u2,
            SmoothingKernel::TruncatedGaussian | SmoothingKernel::Gaussian => (-0.5 * u2).exp(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct KsPredictor {
    train: Dataset,
    kernel: SmoothingKernel,
    bandwidth: f64,
    label_range: (f64, f64),
    /// For compact kernels: `(X_i[0], i)` sorted by first coordinate, so a
    /// query only visits rows with `|X_i[0] − x[0]| ≤ h`.
    window: Option<Vec<(f64, usize)>>,
}

impl KsPredictor {
    pub fn new(train: Dataset, kernel: SmoothingKernel, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(HtlError::domain("bandwidth", bandwidth, "h > 0"));
        }
        let label_range = train
            .labels()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| (l.min(y), h.max(y)));
        let window = kernel.compact().then(|| {
            let mut keys: Vec<(f64, usize)> = train.rows().map(|r| r[0]).zip(0..).collect();
            keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            keys
        });
        Ok(KsPredictor {
            train,
            kernel,
            bandwidth,
            label_range,
            window,
        })
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn kernel(&self) -> SmoothingKernel {
        self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Normalized weights `w_i(x)`; one-hot on the nearest point when every
    /// kernel value is zero.
    pub fn weights(&self, x: &[f64]) -> Vec<f64> {
        self.check_dim(x);
        let inv_h2 = 1.0 / (self.bandwidth * self.bandwidth);
        let mut raw = Vec::with_capacity(self.train.n());
        let mut nearest = (f64::INFINITY, 0);
        for (i, row) in self.train.rows().enumerate() {
            let d2 = sq_dist(x, row);
            if d2 < nearest.0 {
                nearest = (d2, i);
            }
            raw.push(self.kernel_sq(d2 * inv_h2));
        }
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            raw.iter_mut().for_each(|w| *w /= total);
        } else {
            raw.iter_mut().for_each(|w| *w = 0.0);
            raw[nearest.1] = 1.0;
        }
        raw
    }

    #[inline]
    fn kernel_sq(&self, u2: f64) -> f64 {
        if self.kernel.compact() && u2 > 1.0 {
            0.0
        } else {
            self.kernel.eval_sq(u2)
        }
    }

    /// Index of the closest training row, lowest index on ties.
    fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, row) in self.train.rows().enumerate() {
            let d2 = sq_dist(x, row);
            if d2 < best.0 {
                best = (d2, i);
            }
        }
        best.1
    }

    fn check_dim(&self, x: &[f64]) {
        assert_eq!(
            x.len(),
            self.train.dim(),
            "query dimension does not match training features"
        );
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

impl Predictor for KsPredictor {
    fn predict(&self, x: &[f64]) -> f64 {
        self.check_dim(x);
        let inv_h2 = 1.0 / (self.bandwidth * self.bandwidth);
        let labels = self.train.labels();
        let mut num = 0.0;
        let mut den = 0.0;
        let mut accumulate = |i: usize| {
            let k = self.kernel_sq(sq_dist(x, self.train.row(i)) * inv_h2);
            if k > 0.0 {
                num += k * labels[i];
                den += k;
            }
        };
        match &self.window {
            Some(keys) => {
                // The margin only admits extra candidates; the kernel test decides.
                let reach = self.bandwidth * (1.0 + 1e-9);
                let lo = keys.partition_point(|k| k.0 < x[0] - reach);
                let hi = keys.partition_point(|k| k.0 <= x[0] + reach);
                keys[lo..hi].iter().for_each(|&(_, i)| accumulate(i));
            }
            None => (0..self.train.n()).for_each(&mut accumulate),
        }
        if den > 0.0 {
            // Rounding can push the ratio a hair outside the label range.
            (num / den).clamp(self.label_range.0, self.label_range.1)
        } else {
            labels[self.nearest(x)]
        }
    }

    fn dim(&self) -> usize {
        self.train.dim()
    }

    fn stability_coeffs(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.weights(x))
    }
}

/// `n^{−1/(2α + d)}`, the bandwidth order for a `(λ, α)`-Hölder target.
pub fn bandwidth_rule(n: usize, d: usize, alpha: f64) -> Result<f64> {
    bandwidth_rule_scaled(n, d, alpha, 1.0)
}

/// [`bandwidth_rule`] times a user constant `c > 0`.
pub fn bandwidth_rule_scaled(n: usize, d: usize, alpha: f64, c: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(HtlError::domain("alpha", alpha, "(0, 1]"));
    }
    if n == 0 || d == 0 {
        return Err(HtlError::InvalidInput("n and d must be positive".into()));
    }
    if !(c > 0.0) {
        return Err(HtlError::domain("bandwidth constant", c, "c > 0"));
    }
    Ok(c * (n as f64).powf(-1.0 / (2.0 * alpha + d as f64)))
}
