//! Kernel ridge regression: `f̂(x) = K(X, x)ᵀ (K(X, X) + nλI)⁻¹ Y`.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{HtlError, Result};
use crate::predictor::Predictor;
use crate::smoothing::sq_dist;

/// Positive semidefinite kernel on `ℝ^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum RkhsKernel {
    /// `exp(−‖x − y‖² / (2ℓ²))`.
    Rbf { lengthscale: f64 },
    Linear,
    /// `(⟨x, y⟩ + offset)^degree`.
    Polynomial { degree: u32, offset: f64 },
}

impl RkhsKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RkhsKernel::Rbf { lengthscale } if !(lengthscale > 0.0 && lengthscale.is_finite()) => {
                Err(HtlError::domain("lengthscale", lengthscale, "ℓ > 0"))
            }
            RkhsKernel::Polynomial { degree: 0, .. } => {
                Err(HtlError::InvalidInput("polynomial degree must be positive".into()))
            }
            RkhsKernel::Polynomial { offset, .. } if !(offset >= 0.0) => {
                Err(HtlError::domain("polynomial offset", offset, "c ≥ 0"))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            RkhsKernel::Rbf { lengthscale } => {
                (-sq_dist(a, b) / (2.0 * lengthscale * lengthscale)).exp()
            }
            RkhsKernel::Linear => dot(a, b),
            RkhsKernel::Polynomial { degree, offset } => (dot(a, b) + offset).powi(degree as i32),
        }
    }

    /// `sup K(x, x)` over `‖x‖ ≤ radius`.
    pub fn diag_bound(&self, radius: f64) -> f64 {
        match *self {
            RkhsKernel::Rbf { .. } => 1.0,
            RkhsKernel::Linear => radius * radius,
            RkhsKernel::Polynomial { degree, offset } => (radius * radius + offset).powi(degree as i32),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn row(m: &Array2<f64>, i: usize) -> &[f64] {
    let d = m.ncols();
    &m.as_slice().expect("standard layout")[i * d..(i + 1) * d]
}

/// Cross-kernel matrix with entry `(i, j) = K(a_i, b_j)`.
pub fn gram(kernel: &RkhsKernel, a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(HtlError::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let (a, b) = (a.to_owned(), b.to_owned());
    Ok(Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        kernel.eval(row(&a, i), row(&b, j))
    }))
}

/// Median pairwise Euclidean distance between rows.
///
/// Above 1000 rows an evenly strided subset of 1000 rows is used. Returns 1
/// when the median is zero (all sampled rows coincide).
pub fn median_heuristic(features: &Array2<f64>) -> f64 {
    const MAX_ROWS: usize = 1000;
    let features = features.as_standard_layout().to_owned();
    let n = features.nrows();
    let stride = n.div_ceil(MAX_ROWS).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let mut dists = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            dists.push(sq_dist(row(&features, i), row(&features, j)).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    let mid = dists.len() / 2;
    let (_, m, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

const JITTER_RETRIES: usize = 3;

#[derive(Clone, Debug)]
pub struct KrrPredictor {
    train_features: Array2<f64>,
    kernel: RkhsKernel,
    lambda: f64,
    coefficients: Array1<f64>,
    k_bound: f64,
    jitter: f64,
    relative_residual: f64,
}

impl KrrPredictor {
    /// Solve `(K + nλI + jitter·I) c = Y` by Cholesky factorization.
    ///
    /// Jitter starts at 0 for `λ > 0` and at `1e-10·trace(K)/n` for `λ = 0`,
    /// and grows tenfold on each of up to three failed factorizations.
    pub fn fit(train: &Dataset, kernel: RkhsKernel, lambda: f64) -> Result<Self> {
        kernel.validate()?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(HtlError::domain("lambda", lambda, "λ ≥ 0"));
        }
        let n = train.n();
        let k = gram(&kernel, train.features(), train.features())?;
        let ridge = n as f64 * lambda;
        let base = {
            let mean_diag = k.diag().sum() / n as f64;
            1e-10 * if mean_diag > 0.0 { mean_diag } else { 1.0 }
        };
        let y = DVector::from_iterator(n, train.labels().iter().copied());

        let k_bound = kernel.diag_bound(train.x_bound());
        let mut jitter = if lambda > 0.0 { 0.0 } else { base };
        for attempt in 0..=JITTER_RETRIES {
            let shift = ridge + jitter;
            let system = DMatrix::from_fn(n, n, |i, j| k[[i, j]] + if i == j { shift } else { 0.0 });
            if let Some(chol) = system.clone().cholesky() {
                let coef = chol.solve(&y);
                let resid = (&system * &coef - &y).norm();
                let y_norm = y.norm();
                return Ok(KrrPredictor {
                    train_features: train.features().clone(),
                    kernel,
                    lambda,
                    coefficients: Array1::from_iter(coef.iter().copied()),
                    k_bound,
                    jitter,
                    relative_residual: if y_norm > 0.0 { resid / y_norm } else { resid },
                });
            }
            if attempt < JITTER_RETRIES {
                jitter = if jitter == 0.0 { base } else { jitter * 10.0 };
            }
        }
        Err(HtlError::Conditioning { jitter })
    }

    pub fn kernel(&self) -> &RkhsKernel {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn coefficients(&self) -> &Array1<f64> {
        &self.coefficients
    }

    pub fn train_features(&self) -> &Array2<f64> {
        &self.train_features
    }

    /// `sup K(x, x)` over the ball holding the training rows.
    pub fn k_bound(&self) -> f64 {
        self.k_bound
    }

    /// Diagonal shift added on top of `nλ` to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `‖(K + nλI + jitter·I) c − Y‖₂ / ‖Y‖₂` at fit time.
    pub fn relative_residual(&self) -> f64 {
        self.relative_residual
    }

    /// Every entry equals `k / (nλ)`.
    pub fn stability_coeffs(&self) -> Result<Vec<f64>> {
        if self.lambda <= 0.0 {
            return Err(HtlError::UndefinedStability("kernel ridge with lambda = 0"));
        }
        let n = self.coefficients.len();
        Ok(vec![self.k_bound / (n as f64 * self.lambda); n])
    }
}

impl Predictor for KrrPredictor {
    fn predict(&self, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            self.train_features.ncols(),
            "query dimension does not match training features"
        );
        (0..self.coefficients.len())
            .map(|i| self.kernel.eval(x, row(&self.train_features, i)) * self.coefficients[i])
            .sum()
    }

    fn dim(&self) -> usize {
        self.train_features.ncols()
    }

    fn stability_coeffs(&self, _x: &[f64]) -> Option<Vec<f64>> {
        KrrPredictor::stability_coeffs(self).ok()
    }
}

/// `n^{−1/(β + p)}`, the regularization order under eigenvalue decay
/// exponent `p` and approximation exponent `β`.
pub fn lambda_rule(n: usize, beta: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(HtlError::domain("p", p, "(0, 1)"));
    }
    if !(beta > 0.0) {
        return Err(HtlError::domain("beta", beta, "β > 0"));
    }
    if n == 0 {
        return Err(HtlError::InvalidInput("n must be positive".into()));
    }
    Ok((n as f64).powf(-1.0 / (beta + p)))
}
