//! Regression subroutines plugged into either stage of the transfer pipeline,
//! and k-fold grid search over their hyperparameters.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{HtlError, Result};
use crate::evaluation::mse;
use crate::predictor::{Learner, SharedPredictor};
use crate::ridge::{lambda_rule, median_heuristic, KrrPredictor, RkhsKernel};
use crate::smoothing::{bandwidth_rule_scaled, KsPredictor, SmoothingKernel};

fn one() -> f64 {
    1.0
}

/// Kernel smoothing bandwidth: a value, the `c·n^{−1/(2α+d)}` rule, or a
/// grid to be resolved by cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    Rule {
        alpha: f64,
        #[serde(default = "one")]
        constant: f64,
    },
    Grid(Vec<f64>),
}

/// Ridge parameter: a value, the `n^{−1/(β+p)}` rule, or a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    Fixed(f64),
    Rule { beta: f64, p: f64 },
    Grid(Vec<f64>),
}

/// RKHS kernel as configured; an RBF without a lengthscale takes the median
/// pairwise distance of its training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum KernelChoice {
    Rbf {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lengthscale: Option<f64>,
    },
    Linear,
    Polynomial { degree: u32, offset: f64 },
}

impl Default for KernelChoice {
    fn default() -> Self {
        KernelChoice::Rbf { lengthscale: None }
    }
}

impl KernelChoice {
    pub fn resolve(&self, data: &Dataset) -> RkhsKernel {
        match *self {
            KernelChoice::Rbf { lengthscale } => RkhsKernel::Rbf {
                lengthscale: lengthscale.unwrap_or_else(|| median_heuristic(data.features())),
            },
            KernelChoice::Linear => RkhsKernel::Linear,
            KernelChoice::Polynomial { degree, offset } => RkhsKernel::Polynomial { degree, offset },
        }
    }
}

/// A regression algorithm with its hyperparameter choice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum SubroutineSpec {
    Ks {
        #[serde(default)]
        kernel: SmoothingKernel,
        bandwidth: Bandwidth,
    },
    Krr {
        #[serde(default)]
        kernel: KernelChoice,
        lambda: Regularization,
    },
}

impl SubroutineSpec {
    pub fn ks(kernel: SmoothingKernel, bandwidth: f64) -> Self {
        SubroutineSpec::Ks {
            kernel,
            bandwidth: Bandwidth::Fixed(bandwidth),
        }
    }

    pub fn krr(kernel: KernelChoice, lambda: f64) -> Self {
        SubroutineSpec::Krr {
            kernel,
            lambda: Regularization::Fixed(lambda),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &'static str, v: f64, allow_zero: bool| {
            if v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0)) {
                Ok(())
            } else {
                Err(HtlError::domain(what, v, if allow_zero { "≥ 0" } else { "> 0" }))
            }
        };
        match self {
            SubroutineSpec::Ks { bandwidth, .. } => match bandwidth {
                Bandwidth::Fixed(h) => positive("bandwidth", *h, false),
                Bandwidth::Rule { alpha, constant } => {
                    bandwidth_rule_scaled(1, 1, *alpha, *constant).map(|_| ())
                }
                Bandwidth::Grid(g) if g.is_empty() => Err(HtlError::Config("empty bandwidth grid".into())),
                Bandwidth::Grid(g) => g.iter().try_for_each(|&h| positive("bandwidth", h, false)),
            },
            SubroutineSpec::Krr { kernel, lambda } => {
                match kernel {
                    KernelChoice::Rbf { lengthscale: Some(l) } => positive("lengthscale", *l, false)?,
                    KernelChoice::Polynomial { degree, offset } => {
                        RkhsKernel::Polynomial {
                            degree: *degree,
                            offset: *offset,
                        }
                        .validate()?
                    }
                    _ => {}
                }
                match lambda {
                    Regularization::Fixed(l) => positive("lambda", *l, true),
                    Regularization::Rule { beta, p } => lambda_rule(1, *beta, *p).map(|_| ()),
                    Regularization::Grid(g) if g.is_empty() => Err(HtlError::Config("empty lambda grid".into())),
                    Regularization::Grid(g) => g.iter().try_for_each(|&l| positive("lambda", l, true)),
                }
            }
        }
    }

    /// True when the spec carries a grid that still needs resolving.
    pub fn has_grid(&self) -> bool {
        matches!(
            self,
            SubroutineSpec::Ks { bandwidth: Bandwidth::Grid(_), .. }
                | SubroutineSpec::Krr { lambda: Regularization::Grid(_), .. }
        )
    }

    /// One fixed-hyperparameter spec per grid point, in grid order; a spec
    /// without a grid yields itself.
    pub fn grid_points(&self) -> Vec<SubroutineSpec> {
        match self {
            SubroutineSpec::Ks {
                kernel,
                bandwidth: Bandwidth::Grid(g),
            } => g.iter().map(|&h| SubroutineSpec::ks(*kernel, h)).collect(),
            SubroutineSpec::Krr {
                kernel,
                lambda: Regularization::Grid(g),
            } => g.iter().map(|&l| SubroutineSpec::krr(kernel.clone(), l)).collect(),
            other => vec![other.clone()],
        }
    }

    /// Fixed value of the bandwidth or ridge parameter, when there is one.
    pub fn fixed_hyperparameter(&self) -> Option<f64> {
        match self {
            SubroutineSpec::Ks {
                bandwidth: Bandwidth::Fixed(h),
                ..
            } => Some(*h),
            SubroutineSpec::Krr {
                lambda: Regularization::Fixed(l),
                ..
            } => Some(*l),
            _ => None,
        }
    }

    /// Bandwidth or ridge parameter this spec would use on `data`.
    pub fn hyperparameter_for(&self, data: &Dataset) -> Result<f64> {
        match self {
            SubroutineSpec::Ks { bandwidth, .. } => match bandwidth {
                Bandwidth::Fixed(h) => Ok(*h),
                Bandwidth::Rule { alpha, constant } => {
                    bandwidth_rule_scaled(data.n(), data.dim(), *alpha, *constant)
                }
                Bandwidth::Grid(_) => Err(unresolved()),
            },
            SubroutineSpec::Krr { lambda, .. } => match lambda {
                Regularization::Fixed(l) => Ok(*l),
                Regularization::Rule { beta, p } => lambda_rule(data.n(), *beta, *p),
                Regularization::Grid(_) => Err(unresolved()),
            },
        }
    }
}

fn unresolved() -> HtlError {
    HtlError::Config("hyperparameter grid must be resolved by cross-validation before fitting".into())
}

impl Learner for SubroutineSpec {
    fn fit(&self, data: &Dataset) -> Result<SharedPredictor> {
        let value = self.hyperparameter_for(data)?;
        match self {
            SubroutineSpec::Ks { kernel, .. } => Ok(Arc::new(KsPredictor::new(data.clone(), *kernel, value)?)),
            SubroutineSpec::Krr { kernel, .. } => {
                Ok(Arc::new(KrrPredictor::fit(data, kernel.resolve(data), value)?))
            }
        }
    }
}

/// Fold index of each row: a seeded shuffle dealt round-robin into `folds`
/// parts whose sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (j, &row) in order.iter().enumerate() {
        fold_of[row] = j % folds;
    }
    fold_of
}

/// Grid point with the smallest mean held-out MSE over `folds` folds; ties
/// go to the earliest grid point. Grid points whose fits fail are skipped.
pub fn grid_search_cv(
    data: &Dataset,
    template: &SubroutineSpec,
    folds: usize,
    seed: u64,
) -> Result<SubroutineSpec> {
    template.validate()?;
    let candidates = template.grid_points();
    if candidates.len() == 1 {
        return Ok(candidates.into_iter().next().expect("one candidate"));
    }
    if folds < 2 {
        return Err(HtlError::InvalidInput("cross-validation needs at least 2 folds".into()));
    }
    if data.n() < folds {
        return Err(HtlError::TooFewRows {
            folds,
            rows: data.n(),
        });
    }
    let fold_of = fold_assignment(data.n(), folds, seed);
    let parts = (0..folds)
        .map(|f| {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..data.n()).partition(|&i| fold_of[i] == f);
            Ok((data.select(&kept)?, data.select(&held)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(f64, usize)> = None;
    let mut last_err = None;
    for (idx, candidate) in candidates.iter().enumerate() {
        let score: Result<f64> = parts
            .iter()
            .map(|(train, held)| candidate.fit(train).map(|p| mse(p.as_ref(), held)))
            .sum::<Result<f64>>()
            .map(|s| s / folds as f64);
        match score {
            Ok(s) if s.is_finite() && best.is_none_or(|(b, _)| s < b) => best = Some((s, idx)),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, idx)) => Ok(candidates[idx].clone()),
        None => Err(last_err.unwrap_or_else(|| HtlError::InvalidInput("no grid point produced a finite score".into()))),
    }
}

/// Resolves its template by [`grid_search_cv`] on each training set, then fits.
#[derive(Clone, Debug)]
pub struct CvLearner {
    pub template: SubroutineSpec,
    pub folds: usize,
    pub seed: u64,
}

impl Learner for CvLearner {
    fn fit(&self, data: &Dataset) -> Result<SharedPredictor> {
        grid_search_cv(data, &self.template, self.folds, self.seed)?.fit(data)
    }
}
