use std::fmt;
use std::sync::Arc;

use crate::data::{Dataset, FunctionSpec};
use crate::error::Result;

/// A fitted regression function.
///
/// `predict` panics if `x.len()` differs from [`Predictor::dim`].
pub trait Predictor: Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;

    fn dim(&self) -> usize;

    /// Coefficients `c_i` bounding how far the prediction at `x` moves when
    /// training label `i` moves: `|f(x) − f̃(x)| ≤ Σ c_i |Y_i − Ỹ_i|`.
    fn stability_coeffs(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn predict_rows(&self, data: &Dataset) -> Vec<f64> {
        data.rows().map(|x| self.predict(x)).collect()
    }
}

pub type SharedPredictor = Arc<dyn Predictor>;

/// Anything that turns a training set into a predictor.
pub trait Learner: Send + Sync {
    fn fit(&self, data: &Dataset) -> Result<SharedPredictor>;
}

/// A closure viewed as a predictor; used for known truths and test doubles.
pub struct FnPredictor<F> {
    f: F,
    dim: usize,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnPredictor<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnPredictor { f, dim }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Predictor for FnPredictor<F> {
    fn predict(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

impl<F> fmt::Debug for FnPredictor<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPredictor").field("dim", &self.dim).finish()
    }
}

/// A [`FunctionSpec`] evaluated on `dim`-dimensional inputs.
#[derive(Clone, Debug)]
pub struct Truth {
    pub function: FunctionSpec,
    pub dim: usize,
}

impl Predictor for Truth {
    fn predict(&self, x: &[f64]) -> f64 {
        self.function.eval(x)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
