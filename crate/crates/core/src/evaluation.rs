//! Test-set metrics, Monte Carlo excess risk, convergence-rate fits and the
//! label-perturbation stability probe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sampler};
use crate::error::{HtlError, Result};
use crate::predictor::{Predictor, SharedPredictor};

/// Mean squared prediction error on `data`.
pub fn mse(pred: &dyn Predictor, data: &Dataset) -> f64 {
    let ss: f64 = data
        .rows()
        .zip(data.labels())
        .map(|(x, &y)| (pred.predict(x) - y).powi(2))
        .sum();
    ss / data.n() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: f64,
    /// Absent when the evaluation labels are constant.
    pub r_squared: Option<f64>,
    pub ss_res: f64,
    pub ss_tot: f64,
    pub n_eval: usize,
}

pub fn metric_report(pred: &dyn Predictor, data: &Dataset) -> MetricReport {
    let n = data.n();
    let mean = data.labels().sum() / n as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, &y) in data.rows().zip(data.labels()) {
        ss_res += (pred.predict(x) - y).powi(2);
        ss_tot += (y - mean).powi(2);
    }
    MetricReport {
        mse: ss_res / n as f64,
        r_squared: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
        ss_res,
        ss_tot,
        n_eval: n,
    }
}

/// `1 − SS_res / SS_tot`.
pub fn r_squared(pred: &dyn Predictor, data: &Dataset) -> Result<f64> {
    metric_report(pred, data).r_squared.ok_or(HtlError::DegenerateLabels)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// `E[(f̂(X) − f(X))²]` over `n_mc` draws of `X` from `sampler`.
pub fn excess_risk_mc(
    pred: &dyn Predictor,
    truth: &dyn Predictor,
    sampler: &Sampler,
    n_mc: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    sampler.validate()?;
    if n_mc < 2 {
        return Err(HtlError::InvalidInput("Monte Carlo needs at least 2 draws".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; sampler.dim];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_mc {
        sampler.sample_point(&mut rng, &mut x);
        let e = (pred.predict(&x) - truth.predict(&x)).powi(2);
        sum += e;
        sum_sq += e * e;
    }
    let n = n_mc as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
    })
}

/// Least-squares line through `(ln n, ln risk)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(usize, f64)>,
    pub slope: f64,
    pub intercept: f64,
}

pub fn rate_slope(points: &[(usize, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(HtlError::InvalidInput("rate fit needs at least 3 sample sizes".into()));
    }
    if let Some(&(n, r)) = points.iter().find(|&&(n, r)| n == 0 || !(r > 0.0 && r.is_finite())) {
        return Err(HtlError::InvalidInput(format!(
            "rate fit needs positive sizes and risks, got ({n}, {r})"
        )));
    }
    let mut sizes: Vec<usize> = points.iter().map(|p| p.0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() != points.len() {
        return Err(HtlError::InvalidInput("rate fit needs distinct sample sizes".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept: my - slope * mx,
    })
}

/// Where the `c_i` of a stability bound come from.
#[derive(Clone, Debug)]
pub enum Coefficients {
    /// Fixed coefficients, the same at every query.
    Fixed(Vec<f64>),
    /// [`Predictor::stability_coeffs`] of the predictor fitted on the base data.
    FromPredictor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    /// `sup_x |f(x) − f̃(x)|` over the query grid.
    pub observed_sup: f64,
    /// `sup_x Σ c_i(x) |Y_i − Ỹ_i|` over the query grid.
    pub bound: f64,
    /// Whether every query satisfied its own bound.
    pub holds: bool,
}

/// Absolute slack for floating-point rounding in the stability comparison.
pub const PROBE_SLACK: f64 = 1e-12;

/// Fit on `base` and on `base` with labels replaced by `perturbed`, and
/// compare the prediction gap to the stability bound at each query.
pub fn stability_probe(
    fit: &dyn Fn(&Dataset) -> Result<SharedPredictor>,
    base: &Dataset,
    perturbed: &[f64],
    coefficients: &Coefficients,
    queries: &[Vec<f64>],
) -> Result<ProbeOutcome> {
    if perturbed.len() != base.n() {
        return Err(HtlError::DimensionMismatch {
            expected: base.n(),
            found: perturbed.len(),
        });
    }
    let other = base.with_labels(perturbed.iter().copied().collect())?;
    let f = fit(base)?;
    let g = fit(&other)?;
    let deltas: Vec<f64> = base.labels().iter().zip(perturbed).map(|(a, b)| (a - b).abs()).collect();

    let mut outcome = ProbeOutcome {
        observed_sup: 0.0,
        bound: 0.0,
        holds: true,
    };
    for x in queries {
        let c = match coefficients {
            Coefficients::Fixed(c) => c.clone(),
            Coefficients::FromPredictor => f
                .stability_coeffs(x)
                .ok_or(HtlError::UndefinedStability("predictor reports no coefficients"))?,
        };
        if c.len() != deltas.len() {
            return Err(HtlError::DimensionMismatch {
                expected: deltas.len(),
                found: c.len(),
            });
        }
        let bound: f64 = c.iter().zip(&deltas).map(|(c, d)| c * d).sum();
        let gap = (f.predict(x) - g.predict(x)).abs();
        outcome.observed_sup = outcome.observed_sup.max(gap);
        outcome.bound = outcome.bound.max(bound);
        if !(gap <= bound + PROBE_SLACK) {
            outcome.holds = false;
        }
    }
    Ok(outcome)
}

/// `count` query points in `[lo, hi]^dim`: equispaced for `dim = 1`,
/// seeded uniform draws otherwise.
pub fn query_grid(dim: usize, lo: f64, hi: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 1 {
        let step = if count > 1 { (hi - lo) / (count - 1) as f64 } else { 0.0 };
        return (0..count).map(|i| vec![lo + step * i as f64]).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random_range(lo..=hi)).collect())
        .collect()
}
