//! Hypothesis transfer learning through transformation functions.
//!
//! A source model `f̂_so` is combined with an auxiliary model `ŵ` learned on
//! target data through a known transformation `G`, giving the target
//! predictor `G(f̂_so(x), ŵ(x))`. Either stage can use Nadaraya–Watson
//! kernel smoothing or kernel ridge regression.

// `!(x > 0.0)` style guards are deliberate: they reject NaN alongside
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod evaluation;
pub mod htl;
pub mod predictor;
pub mod ridge;
pub mod smoothing;
pub mod subroutine;
pub mod transform;

pub use data::{
    derive_seed, doppler, generate_synthetic, load_csv, split, write_csv, Dataset, DomainTag, FunctionSpec,
    LabelColumn, Sampler, Split, SyntheticSpec,
};
pub use error::{HtlError, Result};
pub use evaluation::{
    excess_risk_mc, metric_report, mse, query_grid, r_squared, rate_slope, stability_probe, Coefficients,
    MetricReport, MonteCarloEstimate, ProbeOutcome, RateFit,
};
pub use htl::{
    construct_auxiliary, htl_fit, htl_fit_with_source, select_transformation, select_with_source, AuxiliaryData,
    HtlPredictor, SelectionResult,
};
pub use predictor::{FnPredictor, Learner, Predictor, SharedPredictor, Truth};
pub use ridge::{gram, lambda_rule, median_heuristic, KrrPredictor, RkhsKernel};
pub use smoothing::{bandwidth_rule, bandwidth_rule_scaled, KsPredictor, SmoothingKernel};
pub use subroutine::{
    fold_assignment, grid_search_cv, Bandwidth, CvLearner, KernelChoice, Regularization, SubroutineSpec,
};
pub use transform::{
    estimate_sigma2, quantize_offset_family, AuxiliaryEstimator, EstimatorMode, Family, QuantizedFamily,
    TransformationFunction, SCALE_GUARD,
};
