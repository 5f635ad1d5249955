//! Experiment execution.
//!
//! Each seed derives independent streams for source, target, validation and
//! test draws, Monte Carlo inputs and cross-validation folds. Target sets of
//! different sizes are prefixes of one draw, so a sweep over `n_ta` nests.

use std::sync::{Arc, Mutex};

use htl_core::{
    derive_seed, excess_risk_mc, generate_synthetic, grid_search_cv, htl_fit_with_source, load_csv, metric_report,
    rate_slope, select_with_source, AuxiliaryEstimator, Dataset, DomainTag, HtlError, Learner, Predictor, Sampler,
    SharedPredictor, SubroutineSpec, SyntheticSpec, Truth,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind, MethodConfig, MethodKind};
use crate::report::{
    aggregate_rows, build_table, CandidateScore, ExperimentReport, MethodRate, MethodRow, RowStatus,
    SelectionRecord, SeriesPoint,
};
use crate::CliError;

/// Method label of the candidate chosen in a selection experiment.
pub const SELECTED_LABEL: &str = "htl_selected";

const SYNTHETIC_TEST_ROWS: usize = 1000;

/// Stream labels passed to [`derive_seed`].
pub mod stream {
    pub const SOURCE: u64 = 1;
    pub const TARGET: u64 = 2;
    pub const VALIDATION: u64 = 3;
    pub const TEST: u64 = 4;
    pub const MONTE_CARLO: u64 = 5;
    pub const SOURCE_CV: u64 = 6;
    pub const TARGET_CV: u64 = 7;
}

/// Samples used by one seed.
#[derive(Clone, Debug)]
pub struct SeedData {
    pub source: Dataset,
    /// Largest target training set; smaller ones are its prefixes.
    pub target: Dataset,
    pub validation: Option<Dataset>,
    pub test: Dataset,
}

/// Draw the synthetic samples for `seed` exactly as `run` does.
pub fn synthetic_seed_data(cfg: &ExperimentConfig, spec: &SyntheticSpec, seed: u64) -> Result<SeedData, HtlError> {
    let n_so = cfg.sizes.n_so.expect("validated");
    let n_val = cfg.sizes.n_val;
    Ok(SeedData {
        source: generate_synthetic(spec, n_so, DomainTag::Source, derive_seed(seed, stream::SOURCE))?,
        target: generate_synthetic(spec, cfg.sizes.max_target(), DomainTag::Target, derive_seed(seed, stream::TARGET))?,
        validation: (n_val > 0)
            .then(|| generate_synthetic(spec, n_val, DomainTag::Validation, derive_seed(seed, stream::VALIDATION)))
            .transpose()?,
        test: generate_synthetic(
            spec,
            cfg.sizes.n_test.unwrap_or(SYNTHETIC_TEST_ROWS),
            DomainTag::Target,
            derive_seed(seed, stream::TEST),
        )?,
    })
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Partition CSV tables for `seed`: the target rows are shuffled into
/// training pool, validation and test; the source is optionally subsampled.
fn csv_seed_data(cfg: &ExperimentConfig, source: &Dataset, target: &Dataset, seed: u64) -> Result<SeedData, CliError> {
    let n_pool = cfg.sizes.max_target();
    let n_val = cfg.sizes.n_val;
    let remaining = target.n().checked_sub(n_pool + n_val).filter(|&r| r > 0).ok_or_else(|| {
        CliError::Config(format!(
            "target file has {} rows; need more than n_ta + n_val = {}",
            target.n(),
            n_pool + n_val
        ))
    })?;
    let n_test = match cfg.sizes.n_test {
        Some(t) if t > remaining => {
            return Err(CliError::Config(format!("n_test = {t} exceeds the {remaining} rows left for testing")))
        }
        Some(t) => t,
        None => remaining,
    };
    let order = shuffled(target.n(), derive_seed(seed, stream::TARGET));
    let (pool, rest) = order.split_at(n_pool);
    let (val, rest) = rest.split_at(n_val);
    let source = match cfg.sizes.n_so {
        Some(n) if n > source.n() => {
            return Err(CliError::Config(format!("n_so = {n} exceeds the {} source rows", source.n())))
        }
        Some(n) => source.select(&shuffled(source.n(), derive_seed(seed, stream::SOURCE))[..n])?,
        None => source.clone(),
    };
    Ok(SeedData {
        source,
        target: target.select(pool)?,
        validation: (n_val > 0)
            .then(|| target.select(val).map(|d| d.with_domain(DomainTag::Validation)))
            .transpose()?,
        test: target.select(&rest[..n_test])?,
    })
}

/// Cross-validated learner that remembers the hyperparameter it settled on.
struct RecordingCv {
    template: SubroutineSpec,
    folds: usize,
    seed: u64,
    resolved: Mutex<Option<f64>>,
}

impl RecordingCv {
    fn new(template: &SubroutineSpec, folds: usize, seed: u64) -> Self {
        RecordingCv {
            template: template.clone(),
            folds,
            seed,
            resolved: Mutex::new(None),
        }
    }

    fn resolved(&self) -> Option<f64> {
        *self.resolved.lock().expect("not poisoned")
    }
}

impl Learner for RecordingCv {
    fn fit(&self, data: &Dataset) -> htl_core::Result<SharedPredictor> {
        let spec = grid_search_cv(data, &self.template, self.folds, self.seed)?;
        *self.resolved.lock().expect("not poisoned") = spec.hyperparameter_for(data).ok();
        spec.fit(data)
    }
}

/// What the evaluation of a fitted predictor is compared against.
struct Evaluation<'a> {
    test: &'a Dataset,
    truth: Option<(&'a Truth, &'a Sampler)>,
    n_mc: usize,
    mc_seed: u64,
}

impl Evaluation<'_> {
    fn row(&self, method: &str, seed: u64, n_ta: usize, pred: &dyn Predictor) -> MethodRow {
        let metrics = metric_report(pred, self.test);
        if !metrics.mse.is_finite() {
            return MethodRow::failed(method, seed, n_ta, "predictions are not finite on the test set".into());
        }
        let excess_risk = match self.truth {
            Some((truth, sampler)) => match excess_risk_mc(pred, truth, sampler, self.n_mc, self.mc_seed) {
                Ok(e) => Some(e),
                Err(e) => return MethodRow::failed(method, seed, n_ta, e.to_string()),
            },
            None => None,
        };
        MethodRow {
            method: method.to_string(),
            seed,
            n_ta,
            status: RowStatus::Ok,
            error: None,
            metrics: Some(metrics),
            excess_risk,
            hyperparameter: None,
            clipped_rows: None,
        }
    }
}

struct SeedOutput {
    seed: u64,
    source_hyperparameter: Option<f64>,
    rows: Vec<MethodRow>,
    selections: Vec<SelectionRecord>,
    /// Fitted predictors at the largest target size, for plot series.
    fitted: Vec<(String, SharedPredictor)>,
}

/// Fit the target-side part of one method.
fn fit_method(
    cfg: &ExperimentConfig,
    method: &MethodConfig,
    seed: u64,
    data: &SeedData,
    target: &Dataset,
    f_so: &Result<SharedPredictor, String>,
) -> Result<(SharedPredictor, Option<f64>, Option<usize>), String> {
    let stage = method.stage.as_ref().unwrap_or(&cfg.target_stage);
    let learner = RecordingCv::new(stage, cfg.cv_folds, derive_seed(seed, stream::TARGET_CV));
    let source = || f_so.clone().map_err(|e| format!("source fit failed: {e}"));
    match method.kind {
        MethodKind::OnlyTarget => {
            let p = learner.fit(target).map_err(|e| e.to_string())?;
            Ok((p, learner.resolved(), None))
        }
        MethodKind::OnlySource => Ok((source()?, None, None)),
        MethodKind::Combined => {
            let pooled = data.source.concat(target).map_err(|e| e.to_string())?;
            let p = learner.fit(&pooled).map_err(|e| e.to_string())?;
            Ok((p, learner.resolved(), None))
        }
        MethodKind::Htl => {
            let est = method
                .transformation
                .as_ref()
                .expect("validated")
                .estimator()
                .map_err(|e| e.to_string())?;
            let h = htl_fit_with_source(source()?, target, &est, &learner).map_err(|e| e.to_string())?;
            let clipped = h.clipped_rows();
            Ok((Arc::new(h), learner.resolved(), Some(clipped)))
        }
    }
}

fn run_seed(
    cfg: &ExperimentConfig,
    seed: u64,
    data: SeedData,
    truth: Option<(&Truth, &Sampler)>,
    candidates: &[AuxiliaryEstimator],
) -> Result<SeedOutput, CliError> {
    let eval = Evaluation {
        test: &data.test,
        truth,
        n_mc: cfg.n_mc,
        mc_seed: derive_seed(seed, stream::MONTE_CARLO),
    };
    let source_learner = RecordingCv::new(&cfg.source_stage, cfg.cv_folds, derive_seed(seed, stream::SOURCE_CV));
    let f_so = source_learner.fit(&data.source).map_err(|e| e.to_string());
    let sizes = cfg.sizes.target_sizes();
    let largest = cfg.sizes.max_target();
    let mut out = SeedOutput {
        seed,
        source_hyperparameter: source_learner.resolved(),
        rows: Vec::new(),
        selections: Vec::new(),
        fitted: Vec::new(),
    };

    for &n_ta in &sizes {
        let target = data.target.head(n_ta)?;
        for method in &cfg.methods {
            let label = method.label();
            match fit_method(cfg, method, seed, &data, &target, &f_so) {
                Ok((p, hyper, clipped)) => {
                    let mut row = eval.row(&label, seed, n_ta, p.as_ref());
                    if row.status == RowStatus::Ok {
                        row.hyperparameter = hyper;
                        row.clipped_rows = clipped;
                    }
                    out.rows.push(row);
                    if n_ta == largest {
                        out.fitted.push((label, p));
                    }
                }
                Err(e) => out.rows.push(MethodRow::failed(&label, seed, n_ta, e)),
            }
        }

        if cfg.experiment_kind == ExperimentKind::Selection {
            let validation = data.validation.as_ref().ok_or(HtlError::EmptyValidation)?;
            let outcome = f_so
                .clone()
                .map_err(|e| format!("source fit failed: {e}"))
                .and_then(|f| {
                    // Candidate-independent hyperparameters: any grid is resolved once
                    // on the target sample before the candidates are compared.
                    let stage = grid_search_cv(&target, &cfg.target_stage, cfg.cv_folds, derive_seed(seed, stream::TARGET_CV))
                        .map_err(|e| e.to_string())?;
                    let hyper = stage.hyperparameter_for(&target).ok();
                    select_with_source(f, &target, validation, candidates, &stage)
                        .map(|(sel, p)| (sel, p, hyper))
                        .map_err(|e| e.to_string())
                });
            match outcome {
                Ok((sel, p, hyper)) => {
                    let mut row = eval.row(SELECTED_LABEL, seed, n_ta, &p);
                    if row.status == RowStatus::Ok {
                        row.hyperparameter = hyper;
                        row.clipped_rows = Some(p.clipped_rows());
                    }
                    out.rows.push(row);
                    out.selections.push(SelectionRecord {
                        seed,
                        n_ta,
                        chosen: sel.chosen.to_string(),
                        chosen_index: sel.chosen_index,
                        n_val: sel.n_val,
                        candidates: sel
                            .per_candidate_validation_mse
                            .iter()
                            .map(|&(index, validation_mse)| CandidateScore {
                                index,
                                label: candidates[index].transformation().to_string(),
                                validation_mse,
                            })
                            .collect(),
                    });
                    if n_ta == largest {
                        out.fitted.push((SELECTED_LABEL.to_string(), Arc::new(p)));
                    }
                }
                Err(e) => out.rows.push(MethodRow::failed(SELECTED_LABEL, seed, n_ta, e)),
            }
        }
    }
    Ok(out)
}

fn series(
    cfg: &ExperimentConfig,
    first: &SeedOutput,
    first_data_range: Option<(f64, f64)>,
    truth: Option<&Truth>,
    report_rows: &[crate::report::Aggregate],
) -> Vec<SeriesPoint> {
    let mut out = Vec::new();
    for a in report_rows {
        if let Some(m) = a.mse {
            out.push(SeriesPoint {
                series: "mse_vs_n_ta".into(),
                method: a.method.clone(),
                x: a.n_ta as f64,
                y: m.mean,
            });
        }
    }
    for a in report_rows {
        if let Some(e) = a.excess_risk {
            out.push(SeriesPoint {
                series: "excess_risk_vs_n_ta".into(),
                method: a.method.clone(),
                x: a.n_ta as f64,
                y: e.mean,
            });
        }
    }
    if let Some((lo, hi)) = first_data_range {
        let grid = htl_core::query_grid(1, lo, hi, cfg.series_points, 0);
        if let Some(t) = truth {
            out.extend(grid.iter().map(|x| SeriesPoint {
                series: "prediction".into(),
                method: "truth".into(),
                x: x[0],
                y: t.predict(x),
            }));
        }
        for (label, p) in &first.fitted {
            out.extend(grid.iter().map(|x| SeriesPoint {
                series: "prediction".into(),
                method: label.clone(),
                x: x[0],
                y: p.predict(x),
            }));
        }
    }
    out
}

/// Run every seed and assemble the report. Method failures are recorded in
/// the report; only configuration and data errors abort.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    cfg.validate()?;
    let spec = cfg.synthetic();
    let truth = spec.as_ref().map(|s| Truth {
        function: s.target_fn.clone(),
        dim: s.sampler.dim,
    });
    let candidates = match (&cfg.candidates, cfg.experiment_kind) {
        (Some(c), ExperimentKind::Selection) => c.estimators()?,
        _ => Vec::new(),
    };
    let tables = match &cfg.files {
        Some(f) if !cfg.experiment_kind.is_synthetic() => Some((
            load_csv(&f.source, &f.label_column, DomainTag::Source)?,
            load_csv(&f.target, &f.label_column, DomainTag::Target)?,
        )),
        _ => None,
    };
    if let Some((s, t)) = &tables {
        if s.dim() != t.dim() {
            return Err(CliError::Config(format!(
                "source has {} features but target has {}",
                s.dim(),
                t.dim()
            )));
        }
    }

    let seed_data = |seed: u64| -> Result<SeedData, CliError> {
        match (&spec, &tables) {
            (Some(s), _) => Ok(synthetic_seed_data(cfg, s, seed)?),
            (None, Some((s, t))) => csv_seed_data(cfg, s, t, seed),
            (None, None) => unreachable!("validated"),
        }
    };
    let truth_ref = spec.as_ref().zip(truth.as_ref()).map(|(s, t)| (t, &s.sampler));

    let outputs: Vec<SeedOutput> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed, seed_data(seed)?, truth_ref, &candidates))
        .collect::<Result<_, CliError>>()?;

    let rows: Vec<MethodRow> = outputs.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    let aggregates = aggregate_rows(&rows);
    let rate_fits = if cfg.experiment_kind == ExperimentKind::RateSweep {
        let mut methods: Vec<&str> = Vec::new();
        for a in &aggregates {
            if !methods.contains(&a.method.as_str()) {
                methods.push(&a.method);
            }
        }
        methods
            .into_iter()
            .filter_map(|m| {
                let points: Option<Vec<(usize, f64)>> = aggregates
                    .iter()
                    .filter(|a| a.method == m)
                    .map(|a| a.excess_risk.map(|e| (a.n_ta, e.mean)))
                    .collect();
                let fit = rate_slope(&points?).ok()?;
                Some(MethodRate {
                    method: m.to_string(),
                    fit,
                })
            })
            .collect()
    } else {
        Vec::new()
    };

    let first = &outputs[0];
    let range = match (&spec, &tables) {
        (Some(s), _) if s.sampler.dim == 1 => Some((s.sampler.low, s.sampler.high)),
        (None, Some((_, t))) if t.dim() == 1 => {
            let col = t.features().column(0);
            Some((col.fold(f64::INFINITY, |a, &b| a.min(b)), col.fold(f64::NEG_INFINITY, |a, &b| a.max(b))))
        }
        _ => None,
    };
    let series = series(cfg, first, range, truth.as_ref(), &aggregates);

    Ok(ExperimentReport {
        toolkit: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment_kind: cfg.experiment_kind,
        config: cfg.clone(),
        source_hyperparameters: outputs.iter().map(|o| (o.seed, o.source_hyperparameter)).collect(),
        failures: rows.iter().filter(|r| r.status == RowStatus::Failed).count(),
        table: build_table(&aggregates),
        rows,
        aggregates,
        rate_fits,
        selections: outputs.into_iter().flat_map(|o| o.selections).collect(),
        series,
    })
}
