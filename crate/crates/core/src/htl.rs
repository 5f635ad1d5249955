//! The two-stage transfer pipeline and validation-based selection of the
//! transformation function.
//!
//! Fitting proceeds in three steps: learn `f̂_so` on source data, map each
//! target pair to an auxiliary label `W_i = H_G(f̂_so(X_i), Y_i)`, learn `ŵ`
//! on `(X_i, W_i)`. The target predictor is `x ↦ G(f̂_so(x), ŵ(x))`.

use rayon::prelude::*;

use crate::data::{Dataset, DomainTag};
use crate::error::{HtlError, Result};
use crate::evaluation::mse;
use crate::predictor::{Learner, Predictor, SharedPredictor};
use crate::transform::{AuxiliaryEstimator, TransformationFunction};

/// `x ↦ G(f̂_so(x), ŵ(x))`.
#[derive(Clone)]
pub struct HtlPredictor {
    source: SharedPredictor,
    auxiliary: SharedPredictor,
    transformation: TransformationFunction,
    clipped_rows: usize,
}

impl HtlPredictor {
    pub fn new(source: SharedPredictor, auxiliary: SharedPredictor, transformation: TransformationFunction) -> Result<Self> {
        if source.dim() != auxiliary.dim() {
            return Err(HtlError::DimensionMismatch {
                expected: source.dim(),
                found: auxiliary.dim(),
            });
        }
        Ok(HtlPredictor {
            source,
            auxiliary,
            transformation,
            clipped_rows: 0,
        })
    }

    pub fn source(&self) -> &SharedPredictor {
        &self.source
    }

    pub fn auxiliary(&self) -> &SharedPredictor {
        &self.auxiliary
    }

    pub fn transformation(&self) -> &TransformationFunction {
        &self.transformation
    }

    /// Auxiliary labels clipped to `±B` while fitting.
    pub fn clipped_rows(&self) -> usize {
        self.clipped_rows
    }

    pub fn try_predict(&self, x: &[f64]) -> Result<f64> {
        self.transformation
            .eval(self.source.predict(x), self.auxiliary.predict(x))
    }
}

impl Predictor for HtlPredictor {
    /// NaN where `G` is undefined at the fitted values.
    fn predict(&self, x: &[f64]) -> f64 {
        self.try_predict(x).unwrap_or(f64::NAN)
    }

    fn dim(&self) -> usize {
        self.source.dim()
    }
}

impl std::fmt::Debug for HtlPredictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HtlPredictor")
            .field("transformation", &self.transformation)
            .field("clipped_rows", &self.clipped_rows)
            .finish_non_exhaustive()
    }
}

/// Auxiliary training set built from target data.
#[derive(Clone, Debug)]
pub struct AuxiliaryData {
    pub dataset: Dataset,
    /// Rows whose label was clipped to `±B`.
    pub clipped: usize,
}

/// `W_i = H_G(f̂_so(X_i), Y_i)`, clipped to `[−B, B]`.
pub fn construct_auxiliary(
    target: &Dataset,
    source: &dyn Predictor,
    estimator: &AuxiliaryEstimator,
) -> Result<AuxiliaryData> {
    if source.dim() != target.dim() {
        return Err(HtlError::DimensionMismatch {
            expected: source.dim(),
            found: target.dim(),
        });
    }
    let bound = estimator.transformation().aux_bound();
    let mut clipped = 0;
    let labels = target
        .rows()
        .zip(target.labels())
        .enumerate()
        .map(|(i, (x, &y))| {
            let w = estimator.apply(source.predict(x), y).map_err(|e| e.at_row(i))?;
            if !w.is_finite() {
                return Err(HtlError::InvalidInput(format!("auxiliary label {w} is not finite")).at_row(i));
            }
            if w.abs() > bound {
                clipped += 1;
                Ok(w.clamp(-bound, bound))
            } else {
                Ok(w)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AuxiliaryData {
        dataset: target.with_labels(labels.into())?,
        clipped,
    })
}

fn expect_domain(data: &Dataset, tag: DomainTag) -> Result<()> {
    if data.domain() == tag {
        Ok(())
    } else {
        Err(HtlError::InvalidInput(format!(
            "expected a {tag} sample, got a {} sample",
            data.domain()
        )))
    }
}

/// Full pipeline: fit the source stage, then [`htl_fit_with_source`].
pub fn htl_fit(
    source: &Dataset,
    target: &Dataset,
    estimator: &AuxiliaryEstimator,
    source_learner: &dyn Learner,
    aux_learner: &dyn Learner,
) -> Result<HtlPredictor> {
    expect_domain(source, DomainTag::Source)?;
    if source.dim() != target.dim() {
        return Err(HtlError::DimensionMismatch {
            expected: source.dim(),
            found: target.dim(),
        });
    }
    let f_so = source_learner.fit(source)?;
    htl_fit_with_source(f_so, target, estimator, aux_learner)
}

/// Second stage against an already fitted source predictor.
pub fn htl_fit_with_source(
    f_so: SharedPredictor,
    target: &Dataset,
    estimator: &AuxiliaryEstimator,
    aux_learner: &dyn Learner,
) -> Result<HtlPredictor> {
    expect_domain(target, DomainTag::Target)?;
    let aux = construct_auxiliary(target, f_so.as_ref(), estimator)?;
    let w = aux_learner.fit(&aux.dataset)?;
    let mut out = HtlPredictor::new(f_so, w, *estimator.transformation())?;
    out.clipped_rows = aux.clipped;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    pub chosen: TransformationFunction,
    pub chosen_index: usize,
    /// Validation MSE per candidate index; candidates that failed to fit are
    /// absent.
    pub per_candidate_validation_mse: Vec<(usize, f64)>,
    pub n_val: usize,
}

/// Fit every candidate against one shared source fit and keep the one with
/// the smallest validation MSE. Ties go to the smallest
/// [`TransformationFunction::transfer_strength`], then the lowest index.
pub fn select_transformation(
    source: &Dataset,
    target: &Dataset,
    validation: &Dataset,
    candidates: &[AuxiliaryEstimator],
    source_learner: &dyn Learner,
    aux_learner: &dyn Learner,
) -> Result<(SelectionResult, HtlPredictor)> {
    if candidates.is_empty() {
        return Err(HtlError::InvalidInput("no candidate transformations".into()));
    }
    expect_domain(source, DomainTag::Source)?;
    expect_domain(validation, DomainTag::Validation)?;
    if validation.dim() != target.dim() || source.dim() != target.dim() {
        return Err(HtlError::DimensionMismatch {
            expected: target.dim(),
            found: if validation.dim() != target.dim() { validation.dim() } else { source.dim() },
        });
    }
    let f_so = source_learner.fit(source)?;
    select_with_source(f_so, target, validation, candidates, aux_learner)
}

/// [`select_transformation`] against an already fitted source predictor.
pub fn select_with_source(
    f_so: SharedPredictor,
    target: &Dataset,
    validation: &Dataset,
    candidates: &[AuxiliaryEstimator],
    aux_learner: &dyn Learner,
) -> Result<(SelectionResult, HtlPredictor)> {
    if candidates.is_empty() {
        return Err(HtlError::InvalidInput("no candidate transformations".into()));
    }
    expect_domain(validation, DomainTag::Validation)?;
    let fits: Vec<Result<(HtlPredictor, f64)>> = candidates
        .par_iter()
        .map(|est| {
            let p = htl_fit_with_source(f_so.clone(), target, est, aux_learner)?;
            let v = mse(&p, validation);
            Ok((p, v))
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    let mut scores = Vec::new();
    let mut last_err = None;
    for (i, fit) in fits.iter().enumerate() {
        match fit {
            Ok((_, v)) => {
                scores.push((i, *v));
                if !v.is_finite() {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((j, bv)) => {
                        *v < bv
                            || (*v == bv
                                && candidates[i].transformation().transfer_strength()
                                    < candidates[j].transformation().transfer_strength())
                    }
                };
                if better {
                    best = Some((i, *v));
                }
            }
            Err(e) => last_err = Some(e.to_string()),
        }
    }
    let (idx, _) = best.ok_or_else(|| {
        HtlError::InvalidInput(format!(
            "no candidate produced a finite validation error{}",
            last_err.map(|e| format!(" (last failure: {e})")).unwrap_or_default()
        ))
    })?;
    let chosen = fits.into_iter().nth(idx).expect("index in range").expect("chosen fit succeeded").0;
    Ok((
        SelectionResult {
            chosen: *candidates[idx].transformation(),
            chosen_index: idx,
            per_candidate_validation_mse: scores,
            n_val: validation.n(),
        },
        chosen,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::FnPredictor;
    use crate::smoothing::SmoothingKernel;
    use crate::subroutine::SubroutineSpec;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn grid(n: usize, tag: DomainTag, f: impl Fn(f64) -> f64) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        let ys = rows.iter().map(|r| f(r[0])).collect();
        Dataset::from_rows(&rows, ys, tag).unwrap()
    }

    struct Counting<L> {
        inner: L,
        calls: AtomicUsize,
    }

    impl<L: Learner> Learner for Counting<L> {
        fn fit(&self, data: &Dataset) -> Result<SharedPredictor> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.fit(data)
        }
    }

    #[test]
    fn scale_auxiliary_labels() {
        let target = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![6.0, 4.0], DomainTag::Target).unwrap();
        let src = FnPredictor::new(1, |_: &[f64]| 2.0);
        let est = AuxiliaryEstimator::direct(TransformationFunction::scale(0.0)).unwrap();
        let aux = construct_auxiliary(&target, &src, &est).unwrap();
        assert_eq!(aux.dataset.labels().to_vec(), vec![3.0, 2.0]);
    }

    #[test]
    fn offset_auxiliary_labels() {
        let target = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![3.0, 5.0], DomainTag::Target).unwrap();
        let src = FnPredictor::new(1, |x: &[f64]| 1.0 + x[0]);
        let est = AuxiliaryEstimator::direct(TransformationFunction::offset(1.0)).unwrap();
        let aux = construct_auxiliary(&target, &src, &est).unwrap();
        assert_eq!(aux.dataset.labels().to_vec(), vec![2.0, 3.0]);
    }

    #[test]
    fn auxiliary_labels_clip_to_bound() {
        let target = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![10.0, -0.5], DomainTag::Target).unwrap();
        let src = FnPredictor::new(1, |_: &[f64]| 0.0);
        let tf = TransformationFunction::non_transfer().with_bounds(1.0, 2.0).unwrap();
        let aux = construct_auxiliary(&target, &src, &AuxiliaryEstimator::direct(tf).unwrap()).unwrap();
        assert_eq!(aux.dataset.labels().to_vec(), vec![2.0, -0.5]);
        assert_eq!(aux.clipped, 1);
    }

    #[test]
    fn failing_row_is_named() {
        let target = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![1.0, 1.0], DomainTag::Target).unwrap();
        let src = FnPredictor::new(1, |x: &[f64]| x[0]);
        let est = AuxiliaryEstimator::direct_noiseless(TransformationFunction::loglinear(1.0).unwrap());
        match construct_auxiliary(&target, &src, &est) {
            Err(HtlError::AtRow { row: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn noiseless_offset_pipeline_recovers_target() {
        let source = grid(200, DomainTag::Source, |x| x);
        let target = grid(50, DomainTag::Target, |x| x + 1.0);
        let ks = SubroutineSpec::ks(SmoothingKernel::Epanechnikov, 0.05);
        let est = AuxiliaryEstimator::direct(TransformationFunction::offset(1.0)).unwrap();
        let p = htl_fit(&source, &target, &est, &ks, &ks).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((p.predict(&[x]) - (x + 1.0)).abs() <= 0.05, "x = {x}");
        }
    }

    #[test]
    fn non_transfer_equals_target_only_fit() {
        let source = grid(30, DomainTag::Source, |x| 5.0 * x);
        let target = grid(40, DomainTag::Target, |x| (6.0 * x).sin());
        let ks = SubroutineSpec::ks(SmoothingKernel::TruncatedGaussian, 0.1);
        let est = AuxiliaryEstimator::direct(TransformationFunction::non_transfer()).unwrap();
        let htl = htl_fit(&source, &target, &est, &ks, &ks).unwrap();
        let only = ks.fit(&target).unwrap();
        for i in 0..50 {
            let x = [i as f64 / 49.0];
            assert_eq!(htl.predict(&x), only.predict(&x));
        }
    }

    #[test]
    fn domain_tags_are_checked() {
        let a = grid(10, DomainTag::Target, |x| x);
        let ks = SubroutineSpec::ks(SmoothingKernel::Boxcar, 0.2);
        let est = AuxiliaryEstimator::direct(TransformationFunction::non_transfer()).unwrap();
        assert!(htl_fit(&a, &a, &est, &ks, &ks).is_err());
    }

    #[test]
    fn selection_fits_source_once() {
        let source = grid(100, DomainTag::Source, |x| x);
        let target = grid(30, DomainTag::Target, |x| x + 0.5);
        let val = grid(20, DomainTag::Validation, |x| x + 0.5);
        let ks = SubroutineSpec::ks(SmoothingKernel::Epanechnikov, 0.1);
        let so = Counting {
            inner: ks.clone(),
            calls: AtomicUsize::new(0),
        };
        let w = Counting {
            inner: ks,
            calls: AtomicUsize::new(0),
        };
        let cands: Vec<_> = [-1.0, 0.0, 1.0]
            .iter()
            .map(|&a| AuxiliaryEstimator::direct(TransformationFunction::offset(a)).unwrap())
            .collect();
        let (sel, _) = select_transformation(&source, &target, &val, &cands, &so, &w).unwrap();
        assert_eq!(so.calls.load(Ordering::SeqCst), 1);
        assert_eq!(w.calls.load(Ordering::SeqCst), 3);
        assert_eq!(sel.per_candidate_validation_mse.len(), 3);
        assert_eq!(sel.n_val, 20);
    }

    #[test]
    fn ties_prefer_weaker_transfer() {
        // A constant-zero source makes every offset candidate identical.
        let f_so: SharedPredictor = Arc::new(FnPredictor::new(1, |_: &[f64]| 0.0));
        let target = grid(10, DomainTag::Target, |x| x);
        let val = grid(5, DomainTag::Validation, |x| x);
        let ks = SubroutineSpec::ks(SmoothingKernel::Boxcar, 0.3);
        let cands: Vec<_> = [2.0, -1.0, 0.5]
            .iter()
            .map(|&a| AuxiliaryEstimator::direct(TransformationFunction::offset(a)).unwrap())
            .collect();
        let (sel, _) = select_with_source(f_so, &target, &val, &cands, &ks).unwrap();
        assert_eq!(sel.chosen_index, 2);
    }
}
