//! Datasets, synthetic generators, CSV ingestion and seeded splitting.
//!
//! Every randomized routine draws from a [`ChaCha8Rng`] seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`. Synthetic rows are drawn in order:
//! for each row, `d` uniform coordinates, then one standard normal for the
//! label noise (scaled by the domain's standard deviation). Reports built on
//! these routines are therefore bit-reproducible on a given platform.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{HtlError, Result};

/// Which distribution a sample was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Source,
    Target,
    Validation,
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainTag::Source => "source",
            DomainTag::Target => "target",
            DomainTag::Validation => "validation",
        })
    }
}

/// A feature matrix with its label vector.
///
/// Rows are stored contiguously. `x_bound` and `y_bound` are the largest row
/// norm and largest absolute label unless tighter-checked declared bounds are
/// attached with [`Dataset::with_declared_bounds`].
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Array1<f64>,
    domain: DomainTag,
    x_bound: f64,
    y_bound: f64,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Array1<f64>, domain: DomainTag) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(HtlError::InvalidInput("dataset must have at least one row".into()));
        }
        if d == 0 {
            return Err(HtlError::InvalidInput("dataset must have at least one feature".into()));
        }
        if labels.len() != n {
            return Err(HtlError::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        if features.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(HtlError::InvalidInput("features and labels must be finite".into()));
        }
        let features = features.as_standard_layout().into_owned();
        let x_bound = features
            .axis_iter(Axis(0))
            .map(|r| r.dot(&r).sqrt())
            .fold(0.0, f64::max);
        let y_bound = labels.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
        Ok(Dataset {
            features,
            labels,
            domain,
            x_bound,
            y_bound,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>, domain: DomainTag) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(HtlError::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| HtlError::InvalidInput(e.to_string()))?;
        Dataset::new(features, Array1::from(labels), domain)
    }

    /// Attach declared bounds; a zero bound means "not declared".
    pub fn with_declared_bounds(mut self, x_bound: f64, y_bound: f64) -> Result<Self> {
        if !(x_bound >= 0.0) || !(y_bound >= 0.0) {
            return Err(HtlError::InvalidInput("bounds must be nonnegative".into()));
        }
        if x_bound > 0.0 && self.x_bound > x_bound {
            return Err(HtlError::InvalidInput(format!(
                "row norm {} exceeds declared bound {x_bound}",
                self.x_bound
            )));
        }
        if y_bound > 0.0 && self.y_bound > y_bound {
            return Err(HtlError::InvalidInput(format!(
                "label magnitude {} exceeds declared bound {y_bound}",
                self.y_bound
            )));
        }
        if x_bound > 0.0 {
            self.x_bound = x_bound;
        }
        if y_bound > 0.0 {
            self.y_bound = y_bound;
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        let all = self.features.as_slice().expect("features are kept in standard layout");
        &all[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn domain(&self) -> DomainTag {
        self.domain
    }

    pub fn x_bound(&self) -> f64 {
        self.x_bound
    }

    pub fn y_bound(&self) -> f64 {
        self.y_bound
    }

    pub fn with_domain(mut self, domain: DomainTag) -> Self {
        self.domain = domain;
        self
    }

    /// Same features, new labels.
    pub fn with_labels(&self, labels: Array1<f64>) -> Result<Self> {
        Dataset::new(self.features.clone(), labels, self.domain)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let features = self.features.select(Axis(0), indices);
        let labels = self.labels.select(Axis(0), indices);
        Dataset::new(features, labels, self.domain)
    }

    /// Rows of `self` followed by rows of `other`; keeps `self`'s tag.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(HtlError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), other.features.view()])
            .map_err(|e| HtlError::InvalidInput(e.to_string()))?;
        let labels = ndarray::concatenate(Axis(0), &[self.labels.view(), other.labels.view()])
            .map_err(|e| HtlError::InvalidInput(e.to_string()))?;
        Dataset::new(features, labels, self.domain)
    }

    /// The first `k` rows.
    pub fn head(&self, k: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..k.min(self.n())).collect();
        self.select(&idx)
    }
}

/// The Doppler test function `sqrt(x(1-x)) sin(2.1π / (x + 0.05))` on `[0, 1]`.
pub fn doppler(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(HtlError::domain("x", x, "[0, 1]"));
    }
    Ok(doppler_unchecked(x))
}

fn doppler_unchecked(x: f64) -> f64 {
    (x * (1.0 - x)).sqrt() * (2.1 * std::f64::consts::PI / (x + 0.05)).sin()
}

/// A regression function described as data so experiment configs can name it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionSpec {
    /// Doppler function of the first coordinate.
    Doppler,
    Constant(f64),
    /// `intercept + Σ weights[j]·x[j]`; missing weights count as zero.
    Linear {
        #[serde(default)]
        weights: Vec<f64>,
        #[serde(default)]
        intercept: f64,
    },
    /// `amplitude · sin(frequency · <direction, x> + phase)`.
    Sine {
        frequency: f64,
        direction: Vec<f64>,
        #[serde(default)]
        phase: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Sum(Vec<FunctionSpec>),
    Product(Vec<FunctionSpec>),
    Scaled {
        factor: f64,
        inner: Box<FunctionSpec>,
    },
}

fn one() -> f64 {
    1.0
}

fn dot_prefix(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

impl FunctionSpec {
    /// Evaluate at `x`. The Doppler branch assumes its coordinate lies in
    /// `[0, 1]`; [`SyntheticSpec::validate`] checks that against the sampler.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FunctionSpec::Doppler => doppler_unchecked(x[0]),
            FunctionSpec::Constant(c) => *c,
            FunctionSpec::Linear { weights, intercept } => intercept + dot_prefix(weights, x),
            FunctionSpec::Sine {
                frequency,
                direction,
                phase,
                amplitude,
            } => amplitude * (frequency * dot_prefix(direction, x) + phase).sin(),
            FunctionSpec::Sum(parts) => parts.iter().map(|f| f.eval(x)).sum(),
            FunctionSpec::Product(parts) => parts.iter().map(|f| f.eval(x)).product(),
            FunctionSpec::Scaled { factor, inner } => factor * inner.eval(x),
        }
    }

    fn uses_doppler(&self) -> bool {
        match self {
            FunctionSpec::Doppler => true,
            FunctionSpec::Sum(p) | FunctionSpec::Product(p) => p.iter().any(Self::uses_doppler),
            FunctionSpec::Scaled { inner, .. } => inner.uses_doppler(),
            _ => false,
        }
    }
}

/// Input distribution for synthetic data: independent uniform coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub low: f64,
    #[serde(default = "one")]
    pub high: f64,
}

fn default_dim() -> usize {
    1
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler {
            dim: 1,
            low: 0.0,
            high: 1.0,
        }
    }
}

impl Sampler {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(HtlError::Config("sampler dim must be positive".into()));
        }
        if !(self.low < self.high) || !self.low.is_finite() || !self.high.is_finite() {
            return Err(HtlError::Config(format!(
                "sampler box [{}, {}] is empty or unbounded",
                self.low, self.high
            )));
        }
        Ok(())
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = rng.random_range(self.low..self.high);
        }
    }

    /// `n` points drawn with a fresh generator seeded by `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Array2::zeros((n, self.dim));
        for mut row in out.axis_iter_mut(Axis(0)) {
            self.sample_point(&mut rng, row.as_slice_mut().expect("standard layout"));
        }
        out
    }
}

/// Source/target regression pair with their noise levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub source_fn: FunctionSpec,
    pub target_fn: FunctionSpec,
    #[serde(default)]
    pub sampler: Sampler,
    pub noise_variance_source: f64,
    pub noise_variance_target: f64,
    /// Hölder constant of the target; informational.
    #[serde(default = "one")]
    pub holder_constant: f64,
    /// Hölder exponent of the target; informational.
    #[serde(default = "one")]
    pub holder_exponent: f64,
    /// When set, generated labels are clipped to `±y_bound`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_bound: Option<f64>,
}

impl SyntheticSpec {
    /// Offset Doppler pair: `f_ta = f_so + x`.
    pub fn doppler_offset(noise_variance: f64) -> Self {
        SyntheticSpec::doppler_pair(
            FunctionSpec::Sum(vec![
                FunctionSpec::Doppler,
                FunctionSpec::Linear {
                    weights: vec![1.0],
                    intercept: 0.0,
                },
            ]),
            noise_variance,
        )
    }

    /// Scale Doppler pair: `f_ta = 5 f_so`.
    pub fn doppler_scale(noise_variance: f64) -> Self {
        SyntheticSpec::doppler_pair(
            FunctionSpec::Scaled {
                factor: 5.0,
                inner: Box::new(FunctionSpec::Doppler),
            },
            noise_variance,
        )
    }

    fn doppler_pair(target_fn: FunctionSpec, noise_variance: f64) -> Self {
        SyntheticSpec {
            source_fn: FunctionSpec::Doppler,
            target_fn,
            sampler: Sampler::default(),
            noise_variance_source: noise_variance,
            noise_variance_target: noise_variance,
            holder_constant: 1.0,
            holder_exponent: 0.5,
            y_bound: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if !(self.noise_variance_source >= 0.0) || !(self.noise_variance_target >= 0.0) {
            return Err(HtlError::Config("noise variances must be nonnegative".into()));
        }
        if !(self.holder_exponent > 0.0 && self.holder_exponent <= 1.0) {
            return Err(HtlError::Config("holder_exponent must lie in (0, 1]".into()));
        }
        if let Some(b) = self.y_bound {
            if !(b > 0.0) {
                return Err(HtlError::Config("y_bound must be positive".into()));
            }
        }
        let doppler = self.source_fn.uses_doppler() || self.target_fn.uses_doppler();
        if doppler && (self.sampler.low < 0.0 || self.sampler.high > 1.0) {
            return Err(HtlError::Config(
                "doppler requires the sampler box to lie inside [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn function(&self, domain: DomainTag) -> &FunctionSpec {
        match domain {
            DomainTag::Source => &self.source_fn,
            DomainTag::Target | DomainTag::Validation => &self.target_fn,
        }
    }

    pub fn noise_variance(&self, domain: DomainTag) -> f64 {
        match domain {
            DomainTag::Source => self.noise_variance_source,
            DomainTag::Target | DomainTag::Validation => self.noise_variance_target,
        }
    }
}

/// Draw `n` labelled rows for `domain`; identical arguments give identical data.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    n: usize,
    domain: DomainTag,
    seed: u64,
) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(HtlError::InvalidInput("n must be positive".into()));
    }
    let f = spec.function(domain);
    let sd = spec.noise_variance(domain).sqrt();
    let d = spec.sampler.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((n, d));
    let mut labels = Array1::zeros(n);
    for (mut row, y) in features.axis_iter_mut(Axis(0)).zip(labels.iter_mut()) {
        let x = row.as_slice_mut().expect("standard layout");
        spec.sampler.sample_point(&mut rng, x);
        let eps: f64 = rng.sample(StandardNormal);
        let mut v = f.eval(x) + sd * eps;
        if let Some(b) = spec.y_bound {
            v = v.clamp(-b, b);
        }
        *y = v;
    }
    let data = Dataset::new(features, labels, domain)?;
    match spec.y_bound {
        Some(b) => data.with_declared_bounds(0.0, b),
        None => Ok(data),
    }
}

/// How to find the label column in a CSV header.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "#{i}"),
            LabelColumn::Name(s) => write!(f, "{s:?}"),
        }
    }
}

/// Read a comma-delimited numeric table with a one-line header.
///
/// No quoting or escaping is recognized. Line numbers in diagnostics are
/// 1-based file lines (the header is line 1). Blank lines are skipped.
pub fn load_csv(path: &Path, label: &LabelColumn, domain: DomainTag) -> Result<Dataset> {
    if !path.exists() {
        return Err(HtlError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| HtlError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| HtlError::EmptyFile(path.to_path_buf()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let label_idx = match label {
        LabelColumn::Index(i) if *i < names.len() => *i,
        LabelColumn::Name(s) => names
            .iter()
            .position(|n| n == s)
            .ok_or_else(|| HtlError::MissingLabelColumn(label.to_string()))?,
        LabelColumn::Index(_) => return Err(HtlError::MissingLabelColumn(label.to_string())),
    };
    if names.len() < 2 {
        return Err(HtlError::InvalidInput(
            "csv needs at least one feature column besides the label".into(),
        ));
    }

    let width = names.len();
    let mut flat = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width {
            return Err(HtlError::RaggedRow {
                line: line_no,
                expected: width,
                found: cells.len(),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            let v = cell
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| HtlError::NonNumeric {
                    line: line_no,
                    column: names[j].to_string(),
                    cell: cell.to_string(),
                })?;
            if j == label_idx {
                labels.push(v);
            } else {
                flat.push(v);
            }
        }
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, width - 1), flat)
        .map_err(|e| HtlError::InvalidInput(e.to_string()))?;
    Dataset::new(features, Array1::from(labels), domain)
}

/// Write `data` as `x0,…,x{d-1},y`. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let io_err = |source| HtlError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::new();
    for j in 0..data.dim() {
        out.push_str(&format!("x{j},"));
    }
    out.push_str("y\n");
    for (i, row) in data.rows().enumerate() {
        for v in row {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", data.label(i)));
    }
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(out.as_bytes()).map_err(io_err)
}

/// Training / validation / test partition returned by [`split`].
#[derive(Clone, Debug)]
pub struct Split {
    pub train: Dataset,
    pub validation: Option<Dataset>,
    pub test: Option<Dataset>,
}

/// Shuffle rows and cut them into `⌊f_train·n⌋`, `⌊f_val·n⌋` and the remainder.
///
/// The validation part is re-tagged [`DomainTag::Validation`]; the others keep
/// the input tag.
pub fn split(data: &Dataset, fractions: (f64, f64), seed: u64) -> Result<Split> {
    let (f_train, f_val) = fractions;
    if !(f_train >= 0.0 && f_val >= 0.0 && f_train + f_val <= 1.0 + 1e-12) {
        return Err(HtlError::InvalidInput(format!(
            "split fractions ({f_train}, {f_val}) must be nonnegative and sum to at most 1"
        )));
    }
    let n = data.n();
    // The small offset keeps products like 0.29·100 from flooring to 28.
    let n_train = ((f_train * n as f64) + 1e-9).floor() as usize;
    let n_train = n_train.min(n);
    if n_train == 0 {
        return Err(HtlError::EmptyTrainingSplit);
    }
    let n_val = (((f_val * n as f64) + 1e-9).floor() as usize).min(n - n_train);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = data.select(&order[..n_train])?;
    let part = |idx: &[usize]| -> Result<Option<Dataset>> {
        if idx.is_empty() {
            Ok(None)
        } else {
            data.select(idx).map(Some)
        }
    };
    let validation = part(&order[n_train..n_train + n_val])?.map(|d| d.with_domain(DomainTag::Validation));
    let test = part(&order[n_train + n_val..])?;
    Ok(Split {
        train,
        validation,
        test,
    })
}

/// Derive an independent stream seed from a base seed and a stream label
/// (SplitMix64 finalizer over `seed ^ stream·φ`).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
