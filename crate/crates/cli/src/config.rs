//! Experiment configuration, read from JSON.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use htl_core::{
    quantize_offset_family, AuxiliaryEstimator, EstimatorMode, Family, LabelColumn, SubroutineSpec,
    SyntheticSpec, TransformationFunction,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SyntheticOffset,
    SyntheticScale,
    CsvTransfer,
    RateSweep,
    Selection,
}

impl ExperimentKind {
    pub fn is_synthetic(self) -> bool {
        !matches!(self, ExperimentKind::CsvTransfer)
    }

    /// Data used when a synthetic config has no `data` section.
    pub fn default_data(self) -> Option<SyntheticSpec> {
        match self {
            ExperimentKind::SyntheticScale => Some(SyntheticSpec::doppler_scale(0.01)),
            ExperimentKind::CsvTransfer => None,
            _ => Some(SyntheticSpec::doppler_offset(0.01)),
        }
    }
}

fn default_label_column() -> LabelColumn {
    LabelColumn::Name("y".into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSpec {
    pub source: PathBuf,
    pub target: PathBuf,
    /// Header name or 0-based index; defaults to `"y"`.
    #[serde(default = "default_label_column")]
    pub label_column: LabelColumn,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sizes {
    /// Source rows; required for synthetic data, optional subsample for CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_so: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ta: Option<usize>,
    /// Target training sizes; overrides `n_ta`. Smaller sets are prefixes of
    /// larger ones within a seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ta_values: Option<Vec<usize>>,
    #[serde(default)]
    pub n_val: usize,
    /// Test rows; synthetic default 1000, CSV default all remaining rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
}

impl Sizes {
    pub fn target_sizes(&self) -> Vec<usize> {
        match (&self.n_ta_values, self.n_ta) {
            (Some(v), _) => v.clone(),
            (None, Some(n)) => vec![n],
            (None, None) => Vec::new(),
        }
    }

    pub fn max_target(&self) -> usize {
        self.target_sizes().into_iter().max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Offset,
    Scale,
    NonTransfer,
    Loglinear,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    DirectInverse,
    Calibrated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformationConfig {
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "lipschitz_L", default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_l: Option<f64>,
    #[serde(rename = "aux_bound_B", default, skip_serializing_if = "Option::is_none")]
    pub aux_bound_b: Option<f64>,
    #[serde(default)]
    pub estimator_mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    /// Allows the direct inverse for non-affine families on noise-free labels.
    #[serde(default)]
    pub noiseless: bool,
}

impl TransformationConfig {
    pub fn estimator(&self) -> Result<AuxiliaryEstimator, CliError> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::Config(format!("{:?} transformation needs `{name}`", self.family)))
        };
        let family = match self.family {
            FamilyName::Offset => Family::Offset {
                alpha: need(self.alpha, "alpha")?,
            },
            FamilyName::Scale => Family::Scale {
                alpha: need(self.alpha, "alpha")?,
            },
            FamilyName::NonTransfer => Family::NonTransfer,
            FamilyName::Loglinear => Family::Loglinear {
                beta: need(self.beta, "beta")?,
            },
        };
        let defaults = match family {
            Family::Offset { alpha } => Ok(TransformationFunction::offset(alpha)),
            Family::Scale { alpha } => Ok(TransformationFunction::scale(alpha)),
            Family::NonTransfer => Ok(TransformationFunction::non_transfer()),
            Family::Loglinear { beta } => TransformationFunction::loglinear(beta),
        }?;
        let tf = TransformationFunction::new(
            family,
            self.lipschitz_l.unwrap_or(defaults.lipschitz()),
            self.aux_bound_b.unwrap_or(defaults.aux_bound()),
        )?;
        let mode = match self.estimator_mode {
            ModeName::DirectInverse => EstimatorMode::DirectInverse,
            ModeName::Calibrated => EstimatorMode::Calibrated {
                sigma2: need(self.sigma2, "sigma2")?,
            },
        };
        Ok(AuxiliaryEstimator::new(tf, mode, self.noiseless)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    OnlyTarget,
    OnlySource,
    Combined,
    Htl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    /// Required for `htl`, rejected otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transformation: Option<TransformationConfig>,
    /// Overrides `target_stage` for this method's target-side fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<SubroutineSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl MethodConfig {
    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match (self.kind, &self.transformation) {
            (MethodKind::OnlyTarget, _) => "only_target".into(),
            (MethodKind::OnlySource, _) => "only_source".into(),
            (MethodKind::Combined, _) => "combined".into(),
            (MethodKind::Htl, Some(t)) => match t.estimator() {
                Ok(est) => format!("htl_{}", est.transformation()),
                Err(_) => "htl".into(),
            },
            (MethodKind::Htl, None) => "htl".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizedOffsetConfig {
    pub l_alpha: f64,
    pub l_a: f64,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CandidateConfig {
    QuantizedOffset(QuantizedOffsetConfig),
    Explicit(Vec<TransformationConfig>),
}

impl CandidateConfig {
    pub fn estimators(&self) -> Result<Vec<AuxiliaryEstimator>, CliError> {
        match self {
            CandidateConfig::QuantizedOffset(q) => quantize_offset_family(q.l_alpha, q.l_a, q.k)?
                .members()
                .iter()
                .map(|tf| Ok(AuxiliaryEstimator::direct(*tf)?))
                .collect(),
            CandidateConfig::Explicit(list) => list.iter().map(TransformationConfig::estimator).collect(),
        }
    }
}

fn default_folds() -> usize {
    10
}

fn default_n_mc() -> usize {
    10_000
}

fn default_series_points() -> usize {
    200
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<FileSpec>,
    pub sizes: Sizes,
    pub source_stage: SubroutineSpec,
    pub target_stage: SubroutineSpec,
    pub methods: Vec<MethodConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<CandidateConfig>,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default = "default_series_points")]
    pub series_points: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parse and validate; parse errors carry the JSON line and column.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text, path)
    }

    /// Synthetic spec in effect, falling back to the kind's default pair.
    pub fn synthetic(&self) -> Option<SyntheticSpec> {
        if !self.experiment_kind.is_synthetic() {
            return None;
        }
        self.data.clone().or_else(|| self.experiment_kind.default_data())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Config(m));
        if self.seeds.is_empty() {
            return fail("seeds must be nonempty".into());
        }
        let sizes = self.sizes.target_sizes();
        if sizes.is_empty() {
            return fail("sizes needs n_ta or n_ta_values".into());
        }
        if sizes.contains(&0) || self.sizes.n_so == Some(0) || self.sizes.n_test == Some(0) {
            return fail("sizes must be positive".into());
        }
        let distinct: HashSet<usize> = sizes.iter().copied().collect();
        if distinct.len() != sizes.len() {
            return fail("n_ta_values must be distinct".into());
        }
        if self.cv_folds < 2 {
            return fail("cv_folds must be at least 2".into());
        }
        if self.n_mc < 2 {
            return fail("n_mc must be at least 2".into());
        }
        self.source_stage.validate()?;
        self.target_stage.validate()?;

        let kind = self.experiment_kind;
        if kind.is_synthetic() {
            if self.files.is_some() {
                return fail(format!("{kind:?} experiments generate data; remove `files`"));
            }
            if self.sizes.n_so.is_none() {
                return fail("synthetic experiments need sizes.n_so".into());
            }
            self.synthetic().expect("synthetic kind").validate()?;
        } else {
            let Some(files) = &self.files else {
                return fail("csv_transfer needs a `files` section".into());
            };
            if self.data.is_some() {
                return fail("csv_transfer reads files; remove `data`".into());
            }
            for p in [&files.source, &files.target] {
                if !p.is_file() {
                    return fail(format!("data file {} does not exist", p.display()));
                }
            }
        }

        if kind == ExperimentKind::RateSweep && sizes.len() < 3 {
            return fail("rate_sweep needs at least 3 n_ta_values".into());
        }
        if kind == ExperimentKind::Selection {
            match &self.candidates {
                None => return fail("selection needs a `candidates` section".into()),
                Some(c) => {
                    if c.estimators()?.is_empty() {
                        return fail("candidate list is empty".into());
                    }
                }
            }
            if self.sizes.n_val == 0 {
                return fail("selection needs sizes.n_val > 0".into());
            }
        } else if self.methods.is_empty() {
            return fail("methods must be nonempty".into());
        }

        let mut labels = HashSet::new();
        for m in &self.methods {
            match (m.kind, &m.transformation) {
                (MethodKind::Htl, None) => return fail("htl methods need a `transformation`".into()),
                (MethodKind::Htl, Some(t)) => {
                    t.estimator()?;
                }
                (_, Some(_)) => return fail(format!("{:?} does not take a transformation", m.kind)),
                _ => {}
            }
            if let Some(s) = &m.stage {
                s.validate()?;
            }
            if !labels.insert(m.label()) {
                return fail(format!("duplicate method label {:?}", m.label()));
            }
        }
        if kind == ExperimentKind::Selection && labels.contains(crate::runner::SELECTED_LABEL) {
            return fail(format!("{:?} is reserved for the selected candidate", crate::runner::SELECTED_LABEL));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "experiment_kind": "synthetic_offset",
        "sizes": {"n_so": 50, "n_ta": 10},
        "source_stage": {"method": "ks", "bandwidth": {"fixed": 0.1}},
        "target_stage": {"method": "ks", "bandwidth": {"fixed": 0.2}},
        "methods": [{"kind": "only_target"}, {"kind": "htl", "transformation": {"family": "offset", "alpha": 1.0}}],
        "seeds": [1]
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL, Path::new("c.json")).unwrap();
        assert_eq!(cfg.cv_folds, 10);
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
        assert_eq!(cfg.synthetic(), Some(SyntheticSpec::doppler_offset(0.01)));
        assert_eq!(cfg.methods[1].label(), "htl_offset(alpha=1)");
    }

    #[test]
    fn unknown_field_reports_position() {
        let text = MINIMAL.replace("\"seeds\"", "\"sedes\"");
        match ExperimentConfig::from_json(&text, Path::new("c.json")) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_seeds_rejected() {
        let text = MINIMAL.replace("[1]", "[]");
        assert!(matches!(ExperimentConfig::from_json(&text, Path::new("c.json")), Err(CliError::Config(_))));
    }

    #[test]
    fn htl_without_transformation_rejected() {
        let text = MINIMAL.replace(r#"{"kind": "htl", "transformation": {"family": "offset", "alpha": 1.0}}"#, r#"{"kind": "htl"}"#);
        assert!(ExperimentConfig::from_json(&text, Path::new("c.json")).is_err());
    }

    #[test]
    fn biased_direct_inverse_rejected() {
        let text = MINIMAL.replace(r#""family": "offset", "alpha": 1.0"#, r#""family": "loglinear", "beta": 1.0"#);
        assert!(ExperimentConfig::from_json(&text, Path::new("c.json")).is_err());
    }

    #[test]
    fn missing_csv_rejected_at_parse_time() {
        let text = r#"{
            "experiment_kind": "csv_transfer",
            "files": {"source": "/nonexistent/a.csv", "target": "/nonexistent/b.csv"},
            "sizes": {"n_ta": 10},
            "source_stage": {"method": "ks", "bandwidth": {"fixed": 0.1}},
            "target_stage": {"method": "ks", "bandwidth": {"fixed": 0.2}},
            "methods": [{"kind": "only_target"}],
            "seeds": [1]
        }"#;
        match ExperimentConfig::from_json(text, Path::new("c.json")) {
            Err(CliError::Config(m)) => assert!(m.contains("does not exist")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quantized_candidates_expand() {
        let c: CandidateConfig = serde_json::from_str(r#"{"quantized_offset": {"l_alpha": 2.0, "l_a": 1.0, "k": 1}}"#).unwrap();
        let alphas: Vec<String> = c.estimators().unwrap().iter().map(|e| e.transformation().to_string()).collect();
        assert_eq!(alphas, ["offset(alpha=-1)", "offset(alpha=0)", "offset(alpha=1)"]);
    }

    #[test]
    fn transformation_bounds_override_defaults() {
        let t: TransformationConfig =
            serde_json::from_str(r#"{"family": "scale", "alpha": 0.5, "lipschitz_L": 3.0, "aux_bound_B": 7.0}"#).unwrap();
        let est = t.estimator().unwrap();
        assert_eq!(est.transformation().lipschitz(), 3.0);
        assert_eq!(est.transformation().aux_bound(), 7.0);
    }
}
