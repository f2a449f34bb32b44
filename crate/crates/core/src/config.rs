//! Study files: a declarative description of a Monte Carlo study, in TOML or JSON.
//!
//! ```toml
//! seed = 1
//! reps = 200
//!
//! [truth]
//! example = 1
//!
//! [[arms]]
//! kind = "spse"
//! model = "sin"
//! gamma = 0
//! hyper = "gcv"
//!
//! [[selection]]
//! label = "SPSE1"
//! candidates = ["sin", "poly1", "poly3"]
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernelreg::Bandwidth;
use crate::modelselect::CriteriaConfig;
use crate::parametric::{model_library, resolve_model, ParametricModel};
use crate::pls::{SmootherChoice, SmootherSpec};
use crate::simlab::{
    example_sample_size, example_truth, report_csv, run_study, Arm, ArmKind, ReportFiles,
    SelectionSpec, SimResult, SimulationSpec,
};
use crate::spse::Gamma;
use crate::theory::TrueModel;

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

const TOP_KEYS: &[&str] = &[
    "seed",
    "n",
    "reps",
    "grid_j",
    "fixed_design",
    "truth",
    "arms",
    "selection",
    "output",
];
const TRUTH_KEYS: &[&str] = &[
    "example",
    "mean",
    "mean_coefficients",
    "sigma2",
    "variance",
    "variance_coefficients",
    "density",
    "density_coefficients",
];
const ARM_KEYS: &[&str] = &[
    "label",
    "kind",
    "model",
    "gamma",
    "degree",
    "penalty_order",
    "hyper",
    "bandwidth",
];
const HYPER_KEYS: &[&str] = &["knots", "lambda"];
const SELECTION_KEYS: &[&str] = &[
    "label",
    "candidates",
    "gamma",
    "degree",
    "penalty_order",
    "grid_j",
    "working",
    "pilot_bandwidth",
];
const OUTPUT_KEYS: &[&str] = &["dir"];

fn default_grid_j() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub seed: u64,
    /// Defaults to the example's sample size.
    #[serde(default)]
    pub n: Option<usize>,
    pub reps: usize,
    #[serde(default = "default_grid_j")]
    pub grid_j: usize,
    #[serde(default)]
    pub fixed_design: bool,
    pub truth: TruthConfig,
    #[serde(default)]
    pub arms: Vec<ArmConfig>,
    #[serde(default, rename = "selection")]
    pub selections: Vec<SelectionConfig>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

/// Either `example = id`, or `mean` (an expression) with coefficients.
///
/// The noise is `sigma2` (constant) or `variance` with coefficients; the
/// design density defaults to uniform.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    #[serde(default)]
    pub example: Option<u32>,
    #[serde(default)]
    pub mean: Option<String>,
    #[serde(default)]
    pub mean_coefficients: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub variance: Option<String>,
    #[serde(default)]
    pub variance_coefficients: Option<Vec<f64>>,
    #[serde(default)]
    pub density: Option<String>,
    #[serde(default)]
    pub density_coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmKindName {
    Spse,
    Npse,
    Slle,
    Nlle,
    Oracle,
}

/// `"gcv"`, `"rates"` or `{ knots, lambda }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperConfig {
    Named(String),
    Fixed { knots: usize, lambda: f64 },
}

/// `"cv"` or a fixed bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthConfig {
    Named(String),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub kind: ArmKindName,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub gamma: Option<u8>,
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub penalty_order: Option<usize>,
    #[serde(default)]
    pub hyper: Option<HyperConfig>,
    #[serde(default)]
    pub bandwidth: Option<BandwidthConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub label: String,
    /// Defaults to the example's model library.
    #[serde(default)]
    pub candidates: Option<Vec<String>>,
    #[serde(default)]
    pub gamma: Option<u8>,
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub penalty_order: Option<usize>,
    #[serde(default)]
    pub grid_j: Option<usize>,
    #[serde(default)]
    pub working: Option<HyperConfig>,
    #[serde(default)]
    pub pilot_bandwidth: Option<BandwidthConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

fn unknown_keys(value: &Value, allowed: &[&str], at: &str, problems: &mut Vec<String>) {
    if let Value::Object(map) = value {
        for k in map.keys() {
            if !allowed.contains(&k.as_str()) {
                problems.push(format!("unknown key `{k}` in {at}"));
            }
        }
    }
}

fn check_keys(root: &Value) -> Vec<String> {
    let mut problems = Vec::new();
    if !root.is_object() {
        problems.push("a study file must be a table of keys".into());
        return problems;
    }
    unknown_keys(root, TOP_KEYS, "the top level", &mut problems);
    if let Some(t) = root.get("truth") {
        unknown_keys(t, TRUTH_KEYS, "[truth]", &mut problems);
    }
    if let Some(o) = root.get("output") {
        unknown_keys(o, OUTPUT_KEYS, "[output]", &mut problems);
    }
    if let Some(Value::Array(arms)) = root.get("arms") {
        for (i, a) in arms.iter().enumerate() {
            let at = format!("[[arms]] #{}", i + 1);
            unknown_keys(a, ARM_KEYS, &at, &mut problems);
            if let Some(h) = a.get("hyper") {
                unknown_keys(h, HYPER_KEYS, &format!("{at} hyper"), &mut problems);
            }
        }
    }
    if let Some(Value::Array(sels)) = root.get("selection") {
        for (i, s) in sels.iter().enumerate() {
            let at = format!("[[selection]] #{}", i + 1);
            unknown_keys(s, SELECTION_KEYS, &at, &mut problems);
            if let Some(h) = s.get("working") {
                unknown_keys(h, HYPER_KEYS, &format!("{at} working"), &mut problems);
            }
        }
    }
    problems
}

fn gamma_of(g: Option<u8>, at: &str, problems: &mut Vec<String>) -> Gamma {
    match g.unwrap_or(0) {
        0 => Gamma::Additive,
        1 => Gamma::Multiplicative,
        other => {
            problems.push(format!("{at}: gamma must be 0 or 1, got {other}"));
            Gamma::Additive
        }
    }
}

fn smoother_of(
    hyper: Option<&HyperConfig>,
    degree: usize,
    order: usize,
    at: &str,
    problems: &mut Vec<String>,
) -> Option<SmootherChoice> {
    match hyper {
        None => Some(SmootherChoice::gcv(degree, order)),
        Some(HyperConfig::Named(s)) if s == "gcv" => Some(SmootherChoice::gcv(degree, order)),
        Some(HyperConfig::Named(s)) if s == "rates" => Some(SmootherChoice::Rates { degree, order }),
        Some(HyperConfig::Named(s)) => {
            problems.push(format!("{at}: unknown hyperparameter rule `{s}` (use gcv, rates or {{knots, lambda}})"));
            None
        }
        Some(HyperConfig::Fixed { knots, lambda }) => {
            match SmootherSpec::new(degree, *knots, order, *lambda) {
                Ok(s) => Some(SmootherChoice::Fixed(s)),
                Err(e) => {
                    problems.push(format!("{at}: {e}"));
                    None
                }
            }
        }
    }
}

fn bandwidth_of(b: Option<&BandwidthConfig>, at: &str, problems: &mut Vec<String>) -> Bandwidth {
    match b {
        None => Bandwidth::Cv,
        Some(BandwidthConfig::Named(s)) if s == "cv" => Bandwidth::Cv,
        Some(BandwidthConfig::Named(s)) => {
            problems.push(format!("{at}: unknown bandwidth rule `{s}` (use cv or a number)"));
            Bandwidth::Cv
        }
        Some(BandwidthConfig::Fixed(h)) => {
            if !(*h > 0.0 && h.is_finite()) {
                problems.push(format!("{at}: bandwidth must be positive, got {h}"));
            }
            Bandwidth::Fixed(*h)
        }
    }
}

fn spline_settings(
    degree: Option<usize>,
    order: Option<usize>,
    at: &str,
    problems: &mut Vec<String>,
) -> (usize, usize) {
    let degree = degree.unwrap_or(1);
    let order = order.unwrap_or(2);
    if order == 0 {
        problems.push(format!("{at}: penalty_order must be at least 1"));
    }
    (degree, order)
}

fn fitted(
    expr: &str,
    coefficients: Option<&Vec<f64>>,
    what: &str,
    problems: &mut Vec<String>,
) -> Option<crate::parametric::FittedModel> {
    let model = match ParametricModel::parse(what, expr) {
        Ok(m) => m,
        Err(e) => {
            problems.push(format!("[truth] {what}: {e}"));
            return None;
        }
    };
    let Some(beta) = coefficients else {
        problems.push(format!("[truth] {what}_coefficients is required with {what}"));
        return None;
    };
    match model.with_coefficients(beta.clone()) {
        Ok(f) => Some(f),
        Err(e) => {
            problems.push(format!("[truth] {what}: {e}"));
            None
        }
    }
}

impl TruthConfig {
    fn build(&self, problems: &mut Vec<String>) -> Option<TrueModel> {
        let mut truth = match (&self.example, &self.mean) {
            (Some(_), Some(_)) => {
                problems.push("[truth]: give either example or mean, not both".into());
                return None;
            }
            (None, None) => {
                problems.push("[truth]: one of example or mean is required".into());
                return None;
            }
            (Some(id), None) => match example_truth(*id) {
                Ok(t) => t,
                Err(e) => {
                    problems.push(format!("[truth]: {e}"));
                    return None;
                }
            },
            (None, Some(expr)) => {
                let mean = fitted(expr, self.mean_coefficients.as_ref(), "mean", problems)?;
                if self.sigma2.is_none() && self.variance.is_none() {
                    problems.push("[truth]: sigma2 or variance is required with mean".into());
                    return None;
                }
                match TrueModel::homoscedastic(mean, 1.0) {
                    Ok(t) => t,
                    Err(e) => {
                        problems.push(format!("[truth]: {e}"));
                        return None;
                    }
                }
            }
        };
        if self.example.is_some() && self.mean_coefficients.is_some() {
            problems.push("[truth]: mean_coefficients needs mean".into());
        }
        let variance = match (&self.sigma2, &self.variance) {
            (Some(_), Some(_)) => {
                problems.push("[truth]: give either sigma2 or variance, not both".into());
                return None;
            }
            (Some(s2), None) => {
                if !(*s2 >= 0.0 && s2.is_finite()) {
                    problems.push(format!("[truth]: sigma2 must be non-negative, got {s2}"));
                    return None;
                }
                Some(ParametricModel::constant().with_coefficients(vec![*s2]).ok()?)
            }
            (None, Some(expr)) => Some(fitted(
                expr,
                self.variance_coefficients.as_ref(),
                "variance",
                problems,
            )?),
            (None, None) => None,
        };
        if let Some(v) = variance {
            truth = match truth.with_variance(v) {
                Ok(t) => t,
                Err(e) => {
                    problems.push(format!("[truth]: {e}"));
                    return None;
                }
            };
        }
        if let Some(expr) = &self.density {
            let q = fitted(expr, self.density_coefficients.as_ref(), "density", problems)?;
            truth = match TrueModel::new(truth.mean().clone(), truth.variance_model().clone(), q) {
                Ok(t) => t,
                Err(e) => {
                    problems.push(format!("[truth]: {e}"));
                    return None;
                }
            };
        }
        Some(truth)
    }
}

fn default_label(kind: ArmKindName, model: Option<&str>, degree: usize, gamma: Gamma) -> String {
    let suffix = match gamma {
        Gamma::Additive => String::new(),
        Gamma::Multiplicative => " g1".into(),
    };
    match kind {
        ArmKindName::Spse => format!("SPSE{degree} {}{suffix}", model.unwrap_or("?")),
        ArmKindName::Npse => format!("NPSE{degree}"),
        ArmKindName::Slle => format!("SLLE {}{suffix}", model.unwrap_or("?")),
        ArmKindName::Nlle => "NLLE".into(),
        ArmKindName::Oracle => "oracle".into(),
    }
}

impl ArmConfig {
    fn build(&self, i: usize, example: Option<u32>, problems: &mut Vec<String>) -> Option<Arm> {
        let at = format!("[[arms]] #{}", i + 1);
        let gamma = gamma_of(self.gamma, &at, problems);
        let (degree, order) = spline_settings(self.degree, self.penalty_order, &at, problems);
        let needs_model = matches!(self.kind, ArmKindName::Spse | ArmKindName::Slle);
        let model = match (&self.model, needs_model) {
            (Some(m), true) => match resolve_model(m, example) {
                Ok(m) => Some(m),
                Err(e) => {
                    problems.push(format!("{at}: model `{m}`: {e}"));
                    None
                }
            },
            (None, true) => {
                problems.push(format!("{at}: a {:?} arm needs a model", self.kind).to_lowercase());
                None
            }
            (Some(_), false) => {
                problems.push(format!("{at}: model is not used by this kind of arm"));
                None
            }
            (None, false) => None,
        };
        let spline = matches!(self.kind, ArmKindName::Spse | ArmKindName::Npse);
        let kernel = matches!(self.kind, ArmKindName::Slle | ArmKindName::Nlle);
        if !spline && self.hyper.is_some() {
            problems.push(format!("{at}: hyper only applies to spline arms"));
        }
        if !kernel && self.bandwidth.is_some() {
            problems.push(format!("{at}: bandwidth only applies to local linear arms"));
        }
        if !spline && (self.degree.is_some() || self.penalty_order.is_some()) {
            problems.push(format!("{at}: degree and penalty_order only apply to spline arms"));
        }
        let smoother = if spline {
            smoother_of(self.hyper.as_ref(), degree, order, &at, problems)
        } else {
            None
        };
        let bandwidth = bandwidth_of(self.bandwidth.as_ref(), &at, problems);
        let kind = match self.kind {
            ArmKindName::Spse => ArmKind::Spse {
                model: model.clone()?,
                gamma,
                smoother: smoother?,
            },
            ArmKindName::Npse => ArmKind::Npse { smoother: smoother? },
            ArmKindName::Slle => ArmKind::Slle {
                model: model.clone()?,
                gamma,
                bandwidth,
            },
            ArmKindName::Nlle => ArmKind::Nlle { bandwidth },
            ArmKindName::Oracle => ArmKind::Oracle,
        };
        let label = self.label.clone().unwrap_or_else(|| {
            default_label(self.kind, self.model.as_deref(), degree, gamma)
        });
        Some(Arm { label, kind })
    }
}

impl SelectionConfig {
    fn build(&self, i: usize, example: Option<u32>, problems: &mut Vec<String>) -> Option<SelectionSpec> {
        let at = format!("[[selection]] #{} ({})", i + 1, self.label);
        let gamma = gamma_of(self.gamma, &at, problems);
        let (degree, order) = spline_settings(self.degree, self.penalty_order, &at, problems);
        let candidates: Vec<ParametricModel> = match (&self.candidates, example) {
            (Some(names), _) => {
                let mut seen = HashSet::new();
                let mut out = Vec::new();
                for name in names {
                    if !seen.insert(name.trim()) {
                        problems.push(format!("{at}: duplicate candidate `{name}`"));
                    }
                    match resolve_model(name, example) {
                        Ok(m) => out.push(m),
                        Err(e) => problems.push(format!("{at}: candidate `{name}`: {e}")),
                    }
                }
                out
            }
            (None, Some(id)) => model_library(id).unwrap_or_default(),
            (None, None) => {
                problems.push(format!("{at}: candidates are required without an example"));
                Vec::new()
            }
        };
        if candidates.is_empty() && self.candidates.is_some() {
            problems.push(format!("{at}: candidate list is empty"));
        }
        let working = smoother_of(self.working.as_ref(), degree, order, &at, problems)?;
        let pilot_bandwidth = bandwidth_of(self.pilot_bandwidth.as_ref(), &at, problems);
        let grid_j = self.grid_j.unwrap_or(100);
        if grid_j == 0 {
            problems.push(format!("{at}: grid_j must be at least 1"));
        }
        Some(SelectionSpec {
            label: self.label.clone(),
            candidates,
            criteria: CriteriaConfig {
                grid_j,
                gamma,
                working,
                pilot_bandwidth,
            },
        })
    }
}

impl StudyConfig {
    /// Parse TOML, or JSON when the text starts with `{`.
    ///
    /// All unknown keys are reported together.
    pub fn parse_str(text: &str) -> Result<Self> {
        let root: Value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("JSON: {e}")]))?
        } else {
            let t: toml::Table =
                toml::from_str(text).map_err(|e| Error::Config(vec![format!("TOML: {e}")]))?;
            serde_json::to_value(t).map_err(|e| Error::Config(vec![e.to_string()]))?
        };
        let problems = check_keys(&root);
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        serde_json::from_value(root).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse_str(&text)
    }

    /// Key-sorted compact JSON; identical for equivalent TOML and JSON inputs.
    pub fn canonical_json(&self) -> String {
        let v = serde_json::to_value(self).expect("study config serializes");
        serde_json::to_string(&v).expect("json value serializes")
    }

    /// Hex SHA-256 of [`StudyConfig::canonical_json`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Semantic checks and conversion; every violation is reported.
    pub fn to_spec(&self) -> Result<SimulationSpec> {
        let mut problems = Vec::new();
        let truth = self.truth.build(&mut problems);
        let example = self.truth.example;
        let n = match (self.n, example) {
            (Some(n), _) => n,
            (None, Some(id)) => example_sample_size(id).unwrap_or(0),
            (None, None) => {
                problems.push("n is required without an example".into());
                0
            }
        };
        if n < 5 && (self.n.is_some() || example.is_none()) {
            problems.push(format!("n must be at least 5, got {n}"));
        }
        if self.reps == 0 {
            problems.push("reps must be at least 1".into());
        }
        if self.grid_j == 0 {
            problems.push("grid_j must be at least 1".into());
        }
        if self.arms.is_empty() && self.selections.is_empty() {
            problems.push("a study needs at least one [[arms]] or [[selection]] entry".into());
        }
        let arms: Vec<Option<Arm>> = self
            .arms
            .iter()
            .enumerate()
            .map(|(i, a)| a.build(i, example, &mut problems))
            .collect();
        let mut labels = HashSet::new();
        for a in arms.iter().flatten() {
            if !labels.insert(a.label.clone()) {
                problems.push(format!("duplicate arm label `{}`", a.label));
            }
        }
        let selections: Vec<Option<SelectionSpec>> = self
            .selections
            .iter()
            .enumerate()
            .map(|(i, s)| s.build(i, example, &mut problems))
            .collect();
        let mut sel_labels = HashSet::new();
        for s in &self.selections {
            if !sel_labels.insert(s.label.as_str()) {
                problems.push(format!("duplicate selection label `{}`", s.label));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let spec = SimulationSpec {
            truth: truth.expect("truth checked"),
            n,
            reps: self.reps,
            grid_j: self.grid_j,
            seed: self.seed,
            fixed_design: self.fixed_design,
            arms: arms.into_iter().flatten().collect(),
            selections: selections.into_iter().flatten().collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.output.as_ref().map(|o| o.dir.as_path())
    }

    pub fn manifest(&self) -> RunManifest {
        RunManifest {
            config_hash: self.hash(),
            seed: self.seed,
            library_version: LIBRARY_VERSION.to_string(),
            config: serde_json::to_value(self).expect("study config serializes"),
        }
    }

    /// Run the study and write the reports and `manifest.json` into `dir`.
    pub fn execute(&self, dir: &Path) -> Result<StudyOutcome> {
        let spec = self.to_spec()?;
        let result = run_study(&spec)?;
        let files = report_csv(&result, dir)?;
        let manifest = self.manifest();
        let manifest_path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&manifest_path, text + "\n").map_err(|e| Error::Io {
            path: manifest_path.clone(),
            source: e,
        })?;
        Ok(StudyOutcome {
            result,
            files,
            manifest,
            manifest_path,
        })
    }
}

/// Reproducibility record written next to the reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub library_version: String,
    pub config: Value,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub result: SimResult,
    pub files: ReportFiles,
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
seed = 7
reps = 3
[truth]
example = 1
[[arms]]
kind = "spse"
model = "sin"
hyper = { knots = 5, lambda = 1 }
[[arms]]
kind = "nlle"
bandwidth = 0.2
[[selection]]
label = "s"
candidates = ["sin", "poly1"]
"#;

    const JSON: &str = r#"{"seed": 7, "reps": 3, "truth": {"example": 1},
 "arms": [{"kind": "spse", "model": "sin", "hyper": {"knots": 5, "lambda": 1.0}},
          {"kind": "nlle", "bandwidth": 0.2}],
 "selection": [{"label": "s", "candidates": ["sin", "poly1"]}]}"#;

    #[test]
    fn toml_and_json_hash_alike() {
        let a = StudyConfig::parse_str(TOML).unwrap();
        let b = StudyConfig::parse_str(JSON).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let spec = a.to_spec().unwrap();
        assert_eq!(spec.n, 25);
        assert_eq!(spec.arms[0].label, "SPSE1 sin");
        assert_eq!(spec.arms[1].label, "NLLE");
    }

    #[test]
    fn all_unknown_keys_reported() {
        let text = TOML.replace("seed = 7", "seed = 7\nsead = 1\ncolour = 2")
            .replace("model = \"sin\"", "model = \"sin\"\nknots = 3");
        match StudyConfig::parse_str(&text) {
            Err(Error::Config(p)) => {
                assert_eq!(p.len(), 3, "{p:?}");
                assert!(p.iter().any(|s| s.contains("`knots` in [[arms]] #1")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_semantic_problems_reported() {
        let text = TOML
            .replace("reps = 3", "reps = 0")
            .replace("model = \"sin\"", "model = \"sin\"\ngamma = 4")
            .replace("bandwidth = 0.2", "bandwidth = -1.0")
            .replace("[\"sin\", \"poly1\"]", "[\"sin\", \"sin\"]");
        let cfg = StudyConfig::parse_str(&text).unwrap();
        match cfg.to_spec() {
            Err(Error::Config(p)) => assert_eq!(p.len(), 4, "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn custom_truth() {
        let text = r#"
seed = 1
n = 30
reps = 2
[truth]
mean = "poly(2)"
mean_coefficients = [1, 0, 2]
variance = "x"
variance_coefficients = [0.5]
[[arms]]
kind = "oracle"
"#;
        let spec = StudyConfig::parse_str(text).unwrap().to_spec().unwrap();
        assert!((spec.truth.f(0.5) - 1.5).abs() < 1e-15);
        assert!((spec.truth.sigma2(0.5) - 0.25).abs() < 1e-15);
    }
}
