//! Experiment configuration files (TOML).

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use dynbo_core::benchmarks::{MpbSettings, PeakShape};
use dynbo_core::optimizer::AlgorithmConfig;
use dynbo_core::Bounds;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// A family of moving-peaks instances: one per dimension and severity pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub shape: PeakShape,
    pub dims: Vec<usize>,
    pub peaks: usize,
    /// `[height, shift]` severity pairs.
    pub severities: Vec<[f64; 2]>,
    pub width_severity: f64,
    pub height_range: [f64; 2],
    pub width_range: [f64; 2],
    pub lower: f64,
    pub upper: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        let s = MpbSettings::default();
        Self {
            shape: PeakShape::Cone,
            dims: vec![3],
            peaks: 5,
            severities: vec![[1.0, 1.0]],
            width_severity: s.width_severity,
            height_range: [s.height_range.0, s.height_range.1],
            width_range: [s.width_range.0, s.width_range.1],
            lower: 0.0,
            upper: 100.0,
        }
    }
}

/// One concrete benchmark instance family member.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub id: String,
    pub shape: PeakShape,
    pub dim: usize,
    pub peaks: usize,
    pub settings: MpbSettings,
    pub bounds: Bounds,
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl ProblemConfig {
    pub fn instances(&self) -> Vec<ProblemInstance> {
        let mut out = Vec::new();
        for &n in &self.dims {
            for &[h, s] in &self.severities {
                let prefix = match self.shape {
                    PeakShape::Cone => "mpb",
                    PeakShape::Gaussian => "mpbg",
                };
                out.push(ProblemInstance {
                    id: format!("{prefix}-n{n}-m{}-h{}-s{}", self.peaks, fmt_num(h), fmt_num(s)),
                    shape: self.shape,
                    dim: n,
                    peaks: self.peaks,
                    settings: MpbSettings {
                        height_range: (self.height_range[0], self.height_range[1]),
                        width_range: (self.width_range[0], self.width_range[1]),
                        height_severity: h,
                        shift_severity: s,
                        width_severity: self.width_severity,
                    },
                    bounds: Bounds::uniform(n, self.lower, self.upper).expect("validated bounds"),
                });
            }
        }
        out
    }
}

fn default_algorithms() -> Vec<AlgorithmConfig> {
    vec![AlgorithmConfig::deto(), AlgorithmConfig::rbo()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problems: Vec<ProblemConfig>,
    pub algorithms: Vec<AlgorithmConfig>,
    /// Time steps per run.
    pub steps: usize,
    pub repetitions: usize,
    pub master_seed: u64,
    pub output: PathBuf,
    /// Worker threads; all cores when unset.
    pub parallelism: Option<usize>,
    /// Algorithm the statistics compare against; `rbo` when present, else the first.
    pub baseline: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problems: vec![ProblemConfig::default()],
            algorithms: default_algorithms(),
            steps: 10,
            repetitions: 31,
            master_seed: 0,
            output: PathBuf::from("results"),
            parallelism: None,
            baseline: None,
        }
    }
}

/// A field that failed validation and what it should look like.
#[derive(Debug, Clone, PartialEq)]
pub struct InvalidField {
    pub field: String,
    pub expected: String,
}

impl fmt::Display for InvalidField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: expected {}", self.field, self.expected)
    }
}

fn invalid(field: impl Into<String>, expected: impl Into<String>) -> InvalidField {
    InvalidField { field: field.into(), expected: expected.into() }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), InvalidField> {
        if self.repetitions == 0 {
            return Err(invalid("repetitions", "an integer >= 1"));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "an integer >= 1"));
        }
        if self.parallelism == Some(0) {
            return Err(invalid("parallelism", "an integer >= 1 or no value"));
        }
        if self.problems.is_empty() {
            return Err(invalid("problems", "at least one [[problems]] table"));
        }
        for (i, p) in self.problems.iter().enumerate() {
            let field = |name: &str| format!("problems[{i}].{name}");
            if p.dims.is_empty() || p.dims.contains(&0) {
                return Err(invalid(field("dims"), "a non-empty list of dimensions >= 1"));
            }
            if p.peaks == 0 {
                return Err(invalid(field("peaks"), "an integer >= 1"));
            }
            if p.severities.is_empty() || p.severities.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid(field("severities"), "a non-empty list of [height, shift] pairs >= 0"));
            }
            if !(p.lower < p.upper) || !p.lower.is_finite() || !p.upper.is_finite() {
                return Err(invalid(field("lower"), "a finite value below `upper`"));
            }
            if !(p.height_range[0] <= p.height_range[1]) {
                return Err(invalid(field("height_range"), "[min, max] with min <= max"));
            }
            if !(0.0 < p.width_range[0] && p.width_range[0] <= p.width_range[1]) {
                return Err(invalid(field("width_range"), "[min, max] with 0 < min <= max"));
            }
            if !(p.width_severity >= 0.0) {
                return Err(invalid(field("width_severity"), "a value >= 0"));
            }
        }
        if self.algorithms.is_empty() {
            return Err(invalid("algorithms", "at least one [[algorithms]] table"));
        }
        let mut names = BTreeSet::new();
        for (i, a) in self.algorithms.iter().enumerate() {
            if !names.insert(a.name.as_str()) {
                return Err(invalid(format!("algorithms[{i}].name"), "a name unique among algorithms"));
            }
            if a.name.is_empty() || !a.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(invalid(format!("algorithms[{i}].name"), "a non-empty name of letters, digits, '-' or '_'"));
            }
            a.validate().map_err(|e| invalid(format!("algorithms[{i}]"), e.to_string()))?;
        }
        if let Some(b) = &self.baseline {
            if !names.contains(b.as_str()) {
                return Err(invalid("baseline", "the name of a configured algorithm"));
            }
        }
        Ok(())
    }

    /// Name of the algorithm the statistics compare against.
    pub fn baseline_name(&self) -> &str {
        match &self.baseline {
            Some(b) => b,
            None => self
                .algorithms
                .iter()
                .find(|a| a.name == "rbo")
                .unwrap_or(&self.algorithms[0])
                .name
                .as_str(),
        }
    }

    pub fn instances(&self) -> Vec<ProblemInstance> {
        self.problems.iter().flat_map(ProblemConfig::instances).collect()
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
        cfg.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    ExperimentConfig::from_toml(&text)
}
