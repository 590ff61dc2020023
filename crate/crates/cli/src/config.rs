//! TOML experiment configuration.
//!
//! A file names one experiment and carries a section of the same name:
//!
//! ```toml
//! experiment = "spin"
//! seed = 7
//!
//! [output]
//! path = "out/spin.csv"
//! format = "csv"
//!
//! [spin]
//! epsilon = 1.0
//! sigma = 1e-3
//! t_cal = 3.0
//! s = { min = -12.0, max = 12.0, points = 241 }
//! ```
//!
//! Unknown keys are rejected. Relative paths inside the file resolve against
//! the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Collapse,
    Ensemble,
    Measurement,
    Records,
    Spin,
    Decay,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Collapse => "collapse",
            Self::Ensemble => "ensemble",
            Self::Measurement => "measurement",
            Self::Records => "records",
            Self::Spin => "spin",
            Self::Decay => "decay",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

/// Evenly spaced values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Span {
    pub fn check(&self, key: &str) -> Result<(), CliError> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(CliError::Config(format!("`{key}`: min and max must be finite")));
        }
        match self.points {
            0 => Err(CliError::Config(format!("`{key}`: points must be at least 1"))),
            1 if self.min != self.max => Err(CliError::Config(format!(
                "`{key}`: a single point needs min == max"
            ))),
            1 => Ok(()),
            _ if self.max <= self.min => Err(CliError::Config(format!("`{key}`: need min < max"))),
            _ => Ok(()),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.max } else { self.min + h * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseSection {
    pub lambda: f64,
    pub energies: Vec<f64>,
    /// Born weights `|c_E|²`; normalized on load.
    pub weights: Vec<f64>,
    pub phases: Option<Vec<f64>>,
    /// Sample times, all > 0.
    pub times: Span,
    pub trajectories: u64,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub lambda: f64,
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
    pub phases: Option<Vec<f64>>,
    pub times: Span,
    pub trajectories: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub lambda: f64,
    /// Branch fixture: `energy magnitude theta1 theta2 [magnitude2]` per line.
    pub fixture: PathBuf,
    /// `[re, im]`; both default to `1/√2`.
    pub beta1: Option<[f64; 2]>,
    pub beta2: Option<[f64; 2]>,
    pub times: Span,
    /// Record values are `B = 2λ t ê` for each `ê` in this span.
    pub e_hat: Span,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub energies: Vec<f64>,
    /// Nonnegative; normalized on load.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordsSection {
    pub lambda: f64,
    pub t0: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    pub plus: SpectrumSpec,
    pub minus: SpectrumSpec,
    /// Evaluation times, all > t0.
    pub times: Span,
    /// `[c1, c2]`: minus region `(-∞, c1]`, neutral `(c1, c2)`, plus `[c2, ∞)`.
    pub cuts: [f64; 2],
}

/// Smearing width, given directly or as `√(λ·age)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Window {
    pub t_cal: Option<f64>,
    pub lambda: Option<f64>,
    pub age: Option<f64>,
}

impl Window {
    pub fn resolve(&self) -> Result<f64, CliError> {
        match (self.t_cal, self.lambda, self.age) {
            (Some(t), None, None) => {
                if t >= 0.0 && t.is_finite() {
                    Ok(t)
                } else {
                    Err(CliError::Config(format!("`t_cal` must be finite and >= 0, got {t}")))
                }
            }
            (None, Some(l), Some(a)) => {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(CliError::Config(format!("`lambda` must be finite and > 0, got {l}")));
                }
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(CliError::Config(format!("`age` must be finite and >= 0, got {a}")));
                }
                Ok((l * a).sqrt())
            }
            (None, None, None) => Err(CliError::Config(
                "missing smearing width: give `t_cal`, or `lambda` and `age`".into(),
            )),
            _ => Err(CliError::Config(
                "give either `t_cal` or both `lambda` and `age`, not a mix".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSection {
    pub epsilon: f64,
    pub sigma: f64,
    pub t_cal: Option<f64>,
    pub lambda: Option<f64>,
    pub age: Option<f64>,
    /// Real amplitudes; both default to `1/√2`.
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Time since the packet passed the switch.
    pub s: Span,
}

impl SpinSection {
    pub fn window(&self) -> Window {
        Window {
            t_cal: self.t_cal,
            lambda: self.lambda,
            age: self.age,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayQuantity {
    Occupation,
    Position,
    Kgrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KGridStartKind {
    Decay,
    Incident,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KGridSection {
    pub n_modes: Option<usize>,
    /// In units of Γ.
    pub half_width: Option<f64>,
    pub dt: Option<f64>,
    pub s_end: f64,
    pub start: KGridStartKind,
    /// Time before arrival at which an incident run starts.
    pub lead: Option<f64>,
    pub sample_every: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    pub epsilon: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub x0: Option<f64>,
    pub t_cal: Option<f64>,
    pub lambda: Option<f64>,
    pub age: Option<f64>,
    pub quantity: DecayQuantity,
    /// Elapsed-time grid for `occupation`.
    pub s: Option<Span>,
    /// Position grid for `position`.
    pub x: Option<Span>,
    /// Elapsed time for `position`.
    pub at_s: Option<f64>,
    pub kgrid: Option<KGridSection>,
}

impl DecaySection {
    pub fn window(&self) -> Window {
        Window {
            t_cal: self.t_cal,
            lambda: self.lambda,
            age: self.age,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentKind,
    seed: Option<u64>,
    output: Option<OutputSection>,
    collapse: Option<CollapseSection>,
    ensemble: Option<EnsembleSection>,
    measurement: Option<MeasurementSection>,
    records: Option<RecordsSection>,
    spin: Option<SpinSection>,
    decay: Option<DecaySection>,
}

#[derive(Debug, Clone)]
pub enum Section {
    Collapse(CollapseSection),
    Ensemble(EnsembleSection),
    Measurement(MeasurementSection),
    Records(RecordsSection),
    Spin(SpinSection),
    Decay(DecaySection),
}

impl Section {
    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            Self::Collapse(s) => serde_json::to_value(s),
            Self::Ensemble(s) => serde_json::to_value(s),
            Self::Measurement(s) => serde_json::to_value(s),
            Self::Records(s) => serde_json::to_value(s),
            Self::Spin(s) => serde_json::to_value(s),
            Self::Decay(s) => serde_json::to_value(s),
        };
        v.unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub output: OutputSection,
    pub section: Section,
    /// Directory of the config file, for relative paths.
    pub base_dir: PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base_dir)
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let present: Vec<&str> = [
            raw.collapse.as_ref().map(|_| "collapse"),
            raw.ensemble.as_ref().map(|_| "ensemble"),
            raw.measurement.as_ref().map(|_| "measurement"),
            raw.records.as_ref().map(|_| "records"),
            raw.spin.as_ref().map(|_| "spin"),
            raw.decay.as_ref().map(|_| "decay"),
        ]
        .into_iter()
        .flatten()
        .collect();
        let name = raw.experiment.name();
        if let Some(other) = present.iter().find(|&&s| s != name) {
            return Err(CliError::Config(format!(
                "section [{other}] does not belong to experiment `{name}`"
            )));
        }
        let missing = || CliError::Config(format!("missing section [{name}]"));
        let section = match raw.experiment {
            ExperimentKind::Collapse => Section::Collapse(raw.collapse.ok_or_else(missing)?),
            ExperimentKind::Ensemble => Section::Ensemble(raw.ensemble.ok_or_else(missing)?),
            ExperimentKind::Measurement => Section::Measurement(raw.measurement.ok_or_else(missing)?),
            ExperimentKind::Records => Section::Records(raw.records.ok_or_else(missing)?),
            ExperimentKind::Spin => Section::Spin(raw.spin.ok_or_else(missing)?),
            ExperimentKind::Decay => Section::Decay(raw.decay.ok_or_else(missing)?),
        };
        Ok(Self {
            experiment: raw.experiment,
            seed: raw.seed.unwrap_or(0),
            output: raw.output.unwrap_or_default(),
            section,
            base_dir,
        })
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
