//! Scenario files: one JSON document per experiment.

use std::path::{Path, PathBuf};

use plastlab::control::{AdmissibleSet, ControlOptions};
use plastlab::forward::{StepOptions, Waveform};
use plastlab::{Execution, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    pub load: LoadSection,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub forward: ForwardOptions,
    #[serde(default)]
    pub converge: ConvergeOptions,
    #[serde(default)]
    pub evi: EviOptions,
    #[serde(default)]
    pub control: ControlSection,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// `--seed` takes precedence.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub params: ModelParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    pub waveform: Waveform,
    pub amplitude: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    pub steps: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Forward,
    Converge,
    EviCheck,
    Control,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Forward => "forward",
            ExperimentKind::Converge => "converge",
            ExperimentKind::EviCheck => "evi-check",
            ExperimentKind::Control => "control",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardOptions {
    pub step: StepOptions,
    pub complementarity_tol: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self { step: StepOptions::default(), complementarity_tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeOptions {
    /// Step counts of the studied grids; `load.steps` is not used.
    pub steps: Vec<usize>,
    pub reference_steps: usize,
    pub min_order: f64,
    pub h1_max_ratio: f64,
    pub lambda_max_ratio: f64,
    /// Amplitude of the oscillating weak-convergence probe; off when absent.
    pub weak_probe_amplitude: Option<f64>,
    /// Random load pairs for the stability probe; off when zero.
    pub stability_pairs: usize,
    pub stability_steps: usize,
}

impl Default for ConvergeOptions {
    fn default() -> Self {
        Self {
            steps: vec![8, 16, 32, 64, 128, 256, 512],
            reference_steps: 1024,
            min_order: 0.45,
            h1_max_ratio: 0.1,
            lambda_max_ratio: 0.2,
            weak_probe_amplitude: None,
            stability_pairs: 0,
            stability_steps: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Interval,
    Ball,
    Cylinder,
}

impl SetKind {
    pub fn name(&self) -> &'static str {
        match self {
            SetKind::Interval => "interval",
            SetKind::Ball => "ball",
            SetKind::Cylinder => "cylinder",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "interval" => Some(SetKind::Interval),
            "ball" => Some(SetKind::Ball),
            "cylinder" => Some(SetKind::Cylinder),
            _ => None,
        }
    }
}

/// A Lebesgue exponent: a number `≥ 1` or the string `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Named(String),
}

impl Exponent {
    /// Command-line form: a number or `inf`.
    pub fn parse(s: &str) -> Result<f64, CliError> {
        match s.parse::<f64>() {
            Ok(p) => Exponent::Finite(p).value(),
            Err(_) => Exponent::Named(s.to_string()).value(),
        }
    }

    pub fn value(&self) -> Result<f64, CliError> {
        let p = match self {
            Exponent::Finite(p) => *p,
            Exponent::Named(s) if s == "inf" => f64::INFINITY,
            Exponent::Named(s) => return Err(CliError::config(format!("unknown exponent `{s}`"))),
        };
        if !(p >= 1.0) {
            return Err(CliError::config(format!("exponent must be at least 1, got {p}")));
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EviOptions {
    pub sets: Vec<SetKind>,
    pub exponents: Vec<Exponent>,
    /// Random pairs per set and exponent.
    pub pairs: usize,
    pub max_steps: usize,
}

impl Default for EviOptions {
    fn default() -> Self {
        Self {
            sets: vec![SetKind::Interval, SetKind::Ball, SetKind::Cylinder],
            exponents: vec![Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Named("inf".into())],
            pairs: 500,
            max_steps: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveVariant {
    /// Displacement path tracking.
    Psi1,
    /// Final displacement.
    Psi2,
    /// Final strain.
    Psi3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub objective: ObjectiveVariant,
    /// `psi1`: nodal amplitudes of `u_d(t) = shape(t)·target`;
    /// `psi2`: `u_{T,d}`; `psi3`: strain components, the same at every point.
    /// A single value is broadcast.
    pub target: Vec<f64>,
    /// Time shape of the `psi1` target.
    pub target_waveform: Waveform,
    pub nu: f64,
    pub admissible: AdmissibleSet,
    pub solver: ControlOptions,
    /// Grids of the approximation experiment; skipped when empty.
    pub approximation_steps: Vec<usize>,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            objective: ObjectiveVariant::Psi2,
            target: vec![0.5],
            target_waveform: Waveform::Triangle,
            nu: 1e-2,
            admissible: AdmissibleSet::U2,
            solver: ControlOptions::default(),
            approximation_steps: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::config(format!("schema: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Range checks not expressible in the schema.
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.model.params;
        for (name, v) in [("mu", p.mu), ("k1", p.k1), ("sigma0", p.sigma0)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::config(format!("model.params.{name} must be positive, got {v}")));
            }
        }
        if !p.lam.is_finite() {
            return Err(CliError::config("model.params.lam must be finite"));
        }
        let l = &self.load;
        if !(l.horizon > 0.0) || !l.horizon.is_finite() {
            return Err(CliError::config(format!("load.horizon must be positive, got {}", l.horizon)));
        }
        if !l.amplitude.is_finite() {
            return Err(CliError::config("load.amplitude must be finite"));
        }
        if l.steps == 0 {
            return Err(CliError::config("load.steps must be at least 1"));
        }
        match self.experiment {
            ExperimentKind::Forward => {
                if !(self.forward.complementarity_tol >= 0.0) {
                    return Err(CliError::config("forward.complementarity_tol must be nonnegative"));
                }
            }
            ExperimentKind::Converge => {
                let c = &self.converge;
                if c.steps.len() < 2 {
                    return Err(CliError::config("converge.steps needs at least two grids"));
                }
                if c.stability_pairs > 0 && c.stability_steps == 0 {
                    return Err(CliError::config("converge.stability_steps must be at least 1"));
                }
            }
            ExperimentKind::EviCheck => {
                let e = &self.evi;
                if e.sets.is_empty() || e.exponents.is_empty() || e.pairs == 0 {
                    return Err(CliError::config("evi needs at least one set, one exponent and one pair"));
                }
                if e.max_steps < 3 {
                    return Err(CliError::config("evi.max_steps must be at least 3"));
                }
                for x in &e.exponents {
                    x.value()?;
                }
            }
            ExperimentKind::Control => {
                let c = &self.control;
                if !(c.nu > 0.0) || !c.nu.is_finite() {
                    return Err(CliError::config(format!("control.nu must be positive, got {}", c.nu)));
                }
                if let AdmissibleSet::U1 { rho } = c.admissible {
                    if !(rho >= 0.0) || !rho.is_finite() {
                        return Err(CliError::config(format!("control.admissible.rho must be nonnegative, got {rho}")));
                    }
                }
                if c.target.is_empty() || c.target.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::config("control.target must be a nonempty list of numbers"));
                }
                let s = &c.solver;
                if !(s.tol > 0.0)
                    || !(s.fd_step > 0.0)
                    || !(s.initial_step > 0.0)
                    || !(s.backtrack > 0.0 && s.backtrack < 1.0)
                {
                    return Err(CliError::config("control.solver tolerances and step factors must be positive"));
                }
            }
        }
        Ok(())
    }
}
