use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DiscreteModel;
use crate::path::Grid;

/// Named load shapes, each vanishing at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    /// `t/T`.
    Ramp,
    /// Up to the peak at `T/2` and back to zero.
    Triangle,
    /// `sin(2πt/T)`: load, unload, reverse, return to zero.
    Cycle,
}

impl Waveform {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ramp" => Ok(Waveform::Ramp),
            "triangle" => Ok(Waveform::Triangle),
            "cycle" => Ok(Waveform::Cycle),
            _ => Err(Error::UnknownName(name.to_string())),
        }
    }

    /// Shape value at `t ∈ [0, T]`.
    pub fn shape(&self, t: f64, horizon: f64) -> f64 {
        let s = t / horizon;
        match self {
            Waveform::Ramp => s,
            Waveform::Triangle => 1.0 - (2.0 * s - 1.0).abs(),
            Waveform::Cycle => (2.0 * PI * s).sin(),
        }
    }
}

/// Control values `g_i` on a uniform grid, with `g_0 = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadProgram {
    grid: Grid,
    g: Vec<Vec<f64>>,
}

impl LoadProgram {
    pub fn new(horizon: f64, g: Vec<Vec<f64>>) -> Result<Self> {
        if g.len() < 2 {
            return Err(Error::InvalidParameter("a load program needs at least one step".into()));
        }
        let grid = Grid::uniform(horizon, g.len() - 1)?;
        let m = g[0].len();
        if let Some(row) = g.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { what: "control coordinates", expected: m, found: row.len() });
        }
        if g[0].iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidParameter("the load must vanish at t = 0".into()));
        }
        if g.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite load value".into()));
        }
        Ok(Self { grid, g })
    }

    /// Samples `f` at `t_i = iT/N`; the value at `t = 0` is forced to zero.
    pub fn from_fn(horizon: f64, steps: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let grid = Grid::uniform(horizon, steps)?;
        let mut g: Vec<Vec<f64>> = grid.times().iter().map(|&t| f(t)).collect();
        for v in g[0].iter_mut() {
            *v = 0.0;
        }
        Self::new(horizon, g)
    }

    /// `amplitude · shape(t) · d` with `d` the model's load direction.
    pub fn waveform(model: &DiscreteModel, wave: Waveform, amplitude: f64, horizon: f64, steps: usize) -> Result<Self> {
        let dir = model.load_direction().to_vec();
        Self::from_fn(horizon, steps, |t| {
            let a = amplitude * wave.shape(t, horizon);
            dir.iter().map(|d| a * d).collect()
        })
    }

    pub fn zero(n_controls: usize, horizon: f64, steps: usize) -> Result<Self> {
        Self::from_fn(horizon, steps, |_| vec![0.0; n_controls])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.g.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    pub fn tau(&self) -> f64 {
        self.horizon() / self.steps() as f64
    }

    pub fn n_controls(&self) -> usize {
        self.g[0].len()
    }

    pub fn controls(&self) -> &[Vec<f64>] {
        &self.g
    }

    /// `ℓ_i = E g_i` at every node.
    pub fn loads(&self, model: &DiscreteModel) -> Result<Vec<Vec<f64>>> {
        self.g.iter().map(|g| model.load_of_control(g)).collect()
    }
}
