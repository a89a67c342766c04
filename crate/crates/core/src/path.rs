//! Time grids and piecewise-linear trajectories with exact Bochner norms.
//!
//! Every norm here is evaluated cell by cell in closed form: the squared
//! metric norm of a linear segment is a quadratic in time, so `L²` and `L¹`
//! integrals have explicit antiderivatives and the `L∞` norm is attained at a
//! node.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Metric;

/// Relative tolerance used when merging nearly coincident grid points.
const MERGE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    times: Vec<f64>,
}

impl Grid {
    /// Nodes must start at 0 and increase strictly.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidParameter("a grid needs at least two nodes".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidParameter(format!("grid must start at 0, starts at {}", times[0])));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("grid is not strictly increasing".into()));
        }
        Ok(Self { times })
    }

    /// `t_i = i·T/N`, with `t_N = T` exactly.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || steps == 0 {
            return Err(Error::InvalidParameter(format!(
                "uniform grid needs T > 0 and N ≥ 1, got T = {horizon}, N = {steps}"
            )));
        }
        let mut times: Vec<f64> = (0..=steps).map(|i| horizon * i as f64 / steps as f64).collect();
        times[steps] = horizon;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_cells(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty grid")
    }

    /// Length of cell `i`, i.e. `t_{i+1} − t_i`.
    pub fn step(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    pub fn same_horizon(&self, other: &Grid) -> bool {
        (self.horizon() - other.horizon()).abs() <= MERGE_TOL * self.horizon().max(other.horizon())
    }

    /// Cell index and local coordinate `s ∈ [0, 1]` of `t`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let horizon = self.horizon();
        if !(t >= 0.0 && t <= horizon) {
            return Err(Error::OutOfRange { t, horizon });
        }
        let cell = match self.times.binary_search_by(|x| x.partial_cmp(&t).expect("finite")) {
            Ok(i) => return Ok(if i == self.n_cells() { (i - 1, 1.0) } else { (i, 0.0) }),
            Err(i) => i - 1,
        };
        Ok((cell, (t - self.times[cell]) / self.step(cell)))
    }

    /// Sorted union of both node sets; nodes closer than a relative
    /// tolerance are merged.
    pub fn union(&self, other: &Grid) -> Result<Grid> {
        if !self.same_horizon(other) {
            return Err(Error::InvalidParameter(format!(
                "grids have different horizons {} and {}",
                self.horizon(),
                other.horizon()
            )));
        }
        let tol = MERGE_TOL * self.horizon();
        let mut all: Vec<f64> = self.times.iter().chain(&other.times).copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut out: Vec<f64> = Vec::with_capacity(all.len());
        for t in all {
            if out.last().is_none_or(|&l| t - l > tol) {
                out.push(t);
            }
        }
        *out.last_mut().expect("nonempty") = self.horizon();
        Grid::new(out)
    }
}

/// Exponent of a Lebesgue norm, `1 ≤ p ≤ ∞` (use `f64::INFINITY` for ∞).
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("exponent must lie in [1, ∞], got {p}")));
    }
    Ok(if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    })
}

/// Continuous piecewise-linear trajectory in `R^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PwLinear {
    grid: Grid,
    values: Vec<DVector<f64>>,
}

impl PwLinear {
    pub fn new(grid: Grid, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "trajectory nodes",
                expected: grid.len(),
                found: values.len(),
            });
        }
        let k = values[0].len();
        if let Some(v) = values.iter().find(|v| v.len() != k) {
            return Err(Error::DimensionMismatch { what: "trajectory value size", expected: k, found: v.len() });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid node.
    pub fn sample(grid: Grid, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        let values = grid.times().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid, value: DVector<f64>) -> Self {
        let values = vec![value; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn node(&self, i: usize) -> &DVector<f64> {
        &self.values[i]
    }

    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        let (i, s) = self.grid.locate(t)?;
        if s == 0.0 {
            return Ok(self.values[i].clone());
        }
        if s == 1.0 {
            return Ok(self.values[i + 1].clone());
        }
        Ok(&self.values[i] * (1.0 - s) + &self.values[i + 1] * s)
    }

    /// Same interpolant represented on a finer (or any) grid with the same
    /// horizon.
    pub fn resample(&self, grid: &Grid) -> Result<PwLinear> {
        if !self.grid.same_horizon(grid) {
            return Err(Error::InvalidParameter("resampling to a different horizon".into()));
        }
        let values = grid.times().iter().map(|&t| self.eval(t.min(self.grid.horizon()))).collect::<Result<Vec<_>>>()?;
        PwLinear::new(grid.clone(), values)
    }

    /// `self − other`, evaluated on the union grid.
    pub fn difference(&self, other: &PwLinear) -> Result<PwLinear> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                what: "trajectory value size",
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if self.grid == other.grid {
            let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
            return PwLinear::new(self.grid.clone(), values);
        }
        let grid = self.grid.union(&other.grid)?;
        let a = self.resample(&grid)?;
        let b = other.resample(&grid)?;
        let values = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        PwLinear::new(grid, values)
    }

    /// Constant derivative on each cell.
    pub fn derivatives(&self) -> Vec<DVector<f64>> {
        (0..self.grid.n_cells()).map(|i| (&self.values[i + 1] - &self.values[i]) / self.grid.step(i)).collect()
    }

    pub fn sup_norm(&self, m: &Metric) -> f64 {
        self.values.iter().map(|v| m.norm(v)).fold(0.0, f64::max)
    }

    pub fn l2_norm_squared(&self, m: &Metric) -> f64 {
        (0..self.grid.n_cells())
            .map(|i| {
                let (a, b) = (&self.values[i], &self.values[i + 1]);
                let aa = m.inner(a, a);
                let ab = m.inner(a, b);
                let bb = m.inner(b, b);
                self.grid.step(i) * (aa + ab + bb) / 3.0
            })
            .sum::<f64>()
            .max(0.0)
    }

    pub fn l2_norm(&self, m: &Metric) -> f64 {
        self.l2_norm_squared(m).sqrt()
    }

    pub fn l1_norm(&self, m: &Metric) -> f64 {
        (0..self.grid.n_cells())
            .map(|i| self.grid.step(i) * segment_mean_norm(m, &self.values[i], &self.values[i + 1]))
            .sum()
    }

    /// `‖f‖_{L^p}` for `p ∈ [1, ∞]`; exact for `p ∈ {1, 2, ∞}`, otherwise
    /// composite Gauss–Legendre on each cell.
    pub fn lp_norm(&self, m: &Metric, p: f64) -> Result<f64> {
        conjugate_exponent(p)?;
        Ok(if p == 1.0 {
            self.l1_norm(m)
        } else if p == 2.0 {
            self.l2_norm(m)
        } else if p.is_infinite() {
            self.sup_norm(m)
        } else {
            (0..self.grid.n_cells())
                .map(|i| {
                    let (a, b) = (&self.values[i], &self.values[i + 1]);
                    let f = |s: f64| m.norm(&(a * (1.0 - s) + b * s)).powf(p);
                    self.grid.step(i) * gauss_legendre(f)
                })
                .sum::<f64>()
                .powf(1.0 / p)
        })
    }

    /// `‖ḟ‖_{L^q}`; exact for every `q`, the derivative being piecewise
    /// constant.
    pub fn derivative_norm(&self, m: &Metric, q: f64) -> Result<f64> {
        conjugate_exponent(q)?;
        let cells = self.derivatives();
        Ok(if q.is_infinite() {
            cells.iter().map(|d| m.norm(d)).fold(0.0, f64::max)
        } else {
            cells.iter().enumerate().map(|(i, d)| self.grid.step(i) * m.norm(d).powf(q)).sum::<f64>().powf(1.0 / q)
        })
    }

    /// Total variation `Σ ‖f_{i+1} − f_i‖`, equal to `‖ḟ‖_{L¹}`.
    pub fn variation(&self, m: &Metric) -> f64 {
        self.values.windows(2).map(|w| m.distance(&w[1], &w[0])).sum()
    }

    /// `(‖f(0)‖^p + ‖ḟ‖_{L^p}^p)^{1/p}`.
    pub fn w1p_norm(&self, m: &Metric, p: f64) -> Result<f64> {
        let f0 = m.norm(&self.values[0]);
        let d = self.derivative_norm(m, p)?;
        Ok(if p.is_infinite() { f0.max(d) } else { (f0.powf(p) + d.powf(p)).powf(1.0 / p) })
    }

    /// `(‖f(0)‖² + ‖ḟ‖²_{L²})^{1/2}`.
    pub fn h1_norm(&self, m: &Metric) -> f64 {
        self.w1p_norm(m, 2.0).expect("p = 2 is valid")
    }
}

/// `∫₀¹ ‖a + s(b − a)‖ ds` in closed form.
fn segment_mean_norm(m: &Metric, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let d = b - a;
    let dd = m.norm_squared(&d);
    let aa = m.norm_squared(a);
    if dd <= 1e-300 || dd <= 1e-28 * aa {
        return 0.5 * (aa.sqrt() + m.norm(b));
    }
    // ‖a + s d‖ = |d| √((s + s₀)² + c²)
    let ad = m.inner(a, &d);
    let s0 = ad / dd;
    let c2 = (aa / dd - s0 * s0).max(0.0);
    let prim = |x: f64| {
        let r = (x * x + c2).sqrt();
        if c2 > 0.0 {
            0.5 * (x * r + c2 * (x / c2.sqrt()).asinh())
        } else {
            0.5 * x * x.abs()
        }
    };
    dd.sqrt() * (prim(1.0 + s0) - prim(s0))
}

/// Five-point Gauss–Legendre rule on 16 equal subintervals of `[0, 1]`.
fn gauss_legendre(f: impl Fn(f64) -> f64) -> f64 {
    const X: [f64; 5] =
        [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];
    let n = 16;
    let h = 1.0 / n as f64;
    (0..n)
        .map(|j| {
            let mid = (j as f64 + 0.5) * h;
            X.iter().zip(&W).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}
