//! Optimal control of the time-discrete problem: objectives over control
//! trajectories, admissible sets, a projected-gradient solver with
//! finite-difference gradients, and approximation experiments over `τ`.

mod solver;

pub use solver::{
    approximation_experiment, projected_gradient, AnchoredRow, ApproximationReport, ApproximationRow, ControlOptions,
    IterationRecord, OptimizationResult, SolverStatus,
};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{run_forward, LoadProgram, StepOptions, Trajectory};
use crate::metric::Metric;
use crate::model::DiscreteModel;
use crate::par::{self, Execution};
use crate::path::{Grid, PwLinear};
use crate::tensor::SymTensor;

/// Tracking term `ψ` of the reduced objective.
#[derive(Clone, Debug, PartialEq)]
pub enum Tracking {
    /// `½‖u − u_d‖²_{L²(0,T; L²)}` for a piecewise-linear target.
    Path(PwLinear),
    /// `½‖u(T) − u_{T,d}‖²_{L²}`.
    FinalDisplacement(Vec<f64>),
    /// `½‖ε(u(T)) − ε_{T,d}‖²_{L²}`, one tensor per material point.
    FinalStrain(Vec<SymTensor>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub tracking: Tracking,
    /// Tikhonov weight on `‖g‖²_{H¹(0,T;U)}`.
    pub nu: f64,
}

impl Objective {
    pub fn new(tracking: Tracking, nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!("Tikhonov weight must be positive, got {nu}")));
        }
        Ok(Self { tracking, nu })
    }

    pub fn variant(&self) -> &'static str {
        match self.tracking {
            Tracking::Path(_) => "psi1",
            Tracking::FinalDisplacement(_) => "psi2",
            Tracking::FinalStrain(_) => "psi3",
        }
    }

    fn validate(&self, model: &DiscreteModel, horizon: f64) -> Result<()> {
        match &self.tracking {
            Tracking::Path(p) => {
                if p.dim() != model.n_dofs() {
                    return Err(Error::DimensionMismatch {
                        what: "tracking target",
                        expected: model.n_dofs(),
                        found: p.dim(),
                    });
                }
                if (p.grid().horizon() - horizon).abs() > 1e-12 * horizon {
                    return Err(Error::InvalidParameter("tracking target must span the control horizon".into()));
                }
            }
            Tracking::FinalDisplacement(u) => {
                if u.len() != model.n_dofs() {
                    return Err(Error::DimensionMismatch {
                        what: "final displacement target",
                        expected: model.n_dofs(),
                        found: u.len(),
                    });
                }
            }
            Tracking::FinalStrain(e) => {
                if e.len() != model.n_points() {
                    return Err(Error::DimensionMismatch {
                        what: "final strain target",
                        expected: model.n_points(),
                        found: e.len(),
                    });
                }
                if e.iter().any(|t| t.dim() != model.dim()) {
                    return Err(Error::InvalidParameter("strain target has the wrong tensor dimension".into()));
                }
            }
        }
        Ok(())
    }

    /// `ψ(u)` for a solved trajectory.
    pub fn psi(&self, model: &DiscreteModel, traj: &Trajectory) -> Result<f64> {
        let mass = Metric::Diagonal(DVector::from_column_slice(model.displacement_mass()));
        match &self.tracking {
            Tracking::Path(target) => Ok(0.5 * traj.u_path().difference(target)?.l2_norm_squared(&mass)),
            Tracking::FinalDisplacement(target) => {
                let last = traj.u.last().expect("nonempty trajectory");
                let d = DVector::from_iterator(last.len(), last.iter().zip(target).map(|(a, b)| a - b));
                Ok(0.5 * mass.norm_squared(&d))
            }
            Tracking::FinalStrain(target) => {
                let eps = model.strain_of(traj.u.last().expect("nonempty trajectory"))?;
                Ok(0.5
                    * eps
                        .iter()
                        .zip(target)
                        .zip(model.weights())
                        .map(|((e, t), w)| w * e.axpy(-1.0, t).norm_squared())
                        .sum::<f64>())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AdmissibleSet {
    /// `g(0) = 0` and `‖g_i‖_U ≤ ρ` at every node.
    U1 { rho: f64 },
    /// `g(0) = g(T) = 0`.
    U2,
}

impl AdmissibleSet {
    /// Whether [`ControlProblem::project`] is the exact `H¹` projection.
    pub fn projection_is_exact(&self) -> bool {
        matches!(self, AdmissibleSet::U2)
    }
}

/// Values of the reduced objective and its parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub total: f64,
    pub psi: f64,
    /// `(ν/2)‖g‖²_{H¹}`.
    pub tikhonov: f64,
    /// `½‖g̃ − g‖²_{H¹}`, zero without an anchor.
    pub prox: f64,
}

/// The time-discrete control problem on a uniform grid. Controls are node
/// lists `g_0, …, g_N` with `g_0 = 0`; the free unknowns are `g_1, …, g_N`.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    model: DiscreteModel,
    grid: Grid,
    objective: Objective,
    admissible: AdmissibleSet,
    prox_anchor: Option<Vec<Vec<f64>>>,
    step_options: StepOptions,
    gram: DMatrix<f64>,
    gram_chol: Cholesky<f64, Dyn>,
}

impl ControlProblem {
    pub fn new(
        model: DiscreteModel,
        horizon: f64,
        steps: usize,
        objective: Objective,
        admissible: AdmissibleSet,
    ) -> Result<Self> {
        let grid = Grid::uniform(horizon, steps)?;
        objective.validate(&model, horizon)?;
        if let AdmissibleSet::U1 { rho } = admissible {
            if !(rho >= 0.0) {
                return Err(Error::InvalidParameter(format!("radius must be nonnegative, got {rho}")));
            }
        }
        let gram = h1_gram(&grid, model.control_weights());
        let gram_chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("control weights must be positive".into()))?;
        Ok(Self {
            model,
            grid,
            objective,
            admissible,
            prox_anchor: None,
            step_options: StepOptions { tol: 1e-12, ..StepOptions::default() },
            gram,
            gram_chol,
        })
    }

    /// Adds `½‖g̃ − g‖²_{H¹}` to the objective.
    pub fn with_anchor(mut self, anchor: Vec<Vec<f64>>) -> Result<Self> {
        self.check_nodes(&anchor)?;
        self.prox_anchor = Some(anchor);
        Ok(self)
    }

    pub fn with_step_options(mut self, opts: StepOptions) -> Self {
        self.step_options = opts;
        self
    }

    pub fn model(&self) -> &DiscreteModel {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn admissible(&self) -> AdmissibleSet {
        self.admissible
    }

    pub fn prox_anchor(&self) -> Option<&[Vec<f64>]> {
        self.prox_anchor.as_deref()
    }

    pub fn step_options(&self) -> &StepOptions {
        &self.step_options
    }

    /// Number of free unknowns `N·m`.
    pub fn n_unknowns(&self) -> usize {
        self.steps() * self.model.n_controls()
    }

    /// Gram matrix of the discrete `H¹(0,T;U)` inner product on the free
    /// unknowns.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    fn check_nodes(&self, g: &[Vec<f64>]) -> Result<()> {
        if g.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { what: "control nodes", expected: self.grid.len(), found: g.len() });
        }
        let m = self.model.n_controls();
        if let Some(row) = g.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { what: "control coordinates", expected: m, found: row.len() });
        }
        if g[0].iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidParameter("controls must vanish at t = 0".into()));
        }
        Ok(())
    }

    pub fn flatten(&self, g: &[Vec<f64>]) -> Result<DVector<f64>> {
        self.check_nodes(g)?;
        Ok(DVector::from_iterator(self.n_unknowns(), g[1..].iter().flatten().copied()))
    }

    pub fn unflatten(&self, x: &DVector<f64>) -> Vec<Vec<f64>> {
        let m = self.model.n_controls();
        std::iter::once(vec![0.0; m]).chain(x.as_slice().chunks(m).map(|c| c.to_vec())).collect()
    }

    /// Samples a closed-form control on the grid, forcing `g(0) = 0`.
    pub fn sample(&self, f: impl Fn(f64) -> Vec<f64>) -> Vec<Vec<f64>> {
        let m = self.model.n_controls();
        self.grid.times().iter().enumerate().map(|(i, &t)| if i == 0 { vec![0.0; m] } else { f(t) }).collect()
    }

    /// `H¹(0,T;U)` inner product of two free-unknown vectors.
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&(&self.gram * b))
    }

    pub fn norm(&self, a: &DVector<f64>) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// `H¹` Riesz representative of a Euclidean gradient.
    pub fn riesz(&self, euclidean: &DVector<f64>) -> DVector<f64> {
        self.gram_chol.solve(euclidean)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        let m = self.model.n_controls();
        match self.admissible {
            AdmissibleSet::U2 => x.rows((self.steps() - 1) * m, m).amax() <= tol,
            AdmissibleSet::U1 { rho } => x.as_slice().chunks(m).all(|c| self.u_norm(c) <= rho + tol),
        }
    }

    fn u_norm(&self, g: &[f64]) -> f64 {
        g.iter().zip(self.model.control_weights()).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
    }

    /// Projection onto the admissible set. For `U2` the exact projection
    /// in the `H¹` metric onto `{g_N = 0}`; for `U1` nodewise radial
    /// scaling, which is exact only in the `L²`-in-time sense.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = self.model.n_controls();
        match self.admissible {
            AdmissibleSet::U2 => {
                // x − M⁻¹Cᵀ(CM⁻¹Cᵀ)⁻¹Cx with C selecting the last node
                let n = self.n_unknowns();
                let off = n - m;
                let mut ct = DMatrix::zeros(n, m);
                for j in 0..m {
                    ct[(off + j, j)] = 1.0;
                }
                let minv_ct = self.gram_chol.solve(&ct);
                let s = minv_ct.rows(off, m).into_owned();
                let lam = s.cholesky().expect("Schur complement of an SPD matrix").solve(&x.rows(off, m).into_owned());
                let mut p = x - minv_ct * lam;
                p.rows_mut(off, m).fill(0.0);
                p
            }
            AdmissibleSet::U1 { rho } => {
                let mut p = x.clone();
                for c in p.as_mut_slice().chunks_mut(m) {
                    let nrm = self.u_norm(c);
                    if nrm > rho {
                        let s = if nrm > 0.0 { rho / nrm } else { 0.0 };
                        c.iter_mut().for_each(|v| *v *= s);
                    }
                }
                p
            }
        }
    }

    pub fn load_program(&self, x: &DVector<f64>) -> Result<LoadProgram> {
        LoadProgram::new(self.grid.horizon(), self.unflatten(x))
    }

    /// Reduced objective `ψ(u(g)) + (ν/2)‖g‖²_{H¹} [+ ½‖g̃ − g‖²_{H¹}]`
    /// and the state trajectory.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<(ObjectiveValue, Trajectory)> {
        if x.len() != self.n_unknowns() {
            return Err(Error::DimensionMismatch {
                what: "control unknowns",
                expected: self.n_unknowns(),
                found: x.len(),
            });
        }
        let traj = run_forward(&self.model, &self.load_program(x)?, &self.step_options)?;
        let psi = self.objective.psi(&self.model, &traj)?;
        let tikhonov = 0.5 * self.objective.nu * self.inner(x, x);
        let prox = match &self.prox_anchor {
            Some(a) => {
                let d = self.flatten(a)? - x;
                0.5 * self.inner(&d, &d)
            }
            None => 0.0,
        };
        Ok((ObjectiveValue { total: psi + tikhonov + prox, psi, tikhonov, prox }, traj))
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.evaluate(x)?.0.total)
    }
}

/// `Σ_i |g_i − g_{i−1}|²_U / τ_i` on `g_1, …, g_N` with `g_0 = 0`.
fn h1_gram(grid: &Grid, weights: &[f64]) -> DMatrix<f64> {
    let m = weights.len();
    let n = grid.n_cells();
    let mut gram = DMatrix::zeros(n * m, n * m);
    for i in 0..n {
        let inv = 1.0 / grid.step(i);
        for (j, w) in weights.iter().enumerate() {
            let hi = i * m + j;
            gram[(hi, hi)] += w * inv;
            if i > 0 {
                let lo = (i - 1) * m + j;
                gram[(lo, lo)] += w * inv;
                gram[(lo, hi)] -= w * inv;
                gram[(hi, lo)] -= w * inv;
            }
        }
    }
    gram
}

/// Reduced objective at a node list.
pub fn reduced_objective(cp: &ControlProblem, g: &[Vec<f64>]) -> Result<(ObjectiveValue, Trajectory)> {
    cp.evaluate(&cp.flatten(g)?)
}

/// Central finite differences of the reduced objective in each unknown,
/// returned as `(H¹ Riesz representative, Euclidean gradient)`. Probes
/// are independent forward solves and run on `exec`.
pub fn fd_gradient_flat(
    cp: &ControlProblem,
    x: &DVector<f64>,
    h: f64,
    exec: Execution,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("difference step must be positive, got {h}")));
    }
    let n = cp.n_unknowns();
    let parts = par::map_range(exec, n, |j| -> Result<f64> {
        let mut xp = x.clone();
        xp[j] += h;
        let mut xm = x.clone();
        xm[j] -= h;
        Ok((cp.value(&xp)? - cp.value(&xm)?) / (2.0 * h))
    });
    let e = DVector::from_vec(parts.into_iter().collect::<Result<Vec<_>>>()?);
    Ok((cp.riesz(&e), e))
}

/// `H¹` gradient of the reduced objective as a node list (zero at `t = 0`).
pub fn fd_gradient(cp: &ControlProblem, g: &[Vec<f64>], h: f64, exec: Execution) -> Result<Vec<Vec<f64>>> {
    let (r, _) = fd_gradient_flat(cp, &cp.flatten(g)?, h, exec)?;
    Ok(cp.unflatten(&r))
}

pub fn project_admissible(cp: &ControlProblem, g: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    Ok(cp.unflatten(&cp.project(&cp.flatten(g)?)))
}

/// Discrete `H¹(0,T;U)` distance of two controls on possibly different
/// grids, evaluated exactly on the union grid.
pub fn control_distance(weights: &[f64], a: (&Grid, &[Vec<f64>]), b: (&Grid, &[Vec<f64>])) -> Result<f64> {
    let to_path = |grid: &Grid, g: &[Vec<f64>]| {
        PwLinear::new(grid.clone(), g.iter().map(|v| DVector::from_column_slice(v)).collect())
    };
    let d = to_path(a.0, a.1)?.difference(&to_path(b.0, b.1)?)?;
    Ok(d.h1_norm(&Metric::Diagonal(DVector::from_column_slice(weights))))
}

/// Linear-interpolation prolongation of a control to another grid.
pub fn prolongate(from: &Grid, g: &[Vec<f64>], to: &Grid) -> Result<Vec<Vec<f64>>> {
    let p = PwLinear::new(from.clone(), g.iter().map(|v| DVector::from_column_slice(v)).collect())?;
    Ok(p.resample(to)?.values().iter().map(|v| v.as_slice().to_vec()).collect())
}

/// Final control as written by the command line front end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub objective_variant: String,
    pub admissible: AdmissibleSet,
    pub projection_exact: bool,
    pub times: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub objective: ObjectiveValue,
    pub status: SolverStatus,
    pub iterations: usize,
}
