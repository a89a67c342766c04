//! Cross-grid comparison of trajectories and refinement experiments for the
//! time discretization.

mod probes;

pub use probes::{forward_stability_probe, weak_convergence_probe, StabilityReport, WeakProbeReport, WeakProbeRow};

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{displacement_metric, run_forward, LoadProgram, StepOptions, Trajectory, Waveform};
use crate::metric::Metric;
use crate::model::DiscreteModel;
use crate::par::{self, Execution};
use crate::path::{Grid, PwLinear};

/// Distances between two piecewise-linear paths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathDistance {
    pub linf: f64,
    pub l2: f64,
    pub h1: f64,
}

pub fn compare_paths(a: &PwLinear, b: &PwLinear, metric: &Metric) -> Result<PathDistance> {
    let d = a.difference(b)?;
    Ok(PathDistance { linf: d.sup_norm(metric), l2: d.l2_norm(metric), h1: d.h1_norm(metric) })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    /// Energy-norm distances of the generalized stresses.
    pub sigma: PathDistance,
    /// Distances of displacements in `‖ε(·)‖_S`.
    pub u: PathDistance,
    /// `‖λ_a − λ_b‖_{L²(0,T; points)}` of the piecewise-constant multipliers.
    pub lambda_l2: f64,
}

impl NormTable {
    /// `(‖ΔΣ‖²_{H¹} + ‖Δu‖²_{H¹})^{1/2}`.
    pub fn state_h1(&self) -> f64 {
        self.sigma.h1.hypot(self.u.h1)
    }
}

/// Exact `L²(0,T)` distance of piecewise-constant multiplier histories.
fn lambda_distance(model: &DiscreteModel, a: &Trajectory, b: &Trajectory, union: &Grid) -> Result<f64> {
    let mut acc = 0.0;
    for c in 0..union.n_cells() {
        let mid = 0.5 * (union.times()[c] + union.times()[c + 1]);
        let (ia, _) = a.grid.locate(mid)?;
        let (ib, _) = b.grid.locate(mid)?;
        let d: f64 =
            a.lambda[ia].iter().zip(&b.lambda[ib]).zip(model.weights()).map(|((x, y), w)| w * (x - y).powi(2)).sum();
        acc += union.step(c) * d;
    }
    Ok(acc.sqrt())
}

/// Differences of two trajectories of the same model, evaluated exactly on
/// the union grid.
pub fn compare(model: &DiscreteModel, a: &Trajectory, b: &Trajectory) -> Result<NormTable> {
    if !a.grid.same_horizon(&b.grid) {
        return Err(Error::InvalidParameter(format!(
            "trajectories have different horizons {} and {}",
            a.horizon(),
            b.horizon()
        )));
    }
    let union = a.grid.union(&b.grid)?;
    Ok(NormTable {
        sigma: compare_paths(&a.sigma_path(), &b.sigma_path(), &model.a_metric())?,
        u: compare_paths(&a.u_path(), &b.u_path(), &displacement_metric(model))?,
        lambda_l2: lambda_distance(model, a, b, &union)?,
    })
}

pub type LoadFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Closed-form control `g(t)` sampled on every grid of a study.
#[derive(Clone)]
pub struct LoadSpec {
    pub horizon: f64,
    pub g: LoadFn,
}

impl std::fmt::Debug for LoadSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LoadSpec").field("horizon", &self.horizon).finish_non_exhaustive()
    }
}

impl LoadSpec {
    pub fn waveform(model: &DiscreteModel, wave: Waveform, amplitude: f64, horizon: f64) -> Self {
        let dir = model.load_direction().to_vec();
        Self {
            horizon,
            g: Arc::new(move |t| {
                let a = amplitude * wave.shape(t, horizon);
                dir.iter().map(|d| a * d).collect()
            }),
        }
    }

    pub fn sample(&self, steps: usize) -> Result<LoadProgram> {
        LoadProgram::from_fn(self.horizon, steps, |t| (self.g)(t))
    }
}

#[derive(Clone, Debug)]
pub struct RefinementStudy {
    pub model: DiscreteModel,
    pub load: LoadSpec,
    /// Step counts `N` of the studied grids, increasing (τ decreasing).
    pub steps: Vec<usize>,
    /// Step count of the reference grid; every studied grid must divide it.
    pub reference_steps: usize,
    pub step_options: StepOptions,
    pub exec: Execution,
}

/// Solved trajectories of a study, reference last.
#[derive(Clone, Debug)]
pub struct StudyRuns {
    pub runs: Vec<Trajectory>,
    pub reference: Trajectory,
    pub tables: Vec<NormTable>,
}

impl StudyRuns {
    pub fn taus(&self) -> Vec<f64> {
        self.runs.iter().map(|t| t.tau()).collect()
    }
}

impl RefinementStudy {
    pub fn new(model: DiscreteModel, load: LoadSpec, steps: Vec<usize>, reference_steps: usize) -> Result<Self> {
        let s = Self {
            model,
            load,
            steps,
            reference_steps,
            step_options: StepOptions::default(),
            exec: Execution::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::InvalidParameter("empty step list".into()));
        }
        if self.steps.windows(2).any(|w| w[1] <= w[0]) || self.steps[0] == 0 {
            return Err(Error::InvalidParameter("step counts must increase strictly".into()));
        }
        for w in self.steps.windows(2) {
            if !w[1].is_multiple_of(w[0]) {
                return Err(Error::InvalidParameter("grids must nest".into()));
            }
        }
        let last = *self.steps.last().expect("nonempty");
        if self.reference_steps <= last || !self.reference_steps.is_multiple_of(last) {
            return Err(Error::InvalidParameter("the reference grid must strictly refine every studied grid".into()));
        }
        Ok(())
    }

    /// Solves every grid (independently, possibly in parallel) and compares
    /// each run with the reference.
    pub fn run(&self) -> Result<StudyRuns> {
        self.validate()?;
        let mut all_steps = self.steps.clone();
        all_steps.push(self.reference_steps);
        let solved = par::map(self.exec, &all_steps, |&n| {
            let loads = self.load.sample(n)?;
            run_forward(&self.model, &loads, &self.step_options)
        });
        let mut runs = solved.into_iter().collect::<Result<Vec<_>>>()?;
        let reference = runs.pop().expect("reference run");
        let tables = par::map(self.exec, &runs, |r| compare(&self.model, r, &reference))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(StudyRuns { runs, reference, tables })
    }
}

/// Least-squares slope of `log e` against `log τ`, skipping vanishing errors.
pub fn fitted_order(taus: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        taus.iter().zip(errors).filter(|(_, e)| **e > 0.0).map(|(t, e)| (t.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// `log(e_k / e_{k+1}) / log(τ_k / τ_{k+1})` for successive grids.
pub fn successive_orders(taus: &[f64], errors: &[f64]) -> Vec<Option<f64>> {
    taus.windows(2)
        .zip(errors.windows(2))
        .map(|(t, e)| (e[0] > 0.0 && e[1] > 0.0).then(|| (e[0] / e[1]).ln() / (t[0] / t[1]).ln()))
        .collect()
}

fn is_monotone(errors: &[f64], slack: f64) -> bool {
    errors.windows(2).all(|w| w[1] <= (1.0 + slack) * w[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub taus: Vec<f64>,
    pub errors: Vec<f64>,
    pub successive_orders: Vec<Option<f64>>,
    pub fitted_order: Option<f64>,
    /// All errors at round-off level (the scheme is exact, e.g. elastic loads).
    pub exact: bool,
    pub monotone: bool,
    pub min_order: f64,
    pub passed: bool,
}

impl RateReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,error,observed_order\n");
        for (i, (t, e)) in self.taus.iter().zip(&self.errors).enumerate() {
            let o = if i == 0 { None } else { self.successive_orders[i - 1] };
            let o = o.map_or_else(|| "nan".to_string(), |v| format!("{v:.16e}"));
            writeln!(s, "{t:.16e},{e:.16e},{o}").expect("writing to a String");
        }
        s
    }
}

/// `e(τ) = ‖Σ^τ − Σ^ref‖_{L∞(0,T; S²_A)}` and its observed order, which
/// must reach `min_order`.
pub fn rate_study_linfty(runs: &StudyRuns, min_order: f64) -> RateReport {
    let taus = runs.taus();
    let errors: Vec<f64> = runs.tables.iter().map(|t| t.sigma.linf).collect();
    let scale = runs.reference.sigma.iter().map(|s| s.to_vector().amax()).fold(1.0, f64::max);
    let exact = errors.iter().all(|e| *e <= 1e-12 * scale);
    let fitted = fitted_order(&taus, &errors);
    let monotone = is_monotone(&errors, 0.0);
    let passed = exact || fitted.is_some_and(|o| o >= min_order);
    RateReport {
        successive_orders: successive_orders(&taus, &errors),
        taus,
        errors,
        fitted_order: fitted,
        exact,
        monotone,
        min_order,
        passed,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Report {
    pub taus: Vec<f64>,
    /// `(‖Σ^τ − Σ^ref‖²_{H¹} + ‖u^τ − u^ref‖²_{H¹})^{1/2}`.
    pub errors: Vec<f64>,
    pub sigma_errors: Vec<f64>,
    pub fitted_order: Option<f64>,
    pub monotone: bool,
    /// Finest over coarsest error.
    pub ratio: f64,
    pub max_ratio: f64,
    /// Largest `‖Σ_{ℓ̇} − 2Σ̇‖_A − ‖Σ_{ℓ̇}‖_A` over all cells of all runs;
    /// the certificate holds when each is below `1e-10(1 + ‖Σ_{ℓ̇}‖_A)`.
    pub certificate_worst: f64,
    pub certificate_holds: bool,
    pub passed: bool,
}

/// Per-cell pairs `(‖Σ_{ℓ̇} − 2Σ̇‖_A, ‖Σ_{ℓ̇}‖_A)`; the first never exceeds
/// the second.
pub fn strong_convergence_certificate(model: &DiscreteModel, traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    (0..traj.steps())
        .map(|i| {
            let tau = traj.grid.step(i);
            let dl: Vec<f64> = traj.ell[i + 1].iter().zip(&traj.ell[i]).map(|(a, b)| (a - b) / tau).collect();
            let lift = model.sigma_of_ell(&dl)?;
            let rate = traj.sigma[i + 1].axpy(-1.0, &traj.sigma[i]).scale(1.0 / tau);
            Ok((model.norm_a(&lift.axpy(-2.0, &rate))?, model.norm_a(&lift)?))
        })
        .collect()
}

fn ratio_of(errors: &[f64]) -> f64 {
    match (errors.first(), errors.last()) {
        (Some(&first), Some(&last)) if first > 0.0 => last / first,
        _ => 0.0,
    }
}

pub fn h1_cauchy_study(runs: &StudyRuns, model: &DiscreteModel, max_ratio: f64) -> Result<H1Report> {
    let taus = runs.taus();
    let errors: Vec<f64> = runs.tables.iter().map(|t| t.state_h1()).collect();
    let sigma_errors: Vec<f64> = runs.tables.iter().map(|t| t.sigma.h1).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut certificate_holds = true;
    for t in runs.runs.iter().chain(std::iter::once(&runs.reference)) {
        for (lhs, rhs) in strong_convergence_certificate(model, t)? {
            worst = worst.max(lhs - rhs);
            certificate_holds &= lhs - rhs <= 1e-10 * (1.0 + rhs);
        }
    }
    let ratio = ratio_of(&errors);
    let monotone = is_monotone(&errors, 0.05);
    let passed = certificate_holds && monotone && ratio <= max_ratio;
    Ok(H1Report {
        fitted_order: fitted_order(&taus, &errors),
        taus,
        errors,
        sigma_errors,
        monotone,
        ratio,
        max_ratio,
        certificate_worst: worst,
        certificate_holds,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierReport {
    pub taus: Vec<f64>,
    /// Worst relative gap of `‖λ‖_{L²} = ‖H⁻¹χ̇‖_{L²}/σ₀` over all runs.
    pub identity_gap: f64,
    pub identity_holds: bool,
    pub errors: Vec<f64>,
    pub fitted_order: Option<f64>,
    pub ratio: f64,
    pub max_ratio: f64,
    pub passed: bool,
}

/// Relative gap in `‖λ‖_{L²} = (1/σ₀)‖H⁻¹χ̇‖_{L²}`; zero when both vanish.
pub fn multiplier_identity_gap(model: &DiscreteModel, traj: &Trajectory) -> f64 {
    let lhs = traj.lambda_l2_squared(model).sqrt();
    let rhs = traj.hardening_rate_l2_squared(model).sqrt() / model.law().sigma0();
    if lhs == 0.0 && rhs == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / lhs.max(rhs)
    }
}

pub fn multiplier_study(runs: &StudyRuns, model: &DiscreteModel, max_ratio: f64) -> MultiplierReport {
    let taus = runs.taus();
    let gap = runs
        .runs
        .iter()
        .chain(std::iter::once(&runs.reference))
        .map(|t| multiplier_identity_gap(model, t))
        .fold(0.0, f64::max);
    let errors: Vec<f64> = runs.tables.iter().map(|t| t.lambda_l2).collect();
    let ratio = ratio_of(&errors);
    let identity_holds = gap <= 1e-10;
    let passed = identity_holds && ratio <= max_ratio;
    MultiplierReport {
        fitted_order: fitted_order(&taus, &errors),
        taus,
        identity_gap: gap,
        identity_holds,
        errors,
        ratio,
        max_ratio,
        passed,
    }
}

/// `∫₀ᵀ ⟨f(t), v⟩ dt` for a piecewise-linear `f`, exact.
pub fn integrated_observable(path: &PwLinear, weight: &DVector<f64>) -> f64 {
    let v = path.values();
    (0..path.grid().n_cells()).map(|i| 0.5 * path.grid().step(i) * (v[i].dot(weight) + v[i + 1].dot(weight))).sum()
}
