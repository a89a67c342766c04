use std::fmt::Write as _;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::{
    control_distance, fd_gradient_flat, prolongate, AdmissibleSet, ControlProblem, ControlRecord, Objective,
    ObjectiveValue,
};
use crate::error::{Error, Result};
use crate::model::DiscreteModel;
use crate::par::Execution;

const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlOptions {
    /// Threshold on the projected-gradient and step norms in `H¹`.
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    /// Execution of the finite-difference probes.
    pub exec: Execution,
}

impl Default for ControlOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 2000,
            fd_step: 1e-5,
            armijo: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            max_backtracks: 40,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    /// Projected gradient norm below tolerance.
    Stationary,
    /// Accepted step shorter than the tolerance.
    SmallStep,
    /// No Armijo step found; the last iterate is returned.
    LineSearchStagnation,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// `‖g − P(g − ∇J)‖_{H¹}`.
    pub gradient_norm: f64,
    /// `H¹` length of the step that led to this iterate.
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub g: Vec<Vec<f64>>,
    pub objective: ObjectiveValue,
    pub history: Vec<IterationRecord>,
    /// Accepted steps.
    pub steps_taken: usize,
    pub status: SolverStatus,
    /// `false` when the admissible projection is only approximate in `H¹`.
    pub projection_exact: bool,
}

impl OptimizationResult {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,objective,gradient_norm,step\n");
        for r in &self.history {
            writeln!(s, "{},{:.16e},{:.16e},{:.16e}", r.iteration, r.objective, r.gradient_norm, r.step)
                .expect("writing to a String");
        }
        s
    }

    pub fn final_gradient_norm(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.gradient_norm)
    }

    pub fn to_record(&self, cp: &ControlProblem) -> ControlRecord {
        ControlRecord {
            objective_variant: cp.objective().variant().to_string(),
            admissible: cp.admissible(),
            projection_exact: self.projection_exact,
            times: cp.grid().times().to_vec(),
            g: self.g.clone(),
            objective: self.objective,
            status: self.status,
            iterations: self.steps_taken,
        }
    }
}

/// Projected gradient descent in the `H¹(0,T;U)` metric with Armijo
/// backtracking along the projection arc `s ↦ P(g − s∇J)`.
pub fn projected_gradient(
    cp: &ControlProblem,
    g_init: &[Vec<f64>],
    opts: &ControlOptions,
) -> Result<OptimizationResult> {
    let mut x = cp.flatten(g_init)?;
    if !cp.contains(&x, FEASIBILITY_TOL) {
        return Err(Error::InvalidParameter("initial control is not admissible".into()));
    }
    let (mut val, _) = cp.evaluate(&x)?;
    let mut history = Vec::new();
    let mut steps_taken = 0;
    let mut last_step = 0.0;
    let mut status = SolverStatus::MaxIterations;
    for it in 0..=opts.max_iter {
        let (grad, _) = fd_gradient_flat(cp, &x, opts.fd_step, opts.exec)?;
        let pg = &x - cp.project(&(&x - &grad));
        let pg_norm = cp.norm(&pg);
        history.push(IterationRecord { iteration: it, objective: val.total, gradient_norm: pg_norm, step: last_step });
        debug!("iteration {it}: J = {:.12e}, |pg| = {pg_norm:.3e}", val.total);
        if pg_norm <= opts.tol {
            status = SolverStatus::Stationary;
            break;
        }
        if it == opts.max_iter {
            break;
        }
        let mut s = opts.initial_step;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial = cp.project(&(&x - &grad * s));
            let decrease = cp.inner(&grad, &(&x - &trial));
            let (tv, _) = cp.evaluate(&trial)?;
            if tv.total < val.total && tv.total <= val.total - opts.armijo * decrease {
                accepted = Some((trial, tv));
                break;
            }
            s *= opts.backtrack;
        }
        let Some((trial, tv)) = accepted else {
            status = SolverStatus::LineSearchStagnation;
            info!("line search stagnated at iteration {it}");
            break;
        };
        last_step = cp.norm(&(&trial - &x));
        x = trial;
        val = tv;
        steps_taken += 1;
        if last_step <= opts.tol {
            let (grad, _) = fd_gradient_flat(cp, &x, opts.fd_step, opts.exec)?;
            let pg_norm = cp.norm(&(&x - cp.project(&(&x - &grad))));
            history.push(IterationRecord {
                iteration: it + 1,
                objective: val.total,
                gradient_norm: pg_norm,
                step: last_step,
            });
            status = SolverStatus::SmallStep;
            break;
        }
    }
    Ok(OptimizationResult {
        g: cp.unflatten(&x),
        objective: val,
        history,
        steps_taken,
        status,
        projection_exact: cp.admissible().projection_is_exact(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproximationRow {
    pub steps: usize,
    pub tau: f64,
    pub objective: Option<f64>,
    pub iterations: usize,
    pub status: Option<SolverStatus>,
    /// `H¹` distance to the minimizer of the previous (coarser) grid.
    pub distance_to_previous: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchoredRow {
    pub steps: usize,
    pub steps_taken: usize,
    pub status: Option<SolverStatus>,
    /// `H¹` distance of the anchored minimizer to its anchor.
    pub distance_to_anchor: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub rows: Vec<ApproximationRow>,
    /// Successive-minimizer distances never increase; minimizers that
    /// coincide exactly give zero distances and count as decreasing.
    pub cauchy_decrease: bool,
    /// Modified problems anchored at the finest minimizer, one per grid,
    /// each started at the anchor.
    pub anchored: Vec<AnchoredRow>,
    /// The finest anchored problem took no step.
    pub anchor_recovered: bool,
    /// The last successful minimizer, on the finest grid.
    pub finest: Option<Vec<Vec<f64>>>,
}

/// Solves the control problem on nested grids with warm starts by
/// linear-interpolation prolongation, then the anchored problems.
/// Inner failures are recorded and the experiment continues.
pub fn approximation_experiment(
    model: &DiscreteModel,
    objective: &Objective,
    admissible: AdmissibleSet,
    horizon: f64,
    steps: &[usize],
    init: &dyn Fn(f64) -> Vec<f64>,
    opts: &ControlOptions,
) -> Result<ApproximationReport> {
    if steps.is_empty() || steps.windows(2).any(|w| w[1] <= w[0] || w[1] % w[0] != 0) {
        return Err(Error::InvalidParameter("step counts must increase and nest".into()));
    }
    let mut rows = Vec::new();
    let mut previous: Option<(ControlProblem, Vec<Vec<f64>>)> = None;
    for &n in steps {
        let cp = ControlProblem::new(model.clone(), horizon, n, objective.clone(), admissible)?;
        let start = match &previous {
            Some((pcp, pg)) => prolongate(pcp.grid(), pg, cp.grid())?,
            None => cp.unflatten(&cp.project(&cp.flatten(&cp.sample(init))?)),
        };
        let mut row = ApproximationRow {
            steps: n,
            tau: horizon / n as f64,
            objective: None,
            iterations: 0,
            status: None,
            distance_to_previous: None,
            error: None,
        };
        match projected_gradient(&cp, &start, opts) {
            Ok(res) => {
                row.objective = Some(res.objective.total);
                row.iterations = res.steps_taken;
                row.status = Some(res.status);
                if let Some((pcp, pg)) = &previous {
                    row.distance_to_previous =
                        Some(control_distance(model.control_weights(), (pcp.grid(), pg), (cp.grid(), &res.g))?);
                }
                previous = Some((cp, res.g));
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    let dists: Vec<f64> = rows.iter().filter_map(|r| r.distance_to_previous).collect();
    let cauchy_decrease = dists.len() + 1 == steps.len() && dists.windows(2).all(|w| w[1] <= w[0]);

    let mut anchored = Vec::new();
    let mut anchor_recovered = false;
    let finest = previous.as_ref().map(|(_, g)| g.clone());
    if let Some((fcp, fg)) = &previous {
        for &n in steps {
            let mut row = AnchoredRow { steps: n, steps_taken: 0, status: None, distance_to_anchor: None, error: None };
            let run = || -> Result<(OptimizationResult, f64)> {
                let base = ControlProblem::new(model.clone(), horizon, n, objective.clone(), admissible)?;
                let anchor = prolongate(fcp.grid(), fg, base.grid())?;
                let cp = base.with_anchor(anchor.clone())?;
                let res = projected_gradient(&cp, &anchor, opts)?;
                let d = control_distance(model.control_weights(), (cp.grid(), &anchor), (cp.grid(), &res.g))?;
                Ok((res, d))
            };
            match run() {
                Ok((res, d)) => {
                    row.distance_to_anchor = Some(d);
                    row.steps_taken = res.steps_taken;
                    row.status = Some(res.status);
                    if n == fcp.steps() {
                        anchor_recovered = res.steps_taken == 0;
                    }
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            anchored.push(row);
        }
    }
    Ok(ApproximationReport { rows, cauchy_decrease, anchored, anchor_recovered, finest })
}
