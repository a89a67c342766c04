//! Scenario execution. Every experiment returns its artifacts as in-memory
//! files so that output is a pure function of the configuration.

use nalgebra::DVector;
use plastlab::control::{
    approximation_experiment, projected_gradient, ApproximationReport, ControlProblem, Objective, SolverStatus,
    Tracking,
};
use plastlab::convergence::{
    forward_stability_probe, h1_cauchy_study, multiplier_identity_gap, multiplier_study, rate_study_linfty,
    weak_convergence_probe, LoadSpec, RefinementStudy,
};
use plastlab::forward::{check_complementarity, energy_identity, run_forward, LoadProgram, Waveform};
use plastlab::path::{Grid, PwLinear};
use plastlab::{build_model, DiscreteModel, SymTensor};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentKind, ObjectiveVariant, ScenarioConfig};
use crate::error::CliError;
use crate::holder::check_set;

/// One asserted check; the run exits with code 4 unless all pass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value <= threshold, value, threshold }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value >= threshold, value, threshold }
    }

    fn flag(name: &str, ok: bool) -> Self {
        Self { name: name.into(), passed: ok, value: f64::from(u8::from(ok)), threshold: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub experiment: &'static str,
    pub model: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Full reports; observational quantities live only here.
    pub reports: Value,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub summary: Summary,
    /// `(file name, contents)`, summary excluded.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes") + "\n"
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.summary.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::io(e.to_string()))
}

fn model_of(cfg: &ScenarioConfig) -> Result<DiscreteModel, CliError> {
    build_model(&cfg.model.name, &cfg.model.params).map_err(|e| CliError::config(e.to_string()))
}

fn summary(cfg: &ScenarioConfig, checks: Vec<Check>, reports: Value) -> Summary {
    Summary {
        experiment: cfg.experiment.name(),
        model: cfg.model.name.clone(),
        seed: cfg.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
        reports,
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Forward => forward(cfg),
        ExperimentKind::Converge => converge(cfg),
        ExperimentKind::EviCheck => evi_check(cfg),
        ExperimentKind::Control => control(cfg),
    }
}

fn forward(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let model = model_of(cfg)?;
    let l = &cfg.load;
    let loads = LoadProgram::waveform(&model, l.waveform, l.amplitude, l.horizon, l.steps)
        .map_err(|e| CliError::config(e.to_string()))?;
    let mut opts = cfg.forward.step.clone();
    opts.exec = cfg.execution;
    let traj = run_forward(&model, &loads, &opts)?;
    let tol = cfg.forward.complementarity_tol;
    let comp = check_complementarity(&traj, &model, tol);
    let energy = energy_identity(&traj, &model)?;
    let gap = multiplier_identity_gap(&model, &traj);
    let checks = vec![
        Check::at_most("complementarity_max_neg_lambda", comp.max_neg_lambda, tol),
        Check::at_most("complementarity_max_phi", comp.max_phi, tol),
        Check::at_most("complementarity_max_product", comp.max_product, tol),
        Check::at_most("kinematic_residual", traj.diagnostics.max_kinematic_residual, 1e-9),
        Check::at_most("multiplier_identity_gap", gap, 1e-10),
    ];
    let reports = json!({
        "complementarity": to_json(&comp)?,
        "energy": to_json(&energy)?,
        "diagnostics": to_json(&traj.diagnostics)?,
        "plastic_steps": traj.lambda.iter().filter(|l| l.iter().any(|v| *v > 0.0)).count(),
        "final_displacement": traj.u.last().cloned().unwrap_or_default(),
    });
    Ok(Outcome {
        summary: summary(cfg, checks, reports),
        files: vec![
            ("trajectory.json".into(), traj.to_json()? + "\n"),
            ("trajectory.csv".into(), traj.to_csv(&model)?),
        ],
    })
}

fn converge(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let model = model_of(cfg)?;
    let c = &cfg.converge;
    let l = &cfg.load;
    let load = LoadSpec::waveform(&model, l.waveform, l.amplitude, l.horizon);
    let mut study = RefinementStudy::new(model.clone(), load.clone(), c.steps.clone(), c.reference_steps)
        .map_err(|e| CliError::config(e.to_string()))?;
    study.exec = cfg.execution;
    let runs = study.run()?;
    let rate = rate_study_linfty(&runs, c.min_order);
    let h1 = h1_cauchy_study(&runs, &model, c.h1_max_ratio)?;
    let mult = multiplier_study(&runs, &model, c.lambda_max_ratio);
    let mut checks = vec![if rate.exact {
        Check::flag("linf_exact", true)
    } else {
        Check::at_least("linf_order", rate.fitted_order.unwrap_or(f64::NAN), c.min_order)
    }];
    if !rate.exact {
        checks.push(Check::flag("h1_monotone", h1.monotone));
        checks.push(Check::at_most("h1_ratio", h1.ratio, c.h1_max_ratio));
        checks.push(Check::at_most("lambda_ratio", mult.ratio, c.lambda_max_ratio));
    }
    checks.push(Check::flag("h1_certificate", h1.certificate_holds));
    checks.push(Check::at_most("multiplier_identity_gap", mult.identity_gap, 1e-10));

    let mut reports = json!({
        "linf": to_json(&rate)?,
        "h1": to_json(&h1)?,
        "multiplier": to_json(&mult)?,
        "tables": to_json(&runs.tables)?,
    });
    if let Some(a) = c.weak_probe_amplitude {
        let probe = weak_convergence_probe(&model, &load, a, &c.steps, cfg.seed, cfg.execution)?;
        reports["weak_probe"] = to_json(&probe)?;
    }
    if c.stability_pairs > 0 {
        let probe =
            forward_stability_probe(&model, l.horizon, c.stability_steps, c.stability_pairs, cfg.seed, cfg.execution)?;
        reports["stability_probe"] = to_json(&probe)?;
    }
    Ok(Outcome {
        summary: summary(cfg, checks, reports),
        files: vec![
            ("convergence.csv".into(), rate.to_csv()),
            ("trajectory.json".into(), runs.reference.to_json()? + "\n"),
        ],
    })
}

fn evi_check(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let e = &cfg.evi;
    let exponents = e.exponents.iter().map(|x| x.value()).collect::<Result<Vec<_>, _>>()?;
    let mut checks = Vec::new();
    let mut sets = Vec::new();
    for (k, kind) in e.sets.iter().enumerate() {
        let s = check_set(*kind, &exponents, e.pairs, e.max_steps, cfg.seed.wrapping_add(k as u64), cfg.execution)?;
        for h in &s.holder {
            let p = if h.p.is_infinite() { "inf".to_string() } else { format!("{}", h.p) };
            checks.push(Check::at_least(&format!("holder_min_slack_{}_p{p}", kind.name()), h.min_slack, 0.0));
        }
        checks.push(Check::flag(&format!("dissipation_{}", kind.name()), s.dissipation_passed));
        sets.push(s);
    }
    let mut csv = String::from("set,p,pairs,satisfied,min_slack,max_ratio\n");
    for h in sets.iter().flat_map(|s| &s.holder) {
        csv.push_str(&format!(
            "{},{:.16e},{},{},{:.16e},{:.16e}\n",
            h.set, h.p, h.pairs, h.satisfied, h.min_slack, h.max_ratio
        ));
    }
    Ok(Outcome {
        summary: summary(cfg, checks, json!({ "sets": to_json(&sets)? })),
        files: vec![("holder.csv".into(), csv)],
    })
}

fn broadcast(target: &[f64], n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    match target.len() {
        1 => Ok(vec![target[0]; n]),
        k if k == n => Ok(target.to_vec()),
        k => Err(CliError::config(format!("{what} needs 1 or {n} values, got {k}"))),
    }
}

fn objective_of(cfg: &ScenarioConfig, model: &DiscreteModel) -> Result<Objective, CliError> {
    let c = &cfg.control;
    let l = &cfg.load;
    let tracking = match c.objective {
        ObjectiveVariant::Psi1 => {
            let amp = broadcast(&c.target, model.n_dofs(), "control.target")?;
            let wave: Waveform = c.target_waveform;
            let grid = Grid::uniform(l.horizon, l.steps).map_err(|e| CliError::config(e.to_string()))?;
            let path = PwLinear::sample(grid, |t| {
                DVector::from_iterator(amp.len(), amp.iter().map(|a| a * wave.shape(t, l.horizon)))
            })
            .map_err(|e| CliError::config(e.to_string()))?;
            Tracking::Path(path)
        }
        ObjectiveVariant::Psi2 => Tracking::FinalDisplacement(broadcast(&c.target, model.n_dofs(), "control.target")?),
        ObjectiveVariant::Psi3 => {
            let comps = broadcast(&c.target, model.n_components(), "control.target")?;
            let t = SymTensor::from_components(model.dim(), &comps).map_err(|e| CliError::config(e.to_string()))?;
            Tracking::FinalStrain(vec![t; model.n_points()])
        }
    };
    Objective::new(tracking, c.nu).map_err(|e| CliError::config(e.to_string()))
}

fn control(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let model = model_of(cfg)?;
    let c = &cfg.control;
    let l = &cfg.load;
    let objective = objective_of(cfg, &model)?;
    let cp = ControlProblem::new(model.clone(), l.horizon, l.steps, objective.clone(), c.admissible)
        .map_err(|e| CliError::config(e.to_string()))?;
    let init = LoadProgram::waveform(&model, l.waveform, l.amplitude, l.horizon, l.steps)
        .map_err(|e| CliError::config(e.to_string()))?;
    let start = cp.unflatten(&cp.project(&cp.flatten(init.controls())?));
    let mut opts = c.solver.clone();
    opts.exec = cfg.execution;
    let res = projected_gradient(&cp, &start, &opts)?;
    let (_, traj) = cp.evaluate(&cp.flatten(&res.g)?)?;

    let decreasing = res.history.windows(2).all(|w| w[1].objective < w[0].objective);
    let converged = matches!(res.status, SolverStatus::Stationary | SolverStatus::SmallStep);
    let mut checks =
        vec![Check::flag("objective_strictly_decreasing", decreasing), Check::flag("solver_converged", converged)];
    let mut reports = json!({
        "status": to_json(&res.status)?,
        "objective": to_json(&res.objective)?,
        "steps_taken": res.steps_taken,
        "final_gradient_norm": res.final_gradient_norm(),
        "projection_exact": res.projection_exact,
        "final_displacement": traj.u.last().cloned().unwrap_or_default(),
    });
    if !c.approximation_steps.is_empty() {
        let init_fn = |t: f64| {
            let a = l.amplitude * l.waveform.shape(t, l.horizon);
            model.load_direction().iter().map(|d| a * d).collect()
        };
        let rep: ApproximationReport = approximation_experiment(
            &model,
            &objective,
            c.admissible,
            l.horizon,
            &c.approximation_steps,
            &init_fn,
            &opts,
        )
        .map_err(|e| CliError::config(e.to_string()))?;
        checks.push(Check::flag("approximation_cauchy_decrease", rep.cauchy_decrease));
        checks.push(Check::flag("anchored_zero_steps", rep.anchor_recovered));
        reports["approximation"] = to_json(&rep)?;
    }
    let record = serde_json::to_string_pretty(&res.to_record(&cp)).map_err(|e| CliError::io(e.to_string()))? + "\n";
    Ok(Outcome {
        summary: summary(cfg, checks, reports),
        files: vec![
            ("optimization.csv".into(), res.history_csv()),
            ("control.json".into(), record),
            ("trajectory.json".into(), traj.to_json()? + "\n"),
        ],
    })
}
