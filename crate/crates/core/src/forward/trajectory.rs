use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::load::LoadProgram;
use super::step::{solve_step, StepOptions};
use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::model::{DiscreteModel, GeneralizedStressField};
use crate::path::{Grid, PwLinear};
use crate::tensor::yield_value;

/// Solved time-discrete trajectory. `lambda[i]` belongs to the cell
/// `[t_i, t_{i+1})` and is the multiplier of step `i + 1`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Grid,
    pub sigma: Vec<GeneralizedStressField>,
    pub u: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub ell: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub diagnostics: ForwardDiagnostics,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForwardDiagnostics {
    pub max_equilibrium_residual: f64,
    /// `max |C⁻¹σ_i − ε(u_i) − H⁻¹χ_i|` over nodes and points.
    pub max_kinematic_residual: f64,
    pub max_phi: f64,
    /// `(‖Σ‖_{H¹,A} + ‖u‖_{H¹,V}) / ‖ℓ‖_{H¹,V'}`; absent for a zero load.
    pub a_priori_constant: Option<f64>,
    pub newton_iterations: usize,
    pub reprojections: usize,
}

/// Sequential time stepping from `(Σ₀, u₀) = 0`.
pub fn run_forward(model: &DiscreteModel, loads: &LoadProgram, opts: &StepOptions) -> Result<Trajectory> {
    if loads.n_controls() != model.n_controls() {
        return Err(Error::DimensionMismatch {
            what: "load program controls",
            expected: model.n_controls(),
            found: loads.n_controls(),
        });
    }
    let ells = loads.loads(model)?;
    let tau = loads.tau();
    let n = loads.steps();
    let mut sigma = vec![model.zero_field()];
    let mut u = vec![vec![0.0; model.n_dofs()]];
    let mut lambda = Vec::with_capacity(n);
    let mut iterations = 0;
    let mut reprojections = 0;
    for i in 1..=n {
        let r = solve_step(model, &sigma[i - 1], &u[i - 1], &ells[i], tau, opts)
            .map_err(|e| Error::StepFailure { step: i, source: Box::new(e) })?;
        iterations += r.iterations;
        reprojections += r.reprojected;
        sigma.push(r.sigma);
        u.push(r.u);
        lambda.push(r.lambda);
    }
    let mut traj = Trajectory {
        grid: loads.grid().clone(),
        sigma,
        u,
        g: loads.controls().to_vec(),
        ell: ells,
        lambda,
        diagnostics: ForwardDiagnostics::default(),
    };
    traj.diagnostics = traj.compute_diagnostics(model)?;
    traj.diagnostics.newton_iterations = iterations;
    traj.diagnostics.reprojections = reprojections;
    Ok(traj)
}

/// Dual norm on loads: `‖ℓ‖_{V'} = sup ⟨ℓ, v⟩ / ‖ε(v)‖_S`.
pub fn load_metric(model: &DiscreteModel) -> Metric {
    let g = model.displacement_gram();
    Metric::Dense(g.try_inverse().expect("displacement Gram matrix is SPD"))
}

/// `‖ε(u)‖_S` as a metric on displacement coordinates.
pub fn displacement_metric(model: &DiscreteModel) -> Metric {
    Metric::Dense(model.displacement_gram())
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    pub fn tau(&self) -> f64 {
        self.horizon() / self.steps() as f64
    }

    pub fn sigma_path(&self) -> PwLinear {
        PwLinear::new(self.grid.clone(), self.sigma.iter().map(|s| s.to_vector()).collect())
            .expect("consistent trajectory")
    }

    pub fn u_path(&self) -> PwLinear {
        PwLinear::new(self.grid.clone(), self.u.iter().map(|v| DVector::from_column_slice(v)).collect())
            .expect("consistent trajectory")
    }

    pub fn g_path(&self) -> PwLinear {
        PwLinear::new(self.grid.clone(), self.g.iter().map(|v| DVector::from_column_slice(v)).collect())
            .expect("consistent trajectory")
    }

    pub fn ell_path(&self) -> PwLinear {
        PwLinear::new(self.grid.clone(), self.ell.iter().map(|v| DVector::from_column_slice(v)).collect())
            .expect("consistent trajectory")
    }

    fn compute_diagnostics(&self, model: &DiscreteModel) -> Result<ForwardDiagnostics> {
        let law = model.law();
        let mut eq = 0.0f64;
        let mut kin = 0.0f64;
        let mut phi = f64::NEG_INFINITY;
        for i in 0..self.grid.len() {
            let bs = model.apply_b(&self.sigma[i])?;
            let r = bs.iter().zip(&self.ell[i]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            eq = eq.max(r);
            let eps = model.strain_of(&self.u[i])?;
            for (s, e) in self.sigma[i].iter().zip(&eps) {
                let k = law.c_inv().apply(&s.sigma) - *e - law.h_inv().apply(&s.chi);
                kin = kin.max(k.norm());
                phi = phi.max(yield_value(s, law.sigma0()));
            }
        }
        let lm = load_metric(model);
        let load_h1 = self.ell_path().h1_norm(&lm);
        let state = self.sigma_path().h1_norm(&model.a_metric()) + self.u_path().h1_norm(&displacement_metric(model));
        Ok(ForwardDiagnostics {
            max_equilibrium_residual: eq,
            max_kinematic_residual: kin,
            max_phi: phi,
            a_priori_constant: (load_h1 > 0.0).then(|| state / load_h1),
            newton_iterations: 0,
            reprojections: 0,
        })
    }

    /// Piecewise-linear `Σ, u, g` and piecewise-constant `λ` (right-open
    /// cells, the last cell closed) at time `t`.
    pub fn interpolate(&self, t: f64) -> Result<Interpolated> {
        let (cell, s) = self.grid.locate(t)?;
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| {
                    if s == 0.0 {
                        *x
                    } else if s == 1.0 {
                        *y
                    } else {
                        (1.0 - s) * x + s * y
                    }
                })
                .collect()
        };
        let (i, j) = (cell, cell + 1);
        let sigma = if s == 0.0 {
            self.sigma[i].clone()
        } else if s == 1.0 {
            self.sigma[j].clone()
        } else {
            self.sigma[i].scale(1.0 - s).axpy(s, &self.sigma[j])
        };
        // a node inside the grid opens the next cell
        let lam_cell = if s == 1.0 && j < self.steps() { j } else { cell };
        Ok(Interpolated {
            sigma,
            u: mix(&self.u[i], &self.u[j]),
            g: mix(&self.g[i], &self.g[j]),
            lambda: self.lambda[lam_cell].clone(),
        })
    }

    /// `‖λ‖²_{L²(0,T; points)} = Σ_i τ Σ_p w_p λ²`.
    pub fn lambda_l2_squared(&self, model: &DiscreteModel) -> f64 {
        self.lambda
            .iter()
            .enumerate()
            .map(|(i, l)| self.grid.step(i) * l.iter().zip(model.weights()).map(|(x, w)| w * x * x).sum::<f64>())
            .sum()
    }

    /// `‖H⁻¹χ̇‖²_{L²}` with the weighted Frobenius norm.
    pub fn hardening_rate_l2_squared(&self, model: &DiscreteModel) -> f64 {
        let h = model.law().h_inv();
        (0..self.steps())
            .map(|i| {
                let tau = self.grid.step(i);
                self.sigma[i + 1]
                    .iter()
                    .zip(self.sigma[i].iter())
                    .zip(model.weights())
                    .map(|((a, b), w)| w * h.apply(&(a.chi - b.chi)).norm_squared())
                    .sum::<f64>()
                    / tau
            })
            .sum()
    }

    pub fn to_record(&self) -> TrajectoryRecord {
        TrajectoryRecord {
            times: self.grid.times().to_vec(),
            sigma: self.sigma.iter().map(|s| s.to_vector().as_slice().to_vec()).collect(),
            u: self.u.clone(),
            g: self.g.clone(),
            lambda: self.lambda.clone(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    /// Per-node scalars: time, `‖Σ‖_A`, `‖u‖`, `max λ`, `max φ`.
    pub fn to_csv(&self, model: &DiscreteModel) -> Result<String> {
        let mut out = String::from("time,sigma_norm_a,u_norm,lambda_max,phi_max\n");
        let sigma0 = model.law().sigma0();
        for i in 0..self.grid.len() {
            let lam = if i == 0 { 0.0 } else { self.lambda[i - 1].iter().copied().fold(0.0, f64::max) };
            let phi = self.sigma[i].iter().map(|s| yield_value(s, sigma0)).fold(f64::NEG_INFINITY, f64::max);
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.grid.times()[i],
                model.norm_a(&self.sigma[i])?,
                model.displacement_norm(&self.u[i])?,
                lam,
                phi
            )
            .expect("writing to a String");
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct Interpolated {
    pub sigma: GeneralizedStressField,
    pub u: Vec<f64>,
    pub g: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Nodal arrays; stress fields flattened as `[σ_p, χ_p]` point after point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub diagnostics: ForwardDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityReport {
    pub max_neg_lambda: f64,
    pub max_phi: f64,
    /// `max λ·|φ|`.
    pub max_product: f64,
    pub tol: f64,
    pub satisfied: bool,
}

/// Worst violations of `0 ≤ λ_i ⊥ φ(Σ_i) ≤ 0` over steps and points.
pub fn check_complementarity(traj: &Trajectory, model: &DiscreteModel, tol: f64) -> ComplementarityReport {
    let sigma0 = model.law().sigma0();
    let mut neg = 0.0f64;
    let mut phi_max = f64::NEG_INFINITY;
    let mut prod = 0.0f64;
    for i in 1..traj.grid.len() {
        for (s, l) in traj.sigma[i].iter().zip(&traj.lambda[i - 1]) {
            let phi = yield_value(s, sigma0);
            neg = neg.max(-l);
            phi_max = phi_max.max(phi);
            prod = prod.max((l * phi).abs());
        }
    }
    ComplementarityReport {
        max_neg_lambda: neg,
        max_phi: phi_max,
        max_product: prod,
        tol,
        satisfied: neg <= tol && phi_max <= tol && prod <= tol,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `½‖Σ_N‖²_A`.
    pub final_energy: f64,
    /// `Σ_i ⟨AΔΣ_i, Σ_i⟩ − ½Σ_i ‖ΔΣ_i‖²_A`.
    pub summed: f64,
    pub relative_gap: f64,
}

/// Discrete integration by parts of the stored energy.
pub fn energy_identity(traj: &Trajectory, model: &DiscreteModel) -> Result<EnergyReport> {
    let mut summed = 0.0;
    for i in 1..traj.grid.len() {
        let d = traj.sigma[i].axpy(-1.0, &traj.sigma[i - 1]);
        summed += model.inner_a(&d, &traj.sigma[i])? - 0.5 * model.inner_a(&d, &d)?;
    }
    let last = traj.sigma.last().expect("nonempty");
    let final_energy = 0.5 * model.inner_a(last, last)?;
    let relative_gap = (final_energy - summed).abs() / final_energy.abs().max(1e-300);
    Ok(EnergyReport {
        final_energy,
        summed,
        relative_gap: if final_energy == 0.0 && summed == 0.0 { 0.0 } else { relative_gap },
    })
}
