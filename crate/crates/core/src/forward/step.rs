use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiscreteModel, GeneralizedStressField, ReturnMap};
use crate::par::{self, Execution};
use crate::tensor::{component_weight, yield_value, GeneralizedStress};

/// Drift threshold on `φ` above which a solved state is re-projected.
pub const REPROJECT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepOptions {
    /// Equilibrium tolerance, relative to `1 + ‖ℓ‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Failed line searches before switching to the elastic-stiffness
    /// fixed point iteration.
    pub max_line_search_failures: usize,
    /// Execution of the per-point return maps.
    pub exec: Execution,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, max_line_search_failures: 3, exec: Execution::Sequential }
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub sigma: GeneralizedStressField,
    pub u: Vec<f64>,
    /// Multiplier per material point, `τλ = γ`.
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub reprojected: usize,
}

struct LocalState {
    trial: Vec<GeneralizedStress>,
    maps: Vec<ReturnMap>,
    residual: DVector<f64>,
}

fn evaluate(
    model: &DiscreteModel,
    sigma_prev: &GeneralizedStressField,
    u_prev: &[f64],
    u: &DVector<f64>,
    ell: &DVector<f64>,
    exec: Execution,
) -> Result<LocalState> {
    let du: Vec<f64> = u.iter().zip(u_prev).map(|(a, b)| a - b).collect();
    let de = model.strain_of(&du)?;
    let law = model.law();
    let pairs = par::map_range(exec, model.n_points(), |p| {
        let prev = &sigma_prev.0[p];
        let trial = GeneralizedStress::new(prev.sigma + law.stiffness().apply(&de[p]), prev.chi);
        (trial, law.return_map(&trial))
    });
    let (trial, maps): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let field = GeneralizedStressField(maps.iter().map(|r| r.stress).collect());
    let bs = DVector::from_vec(model.apply_b(&field)?);
    Ok(LocalState { trial, maps, residual: bs - ell })
}

/// `Σ_p w_p ε_pᵀ W C_t ε_p`, so that `R(u + δ) ≈ R(u) − K δ`.
fn tangent_stiffness(model: &DiscreteModel, st: &LocalState) -> DMatrix<f64> {
    let k = model.n_components();
    let dim = model.dim();
    let n = model.n_dofs();
    let s = model.strain_matrix();
    let mut kt = DMatrix::zeros(n, n);
    for p in 0..model.n_points() {
        let mut ct = model.law().consistent_tangent(&st.trial[p], &st.maps[p]);
        for r in 0..k {
            ct.row_mut(r).scale_mut(component_weight(dim, r) * model.weights()[p]);
        }
        let sp = s.rows(p * k, k);
        kt += sp.transpose() * ct * sp;
    }
    kt
}

fn solve_linear(k: DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let sym = (&k + k.transpose()) * 0.5;
    if let Some(ch) = sym.cholesky() {
        return Some(ch.solve(r));
    }
    k.lu().solve(r)
}

/// One time step: the minimizer of `½‖T − Σ_prev‖²_A` over
/// `{T : φ(T_p) ≤ 0, BT = ℓ}` together with the displacement certifying
/// stationarity.
pub fn solve_step(
    model: &DiscreteModel,
    sigma_prev: &GeneralizedStressField,
    u_prev: &[f64],
    ell: &[f64],
    tau: f64,
    opts: &StepOptions,
) -> Result<StepResult> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
    }
    if sigma_prev.len() != model.n_points() {
        return Err(Error::DimensionMismatch {
            what: "previous stress field",
            expected: model.n_points(),
            found: sigma_prev.len(),
        });
    }
    for (what, len) in [("previous displacement", u_prev.len()), ("load", ell.len())] {
        if len != model.n_dofs() {
            return Err(Error::DimensionMismatch { what, expected: model.n_dofs(), found: len });
        }
    }
    let ell_v = DVector::from_column_slice(ell);
    let scale = 1.0 + ell_v.norm();
    let target = opts.tol * scale;

    let mut u = DVector::from_column_slice(u_prev);
    let mut st = evaluate(model, sigma_prev, u_prev, &u, &ell_v, opts.exec)?;
    let mut history = vec![st.residual.norm()];
    let mut failures = 0;
    let mut iterations = 0;
    while st.residual.norm() > target {
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged {
                solver: "equilibrium iteration",
                iterations,
                residual: st.residual.norm(),
                history,
            });
        }
        iterations += 1;
        let r0 = st.residual.norm();
        if failures < opts.max_line_search_failures {
            let delta = solve_linear(tangent_stiffness(model, &st), &st.residual)
                .ok_or_else(|| Error::InvalidParameter("singular tangent stiffness".into()))?;
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let cand = &u + &delta * alpha;
                let cst = evaluate(model, sigma_prev, u_prev, &cand, &ell_v, opts.exec)?;
                if cst.residual.norm() <= (1.0 - 1e-4 * alpha) * r0 {
                    accepted = Some((cand, cst));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((cand, cst)) => {
                    u = cand;
                    st = cst;
                }
                None => {
                    failures += 1;
                    debug!("line search failed ({failures}) at residual {r0:.3e}");
                    if failures == opts.max_line_search_failures {
                        debug!("switching to elastic-stiffness fixed point iteration");
                    }
                }
            }
        } else {
            let delta = model.solve_elastic(&st.residual);
            u += delta;
            st = evaluate(model, sigma_prev, u_prev, &u, &ell_v, opts.exec)?;
        }
        history.push(st.residual.norm());
    }

    let sigma0 = model.law().sigma0();
    let mut reprojected = 0;
    let mut points = Vec::with_capacity(model.n_points());
    for r in &st.maps {
        let mut s = r.stress;
        if yield_value(&s, sigma0) > REPROJECT_TOL {
            s = model.law().return_map(&s).stress;
            reprojected += 1;
        }
        points.push(s);
    }
    if reprojected > 0 {
        warn!("re-projected {reprojected} points onto the yield surface");
    }
    Ok(StepResult {
        sigma: GeneralizedStressField(points),
        u: u.as_slice().to_vec(),
        lambda: st.maps.iter().map(|r| r.gamma / tau).collect(),
        iterations,
        residual_history: history,
        reprojected,
    })
}

/// `λ_p = |H⁻¹(χ_i − χ_prev)_p| / (τσ₀)`.
pub fn recover_multiplier(
    model: &DiscreteModel,
    sigma: &GeneralizedStressField,
    sigma_prev: &GeneralizedStressField,
    tau: f64,
) -> Vec<f64> {
    let law = model.law();
    sigma
        .iter()
        .zip(sigma_prev.iter())
        .map(|(s, sp)| law.h_inv().apply(&(s.chi - sp.chi)).norm() / (tau * law.sigma0()))
        .collect()
}
