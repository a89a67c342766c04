//! Evolution variational inequalities on `R^k`: the stop operator `x = S(x₀, u)`
//! and the play operator `ξ = u − x`, computed by the catching-up scheme
//! `x_i = Proj_Z(x_{i−1} + Δu_i)`.

mod sets;

pub use sets::{Ball, ConvexSet, Interval, VonMisesCylinder, WholeSpace};

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::path::{conjugate_exponent, PwLinear};

/// Membership tolerance for initial points and projected nodes.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone)]
pub struct EviProblem {
    pub set: Arc<dyn ConvexSet>,
    pub metric: Metric,
    pub x0: DVector<f64>,
    pub input: PwLinear,
}

impl std::fmt::Debug for EviProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EviProblem")
            .field("set", &self.set.name())
            .field("metric", &self.metric)
            .field("x0", &self.x0)
            .field("input", &self.input)
            .finish()
    }
}

impl EviProblem {
    pub fn new(set: Arc<dyn ConvexSet>, metric: Metric, x0: DVector<f64>, input: PwLinear) -> Result<Self> {
        let k = set.dim();
        for (what, found) in [("metric", metric.dim()), ("initial point", x0.len()), ("input", input.dim())] {
            if found != k {
                return Err(Error::DimensionMismatch { what, expected: k, found });
            }
        }
        if !set.contains(&x0, MEMBERSHIP_TOL) {
            return Err(Error::InvalidParameter("initial point is not in the set".into()));
        }
        Ok(Self { set, metric, x0, input })
    }
}

/// One catching-up step. A zero increment copies the previous node.
pub fn stop_step(
    x_prev: &DVector<f64>,
    du: &DVector<f64>,
    set: &dyn ConvexSet,
    metric: &Metric,
) -> Result<DVector<f64>> {
    if du.iter().all(|v| *v == 0.0) {
        return Ok(x_prev.clone());
    }
    let x = set.project(&(x_prev + du), metric)?;
    if !set.contains(&x, MEMBERSHIP_TOL) {
        return Err(Error::ProjectionFailure(format!("{} projection returned an infeasible point", set.name())));
    }
    Ok(x)
}

/// Stop operator on the input grid.
pub fn run_stop(p: &EviProblem) -> Result<PwLinear> {
    let u = p.input.values();
    let mut xs = Vec::with_capacity(u.len());
    xs.push(p.x0.clone());
    for i in 1..u.len() {
        let du = &u[i] - &u[i - 1];
        let x = stop_step(&xs[i - 1], &du, p.set.as_ref(), &p.metric)
            .map_err(|e| Error::StepFailure { step: i, source: Box::new(e) })?;
        xs.push(x);
    }
    PwLinear::new(p.input.grid().clone(), xs)
}

/// Play operator `ξ = u − S(x₀, u)`.
pub fn run_play(p: &EviProblem) -> Result<PwLinear> {
    let x = run_stop(p)?;
    play_from_stop(p, &x)
}

fn play_from_stop(p: &EviProblem, x: &PwLinear) -> Result<PwLinear> {
    let xi = p.input.values().iter().zip(x.values()).map(|(u, x)| u - x).collect();
    PwLinear::new(p.input.grid().clone(), xi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub p: f64,
    pub q: f64,
    /// `‖ξ₁ − ξ₂‖²_{L∞}`.
    pub lhs: f64,
    /// `2(‖u̇₁‖_{L^q} + ‖u̇₂‖_{L^q})‖u₁ − u₂‖_{L^p} + ‖ξ₁(0) − ξ₂(0)‖²`.
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
}

fn check_pair(p1: &EviProblem, p2: &EviProblem) -> Result<()> {
    if p1.input.grid() != p2.input.grid() {
        return Err(Error::InvalidParameter("problems use different grids".into()));
    }
    if p1.metric != p2.metric {
        return Err(Error::InvalidParameter("problems use different metrics".into()));
    }
    if p1.set.dim() != p2.set.dim() || p1.set.name() != p2.set.name() {
        return Err(Error::InvalidParameter("problems use different sets".into()));
    }
    Ok(())
}

/// Evaluates both sides of the play-operator Hölder estimate for
/// `p ∈ [1, ∞]` with exact norms of the interpolants.
pub fn holder_check(p1: &EviProblem, p2: &EviProblem, p_exp: f64) -> Result<HolderReport> {
    check_pair(p1, p2)?;
    let q = conjugate_exponent(p_exp)?;
    let m = &p1.metric;
    let xi1 = run_play(p1)?;
    let xi2 = run_play(p2)?;
    let lhs = xi1.difference(&xi2)?.sup_norm(m).powi(2);
    let du = p1.input.difference(&p2.input)?;
    let init = m.norm_squared(&(xi1.node(0) - xi2.node(0)));
    let rhs = 2.0 * (p1.input.derivative_norm(m, q)? + p2.input.derivative_norm(m, q)?) * du.lp_norm(m, p_exp)? + init;
    let slack = rhs - lhs;
    // both sides can coincide exactly (e.g. Z = {0}); allow rounding
    let satisfied = slack >= -1e-12 * rhs.max(1.0);
    Ok(HolderReport { p: p_exp, q, lhs, rhs, slack, satisfied })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    /// `min_i ⟨Δξ_i, Δx_i⟩`.
    pub min_orthogonality: f64,
    /// `max_i ‖Δξ_i‖ − ‖Δu_i‖`.
    pub max_play_excess: f64,
    /// `max_i ‖Δx_i‖ − ‖Δu_i‖`.
    pub max_stop_excess: f64,
    pub tol: f64,
    pub satisfied: bool,
}

/// Discrete dissipation inequalities implied by the projection step.
pub fn dissipation_check(p: &EviProblem, tol: f64) -> Result<DissipationReport> {
    let x = run_stop(p)?;
    let xi = play_from_stop(p, &x)?;
    let m = &p.metric;
    let u = p.input.values();
    let mut min_orth = f64::INFINITY;
    let mut play_ex = f64::NEG_INFINITY;
    let mut stop_ex = f64::NEG_INFINITY;
    for i in 1..u.len() {
        let du = m.norm(&(&u[i] - &u[i - 1]));
        let dx = x.node(i) - x.node(i - 1);
        let dxi = xi.node(i) - xi.node(i - 1);
        min_orth = min_orth.min(m.inner(&dxi, &dx));
        play_ex = play_ex.max(m.norm(&dxi) - du);
        stop_ex = stop_ex.max(m.norm(&dx) - du);
    }
    let satisfied = min_orth >= -tol && play_ex <= tol && stop_ex <= tol;
    Ok(DissipationReport {
        min_orthogonality: min_orth,
        max_play_excess: play_ex,
        max_stop_excess: stop_ex,
        tol,
        satisfied,
    })
}

/// `‖x₁ − x₂‖_{L∞} / (‖x₁⁰ − x₂⁰‖ + ‖u₁ − u₂‖_{W^{1,1}})`, the observed
/// Lipschitz ratio of the stop operator. `None` when the denominator vanishes.
pub fn stop_lipschitz_ratio(p1: &EviProblem, p2: &EviProblem) -> Result<Option<f64>> {
    check_pair(p1, p2)?;
    let m = &p1.metric;
    let x1 = run_stop(p1)?;
    let x2 = run_stop(p2)?;
    let num = x1.difference(&x2)?.sup_norm(m);
    let den = m.distance(&p1.x0, &p2.x0) + p1.input.difference(&p2.input)?.w1p_norm(m, 1.0)?;
    Ok((den > 0.0).then(|| num / den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_input(grid: Grid, vals: &[f64]) -> PwLinear {
        PwLinear::new(grid, vals.iter().map(|v| DVector::from_element(1, *v)).collect()).unwrap()
    }

    fn triangle(n: usize, amp: f64) -> Vec<f64> {
        (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                amp * if s <= 0.5 { 2.0 * s } else { 2.0 - 2.0 * s }
            })
            .collect()
    }

    #[test]
    fn interior_and_interval_steps() {
        let set = Interval::symmetric(1.0).unwrap();
        let m = Metric::identity(1);
        let x = stop_step(&DVector::from_element(1, 0.0), &DVector::from_element(1, 2.0), &set, &m).unwrap();
        assert_eq!(x[0], 1.0);
        let x = stop_step(&DVector::from_element(1, 0.2), &DVector::from_element(1, 0.3), &set, &m).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn scalar_play_matches_clamp_recursion() {
        let r = 0.4;
        let n = 40;
        let vals = triangle(n, 2.0);
        let grid = Grid::uniform(1.0, n).unwrap();
        let p = EviProblem::new(
            Arc::new(Interval::symmetric(r).unwrap()),
            Metric::identity(1),
            DVector::zeros(1),
            scalar_input(grid, &vals),
        )
        .unwrap();
        let x = run_stop(&p).unwrap();
        let xi = run_play(&p).unwrap();
        let mut xr = 0.0f64;
        for i in 0..=n {
            if i > 0 {
                xr = (xr + vals[i] - vals[i - 1]).clamp(-r, r);
            }
            assert!((x.node(i)[0] - xr).abs() < 1e-14);
            assert!((xi.node(i)[0] - (vals[i] - xr)).abs() < 1e-14);
        }
        // the play output stays frozen for a window of width 2r after reversal
        let peak = n / 2;
        let xi_peak = xi.node(peak)[0];
        for i in peak..=n {
            let drop = vals[peak] - vals[i];
            if drop <= 2.0 * r - 1e-12 {
                assert!((xi.node(i)[0] - xi_peak).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_input_and_whole_space() {
        let grid = Grid::uniform(1.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let u: Vec<DVector<f64>> = (0..6).map(|_| DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let x0 = DVector::from_vec(vec![0.1, -0.2]);
        let p = EviProblem::new(
            Arc::new(WholeSpace(2)),
            Metric::identity(2),
            x0.clone(),
            PwLinear::new(grid.clone(), u.clone()).unwrap(),
        )
        .unwrap();
        let x = run_stop(&p).unwrap();
        for i in 0..6 {
            assert!((x.node(i) - (&x0 + &u[i] - &u[0])).norm() < 1e-14);
        }
        let pc = EviProblem::new(
            Arc::new(Ball::new(DVector::zeros(2), 0.5).unwrap()),
            Metric::identity(2),
            x0.clone(),
            PwLinear::constant(grid, u[0].clone()),
        )
        .unwrap();
        let x = run_stop(&pc).unwrap();
        assert!(x.values().iter().all(|v| *v == x0));
    }

    #[test]
    fn rejects_infeasible_start() {
        let grid = Grid::uniform(1.0, 2).unwrap();
        let r = EviProblem::new(
            Arc::new(Interval::symmetric(1.0).unwrap()),
            Metric::identity(1),
            DVector::from_element(1, 2.0),
            scalar_input(grid, &[0.0, 0.0, 0.0]),
        );
        assert!(r.is_err());
    }

    #[test]
    fn identical_pairs_are_tight() {
        let grid = Grid::uniform(1.0, 10).unwrap();
        let p = EviProblem::new(
            Arc::new(Interval::symmetric(0.3).unwrap()),
            Metric::identity(1),
            DVector::zeros(1),
            scalar_input(grid, &triangle(10, 1.0)),
        )
        .unwrap();
        let rep = holder_check(&p, &p, 2.0).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.rhs, 0.0);
        assert!(rep.satisfied);
    }

    #[test]
    fn dissipation_on_plateaus() {
        let n = 20;
        let grid = Grid::uniform(1.0, n).unwrap();
        let p = EviProblem::new(
            Arc::new(Interval::symmetric(0.3).unwrap()),
            Metric::identity(1),
            DVector::zeros(1),
            scalar_input(grid, &triangle(n, 1.0)),
        )
        .unwrap();
        let rep = dissipation_check(&p, 1e-12).unwrap();
        assert!(rep.satisfied);
        assert!(rep.min_orthogonality >= 0.0);
    }
}
