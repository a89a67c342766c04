//! Randomized Hölder checks of the play operator.

use std::sync::Arc;

use nalgebra::DVector;
use plastlab::evi::{
    dissipation_check, holder_check, stop_lipschitz_ratio, Ball, ConvexSet, EviProblem, Interval, VonMisesCylinder,
};
use plastlab::path::{Grid, PwLinear};
use plastlab::{par, Execution, MaterialLaw, Metric};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::SetKind;

pub fn set_and_metric(kind: SetKind) -> plastlab::Result<(Arc<dyn ConvexSet>, Metric)> {
    Ok(match kind {
        SetKind::Interval => (Arc::new(Interval::new(-0.5, 0.8)?), Metric::identity(1)),
        SetKind::Ball => {
            // anisotropic metric so the projection is not radial
            let g = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
            (Arc::new(Ball::new(DVector::from_vec(vec![0.2, -0.1]), 1.0)?), Metric::dense(g)?)
        }
        SetKind::Cylinder => {
            let law = MaterialLaw::isotropic(2, 1.0, 1.0, 0.5, 1.0)?;
            (Arc::new(VonMisesCylinder::for_law(&law)?), Metric::dense(law.a_gram())?)
        }
    })
}

fn random_input(rng: &mut ChaCha8Rng, grid: &Grid, dim: usize, scale: f64) -> plastlab::Result<PwLinear> {
    let mut v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    let mut vals = vec![v.clone()];
    for _ in 1..grid.len() {
        v += DVector::from_fn(dim, |_, _| rng.gen_range(-scale..scale));
        vals.push(v.clone());
    }
    PwLinear::new(grid.clone(), vals)
}

/// Pairs of problems sharing a random grid; every fourth pair is a small
/// perturbation of its first input.
pub fn random_pairs(
    kind: SetKind,
    count: usize,
    max_steps: usize,
    seed: u64,
) -> plastlab::Result<Vec<(EviProblem, EviProblem)>> {
    let (set, metric) = set_and_metric(kind)?;
    let dim = set.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = set.project(&DVector::zeros(dim), &metric)?;
    (0..count)
        .map(|k| {
            let grid = Grid::uniform(rng.gen_range(0.5..2.0), rng.gen_range(2..=max_steps))?;
            let scale = [0.05, 0.3, 1.5][k % 3];
            let u1 = random_input(&mut rng, &grid, dim, scale)?;
            let u2 = if k % 4 == 0 {
                let d = random_input(&mut rng, &grid, dim, 1e-3)?;
                PwLinear::new(grid.clone(), u1.values().iter().zip(d.values()).map(|(a, b)| a + b * 1e-2).collect())?
            } else {
                random_input(&mut rng, &grid, dim, scale)?
            };
            Ok((
                EviProblem::new(set.clone(), metric.clone(), x0.clone(), u1)?,
                EviProblem::new(set.clone(), metric.clone(), x0.clone(), u2)?,
            ))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderSummary {
    pub set: &'static str,
    /// `null` stands for `∞`.
    pub p: f64,
    pub pairs: usize,
    pub satisfied: usize,
    pub min_slack: f64,
    /// Largest `lhs / rhs` over pairs with `rhs > 0`.
    pub max_ratio: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetSummary {
    pub set: &'static str,
    pub holder: Vec<HolderSummary>,
    /// Discrete dissipation inequalities on the first input of every pair.
    pub dissipation_passed: bool,
    /// Largest observed stop Lipschitz ratio in `L∞` against `W^{1,1}`.
    pub max_lipschitz_ratio: f64,
}

pub fn check_set(
    kind: SetKind,
    exponents: &[f64],
    count: usize,
    max_steps: usize,
    seed: u64,
    exec: Execution,
) -> plastlab::Result<SetSummary> {
    let pairs = random_pairs(kind, count, max_steps, seed)?;
    let mut holder = Vec::new();
    for &p in exponents {
        let reports =
            par::map(exec, &pairs, |(a, b)| holder_check(a, b, p)).into_iter().collect::<plastlab::Result<Vec<_>>>()?;
        let satisfied = reports.iter().filter(|r| r.satisfied).count();
        holder.push(HolderSummary {
            set: kind.name(),
            p,
            pairs: reports.len(),
            satisfied,
            min_slack: reports.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min),
            max_ratio: reports.iter().filter(|r| r.rhs > 0.0).map(|r| r.lhs / r.rhs).fold(0.0, f64::max),
            passed: satisfied == reports.len(),
        });
    }
    let diss = par::map(exec, &pairs, |(a, _)| dissipation_check(a, 1e-9))
        .into_iter()
        .collect::<plastlab::Result<Vec<_>>>()?;
    let lip = par::map(exec, &pairs, |(a, b)| stop_lipschitz_ratio(a, b))
        .into_iter()
        .collect::<plastlab::Result<Vec<_>>>()?;
    Ok(SetSummary {
        set: kind.name(),
        holder,
        dissipation_passed: diss.iter().all(|d| d.satisfied),
        max_lipschitz_ratio: lip.into_iter().flatten().fold(0.0, f64::max),
    })
}
