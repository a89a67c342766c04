use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{integrated_observable, LoadSpec};
use crate::error::Result;
use crate::forward::{displacement_metric, load_metric, run_forward, LoadProgram, StepOptions, Trajectory};
use crate::model::DiscreteModel;
use crate::par::{self, Execution};
use crate::path::PwLinear;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakProbeRow {
    pub tau: f64,
    /// `‖g^τ − g‖_{L∞}` in control coordinates.
    pub load_gap: f64,
    /// `‖ġ^τ‖_{L²}` of the oscillating control.
    pub rate_norm: f64,
    /// `‖ġ‖_{L²}` of the sampled base control.
    pub base_rate_norm: f64,
    /// `|∫⟨Σ^τ − Σ_base, T⟩ dt|`.
    pub sigma_observable_gap: f64,
    /// `|∫⟨u^τ − u_base, v⟩ dt|`.
    pub u_observable_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakProbeReport {
    pub amplitude: f64,
    pub rows: Vec<WeakProbeRow>,
    /// Observable gaps of the finest grid over those of the coarsest.
    pub sigma_gap_ratio: f64,
    pub u_gap_ratio: f64,
    /// Smallest `‖ġ^τ‖_{L²} − ‖ġ‖_{L²}` over the grids.
    pub min_rate_excess: f64,
}

fn control_path(traj: &Trajectory) -> PwLinear {
    traj.g_path()
}

/// Runs the base control `g` and `g^τ_i = g(t_i) + a·τ·(i mod 2)·d` on each
/// grid, with `d` the model's load direction. The oscillation tends to zero
/// uniformly while its slope stays at `±a`.
pub fn weak_convergence_probe(
    model: &DiscreteModel,
    base: &LoadSpec,
    amplitude: f64,
    steps: &[usize],
    seed: u64,
    exec: Execution,
) -> Result<WeakProbeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_test = DVector::from_fn(model.field_len(), |_, _| rng.gen_range(-1.0..1.0));
    let v_test = DVector::from_fn(model.n_dofs(), |_, _| rng.gen_range(-1.0..1.0));
    let dir = model.load_direction().to_vec();
    let opts = StepOptions::default();
    let id = crate::metric::Metric::identity(model.n_controls());

    let rows = par::map(exec, steps, |&n| -> Result<WeakProbeRow> {
        let plain = base.sample(n)?;
        let tau = plain.tau();
        let g: Vec<Vec<f64>> = plain
            .controls()
            .iter()
            .enumerate()
            .map(|(i, gi)| {
                let bump = amplitude * tau * (i % 2) as f64;
                gi.iter().zip(&dir).map(|(v, d)| v + bump * d).collect()
            })
            .collect();
        let osc = LoadProgram::new(base.horizon, g)?;
        let a = run_forward(model, &plain, &opts)?;
        let b = run_forward(model, &osc, &opts)?;
        let ga = control_path(&a);
        let gb = control_path(&b);
        let sig_gap = integrated_observable(&b.sigma_path(), &t_test) - integrated_observable(&a.sigma_path(), &t_test);
        let u_gap = integrated_observable(&b.u_path(), &v_test) - integrated_observable(&a.u_path(), &v_test);
        Ok(WeakProbeRow {
            tau,
            load_gap: ga.difference(&gb)?.sup_norm(&id),
            rate_norm: gb.derivative_norm(&id, 2.0)?,
            base_rate_norm: ga.derivative_norm(&id, 2.0)?,
            sigma_observable_gap: sig_gap.abs(),
            u_observable_gap: u_gap.abs(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let ratio = |f: fn(&WeakProbeRow) -> f64| {
        let first = rows.first().map(f).unwrap_or(0.0);
        let last = rows.last().map(f).unwrap_or(0.0);
        if first > 0.0 {
            last / first
        } else {
            0.0
        }
    };
    Ok(WeakProbeReport {
        amplitude,
        sigma_gap_ratio: ratio(|r| r.sigma_observable_gap),
        u_gap_ratio: ratio(|r| r.u_observable_gap),
        min_rate_excess: rows.iter().map(|r| r.rate_norm - r.base_rate_norm).fold(f64::INFINITY, f64::min),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub pairs: usize,
    /// `‖Σ₁ − Σ₂‖²_{L∞(A)} / ‖ℓ₁ − ℓ₂‖_{L²(V')}` per pair.
    pub holder_ratios: Vec<f64>,
    /// `‖(Σ,u)₁ − (Σ,u)₂‖_{L∞} / ‖ℓ₁ − ℓ₂‖_{W^{1,1}(V')}` per pair.
    pub lipschitz_ratios: Vec<f64>,
    pub max_holder_ratio: f64,
    pub max_lipschitz_ratio: f64,
}

fn random_program(
    model: &DiscreteModel,
    horizon: f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
    scale: f64,
) -> Result<LoadProgram> {
    let m = model.n_controls();
    let modes: Vec<Vec<f64>> = (0..3).map(|_| (0..m).map(|_| rng.gen_range(-scale..scale)).collect()).collect();
    let dir = model.load_direction().to_vec();
    let amp: f64 = rng.gen_range(0.5..2.5);
    LoadProgram::from_fn(horizon, steps, |t| {
        let s = t / horizon;
        (0..m)
            .map(|j| {
                let base = amp * dir[j] * (2.0 * std::f64::consts::PI * s).sin();
                base + (0..3).map(|k| modes[k][j] * ((k + 1) as f64 * std::f64::consts::PI * s).sin()).sum::<f64>()
            })
            .collect()
    })
}

/// Empirical Hölder and Lipschitz ratios of the forward map over random
/// pairs of smooth loads of bounded rate. Purely observational.
pub fn forward_stability_probe(
    model: &DiscreteModel,
    horizon: f64,
    steps: usize,
    pairs: usize,
    seed: u64,
    exec: Execution,
) -> Result<StabilityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut programs = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let a = random_program(model, horizon, steps, &mut rng, 0.5)?;
        let b = random_program(model, horizon, steps, &mut rng, 0.5)?;
        programs.push((a, b));
    }
    let opts = StepOptions::default();
    let lm = load_metric(model);
    let am = model.a_metric();
    let dm = displacement_metric(model);
    let results = par::map(exec, &programs, |(pa, pb)| -> Result<(f64, f64)> {
        let a = run_forward(model, pa, &opts)?;
        let b = run_forward(model, pb, &opts)?;
        let dl = a.ell_path().difference(&b.ell_path())?;
        let mut sup_sigma: f64 = 0.0;
        let mut sup_state: f64 = 0.0;
        for i in 0..a.grid.len() {
            let ds = am.norm_squared(&(a.sigma[i].to_vector() - b.sigma[i].to_vector()));
            let du: DVector<f64> =
                DVector::from_iterator(model.n_dofs(), a.u[i].iter().zip(&b.u[i]).map(|(x, y)| x - y));
            sup_sigma = sup_sigma.max(ds);
            sup_state = sup_state.max(ds + dm.norm_squared(&du));
        }
        let l2 = dl.l2_norm(&lm);
        let w11 = dl.w1p_norm(&lm, 1.0)?;
        Ok((sup_sigma / l2, sup_state.sqrt() / w11))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (holder_ratios, lipschitz_ratios): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    Ok(StabilityReport {
        pairs,
        max_holder_ratio: holder_ratios.iter().copied().fold(0.0, f64::max),
        max_lipschitz_ratio: lipschitz_ratios.iter().copied().fold(0.0, f64::max),
        holder_ratios,
        lipschitz_ratios,
    })
}
