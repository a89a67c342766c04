mod common;

use common::{elastic_saddle, max_dd_norm, UniaxialOracle};
use nalgebra::{DMatrix, DVector};
use plastlab::forward::{
    check_complementarity, reduced::run_reduced, run_forward, solve_step, LoadProgram, StepOptions, Waveform,
};
use plastlab::{build_model, DiscreteModel, GeneralizedStress, ModelParams, SymTensor};

fn model(name: &str) -> DiscreteModel {
    build_model(name, &ModelParams::default()).unwrap()
}

/// Amplitude of a cycle load that peaks at `0.9σ₀` of `|𝒟Σ|`.
fn elastic_amplitude(m: &DiscreteModel) -> f64 {
    let probe = LoadProgram::waveform(m, Waveform::Cycle, 1.0, 1.0, 64).unwrap();
    let sol = elastic_saddle(m, &probe.loads(m).unwrap());
    let peak = sol.iter().map(|(s, _)| max_dd_norm(m, s)).fold(0.0, f64::max);
    0.9 * m.law().sigma0() / peak
}

#[test]
fn elastic_loads_match_saddle_point_solve() {
    for name in ["uniaxial", "patch2d"] {
        let m = model(name);
        let amp = elastic_amplitude(&m);
        for n in [4, 16, 64] {
            let loads = LoadProgram::waveform(&m, Waveform::Cycle, amp, 1.0, n).unwrap();
            let traj = run_forward(&m, &loads, &StepOptions::default()).unwrap();
            let oracle = elastic_saddle(&m, &loads.loads(&m).unwrap());
            for (i, (s, u)) in oracle.iter().enumerate() {
                let ds = (traj.sigma[i].to_vector() - s).amax() / (1.0 + s.amax());
                let du = (DVector::from_column_slice(&traj.u[i]) - u).amax() / (1.0 + u.amax());
                assert!(ds < 1e-10 && du < 1e-10, "{name} N={n} node {i}: {ds:e} {du:e}");
            }
            assert!(traj.lambda.iter().flatten().all(|l| *l == 0.0));
        }
    }
}

#[test]
fn uniaxial_elastic_response_is_compliance_times_load() {
    let m = model("uniaxial");
    let p = ModelParams::default();
    let loads = LoadProgram::new(1.0, vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap();
    let traj = run_forward(&m, &loads, &StepOptions::default()).unwrap();
    for (u, g) in traj.u.iter().zip(loads.controls()) {
        assert!((u[0] - g[0] / (2.0 * p.mu + p.lam)).abs() < 1e-13);
    }
}

fn cycle_nodes(n_quarter: usize, peak: f64) -> Vec<f64> {
    // 0 → peak → −peak → peak → 0
    let knots = [0.0, peak, -peak, peak, 0.0];
    let mut g = vec![0.0];
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = if (b - a).abs() > peak * 1.5 { 2 * n_quarter } else { n_quarter };
        for j in 1..=len {
            g.push(a + (b - a) * j as f64 / len as f64);
        }
    }
    g
}

fn tensor_matrix(t: &SymTensor) -> DMatrix<f64> {
    t.to_matrix()
}

#[test]
fn uniaxial_cycle_matches_closed_form() {
    let p = ModelParams::default();
    let m = model("uniaxial");
    let oracle = UniaxialOracle { mu: p.mu, lam: p.lam, k1: p.k1, sigma0: p.sigma0 };
    let g = cycle_nodes(10, 3.0);
    let horizon = 1.0;
    let tau = horizon / (g.len() - 1) as f64;
    let loads = LoadProgram::new(horizon, g.iter().map(|v| vec![*v]).collect()).unwrap();
    let traj = run_forward(&m, &loads, &StepOptions::default()).unwrap();
    let states = oracle.run(&g, tau);
    let mut plastic_steps = 0;
    for (i, s) in states.iter().enumerate() {
        let (sig, chi) = oracle.tensors(s);
        let gs = &traj.sigma[i].0[0];
        assert!((tensor_matrix(&gs.sigma) - &sig).amax() < 1e-9, "sigma at node {i}");
        assert!((tensor_matrix(&gs.chi) - &chi).amax() < 1e-9, "chi at node {i}");
        assert!((traj.u[i][0] - s.u).abs() < 1e-9, "u at node {i}");
        assert!((gs.sigma.get(0, 0) - g[i]).abs() < 1e-9);
        if i > 0 {
            assert!((traj.lambda[i - 1][0] - s.lambda).abs() < 1e-9 * (1.0 + s.lambda));
            if s.lambda > 0.0 {
                plastic_steps += 1;
                let dd = plastlab::dd(gs).norm();
                assert!((dd - p.sigma0).abs() < 1e-9);
            }
        }
    }
    assert!(plastic_steps > 10);
    // springback: zero load, nonzero displacement
    let last = traj.u.last().unwrap()[0];
    assert_eq!(g.last().copied(), Some(0.0));
    assert!(last.abs() > 1e-3, "residual displacement {last}");
}

#[test]
fn monotone_loading_is_bilinear() {
    let p = ModelParams::default();
    let m = model("uniaxial");
    let n = 40;
    let loads = LoadProgram::waveform(&m, Waveform::Ramp, 4.0, 1.0, n).unwrap();
    let traj = run_forward(&m, &loads, &StepOptions::default()).unwrap();
    let de2 = 2.0 / 3.0;
    let elastic = 2.0 * p.mu + p.lam;
    let h = 2.0 * p.mu + p.k1;
    let hardening = elastic - 4.0 * p.mu * p.mu * de2 / h;
    let mut seen_plastic = false;
    for i in 1..=n {
        let dg = loads.controls()[i][0] - loads.controls()[i - 1][0];
        let slope = dg / (traj.u[i][0] - traj.u[i - 1][0]);
        let plastic = traj.lambda[i - 1][0] > 0.0;
        let was_plastic = i > 1 && traj.lambda[i - 2][0] > 0.0;
        if !plastic {
            assert!(!seen_plastic, "no elastic step after yielding under monotone load");
            assert!((slope - elastic).abs() < 1e-9);
        } else if was_plastic {
            assert!((slope - hardening).abs() < 1e-8, "{slope} vs {hardening}");
        }
        seen_plastic |= plastic;
    }
    assert!(seen_plastic);
}

/// Dense `(A + γQ)Σ = A T` with `γ` from bisection on `φ(Σ(γ)) = 0`.
fn ncp_return_map(m: &DiscreteModel, trial: &GeneralizedStress) -> (DVector<f64>, f64) {
    let law = m.law();
    let g = law.a_gram();
    let k = trial.sigma.n_components();
    let dim = trial.dim();
    // deviator and Frobenius weights assembled by hand
    let mut dev = DMatrix::<f64>::identity(k, k);
    for r in 0..dim {
        for c in 0..dim {
            dev[(r, c)] -= 1.0 / dim as f64;
        }
    }
    let w = DMatrix::from_diagonal(&DVector::from_iterator(k, (0..k).map(|c| if c < dim { 1.0 } else { 2.0 })));
    let mut dd = DMatrix::zeros(k, 2 * k);
    dd.view_mut((0, 0), (k, k)).copy_from(&dev);
    dd.view_mut((0, k), (k, k)).copy_from(&dev);
    let q = dd.transpose() * w * &dd;
    let t = DVector::from_column_slice(&trial.to_vec());
    let s0 = law.sigma0();
    let solve = |gamma: f64| (&g + &q * gamma).lu().solve(&(&g * &t)).unwrap();
    let phi = |x: &DVector<f64>| 0.5 * (x.dot(&(&q * x)) - s0 * s0);
    if phi(&t) <= 0.0 {
        return (t, 0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while phi(&solve(hi)) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(&solve(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (solve(hi), hi)
}

#[test]
fn return_map_matches_complementarity_bisection() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for name in ["uniaxial", "patch2d"] {
        let m = model(name);
        let dim = m.dim();
        let k = dim * (dim + 1) / 2;
        for _ in 0..50 {
            let v: Vec<f64> = (0..2 * k).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let trial = GeneralizedStress::new(
                SymTensor::from_components(dim, &v[..k]).unwrap(),
                SymTensor::from_components(dim, &v[k..]).unwrap(),
            );
            let rm = m.law().return_map(&trial);
            let (oracle, gamma) = ncp_return_map(&m, &trial);
            let got = DVector::from_column_slice(&rm.stress.to_vec());
            assert!((got - &oracle).amax() < 1e-9 * (1.0 + oracle.amax()));
            assert!((rm.gamma - gamma).abs() < 1e-9 * (1.0 + gamma));
        }
    }
}

#[test]
fn plastic_runs_satisfy_complementarity() {
    for (name, amp) in [("uniaxial", 3.0), ("patch2d", 4.0)] {
        let m = model(name);
        for wave in [Waveform::Ramp, Waveform::Triangle, Waveform::Cycle] {
            let loads = LoadProgram::waveform(&m, wave, amp, 1.0, 32).unwrap();
            let traj = run_forward(&m, &loads, &StepOptions::default()).unwrap();
            let rep = check_complementarity(&traj, &m, 1e-9);
            assert!(rep.satisfied, "{name} {wave:?}: {rep:?}");
            assert!(traj.lambda.iter().flatten().any(|l| *l > 0.0));
            assert!(traj.diagnostics.max_kinematic_residual < 1e-9);
        }
    }
}

#[test]
fn reduced_stress_problem_reproduces_forward_stresses() {
    for (name, amp, n) in [("uniaxial", 3.0, 24), ("patch2d", 4.0, 12)] {
        let m = model(name);
        let loads = LoadProgram::waveform(&m, Waveform::Cycle, amp, 1.0, n).unwrap();
        let traj = run_forward(&m, &loads, &StepOptions::default()).unwrap();
        let reduced = run_reduced(&m, &loads).unwrap();
        for (a, b) in traj.sigma.iter().zip(&reduced) {
            assert!((a.to_vector() - b.to_vector()).amax() < 1e-8);
        }
    }
}

#[test]
fn step_rejects_mismatched_sizes() {
    let m = model("patch2d");
    let ell = vec![0.0; m.n_dofs()];
    let r = solve_step(&m, &m.zero_field(), &[0.0], &ell, 0.1, &StepOptions::default());
    assert!(r.is_err());
}
