//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use plastlab::{DiscreteModel, GeneralizedStressField};

/// Elastic incremental solve from the zero state: at every node
/// `[[G, Bᵀ], [B, 0]] [Σ; u] = [GΣ_prev + Bᵀu_prev; ℓ]`, assembled densely.
pub fn elastic_saddle(model: &DiscreteModel, ells: &[Vec<f64>]) -> Vec<(DVector<f64>, DVector<f64>)> {
    let g = model.a_metric().to_dense();
    let b = model.b_matrix();
    let nf = g.nrows();
    let nd = b.nrows();
    let mut k = DMatrix::zeros(nf + nd, nf + nd);
    k.view_mut((0, 0), (nf, nf)).copy_from(&g);
    k.view_mut((0, nf), (nf, nd)).copy_from(&b.transpose());
    k.view_mut((nf, 0), (nd, nf)).copy_from(&b);
    let lu = k.lu();
    let mut sigma = DVector::zeros(nf);
    let mut u = DVector::zeros(nd);
    let mut out = vec![(sigma.clone(), u.clone())];
    for ell in &ells[1..] {
        let mut rhs = DVector::zeros(nf + nd);
        rhs.rows_mut(0, nf).copy_from(&(&g * &sigma + b.transpose() * &u));
        rhs.rows_mut(nf, nd).copy_from(&DVector::from_column_slice(ell));
        let x = lu.solve(&rhs).expect("nonsingular saddle point matrix");
        sigma = x.rows(0, nf).into_owned();
        u = x.rows(nf, nd).into_owned();
        out.push((sigma.clone(), u.clone()));
    }
    out
}

/// Max over points of `|𝒟Σ_p|`.
pub fn max_dd_norm(model: &DiscreteModel, sigma: &DVector<f64>) -> f64 {
    let f = GeneralizedStressField::from_vector(model.dim(), sigma).unwrap();
    f.iter().map(|s| plastlab::dd(s).norm()).fold(0.0, f64::max)
}

/// State of the one-point uniaxial-strain model: displacement `u`, plastic
/// strain amplitude `π` along `n = dev e / |dev e|`.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniaxialState {
    pub u: f64,
    pub pi: f64,
    /// `|ΔΠ| / (τσ₀)`.
    pub lambda: f64,
}

pub struct UniaxialOracle {
    pub mu: f64,
    pub lam: f64,
    pub k1: f64,
    pub sigma0: f64,
}

impl UniaxialOracle {
    fn de(&self) -> f64 {
        (2.0f64 / 3.0).sqrt()
    }

    /// Relative deviatoric amplitude `a = 2μ|dev e|u − (2μ + k₁)π`.
    pub fn amplitude(&self, s: &UniaxialState) -> f64 {
        2.0 * self.mu * self.de() * s.u - (2.0 * self.mu + self.k1) * s.pi
    }

    /// Backward Euler step with `σ₁₁` prescribed to `g` at the new node.
    pub fn step(&self, prev: &UniaxialState, dg: f64, tau: f64) -> UniaxialState {
        let (mu, lam, k1, s0) = (self.mu, self.lam, self.k1, self.sigma0);
        let de = self.de();
        let a_prev = self.amplitude(prev);
        let du_el = dg / (2.0 * mu + lam);
        let a_tr = a_prev + 2.0 * mu * de * du_el;
        if a_tr.abs() <= s0 {
            return UniaxialState { u: prev.u + du_el, pi: prev.pi, lambda: 0.0 };
        }
        let s = a_tr.signum();
        let h = 2.0 * mu + k1;
        let du = (dg + 2.0 * mu * de * (a_prev - s * s0) / h) / ((2.0 * mu + lam) - 4.0 * mu * mu * de * de / h);
        let a_trial = a_prev + 2.0 * mu * de * du;
        let dpi = (a_trial - s * s0) / h;
        UniaxialState { u: prev.u + du, pi: prev.pi + dpi, lambda: dpi.abs() / (tau * s0) }
    }

    /// Stress and back stress as 3×3 matrices.
    pub fn tensors(&self, s: &UniaxialState) -> (DMatrix<f64>, DMatrix<f64>) {
        let de = self.de();
        let e = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let n = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0])) / de;
        let sigma = (&e * s.u - &n * s.pi) * (2.0 * self.mu) + DMatrix::identity(3, 3) * (self.lam * s.u);
        let chi = &n * (-self.k1 * s.pi);
        (sigma, chi)
    }

    pub fn run(&self, g: &[f64], tau: f64) -> Vec<UniaxialState> {
        let mut out = vec![UniaxialState::default()];
        for w in g.windows(2) {
            let next = self.step(out.last().unwrap(), w[1] - w[0], tau);
            out.push(next);
        }
        out
    }
}

/// `argmin ½xᵀQx − cᵀx` subject to `Cx = 0`, by a dense KKT solve.
pub fn equality_qp(q: &DMatrix<f64>, c: &DVector<f64>, cons: &DMatrix<f64>) -> DVector<f64> {
    let n = q.nrows();
    let k = cons.nrows();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(q);
    kkt.view_mut((0, n), (n, k)).copy_from(&cons.transpose());
    kkt.view_mut((n, 0), (k, n)).copy_from(cons);
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(c);
    kkt.lu().solve(&rhs).expect("nonsingular KKT matrix").rows(0, n).into_owned()
}

/// Discrete `H¹(0,T;U)` Gram matrix on `g_1..g_N` (with `g_0 = 0`), built
/// from `‖g‖² = Σ_i |g_i − g_{i−1}|²_U / τ`.
pub fn h1_gram(steps: usize, tau: f64, weights: &[f64]) -> DMatrix<f64> {
    let m = weights.len();
    let n = steps * m;
    // difference operator from free unknowns to increments
    let mut d = DMatrix::zeros(n, n);
    for i in 0..steps {
        for j in 0..m {
            d[(i * m + j, i * m + j)] = 1.0;
            if i > 0 {
                d[(i * m + j, (i - 1) * m + j)] = -1.0;
            }
        }
    }
    let w = DMatrix::from_diagonal(&DVector::from_iterator(n, (0..n).map(|r| weights[r % m] / tau)));
    d.transpose() * w * d
}

/// Constraint matrix selecting `g_N`.
pub fn final_node_constraint(steps: usize, m: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(m, steps * m);
    for j in 0..m {
        c[(j, (steps - 1) * m + j)] = 1.0;
    }
    c
}

/// Columns `u(ℓ = E e_j)` of the elastic control-to-displacement map.
pub fn elastic_control_map(model: &DiscreteModel) -> DMatrix<f64> {
    let m = model.n_controls();
    let mut l = DMatrix::zeros(model.n_dofs(), m);
    for j in 0..m {
        let mut g = vec![0.0; m];
        g[j] = 1.0;
        let ell = model.load_of_control(&g).unwrap();
        let sol = elastic_saddle(model, &[vec![0.0; ell.len()], ell]);
        l.set_column(j, &sol[1].1);
    }
    l
}

/// Quadratic model `J(x) = ½xᵀQx − cᵀx + k` of the tracking objective
/// `½∫‖u − u_d‖²_mass dt + (ν/2)‖g‖²_{H¹}` in the elastic regime, with the
/// target given by its nodes on the control grid.
pub struct TrackingQuadratic {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub k: f64,
}

pub fn tracking_quadratic(
    model: &DiscreteModel,
    steps: usize,
    tau: f64,
    target: &[DVector<f64>],
    nu: f64,
) -> TrackingQuadratic {
    let m = model.n_controls();
    let l = elastic_control_map(model);
    let mass = DMatrix::from_diagonal(&DVector::from_column_slice(model.displacement_mass()));
    // P1 mass matrix in time on nodes 0..N
    let mut tm = DMatrix::<f64>::zeros(steps + 1, steps + 1);
    for i in 0..steps {
        tm[(i, i)] += tau / 3.0;
        tm[(i + 1, i + 1)] += tau / 3.0;
        tm[(i, i + 1)] += tau / 6.0;
        tm[(i + 1, i)] += tau / 6.0;
    }
    let ltm = l.transpose() * &mass * &l;
    let n = steps * m;
    let mut q = h1_gram(steps, tau, model.control_weights()) * nu;
    let mut c = DVector::zeros(n);
    for i in 1..=steps {
        for j in 1..=steps {
            let mut blk = q.view_mut(((i - 1) * m, (j - 1) * m), (m, m));
            blk += &ltm * tm[(i, j)];
        }
        for j in 0..=steps {
            let mut seg = c.rows_mut((i - 1) * m, m);
            seg += l.transpose() * &mass * &target[j] * tm[(i, j)];
        }
    }
    let mut k = 0.0;
    for i in 0..=steps {
        for j in 0..=steps {
            k += 0.5 * tm[(i, j)] * target[i].dot(&(&mass * &target[j]));
        }
    }
    TrackingQuadratic { q, c, k }
}

impl TrackingQuadratic {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) - self.c.dot(x) + self.k
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x - &self.c
    }
}

pub mod evi_pairs {
    use std::sync::Arc;

    use nalgebra::DVector;
    use plastlab::evi::{holder_check, Ball, ConvexSet, EviProblem, HolderReport, Interval, VonMisesCylinder};
    use plastlab::path::{Grid, PwLinear};
    use plastlab::{MaterialLaw, Metric};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[derive(Clone, Copy, Debug)]
    pub enum SetKind {
        Interval,
        Ball2,
        Cylinder,
    }

    pub fn set_and_metric(kind: SetKind) -> (Arc<dyn ConvexSet>, Metric) {
        match kind {
            SetKind::Interval => (Arc::new(Interval::new(-0.5, 0.8).unwrap()), Metric::identity(1)),
            SetKind::Ball2 => {
                (Arc::new(Ball::new(DVector::from_vec(vec![0.2, -0.1]), 1.0).unwrap()), Metric::identity(2))
            }
            SetKind::Cylinder => {
                let law = MaterialLaw::isotropic(2, 1.0, 1.0, 0.5, 1.0).unwrap();
                let set = VonMisesCylinder::for_law(&law).unwrap();
                (Arc::new(set), Metric::dense(law.a_gram()).unwrap())
            }
        }
    }

    /// Random piecewise-linear input on `grid` with increments of size
    /// `O(scale)` and a random start.
    pub fn random_input(rng: &mut ChaCha8Rng, grid: &Grid, dim: usize, scale: f64) -> PwLinear {
        let mut v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let mut vals = vec![v.clone()];
        for _ in 1..grid.len() {
            v += DVector::from_fn(dim, |_, _| rng.gen_range(-scale..scale));
            vals.push(v.clone());
        }
        PwLinear::new(grid.clone(), vals).unwrap()
    }

    /// Hölder reports over `count` random pairs sharing a grid and metric.
    pub fn holder_sweep(kind: SetKind, p: f64, count: usize, seed: u64) -> Vec<HolderReport> {
        let (set, metric) = set_and_metric(kind);
        let dim = set.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|k| {
                let n = rng.gen_range(3..40);
                let grid = Grid::uniform(rng.gen_range(0.5..2.0), n).unwrap();
                let scale = [0.05, 0.3, 1.5][k % 3];
                let u1 = random_input(&mut rng, &grid, dim, scale);
                let u2 = if k % 4 == 0 {
                    // nearby inputs probe the small-distance regime
                    let d = random_input(&mut rng, &grid, dim, 1e-3);
                    PwLinear::new(grid.clone(), u1.values().iter().zip(d.values()).map(|(a, b)| a + b * 1e-2).collect())
                        .unwrap()
                } else {
                    random_input(&mut rng, &grid, dim, scale)
                };
                let x0 = DVector::zeros(dim);
                let p1 = EviProblem::new(set.clone(), metric.clone(), x0.clone(), u1).unwrap();
                let p2 = EviProblem::new(set.clone(), metric.clone(), x0, u2).unwrap();
                holder_check(&p1, &p2, p).unwrap()
            })
            .collect()
    }
}
