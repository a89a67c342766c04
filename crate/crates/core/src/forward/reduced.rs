//! The stress-only reformulation: `Σ = Σ₀ + Σ_ℓ` with `Σ₀` in
//! `K_B = K ∩ ker B`, an evolution inequality in `S²` with the energy metric.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::load::LoadProgram;
use crate::error::{Error, Result};
use crate::evi::{run_stop, ConvexSet, EviProblem};
use crate::metric::Metric;
use crate::model::{DiscreteModel, GeneralizedStressField};
use crate::path::PwLinear;
use crate::tensor::{component_weight, dev_operator};

/// `K ∩ ker B` on flattened stress fields.
#[derive(Clone, Debug)]
pub struct KernelYieldSet {
    b: DMatrix<f64>,
    /// Per-point `φ` gram on the point's `2k` block.
    q: DMatrix<f64>,
    block: usize,
    n_points: usize,
    sigma0: f64,
    max_iter: usize,
}

impl KernelYieldSet {
    pub fn new(model: &DiscreteModel) -> Self {
        let dim = model.dim();
        let k = model.n_components();
        let p = dev_operator(dim).matrix();
        let mut dd = DMatrix::zeros(k, 2 * k);
        dd.view_mut((0, 0), (k, k)).copy_from(&p);
        dd.view_mut((0, k), (k, k)).copy_from(&p);
        let w = DMatrix::from_diagonal(&DVector::from_iterator(k, (0..k).map(|c| component_weight(dim, c))));
        Self {
            b: model.b_matrix(),
            q: dd.transpose() * w * dd,
            block: 2 * k,
            n_points: model.n_points(),
            sigma0: model.law().sigma0(),
            max_iter: 200,
        }
    }

    fn phi(&self, z: &DVector<f64>, p: usize) -> f64 {
        let zp = z.rows(p * self.block, self.block);
        0.5 * (zp.dot(&(&self.q * zp)) - self.sigma0 * self.sigma0)
    }

    fn grad_phi(&self, z: &DVector<f64>, p: usize) -> DVector<f64> {
        let zp = z.rows(p * self.block, self.block);
        &self.q * zp
    }
}

/// Fischer–Burmeister function `a + b − √(a² + b²)`.
fn fb(a: f64, b: f64) -> f64 {
    a + b - (a * a + b * b).sqrt()
}

impl ConvexSet for KernelYieldSet {
    fn dim(&self) -> usize {
        self.n_points * self.block
    }

    /// Semismooth Newton on the Fischer–Burmeister reformulation of
    /// `G(z − y) + Bᵀν + Σ γ_p ∇φ_p(z) = 0`, `Bz = 0`, `0 ≤ γ ⊥ −φ(z) ≥ 0`,
    /// globalized by an Armijo search on the squared residual.
    fn project(&self, y: &DVector<f64>, metric: &Metric) -> Result<DVector<f64>> {
        let nf = self.dim();
        if y.len() != nf || metric.dim() != nf {
            return Err(Error::DimensionMismatch { what: "kernel set point", expected: nf, found: y.len() });
        }
        let nb = self.b.nrows();
        let np = self.n_points;
        let g = metric.to_dense();
        let gy = &g * y;
        let total = nf + nb + np;
        let scale = 1.0 + gy.amax() + self.sigma0 * self.sigma0;

        let residual = |x: &DVector<f64>| -> DVector<f64> {
            let z = x.rows(0, nf).into_owned();
            let nu = x.rows(nf, nb);
            let mut f = DVector::zeros(total);
            let mut r1 = &g * &z - &gy + self.b.transpose() * nu;
            for p in 0..np {
                let gam = x[nf + nb + p];
                let gp = self.grad_phi(&z, p);
                let mut seg = r1.rows_mut(p * self.block, self.block);
                seg += gp * gam;
            }
            f.rows_mut(0, nf).copy_from(&r1);
            f.rows_mut(nf, nb).copy_from(&(&self.b * &z));
            for p in 0..np {
                f[nf + nb + p] = fb(x[nf + nb + p], -self.phi(&z, p));
            }
            f
        };

        // start from the feasible point z = 0 with inactive multipliers
        let mut x = DVector::zeros(total);
        let mut f = residual(&x);
        let mut merit = 0.5 * f.norm_squared();
        for _ in 0..self.max_iter {
            if f.amax() <= 1e-13 * scale {
                let z = x.rows(0, nf).into_owned();
                return Ok(z);
            }
            let z = x.rows(0, nf).into_owned();
            let mut jac = DMatrix::zeros(total, total);
            let mut hz = g.clone();
            for p in 0..np {
                let gam = x[nf + nb + p];
                let o = p * self.block;
                let mut blk = hz.view_mut((o, o), (self.block, self.block));
                blk += &self.q * gam;
            }
            jac.view_mut((0, 0), (nf, nf)).copy_from(&hz);
            jac.view_mut((0, nf), (nf, nb)).copy_from(&self.b.transpose());
            jac.view_mut((nf, 0), (nb, nf)).copy_from(&self.b);
            for p in 0..np {
                let o = p * self.block;
                let gp = self.grad_phi(&z, p);
                let row = nf + nb + p;
                jac.view_mut((o, row), (self.block, 1)).copy_from(&gp);
                let a = x[row];
                let b = -self.phi(&z, p);
                let r = (a * a + b * b).sqrt();
                let (da, db) =
                    if r > 1e-300 { (1.0 - a / r, 1.0 - b / r) } else { (1.0 - 0.5f64.sqrt(), 1.0 - 0.5f64.sqrt()) };
                jac[(row, row)] = da;
                // ∂(−φ)/∂z = −∇φ
                for c in 0..self.block {
                    jac[(row, o + c)] = -db * gp[c];
                }
            }
            let dir = jac
                .clone()
                .lu()
                .solve(&(-&f))
                .ok_or_else(|| Error::ProjectionFailure("singular semismooth Newton matrix".into()))?;
            // directional derivative of the merit is −‖f‖²
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &x + &dir * t;
                let fc = residual(&cand);
                let mc = 0.5 * fc.norm_squared();
                if mc <= (1.0 - 2e-4 * t) * merit {
                    x = cand;
                    f = fc;
                    merit = mc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // fall back on the steepest descent direction of the merit
                let grad = jac.transpose() * &f;
                let mut t = 1.0 / grad.norm().max(1e-300) * f.norm();
                let mut moved = false;
                for _ in 0..80 {
                    let cand = &x - &grad * t;
                    let fc = residual(&cand);
                    let mc = 0.5 * fc.norm_squared();
                    if mc < merit - 1e-4 * t * grad.norm_squared() {
                        x = cand;
                        f = fc;
                        merit = mc;
                        moved = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !moved {
                    break;
                }
            }
        }
        Err(Error::ProjectionFailure(format!("kernel-yield projection stalled at residual {:.3e}", f.amax())))
    }

    fn contains(&self, z: &DVector<f64>, tol: f64) -> bool {
        z.len() == self.dim()
            && (0..self.n_points).all(|p| self.phi(z, p) <= tol)
            && (&self.b * z).amax() <= tol * (1.0 + z.amax())
    }

    fn name(&self) -> &'static str {
        "kernel-yield"
    }
}

/// Runs the catching-up scheme on `x = Σ − Σ_ℓ ∈ K_B` driven by
/// `−Σ_ℓ`, and returns the reconstructed stresses `x_i + Σ_{ℓ_i}`.
pub fn run_reduced(model: &DiscreteModel, loads: &LoadProgram) -> Result<Vec<GeneralizedStressField>> {
    let ells = loads.loads(model)?;
    let lifts = ells.iter().map(|l| model.sigma_of_ell(l)).collect::<Result<Vec<_>>>()?;
    let input = PwLinear::new(loads.grid().clone(), lifts.iter().map(|s| -s.to_vector()).collect())?;
    let set = KernelYieldSet::new(model);
    let problem = EviProblem::new(Arc::new(set), model.a_metric(), DVector::zeros(model.field_len()), input)?;
    let x = run_stop(&problem)?;
    x.values()
        .iter()
        .zip(&lifts)
        .map(|(xi, l)| GeneralizedStressField::from_vector(model.dim(), &(xi + l.to_vector())))
        .collect()
}
