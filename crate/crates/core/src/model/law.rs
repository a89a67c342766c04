use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{component_weight, dd, dev_operator, n_components, GeneralizedStress, SymOperator, SymTensor};

/// Lamé constants and hardening constant of an isotropic law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotropicParams {
    pub mu: f64,
    pub lam: f64,
    pub k1: f64,
}

/// Compliance, inverse hardening modulus and yield stress.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialLaw {
    c_inv: SymOperator,
    h_inv: SymOperator,
    sigma0: f64,
    stiffness: SymOperator,
    hardening: SymOperator,
    isotropic: Option<IsotropicParams>,
}

/// Result of projecting a trial generalized stress onto the yield set in the
/// energy metric.
#[derive(Clone, Copy, Debug)]
pub struct ReturnMap {
    pub stress: GeneralizedStress,
    /// Scaled plastic multiplier: `A(Σ − Σ_trial) + γ 𝒟*𝒟Σ = 0`.
    pub gamma: f64,
}

impl MaterialLaw {
    /// A general law. Both maps must be Frobenius-symmetric and positive definite.
    pub fn new(c_inv: SymOperator, h_inv: SymOperator, sigma0: f64) -> Result<Self> {
        if c_inv.dim() != h_inv.dim() {
            return Err(Error::InvalidParameter("compliance and hardening maps differ in dimension".into()));
        }
        if !(sigma0 > 0.0) {
            return Err(Error::InvalidParameter(format!("yield stress must be positive, got {sigma0}")));
        }
        if !c_inv.is_spd() {
            return Err(Error::InvalidParameter("compliance is not symmetric positive definite".into()));
        }
        if !h_inv.is_spd() {
            return Err(Error::InvalidParameter("inverse hardening modulus is not symmetric positive definite".into()));
        }
        let stiffness = c_inv.inverse()?;
        let hardening = h_inv.inverse()?;
        Ok(Self { c_inv, h_inv, sigma0, stiffness, hardening, isotropic: None })
    }

    /// Isotropic compliance `σ/(2μ) − λ/(2μ(2μ+dλ)) tr(σ) I` with `H⁻¹χ = χ/k1`.
    pub fn isotropic(dim: usize, mu: f64, lam: f64, k1: f64, sigma0: f64) -> Result<Self> {
        if !(mu > 0.0) || !(dim as f64 * lam + 2.0 * mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Lamé constants violate coercivity: mu = {mu}, lambda = {lam}"
            )));
        }
        if !(k1 > 0.0) {
            return Err(Error::InvalidParameter(format!("hardening constant must be positive, got {k1}")));
        }
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("unsupported dimension {dim}")));
        }
        let d = dim as f64;
        let c_inv = SymOperator::from_fn(dim, |s| {
            let tr = s.trace();
            s.scale(1.0 / (2.0 * mu)).axpy(-lam / (2.0 * mu * (2.0 * mu + d * lam)) * tr, &SymTensor::identity(dim))
        });
        let h_inv = SymOperator::scaled_identity(dim, 1.0 / k1);
        let mut law = Self::new(c_inv, h_inv, sigma0)?;
        // exact inverses avoid a round trip through dense inversion
        law.stiffness =
            SymOperator::from_fn(dim, |e| e.scale(2.0 * mu).axpy(lam * e.trace(), &SymTensor::identity(dim)));
        law.hardening = SymOperator::scaled_identity(dim, k1);
        law.isotropic = Some(IsotropicParams { mu, lam, k1 });
        Ok(law)
    }

    /// Same maps, but always handled by the general-law code path.
    pub fn without_closed_form(&self) -> Self {
        let mut out = self.clone();
        out.isotropic = None;
        out
    }

    pub fn dim(&self) -> usize {
        self.c_inv.dim()
    }

    pub fn c_inv(&self) -> &SymOperator {
        &self.c_inv
    }

    pub fn h_inv(&self) -> &SymOperator {
        &self.h_inv
    }

    /// Elasticity tensor `C`.
    pub fn stiffness(&self) -> &SymOperator {
        &self.stiffness
    }

    /// Hardening modulus `H`.
    pub fn hardening(&self) -> &SymOperator {
        &self.hardening
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn isotropic_params(&self) -> Option<IsotropicParams> {
        self.isotropic
    }

    /// `(C⁻¹σ, H⁻¹χ)`.
    pub fn apply_a(&self, s: &GeneralizedStress) -> GeneralizedStress {
        GeneralizedStress::new(self.c_inv.apply(&s.sigma), self.h_inv.apply(&s.chi))
    }

    /// Pointwise energy inner product `τ : C⁻¹σ + μ : H⁻¹χ`.
    pub fn inner_a(&self, a: &GeneralizedStress, b: &GeneralizedStress) -> f64 {
        a.frobenius(&self.apply_a(b))
    }

    /// Gram matrix of the pointwise energy product on `[σ, χ]` components.
    pub fn a_gram(&self) -> DMatrix<f64> {
        let k = n_components(self.dim());
        let mut g = DMatrix::zeros(2 * k, 2 * k);
        g.view_mut((0, 0), (k, k)).copy_from(&self.c_inv.gram());
        g.view_mut((k, k), (k, k)).copy_from(&self.h_inv.gram());
        g
    }

    /// Projects `trial` onto `{φ ≤ 0}` in the energy metric.
    pub fn return_map(&self, trial: &GeneralizedStress) -> ReturnMap {
        let s_tr = dd(trial);
        let n_tr = s_tr.norm();
        if n_tr <= self.sigma0 {
            return ReturnMap { stress: *trial, gamma: 0.0 };
        }
        match self.isotropic {
            Some(p) => {
                // deviators are eigenvectors of C and H: the return is radial
                let gamma = (n_tr / self.sigma0 - 1.0) / (2.0 * p.mu + p.k1);
                let s = s_tr.scale(self.sigma0 / n_tr);
                let stress = GeneralizedStress::new(
                    trial.sigma.axpy(-gamma * 2.0 * p.mu, &s),
                    trial.chi.axpy(-gamma * p.k1, &s),
                );
                ReturnMap { stress, gamma }
            }
            None => self.general_return(trial, &s_tr),
        }
    }

    fn deviatoric_system(&self, gamma: f64) -> DMatrix<f64> {
        let k = n_components(self.dim());
        let pm = dev_operator(self.dim()).matrix() * (self.stiffness.matrix() + self.hardening.matrix());
        DMatrix::identity(k, k) + pm * gamma
    }

    fn deviator_at(&self, gamma: f64, s_tr: &DVector<f64>) -> DVector<f64> {
        self.deviatoric_system(gamma).lu().solve(s_tr).expect("I + γ P(C+H) is invertible for γ ≥ 0")
    }

    fn weighted_norm(&self, v: &DVector<f64>) -> f64 {
        let dim = self.dim();
        v.iter().enumerate().map(|(c, x)| component_weight(dim, c) * x * x).sum::<f64>().sqrt()
    }

    // Scalar bisection on γ: |s(γ)| is strictly decreasing.
    fn general_return(&self, trial: &GeneralizedStress, s_tr: &SymTensor) -> ReturnMap {
        let dim = self.dim();
        let s_tr_v = DVector::from_column_slice(s_tr.components());
        let excess = |g: f64| self.weighted_norm(&self.deviator_at(g, &s_tr_v)) - self.sigma0;
        let mut lo = 0.0;
        let mut hi = 1.0 / self.stiffness.frobenius_eigenvalues().last().copied().unwrap_or(1.0);
        while excess(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let gamma = hi;
        let s_v = self.deviator_at(gamma, &s_tr_v);
        let s = SymTensor::from_components(dim, s_v.as_slice()).expect("dimension");
        let stress = GeneralizedStress::new(
            trial.sigma.axpy(-gamma, &self.stiffness.apply(&s)),
            trial.chi.axpy(-gamma, &self.hardening.apply(&s)),
        );
        ReturnMap { stress, gamma }
    }

    /// Derivative of the updated stress `σ` with respect to the strain
    /// increment, for the strain-driven update `trial = (σ_prev + CΔε, χ_prev)`.
    /// Returned as a component matrix.
    pub fn consistent_tangent(&self, trial: &GeneralizedStress, result: &ReturnMap) -> DMatrix<f64> {
        let dim = self.dim();
        let k = n_components(dim);
        let c = self.stiffness.matrix();
        if result.gamma == 0.0 {
            return c;
        }
        let s_tr = dd(trial);
        let w = DVector::from_iterator(k, (0..k).map(|i| component_weight(dim, i)));
        match self.isotropic {
            Some(p) => {
                let n_tr = s_tr.norm();
                let theta = self.sigma0 / n_tr;
                let n = DVector::from_column_slice(s_tr.scale(1.0 / n_tr).components());
                let wn = n.component_mul(&w);
                let pdev = dev_operator(dim).matrix();
                let c1 = 4.0 * p.mu * p.mu / (2.0 * p.mu + p.k1);
                c - (pdev * (1.0 - theta) + &n * wn.transpose() * theta) * c1
            }
            None => {
                let gamma = result.gamma;
                let s = dd(&result.stress);
                let s_v = DVector::from_column_slice(s.components());
                let pdev = dev_operator(dim).matrix();
                let m = self.stiffness.matrix() + self.hardening.matrix();
                let lu = self.deviatoric_system(gamma).lu();
                let v = lu.solve(&(&pdev * &c)).expect("invertible");
                let u = lu.solve(&(&pdev * &m * &s_v)).expect("invertible");
                let a = s_v.component_mul(&w);
                let denom = a.dot(&u);
                let r = (a.transpose() * &v) / denom;
                let ds = &v - &u * &r;
                let cs = &c * &s_v;
                &c - &cs * &r - (&c * ds) * gamma
            }
        }
    }

    /// Smallest and largest eigenvalue of the pointwise energy form relative
    /// to the Frobenius form.
    pub fn a_spectrum(&self) -> (f64, f64) {
        let mut ev = self.c_inv.frobenius_eigenvalues();
        ev.extend(self.h_inv.frobenius_eigenvalues());
        let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::testing::{random_stress, random_tensor};
    use crate::tensor::yield_phi;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn law3() -> MaterialLaw {
        MaterialLaw::isotropic(3, 1.3, 0.7, 0.4, 0.8).unwrap()
    }

    #[test]
    fn compliance_inverts_dense_stiffness() {
        // oracle: assemble C as a dense component matrix and invert it
        let (mu, lam) = (1.3, 0.7);
        let law = MaterialLaw::isotropic(3, mu, lam, 0.4, 0.8).unwrap();
        let c = SymOperator::from_fn(3, |e| e.scale(2.0 * mu).axpy(lam * e.trace(), &SymTensor::identity(3)));
        let c_dense_inv = c.matrix().try_inverse().unwrap();
        assert!((c_dense_inv - law.c_inv().matrix()).amax() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let e = random_tensor(&mut rng, 3);
            let back = law.c_inv().apply(&c.apply(&e));
            assert!((back - e).norm() < 1e-13);
        }
    }

    #[test]
    fn lam_zero_and_unit_hardening() {
        let law = MaterialLaw::isotropic(2, 2.0, 0.0, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_tensor(&mut rng, 2);
        assert!((law.c_inv().apply(&s) - s.scale(0.25)).norm() < 1e-15);
        assert!((law.h_inv().apply(&s) - s).norm() < 1e-15);
    }

    #[test]
    fn coercivity_violations_rejected() {
        assert!(MaterialLaw::isotropic(3, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(MaterialLaw::isotropic(3, 1.0, -0.7, 1.0, 1.0).is_err());
        assert!(MaterialLaw::isotropic(2, 1.0, -0.99, 1.0, 1.0).is_ok());
        assert!(MaterialLaw::isotropic(3, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(MaterialLaw::isotropic(3, 1.0, 1.0, 1.0, 0.0).is_err());
        let bad = SymOperator::scaled_identity(3, -1.0);
        assert!(MaterialLaw::new(bad, SymOperator::identity(3), 1.0).is_err());
    }

    #[test]
    fn return_map_lands_on_surface() {
        let law = law3();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let trial = random_stress(&mut rng, 3).scale(3.0);
            let r = law.return_map(&trial);
            let phi = yield_phi(&r.stress, law.sigma0()).unwrap();
            if r.gamma > 0.0 {
                assert!(phi.abs() < 1e-12, "phi = {phi}");
            } else {
                assert!(phi <= 0.0);
                assert_eq!(r.stress, trial);
            }
        }
    }

    #[test]
    fn general_path_matches_closed_form() {
        let law = law3();
        let general = law.without_closed_form();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let trial = random_stress(&mut rng, 3).scale(3.0);
            let a = law.return_map(&trial);
            let b = general.return_map(&trial);
            assert!((a.gamma - b.gamma).abs() < 1e-12 * (1.0 + a.gamma));
            assert!((a.stress - b.stress).norm() < 1e-12);
            let ta = law.consistent_tangent(&trial, &a);
            let tb = general.consistent_tangent(&trial, &b);
            assert!((ta - tb).amax() < 1e-10);
        }
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let law = law3();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let prev = random_stress(&mut rng, 3).scale(0.2);
        let de = random_tensor(&mut rng, 3);
        let update = |e: &SymTensor| {
            let trial = GeneralizedStress::new(prev.sigma + law.stiffness().apply(e), prev.chi);
            law.return_map(&trial)
        };
        let trial = GeneralizedStress::new(prev.sigma + law.stiffness().apply(&de), prev.chi);
        let r = update(&de);
        assert!(r.gamma > 0.0);
        let tan = law.consistent_tangent(&trial, &r);
        let h = 1e-6;
        for col in 0..6 {
            let b = SymTensor::basis(3, col);
            let fp = update(&de.axpy(h, &b)).stress.sigma;
            let fm = update(&de.axpy(-h, &b)).stress.sigma;
            let fd = (fp - fm).scale(0.5 / h);
            for row in 0..6 {
                assert!((fd.components()[row] - tan[(row, col)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn return_map_is_energy_projection() {
        // variational characterization against random feasible points
        let law = law3();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let trial = random_stress(&mut rng, 3).scale(4.0);
            let p = law.return_map(&trial).stress;
            for _ in 0..20 {
                let z = law.return_map(&random_stress(&mut rng, 3).scale(4.0)).stress;
                let v = law.inner_a(&(trial - p), &(z - p));
                assert!(v <= 1e-10, "{v}");
            }
        }
    }
}
