//! Symmetric tensor algebra in dimension 2 or 3.
//!
//! A [`SymTensor`] stores the `d(d+1)/2` independent entries of a symmetric
//! `d × d` matrix: the diagonal first, then the strict upper triangle in
//! row-major order. Off-diagonal entries are stored once and counted twice in
//! the Frobenius product, so `σ : τ = Σ_ij σ_ij τ_ij` is exact.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of independent components (d = 3).
pub const MAX_COMPONENTS: usize = 6;

/// Number of independent components of a symmetric `dim × dim` tensor.
pub const fn n_components(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// `(row, col)` of every stored component, in layout order.
pub fn component_index(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        2 => &[(0, 0), (1, 1), (0, 1)],
        3 => &[(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)],
        _ => panic!("unsupported tensor dimension {dim}"),
    }
}

/// Duplication weight of component `c`: 1 on the diagonal, 2 off it.
#[inline]
pub fn component_weight(dim: usize, c: usize) -> f64 {
    if c < dim {
        1.0
    } else {
        2.0
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("tensor dimension must be 2 or 3, got {dim}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymTensor {
    dim: usize,
    c: [f64; MAX_COMPONENTS],
}

impl SymTensor {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "unsupported tensor dimension {dim}");
        Self { dim, c: [0.0; MAX_COMPONENTS] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.c[i] = 1.0;
        }
        t
    }

    pub fn from_components(dim: usize, comps: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let k = n_components(dim);
        if comps.len() != k {
            return Err(Error::DimensionMismatch { what: "tensor components", expected: k, found: comps.len() });
        }
        let mut t = Self::zeros(dim);
        t.c[..k].copy_from_slice(comps);
        Ok(t)
    }

    /// Builds a tensor from a full matrix, symmetrizing it.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let dim = m.nrows();
        check_dim(dim)?;
        if m.ncols() != dim {
            return Err(Error::DimensionMismatch { what: "square matrix", expected: dim, found: m.ncols() });
        }
        let mut t = Self::zeros(dim);
        for (c, &(i, j)) in component_index(dim).iter().enumerate() {
            t.c[c] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
        Ok(t)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        check_dim(dim)?;
        let mut t = Self::zeros(dim);
        t.c[..dim].copy_from_slice(diag);
        Ok(t)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (c, &(i, j)) in component_index(self.dim).iter().enumerate() {
            m[(i, j)] = self.c[c];
            m[(j, i)] = self.c[c];
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n_components(&self) -> usize {
        n_components(self.dim)
    }

    #[inline]
    pub fn components(&self) -> &[f64] {
        &self.c[..n_components(self.dim)]
    }

    #[inline]
    pub fn components_mut(&mut self) -> &mut [f64] {
        let k = n_components(self.dim);
        &mut self.c[..k]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let c = component_index(self.dim).iter().position(|&ij| ij == (i, j)).expect("index out of range");
        self.c[c]
    }

    pub fn trace(&self) -> f64 {
        self.c[..self.dim].iter().sum()
    }

    /// Deviatoric part `t − tr(t)/d · I`.
    pub fn dev(&self) -> Self {
        let mut out = *self;
        let m = self.trace() / self.dim as f64;
        for i in 0..self.dim {
            out.c[i] -= m;
        }
        out
    }

    /// Frobenius product `Σ_ij a_ij b_ij`.
    pub fn frobenius(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let k = n_components(self.dim);
        let mut s = 0.0;
        for c in 0..k {
            s += component_weight(self.dim, c) * self.c[c] * other.c[c];
        }
        s
    }

    pub fn norm_squared(&self) -> f64 {
        self.frobenius(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = *self;
        for v in out.components_mut() {
            *v *= a;
        }
        out
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let mut out = *self;
        let k = n_components(self.dim);
        for c in 0..k {
            out.c[c] += a * other.c[c];
        }
        out
    }

    /// Unit tensor along component `c` of the layout (entry 1 at both mirrored positions).
    pub fn basis(dim: usize, c: usize) -> Self {
        let mut t = Self::zeros(dim);
        t.c[c] = 1.0;
        t
    }
}

impl Add for SymTensor {
    type Output = SymTensor;
    fn add(self, rhs: SymTensor) -> SymTensor {
        self.axpy(1.0, &rhs)
    }
}

impl Sub for SymTensor {
    type Output = SymTensor;
    fn sub(self, rhs: SymTensor) -> SymTensor {
        self.axpy(-1.0, &rhs)
    }
}

impl AddAssign for SymTensor {
    fn add_assign(&mut self, rhs: SymTensor) {
        *self = self.axpy(1.0, &rhs);
    }
}

impl SubAssign for SymTensor {
    fn sub_assign(&mut self, rhs: SymTensor) {
        *self = self.axpy(-1.0, &rhs);
    }
}

impl Neg for SymTensor {
    type Output = SymTensor;
    fn neg(self) -> SymTensor {
        self.scale(-1.0)
    }
}

impl Mul<f64> for SymTensor {
    type Output = SymTensor;
    fn mul(self, a: f64) -> SymTensor {
        self.scale(a)
    }
}

/// Stress and back stress at one material point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedStress {
    pub sigma: SymTensor,
    pub chi: SymTensor,
}

impl GeneralizedStress {
    pub fn new(sigma: SymTensor, chi: SymTensor) -> Self {
        assert_eq!(sigma.dim(), chi.dim(), "stress blocks must share dimension");
        Self { sigma, chi }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(SymTensor::zeros(dim), SymTensor::zeros(dim))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    /// Frobenius pairing on the product space.
    pub fn frobenius(&self, other: &Self) -> f64 {
        self.sigma.frobenius(&other.sigma) + self.chi.frobenius(&other.chi)
    }

    pub fn norm(&self) -> f64 {
        self.frobenius(self).sqrt()
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        Self { sigma: self.sigma.axpy(a, &other.sigma), chi: self.chi.axpy(a, &other.chi) }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { sigma: self.sigma.scale(a), chi: self.chi.scale(a) }
    }

    /// Shift `(σ + t, χ − t)`, which leaves the yield value unchanged.
    pub fn shifted(&self, t: &SymTensor) -> Self {
        Self { sigma: self.sigma + *t, chi: self.chi - *t }
    }

    /// `[σ components, χ components]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.sigma.components().to_vec();
        v.extend_from_slice(self.chi.components());
        v
    }

    pub fn from_slice(dim: usize, v: &[f64]) -> Result<Self> {
        let k = n_components(dim);
        if v.len() != 2 * k {
            return Err(Error::DimensionMismatch {
                what: "generalized stress components",
                expected: 2 * k,
                found: v.len(),
            });
        }
        Ok(Self::new(SymTensor::from_components(dim, &v[..k])?, SymTensor::from_components(dim, &v[k..])?))
    }
}

impl Add for GeneralizedStress {
    type Output = GeneralizedStress;
    fn add(self, rhs: Self) -> Self {
        self.axpy(1.0, &rhs)
    }
}

impl Sub for GeneralizedStress {
    type Output = GeneralizedStress;
    fn sub(self, rhs: Self) -> Self {
        self.axpy(-1.0, &rhs)
    }
}

/// Deviatoric part of a symmetric tensor.
pub fn dev(t: &SymTensor) -> SymTensor {
    t.dev()
}

/// `dev(σ) + dev(χ)`.
pub fn dd(s: &GeneralizedStress) -> SymTensor {
    s.sigma.dev() + s.chi.dev()
}

/// Adjoint of [`dd`]: `t ↦ (dev t, dev t)`.
pub fn dd_adjoint(t: &SymTensor) -> GeneralizedStress {
    let d = t.dev();
    GeneralizedStress::new(d, d)
}

/// Von Mises yield function `(|dd(S)|² − σ₀²)/2`.
pub fn yield_phi(s: &GeneralizedStress, sigma0: f64) -> Result<f64> {
    if !(sigma0 > 0.0) {
        return Err(Error::InvalidParameter(format!("yield stress must be positive, got {sigma0}")));
    }
    Ok(yield_value(s, sigma0))
}

/// [`yield_phi`] without the parameter check, for inner loops.
#[inline]
pub(crate) fn yield_value(s: &GeneralizedStress, sigma0: f64) -> f64 {
    0.5 * (dd(s).norm_squared() - sigma0 * sigma0)
}

/// A linear map on symmetric tensors, stored as a matrix acting on the
/// component layout of [`SymTensor`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymOperator {
    dim: usize,
    /// Row-major `k × k` matrix.
    m: Vec<f64>,
}

impl SymOperator {
    pub fn from_fn(dim: usize, f: impl Fn(&SymTensor) -> SymTensor) -> Self {
        let k = n_components(dim);
        let mut m = vec![0.0; k * k];
        for col in 0..k {
            let img = f(&SymTensor::basis(dim, col));
            for row in 0..k {
                m[row * k + col] = img.components()[row];
            }
        }
        Self { dim, m }
    }

    pub fn from_matrix(dim: usize, mat: &DMatrix<f64>) -> Result<Self> {
        check_dim(dim)?;
        let k = n_components(dim);
        if mat.nrows() != k || mat.ncols() != k {
            return Err(Error::DimensionMismatch {
                what: "operator matrix",
                expected: k,
                found: mat.nrows().max(mat.ncols()),
            });
        }
        let mut m = vec![0.0; k * k];
        for r in 0..k {
            for c in 0..k {
                m[r * k + c] = mat[(r, c)];
            }
        }
        Ok(Self { dim, m })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, a: f64) -> Self {
        Self::from_fn(dim, |t| t.scale(a))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let k = n_components(self.dim);
        DMatrix::from_row_slice(k, k, &self.m)
    }

    pub fn apply(&self, t: &SymTensor) -> SymTensor {
        debug_assert_eq!(t.dim(), self.dim);
        let k = n_components(self.dim);
        let mut out = SymTensor::zeros(self.dim);
        let tc = t.components();
        let oc = out.components_mut();
        for r in 0..k {
            let row = &self.m[r * k..(r + 1) * k];
            oc[r] = row.iter().zip(tc).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Gram matrix of the bilinear form `(a, b) ↦ a : L b` in component
    /// coordinates, i.e. `W · M` with `W` the duplication weights.
    pub fn gram(&self) -> DMatrix<f64> {
        let k = n_components(self.dim);
        let mut g = self.matrix();
        for r in 0..k {
            let w = component_weight(self.dim, r);
            for c in 0..k {
                g[(r, c)] *= w;
            }
        }
        g
    }

    /// Eigenvalues of the map as a self-adjoint operator on `(S, :)`.
    pub fn frobenius_eigenvalues(&self) -> Vec<f64> {
        let k = n_components(self.dim);
        // W^{1/2} M W^{-1/2} is similar to M and symmetric when M is Frobenius-symmetric.
        let mut s = self.matrix();
        for r in 0..k {
            for c in 0..k {
                let wr = component_weight(self.dim, r).sqrt();
                let wc = component_weight(self.dim, c).sqrt();
                s[(r, c)] *= wr / wc;
            }
        }
        let sym = (&s + s.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Largest violation of `a : L b = b : L a`, relative to the map size.
    pub fn asymmetry(&self) -> f64 {
        let g = self.gram();
        let scale = g.amax().max(f64::MIN_POSITIVE);
        (&g - g.transpose()).amax() / scale
    }

    pub fn is_spd(&self) -> bool {
        self.asymmetry() <= 1e-12 && self.frobenius_eigenvalues()[0] > 0.0
    }

    pub fn inverse(&self) -> Result<SymOperator> {
        let inv = self.matrix().try_inverse().ok_or_else(|| Error::InvalidParameter("operator is singular".into()))?;
        SymOperator::from_matrix(self.dim, &inv)
    }

    pub fn compose(&self, other: &SymOperator) -> SymOperator {
        let prod = self.matrix() * other.matrix();
        SymOperator::from_matrix(self.dim, &prod).expect("same dimension")
    }

    pub fn add(&self, other: &SymOperator) -> SymOperator {
        let sum = self.matrix() + other.matrix();
        SymOperator::from_matrix(self.dim, &sum).expect("same dimension")
    }
}

/// Component matrix of the deviator map.
pub fn dev_operator(dim: usize) -> SymOperator {
    SymOperator::from_fn(dim, |t| t.dev())
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dev_of_identity_vanishes() {
        for dim in [2, 3] {
            assert!(dev(&SymTensor::identity(dim)).norm() < 1e-15);
        }
    }

    #[test]
    fn dev_of_diag_300() {
        let t = SymTensor::from_diagonal(&[3.0, 0.0, 0.0]).unwrap();
        let d = dev(&t);
        assert_eq!(d.components(), &[2.0, -1.0, -1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dev_fixes_trace_free_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in [2, 3] {
            let t = random_tensor(&mut rng, dim).dev();
            assert!((dev(&t) - t).norm() < 1e-15);
            assert!(dev(&t).trace().abs() < 1e-15);
        }
    }

    #[test]
    fn dd_cancels_on_shift_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_tensor(&mut rng, 3);
        assert!(dd(&GeneralizedStress::new(s, -s)).norm() < 1e-15);
    }

    #[test]
    fn dd_star_dd_squares_to_twice_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [2, 3] {
            for _ in 0..20 {
                let s = random_stress(&mut rng, dim);
                let once = dd_adjoint(&dd(&s));
                let twice = dd_adjoint(&dd(&once));
                assert!((twice - once.scale(2.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn yield_phi_examples() {
        let z = GeneralizedStress::zeros(3);
        assert_eq!(yield_phi(&z, 2.0).unwrap(), -2.0);

        // |dd(S)| = 3: put a deviatoric tensor of norm 3 in σ.
        let d = SymTensor::from_diagonal(&[1.0, -1.0, 0.0]).unwrap();
        let d = d.scale(3.0 / d.norm());
        let s = GeneralizedStress::new(d, SymTensor::zeros(3));
        assert!((yield_phi(&s, 2.0).unwrap() - 2.5).abs() < 1e-14);

        let on = GeneralizedStress::new(d.scale(2.0 / 3.0), SymTensor::zeros(3));
        assert!(yield_phi(&on, 2.0).unwrap().abs() < 1e-14);

        assert!(yield_phi(&z, 0.0).is_err());
        assert!(yield_phi(&z, -1.0).is_err());
    }

    #[test]
    fn matrix_roundtrip_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_tensor(&mut rng, 3);
        let m = t.to_matrix();
        assert_eq!(m, m.transpose());
        assert_eq!(SymTensor::from_matrix(&m).unwrap(), t);
    }

    #[test]
    fn bad_dimensions_rejected() {
        assert!(SymTensor::from_components(4, &[0.0; 10]).is_err());
        assert!(SymTensor::from_components(3, &[0.0; 5]).is_err());
        assert!(GeneralizedStress::from_slice(2, &[0.0; 5]).is_err());
    }

    #[test]
    fn operator_gram_and_spd() {
        let id = SymOperator::identity(3);
        assert!(id.is_spd());
        let ev = id.frobenius_eigenvalues();
        assert!(ev.iter().all(|&e| (e - 1.0).abs() < 1e-14));
        let neg = SymOperator::scaled_identity(2, -1.0);
        assert!(!neg.is_spd());
        let d = dev_operator(3);
        assert!(d.asymmetry() < 1e-15);
        // dev is a projection: eigenvalues 0 (once) and 1.
        let ev = d.frobenius_eigenvalues();
        assert!(ev[0].abs() < 1e-14 && (ev[5] - 1.0).abs() < 1e-14);
    }

    fn tensor_strategy(dim: usize) -> impl Strategy<Value = SymTensor> {
        proptest::collection::vec(-10.0f64..10.0, n_components(dim))
            .prop_map(move |v| SymTensor::from_components(dim, &v).unwrap())
    }

    proptest! {
        #[test]
        fn frobenius_matches_full_matrix(a in tensor_strategy(3), b in tensor_strategy(3)) {
            let full = a.to_matrix().component_mul(&b.to_matrix()).sum();
            prop_assert!((a.frobenius(&b) - full).abs() <= 1e-12 * (1.0 + full.abs()));
        }

        #[test]
        fn dev_is_idempotent(a in tensor_strategy(3)) {
            prop_assert!((a.dev().dev() - a.dev()).norm() <= 1e-12 * (1.0 + a.norm()));
        }

        #[test]
        fn dd_adjoint_pairing(
            s in tensor_strategy(2), c in tensor_strategy(2), t in tensor_strategy(2)
        ) {
            let g = GeneralizedStress::new(s, c);
            let lhs = dd(&g).frobenius(&t);
            let rhs = g.frobenius(&dd_adjoint(&t));
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn yield_value_shift_invariant(
            s in tensor_strategy(3), c in tensor_strategy(3), t in tensor_strategy(3)
        ) {
            let g = GeneralizedStress::new(s, c);
            let a = yield_phi(&g, 1.5).unwrap();
            let b = yield_phi(&g.shifted(&t), 1.5).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
