//! The spatially discretized body: material points, strain and equilibrium
//! operators, the energy inner product and the boundary-load lifting.

mod catalog;
mod law;

pub use catalog::{build_model, builtin_models, describe_model, ModelParams, BUILTIN_MODELS};
pub use law::{IsotropicParams, MaterialLaw, ReturnMap};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::tensor::{component_weight, n_components, GeneralizedStress, SymTensor};

/// One generalized stress per material point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedStressField(pub Vec<GeneralizedStress>);

impl GeneralizedStressField {
    pub fn zeros(dim: usize, n_points: usize) -> Self {
        Self(vec![GeneralizedStress::zeros(dim); n_points])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn points(&self) -> &[GeneralizedStress] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GeneralizedStress> {
        self.0.iter()
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(x, y)| x.axpy(a, y)).collect())
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(self.0.iter().map(|x| x.scale(a)).collect())
    }

    /// Flattened `[σ_p, χ_p]` components, point after point.
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.0.iter().map(|s| 2 * s.sigma.n_components()).sum(),
            self.0.iter().flat_map(|s| s.to_vec()),
        )
    }

    pub fn from_vector(dim: usize, v: &DVector<f64>) -> Result<Self> {
        let block = 2 * n_components(dim);
        if !v.len().is_multiple_of(block) {
            return Err(Error::DimensionMismatch {
                what: "flattened stress field",
                expected: block * (v.len() / block + 1),
                found: v.len(),
            });
        }
        v.as_slice().chunks(block).map(|c| GeneralizedStress::from_slice(dim, c)).collect::<Result<Vec<_>>>().map(Self)
    }
}

/// Serializable snapshot of a model; matrices are dense row-major arrays.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelRecord {
    pub name: String,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub n_dofs: usize,
    pub n_controls: usize,
    /// `(n_points·k) × n_dofs`, row-major.
    pub strain: Vec<f64>,
    /// `n_dofs × n_controls`, row-major.
    pub control: Vec<f64>,
    pub control_weights: Vec<f64>,
    pub displacement_mass: Vec<f64>,
    pub load_direction: Vec<f64>,
    pub law: MaterialLaw,
}

#[derive(Clone, Debug)]
pub struct DiscreteModel {
    name: String,
    dim: usize,
    weights: Vec<f64>,
    strain: DMatrix<f64>,
    control: DMatrix<f64>,
    control_weights: Vec<f64>,
    displacement_mass: Vec<f64>,
    load_direction: Vec<f64>,
    law: MaterialLaw,
    /// `εᵀ D ε` with `D` the weighted Frobenius form: the lift factorization.
    strain_gram: Cholesky<f64, Dyn>,
    /// Elastic stiffness `Σ_p w_p ε_pᵀ W C ε_p`.
    elastic_stiffness: DMatrix<f64>,
    elastic_chol: Cholesky<f64, Dyn>,
}

impl DiscreteModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        weights: Vec<f64>,
        strain: DMatrix<f64>,
        control: DMatrix<f64>,
        control_weights: Vec<f64>,
        displacement_mass: Vec<f64>,
        load_direction: Vec<f64>,
        law: MaterialLaw,
    ) -> Result<Self> {
        let k = n_components(dim);
        let p = weights.len();
        if law.dim() != dim {
            return Err(Error::DimensionMismatch { what: "law dimension", expected: dim, found: law.dim() });
        }
        if p == 0 || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter("quadrature weights must be positive".into()));
        }
        if strain.nrows() != p * k {
            return Err(Error::DimensionMismatch {
                what: "strain operator rows",
                expected: p * k,
                found: strain.nrows(),
            });
        }
        let n = strain.ncols();
        if control.nrows() != n {
            return Err(Error::DimensionMismatch {
                what: "control operator rows",
                expected: n,
                found: control.nrows(),
            });
        }
        let m = control.ncols();
        for (what, len, expected) in [
            ("control weights", control_weights.len(), m),
            ("load direction", load_direction.len(), m),
            ("displacement mass", displacement_mass.len(), n),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch { what, expected, found: len });
            }
        }
        let dw = Self::frobenius_weights(dim, &weights);
        let mut ds = strain.clone();
        for (r, w) in dw.iter().enumerate() {
            ds.row_mut(r).scale_mut(*w);
        }
        let gram = strain.transpose() * &ds;
        // trivial kernel of the strain operator (discrete inf-sup)
        let sv = Self::scaled_strain(dim, &weights, &strain).singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if n == 0 || !(smin > 1e-12 * smax.max(1e-300)) {
            return Err(Error::InvalidParameter("strain operator has a nontrivial kernel (inf-sup fails)".into()));
        }
        let strain_gram = Cholesky::new(gram)
            .ok_or_else(|| Error::InvalidParameter("strain Gram matrix is not positive definite".into()))?;

        let c = law.stiffness().gram();
        let mut elastic_stiffness = DMatrix::zeros(n, n);
        for pt in 0..p {
            let sp = strain.rows(pt * k, k);
            elastic_stiffness += sp.transpose() * &c * sp * weights[pt];
        }
        elastic_stiffness = (&elastic_stiffness + elastic_stiffness.transpose()) * 0.5;
        let elastic_chol = Cholesky::new(elastic_stiffness.clone())
            .ok_or_else(|| Error::InvalidParameter("elastic stiffness is singular".into()))?;

        Ok(Self {
            name: name.into(),
            dim,
            weights,
            strain,
            control,
            control_weights,
            displacement_mass,
            load_direction,
            law,
            strain_gram,
            elastic_stiffness,
            elastic_chol,
        })
    }

    fn frobenius_weights(dim: usize, weights: &[f64]) -> Vec<f64> {
        let k = n_components(dim);
        weights.iter().flat_map(|&w| (0..k).map(move |c| w * component_weight(dim, c))).collect()
    }

    fn scaled_strain(dim: usize, weights: &[f64], strain: &DMatrix<f64>) -> DMatrix<f64> {
        let dw = Self::frobenius_weights(dim, weights);
        let mut out = strain.clone();
        for (r, w) in dw.iter().enumerate() {
            out.row_mut(r).scale_mut(w.sqrt());
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.strain.ncols()
    }

    pub fn n_controls(&self) -> usize {
        self.control.ncols()
    }

    pub fn n_components(&self) -> usize {
        n_components(self.dim)
    }

    /// Length of a flattened stress field.
    pub fn field_len(&self) -> usize {
        2 * self.n_points() * self.n_components()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn law(&self) -> &MaterialLaw {
        &self.law
    }

    pub fn strain_matrix(&self) -> &DMatrix<f64> {
        &self.strain
    }

    pub fn control_matrix(&self) -> &DMatrix<f64> {
        &self.control
    }

    /// Lumped boundary weights defining the control-space inner product.
    pub fn control_weights(&self) -> &[f64] {
        &self.control_weights
    }

    /// Lumped mass for the `L²(Ω)` norm of displacement coordinates.
    pub fn displacement_mass(&self) -> &[f64] {
        &self.displacement_mass
    }

    /// Unit load pattern used by the named waveforms.
    pub fn load_direction(&self) -> &[f64] {
        &self.load_direction
    }

    pub fn elastic_stiffness(&self) -> &DMatrix<f64> {
        &self.elastic_stiffness
    }

    pub(crate) fn solve_elastic(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.elastic_chol.solve(rhs)
    }

    pub fn zero_field(&self) -> GeneralizedStressField {
        GeneralizedStressField::zeros(self.dim, self.n_points())
    }

    fn check_field(&self, f: &GeneralizedStressField) -> Result<()> {
        if f.len() != self.n_points() {
            return Err(Error::DimensionMismatch {
                what: "stress field points",
                expected: self.n_points(),
                found: f.len(),
            });
        }
        if f.iter().any(|s| s.dim() != self.dim) {
            return Err(Error::DimensionMismatch {
                what: "stress field tensor dimension",
                expected: self.dim,
                found: f.0[0].dim(),
            });
        }
        Ok(())
    }

    fn check_dofs(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n_dofs() {
            return Err(Error::DimensionMismatch {
                what: "displacement coordinates",
                expected: self.n_dofs(),
                found: u.len(),
            });
        }
        Ok(())
    }

    /// `ε_p(u)` for every point.
    pub fn strain_of(&self, u: &[f64]) -> Result<Vec<SymTensor>> {
        self.check_dofs(u)?;
        let e = &self.strain * DVector::from_column_slice(u);
        let k = self.n_components();
        Ok(e.as_slice().chunks(k).map(|c| SymTensor::from_components(self.dim, c).expect("layout")).collect())
    }

    pub fn apply_a(&self, f: &GeneralizedStressField) -> Result<GeneralizedStressField> {
        self.check_field(f)?;
        Ok(GeneralizedStressField(f.iter().map(|s| self.law.apply_a(s)).collect()))
    }

    /// `Σ_p w_p (τ_p : C⁻¹σ_p + μ_p : H⁻¹χ_p)`.
    pub fn inner_a(&self, a: &GeneralizedStressField, b: &GeneralizedStressField) -> Result<f64> {
        self.check_field(a)?;
        self.check_field(b)?;
        Ok(a.iter().zip(b.iter()).zip(&self.weights).map(|((x, y), w)| w * self.law.inner_a(x, y)).sum())
    }

    pub fn norm_a(&self, f: &GeneralizedStressField) -> Result<f64> {
        Ok(self.inner_a(f, f)?.max(0.0).sqrt())
    }

    /// Plain weighted Frobenius product on `S²`.
    pub fn inner_s2(&self, a: &GeneralizedStressField, b: &GeneralizedStressField) -> f64 {
        a.iter().zip(b.iter()).zip(&self.weights).map(|((x, y), w)| w * x.frobenius(y)).sum()
    }

    /// Energy metric on flattened fields.
    pub fn a_metric(&self) -> Metric {
        let g = self.law.a_gram();
        Metric::BlockDiagonal(self.weights.iter().map(|w| &g * *w).collect())
    }

    /// Load functional: `⟨BΣ, v⟩ = −Σ_p w_p σ_p : ε_p(v)`.
    pub fn apply_b(&self, f: &GeneralizedStressField) -> Result<Vec<f64>> {
        self.check_field(f)?;
        let k = self.n_components();
        let mut ws = DVector::zeros(self.n_points() * k);
        for (p, (s, w)) in f.iter().zip(&self.weights).enumerate() {
            for c in 0..k {
                ws[p * k + c] = -w * component_weight(self.dim, c) * s.sigma.components()[c];
            }
        }
        Ok((self.strain.transpose() * ws).as_slice().to_vec())
    }

    /// `B*u = (−ε(u), 0)`.
    pub fn apply_b_star(&self, u: &[f64]) -> Result<GeneralizedStressField> {
        Ok(GeneralizedStressField(
            self.strain_of(u)?.into_iter().map(|e| GeneralizedStress::new(-e, SymTensor::zeros(self.dim))).collect(),
        ))
    }

    /// Assembled `n × field_len` matrix of `B` on flattened fields.
    pub fn b_matrix(&self) -> DMatrix<f64> {
        let k = self.n_components();
        let n = self.n_dofs();
        let mut b = DMatrix::zeros(n, self.field_len());
        for p in 0..self.n_points() {
            for c in 0..k {
                let coef = -self.weights[p] * component_weight(self.dim, c);
                for j in 0..n {
                    b[(j, p * 2 * k + c)] = coef * self.strain[(p * k + c, j)];
                }
            }
        }
        b
    }

    /// `ℓ = E g`.
    pub fn load_of_control(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.n_controls() {
            return Err(Error::DimensionMismatch {
                what: "control coordinates",
                expected: self.n_controls(),
                found: g.len(),
            });
        }
        Ok((&self.control * DVector::from_column_slice(g)).as_slice().to_vec())
    }

    /// Minimum-norm lifting `Σ_ℓ = (σ_ℓ, −σ_ℓ)` with `B(σ_ℓ, 0) = ℓ` and
    /// `(σ_ℓ, 0) ⟂ ker B`.
    pub fn sigma_of_ell(&self, ell: &[f64]) -> Result<GeneralizedStressField> {
        self.check_dofs(ell)?;
        // (σ_ℓ, 0) ⟂ ker B forces σ_ℓ = −ε(y); then B(σ_ℓ, 0) = εᵀDε y = ℓ.
        let y = self.strain_gram.solve(&DVector::from_column_slice(ell));
        let field = GeneralizedStressField(
            self.strain_of(y.as_slice())?.into_iter().map(|e| GeneralizedStress::new(-e, e)).collect(),
        );
        let lifted_sigma = GeneralizedStressField(
            field.iter().map(|s| GeneralizedStress::new(s.sigma, SymTensor::zeros(self.dim))).collect(),
        );
        let back = self.apply_b(&lifted_sigma)?;
        let res = back.iter().zip(ell).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = 1.0 + ell.iter().map(|x| x * x).sum::<f64>().sqrt();
        if res > 1e-10 * scale {
            return Err(Error::InfeasibleLoad(res));
        }
        Ok(field)
    }

    /// Smallest singular value of the weighted strain operator.
    pub fn inf_sup_constant(&self) -> f64 {
        Self::scaled_strain(self.dim, &self.weights, &self.strain).singular_values().min()
    }

    /// Condition number of the energy form relative to the Frobenius form.
    pub fn a_condition_number(&self) -> f64 {
        let (lo, hi) = self.law.a_spectrum();
        hi / lo
    }

    /// `‖ε(u)‖_S`, the norm used for displacements.
    pub fn displacement_norm(&self, u: &[f64]) -> Result<f64> {
        Ok(self.strain_of(u)?.iter().zip(&self.weights).map(|(e, w)| w * e.norm_squared()).sum::<f64>().sqrt())
    }

    /// Gram matrix of [`displacement_norm`](Self::displacement_norm).
    pub fn displacement_gram(&self) -> DMatrix<f64> {
        self.strain_gram.l() * self.strain_gram.l().transpose()
    }

    pub fn to_record(&self) -> ModelRecord {
        let row_major = |m: &DMatrix<f64>| {
            let mut v = Vec::with_capacity(m.len());
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    v.push(m[(r, c)]);
                }
            }
            v
        };
        ModelRecord {
            name: self.name.clone(),
            dim: self.dim,
            weights: self.weights.clone(),
            n_dofs: self.n_dofs(),
            n_controls: self.n_controls(),
            strain: row_major(&self.strain),
            control: row_major(&self.control),
            control_weights: self.control_weights.clone(),
            displacement_mass: self.displacement_mass.clone(),
            load_direction: self.load_direction.clone(),
            law: self.law.clone(),
        }
    }

    pub fn from_record(r: ModelRecord) -> Result<Self> {
        let rows = r.weights.len() * n_components(r.dim);
        if r.strain.len() != rows * r.n_dofs {
            return Err(Error::DimensionMismatch {
                what: "strain matrix entries",
                expected: rows * r.n_dofs,
                found: r.strain.len(),
            });
        }
        if r.control.len() != r.n_dofs * r.n_controls {
            return Err(Error::DimensionMismatch {
                what: "control matrix entries",
                expected: r.n_dofs * r.n_controls,
                found: r.control.len(),
            });
        }
        Self::new(
            r.name,
            r.dim,
            r.weights,
            DMatrix::from_row_slice(rows, r.n_dofs, &r.strain),
            DMatrix::from_row_slice(r.n_dofs, r.n_controls, &r.control),
            r.control_weights,
            r.displacement_mass,
            r.load_direction,
            r.law,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::tensor::testing::random_stress;
    use rand::Rng;

    pub fn random_field<R: Rng>(rng: &mut R, model: &DiscreteModel) -> GeneralizedStressField {
        GeneralizedStressField((0..model.n_points()).map(|_| random_stress(rng, model.dim())).collect())
    }

    pub fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use crate::tensor::{testing::random_tensor, yield_phi};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn models() -> Vec<DiscreteModel> {
        vec![
            build_model("uniaxial", &ModelParams::default()).unwrap(),
            build_model("patch2d", &ModelParams::default()).unwrap(),
        ]
    }

    #[test]
    fn inner_a_symmetric_and_coercive() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for m in models() {
            for _ in 0..10 {
                let a = random_field(&mut rng, &m);
                let b = random_field(&mut rng, &m);
                let ab = m.inner_a(&a, &b).unwrap();
                let ba = m.inner_a(&b, &a).unwrap();
                assert!((ab - ba).abs() < 1e-12 * (1.0 + ab.abs()));
                assert!(m.inner_a(&a, &a).unwrap() > 0.0);
            }
            assert!(m.a_condition_number().is_finite());
        }
    }

    #[test]
    fn identity_law_gives_frobenius_sum() {
        let law =
            MaterialLaw::new(crate::tensor::SymOperator::identity(3), crate::tensor::SymOperator::identity(3), 1.0)
                .unwrap();
        let e = DMatrix::from_column_slice(6, 1, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let m = DiscreteModel::new(
            "id",
            3,
            vec![1.0],
            e,
            DMatrix::from_element(1, 1, -1.0),
            vec![1.0],
            vec![1.0],
            vec![1.0],
            law,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_field(&mut rng, &m);
        let b = random_field(&mut rng, &m);
        let plain = a.0[0].frobenius(&b.0[0]);
        assert!((m.inner_a(&a, &b).unwrap() - plain).abs() < 1e-14);
    }

    #[test]
    fn b_sees_only_sigma_and_pairs_with_b_star() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for m in models() {
            let mut f = random_field(&mut rng, &m);
            for s in f.0.iter_mut() {
                s.sigma = SymTensor::zeros(m.dim());
            }
            assert!(m.apply_b(&f).unwrap().iter().all(|x| *x == 0.0));
            for _ in 0..10 {
                let f = random_field(&mut rng, &m);
                let u = random_vec(&mut rng, m.n_dofs());
                let bf = m.apply_b(&f).unwrap();
                let lhs: f64 = bf.iter().zip(&u).map(|(a, b)| a * b).sum();
                let rhs = m.inner_s2(&f, &m.apply_b_star(&u).unwrap());
                assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
                // matrix form agrees
                let bm = m.b_matrix() * f.to_vector();
                assert!(bm.iter().zip(&bf).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn uniaxial_b_is_scaled_projection() {
        let m = build_model("uniaxial", &ModelParams::default()).unwrap();
        let e = m.strain_of(&[1.0]).unwrap()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let f = random_field(&mut rng, &m);
        let w = m.weights()[0];
        let expected = -w * f.0[0].sigma.frobenius(&e);
        assert!((m.apply_b(&f).unwrap()[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn lift_is_right_inverse_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for m in models() {
            let zero = m.sigma_of_ell(&vec![0.0; m.n_dofs()]).unwrap();
            assert!(zero.iter().all(|s| s.norm() == 0.0));
            for _ in 0..5 {
                let l1 = random_vec(&mut rng, m.n_dofs());
                let l2 = random_vec(&mut rng, m.n_dofs());
                let s1 = m.sigma_of_ell(&l1).unwrap();
                let s2 = m.sigma_of_ell(&l2).unwrap();
                // χ = −σ, so B applied to the full pair only sees σ
                let back = m.apply_b(&s1).unwrap();
                assert!(back.iter().zip(&l1).all(|(a, b)| (a - b).abs() < 1e-10));
                let comb: Vec<f64> = l1.iter().zip(&l2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
                let sc = m.sigma_of_ell(&comb).unwrap();
                let lin = s1.scale(2.0).axpy(-0.5, &s2);
                assert!(sc.axpy(-1.0, &lin).iter().all(|s| s.norm() < 1e-10));
                for s in s1.iter() {
                    assert!((s.sigma + s.chi).norm() == 0.0);
                }
            }
        }
    }

    #[test]
    fn lift_matches_pseudo_inverse_oracle() {
        // SVD pseudo-inverse in the weighted S norm, assembled independently
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for m in models() {
            let k = m.n_components();
            let np = m.n_points();
            let mut bsig = DMatrix::zeros(m.n_dofs(), np * k);
            let mut dsqrt = vec![0.0; np * k];
            for p in 0..np {
                for c in 0..k {
                    let mut f = m.zero_field();
                    let mut comps = vec![0.0; k];
                    comps[c] = 1.0;
                    f.0[p].sigma = SymTensor::from_components(m.dim(), &comps).unwrap();
                    let col = m.apply_b(&f).unwrap();
                    for j in 0..m.n_dofs() {
                        bsig[(j, p * k + c)] = col[j];
                    }
                    dsqrt[p * k + c] = (m.weights()[p] * component_weight(m.dim(), c)).sqrt();
                }
            }
            let mut bt = bsig.clone();
            for (c, d) in dsqrt.iter().enumerate() {
                bt.column_mut(c).scale_mut(1.0 / d);
            }
            let pinv = bt.pseudo_inverse(1e-14).unwrap();
            let ell = DVector::from_vec(random_vec(&mut rng, m.n_dofs()));
            let st = pinv * &ell;
            let lift = m.sigma_of_ell(ell.as_slice()).unwrap();
            for p in 0..np {
                for c in 0..k {
                    let oracle = st[p * k + c] / dsqrt[p * k + c];
                    assert!((lift.0[p].sigma.components()[c] - oracle).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn shift_invariance_on_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for m in models() {
            let f = random_field(&mut rng, &m);
            for s in f.iter() {
                let t = random_tensor(&mut rng, m.dim());
                let a = yield_phi(s, m.law().sigma0()).unwrap();
                let b = yield_phi(&s.shifted(&t), m.law().sigma0()).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn a_metric_matches_inner_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for m in models() {
            let a = random_field(&mut rng, &m);
            let b = random_field(&mut rng, &m);
            let via = m.a_metric().inner(&a.to_vector(), &b.to_vector());
            assert!((via - m.inner_a(&a, &b).unwrap()).abs() < 1e-12);
            let back = GeneralizedStressField::from_vector(m.dim(), &a.to_vector()).unwrap();
            assert_eq!(back, a);
        }
    }

    #[test]
    fn json_roundtrip() {
        for m in models() {
            let back = DiscreteModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back.strain_matrix(), m.strain_matrix());
            assert_eq!(back.control_matrix(), m.control_matrix());
            assert_eq!(back.law(), m.law());
        }
    }

    #[test]
    fn size_mismatch_errors() {
        let m = build_model("uniaxial", &ModelParams::default()).unwrap();
        assert!(m.apply_b_star(&[1.0, 2.0]).is_err());
        assert!(m.apply_a(&GeneralizedStressField::zeros(3, 2)).is_err());
        assert!(m.sigma_of_ell(&[]).is_err());
        assert!(m.load_of_control(&[1.0, 1.0]).is_err());
    }
}
