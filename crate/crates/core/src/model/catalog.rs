use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DiscreteModel, MaterialLaw};
use crate::error::{Error, Result};

pub const BUILTIN_MODELS: [&str; 2] = ["uniaxial", "patch2d"];

/// Material and mesh parameters shared by the builtin models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub mu: f64,
    pub lam: f64,
    pub k1: f64,
    pub sigma0: f64,
    /// Cells per side of the square mesh (patch2d only).
    pub mesh: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { mu: 1.0, lam: 1.0, k1: 0.5, sigma0: 1.0, mesh: 2 }
    }
}

pub fn builtin_models() -> Vec<(&'static str, &'static str)> {
    vec![
        ("uniaxial", "one material point in 3D, strain u·e₁⊗e₁, one load coordinate"),
        (
            "patch2d",
            "unit square, P1 triangles with one-point quadrature, left edge clamped, \
             lumped traction on the right edge",
        ),
    ]
}

pub fn build_model(name: &str, params: &ModelParams) -> Result<DiscreteModel> {
    match name {
        "uniaxial" => uniaxial(params),
        "patch2d" => patch2d(params),
        _ => Err(Error::UnknownName(name.to_string())),
    }
}

/// Human-readable summary of a builtin model.
pub fn describe_model(name: &str, params: &ModelParams) -> Result<String> {
    let m = build_model(name, params)?;
    let summary = builtin_models().into_iter().find(|(n, _)| *n == name).map(|(_, d)| d).unwrap_or_default();
    Ok(format!(
        "{name}: {summary}\n\
         dimension d = {}\n\
         material points = {}\n\
         displacement coordinates n = {}\n\
         control coordinates m = {}\n\
         law: mu = {}, lambda = {}, k1 = {}, sigma0 = {}\n\
         inf-sup constant = {:.6e}\n\
         energy-form condition number = {:.6e}\n",
        m.dim(),
        m.n_points(),
        m.n_dofs(),
        m.n_controls(),
        params.mu,
        params.lam,
        params.k1,
        params.sigma0,
        m.inf_sup_constant(),
        m.a_condition_number(),
    ))
}

fn uniaxial(p: &ModelParams) -> Result<DiscreteModel> {
    let law = MaterialLaw::isotropic(3, p.mu, p.lam, p.k1, p.sigma0)?;
    let strain = DMatrix::from_column_slice(6, 1, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    DiscreteModel::new(
        "uniaxial",
        3,
        vec![1.0],
        strain,
        DMatrix::from_element(1, 1, -1.0),
        vec![1.0],
        vec![1.0],
        vec![1.0],
        law,
    )
}

fn patch2d(p: &ModelParams) -> Result<DiscreteModel> {
    let nc = p.mesh;
    if nc == 0 || 2 * nc * nc > 32 {
        return Err(Error::InvalidParameter(format!("patch2d mesh must be between 1 and 4 cells per side, got {nc}")));
    }
    let law = MaterialLaw::isotropic(2, p.mu, p.lam, p.k1, p.sigma0)?;
    let h = 1.0 / nc as f64;
    let node = |i: usize, j: usize| j * (nc + 1) + i;
    let coord = |n: usize| ((n % (nc + 1)) as f64 * h, (n / (nc + 1)) as f64 * h);
    // nodes with i = 0 are clamped; the rest carry two coordinates each
    let dof = |n: usize, c: usize| -> Option<usize> {
        let (i, j) = (n % (nc + 1), n / (nc + 1));
        (i > 0).then(|| 2 * (j * nc + i - 1) + c)
    };
    let n_dofs = 2 * nc * (nc + 1);

    let mut tris = Vec::with_capacity(2 * nc * nc);
    for j in 0..nc {
        for i in 0..nc {
            let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }

    let mut strain = DMatrix::zeros(3 * tris.len(), n_dofs);
    let mut weights = Vec::with_capacity(tris.len());
    let mut mass = vec![0.0; n_dofs];
    for (t, tri) in tris.iter().enumerate() {
        let [(x0, y0), (x1, y1), (x2, y2)] = tri.map(coord);
        let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
        let area = 0.5 * det;
        // gradients of the barycentric hat functions
        let grads = [
            ((y1 - y2) / det, (x2 - x1) / det),
            ((y2 - y0) / det, (x0 - x2) / det),
            ((y0 - y1) / det, (x1 - x0) / det),
        ];
        for (a, &n) in tri.iter().enumerate() {
            let (gx, gy) = grads[a];
            if let Some(d) = dof(n, 0) {
                strain[(3 * t, d)] += gx;
                strain[(3 * t + 2, d)] += 0.5 * gy;
                mass[d] += area / 3.0;
            }
            if let Some(d) = dof(n, 1) {
                strain[(3 * t + 1, d)] += gy;
                strain[(3 * t + 2, d)] += 0.5 * gx;
                mass[d] += area / 3.0;
            }
        }
        weights.push(area);
    }

    // traction nodes on x = 1, bottom to top, two components each
    let m = 2 * (nc + 1);
    let mut control = DMatrix::zeros(n_dofs, m);
    let mut control_weights = vec![0.0; m];
    let mut direction = vec![0.0; m];
    for j in 0..=nc {
        let hj = if j == 0 || j == nc { 0.5 * h } else { h };
        let n = node(nc, j);
        for c in 0..2 {
            let d = dof(n, c).expect("right edge is free");
            control[(d, 2 * j + c)] = -hj;
            control_weights[2 * j + c] = hj;
        }
        direction[2 * j] = 1.0;
        direction[2 * j + 1] = 0.5;
    }

    DiscreteModel::new("patch2d", 2, weights, strain, control, control_weights, mass, direction, law)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names_resolve() {
        for (name, _) in builtin_models() {
            assert!(build_model(name, &ModelParams::default()).is_ok());
            assert!(describe_model(name, &ModelParams::default()).is_ok());
        }
        assert!(matches!(build_model("nosuch", &ModelParams::default()), Err(Error::UnknownName(_))));
    }

    #[test]
    fn uniaxial_shape_and_inf_sup() {
        let m = build_model("uniaxial", &ModelParams::default()).unwrap();
        assert_eq!((m.dim(), m.n_points(), m.n_dofs(), m.n_controls()), (3, 1, 1, 1));
        assert!((m.inf_sup_constant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn patch2d_strain_has_full_rank() {
        for mesh in 1..=4 {
            let params = ModelParams { mesh, ..Default::default() };
            let m = build_model("patch2d", &params).unwrap();
            assert!(m.n_points() <= 32);
            let rank = m.strain_matrix().clone().svd(false, false).rank(1e-10);
            assert_eq!(rank, m.n_dofs());
            let total: f64 = m.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            let edge: f64 = m.control_weights().iter().sum();
            assert!((edge - 2.0).abs() < 1e-14);
        }
        let params = ModelParams { mesh: 5, ..Default::default() };
        assert!(build_model("patch2d", &params).is_err());
    }

    #[test]
    fn patch2d_reproduces_affine_strain() {
        // u = (a x, b x) on the clamped-at-x=0 mesh gives constant strain
        let m = build_model("patch2d", &ModelParams::default()).unwrap();
        let nc = 2;
        let (a, b) = (0.3, -0.2);
        let mut u = vec![0.0; m.n_dofs()];
        for j in 0..=nc {
            for i in 1..=nc {
                let x = i as f64 / nc as f64;
                let d = 2 * (j * nc + i - 1);
                u[d] = a * x;
                u[d + 1] = b * x;
            }
        }
        for e in m.strain_of(&u).unwrap() {
            assert!((e.components()[0] - a).abs() < 1e-14);
            assert!(e.components()[1].abs() < 1e-14);
            assert!((e.components()[2] - 0.5 * b).abs() < 1e-14);
        }
    }
}
