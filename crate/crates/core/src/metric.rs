//! Inner products on coordinate spaces.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An SPD inner product `⟨a, b⟩ = aᵀ G b` on `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    Identity(usize),
    Diagonal(DVector<f64>),
    /// Block-diagonal Gram matrix with equally sized square blocks.
    BlockDiagonal(Vec<DMatrix<f64>>),
    Dense(DMatrix<f64>),
}

impl Metric {
    pub fn identity(n: usize) -> Self {
        Metric::Identity(n)
    }

    pub fn dense(gram: DMatrix<f64>) -> Result<Self> {
        if gram.nrows() != gram.ncols() {
            return Err(Error::InvalidParameter("metric Gram matrix must be square".into()));
        }
        let asym = (&gram - gram.transpose()).amax();
        if asym > 1e-12 * gram.amax().max(1.0) {
            return Err(Error::InvalidParameter("metric Gram matrix is not symmetric".into()));
        }
        if gram.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter("metric Gram matrix is not positive definite".into()));
        }
        Ok(Metric::Dense(gram))
    }

    pub fn dim(&self) -> usize {
        match self {
            Metric::Identity(n) => *n,
            Metric::Diagonal(d) => d.len(),
            Metric::BlockDiagonal(b) => b.iter().map(|m| m.nrows()).sum(),
            Metric::Dense(g) => g.nrows(),
        }
    }

    /// `G x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Metric::Identity(_) => x.clone(),
            Metric::Diagonal(d) => d.component_mul(x),
            Metric::BlockDiagonal(blocks) => {
                let mut out = DVector::zeros(x.len());
                let mut off = 0;
                for b in blocks {
                    let k = b.nrows();
                    let seg = b * x.rows(off, k);
                    out.rows_mut(off, k).copy_from(&seg);
                    off += k;
                }
                out
            }
            Metric::Dense(g) => g * x,
        }
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self {
            Metric::Identity(_) => a.dot(b),
            _ => a.dot(&self.apply(b)),
        }
    }

    pub fn norm_squared(&self, a: &DVector<f64>) -> f64 {
        self.inner(a, a).max(0.0)
    }

    pub fn norm(&self, a: &DVector<f64>) -> f64 {
        self.norm_squared(a).sqrt()
    }

    pub fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.norm(&(a - b))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Metric::Identity(n) => DMatrix::identity(*n, *n),
            Metric::Diagonal(d) => DMatrix::from_diagonal(d),
            Metric::BlockDiagonal(blocks) => {
                let n = self.dim();
                let mut g = DMatrix::zeros(n, n);
                let mut off = 0;
                for b in blocks {
                    let k = b.nrows();
                    g.view_mut((off, off), (k, k)).copy_from(b);
                    off += k;
                }
                g
            }
            Metric::Dense(g) => g.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Metric::Identity(_))
    }
}
