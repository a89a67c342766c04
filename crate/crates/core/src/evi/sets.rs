use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::model::MaterialLaw;
use crate::tensor::{component_weight, dev_operator, n_components};

/// Closed convex set with a metric projection.
pub trait ConvexSet: Send + Sync {
    fn dim(&self) -> usize;

    /// Nearest point of the set to `x` in the norm induced by `metric`.
    fn project(&self, x: &DVector<f64>, metric: &Metric) -> Result<DVector<f64>>;

    fn contains(&self, x: &DVector<f64>, tol: f64) -> bool;

    fn name(&self) -> &'static str;
}

fn check_len(set: &dyn ConvexSet, x: &DVector<f64>, metric: &Metric) -> Result<()> {
    if x.len() != set.dim() {
        return Err(Error::DimensionMismatch { what: "point", expected: set.dim(), found: x.len() });
    }
    if metric.dim() != set.dim() {
        return Err(Error::DimensionMismatch { what: "metric", expected: set.dim(), found: metric.dim() });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct WholeSpace(pub usize);

impl ConvexSet for WholeSpace {
    fn dim(&self) -> usize {
        self.0
    }

    fn project(&self, x: &DVector<f64>, metric: &Metric) -> Result<DVector<f64>> {
        check_len(self, x, metric)?;
        Ok(x.clone())
    }

    fn contains(&self, x: &DVector<f64>, _tol: f64) -> bool {
        x.len() == self.0
    }

    fn name(&self) -> &'static str {
        "whole-space"
    }
}

/// `[lo, hi] ⊂ R`.
#[derive(Clone, Debug)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidParameter(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(r: f64) -> Result<Self> {
        Self::new(-r, r)
    }
}

impl ConvexSet for Interval {
    fn dim(&self) -> usize {
        1
    }

    fn project(&self, x: &DVector<f64>, metric: &Metric) -> Result<DVector<f64>> {
        check_len(self, x, metric)?;
        Ok(DVector::from_element(1, x[0].clamp(self.lo, self.hi)))
    }

    fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == 1 && x[0] >= self.lo - tol && x[0] <= self.hi + tol
    }

    fn name(&self) -> &'static str {
        "interval"
    }
}

/// Euclidean ball `{z : |z − c| ≤ r}`.
#[derive(Clone, Debug)]
pub struct Ball {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative radius {radius}")));
        }
        Ok(Self { center, radius })
    }
}

impl ConvexSet for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn project(&self, x: &DVector<f64>, metric: &Metric) -> Result<DVector<f64>> {
        check_len(self, x, metric)?;
        let y = x - &self.center;
        let r = self.radius;
        if y.norm() <= r {
            return Ok(x.clone());
        }
        if metric.is_identity() || r == 0.0 {
            return Ok(&self.center + &y * (r / y.norm()));
        }
        // G(z − x) + μ(z − c) = 0; in the eigenbasis of G the radius is a
        // decreasing convex function of μ.
        let eig = SymmetricEigen::new(metric.to_dense());
        let lam = &eig.eigenvalues;
        let yq = eig.eigenvectors.transpose() * &y;
        let radius_sq = |mu: f64| -> (f64, f64) {
            let mut f = 0.0;
            let mut df = 0.0;
            for i in 0..lam.len() {
                let t = lam[i] / (lam[i] + mu);
                f += t * t * yq[i] * yq[i];
                df += -2.0 * t * t / (lam[i] + mu) * yq[i] * yq[i];
            }
            (f - r * r, df)
        };
        let mut lo = 0.0;
        let mut hi = lam.max() * (y.norm() / r);
        while radius_sq(hi).0 > 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        let mut mu = hi;
        for _ in 0..200 {
            let (f, df) = radius_sq(mu);
            if f.abs() <= 1e-15 * r * r {
                break;
            }
            if f > 0.0 {
                lo = mu;
            } else {
                hi = mu;
            }
            let newton = mu - f / df;
            mu = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        let zq = DVector::from_iterator(lam.len(), (0..lam.len()).map(|i| lam[i] / (lam[i] + mu) * yq[i]));
        let z = &eig.eigenvectors * zq;
        // land exactly on the sphere
        let z = &z * (r / z.norm());
        Ok(&self.center + z)
    }

    fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim() && (x - &self.center).norm() <= self.radius + tol
    }

    fn name(&self) -> &'static str {
        "ball"
    }
}

/// The pointwise yield set `{(σ, χ) : |dev σ + dev χ| ≤ σ₀}` on flattened
/// `[σ, χ]` components.
#[derive(Clone, Debug)]
pub struct VonMisesCylinder {
    tensor_dim: usize,
    sigma0: f64,
    /// `𝒟` as a `k × 2k` component matrix.
    dd: DMatrix<f64>,
    /// Gram matrix of `φ`: `𝒟ᵀ W 𝒟`.
    q: DMatrix<f64>,
    /// Closed-form return is used when the metric equals this law's gram.
    law: Option<(MaterialLaw, DMatrix<f64>)>,
}

impl VonMisesCylinder {
    pub fn new(tensor_dim: usize, sigma0: f64) -> Result<Self> {
        if tensor_dim != 2 && tensor_dim != 3 {
            return Err(Error::InvalidParameter(format!("unsupported dimension {tensor_dim}")));
        }
        if !(sigma0 > 0.0) {
            return Err(Error::InvalidParameter(format!("yield stress must be positive, got {sigma0}")));
        }
        let k = n_components(tensor_dim);
        let p = dev_operator(tensor_dim).matrix();
        let mut dd = DMatrix::zeros(k, 2 * k);
        dd.view_mut((0, 0), (k, k)).copy_from(&p);
        dd.view_mut((0, k), (k, k)).copy_from(&p);
        let w = DMatrix::from_diagonal(&DVector::from_iterator(k, (0..k).map(|c| component_weight(tensor_dim, c))));
        let q = dd.transpose() * w * &dd;
        Ok(Self { tensor_dim, sigma0, dd, q, law: None })
    }

    /// Yield set of `law`, with the radial return used whenever the
    /// projection metric is the law's energy gram.
    pub fn for_law(law: &MaterialLaw) -> Result<Self> {
        let mut set = Self::new(law.dim(), law.sigma0())?;
        set.law = Some((law.clone(), law.a_gram()));
        Ok(set)
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn tensor_dim(&self) -> usize {
        self.tensor_dim
    }

    fn yield_norm_sq(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x))
    }

    /// `|𝒟x|`.
    pub fn yield_norm(&self, x: &DVector<f64>) -> f64 {
        self.yield_norm_sq(x).max(0.0).sqrt()
    }

    pub fn dd_matrix(&self) -> &DMatrix<f64> {
        &self.dd
    }

    /// Projection in a general SPD metric `G`: `z(γ) = (G + γQ)⁻¹ G x` with
    /// the scalar `γ ≥ 0` fixed by `|𝒟z| = σ₀`.
    fn project_general(&self, x: &DVector<f64>, g: &DMatrix<f64>) -> Result<DVector<f64>> {
        let gx = g * x;
        let s0sq = self.sigma0 * self.sigma0;
        let z_of = |gamma: f64| -> Result<DVector<f64>> {
            let sys = g + &self.q * gamma;
            sys.cholesky()
                .map(|c| c.solve(&gx))
                .ok_or_else(|| Error::ProjectionFailure("G + γQ lost definiteness".into()))
        };
        let mut lo = 0.0;
        let mut hi = 1.0 / self.q.amax().max(1e-300) * g.amax();
        let mut guard = 0;
        while self.yield_norm_sq(&z_of(hi)?) > s0sq {
            lo = hi;
            hi *= 4.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::ProjectionFailure("multiplier bracket not found".into()));
            }
        }
        let mut z = z_of(hi)?;
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let zm = z_of(mid)?;
            if self.yield_norm_sq(&zm) > s0sq {
                lo = mid;
            } else {
                hi = mid;
                z = zm;
            }
        }
        Ok(z)
    }
}

impl ConvexSet for VonMisesCylinder {
    fn dim(&self) -> usize {
        2 * n_components(self.tensor_dim)
    }

    fn project(&self, x: &DVector<f64>, metric: &Metric) -> Result<DVector<f64>> {
        check_len(self, x, metric)?;
        if self.yield_norm(x) <= self.sigma0 {
            return Ok(x.clone());
        }
        let g = metric.to_dense();
        if let Some((law, gram)) = &self.law {
            if (&g - gram).amax() <= 1e-14 * gram.amax() {
                let trial = crate::tensor::GeneralizedStress::from_slice(self.tensor_dim, x.as_slice())?;
                let r = law.return_map(&trial);
                return Ok(DVector::from_vec(r.stress.to_vec()));
            }
        }
        self.project_general(x, &g)
    }

    fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        // tolerance on φ = (|𝒟x|² − σ₀²)/2
        x.len() == self.dim() && 0.5 * (self.yield_norm_sq(x) - self.sigma0 * self.sigma0) <= tol
    }

    fn name(&self) -> &'static str {
        "von-mises-cylinder"
    }
}
