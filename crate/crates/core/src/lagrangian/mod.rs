//! Parametric surface-energy integrands ("Lagrangians").
//!
//! A Lagrangian is a positive 1-homogeneous functional; we store its
//! restriction `F` to the unit sphere `S^n(1)` of the tangent space at the
//! ambient base point, together with its intrinsic (spherical) gradient and
//! Hessian. Families implement the [`Lagrangian`] trait and are selected by
//! name at configuration time, so all downstream geometry is generic over
//! `&dyn Lagrangian`.
//!
//! Conventions:
//! * vectors are given in the ambient embedding coordinates of the tangent
//!   space at the canonical base point, where the induced inner product is
//!   the Euclidean dot product;
//! * `sphere_hessian` returns the operator `∇^S grad F` on `T_v S^n` as a
//!   full matrix that annihilates `v` and maps tangent vectors to tangent
//!   vectors;
//! * ellipticity is checked as positivity of `∇^S grad F + F · id` on
//!   `T_v S^n` (the convexity condition for 1-homogeneous extensions).

mod families;

pub use families::{AngleProfile, IsotropicConstant, NumericLagrangian, QuadraticNorm};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// How the embedding coordinates of the base tangent space split into the
/// two factor blocks of a product ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSplit {
    pub first: std::ops::Range<usize>,
    pub second: std::ops::Range<usize>,
}

impl TangentSplit {
    pub fn block(&self, which: usize) -> std::ops::Range<usize> {
        match which {
            0 => self.first.clone(),
            1 => self.second.clone(),
            _ => panic!("product spaces here have exactly two factors"),
        }
    }

    /// Euclidean norm of the component of `v` in factor block `which`.
    pub fn factor_norm(&self, v: &DVector<f64>, which: usize) -> f64 {
        let r = self.block(which);
        v.rows(r.start, r.len()).norm()
    }

    /// Polar angle `theta = atan2(|v_2|, |v_1|)` of a tangent vector.
    pub fn theta(&self, v: &DVector<f64>) -> f64 {
        self.factor_norm(v, 1).atan2(self.factor_norm(v, 0))
    }
}

pub trait Lagrangian: Send + Sync {
    fn family(&self) -> &'static str;

    /// Dimension `n` of the sphere the functional is restricted to; input
    /// vectors carry `n + 1` coordinates.
    fn sphere_dim(&self) -> usize;

    fn value(&self, v: &DVector<f64>) -> Result<f64>;

    /// Intrinsic gradient of `F` on `S^n(1)`; always orthogonal to `v`.
    fn sphere_gradient(&self, v: &DVector<f64>) -> Result<DVector<f64>>;

    /// Operator `∇^S grad F` on `T_v S^n(1)` in ambient coordinates.
    fn sphere_hessian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// Reject vectors that are not unit length within `1e-12`.
pub(crate) fn check_unit(v: &DVector<f64>, dim: usize) -> Result<()> {
    if v.len() != dim + 1 {
        return Err(Error::Domain(format!(
            "expected a vector with {} coordinates, got {}",
            dim + 1,
            v.len()
        )));
    }
    let n = v.norm();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("direction must be unit length, |v| = {n:.15}")));
    }
    Ok(())
}

/// Orthonormal basis of the tangent space `v^⊥` (Euclidean inner product).
pub fn tangent_basis_at(v: &DVector<f64>) -> Vec<DVector<f64>> {
    let dim = v.len();
    let mut candidates = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        let p = &e - v * v.dot(&e);
        candidates.push(p);
    }
    let basis = linalg::orthonormalize(&candidates, |a, b| a.dot(b), 1e-8);
    debug_assert_eq!(basis.len(), dim - 1);
    basis
}

/// Result of an ellipticity (convexity) sweep.
#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub min_eigenvalue: f64,
    pub argmin: DVector<f64>,
    pub samples: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Smallest eigenvalue of `∇^S grad F + F · id` over the sample set.
pub fn check_convexity(
    f: &dyn Lagrangian,
    samples: &[DVector<f64>],
    tolerance: f64,
) -> Result<ConvexityReport> {
    if samples.is_empty() {
        return Err(Error::Usage("convexity check needs a non-empty sample set".into()));
    }
    let mut min_eig = f64::INFINITY;
    let mut argmin = samples[0].clone();
    for v in samples {
        let val = f.value(v)?;
        if val <= 0.0 {
            return Err(Error::Domain(format!("non-positive integrand F = {val:.6e} at a sample")));
        }
        let hess = f.sphere_hessian(v)?;
        let basis = tangent_basis_at(v);
        let n = basis.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, bi) in basis.iter().enumerate() {
            let hb = &hess * bi;
            for (j, bj) in basis.iter().enumerate() {
                m[(i, j)] = hb.dot(bj) + if i == j { val } else { 0.0 };
            }
        }
        let eigs = linalg::sym_eigenvalues(&m);
        if eigs[0] < min_eig {
            min_eig = eigs[0];
            argmin = v.clone();
        }
    }
    Ok(ConvexityReport {
        min_eigenvalue: min_eig,
        argmin,
        samples: samples.len(),
        tolerance,
        pass: min_eig > tolerance,
    })
}

/// Result of an invariance sweep under a set of linear isometries.
#[derive(Debug, Clone)]
pub struct InvarianceReport {
    pub max_residual: f64,
    pub transforms: usize,
    pub samples: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Max of `|F(T v) - F(v)|` over the supplied transforms and samples. The
/// transforms are expected to be isometries of the tangent space fixing the
/// base point (e.g. the linearized holonomy action of the ambient model).
pub fn check_invariance(
    f: &dyn Lagrangian,
    transforms: &[DMatrix<f64>],
    samples: &[DVector<f64>],
    tolerance: f64,
) -> Result<InvarianceReport> {
    if samples.is_empty() || transforms.is_empty() {
        return Err(Error::Usage("invariance check needs samples and transforms".into()));
    }
    let mut max_residual = 0.0_f64;
    for v in samples {
        let base = f.value(v)?;
        for t in transforms {
            let mut w = t * v;
            let n = w.norm();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::Usage("transform does not preserve the unit sphere".into()));
            }
            w /= n;
            max_residual = max_residual.max((f.value(&w)? - base).abs());
        }
    }
    Ok(InvarianceReport {
        max_residual,
        transforms: transforms.len(),
        samples: samples.len(),
        tolerance,
        pass: max_residual <= tolerance,
    })
}

/// Seeded uniform samples on `S^n(1)`.
pub fn random_unit_samples(dim_n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = DVector::from_fn(dim_n + 1, |_, _| {
            // Box-Muller from two uniforms keeps us independent of rand_distr.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            (-2.0 * u1.ln()).sqrt() * u2.cos()
        });
        let n = v.norm();
        if n > 1e-6 {
            out.push(v / n);
        }
    }
    out
}

/// Deterministic sweep across the orbit-space angle of a product split:
/// unit vectors `(cos t * e1, sin t * e2)` for `count` values of `t` in
/// `[0, pi/2]`, with representative axes in each factor block.
pub fn theta_sweep_samples(dim_n: usize, split: &TangentSplit, count: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let t = (i as f64 + 0.5) / count as f64 * std::f64::consts::FRAC_PI_2;
        let mut v = DVector::zeros(dim_n + 1);
        v[split.first.start] = t.cos();
        v[split.second.start] = t.sin();
        out.push(v);
    }
    out
}
