//! Ambient symmetric-space models.
//!
//! Every model lives inside a linear space of `ambient_dim` coordinates and
//! all operations exchange ambient vectors: points satisfy the embedding
//! constraints (unit spheres, hyperboloid sheets), tangent vectors are
//! attached to an explicit footpoint. Exponential and logarithm maps,
//! parallel transport along geodesics, and the curvature tensor are exact
//! closed forms; on top of them sit the restricted-root decomposition
//! ([`roots`]), the spectral Jacobi propagators and the holonomy correction
//! map ([`jacobi`]), and the focal-radius root finder ([`focal`]).
//!
//! The canonical isometry between the base tangent space and `R^{n+1}`
//! (`base_coords` / `from_base_coords`) is the bridge to the Lagrangian
//! families, which are defined on the unit sphere of that coordinate space.

pub mod focal;
pub mod jacobi;
pub mod models;
pub mod roots;

pub use focal::{focal_radii, FocalRadiiReport, FocalRadius, FocalSample};
pub use jacobi::{propagate_jacobi, tau_hol, JacobiOperator};
pub use models::{EuclideanSpace, ProductSpace};
pub use roots::{RestrictedRoot, RootData};

use nalgebra::{DMatrix, DVector};

use crate::lagrangian::TangentSplit;
use crate::Result;

/// A complete ambient model with closed-form symmetric-space machinery.
///
/// Implementations are immutable and cheap to share; all methods are pure,
/// so node-parallel evaluation over sample sets needs no synchronization.
pub trait AmbientSpace: Send + Sync {
    /// Registry name of the model family.
    fn name(&self) -> &'static str;

    /// Number of coordinates of the linear space the model is embedded in.
    fn ambient_dim(&self) -> usize;

    /// Intrinsic dimension `n + 1` of the model.
    fn manifold_dim(&self) -> usize;

    /// Curvature type: `0` flat, `+1` compact type, `-1` non-compact type.
    fn epsilon(&self) -> f64;

    fn base_point(&self) -> DVector<f64>;

    /// Diagonal of the ambient bilinear form (`-1` entries mark the
    /// timelike coordinate of each hyperboloid factor).
    fn form_diagonal(&self) -> DVector<f64>;

    /// Ambient bilinear form; restricted to a tangent space it is the
    /// Riemannian metric.
    fn bilinear(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let j = self.form_diagonal();
        (0..u.len()).map(|i| j[i] * u[i] * w[i]).sum()
    }

    /// Riemannian inner product of tangent vectors at `p`.
    fn inner(&self, _p: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        self.bilinear(u, w)
    }

    /// Riemannian norm of a tangent vector at `p`.
    fn norm(&self, p: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.inner(p, u, u).max(0.0).sqrt()
    }

    /// Re-impose the embedding constraints on a nearby ambient vector.
    fn project_point(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// Orthogonal projection of an ambient vector onto `T_pM`.
    fn project_tangent(&self, p: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// Orthonormal basis of `T_pM`.
    fn tangent_basis(&self, p: &DVector<f64>) -> Vec<DVector<f64>>;

    fn exp_map(&self, p: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// Initial velocity of the minimizing geodesic `[0,1] -> M` from `p` to
    /// `q`; fails close to the cut locus (per-factor antipodality).
    fn log_map(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>>;

    /// Parallel transport of `u` from `s = 0` to `s = t` along the geodesic
    /// `s -> exp_p(s dir)`; a linear isometry, the identity at `t = 0`.
    fn transport_along(
        &self,
        p: &DVector<f64>,
        dir: &DVector<f64>,
        t: f64,
        u: &DVector<f64>,
    ) -> DVector<f64>;

    /// Transport along the minimizing geodesic from `p` to `q`.
    fn transport(&self, p: &DVector<f64>, q: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let dir = self.log_map(p, q)?;
        Ok(self.transport_along(p, &dir, 1.0, u))
    }

    /// `τ_p`: transport from the base point to `p`.
    fn transport_from_base(&self, p: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.transport(&self.base_point(), p, u)
    }

    /// `τ_p^{-1}`: transport from `p` back to the base point.
    fn transport_to_base(&self, p: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.transport(p, &self.base_point(), u)
    }

    /// Curvature tensor `R(x, y)z` at `p`.
    fn curvature(
        &self,
        p: &DVector<f64>,
        x: &DVector<f64>,
        y: &DVector<f64>,
        z: &DVector<f64>,
    ) -> DVector<f64>;

    /// Jacobi operator `R(w)u = R(u, w)w` at `p`.
    fn jacobi_apply(&self, p: &DVector<f64>, w: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.curvature(p, u, w, w)
    }

    /// Second fundamental form of the embedding into the ambient linear
    /// space: the ambient derivative of a tangent field `V` along `u` is
    /// `∇_u V + II(u, V)`.
    fn embedding_second_form(
        &self,
        p: &DVector<f64>,
        u: &DVector<f64>,
        w: &DVector<f64>,
    ) -> DVector<f64>;

    /// Factor blocks of the base tangent coordinates for product models.
    fn tangent_split(&self) -> Option<TangentSplit>;

    /// Ambient coordinate ranges of the two factors for product models.
    fn ambient_split(&self) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)>;

    /// Coordinates of a base-point tangent vector in the canonical
    /// orthonormal basis (an isometry onto `R^{n+1}`).
    fn base_coords(&self, w: &DVector<f64>) -> DVector<f64>;

    fn from_base_coords(&self, c: &DVector<f64>) -> DVector<f64>;

    /// First conjugate radius `r_M` (infinite for `ε <= 0`).
    fn first_conjugate_radius(&self) -> f64;

    /// Restricted-root data of the direction `v ∈ T_pM`.
    fn root_data(&self, p: &DVector<f64>, v: &DVector<f64>) -> Result<RootData>;

    /// Random elements of the holonomy group acting on base coordinates
    /// (empty for the flat model, whose holonomy is trivial).
    fn holonomy_rotations(&self, count: usize, seed: u64) -> Vec<DMatrix<f64>>;
}
