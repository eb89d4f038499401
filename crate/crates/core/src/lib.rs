//! Anisotropic curvature machinery on concrete symmetric-space models.
//!
//! The crate computes, for hypersurfaces immersed in a product ambient space
//! (Euclidean space, products of round spheres, products of hyperbolic
//! spaces), the anisotropic analogues of the classical curvature objects
//! attached to a parametric surface energy `F`: the anisotropic unit normal
//! (transversal), the anisotropic shape operator and mean curvature, tubes
//! and geodesic spheres adapted to `F`, their focal radii, and the first
//! variation of the induced surface energy.
//!
//! Every closed-form quantity exposed here is paired with an independent
//! numerical route (finite differences, ODE integration, quadrature) so the
//! two can be cross-checked; see the `oracle` module and the acceptance test
//! suite.
//!
//! Algorithm variants (ambient models, energy families, chart families) live
//! behind trait objects and are constructed by name through small registries,
//! so runtime configuration can select them without touching call sites.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod hypersurface;
pub mod lagrangian;
pub mod linalg;
pub mod oracle;
pub mod report;
pub mod symspace;
pub mod tubes;
pub mod variational;

pub use error::{Error, Result};
