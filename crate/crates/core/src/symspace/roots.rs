//! Restricted-root data of a tangent direction.
//!
//! For a direction `v` at a point of a symmetric-space model the tangent
//! space splits orthogonally into a maximal abelian subspace `a_v`
//! containing `v` and common eigenspaces of the operators `R(w) = R(., w)w`,
//! `w ∈ a_v`: on the eigenspace of the root `α` the operator acts as
//! `ε α(w)^2 id`. This data drives every closed-form spectrum and focal-set
//! computation downstream.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AmbientSpace;

/// One positive restricted root together with its eigenspace.
#[derive(Debug, Clone)]
pub struct RestrictedRoot {
    /// Representing vector `g ∈ a_v` of the functional: `α(w) = ⟨g, w⟩`.
    pub functional: DVector<f64>,
    /// `α(v)` for the direction the data was requested at.
    pub value: f64,
    pub multiplicity: usize,
    /// Orthonormal basis of the eigenspace (ambient coordinates).
    pub basis: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct RootData {
    /// Curvature sign of the model the data came from.
    pub epsilon: f64,
    /// Orthonormal basis of `a_v`; the first entry is `v/|v|`.
    pub abelian: Vec<DVector<f64>>,
    pub roots: Vec<RestrictedRoot>,
}

impl RootData {
    /// Rank of the ambient model (dimension of `a_v`).
    pub fn rank(&self) -> usize {
        self.abelian.len()
    }

    /// Evaluate the root functional at a tangent vector.
    pub fn root_value(&self, model: &dyn AmbientSpace, root: &RestrictedRoot, w: &DVector<f64>) -> f64 {
        model.bilinear(&root.functional, w)
    }

    /// Worst deviation of `{a_v basis} ∪ {eigenspace bases}` from an
    /// orthonormal basis of the full tangent space at `p`.
    pub fn orthonormality_residual(&self, model: &dyn AmbientSpace, p: &DVector<f64>) -> f64 {
        let mut all: Vec<&DVector<f64>> = self.abelian.iter().collect();
        for root in &self.roots {
            all.extend(root.basis.iter());
        }
        if all.len() != model.manifold_dim() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((model.inner(p, a, b) - expected).abs());
            }
        }
        worst
    }

    /// Largest violation of `R(w) b = ε α(w)^2 b` (and of `R(w) a = 0` on
    /// `a_v`) over random abelian directions `w`.
    pub fn eigen_identity_residual(
        &self,
        model: &dyn AmbientSpace,
        p: &DVector<f64>,
        trials: usize,
        seed: u64,
    ) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let mut w = DVector::zeros(model.ambient_dim());
            for a in &self.abelian {
                w += a * rng.gen_range(-1.0..1.0);
            }
            for root in &self.roots {
                let alpha = self.root_value(model, root, &w);
                let factor = self.epsilon * alpha * alpha;
                for b in &root.basis {
                    let r = model.jacobi_apply(p, &w, b);
                    worst = worst.max((&r - b * factor).norm());
                }
            }
            for a in &self.abelian {
                worst = worst.max(model.jacobi_apply(p, &w, a).norm());
            }
        }
        worst
    }
}

/// Which tangent-split block carries (essentially all of) a base-coordinate
/// vector; `None` when the mass is genuinely mixed.
pub fn factor_support(coords: &DVector<f64>, split: &crate::lagrangian::TangentSplit) -> Option<usize> {
    let n1 = coords.rows(split.first.start, split.first.len()).norm();
    let n2 = coords.rows(split.second.start, split.second.len()).norm();
    let total = (n1 * n1 + n2 * n2).sqrt();
    if total == 0.0 {
        return None;
    }
    if n2 <= 1e-10 * total {
        Some(0)
    } else if n1 <= 1e-10 * total {
        Some(1)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::TangentSplit;

    #[test]
    fn factor_support_classifies_blocks() {
        let split = TangentSplit {
            first: 0..2,
            second: 2..4,
        };
        let a = DVector::from_vec(vec![1.0, -0.5, 0.0, 1e-12]);
        let b = DVector::from_vec(vec![0.0, 0.0, 0.3, 0.4]);
        let c = DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(factor_support(&a, &split), Some(0));
        assert_eq!(factor_support(&b, &split), Some(1));
        assert_eq!(factor_support(&c, &split), None);
    }
}
