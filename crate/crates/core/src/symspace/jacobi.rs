//! Spectral Jacobi-field machinery.
//!
//! Along a geodesic `γ(s) = exp_p(s w)` the Jacobi fields of a symmetric
//! space are carried by the spectral propagators of the Jacobi operator
//! `R(w) = R(., w)w`:
//!
//! `Y(s) = τ_s ( Dco_{s w} Y(0) + s Dsi_{s w} Y'(0) )`,
//!
//! where `Dco = cos(s sqrt(R))` and `Dsi = sin(s sqrt(R))/(s sqrt(R))` act
//! through the eigenvalues of `R(w)` — trigonometric on positive ones,
//! hyperbolic on negative ones, polynomial at zero. The same operator
//! calculus yields the holonomy correction map `τ^hol`.

use nalgebra::{DMatrix, DVector};

use super::AmbientSpace;
use crate::Result;

/// `cos(s sqrt(λ))` evaluated through `y = λ s^2` (even in `s`, entire in `y`).
pub fn dco_scalar(y: f64) -> f64 {
    if y > 1e-12 {
        y.sqrt().cos()
    } else if y < -1e-12 {
        (-y).sqrt().cosh()
    } else {
        1.0 - 0.5 * y + y * y / 24.0
    }
}

/// `sin(s sqrt(λ))/(s sqrt(λ))` evaluated through `y = λ s^2`.
pub fn dsi_scalar(y: f64) -> f64 {
    if y > 1e-12 {
        let x = y.sqrt();
        x.sin() / x
    } else if y < -1e-12 {
        let x = (-y).sqrt();
        x.sinh() / x
    } else {
        1.0 - y / 6.0 + y * y / 120.0
    }
}

/// Eigendecomposition of the Jacobi operator `R(., w)w` on `T_pM`,
/// packaged as a spectral functional calculus on ambient tangent vectors.
pub struct JacobiOperator {
    basis: Vec<DVector<f64>>,
    /// Form-lowered basis: coefficient extraction is a plain dot product.
    dual: Vec<DVector<f64>>,
    vectors: DMatrix<f64>,
    values: Vec<f64>,
}

impl JacobiOperator {
    pub fn new(model: &dyn AmbientSpace, p: &DVector<f64>, w: &DVector<f64>) -> Self {
        let basis = model.tangent_basis(p);
        let m = basis.len();
        let mut op = DMatrix::zeros(m, m);
        for j in 0..m {
            let rj = model.jacobi_apply(p, w, &basis[j]);
            for i in 0..m {
                op[(i, j)] = model.inner(p, &basis[i], &rj);
            }
        }
        let op = (&op + op.transpose()) * 0.5;
        let eig = op.symmetric_eigen();
        let j = model.form_diagonal();
        let dual = basis.iter().map(|b| b.component_mul(&j)).collect();
        Self {
            basis,
            dual,
            vectors: eig.eigenvectors,
            values: eig.eigenvalues.iter().copied().collect(),
        }
    }

    /// Eigenvalues of `R(., w)w` (unsorted).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Coordinates of a tangent vector in the eigenbasis.
    pub fn eigen_coords(&self, u: &DVector<f64>) -> DVector<f64> {
        let c = DVector::from_iterator(self.dual.len(), self.dual.iter().map(|d| d.dot(u)));
        self.vectors.tr_mul(&c)
    }

    /// Apply `g(λ)` spectrally to a tangent vector at `p`.
    pub fn apply<G: Fn(f64) -> f64>(&self, g: G, u: &DVector<f64>) -> DVector<f64> {
        let mut e = self.eigen_coords(u);
        for (ei, l) in e.iter_mut().zip(&self.values) {
            *ei *= g(*l);
        }
        let c = &self.vectors * e;
        let mut out = DVector::zeros(self.basis[0].len());
        for (i, b) in self.basis.iter().enumerate() {
            out += b * c[i];
        }
        out
    }

    /// `Dco_{s w} u = cos(s sqrt(R(w))) u`.
    pub fn dco(&self, s: f64, u: &DVector<f64>) -> DVector<f64> {
        self.apply(|l| dco_scalar(l * s * s), u)
    }

    /// `Dsi_{s w} u = sin(s sqrt(R(w)))/(s sqrt(R(w))) u`.
    pub fn dsi(&self, s: f64, u: &DVector<f64>) -> DVector<f64> {
        self.apply(|l| dsi_scalar(l * s * s), u)
    }
}

/// Closed-form Jacobi field along `s -> exp_p(s w)` with initial value `y0`
/// and initial covariant derivative `y0_prime`, evaluated at parameter `s`.
pub fn propagate_jacobi(
    model: &dyn AmbientSpace,
    p: &DVector<f64>,
    w: &DVector<f64>,
    y0: &DVector<f64>,
    y0_prime: &DVector<f64>,
    s: f64,
) -> DVector<f64> {
    let jac = JacobiOperator::new(model, p, w);
    let v = jac.dco(s, y0) + jac.dsi(s, y0_prime) * s;
    model.transport_along(p, w, s, &v)
}

/// Holonomy correction map `τ^hol_v(w)` at `p` for `v ∈ T_pM`, `w ∈ T_{p0}M`:
/// the derivative at `s = 0` of the loop transports
/// `γ_p · c|[0,s] · γ_{c(s)}^{-1}` with `c(s) = exp_p(s v)`. In closed form
///
/// `τ^hol_v(w) = R(G(v̄), u) w`,  `u = log_{p0}(p)`,
///
/// where `v̄ = Dsi_u^{-1}(τ_p^{-1} v)` and `G` acts spectrally as
/// `(1 − cos sqrt(λ))/λ`; the argument order matches the sign of the loop
/// derivative. Vanishes in flat space and whenever the two curvature
/// arguments are parallel; linear in `v`.
pub fn tau_hol(
    model: &dyn AmbientSpace,
    p: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    let p0 = model.base_point();
    let u = model.log_map(&p0, p)?;
    let v_base = model.transport_to_base(p, v)?;
    let jac = JacobiOperator::new(model, &p0, &u);
    // The log map keeps factor angles below π, so dsi stays away from zero.
    let vbar = jac.apply(|l| 1.0 / dsi_scalar(l), &v_base);
    let g = jac.apply(
        |l| {
            if l.abs() < 1e-9 {
                0.5 - l / 24.0
            } else {
                (1.0 - dco_scalar(l)) / l
            }
        },
        &vbar,
    );
    Ok(model.curvature(&p0, &g, &u, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symspace::models::{EuclideanSpace, ProductSpace};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_tangent(
        model: &dyn AmbientSpace,
        p: &DVector<f64>,
        rng: &mut ChaCha8Rng,
    ) -> DVector<f64> {
        let raw = DVector::from_fn(model.ambient_dim(), |_, _| rng.gen_range(-1.0..1.0));
        model.project_tangent(p, &raw)
    }

    #[test]
    fn spectral_scalars_hit_reference_values() {
        assert_relative_eq!(dco_scalar(FRAC_PI_2 * FRAC_PI_2), 0.0, epsilon = 1e-15);
        assert_relative_eq!(dsi_scalar(PI * PI / 4.0), 2.0 / PI, epsilon = 1e-15);
        assert_relative_eq!(dco_scalar(-1.0), 1.0f64.cosh(), epsilon = 1e-15);
        assert_relative_eq!(dsi_scalar(-1.0), 1.0f64.sinh(), epsilon = 1e-15);
        assert_relative_eq!(dco_scalar(0.0), 1.0, epsilon = 1e-16);
        assert_relative_eq!(dsi_scalar(0.0), 1.0, epsilon = 1e-16);
        // continuity across the series window
        assert_relative_eq!(dco_scalar(1.1e-12), dco_scalar(0.9e-12), epsilon = 1e-12);
    }

    #[test]
    fn jacobi_operator_reproduces_sectional_eigenvalues() {
        let model = ProductSpace::spheres(2, 2).unwrap();
        let p = model.base_point();
        let basis = model.tangent_basis(&p);
        let w = basis[0].clone(); // direction inside the first factor
        let jac = JacobiOperator::new(&model, &p, &w);
        let mut vals: Vec<f64> = jac.eigenvalues().to_vec();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0]).abs() < 1e-12);
        assert!((vals[1]).abs() < 1e-12);
        assert!((vals[2]).abs() < 1e-12);
        assert_relative_eq!(vals[3], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn radial_jacobi_field_grows_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for model in [
            ProductSpace::spheres(2, 2).unwrap(),
            ProductSpace::hyperbolic(2, 2).unwrap(),
        ] {
            let p = model.base_point();
            let w = random_tangent(&model, &p, &mut rng);
            let zero = DVector::zeros(model.ambient_dim());
            let s = 0.8;
            let y = propagate_jacobi(&model, &p, &w, &zero, &w, s);
            let expected = model.transport_along(&p, &w, s, &w) * s;
            assert!((&y - &expected).norm() < 1e-12);
        }
    }

    #[test]
    fn flat_jacobi_fields_are_affine() {
        let model = EuclideanSpace::new(3).unwrap();
        let p = DVector::from_vec(vec![0.2, -0.1, 0.4]);
        let w = DVector::from_vec(vec![0.5, 0.1, -0.3]);
        let y0 = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let y0p = DVector::from_vec(vec![-0.5, 0.2, 0.1]);
        let s = 1.7;
        let y = propagate_jacobi(&model, &p, &w, &y0, &y0p, s);
        assert!((&y - &(&y0 + &y0p * s)).norm() < 1e-13);
    }

    #[test]
    fn sphere_jacobi_field_matches_sine_solution() {
        // On the first S^2 factor with |w| = 1, a vanishing-value field
        // orthogonal to w grows like sin(s).
        let model = ProductSpace::spheres(2, 2).unwrap();
        let p = model.base_point();
        let basis = model.tangent_basis(&p);
        let w = basis[0].clone();
        let zero = DVector::zeros(model.ambient_dim());
        let s = 1.1;
        let y = propagate_jacobi(&model, &p, &w, &zero, &basis[1], s);
        let expected = model.transport_along(&p, &w, s, &basis[1]) * s.sin();
        assert!((&y - &expected).norm() < 1e-12);
        assert_relative_eq!(y.norm(), s.sin(), epsilon = 1e-12);
    }

    #[test]
    fn tau_hol_vanishes_in_flat_space_and_on_parallel_arguments() {
        let flat = EuclideanSpace::new(3).unwrap();
        let p = DVector::from_vec(vec![0.4, 0.2, -0.7]);
        let v = DVector::from_vec(vec![1.0, 0.0, 0.5]);
        let w = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        assert!(tau_hol(&flat, &p, &v, &w).unwrap().norm() < 1e-15);

        let model = ProductSpace::spheres(2, 2).unwrap();
        let p0 = model.base_point();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let u = random_tangent(&model, &p0, &mut rng) * 0.4;
        let p = model.exp_map(&p0, &u);
        // v parallel to the geodesic velocity at p
        let v = model.transport_along(&p0, &u, 1.0, &u);
        let w = random_tangent(&model, &p0, &mut rng);
        assert!(tau_hol(&model, &p, &v, &w).unwrap().norm() < 1e-12);
    }

    #[test]
    fn tau_hol_is_linear_in_v() {
        let model = ProductSpace::hyperbolic(2, 2).unwrap();
        let p0 = model.base_point();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let u = random_tangent(&model, &p0, &mut rng) * 0.6;
        let p = model.exp_map(&p0, &u);
        let v = random_tangent(&model, &p, &mut rng);
        let w = random_tangent(&model, &p0, &mut rng);
        let once = tau_hol(&model, &p, &v, &w).unwrap();
        let twice = tau_hol(&model, &p, &(&v * 2.0), &w).unwrap();
        assert!((&twice - &once * 2.0).norm() < 1e-12);
    }
}
