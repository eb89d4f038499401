//! Independent numerical routes used to validate closed forms.
//!
//! Everything in this module deliberately avoids the spectral machinery it
//! is meant to check: Jacobi fields are integrated with a fixed-step RK4
//! scheme in ambient coordinates, the holonomy correction map is recovered
//! as a finite-difference derivative of honest loop transports, and
//! integrals are estimated by Monte-Carlo sampling.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::symspace::AmbientSpace;
use crate::{Error, Result};

/// Integrate the Jacobi equation `Y'' + R(Y, γ')γ' = 0` along
/// `γ(t) = exp_p(t w)` from `t = 0` to `t = s` with classical RK4.
///
/// The state is the pair of ambient vectors `(Y, ∇Y)`; ambient and covariant
/// derivatives differ by the second fundamental form of the model embedding,
/// `dV/dt = ∇_t V + II(γ', V)`.
pub fn rk4_jacobi(
    model: &dyn AmbientSpace,
    p: &DVector<f64>,
    w: &DVector<f64>,
    y0: &DVector<f64>,
    y0_prime: &DVector<f64>,
    s: f64,
    step: f64,
) -> DVector<f64> {
    let steps = ((s.abs() / step).ceil() as usize).max(1);
    let h = s / steps as f64;
    let dim = model.ambient_dim();

    let derivative = |t: f64, y: &DVector<f64>, z: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        let x = model.exp_map(p, &(w * t));
        let xd = model.transport_along(p, w, t, w);
        let dy = z + model.embedding_second_form(&x, &xd, y);
        let ddz = -model.curvature(&x, y, &xd, &xd) + model.embedding_second_form(&x, &xd, z);
        (dy, ddz)
    };

    let mut y = y0.clone();
    let mut z = y0_prime.clone();
    let mut t = 0.0;
    for _ in 0..steps {
        let (k1y, k1z) = derivative(t, &y, &z);
        let (k2y, k2z) = derivative(t + 0.5 * h, &(&y + &k1y * (0.5 * h)), &(&z + &k1z * (0.5 * h)));
        let (k3y, k3z) = derivative(t + 0.5 * h, &(&y + &k2y * (0.5 * h)), &(&z + &k2z * (0.5 * h)));
        let (k4y, k4z) = derivative(t + h, &(&y + &k3y * h), &(&z + &k3z * h));
        y += (k1y + k2y * 2.0 + k3y * 2.0 + k4y) * (h / 6.0);
        z += (k1z + k2z * 2.0 + k3z * 2.0 + k4z) * (h / 6.0);
        t += h;
        debug_assert_eq!(y.len(), dim);
    }
    y
}

/// Numerical holonomy correction: the derivative at `s = 0` of the loop
/// transports `γ_p · c|[0,s] · γ_{c(s)}^{-1}` applied to `w ∈ T_{p0}M`,
/// with `c(s) = exp_p(s v)`. Central differences at `±step, ±step/2`
/// combined by Richardson extrapolation.
pub fn loop_holonomy_derivative(
    model: &dyn AmbientSpace,
    p: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    step: f64,
) -> Result<DVector<f64>> {
    let out_leg = model.transport_from_base(p, w)?;
    let loop_transport = |s: f64| -> Result<DVector<f64>> {
        let q = model.exp_map(p, &(v * s));
        let mid = model.transport_along(p, v, s, &out_leg);
        model.transport_to_base(&q, &mid)
    };
    let central = |h: f64| -> Result<DVector<f64>> {
        Ok((loop_transport(h)? - loop_transport(-h)?) / (2.0 * h))
    };
    let coarse = central(step)?;
    let fine = central(0.5 * step)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// Monte-Carlo estimate of `∫_{S^n} f dS` with uniform unit-sphere samples.
/// Returns the estimate together with its standard error.
pub fn monte_carlo_sphere_integral(
    f: &dyn Fn(&DVector<f64>) -> Result<f64>,
    dim_n: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let area = match dim_n {
        1 => 2.0 * std::f64::consts::PI,
        2 => 4.0 * std::f64::consts::PI,
        3 => 2.0 * std::f64::consts::PI * std::f64::consts::PI,
        _ => {
            return Err(Error::Usage(
                "monte-carlo quadrature supports sphere dimensions 1..=3".into(),
            ))
        }
    };
    if samples == 0 {
        return Err(Error::Usage("monte-carlo quadrature needs samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut drawn = 0usize;
    while drawn < samples {
        let mut v = DVector::from_fn(dim_n + 1, |_, _| {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        });
        let n = v.norm();
        if n < 1e-12 {
            continue;
        }
        v /= n;
        let val = f(&v)?;
        sum += val;
        sum_sq += val * val;
        drawn += 1;
    }
    let mean = sum / samples as f64;
    let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
    let std_err = area * (var / samples as f64).sqrt();
    Ok((area * mean, std_err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symspace::jacobi::{propagate_jacobi, tau_hol};
    use crate::symspace::models::{EuclideanSpace, ProductSpace};
    use approx::assert_relative_eq;

    fn random_tangent(
        model: &dyn AmbientSpace,
        p: &DVector<f64>,
        rng: &mut ChaCha8Rng,
        scale: f64,
    ) -> DVector<f64> {
        let raw = DVector::from_fn(model.ambient_dim(), |_, _| rng.gen_range(-1.0..1.0));
        model.project_tangent(p, &raw) * scale
    }

    #[test]
    fn rk4_matches_flat_affine_solution() {
        let model = EuclideanSpace::new(3).unwrap();
        let p = DVector::zeros(3);
        let w = DVector::from_vec(vec![1.0, 0.5, -0.25]);
        let y0 = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let y0p = DVector::from_vec(vec![-0.4, 0.0, 0.9]);
        let s = 1.3;
        let y = rk4_jacobi(&model, &p, &w, &y0, &y0p, s, 1e-3);
        assert!((&y - &(&y0 + &y0p * s)).norm() < 1e-12);
    }

    #[test]
    fn rk4_agrees_with_spectral_propagator() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for model in [
            ProductSpace::spheres(2, 2).unwrap(),
            ProductSpace::hyperbolic(2, 2).unwrap(),
        ] {
            let p0 = model.base_point();
            for _ in 0..5 {
                let off = random_tangent(&model, &p0, &mut rng, 0.3);
                let p = model.exp_map(&p0, &off);
                let w = random_tangent(&model, &p, &mut rng, 0.8);
                let y0 = random_tangent(&model, &p, &mut rng, 1.0);
                let y0p = random_tangent(&model, &p, &mut rng, 1.0);
                let s = 1.4;
                let spectral = propagate_jacobi(&model, &p, &w, &y0, &y0p, s);
                let numeric = rk4_jacobi(&model, &p, &w, &y0, &y0p, s, 1e-3);
                let err = (&spectral - &numeric).norm();
                assert!(err < 1e-6, "{}: rk4 mismatch {err}", model.name());
            }
        }
    }

    #[test]
    fn loop_derivative_matches_closed_form_holonomy() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for model in [
            ProductSpace::spheres(2, 2).unwrap(),
            ProductSpace::hyperbolic(2, 2).unwrap(),
        ] {
            let p0 = model.base_point();
            for _ in 0..5 {
                let off = random_tangent(&model, &p0, &mut rng, 0.5);
                let p = model.exp_map(&p0, &off);
                let v = random_tangent(&model, &p, &mut rng, 1.0);
                let w = random_tangent(&model, &p0, &mut rng, 1.0);
                let closed = tau_hol(&model, &p, &v, &w).unwrap();
                let numeric = loop_holonomy_derivative(&model, &p, &v, &w, 1e-3).unwrap();
                let err = (&closed - &numeric).norm();
                assert!(err < 1e-5, "{}: holonomy mismatch {err}", model.name());
            }
        }
    }

    #[test]
    fn monte_carlo_integrates_constants_exactly() {
        let f = |_: &DVector<f64>| Ok(1.0);
        let (value, err) = monte_carlo_sphere_integral(&f, 2, 1000, 1).unwrap();
        assert_relative_eq!(value, 4.0 * std::f64::consts::PI, epsilon = 1e-9);
        assert!(err < 1e-12);
    }

    #[test]
    fn monte_carlo_matches_known_quadratic_integral() {
        // ∫_{S^2} x_1^2 dS = 4π/3
        let f = |v: &DVector<f64>| Ok(v[0] * v[0]);
        let (value, err) = monte_carlo_sphere_integral(&f, 2, 200_000, 7).unwrap();
        let exact = 4.0 * std::f64::consts::PI / 3.0;
        assert!(
            (value - exact).abs() < 3.0 * err.max(1e-3),
            "value {value} exact {exact} err {err}"
        );
    }
}
