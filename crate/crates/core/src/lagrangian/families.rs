//! Concrete Lagrangian families.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lagrangian::{check_unit, tangent_basis_at, Lagrangian, TangentSplit};

/// `F ≡ c` for a constant `c > 0`; the isotropic (area) integrand up to scale.
pub struct IsotropicConstant {
    c: f64,
    dim_n: usize,
}

impl IsotropicConstant {
    pub fn new(c: f64, dim_n: usize) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("constant integrand must be positive, got {c}")));
        }
        Ok(Self { c, dim_n })
    }
}

impl Lagrangian for IsotropicConstant {
    fn family(&self) -> &'static str {
        "constant"
    }

    fn sphere_dim(&self) -> usize {
        self.dim_n
    }

    fn value(&self, v: &DVector<f64>) -> Result<f64> {
        check_unit(v, self.dim_n)?;
        Ok(self.c)
    }

    fn sphere_gradient(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_unit(v, self.dim_n)?;
        Ok(DVector::zeros(v.len()))
    }

    fn sphere_hessian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_unit(v, self.dim_n)?;
        Ok(DMatrix::zeros(v.len(), v.len()))
    }
}

/// `F(v) = sqrt(v^T Q v)` for an SPD matrix `Q`; flat-ambient anisotropy
/// whose equilibrium shapes are ellipsoid-like Wulff bodies.
pub struct QuadraticNorm {
    q: DMatrix<f64>,
    dim_n: usize,
}

impl QuadraticNorm {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() < 2 {
            return Err(Error::Domain("quadratic form must be square, dimension >= 2".into()));
        }
        let sym = 0.5 * (&q + q.transpose());
        if (&q - &sym).norm() > 1e-10 * q.norm().max(1.0) {
            return Err(Error::Domain("quadratic form must be symmetric".into()));
        }
        if sym.clone().cholesky().is_none() {
            return Err(Error::Domain("quadratic form must be positive definite".into()));
        }
        let dim_n = sym.nrows() - 1;
        Ok(Self { q: sym, dim_n })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }
}

impl Lagrangian for QuadraticNorm {
    fn family(&self) -> &'static str {
        "quadratic-form"
    }

    fn sphere_dim(&self) -> usize {
        self.dim_n
    }

    fn value(&self, v: &DVector<f64>) -> Result<f64> {
        check_unit(v, self.dim_n)?;
        Ok(v.dot(&(&self.q * v)).sqrt())
    }

    fn sphere_gradient(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_unit(v, self.dim_n)?;
        let qv = &self.q * v;
        let f = v.dot(&qv).sqrt();
        let amb = qv / f;
        Ok(&amb - v * v.dot(&amb))
    }

    fn sphere_hessian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_unit(v, self.dim_n)?;
        let dim = v.len();
        let qv = &self.q * v;
        let f = v.dot(&qv).sqrt();
        // Ambient Hessian of the 1-homogeneous extension, then the standard
        // restriction: Hess_S = P (Q/F - Qv (Qv)^T / F^3) P - F P, with
        // P the projector onto v^perp.
        let amb = &self.q / f - (&qv * qv.transpose()) / (f * f * f);
        let p = DMatrix::identity(dim, dim) - v * v.transpose();
        Ok(&p * amb * &p - f * p)
    }
}

/// Chebyshev polynomial of the second kind, `U_m(x)`.
fn cheb_u(m: usize, x: f64) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0 * x,
        _ => {
            let (mut a, mut b) = (1.0, 2.0 * x);
            for _ in 2..=m {
                let c = 2.0 * x * b - a;
                a = b;
                b = c;
            }
            b
        }
    }
}

/// Profile Lagrangian on a two-factor product: `F(v) = phi(theta(v))` where
/// `theta = atan2(|v_2|, |v_1|)` and `phi` is a cosine series in `2 theta`,
/// `phi(t) = c_0 + sum_k c_k cos(2 k t)`. The doubled angle makes `phi`
/// automatically smooth across the degenerate axes `theta = 0, pi/2`, which
/// is exactly the regularity a block-rotation-invariant function needs.
pub struct AngleProfile {
    coeffs: Vec<f64>,
    split: TangentSplit,
    dim_n: usize,
}

impl AngleProfile {
    pub fn new(coeffs: Vec<f64>, split: TangentSplit, dim_n: usize) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("angle profile needs at least one coefficient".into()));
        }
        if split.first.len() + split.second.len() != dim_n + 1 {
            return Err(Error::Domain(format!(
                "split blocks cover {} coordinates but vectors have {}",
                split.first.len() + split.second.len(),
                dim_n + 1
            )));
        }
        let out = Self { coeffs, split, dim_n };
        // Positivity sweep over the orbit space [0, pi/2].
        let mut min = f64::INFINITY;
        for i in 0..4096 {
            let t = i as f64 / 4095.0 * std::f64::consts::FRAC_PI_2;
            min = min.min(out.phi(t));
        }
        if min <= 0.0 {
            return Err(Error::Domain(format!("profile is not positive (min {min:.6e})")));
        }
        Ok(out)
    }

    pub fn split(&self) -> &TangentSplit {
        &self.split
    }

    pub fn phi(&self, t: f64) -> f64 {
        let mut acc = self.coeffs[0];
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            acc += c * (2.0 * k as f64 * t).cos();
        }
        acc
    }

    pub fn phi_prime(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            acc -= c * 2.0 * k as f64 * (2.0 * k as f64 * t).sin();
        }
        acc
    }

    pub fn phi_second(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            acc -= c * 4.0 * (k * k) as f64 * (2.0 * k as f64 * t).cos();
        }
        acc
    }

    /// `phi'(t) * cot(t)`, evaluated through `sin(2kt)/sin(t) = U_{2k-1}(cos t)`
    /// so the degenerate limit `t -> 0` is exact.
    fn radial_coeff_second_block(&self, t: f64) -> f64 {
        let x = t.cos();
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            acc -= c * 2.0 * k as f64 * cheb_u(2 * k - 1, x) * x;
        }
        acc
    }

    /// `-phi'(t) * tan(t)`, stable at `t -> pi/2` through the mirrored
    /// Chebyshev identity `sin(2kt)/cos(t) = (-1)^{k+1} U_{2k-1}(sin t)`.
    fn radial_coeff_first_block(&self, t: f64) -> f64 {
        let s = t.sin();
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            acc += c * 2.0 * k as f64 * sign * cheb_u(2 * k - 1, s) * s;
        }
        acc
    }

    /// Factor unit vectors embedded in the full coordinate space, with a
    /// deterministic axis fallback when a factor component vanishes.
    fn factor_units(&self, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let dim = v.len();
        let mut units = Vec::with_capacity(2);
        for which in 0..2 {
            let r = self.split.block(which);
            let n = self.split.factor_norm(v, which);
            let mut u = DVector::zeros(dim);
            if n > 1e-14 {
                for i in r.clone() {
                    u[i] = v[i] / n;
                }
            } else {
                u[r.start] = 1.0;
            }
            units.push(u);
        }
        let u2 = units.pop().unwrap();
        let u1 = units.pop().unwrap();
        (u1, u2)
    }
}

impl Lagrangian for AngleProfile {
    fn family(&self) -> &'static str {
        "angle-profile"
    }

    fn sphere_dim(&self) -> usize {
        self.dim_n
    }

    fn value(&self, v: &DVector<f64>) -> Result<f64> {
        check_unit(v, self.dim_n)?;
        Ok(self.phi(self.split.theta(v)))
    }

    fn sphere_gradient(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_unit(v, self.dim_n)?;
        let t = self.split.theta(v);
        let (u1, u2) = self.factor_units(v);
        // d theta direction on the unit sphere: (-sin t * u1, cos t * u2)
        let dtheta = &u2 * t.cos() - &u1 * t.sin();
        Ok(dtheta * self.phi_prime(t))
    }

    fn sphere_hessian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_unit(v, self.dim_n)?;
        let dim = v.len();
        let t = self.split.theta(v);
        let (u1, u2) = self.factor_units(v);
        let dtheta = &u2 * t.cos() - &u1 * t.sin();

        // Block projectors orthogonal to the factor axes.
        let mut p1 = DMatrix::zeros(dim, dim);
        for i in self.split.first.clone() {
            p1[(i, i)] = 1.0;
        }
        p1 -= &u1 * u1.transpose();
        let mut p2 = DMatrix::zeros(dim, dim);
        for i in self.split.second.clone() {
            p2[(i, i)] = 1.0;
        }
        p2 -= &u2 * u2.transpose();

        // Warped-product Hessian of theta: -tan(t) on the first block,
        // cot(t) on the second, 0 along d theta; multiplied by phi' and
        // combined with phi'' along d theta. The radial coefficients are
        // evaluated in Chebyshev form so both axes are exact limits.
        let c1 = self.radial_coeff_first_block(t);
        let c2 = self.radial_coeff_second_block(t);
        let mut h = DMatrix::zeros(dim, dim);
        h += &dtheta * dtheta.transpose() * self.phi_second(t);
        h += p1 * c1;
        h += p2 * c2;
        Ok(h)
    }
}

/// Wraps an arbitrary pointwise evaluator; derivatives come from central
/// differences along normalized geodesic perturbations. Convergence is
/// second order in the step. Primarily a cross-check and negative-test tool:
/// it accepts integrands with no invariance or smoothness guarantees.
pub struct NumericLagrangian {
    eval: Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
    dim_n: usize,
    grad_step: f64,
    hess_step: f64,
}

impl NumericLagrangian {
    pub fn new(dim_n: usize, eval: Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>) -> Self {
        Self::with_steps(dim_n, eval, 1e-5, 1e-4)
    }

    pub fn with_steps(
        dim_n: usize,
        eval: Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
        grad_step: f64,
        hess_step: f64,
    ) -> Self {
        Self { eval, dim_n, grad_step, hess_step }
    }

    fn eval_normalized(&self, v: &DVector<f64>) -> f64 {
        let n = v.norm();
        (self.eval)(&(v / n))
    }

    /// Second derivative of `F` along the unit-speed geodesic through `v`
    /// with initial direction `e` (unit, tangent).
    fn geodesic_second(&self, v: &DVector<f64>, e: &DVector<f64>) -> f64 {
        let h = self.hess_step;
        let plus = self.eval_normalized(&(v + e * h));
        let minus = self.eval_normalized(&(v - e * h));
        let center = (self.eval)(v);
        (plus - 2.0 * center + minus) / (h * h)
    }
}

impl Lagrangian for NumericLagrangian {
    fn family(&self) -> &'static str {
        "numeric"
    }

    fn sphere_dim(&self) -> usize {
        self.dim_n
    }

    fn value(&self, v: &DVector<f64>) -> Result<f64> {
        check_unit(v, self.dim_n)?;
        Ok((self.eval)(v))
    }

    fn sphere_gradient(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_unit(v, self.dim_n)?;
        let h = self.grad_step;
        let basis = tangent_basis_at(v);
        let mut g = DVector::zeros(v.len());
        for e in &basis {
            let d = (self.eval_normalized(&(v + e * h)) - self.eval_normalized(&(v - e * h)))
                / (2.0 * h);
            g += e * d;
        }
        Ok(g)
    }

    fn sphere_hessian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_unit(v, self.dim_n)?;
        let basis = tangent_basis_at(v);
        let n = basis.len();
        let mut hb = DMatrix::zeros(n, n);
        for i in 0..n {
            hb[(i, i)] = self.geodesic_second(v, &basis[i]);
        }
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..n {
            for j in (i + 1)..n {
                let plus = (&basis[i] + &basis[j]) * inv_sqrt2;
                let minus = (&basis[i] - &basis[j]) * inv_sqrt2;
                let val = 0.5 * (self.geodesic_second(v, &plus) - self.geodesic_second(v, &minus));
                hb[(i, j)] = val;
                hb[(j, i)] = val;
            }
        }
        // Assemble the ambient-coordinate operator from the tangent basis.
        let dim = v.len();
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                h += &basis[i] * basis[j].transpose() * hb[(i, j)];
            }
        }
        Ok(h)
    }
}
