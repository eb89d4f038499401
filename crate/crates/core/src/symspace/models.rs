//! Concrete ambient models: flat space and two-factor products of round
//! spheres or hyperbolic spaces (hyperboloid-sheet coordinates).

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::roots::{RestrictedRoot, RootData};
use super::AmbientSpace;
use crate::lagrangian::TangentSplit;
use crate::linalg;
use crate::{Error, Result};

/// Per-factor angle past which log-map directions are no longer trusted.
const CUT_LOCUS_TOL: f64 = 1e-6;

fn zero_direction_error() -> Error {
    Error::Domain("root data needs a nonzero direction".into())
}

// ---------------------------------------------------------------------------
// Flat model
// ---------------------------------------------------------------------------

/// Flat `R^{n+1}`; trivial holonomy, no curvature, no roots.
#[derive(Debug, Clone)]
pub struct EuclideanSpace {
    dim: usize,
}

impl EuclideanSpace {
    pub fn new(manifold_dim: usize) -> Result<Self> {
        if manifold_dim < 2 {
            return Err(Error::Usage(
                "euclidean model needs dimension at least 2".into(),
            ));
        }
        Ok(Self { dim: manifold_dim })
    }
}

impl AmbientSpace for EuclideanSpace {
    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn manifold_dim(&self) -> usize {
        self.dim
    }

    fn epsilon(&self) -> f64 {
        0.0
    }

    fn base_point(&self) -> DVector<f64> {
        DVector::zeros(self.dim)
    }

    fn form_diagonal(&self) -> DVector<f64> {
        DVector::from_element(self.dim, 1.0)
    }

    fn project_point(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(x.clone())
    }

    fn project_tangent(&self, _p: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        u.clone()
    }

    fn tangent_basis(&self, _p: &DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.dim)
            .map(|i| {
                let mut e = DVector::zeros(self.dim);
                e[i] = 1.0;
                e
            })
            .collect()
    }

    fn exp_map(&self, p: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        p + u
    }

    fn log_map(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(q - p)
    }

    fn transport_along(
        &self,
        _p: &DVector<f64>,
        _dir: &DVector<f64>,
        _t: f64,
        u: &DVector<f64>,
    ) -> DVector<f64> {
        u.clone()
    }

    fn curvature(
        &self,
        _p: &DVector<f64>,
        _x: &DVector<f64>,
        _y: &DVector<f64>,
        _z: &DVector<f64>,
    ) -> DVector<f64> {
        DVector::zeros(self.dim)
    }

    fn embedding_second_form(
        &self,
        _p: &DVector<f64>,
        _u: &DVector<f64>,
        _w: &DVector<f64>,
    ) -> DVector<f64> {
        DVector::zeros(self.dim)
    }

    fn tangent_split(&self) -> Option<TangentSplit> {
        None
    }

    fn ambient_split(&self) -> Option<(Range<usize>, Range<usize>)> {
        None
    }

    fn base_coords(&self, w: &DVector<f64>) -> DVector<f64> {
        w.clone()
    }

    fn from_base_coords(&self, c: &DVector<f64>) -> DVector<f64> {
        c.clone()
    }

    fn first_conjugate_radius(&self) -> f64 {
        f64::INFINITY
    }

    fn root_data(&self, _p: &DVector<f64>, v: &DVector<f64>) -> Result<RootData> {
        let n = v.norm();
        if n < 1e-14 {
            return Err(zero_direction_error());
        }
        // Flat space: the whole tangent space is abelian and no curvature
        // eigenvalue is nonzero, so the root set is empty.
        let mut candidates = vec![v / n];
        candidates.extend(self.tangent_basis(&self.base_point()));
        let abelian = linalg::orthonormalize(&candidates, |a, b| a.dot(b), 1e-8);
        debug_assert_eq!(abelian.len(), self.dim);
        Ok(RootData {
            epsilon: 0.0,
            abelian,
            roots: Vec::new(),
        })
    }

    fn holonomy_rotations(&self, _count: usize, _seed: u64) -> Vec<DMatrix<f64>> {
        Vec::new()
    }
}

// ---------------------------------------------------------------------------
// Product models
// ---------------------------------------------------------------------------

/// One factor of a product model: a unit sphere (`sign = +1`) or the upper
/// hyperboloid sheet (`sign = -1`), occupying a block of ambient
/// coordinates. For the hyperboloid the first coordinate of the block is
/// timelike.
#[derive(Debug, Clone, Copy)]
struct Factor {
    sign: f64,
    start: usize,
    len: usize,
}

impl Factor {
    fn seg(&self, v: &DVector<f64>) -> DVector<f64> {
        v.rows(self.start, self.len).into_owned()
    }

    fn put(&self, out: &mut DVector<f64>, seg: &DVector<f64>) {
        out.rows_mut(self.start, self.len).copy_from(seg);
    }

    /// Factor bilinear form on coordinate segments.
    fn form(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let dot = u.dot(w);
        if self.sign > 0.0 {
            dot
        } else {
            dot - 2.0 * u[0] * w[0]
        }
    }

    fn norm(&self, u: &DVector<f64>) -> f64 {
        self.form(u, u).max(0.0).sqrt()
    }

    fn base(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.len);
        e[0] = 1.0;
        e
    }

    fn project_point(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.sign > 0.0 {
            let n = x.norm();
            if n < 1e-8 {
                return Err(Error::Numeric(
                    "cannot renormalize a vanishing sphere-factor point".into(),
                ));
            }
            Ok(x / n)
        } else {
            let q = -self.form(x, x);
            if q <= 0.0 || x[0] <= 0.0 {
                return Err(Error::Numeric(
                    "point left the hyperboloid sheet".into(),
                ));
            }
            Ok(x / q.sqrt())
        }
    }

    fn project_tangent(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        u - x * (self.sign * self.form(u, x))
    }

    fn exp(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let n = self.norm(u);
        if n < 1e-300 {
            return x.clone();
        }
        let uh = u / n;
        if self.sign > 0.0 {
            x * n.cos() + uh * n.sin()
        } else {
            x * n.cosh() + uh * n.sinh()
        }
    }

    fn log(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        let d = y - x;
        if self.sign > 0.0 {
            let c = x.dot(y).clamp(-1.0, 1.0);
            // Chordal form of the angle is accurate near coincidence.
            let theta = if c >= 0.0 {
                2.0 * (0.5 * d.norm()).asin()
            } else {
                c.acos()
            };
            if theta > std::f64::consts::PI - CUT_LOCUS_TOL {
                return Err(Error::CutLocus { angle: theta });
            }
            let dir = &d - x * d.dot(x);
            let n = dir.norm();
            if n < 1e-300 {
                return Ok(DVector::zeros(self.len));
            }
            Ok(dir * (theta / n))
        } else {
            // chord^2 = 2(cosh θ − 1), so θ = 2 asinh(chord/2) without
            // cancellation near coincidence.
            let chord2 = self.form(&d, &d).max(0.0);
            let theta = 2.0 * (0.5 * chord2.sqrt()).asinh();
            let dir = self.project_tangent(x, &d);
            let n = self.norm(&dir);
            if n < 1e-300 {
                return Ok(DVector::zeros(self.len));
            }
            Ok(dir * (theta / n))
        }
    }

    /// Transport along `s -> exp_x(s dir)` from `s = 0` to `s = t`.
    fn transport(
        &self,
        x: &DVector<f64>,
        dir: &DVector<f64>,
        t: f64,
        z: &DVector<f64>,
    ) -> DVector<f64> {
        let n = self.norm(dir);
        let theta = t * n;
        if theta.abs() < 1e-300 {
            return z.clone();
        }
        let uh = dir / n;
        let a = self.form(z, &uh);
        if self.sign > 0.0 {
            z + (&uh * (theta.cos() - 1.0) - x * theta.sin()) * a
        } else {
            z + (&uh * (theta.cosh() - 1.0) + x * theta.sinh()) * a
        }
    }

    /// `R(a, b)c` on the factor: `sign (⟨b,c⟩a − ⟨a,c⟩b)`.
    fn curvature(&self, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
        (a * self.form(b, c) - b * self.form(a, c)) * self.sign
    }

    fn second_form(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        x * (-self.sign * self.form(u, w))
    }

    /// Orthonormal basis of the factor tangent space at `x`.
    fn tangent_basis(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut candidates = Vec::with_capacity(self.len);
        for i in 0..self.len {
            let mut e = DVector::zeros(self.len);
            e[i] = 1.0;
            candidates.push(self.project_tangent(x, &e));
        }
        let basis = linalg::orthonormalize(&candidates, |a, b| self.form(a, b), 1e-8);
        debug_assert_eq!(basis.len(), self.len - 1);
        basis
    }

    /// Deterministic unit direction for a vanishing factor component: the
    /// lowest-index coordinate direction with a substantial tangent part.
    fn fallback_direction(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        for i in 0..self.len {
            let mut e = DVector::zeros(self.len);
            e[i] = 1.0;
            let t = self.project_tangent(x, &e);
            let n = self.norm(&t);
            if n >= 0.5 {
                return Ok(t / n);
            }
        }
        Err(Error::Numeric(
            "no coordinate direction projects onto the factor tangent space".into(),
        ))
    }
}

/// Product of two constant-curvature factors of a common curvature sign.
#[derive(Debug, Clone)]
pub struct ProductSpace {
    factors: [Factor; 2],
    epsilon: f64,
    label: &'static str,
}

impl ProductSpace {
    /// `S^p(1) x S^q(1)`.
    pub fn spheres(p: usize, q: usize) -> Result<Self> {
        Self::build(p, q, 1.0, "sphere-product")
    }

    /// `H^p(-1) x H^q(-1)` in hyperboloid coordinates.
    pub fn hyperbolic(p: usize, q: usize) -> Result<Self> {
        Self::build(p, q, -1.0, "hyperbolic-product")
    }

    fn build(p: usize, q: usize, sign: f64, label: &'static str) -> Result<Self> {
        if p < 1 || q < 1 {
            return Err(Error::Usage(
                "product factors need dimension at least 1".into(),
            ));
        }
        Ok(Self {
            factors: [
                Factor {
                    sign,
                    start: 0,
                    len: p + 1,
                },
                Factor {
                    sign,
                    start: p + 1,
                    len: q + 1,
                },
            ],
            epsilon: sign,
            label,
        })
    }

    pub fn factor_dims(&self) -> (usize, usize) {
        (self.factors[0].len - 1, self.factors[1].len - 1)
    }

    fn assemble<F>(&self, mut per_factor: F) -> DVector<f64>
    where
        F: FnMut(&Factor) -> DVector<f64>,
    {
        let mut out = DVector::zeros(self.ambient_dim());
        for f in &self.factors {
            let seg = per_factor(f);
            f.put(&mut out, &seg);
        }
        out
    }

    /// Embed a factor tangent segment as an ambient vector.
    fn embed(&self, which: usize, seg: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ambient_dim());
        self.factors[which].put(&mut out, seg);
        out
    }
}

impl AmbientSpace for ProductSpace {
    fn name(&self) -> &'static str {
        self.label
    }

    fn ambient_dim(&self) -> usize {
        self.factors[0].len + self.factors[1].len
    }

    fn manifold_dim(&self) -> usize {
        self.ambient_dim() - 2
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn base_point(&self) -> DVector<f64> {
        self.assemble(|f| f.base())
    }

    fn form_diagonal(&self) -> DVector<f64> {
        let mut d = DVector::from_element(self.ambient_dim(), 1.0);
        if self.epsilon < 0.0 {
            for f in &self.factors {
                d[f.start] = -1.0;
            }
        }
        d
    }

    fn project_point(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.ambient_dim());
        for f in &self.factors {
            let seg = f.project_point(&f.seg(x))?;
            f.put(&mut out, &seg);
        }
        Ok(out)
    }

    fn project_tangent(&self, p: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.assemble(|f| f.project_tangent(&f.seg(p), &f.seg(u)))
    }

    fn tangent_basis(&self, p: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut basis = Vec::with_capacity(self.manifold_dim());
        for (i, f) in self.factors.iter().enumerate() {
            for seg in f.tangent_basis(&f.seg(p)) {
                basis.push(self.embed(i, &seg));
            }
        }
        basis
    }

    fn exp_map(&self, p: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.assemble(|f| f.exp(&f.seg(p), &f.seg(u)))
    }

    fn log_map(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.ambient_dim());
        for f in &self.factors {
            let seg = f.log(&f.seg(p), &f.seg(q))?;
            f.put(&mut out, &seg);
        }
        Ok(out)
    }

    fn transport_along(
        &self,
        p: &DVector<f64>,
        dir: &DVector<f64>,
        t: f64,
        u: &DVector<f64>,
    ) -> DVector<f64> {
        self.assemble(|f| f.transport(&f.seg(p), &f.seg(dir), t, &f.seg(u)))
    }

    fn curvature(
        &self,
        _p: &DVector<f64>,
        x: &DVector<f64>,
        y: &DVector<f64>,
        z: &DVector<f64>,
    ) -> DVector<f64> {
        self.assemble(|f| f.curvature(&f.seg(x), &f.seg(y), &f.seg(z)))
    }

    fn embedding_second_form(
        &self,
        p: &DVector<f64>,
        u: &DVector<f64>,
        w: &DVector<f64>,
    ) -> DVector<f64> {
        self.assemble(|f| f.second_form(&f.seg(p), &f.seg(u), &f.seg(w)))
    }

    fn tangent_split(&self) -> Option<TangentSplit> {
        let (p, q) = self.factor_dims();
        Some(TangentSplit {
            first: 0..p,
            second: p..p + q,
        })
    }

    fn ambient_split(&self) -> Option<(Range<usize>, Range<usize>)> {
        let f = &self.factors;
        Some((
            f[0].start..f[0].start + f[0].len,
            f[1].start..f[1].start + f[1].len,
        ))
    }

    fn base_coords(&self, w: &DVector<f64>) -> DVector<f64> {
        let (p, q) = self.factor_dims();
        let mut c = DVector::zeros(p + q);
        for i in 0..p {
            c[i] = w[self.factors[0].start + 1 + i];
        }
        for i in 0..q {
            c[p + i] = w[self.factors[1].start + 1 + i];
        }
        c
    }

    fn from_base_coords(&self, c: &DVector<f64>) -> DVector<f64> {
        let (p, q) = self.factor_dims();
        let mut w = DVector::zeros(self.ambient_dim());
        for i in 0..p {
            w[self.factors[0].start + 1 + i] = c[i];
        }
        for i in 0..q {
            w[self.factors[1].start + 1 + i] = c[p + i];
        }
        w
    }

    fn first_conjugate_radius(&self) -> f64 {
        if self.epsilon > 0.0 {
            std::f64::consts::PI
        } else {
            f64::INFINITY
        }
    }

    fn root_data(&self, p: &DVector<f64>, v: &DVector<f64>) -> Result<RootData> {
        let segs = [self.factors[0].seg(v), self.factors[1].seg(v)];
        let pts = [self.factors[0].seg(p), self.factors[1].seg(p)];
        let norms = [
            self.factors[0].norm(&segs[0]),
            self.factors[1].norm(&segs[1]),
        ];
        let total = (norms[0] * norms[0] + norms[1] * norms[1]).sqrt();
        if total < 1e-14 {
            return Err(zero_direction_error());
        }

        // Unit directions per factor; a vanishing component is completed by
        // the deterministic coordinate tie-break so that a_v stays
        // two-dimensional.
        let mut units = Vec::with_capacity(2);
        for i in 0..2 {
            let seg = if norms[i] > 1e-13 {
                &segs[i] / norms[i]
            } else {
                self.factors[i].fallback_direction(&pts[i])?
            };
            units.push(self.embed(i, &seg));
        }

        let a1 = (&units[0] * norms[0] + &units[1] * norms[1]) / total;
        let a2 = (&units[0] * (-norms[1]) + &units[1] * norms[0]) / total;

        let mut roots = Vec::new();
        for i in 0..2 {
            let factor = &self.factors[i];
            if factor.len < 3 {
                continue; // a circle or line factor contributes no root space
            }
            let unit_seg = factor.seg(&units[i]);
            let mut candidates = Vec::with_capacity(factor.len);
            for seg in factor.tangent_basis(&pts[i]) {
                candidates.push(&seg - &unit_seg * factor.form(&seg, &unit_seg));
            }
            let basis_segs = linalg::orthonormalize(&candidates, |a, b| factor.form(a, b), 1e-8);
            let basis: Vec<_> = basis_segs.iter().map(|s| self.embed(i, s)).collect();
            roots.push(RestrictedRoot {
                functional: units[i].clone(),
                value: norms[i],
                multiplicity: basis.len(),
                basis,
            });
        }

        Ok(RootData {
            epsilon: self.epsilon,
            abelian: vec![a1, a2],
            roots,
        })
    }

    fn holonomy_rotations(&self, count: usize, seed: u64) -> Vec<DMatrix<f64>> {
        let (p, q) = self.factor_dims();
        let n = p + q;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let mut m = DMatrix::identity(n, n);
                for (start, len) in [(0usize, p), (p, q)] {
                    let block = random_rotation(len, &mut rng);
                    m.view_mut((start, start), (len, len)).copy_from(&block);
                }
                m
            })
            .collect()
    }
}

/// Haar-ish random rotation from the QR factorization of a Gaussian matrix.
fn random_rotation(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::identity(0, 0);
    }
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    if q.determinant() < 0.0 {
        let flipped = -q.column(0).into_owned();
        q.set_column(0, &flipped);
    }
    q
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn sample_models() -> Vec<Box<dyn AmbientSpace>> {
        vec![
            Box::new(EuclideanSpace::new(3).unwrap()),
            Box::new(ProductSpace::spheres(2, 2).unwrap()),
            Box::new(ProductSpace::hyperbolic(2, 2).unwrap()),
            Box::new(ProductSpace::spheres(3, 2).unwrap()),
        ]
    }

    fn random_point(model: &dyn AmbientSpace, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let u = random_tangent(model, &model.base_point(), rng, 0.7);
        model.exp_map(&model.base_point(), &u)
    }

    fn random_tangent(
        model: &dyn AmbientSpace,
        p: &DVector<f64>,
        rng: &mut ChaCha8Rng,
        scale: f64,
    ) -> DVector<f64> {
        let raw = DVector::from_fn(model.ambient_dim(), |_, _| gaussian(rng));
        model.project_tangent(p, &raw) * scale
    }

    #[test]
    fn points_satisfy_embedding_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in sample_models() {
            for _ in 0..20 {
                let p = random_point(model.as_ref(), &mut rng);
                let back = model.project_point(&p).unwrap();
                assert_relative_eq!((&p - &back).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn exp_log_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in sample_models() {
            for _ in 0..30 {
                let p = random_point(model.as_ref(), &mut rng);
                let u = random_tangent(model.as_ref(), &p, &mut rng, 0.5);
                let q = model.exp_map(&p, &u);
                let back = model.log_map(&p, &q).unwrap();
                assert!(
                    (&back - &u).norm() < 1e-10,
                    "{}: log(exp(u)) != u, residual {}",
                    model.name(),
                    (&back - &u).norm()
                );
                let q2 = model.exp_map(&p, &back);
                assert!((&q2 - &q).norm() < 1e-11 * (1.0 + q.norm()));
            }
        }
    }

    #[test]
    fn transport_is_isometric_and_trivial_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for model in sample_models() {
            for _ in 0..20 {
                let p = random_point(model.as_ref(), &mut rng);
                let dir = random_tangent(model.as_ref(), &p, &mut rng, 1.0);
                let a = random_tangent(model.as_ref(), &p, &mut rng, 1.0);
                let b = random_tangent(model.as_ref(), &p, &mut rng, 1.0);
                let t = 0.9;
                let q = model.exp_map(&p, &(&dir * t));
                let ta = model.transport_along(&p, &dir, t, &a);
                let tb = model.transport_along(&p, &dir, t, &b);
                // lands in the right tangent space
                let residual = (&ta - model.project_tangent(&q, &ta)).norm();
                let scale = 1.0 + ta.norm() * q.norm() * q.norm();
                assert!(residual < 1e-12 * scale, "not tangent at target: {residual}");
                assert_relative_eq!(
                    model.inner(&q, &ta, &tb),
                    model.inner(&p, &a, &b),
                    epsilon = 1e-10
                );
                let id = model.transport_along(&p, &dir, 0.0, &a);
                assert_relative_eq!((&id - &a).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn transport_inverts_along_reversed_geodesic() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for model in sample_models() {
            for _ in 0..10 {
                let p = random_point(model.as_ref(), &mut rng);
                let q = random_point(model.as_ref(), &mut rng);
                let a = random_tangent(model.as_ref(), &p, &mut rng, 1.0);
                let fwd = model.transport(&p, &q, &a).unwrap();
                let back = model.transport(&q, &p, &fwd).unwrap();
                assert!((&back - &a).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn geodesics_are_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for model in sample_models() {
            for _ in 0..10 {
                let p = random_point(model.as_ref(), &mut rng);
                let w = random_tangent(model.as_ref(), &p, &mut rng, 0.6);
                let (s, t) = (0.4, 0.35);
                let mid = model.exp_map(&p, &(&w * s));
                let vel = model.transport_along(&p, &w, s, &w);
                let via = model.exp_map(&mid, &(&vel * t));
                let direct = model.exp_map(&p, &(&w * (s + t)));
                assert!((&via - &direct).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn log_rejects_antipodal_factor() {
        let model = ProductSpace::spheres(2, 2).unwrap();
        let p = model.base_point();
        let mut q = p.clone();
        q[0] = -1.0; // antipode on the first factor
        match model.log_map(&p, &q) {
            Err(Error::CutLocus { angle }) => assert!((angle - PI).abs() < 1e-9),
            other => panic!("expected cut-locus rejection, got {other:?}"),
        }
    }

    #[test]
    fn octant_loop_rotates_by_quarter_turn() {
        // Transport around the spherical octant (e1 -> e2 -> e3 -> e1 by
        // quarter great circles) rotates the first-factor tangent plane by
        // pi/2; the second factor never moves.
        let model = ProductSpace::spheres(2, 2).unwrap();
        let p = model.base_point(); // first factor at e1
        let e = |i: usize| {
            let mut v = DVector::zeros(model.ambient_dim());
            v[i] = 1.0;
            v
        };
        let leg = |x: &DVector<f64>, to: usize, v: &DVector<f64>| {
            let dir = e(to) * FRAC_PI_2;
            (
                model.exp_map(x, &dir),
                model.transport_along(x, &dir, 1.0, v),
            )
        };
        let v0 = e(2); // e3 direction on the first factor
        let (p1, v1) = leg(&p, 1, &v0);
        let (p2, v2) = {
            let dir = model.project_tangent(&p1, &e(2)) * FRAC_PI_2;
            (
                model.exp_map(&p1, &dir),
                model.transport_along(&p1, &dir, 1.0, &v1),
            )
        };
        let (p3, v3) = {
            let dir = model.project_tangent(&p2, &e(0)) * FRAC_PI_2;
            (
                model.exp_map(&p2, &dir),
                model.transport_along(&p2, &dir, 1.0, &v2),
            )
        };
        assert!((&p3 - &p).norm() < 1e-12, "loop did not close");
        assert!((&v3 - &(e(1) * -1.0)).norm() < 1e-12, "expected e3 -> -e2");
    }

    #[test]
    fn curvature_matches_constant_sign_blocks() {
        for (model, sign) in [
            (ProductSpace::spheres(2, 2).unwrap(), 1.0),
            (ProductSpace::hyperbolic(2, 2).unwrap(), -1.0),
        ] {
            let p = model.base_point();
            let basis = model.tangent_basis(&p);
            // sectional curvature within a factor is sign, across factors 0
            let k = |x: &DVector<f64>, y: &DVector<f64>| {
                model.inner(&p, &model.curvature(&p, x, y, y), x)
            };
            assert_relative_eq!(k(&basis[0], &basis[1]), sign, epsilon = 1e-12);
            assert_relative_eq!(k(&basis[2], &basis[3]), sign, epsilon = 1e-12);
            assert_relative_eq!(k(&basis[0], &basis[2]), 0.0, epsilon = 1e-12);
            assert_relative_eq!(k(&basis[1], &basis[3]), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn root_data_decomposes_tangent_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for model in sample_models() {
            let p = random_point(model.as_ref(), &mut rng);
            let v = random_tangent(model.as_ref(), &p, &mut rng, 1.0);
            let data = model.root_data(&p, &v).unwrap();
            assert!(data.orthonormality_residual(model.as_ref(), &p) < 1e-10);
            let residual = data.eigen_identity_residual(model.as_ref(), &p, 10, 99);
            assert!(
                residual < 1e-10,
                "{}: eigen identity residual {residual}",
                model.name()
            );
            // first abelian vector points along v
            let vn = model.norm(&p, &v);
            assert!((&data.abelian[0] - &(&v / vn)).norm() < 1e-12);
        }
    }

    #[test]
    fn root_multiplicities_follow_factor_dimensions() {
        let model = ProductSpace::spheres(3, 2).unwrap();
        let p = model.base_point();
        let theta = PI / 3.0;
        let split = model.tangent_split().unwrap();
        let mut c = DVector::zeros(model.manifold_dim());
        c[split.first.start] = theta.cos();
        c[split.second.start] = theta.sin();
        let v = model.from_base_coords(&c);
        let data = model.root_data(&p, &v).unwrap();
        assert_eq!(data.rank(), 2);
        let mut mults: Vec<_> = data.roots.iter().map(|r| r.multiplicity).collect();
        mults.sort_unstable();
        assert_eq!(mults, vec![1, 2]);
        // root values are the factor components of v
        let mut values: Vec<_> = data.roots.iter().map(|r| r.value).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(values[0], theta.cos(), epsilon = 1e-12);
        assert_relative_eq!(values[1], theta.sin(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_direction_uses_coordinate_tie_break() {
        let model = ProductSpace::spheres(2, 2).unwrap();
        let p = model.base_point();
        // direction entirely inside the first factor
        let mut c = DVector::zeros(model.manifold_dim());
        c[0] = 1.0;
        let v = model.from_base_coords(&c);
        let data = model.root_data(&p, &v).unwrap();
        assert_eq!(data.rank(), 2);
        assert_eq!(data.roots.len(), 2);
        let second = data
            .roots
            .iter()
            .find(|r| r.value.abs() < 1e-14)
            .expect("vanishing root value for the empty factor");
        assert_eq!(second.multiplicity, 1);
        assert!(data.orthonormality_residual(&model, &p) < 1e-10);
        assert!(data.eigen_identity_residual(&model, &p, 10, 3) < 1e-10);
    }

    #[test]
    fn euclidean_root_data_is_flat() {
        let model = EuclideanSpace::new(4).unwrap();
        let p = model.base_point();
        let v = DVector::from_vec(vec![0.3, -0.2, 0.9, 0.1]);
        let data = model.root_data(&p, &v).unwrap();
        assert_eq!(data.epsilon, 0.0);
        assert!(data.roots.is_empty());
        assert_eq!(data.rank(), 4);
    }

    #[test]
    fn abelian_plane_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for model in [
            ProductSpace::spheres(2, 2).unwrap(),
            ProductSpace::hyperbolic(2, 2).unwrap(),
        ] {
            let p = random_point(&model, &mut rng);
            let v = random_tangent(&model, &p, &mut rng, 1.0);
            let data = model.root_data(&p, &v).unwrap();
            let r = model.curvature(&p, &data.abelian[0], &data.abelian[1], &data.abelian[1]);
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn holonomy_rotations_are_block_orthogonal() {
        let model = ProductSpace::spheres(2, 2).unwrap();
        let rotations = model.holonomy_rotations(4, 5);
        assert_eq!(rotations.len(), 4);
        for m in &rotations {
            let gram = m.transpose() * m;
            assert!((gram - DMatrix::identity(4, 4)).norm() < 1e-12);
            // off-diagonal factor blocks stay zero
            assert_eq!(m[(0, 2)], 0.0);
            assert_eq!(m[(3, 1)], 0.0);
        }
    }

    #[test]
    fn base_coords_is_an_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for model in sample_models() {
            let p0 = model.base_point();
            let u = random_tangent(model.as_ref(), &p0, &mut rng, 1.0);
            let w = random_tangent(model.as_ref(), &p0, &mut rng, 1.0);
            let cu = model.base_coords(&u);
            let cw = model.base_coords(&w);
            assert_eq!(cu.len(), model.manifold_dim());
            assert_relative_eq!(cu.dot(&cw), model.inner(&p0, &u, &w), epsilon = 1e-12);
            let back = model.from_base_coords(&cu);
            assert!((&back - &u).norm() < 1e-14);
        }
    }
}
