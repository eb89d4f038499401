//! Concrete chart families: anisotropic geodesic spheres, anisotropic tubes
//! over a reflective factor, tori, radial graphs and varied charts.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;

use super::{AmbientField, Chart, DimKind, GridDim, GridSpec};
use crate::lagrangian::Lagrangian;
use crate::symspace::AmbientSpace;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Unit-sphere patches
// ---------------------------------------------------------------------------

/// Pole-free product-angle parametrization of the unit sphere `S^n(1)` in
/// base coordinates (`n = 2` or `3`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitSpherePatch {
    /// `v(θ, φ) = (cos θ, sin θ cos φ, sin θ sin φ)`, `θ ∈ (0, π)`.
    Polar2,
    /// `v(α, φ₁, φ₂) = (cos α cos φ₁, cos α sin φ₁, sin α cos φ₂, sin α sin φ₂)`,
    /// `α ∈ (0, π/2)`. For a rank-two product split `(2, 2)` the angle `α`
    /// equals the polar angle `θ(v)` between the factors.
    Hopf3,
}

impl UnitSpherePatch {
    pub fn for_sphere_dim(n: usize) -> Result<Self> {
        match n {
            2 => Ok(Self::Polar2),
            3 => Ok(Self::Hopf3),
            _ => Err(Error::Usage(format!(
                "sphere charts are implemented for S^2 and S^3, not S^{n}"
            ))),
        }
    }

    pub fn param_dim(&self) -> usize {
        match self {
            Self::Polar2 => 2,
            Self::Hopf3 => 3,
        }
    }

    /// Structured grid with `res` nodes per direction.
    pub fn grid(&self, res: usize) -> Result<GridSpec> {
        if res < 4 || res % 2 != 0 {
            return Err(Error::Usage(format!(
                "sphere patch resolution must be even and at least 4, got {res}"
            )));
        }
        let dims = match self {
            Self::Polar2 => vec![
                GridDim {
                    len: res,
                    start: 0.0,
                    end: PI,
                    kind: DimKind::Reflected {
                        low_partner: 1,
                        high_partner: 1,
                    },
                },
                GridDim {
                    len: res,
                    start: 0.0,
                    end: 2.0 * PI,
                    kind: DimKind::Periodic,
                },
            ],
            Self::Hopf3 => vec![
                GridDim {
                    len: res,
                    start: 0.0,
                    end: PI / 2.0,
                    kind: DimKind::Reflected {
                        low_partner: 2,
                        high_partner: 1,
                    },
                },
                GridDim {
                    len: res,
                    start: 0.0,
                    end: 2.0 * PI,
                    kind: DimKind::Periodic,
                },
                GridDim {
                    len: res,
                    start: 0.0,
                    end: 2.0 * PI,
                    kind: DimKind::Periodic,
                },
            ],
        };
        Ok(GridSpec { dims })
    }

    /// Unit vector at the given patch parameters.
    pub fn eval(&self, params: &[f64]) -> DVector<f64> {
        match self {
            Self::Polar2 => {
                let (t, p) = (params[0], params[1]);
                DVector::from_vec(vec![t.cos(), t.sin() * p.cos(), t.sin() * p.sin()])
            }
            Self::Hopf3 => {
                let (a, p1, p2) = (params[0], params[1], params[2]);
                DVector::from_vec(vec![
                    a.cos() * p1.cos(),
                    a.cos() * p1.sin(),
                    a.sin() * p2.cos(),
                    a.sin() * p2.sin(),
                ])
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Anisotropic geodesic sphere
// ---------------------------------------------------------------------------

/// Chart of the anisotropic geodesic sphere
/// `f(v) = Exp_{p₀}( r (F(v) v + (grad F)_v) )` over a unit-sphere patch.
pub struct AnisotropicSphereChart {
    model: Arc<dyn AmbientSpace>,
    lagrangian: Arc<dyn Lagrangian>,
    radius: f64,
    patch: UnitSpherePatch,
    grid: GridSpec,
    base: DVector<f64>,
}

impl AnisotropicSphereChart {
    pub fn new(
        model: Arc<dyn AmbientSpace>,
        lagrangian: Arc<dyn Lagrangian>,
        radius: f64,
        res: usize,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Usage(format!("radius must be positive, got {radius}")));
        }
        let n = model.manifold_dim() - 1;
        if lagrangian.sphere_dim() != n {
            return Err(Error::Usage(format!(
                "functional lives on S^{} but the model needs S^{}",
                lagrangian.sphere_dim(),
                n
            )));
        }
        let patch = UnitSpherePatch::for_sphere_dim(n)?;
        let grid = patch.grid(res)?;
        let base = model.base_point();
        Ok(Self {
            model,
            lagrangian,
            radius,
            patch,
            grid,
            base,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn patch(&self) -> UnitSpherePatch {
        self.patch
    }

    /// Same chart at a different radius (anisotropic parallel surface).
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Usage(format!("radius must be positive, got {radius}")));
        }
        Ok(Self {
            model: self.model.clone(),
            lagrangian: self.lagrangian.clone(),
            radius,
            patch: self.patch,
            grid: self.grid.clone(),
            base: self.base.clone(),
        })
    }

    /// `ĥf(v) = r (F(v) v + (grad F)_v)` in ambient coordinates at `p₀`.
    fn spoke(&self, params: &[f64]) -> Result<DVector<f64>> {
        let v = self.patch.eval(params);
        let f = self.lagrangian.value(&v)?;
        let grad = self.lagrangian.sphere_gradient(&v)?;
        let hf = (v * f + grad) * self.radius;
        Ok(self.model.from_base_coords(&hf))
    }
}

impl Chart for AnisotropicSphereChart {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn eval(&self, params: &[f64]) -> Result<DVector<f64>> {
        let spoke = self.spoke(params)?;
        Ok(self.model.exp_map(&self.base, &spoke))
    }

    fn outward_hint(&self, params: &[f64], _point: &DVector<f64>) -> Result<DVector<f64>> {
        // Endpoint velocity of the radial geodesic: positively proportional
        // to ξ_F, hence ⟨ξ, hint⟩ = F(ν) ‖spoke‖ > 0.
        let spoke = self.spoke(params)?;
        Ok(self.model.transport_along(&self.base, &spoke, 1.0, &spoke))
    }

    fn describe(&self) -> String {
        format!(
            "anisotropic geodesic sphere: model={}, family={}, r={}, patch={:?}",
            self.model.name(),
            self.lagrangian.family(),
            self.radius,
            self.patch
        )
    }
}

// ---------------------------------------------------------------------------
// Anisotropic tube over a reflective factor
// ---------------------------------------------------------------------------

/// Chart of the anisotropic tube
/// `f(v) = exp_{π(v)}( r (F̃(v) v + (grad F_{π(v)})_v) )`
/// over the unit normal bundle of the reflective factor `S² × {q₀}` inside
/// the rank-two sphere product. Parameters are `(θ_b, φ_b, ψ)`: polar
/// coordinates of the footpoint on the factor and the angle of the unit
/// normal in the second-factor tangent plane.
pub struct TubeChart {
    model: Arc<dyn AmbientSpace>,
    lagrangian: Arc<dyn Lagrangian>,
    radius: f64,
    grid: GridSpec,
    /// Ambient coordinate ranges of the two factors.
    blocks: (std::ops::Range<usize>, std::ops::Range<usize>),
}

impl TubeChart {
    pub fn new(
        model: Arc<dyn AmbientSpace>,
        lagrangian: Arc<dyn Lagrangian>,
        radius: f64,
        res_base: usize,
        res_fiber: usize,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Usage(format!("radius must be positive, got {radius}")));
        }
        if model.epsilon() != 1.0 {
            return Err(Error::Usage(
                "tube charts require the compact sphere-product model".into(),
            ));
        }
        let blocks = model
            .ambient_split()
            .ok_or_else(|| Error::Usage("tube charts require a product model".into()))?;
        if blocks.0.len() != 3 || blocks.1.len() != 3 {
            return Err(Error::Usage(
                "tube charts are implemented over S^2 x {q0} in S^2 x S^2".into(),
            ));
        }
        if lagrangian.sphere_dim() + 1 != model.manifold_dim() {
            return Err(Error::Usage(format!(
                "functional lives on S^{} but the model needs S^{}",
                lagrangian.sphere_dim(),
                model.manifold_dim() - 1
            )));
        }
        if res_base < 4 || res_base % 2 != 0 || res_fiber < 4 {
            return Err(Error::Usage(format!(
                "tube resolution must be even >= 4 on the base and >= 4 on the fiber, \
                 got ({res_base}, {res_fiber})"
            )));
        }
        let grid = GridSpec {
            dims: vec![
                GridDim {
                    len: res_base,
                    start: 0.0,
                    end: PI,
                    kind: DimKind::Reflected {
                        low_partner: 1,
                        high_partner: 1,
                    },
                },
                GridDim {
                    len: res_base,
                    start: 0.0,
                    end: 2.0 * PI,
                    kind: DimKind::Periodic,
                },
                GridDim {
                    len: res_fiber,
                    start: 0.0,
                    end: 2.0 * PI,
                    kind: DimKind::Periodic,
                },
            ],
        };
        Ok(Self {
            model,
            lagrangian,
            radius,
            grid,
            blocks,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Same chart at a different radius (anisotropic parallel tube).
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Usage(format!("radius must be positive, got {radius}")));
        }
        Ok(Self {
            model: self.model.clone(),
            lagrangian: self.lagrangian.clone(),
            radius,
            grid: self.grid.clone(),
            blocks: self.blocks.clone(),
        })
    }

    /// Footpoint on the factor and the unit normal there, exposed for the
    /// closed-form spectrum evaluation which needs the restricted-root data
    /// at the foot of each spoke.
    pub fn footpoint_and_normal(&self, params: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        let (foot, v, _) = self.fibre_data(params)?;
        Ok((foot, v))
    }

    /// Footpoint on the factor, unit normal at it, and the scaled spoke
    /// `r (F̃(v) v + grad)` in the ambient tangent space at the footpoint.
    fn fibre_data(&self, params: &[f64]) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let (tb, pb, psi) = (params[0], params[1], params[2]);
        let dim = self.model.ambient_dim();
        let base = self.model.base_point();
        let mut foot = base.clone();
        foot[self.blocks.0.start] = tb.cos();
        foot[self.blocks.0.start + 1] = tb.sin() * pb.cos();
        foot[self.blocks.0.start + 2] = tb.sin() * pb.sin();
        let foot = self.model.project_point(&foot)?;

        // Unit normal: tangent to the second factor at q0.
        let mut v = DVector::zeros(dim);
        v[self.blocks.1.start + 1] = psi.cos();
        v[self.blocks.1.start + 2] = psi.sin();

        // Pull the normal to the base point, evaluate the functional there,
        // and push the gradient back to the footpoint.
        let v_base = self.model.base_coords(&self.model.transport_to_base(&foot, &v)?);
        let f = self.lagrangian.value(&v_base)?;
        let grad = self.lagrangian.sphere_gradient(&v_base)?;
        let grad_at_foot = self
            .model
            .transport_from_base(&foot, &self.model.from_base_coords(&grad))?;
        let spoke = (v.clone() * f + grad_at_foot) * self.radius;
        Ok((foot, v, spoke))
    }
}

impl Chart for TubeChart {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn eval(&self, params: &[f64]) -> Result<DVector<f64>> {
        let (foot, _, spoke) = self.fibre_data(params)?;
        Ok(self.model.exp_map(&foot, &spoke))
    }

    fn outward_hint(&self, params: &[f64], _point: &DVector<f64>) -> Result<DVector<f64>> {
        let (foot, _, spoke) = self.fibre_data(params)?;
        Ok(self.model.transport_along(&foot, &spoke, 1.0, &spoke))
    }

    fn describe(&self) -> String {
        format!(
            "anisotropic tube over the first factor: model={}, family={}, r={}",
            self.model.name(),
            self.lagrangian.family(),
            self.radius
        )
    }
}

// ---------------------------------------------------------------------------
// Torus of revolution in R^3
// ---------------------------------------------------------------------------

/// Standard torus `((R + ρ cos w) cos u, (R + ρ cos w) sin u, ρ sin w)`.
pub struct TorusChart {
    big_radius: f64,
    small_radius: f64,
    grid: GridSpec,
}

impl TorusChart {
    pub fn new(big_radius: f64, small_radius: f64, res_u: usize, res_w: usize) -> Result<Self> {
        if !(big_radius > small_radius && small_radius > 0.0) {
            return Err(Error::Usage(format!(
                "torus radii must satisfy R > rho > 0, got R={big_radius}, rho={small_radius}"
            )));
        }
        if res_u < 4 || res_w < 4 {
            return Err(Error::Usage("torus resolution must be at least 4".into()));
        }
        let grid = GridSpec {
            dims: vec![
                GridDim {
                    len: res_u,
                    start: 0.0,
                    end: 2.0 * PI,
                    kind: DimKind::Periodic,
                },
                GridDim {
                    len: res_w,
                    start: 0.0,
                    end: 2.0 * PI,
                    kind: DimKind::Periodic,
                },
            ],
        };
        Ok(Self {
            big_radius,
            small_radius,
            grid,
        })
    }
}

impl Chart for TorusChart {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn eval(&self, params: &[f64]) -> Result<DVector<f64>> {
        let (u, w) = (params[0], params[1]);
        let ring = self.big_radius + self.small_radius * w.cos();
        Ok(DVector::from_vec(vec![
            ring * u.cos(),
            ring * u.sin(),
            self.small_radius * w.sin(),
        ]))
    }

    fn outward_hint(&self, params: &[f64], point: &DVector<f64>) -> Result<DVector<f64>> {
        let u = params[0];
        let core = DVector::from_vec(vec![
            self.big_radius * u.cos(),
            self.big_radius * u.sin(),
            0.0,
        ]);
        Ok(point - core)
    }

    fn describe(&self) -> String {
        format!(
            "torus of revolution: R={}, rho={}",
            self.big_radius, self.small_radius
        )
    }
}

// ---------------------------------------------------------------------------
// Radial graph over the round sphere in R^3
// ---------------------------------------------------------------------------

/// Radial graph `f(v) = r (1 + a v₃²) v` over the unit sphere in `R³`.
pub struct GraphOverSphereChart {
    radius: f64,
    bump: f64,
    grid: GridSpec,
}

impl GraphOverSphereChart {
    pub fn new(radius: f64, bump: f64, res: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Usage(format!("radius must be positive, got {radius}")));
        }
        if bump.abs() >= 0.5 {
            return Err(Error::Usage(format!(
                "graph bump amplitude must satisfy |a| < 0.5, got {bump}"
            )));
        }
        let grid = UnitSpherePatch::Polar2.grid(res)?;
        Ok(Self { radius, bump, grid })
    }
}

impl Chart for GraphOverSphereChart {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn eval(&self, params: &[f64]) -> Result<DVector<f64>> {
        let v = UnitSpherePatch::Polar2.eval(params);
        let scale = self.radius * (1.0 + self.bump * v[2] * v[2]);
        Ok(v * scale)
    }

    fn outward_hint(&self, _params: &[f64], point: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(point.clone())
    }

    fn describe(&self) -> String {
        format!("radial graph over S^2: r={}, bump={}", self.radius, self.bump)
    }
}

// ---------------------------------------------------------------------------
// Varied chart
// ---------------------------------------------------------------------------

/// Normal-exponential perturbation of a base chart by an ambient field:
/// `f_t(x) = exp_{f(x)}( t · P_{f(x)}(X(f(x))) )`.
pub struct VariedChart {
    base: Arc<dyn Chart>,
    model: Arc<dyn AmbientSpace>,
    field: AmbientField,
    t: f64,
}

impl VariedChart {
    pub fn new(
        base: Arc<dyn Chart>,
        model: Arc<dyn AmbientSpace>,
        field: AmbientField,
        t: f64,
    ) -> Self {
        Self {
            base,
            model,
            field,
            t,
        }
    }
}

impl Chart for VariedChart {
    fn grid(&self) -> &GridSpec {
        self.base.grid()
    }

    fn eval(&self, params: &[f64]) -> Result<DVector<f64>> {
        let p = self.model.project_point(&self.base.eval(params)?)?;
        let x = self.model.project_tangent(&p, &(self.field)(&p));
        Ok(self.model.exp_map(&p, &(x * self.t)))
    }

    fn outward_hint(&self, params: &[f64], _point: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.model.project_point(&self.base.eval(params)?)?;
        self.base.outward_hint(params, &p)
    }

    fn describe(&self) -> String {
        format!("varied chart at t={}: {}", self.t, self.base.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{AngleProfile, IsotropicConstant};
    use crate::symspace::models::{EuclideanSpace, ProductSpace};
    use approx::assert_relative_eq;

    #[test]
    fn polar_patch_traces_unit_vectors() {
        for patch in [UnitSpherePatch::Polar2, UnitSpherePatch::Hopf3] {
            let grid = patch.grid(6).unwrap();
            for flat in 0..grid.node_count() {
                let v = patch.eval(&grid.params(flat));
                assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn hopf_reflections_identify_antipodal_fibres() {
        // Crossing α = 0 maps to the same point with φ₂ shifted by π;
        // crossing α = π/2 shifts φ₁ by π.
        let p = UnitSpherePatch::Hopf3;
        let a = 0.07;
        let (p1, p2) = (0.9, 2.1);
        let low = p.eval(&[-a, p1, p2]);
        let low_partner = p.eval(&[a, p1, p2 + PI]);
        assert!((low - low_partner).norm() < 1e-14);
        let high = p.eval(&[PI / 2.0 + a, p1, p2]);
        let high_partner = p.eval(&[PI / 2.0 - a, p1 + PI, p2]);
        assert!((high - high_partner).norm() < 1e-14);
    }

    #[test]
    fn isotropic_sphere_chart_is_metric_sphere() {
        let model = Arc::new(ProductSpace::spheres(2, 2).unwrap());
        let iso = Arc::new(IsotropicConstant::new(1.0, 3).unwrap());
        let r = 0.4;
        let chart = AnisotropicSphereChart::new(model.clone(), iso, r, 6).unwrap();
        let base = model.base_point();
        let grid = chart.grid().clone();
        for flat in [0usize, 31, 100, 215] {
            let q = chart.eval(&grid.params(flat)).unwrap();
            let d = model.log_map(&base, &q).unwrap();
            assert_relative_eq!(model.norm(&base, &d), r, epsilon = 1e-12);
        }
    }

    #[test]
    fn tube_chart_stays_at_constant_distance_from_factor() {
        let model = Arc::new(ProductSpace::spheres(2, 2).unwrap());
        let split = model.tangent_split().unwrap();
        let f = Arc::new(AngleProfile::new(vec![1.0, 0.1], split, 3).unwrap());
        let r = 0.4;
        // φ(π/2) = 1 + 0.1 cos(π) = 0.9: the effective tube radius.
        let chart = TubeChart::new(model.clone(), f, r, 6, 6).unwrap();
        let grid = chart.grid().clone();
        for flat in [0usize, 17, 101, 199] {
            let params = grid.params(flat);
            let q = chart.eval(&params).unwrap();
            // Distance to the factor = second-factor angle from q0.
            let qb = model.base_point();
            let block: Vec<f64> = (3..6).map(|i| q[i]).collect();
            let cosang = block[0] * qb[3] + block[1] * qb[4] + block[2] * qb[5];
            let ang = cosang.clamp(-1.0, 1.0).acos();
            assert_relative_eq!(ang, 0.9 * r, epsilon = 1e-12);
        }
    }

    #[test]
    fn varied_chart_at_zero_matches_base() {
        let model: Arc<dyn AmbientSpace> = Arc::new(EuclideanSpace::new(3).unwrap());
        let base: Arc<dyn Chart> = Arc::new(TorusChart::new(1.0, 0.3, 8, 8).unwrap());
        let field: AmbientField = Arc::new(|p: &DVector<f64>| p.clone() * 0.5);
        let varied = VariedChart::new(base.clone(), model, field, 0.0);
        let grid = base.grid().clone();
        for flat in [0usize, 13, 40] {
            let params = grid.params(flat);
            let a = base.eval(&params).unwrap();
            let b = varied.eval(&params).unwrap();
            assert!((a - b).norm() < 1e-15);
        }
    }
}
