//! Anisotropic tubes and geodesic spheres over the product models.
//!
//! A *geodesic sphere* is the image of `v -> exp_p0(r (F(v)v + grad_v F))`
//! over the unit sphere of the base tangent space; a *tube* replaces the
//! single center by a whole product factor `B` and shoots the same spoke
//! from every footpoint along the unit normal bundle of `B`.  This module
//! owns the builders for both, the closed-form spectrum of the anisotropic
//! shape operator and the anisotropic focal radii, and the geometric
//! consistency checks (equifocality, isoparametricity, collapse-rebuild).
//!
//! The closed forms are assembled from the restricted-root data of the
//! ambient model.  With `ξ̄_F = F(v)v + grad_v F` pulled back to the
//! footpoint and `â = α(ξ̄_F)` the root functional value, every eigenvalue
//! is one of two analytic expressions in `y = ε â² r²`:
//!
//! * directions that focalize with the spoke ("vertical" for tubes, all
//!   root directions for spheres): `-dco(y) / (r dsi(y))`,
//! * directions tangent to the base factor ("horizontal"):
//!   `(y / r) dsi(y) / dco(y)`,
//!
//! where `dco`/`dsi` are the even cosine/sinc pair used by the Jacobi
//! propagator.  Both expressions are even in `â`, cover `ε = ±1`, and
//! degenerate limits (`â -> 0`) are reached through the series forms of the
//! scalars rather than through `0 · tan(0)` floating-point accidents.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hypersurface::{
    sample_at, AnisotropicSphereChart, Chart, Immersion, SurfaceSample, TubeChart,
    UnitSpherePatch,
};
use crate::lagrangian::{random_unit_samples, theta_sweep_samples, Lagrangian};
use crate::linalg::merge_multiset;
use crate::symspace::jacobi::{dco_scalar, dsi_scalar};
use crate::symspace::{focal_radii, AmbientSpace, FocalRadius, FocalSample, RootData};

/// Functional values below this threshold are treated as the `α -> 0` limit.
const ROOT_VALUE_TOL: f64 = 1e-9;
/// Merge tolerance for closed-form eigenvalue / radius multisets.
const MERGE_TOL: f64 = 1e-9;

/// Base of a tube: a single point (geodesic sphere) or a whole product
/// factor (reflective submanifold `S^p x {q0}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TubeBase {
    Point,
    ReflectiveFactor,
}

/// Validated description of a tube or a geodesic sphere; the builders and
/// checks all start from one of these.
#[derive(Clone)]
pub struct TubeSpec {
    model: Arc<dyn AmbientSpace>,
    lagrangian: Arc<dyn Lagrangian>,
    base: TubeBase,
    radius: f64,
    resolution: usize,
}

impl std::fmt::Debug for TubeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TubeSpec")
            .field("base", &self.base)
            .field("radius", &self.radius)
            .field("resolution", &self.resolution)
            .field("family", &self.lagrangian.family())
            .finish()
    }
}

impl TubeSpec {
    /// Validate the radius against the conjugate-radius bound and freeze the
    /// construction data.  `resolution` is the node count per chart
    /// direction.
    pub fn new(
        model: Arc<dyn AmbientSpace>,
        lagrangian: Arc<dyn Lagrangian>,
        base: TubeBase,
        radius: f64,
        resolution: usize,
    ) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Usage(format!("radius must be positive, got {radius}")));
        }
        let bound = radius_bound(model.as_ref(), lagrangian.as_ref())?;
        if radius >= bound {
            return Err(Error::RadiusBound { radius, bound });
        }
        let spec = Self {
            model,
            lagrangian,
            base,
            radius,
            resolution,
        };
        // Chart construction validates the model/functional pairing and the
        // resolution; fail now rather than at first use.
        spec.chart()?;
        Ok(spec)
    }

    pub fn model(&self) -> &Arc<dyn AmbientSpace> {
        &self.model
    }

    pub fn lagrangian(&self) -> &Arc<dyn Lagrangian> {
        &self.lagrangian
    }

    pub fn base(&self) -> TubeBase {
        self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    fn sphere_chart(&self) -> Result<AnisotropicSphereChart> {
        AnisotropicSphereChart::new(
            self.model.clone(),
            self.lagrangian.clone(),
            self.radius,
            self.resolution,
        )
    }

    fn tube_chart(&self) -> Result<TubeChart> {
        TubeChart::new(
            self.model.clone(),
            self.lagrangian.clone(),
            self.radius,
            self.resolution,
            self.resolution,
        )
    }

    /// The parametrizing chart for this spec.
    pub fn chart(&self) -> Result<Arc<dyn Chart>> {
        Ok(match self.base {
            TubeBase::Point => Arc::new(self.sphere_chart()?),
            TubeBase::ReflectiveFactor => Arc::new(self.tube_chart()?),
        })
    }

    /// Build and cache the full hypersurface.  For factor bases this also
    /// asserts the two structural facts the construction relies on: the
    /// pulled-back functional is constant on the unit normal bundle, and the
    /// anisotropy spoke is parallel along horizontal lifts.
    pub fn build(&self) -> Result<Immersion> {
        if self.base == TubeBase::ReflectiveFactor {
            let spread = normal_functional_spread(self)?;
            if spread > 1e-12 {
                return Err(Error::Domain(format!(
                    "functional is not constant on the unit normal bundle \
                     (spread {spread:.3e}); the tube construction needs an \
                     invariant integrand"
                )));
            }
            let residual = horizontal_lift_residual(self)?;
            if residual > 1e-6 {
                return Err(Error::Numeric(format!(
                    "anisotropy spoke is not parallel along horizontal lifts \
                     (residual {residual:.3e})"
                )));
            }
        }
        Immersion::build(self.model.as_ref(), self.chart()?, self.lagrangian.as_ref())
    }

    /// The spec describing the anisotropic parallel hypersurface at offset
    /// `t`: same spokes, radius `r + t`.
    pub fn parallel(&self, t: f64) -> Result<TubeSpec> {
        let radius = self.radius + t;
        if !(radius > 0.0) {
            return Err(Error::FocalDegenerate { t });
        }
        Ok(Self {
            model: self.model.clone(),
            lagrangian: self.lagrangian.clone(),
            base: self.base,
            radius,
            resolution: self.resolution,
        })
    }

    /// Build the parallel hypersurface at offset `t`.  Nodes excluded by the
    /// frame-rank guard signal focal degeneracy.
    pub fn parallel_immersion(&self, t: f64) -> Result<Immersion> {
        let shifted = self.parallel(t)?;
        let immersion = Immersion::build(
            shifted.model.as_ref(),
            shifted.chart()?,
            shifted.lagrangian.as_ref(),
        )?;
        if immersion.diagnostics.excluded_nodes > 0 {
            return Err(Error::FocalDegenerate { t });
        }
        Ok(immersion)
    }
}

/// Admissible radius bound `r_M / (2 max_v |F(v)v + grad_v F|)` derived from
/// the first conjugate radius; infinite for flat and non-compact models.
pub fn radius_bound(model: &dyn AmbientSpace, lagrangian: &dyn Lagrangian) -> Result<f64> {
    let conjugate = model.first_conjugate_radius();
    if !conjugate.is_finite() {
        return Ok(f64::INFINITY);
    }
    let n = lagrangian.sphere_dim();
    let mut samples = random_unit_samples(n, 1024, 0x0b0d);
    if let Some(split) = model.tangent_split() {
        samples.extend(theta_sweep_samples(n, &split, 257));
    }
    let mut longest = 0.0f64;
    for v in &samples {
        let f = lagrangian.value(v)?;
        let grad = lagrangian.sphere_gradient(v)?;
        longest = longest.max((f * f + grad.norm_squared()).sqrt());
    }
    if longest <= 0.0 {
        return Err(Error::Domain("anisotropy spoke has zero length".into()));
    }
    Ok(conjugate / (2.0 * longest))
}

/// Spread of the pulled-back functional over the unit normal bundle of the
/// factor; must vanish for the tube construction to be well defined.
fn normal_functional_spread(spec: &TubeSpec) -> Result<f64> {
    let chart = spec.tube_chart()?;
    let model = spec.model.as_ref();
    let lagrangian = spec.lagrangian.as_ref();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &tb in &[0.4, 1.1, 2.2] {
        for k in 0..48 {
            let psi = k as f64 / 48.0 * std::f64::consts::TAU;
            let (foot, v) = chart.footpoint_and_normal(&[tb, 0.9, psi])?;
            let v_base = model.base_coords(&model.transport_to_base(&foot, &v)?);
            let f = lagrangian.value(&v_base)?;
            lo = lo.min(f);
            hi = hi.max(f);
        }
    }
    Ok(hi - lo)
}

/// Covariant-derivative residual of the anisotropy spoke along horizontal
/// lifts of base geodesics (central difference, pulled back to the initial
/// footpoint).  Vanishes identically for invariant functionals.
pub fn horizontal_lift_residual(spec: &TubeSpec) -> Result<f64> {
    if spec.base != TubeBase::ReflectiveFactor {
        return Err(Error::Usage(
            "horizontal-lift check only applies to factor bases".into(),
        ));
    }
    let chart = spec.tube_chart()?;
    let model = spec.model.as_ref();
    let lagrangian = spec.lagrangian.as_ref();
    let blocks = model
        .ambient_split()
        .ok_or_else(|| Error::Usage("tube requires a product model".into()))?;
    let h = 1e-4;

    // Spoke vector at a (footpoint, unit normal) pair, ambient coordinates.
    let spoke = |foot: &DVector<f64>, v: &DVector<f64>| -> Result<DVector<f64>> {
        let v_base = model.base_coords(&model.transport_to_base(foot, v)?);
        let f = lagrangian.value(&v_base)?;
        let grad = lagrangian.sphere_gradient(&v_base)?;
        let grad_here = model.transport_from_base(foot, &model.from_base_coords(&grad))?;
        Ok(v * f + grad_here)
    };

    let mut worst = 0.0f64;
    for &(tb, pb, psi) in &[(0.7, 0.3, 0.5), (1.3, 2.1, 2.4), (2.0, 4.0, 1.1)] {
        let (foot, v) = chart.footpoint_and_normal(&[tb, pb, psi])?;
        // Horizontal directions: tangent to the first factor at the foot.
        let mut dirs = Vec::new();
        for i in blocks.0.clone() {
            let mut e = DVector::zeros(model.ambient_dim());
            e[i] = 1.0;
            let t = model.project_tangent(&foot, &e);
            if t.norm() > 0.5 {
                dirs.push(t.normalize());
            }
        }
        for x in &dirs {
            let mut diff = DVector::zeros(model.ambient_dim());
            for &s in &[h, -h] {
                let foot_s = model.exp_map(&foot, &(x * s));
                let v_s = model.transport_along(&foot, x, s, &v);
                let spoke_s = spoke(&foot_s, &v_s)?;
                // Retrace the geodesic to pull the sample back to `foot`.
                let dir_end = model.transport_along(&foot, x, s, x);
                let pulled = model.transport_along(&foot_s, &dir_end, -s, &spoke_s);
                diff += pulled * s.signum();
            }
            let derivative = diff / (2.0 * h);
            worst = worst.max(derivative.norm());
        }
    }
    Ok(worst)
}

/// Eigenvalue multiset of an operator, as `(value, multiplicity)` pairs in
/// increasing order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub entries: Vec<(f64, usize)>,
}

impl Spectrum {
    /// Eigenvalues repeated by multiplicity, ascending.
    pub fn expanded(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for &(value, mult) in &self.entries {
            out.extend(std::iter::repeat(value).take(mult));
        }
        out
    }

    pub fn dimension(&self) -> usize {
        self.entries.iter().map(|(_, m)| m).sum()
    }
}

/// Eigenvalue of a direction that focalizes with the spoke.
fn focalizing_eigenvalue(y: f64, radius: f64) -> Result<f64> {
    let dsi = dsi_scalar(y);
    if dsi.abs() < 1e-12 {
        return Err(Error::Numeric(
            "spoke length reaches a conjugate point; shape operator blows up".into(),
        ));
    }
    Ok(-dco_scalar(y) / (radius * dsi))
}

/// Eigenvalue of a direction tangent to the base factor.
fn base_tangent_eigenvalue(y: f64, radius: f64) -> Result<f64> {
    let dco = dco_scalar(y);
    if dco.abs() < 1e-12 {
        return Err(Error::Numeric(
            "spoke length reaches a focal point of the base factor".into(),
        ));
    }
    Ok(y / radius * dsi_scalar(y) / dco)
}

/// `ξ̄_F = F(v) v + grad_v F` in ambient coordinates at the given point,
/// together with the root data of `v` there.
fn spoke_and_roots(
    model: &dyn AmbientSpace,
    lagrangian: &dyn Lagrangian,
    point: &DVector<f64>,
    v_ambient: &DVector<f64>,
) -> Result<(DVector<f64>, RootData)> {
    let v_base = model.base_coords(&model.transport_to_base(point, v_ambient)?);
    let f = lagrangian.value(&v_base)?;
    let grad = lagrangian.sphere_gradient(&v_base)?;
    let grad_here = model.transport_from_base(point, &model.from_base_coords(&grad))?;
    let xi_bar = v_ambient * f + grad_here;
    let data = model.root_data(point, v_ambient)?;
    Ok((xi_bar, data))
}

/// Closed-form spectrum of the anisotropic shape operator of the geodesic
/// sphere of radius `r`, at the point reached from unit direction `v` (base
/// tangent coordinates).
pub fn sphere_spectrum(
    model: &dyn AmbientSpace,
    lagrangian: &dyn Lagrangian,
    radius: f64,
    v: &DVector<f64>,
) -> Result<Spectrum> {
    let p0 = model.base_point();
    let v_ambient = model.from_base_coords(v);
    let (xi_bar, data) = spoke_and_roots(model, lagrangian, &p0, &v_ambient)?;
    let eps = data.epsilon;
    let mut entries = Vec::new();
    for root in &data.roots {
        let a = data.root_value(model, root, &xi_bar);
        let y = eps * a * a * radius * radius;
        entries.push((focalizing_eigenvalue(y, radius)?, root.multiplicity));
    }
    if data.rank() > 1 {
        entries.push((-1.0 / radius, data.rank() - 1));
    }
    Ok(Spectrum {
        entries: merge_multiset(entries, MERGE_TOL),
    })
}

/// Closed-form anisotropic focal radii of the geodesic sphere within the
/// given interval, as `(s, multiplicity)` pairs.
pub fn sphere_afr(
    model: &dyn AmbientSpace,
    lagrangian: &dyn Lagrangian,
    radius: f64,
    v: &DVector<f64>,
    interval: (f64, f64),
) -> Result<Vec<(f64, usize)>> {
    let p0 = model.base_point();
    let v_ambient = model.from_base_coords(v);
    let (xi_bar, data) = spoke_and_roots(model, lagrangian, &p0, &v_ambient)?;
    let mut entries = Vec::new();
    for root in &data.roots {
        let a = data.root_value(model, root, &xi_bar).abs();
        push_focal_family(&mut entries, data.epsilon, a, radius, root.multiplicity, interval);
    }
    if data.rank() > 1 {
        push_if_inside(&mut entries, -radius, data.rank() - 1, interval);
    }
    Ok(merge_multiset(entries, MERGE_TOL))
}

/// All members of the focalizing family `{-r + j π / â}` (compact) or the
/// single radius `{-r}` (flat-root or non-compact) inside the interval.
fn push_focal_family(
    entries: &mut Vec<(f64, usize)>,
    epsilon: f64,
    a: f64,
    radius: f64,
    multiplicity: usize,
    interval: (f64, f64),
) {
    if epsilon > 0.0 && a > ROOT_VALUE_TOL {
        let period = std::f64::consts::PI / a;
        let j_lo = ((interval.0 + radius) / period).ceil() as i64;
        let j_hi = ((interval.1 + radius) / period).floor() as i64;
        for j in j_lo..=j_hi {
            entries.push((-radius + j as f64 * period, multiplicity));
        }
    } else {
        push_if_inside(entries, -radius, multiplicity, interval);
    }
}

fn push_if_inside(entries: &mut Vec<(f64, usize)>, s: f64, mult: usize, interval: (f64, f64)) {
    if s >= interval.0 && s <= interval.1 {
        entries.push((s, mult));
    }
}

/// Which ambient factor a tangent vector lives in, judged by its coordinate
/// blocks; `None` when the mass is split between the factors.
fn ambient_factor(
    w: &DVector<f64>,
    blocks: &(std::ops::Range<usize>, std::ops::Range<usize>),
) -> Option<usize> {
    let n1 = w.rows(blocks.0.start, blocks.0.len()).norm();
    let n2 = w.rows(blocks.1.start, blocks.1.len()).norm();
    let total = (n1 * n1 + n2 * n2).sqrt();
    if total == 0.0 {
        return None;
    }
    if n2 / total < 1e-10 {
        Some(1)
    } else if n1 / total < 1e-10 {
        Some(2)
    } else {
        None
    }
}

/// Splits the root data of a tube normal into directions that focalize with
/// the spoke (tangent to the normal sphere of the factor) and directions
/// tangent to the base factor, with the `α = 0` abelian leftovers attached
/// to the base side.
struct TubeRootSplit {
    /// `(â, multiplicity)` of roots whose space is normal to the factor.
    vertical: Vec<(f64, usize)>,
    /// `(â, multiplicity)` of roots (and abelian directions, `â = 0`)
    /// tangent to the factor.
    horizontal: Vec<(f64, usize)>,
}

fn split_tube_roots(
    model: &dyn AmbientSpace,
    data: &RootData,
    xi_bar: &DVector<f64>,
) -> Result<TubeRootSplit> {
    let blocks = model
        .ambient_split()
        .ok_or_else(|| Error::Usage("tube spectra need a product model".into()))?;
    // The chart shoots normals into the second factor, so the base is the
    // first one.
    let mut vertical = Vec::new();
    let mut horizontal = Vec::new();
    for root in &data.roots {
        let support = root
            .basis
            .iter()
            .map(|b| ambient_factor(b, &blocks))
            .collect::<Option<Vec<_>>>()
            .and_then(|tags| {
                if tags.windows(2).all(|w| w[0] == w[1]) {
                    tags.first().copied()
                } else {
                    None
                }
            })
            .ok_or_else(|| {
                Error::Numeric("root space is not aligned with the product splitting".into())
            })?;
        let a = data.root_value(model, root, xi_bar);
        match support {
            1 => horizontal.push((a, root.multiplicity)),
            _ => vertical.push((a, root.multiplicity)),
        }
    }
    // Abelian directions beyond the radial one: tangent to the base factor
    // they contribute the root value 0; normal directions other than the
    // spoke axis would make the base non-reflective.
    for u in data.abelian.iter().skip(1) {
        match ambient_factor(u, &blocks) {
            Some(1) => horizontal.push((0.0, 1)),
            _ => {
                return Err(Error::Numeric(
                    "flat direction normal to the factor; base is not reflective".into(),
                ))
            }
        }
    }
    Ok(TubeRootSplit {
        vertical,
        horizontal,
    })
}

/// Closed-form spectrum of the anisotropic shape operator of the tube of
/// radius `r` over the first product factor, at the point reached from the
/// unit normal `v` (ambient coordinates) based at `foot`.
pub fn tube_spectrum(
    model: &dyn AmbientSpace,
    lagrangian: &dyn Lagrangian,
    radius: f64,
    foot: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<Spectrum> {
    let (xi_bar, data) = spoke_and_roots(model, lagrangian, foot, v)?;
    let split = split_tube_roots(model, &data, &xi_bar)?;
    let eps = data.epsilon;
    let mut entries = Vec::new();
    for (a, mult) in split.vertical {
        let y = eps * a * a * radius * radius;
        entries.push((focalizing_eigenvalue(y, radius)?, mult));
    }
    for (a, mult) in split.horizontal {
        let y = eps * a * a * radius * radius;
        entries.push((base_tangent_eigenvalue(y, radius)?, mult));
    }
    Ok(Spectrum {
        entries: merge_multiset(entries, MERGE_TOL),
    })
}

/// Closed-form anisotropic focal radii of the tube within the interval.
/// Vertical directions focalize on the family `{-r + j π / â}`; horizontal
/// ones on `{-r + (2j+1) π / (2â)}`; flat horizontal directions never do.
pub fn tube_afr(
    model: &dyn AmbientSpace,
    lagrangian: &dyn Lagrangian,
    radius: f64,
    foot: &DVector<f64>,
    v: &DVector<f64>,
    interval: (f64, f64),
) -> Result<Vec<(f64, usize)>> {
    let (xi_bar, data) = spoke_and_roots(model, lagrangian, foot, v)?;
    let split = split_tube_roots(model, &data, &xi_bar)?;
    let mut entries = Vec::new();
    for (a, mult) in split.vertical {
        push_focal_family(&mut entries, data.epsilon, a.abs(), radius, mult, interval);
    }
    for (a, mult) in split.horizontal {
        let a = a.abs();
        if data.epsilon > 0.0 && a > ROOT_VALUE_TOL {
            let half_period = std::f64::consts::PI / (2.0 * a);
            // s = -r + (2j + 1) π / (2â): odd multiples of the half period.
            let k_lo = ((interval.0 + radius) / half_period).ceil() as i64;
            let k_hi = ((interval.1 + radius) / half_period).floor() as i64;
            for k in k_lo..=k_hi {
                if k.rem_euclid(2) == 1 {
                    entries.push((-radius + k as f64 * half_period, mult));
                }
            }
        }
        // Flat horizontal directions (â = 0) never focalize.
    }
    Ok(merge_multiset(entries, MERGE_TOL))
}

/// Closed-form spectrum at a chart node of the spec's hypersurface.
pub fn closed_form_spectrum(spec: &TubeSpec, params: &[f64]) -> Result<Spectrum> {
    match spec.base {
        TubeBase::Point => {
            let n = spec.lagrangian.sphere_dim();
            let v = UnitSpherePatch::for_sphere_dim(n)?.eval(params);
            sphere_spectrum(
                spec.model.as_ref(),
                spec.lagrangian.as_ref(),
                spec.radius,
                &v,
            )
        }
        TubeBase::ReflectiveFactor => {
            let chart = spec.tube_chart()?;
            let (foot, v) = chart.footpoint_and_normal(params)?;
            tube_spectrum(
                spec.model.as_ref(),
                spec.lagrangian.as_ref(),
                spec.radius,
                &foot,
                &v,
            )
        }
    }
}

/// Closed-form anisotropic focal radii at a chart node of the spec's
/// hypersurface.
pub fn closed_form_afr(
    spec: &TubeSpec,
    params: &[f64],
    interval: (f64, f64),
) -> Result<Vec<(f64, usize)>> {
    match spec.base {
        TubeBase::Point => {
            let n = spec.lagrangian.sphere_dim();
            let v = UnitSpherePatch::for_sphere_dim(n)?.eval(params);
            sphere_afr(
                spec.model.as_ref(),
                spec.lagrangian.as_ref(),
                spec.radius,
                &v,
                interval,
            )
        }
        TubeBase::ReflectiveFactor => {
            let chart = spec.tube_chart()?;
            let (foot, v) = chart.footpoint_and_normal(params)?;
            tube_afr(
                spec.model.as_ref(),
                spec.lagrangian.as_ref(),
                spec.radius,
                &foot,
                &v,
                interval,
            )
        }
    }
}

/// Focal-search input assembled from a cached surface sample.
pub fn focal_sample(sample: &SurfaceSample) -> FocalSample {
    FocalSample {
        point: sample.point.clone(),
        frame: sample.frame.clone(),
        a_f: sample.shape_f.clone(),
        xi_f: sample.xi_f.clone(),
    }
}

/// Default focal-search interval: wide enough to contain the collapse radius
/// `-r` and, on compact models, the first couple of positive focal radii.
pub fn default_focal_interval(model: &dyn AmbientSpace, radius: f64) -> (f64, f64) {
    if model.first_conjugate_radius().is_finite() {
        (-radius - 0.5, 4.5)
    } else {
        (-radius - 1.0, 2.0 * radius + 1.0)
    }
}

/// Default offset grid for the isoparametric check: 7 values spanning
/// `[-r/2, r/2]`.
pub fn default_t_grid(radius: f64) -> Vec<f64> {
    (0..7)
        .map(|i| (i as f64 / 6.0 - 0.5) * radius)
        .collect()
}

/// Outcome of the equifocality check: the largest pairwise Hausdorff
/// distance between per-node focal radius sets.
#[derive(Debug, Clone)]
pub struct EquifocalReport {
    pub node_count: usize,
    pub max_hausdorff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Hausdorff distance between two nonempty sets of reals.
fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    let one_sided = |xs: &[f64], ys: &[f64]| {
        xs.iter()
            .map(|x| {
                ys.iter()
                    .map(|y| (x - y).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Check that the numerically found focal radii agree across the surface.
/// `max_nodes` caps how many nodes are sampled (spread by stride).
pub fn check_equifocal(
    spec: &TubeSpec,
    immersion: &Immersion,
    interval: (f64, f64),
    grid_density: usize,
    max_nodes: usize,
    tolerance: f64,
) -> Result<EquifocalReport> {
    let samples = stride_subset(&immersion.samples, max_nodes);
    if samples.len() < 2 {
        return Err(Error::Usage("equifocal check needs at least two nodes".into()));
    }
    let model = spec.model.as_ref();
    let mut radii_sets = Vec::with_capacity(samples.len());
    for sample in &samples {
        let report = focal_radii(model, &focal_sample(sample), interval, grid_density)?;
        if report.radii.is_empty() {
            return Err(Error::Numeric(
                "no focal radii found inside the search interval".into(),
            ));
        }
        radii_sets.push(report.radii.iter().map(|r| r.s).collect::<Vec<_>>());
    }
    let mut max_hausdorff = 0.0f64;
    for i in 0..radii_sets.len() {
        for j in (i + 1)..radii_sets.len() {
            max_hausdorff = max_hausdorff.max(hausdorff(&radii_sets[i], &radii_sets[j]));
        }
    }
    Ok(EquifocalReport {
        node_count: samples.len(),
        max_hausdorff,
        tolerance,
        pass: max_hausdorff <= tolerance,
    })
}

/// Numeric focal radii at one node, for report output.
pub fn node_focal_radii(
    spec: &TubeSpec,
    sample: &SurfaceSample,
    interval: (f64, f64),
    grid_density: usize,
) -> Result<Vec<FocalRadius>> {
    Ok(focal_radii(
        spec.model.as_ref(),
        &focal_sample(sample),
        interval,
        grid_density,
    )?
    .radii)
}

/// Outcome of the isoparametric check: per offset, the spread of the
/// anisotropic mean curvature across the parallel hypersurface.
#[derive(Debug, Clone)]
pub struct IsoparametricReport {
    /// `(t, max H_F - min H_F)` per offset.
    pub offsets: Vec<(f64, f64)>,
    pub max_spread: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Check that every anisotropic parallel hypersurface has constant `H_F`.
/// Nodes are stride-sampled and re-evaluated with the high-order stencil on
/// each parallel chart.
pub fn check_isoparametric(
    spec: &TubeSpec,
    t_grid: &[f64],
    max_nodes: usize,
    tolerance: f64,
) -> Result<IsoparametricReport> {
    if t_grid.is_empty() {
        return Err(Error::Usage("isoparametric check needs a non-empty offset grid".into()));
    }
    let model = spec.model.as_ref();
    let lagrangian = spec.lagrangian.as_ref();
    let mut offsets = Vec::with_capacity(t_grid.len());
    let mut max_spread = 0.0f64;
    for &t in t_grid {
        let shifted = spec.parallel(t)?;
        let chart = shifted.chart()?;
        let grid = chart.grid().clone();
        let flats = stride_indices(grid.node_count(), max_nodes);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut seen = 0usize;
        for flat in flats {
            let params = grid.params(flat);
            match sample_at(model, chart.as_ref(), lagrangian, flat, &params) {
                Ok(sample) => {
                    lo = lo.min(sample.mean_f);
                    hi = hi.max(sample.mean_f);
                    seen += 1;
                }
                Err(Error::Numeric(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        if seen < 2 {
            return Err(Error::FocalDegenerate { t });
        }
        let spread = hi - lo;
        max_spread = max_spread.max(spread);
        offsets.push((t, spread));
    }
    Ok(IsoparametricReport {
        offsets,
        max_spread,
        tolerance,
        pass: max_spread <= tolerance,
    })
}

/// Outcome of the collapse-rebuild roundtrip.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    /// Worst distance from a collapsed point to the detected focal set.
    pub collapse_residual: f64,
    /// Worst distance from an original node to the rebuilt hypersurface
    /// (nearest-node metric).
    pub max_rebuild_distance: f64,
}

/// Collapse the hypersurface along `-collapse_radius ξ_F`, verify the image
/// is the focal submanifold the base claims (a point, or the factor), and
/// rebuild the hypersurface from it.  A collapse radius that is not focal
/// leaves the image spread out and raises `NotFocal`.
pub fn reconstruct_from_focal(
    spec: &TubeSpec,
    immersion: &Immersion,
    collapse_radius: f64,
    max_nodes: usize,
) -> Result<ReconstructionReport> {
    if !(collapse_radius > 0.0) {
        return Err(Error::Usage("collapse radius must be positive".into()));
    }
    let model = spec.model.as_ref();
    let samples = stride_subset(&immersion.samples, max_nodes);
    if samples.is_empty() {
        return Err(Error::Usage("reconstruction needs at least one node".into()));
    }
    let collapsed: Vec<DVector<f64>> = samples
        .iter()
        .map(|s| model.exp_map(&s.point, &(&s.xi_f * (-collapse_radius))))
        .collect();

    // The collapsed image must have lost the spoke direction: compare each
    // point against the focal submanifold predicted by the base type.
    let spread_tol = 1e-5 * (1.0 + collapse_radius);
    let collapse_residual = match spec.base {
        TubeBase::Point => {
            let p0 = model.base_point();
            collapsed.iter().map(|c| (c - &p0).norm()).fold(0.0, f64::max)
        }
        TubeBase::ReflectiveFactor => {
            let blocks = model
                .ambient_split()
                .ok_or_else(|| Error::Usage("tube requires a product model".into()))?;
            let q0 = model.base_point().rows(blocks.1.start, blocks.1.len()).into_owned();
            collapsed
                .iter()
                .map(|c| (c.rows(blocks.1.start, blocks.1.len()) - &q0).norm())
                .fold(0.0, f64::max)
        }
    };
    if collapse_residual > spread_tol {
        return Err(Error::NotFocal(format!(
            "collapse at radius {collapse_radius:.6} leaves residual \
             {collapse_residual:.3e}; no rank loss there"
        )));
    }

    // Rebuild the hypersurface from the detected focal submanifold and
    // measure how far the original nodes are from it.
    let rebuilt = TubeSpec {
        model: spec.model.clone(),
        lagrangian: spec.lagrangian.clone(),
        base: spec.base,
        radius: collapse_radius,
        resolution: spec.resolution,
    }
    .build()?;
    let mut max_rebuild_distance = 0.0f64;
    for sample in &samples {
        let nearest = rebuilt
            .samples
            .iter()
            .map(|r| (&r.point - &sample.point).norm())
            .fold(f64::INFINITY, f64::min);
        max_rebuild_distance = max_rebuild_distance.max(nearest);
    }
    Ok(ReconstructionReport {
        collapse_residual,
        max_rebuild_distance,
    })
}

/// Evenly spread subset of at most `max_nodes` samples.
fn stride_subset(samples: &[SurfaceSample], max_nodes: usize) -> Vec<&SurfaceSample> {
    stride_indices(samples.len(), max_nodes)
        .into_iter()
        .map(|i| &samples[i])
        .collect()
}

fn stride_indices(len: usize, max_nodes: usize) -> Vec<usize> {
    if len == 0 || max_nodes == 0 {
        return Vec::new();
    }
    let stride = (len + max_nodes - 1) / max_nodes;
    (0..len).step_by(stride.max(1)).collect()
}
