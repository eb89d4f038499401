//! Discretized immersed hypersurfaces.
//!
//! A hypersurface is described by a [`Chart`]: an analytic map from a
//! structured parameter grid into an ambient model. Every geometric
//! quantity is evaluated pointwise by differencing the chart along its
//! coordinate directions — a fourth-order inner stencil builds tangent
//! frames and unit normals, a second-order outer stencil differentiates the
//! normal and the transported anisotropy field. From these come the Gauss
//! map `ν = τ^{-1}(ξ)`, the shape operator (sign convention
//! `∇_X ξ = -f_*(AX)`), the anisotropic transversal field
//! `ξ_F = (F∘ν) ξ + W` with `W = τ((grad F)_ν)`, the anisotropic shape
//! operator `A^F X = (F∘ν) A X - ∇_X(f_*^{-1} W)`, and the anisotropic mean
//! curvature in both its trace and divergence forms.

pub mod charts;

pub use charts::{
    AnisotropicSphereChart, GraphOverSphereChart, TorusChart, TubeChart, UnitSpherePatch,
    VariedChart,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::lagrangian::Lagrangian;
use crate::linalg;
use crate::symspace::AmbientSpace;
use crate::{Error, Result};

/// Inner finite-difference step (tangent frames, fourth-order stencil).
pub const INNER_STEP: f64 = 1e-3;
/// Outer finite-difference step (normal-field derivatives, second order).
pub const OUTER_STEP: f64 = 1e-3;
/// Frames with a larger condition number mark a degenerate node.
pub const FRAME_CONDITION_LIMIT: f64 = 1e6;

/// Ambient vector field used for variations, shared across threads.
pub type AmbientField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

// ---------------------------------------------------------------------------
// Parameter grids
// ---------------------------------------------------------------------------

/// Behaviour of one grid direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimKind {
    /// Uniform nodes `start + i h`; wraps with period `end - start`.
    Periodic,
    /// Midpoint nodes `start + (i + 1/2) h` on an interval whose endpoints
    /// are collapse points of the chart. Stepping across an end reflects
    /// the index and shifts the named partner (periodic) dimension by half
    /// its period — used only by grid-data backends; analytic charts are
    /// simply evaluated past the end.
    Reflected {
        low_partner: usize,
        high_partner: usize,
    },
}

#[derive(Debug, Clone)]
pub struct GridDim {
    pub len: usize,
    pub start: f64,
    pub end: f64,
    pub kind: DimKind,
}

impl GridDim {
    pub fn spacing(&self) -> f64 {
        (self.end - self.start) / self.len as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        match self.kind {
            DimKind::Periodic => self.start + self.spacing() * i as f64,
            DimKind::Reflected { .. } => self.start + self.spacing() * (i as f64 + 0.5),
        }
    }

    /// Per-node quadrature weights along this direction.
    ///
    /// Periodic directions use the (spectrally accurate) trapezoid rule. A
    /// reflected direction `(0, L)` is a polar direction: the area element
    /// carries a factor `sin(π u / L)` whose even extension has a corner at
    /// the collapse points, so plain midpoint sums are only second-order
    /// there. Substituting `x = cos(π u / L)` removes the corner; the
    /// midpoint nodes are exactly the Fejér-1 nodes in `x`, so the Fejér-1
    /// weights divided by the sine factor restore spectral accuracy.
    pub fn quad_weights(&self) -> Vec<f64> {
        match self.kind {
            DimKind::Periodic => vec![self.spacing(); self.len],
            DimKind::Reflected { .. } => {
                let span = self.end - self.start;
                let fejer = linalg::fejer1_weights(self.len);
                (0..self.len)
                    .map(|i| {
                        let s = (i as f64 + 0.5) / self.len as f64;
                        span / std::f64::consts::PI * fejer[i] / (std::f64::consts::PI * s).sin()
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub dims: Vec<GridDim>,
}

impl GridSpec {
    pub fn node_count(&self) -> usize {
        self.dims.iter().map(|d| d.len).product()
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// Multi-index of a flat node index (last dimension fastest).
    pub fn indices(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            idx[k] = flat % self.dims[k].len;
            flat /= self.dims[k].len;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (k, d) in self.dims.iter().enumerate() {
            flat = flat * d.len + idx[k];
        }
        flat
    }

    pub fn params(&self, flat: usize) -> Vec<f64> {
        self.indices(flat)
            .iter()
            .zip(&self.dims)
            .map(|(&i, d)| d.node(i))
            .collect()
    }

    /// Quadrature weight of a node: product of the per-dimension weights.
    /// Multiplied by `√g` this is the node's share of the surface measure.
    pub fn node_weight(&self, tables: &[Vec<f64>], flat: usize) -> f64 {
        self.indices(flat)
            .iter()
            .zip(tables)
            .map(|(&i, t)| t[i])
            .product()
    }

    /// Per-dimension quadrature weight tables (see [`GridDim::quad_weights`]).
    pub fn weight_tables(&self) -> Vec<Vec<f64>> {
        self.dims.iter().map(|d| d.quad_weights()).collect()
    }
}

// ---------------------------------------------------------------------------
// Charts
// ---------------------------------------------------------------------------

/// Analytic parametrization of a hypersurface over a structured grid.
///
/// `eval` must be smooth on a neighbourhood of the closed parameter box so
/// that stencils may step slightly past collapse points.
pub trait Chart: Send + Sync {
    fn grid(&self) -> &GridSpec;
    fn eval(&self, params: &[f64]) -> Result<DVector<f64>>;
    /// Ambient direction distinguishing the outward side at this point;
    /// the unit normal is oriented to have positive product with it.
    fn outward_hint(&self, params: &[f64], point: &DVector<f64>) -> Result<DVector<f64>>;
    fn describe(&self) -> String;
}

// ---------------------------------------------------------------------------
// Pointwise evaluation
// ---------------------------------------------------------------------------

/// First-derivative data of the chart at arbitrary parameters.
pub(crate) struct FrameData {
    pub point: DVector<f64>,
    /// Raw chart frame `T_j = ∂f/∂u_j`.
    pub frame: Vec<DVector<f64>>,
    pub gram: DMatrix<f64>,
    pub sqrt_g: f64,
}

pub(crate) fn frame_at(
    model: &dyn AmbientSpace,
    chart: &dyn Chart,
    params: &[f64],
    h: f64,
    order: usize,
) -> Result<FrameData> {
    let n = chart.grid().dim();
    let point = model.project_point(&chart.eval(params)?)?;
    let stencil = linalg::central_stencil(order);
    let mut frame = Vec::with_capacity(n);
    let mut shifted = params.to_vec();
    for j in 0..n {
        let mut d = DVector::zeros(model.ambient_dim());
        for &(k, c) in stencil {
            shifted[j] = params[j] + h * k as f64;
            d += chart.eval(&shifted)? * c;
        }
        shifted[j] = params[j];
        frame.push(model.project_tangent(&point, &(d / h)));
    }
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = model.inner(&point, &frame[i], &frame[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let det = gram.determinant();
    if !(det > 0.0) {
        return Err(Error::Numeric(format!(
            "degenerate tangent frame at {params:?} (det g = {det})"
        )));
    }
    Ok(FrameData {
        point,
        frame,
        gram,
        sqrt_g: det.sqrt(),
    })
}

/// Light pointwise data: enough for energy quadrature.
pub(crate) struct EnergyData {
    pub point: DVector<f64>,
    pub sqrt_g: f64,
    pub xi: DVector<f64>,
    pub f_value: f64,
}

pub(crate) fn energy_data(
    model: &dyn AmbientSpace,
    chart: &dyn Chart,
    lagrangian: &dyn Lagrangian,
    params: &[f64],
    h: f64,
    order: usize,
) -> Result<EnergyData> {
    let frame = frame_at(model, chart, params, h, order)?;
    let xi = unit_normal(model, chart, params, &frame)?;
    let nu = model.base_coords(&model.transport_to_base(&frame.point, &xi)?);
    let f_value = lagrangian.value(&nu)?;
    Ok(EnergyData {
        point: frame.point,
        sqrt_g: frame.sqrt_g,
        xi,
        f_value,
    })
}

/// Frame plus normal-field data: everything needed pointwise to evaluate
/// energies and to difference for curvature operators.
pub(crate) struct PointData {
    pub frame: FrameData,
    pub xi: DVector<f64>,
    pub nu: DVector<f64>,
    pub f_value: f64,
    /// `W = τ((grad F)_ν)`, ambient.
    pub w: DVector<f64>,
    /// Chart components of `W`: `V = f_*^{-1} W`.
    pub v_chart: DVector<f64>,
}

pub(crate) fn point_data(
    model: &dyn AmbientSpace,
    chart: &dyn Chart,
    lagrangian: &dyn Lagrangian,
    params: &[f64],
    h: f64,
    order: usize,
) -> Result<PointData> {
    let frame = frame_at(model, chart, params, h, order)?;
    let xi = unit_normal(model, chart, params, &frame)?;
    let nu = model.base_coords(&model.transport_to_base(&frame.point, &xi)?);
    let f_value = lagrangian.value(&nu)?;
    let grad = lagrangian.sphere_gradient(&nu)?;
    let w = model.transport_from_base(&frame.point, &model.from_base_coords(&grad))?;
    let rhs = DVector::from_iterator(
        frame.frame.len(),
        frame
            .frame
            .iter()
            .map(|t| model.inner(&frame.point, t, &w)),
    );
    let v_chart = linalg::solve_spd(&frame.gram, &rhs)?;
    Ok(PointData {
        frame,
        xi,
        nu,
        f_value,
        w,
        v_chart,
    })
}

/// Unit normal within the model tangent space, oriented along the chart's
/// outward hint.
fn unit_normal(
    model: &dyn AmbientSpace,
    chart: &dyn Chart,
    params: &[f64],
    fd: &FrameData,
) -> Result<DVector<f64>> {
    let n = fd.frame.len();
    let hint = model.project_tangent(&fd.point, &chart.outward_hint(params, &fd.point)?);
    // Project the hint off the tangent frame; this both builds the normal
    // and orients it outward in one step.
    let rhs = DVector::from_iterator(
        n,
        fd.frame.iter().map(|t| model.inner(&fd.point, t, &hint)),
    );
    let coeff = linalg::solve_spd(&fd.gram, &rhs)?;
    let mut xi = hint;
    for (j, t) in fd.frame.iter().enumerate() {
        xi -= t * coeff[j];
    }
    let norm = model.norm(&fd.point, &xi);
    if norm > 1e-6 {
        return Ok(xi / norm);
    }
    // Hint nearly tangent: fall back to the cofactor construction in an
    // orthonormal ambient tangent basis.
    let basis = model.tangent_basis(&fd.point);
    let columns: Vec<DVector<f64>> = fd
        .frame
        .iter()
        .map(|t| {
            DVector::from_iterator(basis.len(), basis.iter().map(|b| model.inner(&fd.point, b, t)))
        })
        .collect();
    let cross = linalg::generalized_cross(&columns);
    let mut xi = DVector::zeros(model.ambient_dim());
    for (i, b) in basis.iter().enumerate() {
        xi += b * cross[i];
    }
    let norm = model.norm(&fd.point, &xi);
    if norm < 1e-12 {
        return Err(Error::Numeric(format!(
            "tangent frame does not determine a normal at {params:?}"
        )));
    }
    xi /= norm;
    let hint = model.project_tangent(&fd.point, &chart.outward_hint(params, &fd.point)?);
    if model.inner(&fd.point, &xi, &hint) < 0.0 {
        xi = -xi;
    }
    Ok(xi)
}

// ---------------------------------------------------------------------------
// Surface samples
// ---------------------------------------------------------------------------

/// Full second-order geometric data at one node.
#[derive(Debug, Clone)]
pub struct SurfaceSample {
    pub flat_index: usize,
    pub params: Vec<f64>,
    pub point: DVector<f64>,
    /// Orthonormalized tangent frame.
    pub frame: Vec<DVector<f64>>,
    pub sqrt_g: f64,
    /// Unit normal, outward.
    pub xi: DVector<f64>,
    /// Gauss image in base coordinates (unit vector in `R^{n+1}`).
    pub nu: DVector<f64>,
    pub f_value: f64,
    /// Transported anisotropy vector `W` (tangent to the surface).
    pub w_field: DVector<f64>,
    /// Anisotropic transversal field `ξ_F = (F∘ν) ξ + W`.
    pub xi_f: DVector<f64>,
    /// Shape operator in the orthonormal frame (symmetrized).
    pub shape: DMatrix<f64>,
    /// Anisotropic shape operator in the orthonormal frame (symmetrized).
    pub shape_f: DMatrix<f64>,
    pub mean: f64,
    /// `H_F` as `Tr A^F`.
    pub mean_f: f64,
    /// `H_F` in divergence form `(F∘ν)H - (1/√g) ∂_i(√g V^i)`.
    pub mean_f_div: f64,
    /// Norm of the antisymmetric part of `A^F` before symmetrization.
    pub shape_f_asym: f64,
    /// Relative normal component of `W` (tangency defect).
    pub w_normal_rel: f64,
}

impl SurfaceSample {
    /// Gap between the two `H_F` forms, relative to their magnitude.
    pub fn form_gap_rel(&self) -> f64 {
        (self.mean_f - self.mean_f_div).abs() / (1.0 + self.mean_f.abs())
    }
}

/// Compute the full sample at given chart parameters (fourth-order
/// stencils throughout; the divergence form needs the high order near
/// polar collapse points, where `1/√g` amplifies the stencil error).
pub fn sample_at(
    model: &dyn AmbientSpace,
    chart: &dyn Chart,
    lagrangian: &dyn Lagrangian,
    flat_index: usize,
    params: &[f64],
) -> Result<SurfaceSample> {
    sample_with(model, chart, lagrangian, flat_index, params, 4, 4)
}

/// Faster, second-order variant for bulk passes whose tolerances allow it.
pub fn sample_fast(
    model: &dyn AmbientSpace,
    chart: &dyn Chart,
    lagrangian: &dyn Lagrangian,
    flat_index: usize,
    params: &[f64],
) -> Result<SurfaceSample> {
    sample_with(model, chart, lagrangian, flat_index, params, 2, 2)
}

fn sample_with(
    model: &dyn AmbientSpace,
    chart: &dyn Chart,
    lagrangian: &dyn Lagrangian,
    flat_index: usize,
    params: &[f64],
    inner_order: usize,
    outer_order: usize,
) -> Result<SurfaceSample> {
    let n = chart.grid().dim();
    let center = point_data(model, chart, lagrangian, params, INNER_STEP, inner_order)?;
    let p = &center.frame.point;

    let cond = frame_condition(model, &center.frame);
    if !(cond < FRAME_CONDITION_LIMIT) {
        return Err(Error::Numeric(format!(
            "frame condition number {cond:.3e} at node {flat_index}"
        )));
    }

    // Orthonormal frame and its coefficients in the chart frame.
    let ortho = linalg::orthonormalize(
        &center.frame.frame,
        |a, b| model.inner(p, a, b),
        1e-10,
    );
    if ortho.len() != n {
        return Err(Error::Numeric(format!(
            "tangent frame lost rank at node {flat_index}"
        )));
    }
    // coeff column j solves  g c = <T_m, E_j>
    let mut coeff = DMatrix::zeros(n, n);
    for j in 0..n {
        let rhs = DVector::from_iterator(
            n,
            center.frame.frame.iter().map(|t| model.inner(p, t, &ortho[j])),
        );
        let c = linalg::solve_spd(&center.frame.gram, &rhs)?;
        coeff.set_column(j, &c);
    }

    // Outer stencil: ξ, W and √g V^i at parameter offsets per direction.
    let stencil = linalg::central_stencil(outer_order);
    let mut dxi = vec![DVector::zeros(model.ambient_dim()); n];
    let mut dw = vec![DVector::zeros(model.ambient_dim()); n];
    let mut divergence = 0.0;
    let mut shifted = params.to_vec();
    for j in 0..n {
        for &(k, c) in stencil {
            shifted[j] = params[j] + OUTER_STEP * k as f64;
            let side = point_data(model, chart, lagrangian, &shifted, INNER_STEP, inner_order)?;
            dxi[j] += &side.xi * c;
            dw[j] += &side.w * c;
            divergence += side.frame.sqrt_g * side.v_chart[j] * c;
        }
        shifted[j] = params[j];
        dxi[j] /= OUTER_STEP;
        dw[j] /= OUTER_STEP;
    }
    divergence /= OUTER_STEP * center.frame.sqrt_g;

    // Covariant derivatives along chart directions (tangential parts).
    let grad_xi: Vec<DVector<f64>> = dxi.iter().map(|d| model.project_tangent(p, d)).collect();
    let grad_w: Vec<DVector<f64>> = dw.iter().map(|d| model.project_tangent(p, d)).collect();

    // A in the orthonormal frame: A_kj = -<E_k, ∇_{E_j} ξ>.
    let mut shape = DMatrix::zeros(n, n);
    let mut shape_f = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut dir_xi = DVector::zeros(model.ambient_dim());
        let mut dir_w = DVector::zeros(model.ambient_dim());
        for m in 0..n {
            dir_xi += &grad_xi[m] * coeff[(m, j)];
            dir_w += &grad_w[m] * coeff[(m, j)];
        }
        for k in 0..n {
            let a = -model.inner(p, &ortho[k], &dir_xi);
            shape[(k, j)] = a;
            shape_f[(k, j)] = center.f_value * a - model.inner(p, &ortho[k], &dir_w);
        }
    }
    let asym = 0.5 * (&shape_f - shape_f.transpose()).norm();
    let shape = (&shape + shape.transpose()) * 0.5;
    let shape_f = (&shape_f + shape_f.transpose()) * 0.5;

    let mean = shape.trace();
    let mean_f = shape_f.trace();
    let mean_f_div = center.f_value * mean - divergence;

    let w_norm = model.norm(p, &center.w);
    let w_normal_rel = if w_norm > 1e-14 {
        model.inner(p, &center.w, &center.xi).abs() / w_norm
    } else {
        0.0
    };

    let xi_f = &center.xi * center.f_value + &center.w;

    Ok(SurfaceSample {
        flat_index,
        params: params.to_vec(),
        point: p.clone(),
        frame: ortho,
        sqrt_g: center.frame.sqrt_g,
        xi: center.xi,
        nu: center.nu,
        f_value: center.f_value,
        w_field: center.w,
        xi_f,
        shape,
        shape_f,
        mean,
        mean_f,
        mean_f_div,
        shape_f_asym: asym,
        w_normal_rel,
    })
}

fn frame_condition(model: &dyn AmbientSpace, fd: &FrameData) -> f64 {
    let _ = model;
    let eig = linalg::sym_eigenvalues(&fd.gram);
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        (max / min).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Spec operations (thin pointwise wrappers)
// ---------------------------------------------------------------------------

/// Gauss map at chart parameters: `ν = τ_{f(x)}^{-1}(ξ_x)` in base
/// coordinates.
pub fn gauss_map(
    model: &dyn AmbientSpace,
    chart: &dyn Chart,
    params: &[f64],
) -> Result<DVector<f64>> {
    let frame = frame_at(model, chart, params, INNER_STEP, 4)?;
    let xi = unit_normal(model, chart, params, &frame)?;
    Ok(model.base_coords(&model.transport_to_base(&frame.point, &xi)?))
}

/// Shape operator (orthonormal frame) and the frame itself.
pub fn shape_operator(
    model: &dyn AmbientSpace,
    chart: &dyn Chart,
    params: &[f64],
) -> Result<(DMatrix<f64>, Vec<DVector<f64>>)> {
    let isotropic = crate::lagrangian::IsotropicConstant::new(
        1.0,
        model.manifold_dim() - 1,
    )?;
    let sample = sample_at(model, chart, &isotropic, 0, params)?;
    Ok((sample.shape, sample.frame))
}

/// Anisotropic operators at chart parameters.
pub struct AnisotropicOps {
    pub xi_f: DVector<f64>,
    pub shape_f: DMatrix<f64>,
    pub mean_f_trace: f64,
    pub mean_f_div: f64,
}

pub fn anisotropic_operators(
    model: &dyn AmbientSpace,
    chart: &dyn Chart,
    lagrangian: &dyn Lagrangian,
    params: &[f64],
) -> Result<AnisotropicOps> {
    let sample = sample_at(model, chart, lagrangian, 0, params)?;
    Ok(AnisotropicOps {
        xi_f: sample.xi_f,
        shape_f: sample.shape_f,
        mean_f_trace: sample.mean_f,
        mean_f_div: sample.mean_f_div,
    })
}

// ---------------------------------------------------------------------------
// Immersions
// ---------------------------------------------------------------------------

/// Aggregate build diagnostics over all nodes.
#[derive(Debug, Clone, Default)]
pub struct BuildDiagnostics {
    pub max_w_normal_rel: f64,
    pub max_form_gap_rel: f64,
    pub max_shape_f_asym: f64,
    pub excluded_nodes: usize,
}

/// A chart together with its per-node sample cache and quadrature weights.
pub struct Immersion {
    pub chart: Arc<dyn Chart>,
    pub samples: Vec<SurfaceSample>,
    /// Quadrature weight per sample: cell volume times `√g`.
    pub weights: Vec<f64>,
    pub diagnostics: BuildDiagnostics,
}

impl Immersion {
    /// Sample every grid node. Degenerate nodes (frame condition number at
    /// least 1e6) are excluded from the cache and the quadrature.
    pub fn build(
        model: &dyn AmbientSpace,
        chart: Arc<dyn Chart>,
        lagrangian: &dyn Lagrangian,
    ) -> Result<Self> {
        let spec = chart.grid().clone();
        let tables = spec.weight_tables();
        let count = spec.node_count();
        let results: Vec<Result<SurfaceSample>> = (0..count)
            .into_par_iter()
            .map(|flat| {
                let params = spec.params(flat);
                sample_at(model, chart.as_ref(), lagrangian, flat, &params)
            })
            .collect();

        let mut samples = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        let mut diagnostics = BuildDiagnostics::default();
        for r in results {
            match r {
                Ok(s) => {
                    diagnostics.max_w_normal_rel = diagnostics.max_w_normal_rel.max(s.w_normal_rel);
                    diagnostics.max_form_gap_rel =
                        diagnostics.max_form_gap_rel.max(s.form_gap_rel());
                    diagnostics.max_shape_f_asym =
                        diagnostics.max_shape_f_asym.max(s.shape_f_asym);
                    weights.push(spec.node_weight(&tables, s.flat_index) * s.sqrt_g);
                    samples.push(s);
                }
                Err(Error::Numeric(_)) => diagnostics.excluded_nodes += 1,
                Err(e) => return Err(e),
            }
        }
        if samples.is_empty() {
            return Err(Error::Numeric("all nodes degenerate".into()));
        }
        Ok(Self {
            chart,
            samples,
            weights,
            diagnostics,
        })
    }

    /// Total surface measure.
    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Anisotropic surface energy `∫ F(ν) dV`.
    pub fn energy(&self) -> f64 {
        self.samples
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| s.f_value * w)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{IsotropicConstant, QuadraticNorm};
    use crate::symspace::models::EuclideanSpace;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit_sphere_chart(res: usize, radius: f64) -> Arc<dyn Chart> {
        let model = Arc::new(EuclideanSpace::new(3).unwrap());
        let iso = Arc::new(IsotropicConstant::new(1.0, 2).unwrap());
        Arc::new(AnisotropicSphereChart::new(model, iso, radius, res).unwrap())
    }

    #[test]
    fn round_sphere_shape_operator_and_normals() {
        let model = EuclideanSpace::new(3).unwrap();
        let r = 0.7;
        let chart = unit_sphere_chart(24, r);
        let iso = IsotropicConstant::new(1.0, 2).unwrap();
        let spec = chart.grid().clone();
        for flat in [0usize, 57, 24 * 24 / 2 + 3] {
            let params = spec.params(flat);
            let s = sample_at(&model, chart.as_ref(), &iso, flat, &params).unwrap();
            // outward normal: ξ = p/r
            assert!((&s.xi - &(&s.point / r)).norm() < 1e-9);
            // Euclidean Gauss map equals the normal itself
            assert!((&s.nu - &s.xi).norm() < 1e-12);
            // A = -(1/r) id under the fixed sign convention
            let expected = DMatrix::from_diagonal_element(2, 2, -1.0 / r);
            assert!((&s.shape - &expected).norm() < 1e-6, "A = {}", s.shape);
            assert_relative_eq!(s.mean, -2.0 / r, epsilon = 1e-6);
            // isotropic reduction is exact
            assert!((&s.shape_f - &s.shape).norm() < 1e-12);
            assert!((s.mean_f - s.mean).abs() < 1e-12);
            assert!((s.mean_f_div - s.mean).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_area_is_spectrally_accurate() {
        let model = EuclideanSpace::new(3).unwrap();
        let r = 0.7;
        let chart = unit_sphere_chart(32, r);
        let iso = IsotropicConstant::new(1.0, 2).unwrap();
        let imm = Immersion::build(&model, chart, &iso).unwrap();
        assert_eq!(imm.diagnostics.excluded_nodes, 0);
        assert_relative_eq!(imm.area(), 4.0 * PI * r * r, max_relative = 1e-10);
    }

    #[test]
    fn torus_principal_curvatures() {
        let model = EuclideanSpace::new(3).unwrap();
        let chart = TorusChart::new(1.0, 0.35, 16, 16).unwrap();
        let iso = IsotropicConstant::new(1.0, 2).unwrap();
        let spec = chart.grid().clone();
        let params = spec.params(5 * 16 + 3);
        let s = sample_at(&model, &chart, &iso, 0, &params).unwrap();
        let eig = linalg::sym_eigenvalues(&s.shape);
        // eigenvalues of the torus shape operator: -cos v/(R + ρ cos v), -1/ρ
        let v = params[1];
        let k1 = -v.cos() / (1.0 + 0.35 * v.cos());
        let k2 = -1.0 / 0.35;
        let mut expected = vec![k1, k2];
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(eig[0], expected[0], epsilon = 1e-6);
        assert_relative_eq!(eig[1], expected[1], epsilon = 1e-6);
    }

    #[test]
    fn wulff_sphere_of_quadratic_norm_has_constant_curvature() {
        // The anisotropic sphere of F(v) = sqrt(v^T Q v) in flat space has
        // A^F = -(1/r) id even though A itself is not round.
        let model = Arc::new(EuclideanSpace::new(3).unwrap());
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.44, 0.81]));
        let f = Arc::new(QuadraticNorm::new(q).unwrap());
        let r = 0.6;
        let chart = AnisotropicSphereChart::new(model.clone(), f.clone(), r, 20).unwrap();
        let spec = chart.grid().clone();
        for flat in [3usize, 111, 257] {
            let params = spec.params(flat);
            let s = sample_at(model.as_ref(), &chart, f.as_ref(), flat, &params).unwrap();
            let expected = DMatrix::from_diagonal_element(2, 2, -1.0 / r);
            assert!(
                (&s.shape_f - &expected).norm() < 1e-5,
                "A^F = {} at {params:?}",
                s.shape_f
            );
            assert!((s.mean_f - (-2.0 / r)).abs() < 1e-5);
            assert!(s.form_gap_rel() < 1e-6);
            assert!(s.w_normal_rel < 1e-8);
        }
    }

    #[test]
    fn graph_chart_asymmetry_matches_the_commutator() {
        // On a generic Euclidean surface the antisymmetric part of A^F is
        // ½[Hess F̂(ν), A] (Hess F̂ = ∇^S grad F + F·id on ν^⊥), which
        // vanishes only when the two commute. This pins the ∇W term of A^F
        // against an independent closed form.
        let model = EuclideanSpace::new(3).unwrap();
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.3, 0.8]));
        let f = QuadraticNorm::new(q).unwrap();
        let chart = GraphOverSphereChart::new(0.9, 0.25, 16).unwrap();
        let spec = chart.grid().clone();
        for flat in [40usize, 97, 203] {
            let params = spec.params(flat);
            let s = sample_at(&model, &chart, &f, flat, &params).unwrap();
            let hess = f.sphere_hessian(&s.nu).unwrap()
                + (DMatrix::identity(3, 3) - &s.nu * s.nu.transpose()) * s.f_value;
            let mut h_frame = DMatrix::zeros(2, 2);
            for k in 0..2 {
                for j in 0..2 {
                    h_frame[(k, j)] = (s.frame[k].transpose() * &hess * &s.frame[j])[(0, 0)];
                }
            }
            let comm = &h_frame * &s.shape - &s.shape * &h_frame;
            let expected = 0.5 * comm.norm();
            assert!(
                (s.shape_f_asym - expected).abs() < 1e-5 * (1.0 + expected),
                "asym {} vs commutator {}",
                s.shape_f_asym,
                expected
            );
        }
    }

    #[test]
    fn product_sphere_gauss_map_fixes_the_parameter() {
        // For the anisotropic geodesic sphere the Gauss map returns the
        // chart parameter itself: ν(v) = v.
        use crate::lagrangian::AngleProfile;
        use crate::symspace::models::ProductSpace;
        let model = Arc::new(ProductSpace::spheres(2, 2).unwrap());
        let split = model.tangent_split().unwrap();
        let f = Arc::new(AngleProfile::new(vec![1.0, 0.12, 0.03], split, 3).unwrap());
        let chart =
            AnisotropicSphereChart::new(model.clone(), f.clone(), 0.35, 8).unwrap();
        let spec = chart.grid().clone();
        let mut worst: f64 = 0.0;
        for flat in (0..spec.node_count()).step_by(37) {
            let params = spec.params(flat);
            let v = chart.patch().eval(&params);
            let s = sample_at(model.as_ref(), &chart, f.as_ref(), flat, &params).unwrap();
            worst = worst.max((&s.nu - &v).norm());
            // invariants carried by every sample
            assert!(s.w_normal_rel < 1e-8);
            assert!((s.shape_f.trace() - s.mean_f).abs() < 1e-12);
            assert!(s.form_gap_rel() < 1e-6, "gap {}", s.form_gap_rel());
        }
        assert!(worst < 1e-6, "max |nu - v| = {worst:.3e}");
    }

    #[test]
    fn parameter_grids_round_trip_indices() {
        let spec = GridSpec {
            dims: vec![
                GridDim {
                    len: 5,
                    start: 0.0,
                    end: PI,
                    kind: DimKind::Reflected {
                        low_partner: 1,
                        high_partner: 1,
                    },
                },
                GridDim {
                    len: 8,
                    start: 0.0,
                    end: 2.0 * PI,
                    kind: DimKind::Periodic,
                },
            ],
        };
        assert_eq!(spec.node_count(), 40);
        for flat in [0usize, 7, 13, 39] {
            assert_eq!(spec.flat_index(&spec.indices(flat)), flat);
        }
        // midpoint nodes stay strictly inside the interval
        let first = spec.params(0);
        assert!(first[0] > 0.0 && first[0] < PI);
    }
}
