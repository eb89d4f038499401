//! First-variation verification and anisotropic gradient descent.
//!
//! The surface energy is `E(f) = ∫ F̃(ξ) dV`; its derivative along a
//! variation with normal profile `ψ` is `-∫ ψ H_F dV`.  This module checks
//! that identity by finite differences: the variation is realized as the
//! geodesic family `f_t(x) = exp_{f(x)}(t V_x)` generated by a smooth
//! ambient vector field, the energy of each offset surface is requadratured,
//! and a 4-point Richardson stencil extracts the `t = 0` derivative.
//!
//! Volume-preserving tests subtract the quadrature mean of `ψ` (first-order
//! volume preservation, which is all a `t = 0` derivative can see) and the
//! same shift is realized geometrically by sliding the variation field along
//! the surface normal.
//!
//! The gradient flow discretizes the steepest-descent choice `ψ = H_F` on a
//! node grid: every quantity is rebuilt from the node positions themselves
//! with central differences in the parameter grid, so the flow is
//! self-contained once it leaves the analytic chart it started from.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hypersurface::{
    energy_data, AmbientField, Chart, DimKind, GridSpec, Immersion, VariedChart, INNER_STEP,
};
use crate::lagrangian::Lagrangian;
use crate::linalg::solve_spd;
use crate::symspace::AmbientSpace;

/// Default finite-difference step for the energy derivative.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// A variation of an immersion, generated by a smooth ambient vector field.
/// The variational vector at a surface point is the tangential projection of
/// the field; in volume-preserving mode the normal profile is recentred to
/// quadrature mean zero.
#[derive(Clone)]
pub struct Variation {
    field: AmbientField,
    mean_zero: bool,
}

impl Variation {
    pub fn new(field: AmbientField) -> Self {
        Self {
            field,
            mean_zero: false,
        }
    }

    pub fn volume_preserving(field: AmbientField) -> Self {
        Self {
            field,
            mean_zero: true,
        }
    }

    /// Constant translation field (Euclidean isometry direction).
    pub fn translation(direction: DVector<f64>) -> Self {
        Self::new(Arc::new(move |_p: &DVector<f64>| direction.clone()))
    }

    pub fn is_volume_preserving(&self) -> bool {
        self.mean_zero
    }
}

/// Smooth pseudo-random ambient field: per component a constant plus two
/// plane waves with seeded coefficients.
pub fn random_field(dim: usize, seed: u64) -> AmbientField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut components = Vec::with_capacity(dim);
    for _ in 0..dim {
        let constant = rng.gen_range(-0.3..0.3);
        let waves: Vec<(f64, DVector<f64>, f64)> = (0..2)
            .map(|_| {
                let amp = rng.gen_range(0.2..0.6);
                let w = DVector::from_fn(dim, |_, _| rng.gen_range(-1.2..1.2));
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                (amp, w, phase)
            })
            .collect();
        components.push((constant, waves));
    }
    Arc::new(move |p: &DVector<f64>| {
        DVector::from_fn(p.len(), |i, _| {
            let (c, waves) = &components[i];
            let mut x = *c;
            for (amp, w, phase) in waves {
                x += amp * (w.dot(p) + phase).sin();
            }
            x
        })
    })
}

/// The same field scaled by a constant factor.
pub fn scale_field(field: &AmbientField, factor: f64) -> AmbientField {
    let inner = field.clone();
    Arc::new(move |p: &DVector<f64>| inner(p) * factor)
}

/// Surface energy of a chart by direct quadrature, without caching samples.
/// Per-node values are reduced sequentially so the result does not depend on
/// the thread count.
pub fn chart_energy(
    model: &dyn AmbientSpace,
    chart: &dyn Chart,
    lagrangian: &dyn Lagrangian,
    order: usize,
) -> Result<f64> {
    let grid = chart.grid().clone();
    let tables = grid.weight_tables();
    let values: Result<Vec<f64>> = (0..grid.node_count())
        .into_par_iter()
        .map(|flat| {
            let params = grid.params(flat);
            let data = energy_data(model, chart, lagrangian, &params, INNER_STEP, order)?;
            Ok(grid.node_weight(&tables, flat) * data.sqrt_g * data.f_value)
        })
        .collect();
    Ok(values?.iter().sum())
}

/// Chart of the varied surface when the variation field is shifted along the
/// (recomputed) unit normal of the base chart — the geometric realization of
/// mean-zero normal profiles.
struct NormalShiftedChart {
    base: Arc<dyn Chart>,
    model: Arc<dyn AmbientSpace>,
    lagrangian: Arc<dyn Lagrangian>,
    field: AmbientField,
    /// Subtracted normal speed (the quadrature mean of ψ).
    shift: f64,
    t: f64,
}

impl Chart for NormalShiftedChart {
    fn grid(&self) -> &GridSpec {
        self.base.grid()
    }

    fn eval(&self, params: &[f64]) -> Result<DVector<f64>> {
        let data = energy_data(
            self.model.as_ref(),
            self.base.as_ref(),
            self.lagrangian.as_ref(),
            params,
            INNER_STEP,
            2,
        )?;
        let raw = (self.field)(&data.point);
        let v = self.model.project_tangent(&data.point, &raw) - &data.xi * self.shift;
        Ok(self.model.exp_map(&data.point, &(v * self.t)))
    }

    fn outward_hint(&self, params: &[f64], point: &DVector<f64>) -> Result<DVector<f64>> {
        self.base.outward_hint(params, point)
    }

    fn describe(&self) -> String {
        format!("normal-shifted variation (t = {}) of {}", self.t, self.base.describe())
    }
}

/// Result of one first-variation check.
#[derive(Debug, Clone)]
pub struct VariationReport {
    /// Richardson-extrapolated central difference of the energy.
    pub fd_derivative: f64,
    /// `-∫ ψ H_F dV` from the cached samples.
    pub formula_value: f64,
    pub abs_error: f64,
    /// Absolute error over the larger magnitude (floored).
    pub rel_error: f64,
    /// Step actually used after any halving retries.
    pub step: f64,
    /// Quadrature mean of ψ before any recentring (diagnostic).
    pub psi_mean: f64,
}

/// Options for the finite-difference derivative.
#[derive(Debug, Clone, Copy)]
pub struct VariationOptions {
    pub step: f64,
    /// Stencil order for the energy requadrature (2 or 4).
    pub order: usize,
    /// Number of step halvings to attempt when the offset surface fails to
    /// sample.
    pub max_retries: usize,
}

impl Default for VariationOptions {
    fn default() -> Self {
        Self {
            step: DEFAULT_FD_STEP,
            order: 2,
            max_retries: 4,
        }
    }
}

/// Verify the first variational formula on a cached immersion.
pub fn verify_first_variation(
    model: &Arc<dyn AmbientSpace>,
    immersion: &Immersion,
    lagrangian: &Arc<dyn Lagrangian>,
    variation: &Variation,
    options: &VariationOptions,
) -> Result<VariationReport> {
    if immersion.diagnostics.excluded_nodes > 0 {
        return Err(Error::Usage(
            "variational checks need a fully sampled grid (degenerate nodes present)".into(),
        ));
    }
    let total_weight: f64 = immersion.weights.iter().sum();
    if total_weight <= 0.0 {
        return Err(Error::Numeric("immersion has no quadrature mass".into()));
    }

    // Normal profile of the variation at the cached nodes.
    let psi: Vec<f64> = immersion
        .samples
        .iter()
        .map(|s| {
            let v = model.project_tangent(&s.point, &(variation.field)(&s.point));
            model.bilinear(&v, &s.xi)
        })
        .collect();
    let psi_mean = psi
        .iter()
        .zip(immersion.weights.iter())
        .map(|(p, w)| p * w)
        .sum::<f64>()
        / total_weight;
    let shift = if variation.mean_zero { psi_mean } else { 0.0 };

    let formula_value = -immersion
        .samples
        .iter()
        .zip(immersion.weights.iter())
        .zip(psi.iter())
        .map(|((s, w), p)| w * (p - shift) * s.mean_f)
        .sum::<f64>();

    let energy_at = |t: f64, order: usize| -> Result<f64> {
        let chart: Arc<dyn Chart> = if shift == 0.0 {
            Arc::new(VariedChart::new(
                immersion.chart.clone(),
                model.clone(),
                variation.field.clone(),
                t,
            ))
        } else {
            Arc::new(NormalShiftedChart {
                base: immersion.chart.clone(),
                model: model.clone(),
                lagrangian: lagrangian.clone(),
                field: variation.field.clone(),
                shift,
                t,
            })
        };
        chart_energy(model.as_ref(), chart.as_ref(), lagrangian.as_ref(), order)
    };

    let mut step = options.step;
    let mut last_failure = String::new();
    for _ in 0..=options.max_retries {
        let attempt = (|| -> Result<f64> {
            let e_p = energy_at(step, options.order)?;
            let e_m = energy_at(-step, options.order)?;
            let e_p2 = energy_at(2.0 * step, options.order)?;
            let e_m2 = energy_at(-2.0 * step, options.order)?;
            Ok((8.0 * (e_p - e_m) - (e_p2 - e_m2)) / (12.0 * step))
        })();
        match attempt {
            Ok(fd_derivative) => {
                let abs_error = (fd_derivative - formula_value).abs();
                let scale = fd_derivative.abs().max(formula_value.abs()).max(1e-12);
                return Ok(VariationReport {
                    fd_derivative,
                    formula_value,
                    abs_error,
                    rel_error: abs_error / scale,
                    step,
                    psi_mean,
                });
            }
            Err(Error::Numeric(msg)) => {
                last_failure = msg;
                step /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Numeric(format!(
        "variation step underflow after {} halvings: {last_failure}",
        options.max_retries
    )))
}

/// Mode of the critical-point test: arbitrary variations or mean-zero
/// normal profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalMode {
    Free,
    VolumePreserving,
}

/// Result of probing an immersion with random variations.
#[derive(Debug, Clone)]
pub struct CriticalPointReport {
    pub mode: CriticalMode,
    /// Finite-difference energy derivative per random variation.
    pub derivatives: Vec<f64>,
    pub max_abs_derivative: f64,
    /// Weighted max |H_F| over the nodes.
    pub hf_max_abs: f64,
    /// max H_F - min H_F over the nodes.
    pub hf_spread: f64,
    pub area: f64,
}

/// Probe whether the immersion is a critical point of the energy by testing
/// `count` seeded random variations of the given amplitude; report the
/// derivatives next to the `H_F` statistics the theorems tie them to.
pub fn verify_critical_point(
    model: &Arc<dyn AmbientSpace>,
    immersion: &Immersion,
    lagrangian: &Arc<dyn Lagrangian>,
    mode: CriticalMode,
    count: usize,
    seed: u64,
    amplitude: f64,
    options: &VariationOptions,
) -> Result<CriticalPointReport> {
    let mut derivatives = Vec::with_capacity(count);
    for k in 0..count {
        let field = scale_field(
            &random_field(model.ambient_dim(), seed.wrapping_add(k as u64)),
            amplitude,
        );
        let variation = match mode {
            CriticalMode::Free => Variation::new(field),
            CriticalMode::VolumePreserving => Variation::volume_preserving(field),
        };
        let report = verify_first_variation(model, immersion, lagrangian, &variation, options)?;
        derivatives.push(report.fd_derivative);
    }
    let max_abs_derivative = derivatives.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let mut hf_min = f64::INFINITY;
    let mut hf_max = f64::NEG_INFINITY;
    let mut hf_max_abs = 0.0f64;
    for s in &immersion.samples {
        hf_min = hf_min.min(s.mean_f);
        hf_max = hf_max.max(s.mean_f);
        hf_max_abs = hf_max_abs.max(s.mean_f.abs());
    }
    Ok(CriticalPointReport {
        mode,
        derivatives,
        max_abs_derivative,
        hf_max_abs,
        hf_spread: hf_max - hf_min,
        area: immersion.area(),
    })
}

/// Steepest-descent profile: raw `ψ = H_F` or the volume-preserving
/// recentring `ψ = H_F - H̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMode {
    Free,
    VolumePreserving,
}

/// One accepted step of the gradient flow.
#[derive(Debug, Clone)]
pub struct FlowRow {
    pub step: usize,
    pub energy: f64,
    pub max_abs_hf: f64,
    pub hf_spread: f64,
    /// Step size used for the accepted update (0 for the initial row).
    pub dt: f64,
    /// Halvings spent before this step was accepted.
    pub halvings: usize,
}

/// Trajectory of the flow; row 0 describes the initial surface.
#[derive(Debug, Clone)]
pub struct FlowReport {
    pub rows: Vec<FlowRow>,
    pub final_energy: f64,
}

/// Discrete hypersurface carried by the flow: node positions in the grid
/// layout of the chart it was seeded from, with all geometry rebuilt from
/// the nodes by central differences (reflected dimensions step across the
/// collapse ends via the index/partner maps of the grid).
pub struct NodeSurface {
    model: Arc<dyn AmbientSpace>,
    lagrangian: Arc<dyn Lagrangian>,
    grid: GridSpec,
    weight_tables: Vec<Vec<f64>>,
    pub points: Vec<DVector<f64>>,
    /// Unit normals from the previous state, used to orient the next one.
    normals: Vec<DVector<f64>>,
}

/// Per-node geometry derived from the current node positions.
struct NodeState {
    energy: f64,
    hf: Vec<f64>,
    normals: Vec<DVector<f64>>,
}

impl NodeSurface {
    /// Seed the flow from a fully sampled immersion.
    pub fn from_immersion(
        model: Arc<dyn AmbientSpace>,
        lagrangian: Arc<dyn Lagrangian>,
        immersion: &Immersion,
    ) -> Result<Self> {
        if immersion.diagnostics.excluded_nodes > 0 {
            return Err(Error::Usage(
                "gradient flow needs a fully sampled grid (degenerate nodes present)".into(),
            ));
        }
        let grid = immersion.chart.grid().clone();
        for dim in &grid.dims {
            if let DimKind::Reflected { low_partner, high_partner } = dim.kind {
                for partner in [low_partner, high_partner] {
                    if grid.dims[partner].len % 2 != 0 {
                        return Err(Error::Usage(
                            "reflected dimensions need even-length partner dimensions".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self {
            weight_tables: grid.weight_tables(),
            model,
            lagrangian,
            points: immersion.samples.iter().map(|s| s.point.clone()).collect(),
            normals: immersion.samples.iter().map(|s| s.xi.clone()).collect(),
            grid,
        })
    }

    /// Flat index of the grid neighbor one step along `dim`, honoring
    /// periodic wrap and reflection with partner shift.
    fn neighbor(&self, flat: usize, dim: usize, step: i64) -> usize {
        let mut idx: Vec<i64> = self.grid.indices(flat).iter().map(|&i| i as i64).collect();
        idx[dim] += step;
        let len = self.grid.dims[dim].len as i64;
        match self.grid.dims[dim].kind {
            DimKind::Periodic => idx[dim] = idx[dim].rem_euclid(len),
            DimKind::Reflected { low_partner, high_partner } => {
                let partner = if idx[dim] < 0 {
                    idx[dim] = -1 - idx[dim];
                    Some(low_partner)
                } else if idx[dim] >= len {
                    idx[dim] = 2 * len - 1 - idx[dim];
                    Some(high_partner)
                } else {
                    None
                };
                if let Some(p) = partner {
                    let plen = self.grid.dims[p].len as i64;
                    idx[p] = (idx[p] + plen / 2).rem_euclid(plen);
                }
            }
        }
        let idx: Vec<usize> = idx.iter().map(|&i| i as usize).collect();
        self.grid.flat_index(&idx)
    }

    /// Rebuild per-node geometry (tangents, normal, `H_F`, energy) from the
    /// current positions.
    fn node_state(&self) -> Result<NodeState> {
        let n = self.grid.dim();
        let count = self.grid.node_count();
        let model = self.model.as_ref();
        let lagrangian = self.lagrangian.as_ref();

        struct FirstPass {
            tangents: Vec<DVector<f64>>,
            gram: DMatrix<f64>,
            sqrt_g: f64,
            xi: DVector<f64>,
            f_value: f64,
            w: DVector<f64>,
        }

        let first: Result<Vec<FirstPass>> = (0..count)
            .into_par_iter()
            .map(|flat| {
                let p = &self.points[flat];
                let mut tangents = Vec::with_capacity(n);
                for d in 0..n {
                    let hi = &self.points[self.neighbor(flat, d, 1)];
                    let lo = &self.points[self.neighbor(flat, d, -1)];
                    let spacing = self.grid.dims[d].spacing();
                    let chord = (hi - lo) / (2.0 * spacing);
                    tangents.push(model.project_tangent(p, &chord));
                }
                let mut gram = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        gram[(i, j)] = model.bilinear(&tangents[i], &tangents[j]);
                    }
                }
                let det = gram.determinant();
                if !(det > 0.0) {
                    return Err(Error::Numeric(
                        "flow surface degenerated: non-positive metric determinant".into(),
                    ));
                }
                // Unit normal: previous normal minus its tangential part,
                // which also keeps the orientation continuous.
                let prev = model.project_tangent(p, &self.normals[flat]);
                let rhs = DVector::from_fn(n, |i, _| model.bilinear(&tangents[i], &prev));
                let coeffs = solve_spd(&gram, &rhs)?;
                let mut xi = prev;
                for i in 0..n {
                    xi -= &tangents[i] * coeffs[i];
                }
                let norm = model.bilinear(&xi, &xi).max(0.0).sqrt();
                if norm < 1e-8 {
                    return Err(Error::Numeric(
                        "flow surface degenerated: normal lost between steps".into(),
                    ));
                }
                xi /= norm;
                let nu = model.base_coords(&model.transport_to_base(p, &xi)?);
                let f_value = lagrangian.value(&nu)?;
                let grad = lagrangian.sphere_gradient(&nu)?;
                let w = model.transport_from_base(p, &model.from_base_coords(&grad))?;
                Ok(FirstPass {
                    tangents,
                    gram,
                    sqrt_g: det.sqrt(),
                    xi,
                    f_value,
                    w,
                })
            })
            .collect();
        let first = first?;

        // Second pass: differentiate the ξ and W node fields for H_F.
        let hf: Result<Vec<f64>> = (0..count)
            .into_par_iter()
            .map(|flat| {
                let node = &first[flat];
                let inv = node
                    .gram
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Numeric("metric not invertible".into()))?;
                let mut mean = 0.0;
                let mut div_w = 0.0;
                for d in 0..n {
                    let hi = self.neighbor(flat, d, 1);
                    let lo = self.neighbor(flat, d, -1);
                    let spacing = self.grid.dims[d].spacing();
                    let dxi = (&first[hi].xi - &first[lo].xi) / (2.0 * spacing);
                    let dw = (&first[hi].w - &first[lo].w) / (2.0 * spacing);
                    for k in 0..n {
                        mean -= inv[(d, k)] * self.model.bilinear(&dxi, &node.tangents[k]);
                        div_w += inv[(d, k)] * self.model.bilinear(&dw, &node.tangents[k]);
                    }
                }
                Ok(node.f_value * mean - div_w)
            })
            .collect();
        let hf = hf?;

        let energy = (0..count)
            .map(|flat| {
                self.grid.node_weight(&self.weight_tables, flat)
                    * first[flat].sqrt_g
                    * first[flat].f_value
            })
            .sum();
        Ok(NodeState {
            energy,
            hf,
            normals: first.into_iter().map(|f| f.xi).collect(),
        })
    }

    /// Quadrature-weighted dV masses of the current state (for recentring).
    fn node_masses(&self, state_sqrt_g: &[f64]) -> Vec<f64> {
        (0..self.grid.node_count())
            .map(|flat| self.grid.node_weight(&self.weight_tables, flat) * state_sqrt_g[flat])
            .collect()
    }
}

/// Run `steps` accepted steps of the anisotropic gradient flow.  A step that
/// would raise the energy (beyond roundoff slack) is rejected and retried at
/// half the step size; eight consecutive rejections stall the flow.
pub fn gradient_flow(
    model: Arc<dyn AmbientSpace>,
    lagrangian: Arc<dyn Lagrangian>,
    immersion: &Immersion,
    steps: usize,
    dt: f64,
    mode: FlowMode,
) -> Result<(FlowReport, NodeSurface)> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::Usage(format!("flow step must be non-negative, got {dt}")));
    }
    let mut surface = NodeSurface::from_immersion(model.clone(), lagrangian, immersion)?;
    let mut state = surface.node_state()?;
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(flow_row(0, &state, 0.0, 0));

    // dV masses for the mean subtraction; recomputed lazily per step from
    // the previous state's normals (good to the same order as H_F itself).
    let mut dt = dt;
    for step in 1..=steps {
        let psi: Vec<f64> = match mode {
            FlowMode::Free => state.hf.clone(),
            FlowMode::VolumePreserving => {
                // Weighted mean against the current volume element;
                // sqrt_g is not retained in the state, so reuse the energy
                // weights through a dedicated pass.
                let sqrt_g = surface_sqrt_g(&surface)?;
                let masses = surface.node_masses(&sqrt_g);
                let total: f64 = masses.iter().sum();
                let mean = state
                    .hf
                    .iter()
                    .zip(masses.iter())
                    .map(|(h, m)| h * m)
                    .sum::<f64>()
                    / total;
                state.hf.iter().map(|h| h - mean).collect()
            }
        };

        let slack = 1e-12 * (1.0 + state.energy.abs());
        let mut halvings = 0usize;
        loop {
            let candidate: Vec<DVector<f64>> = surface
                .points
                .par_iter()
                .enumerate()
                .map(|(i, p)| {
                    surface
                        .model
                        .exp_map(p, &(&state.normals[i] * (dt * psi[i])))
                })
                .collect();
            let trial = NodeSurface {
                model: surface.model.clone(),
                lagrangian: surface.lagrangian.clone(),
                grid: surface.grid.clone(),
                weight_tables: surface.weight_tables.clone(),
                points: candidate,
                normals: state.normals.clone(),
            };
            match trial.node_state() {
                Ok(next) if next.energy <= state.energy + slack => {
                    surface = trial;
                    state = next;
                    rows.push(flow_row(step, &state, dt, halvings));
                    break;
                }
                Ok(_) | Err(Error::Numeric(_)) => {
                    halvings += 1;
                    if halvings > 8 {
                        return Err(Error::Numeric(format!(
                            "gradient flow stalled at step {step}: 8 consecutive step halvings \
                             could not decrease the energy"
                        )));
                    }
                    dt /= 2.0;
                }
                Err(e) => return Err(e),
            }
        }
    }
    let final_energy = state.energy;
    surface.normals = state.normals;
    Ok((
        FlowReport {
            rows,
            final_energy,
        },
        surface,
    ))
}

fn flow_row(step: usize, state: &NodeState, dt: f64, halvings: usize) -> FlowRow {
    let mut hf_min = f64::INFINITY;
    let mut hf_max = f64::NEG_INFINITY;
    let mut max_abs = 0.0f64;
    for &h in &state.hf {
        hf_min = hf_min.min(h);
        hf_max = hf_max.max(h);
        max_abs = max_abs.max(h.abs());
    }
    FlowRow {
        step,
        energy: state.energy,
        max_abs_hf: max_abs,
        hf_spread: hf_max - hf_min,
        dt,
        halvings,
    }
}

/// `√g` per node of the current surface (first-pass subset of
/// `node_state`, used for the volume-preserving mean).
fn surface_sqrt_g(surface: &NodeSurface) -> Result<Vec<f64>> {
    let n = surface.grid.dim();
    (0..surface.grid.node_count())
        .into_par_iter()
        .map(|flat| {
            let p = &surface.points[flat];
            let mut gram = DMatrix::zeros(n, n);
            let mut tangents = Vec::with_capacity(n);
            for d in 0..n {
                let hi = &surface.points[surface.neighbor(flat, d, 1)];
                let lo = &surface.points[surface.neighbor(flat, d, -1)];
                let spacing = surface.grid.dims[d].spacing();
                tangents.push(surface.model.project_tangent(p, &((hi - lo) / (2.0 * spacing))));
            }
            for i in 0..n {
                for j in 0..n {
                    gram[(i, j)] = surface.model.bilinear(&tangents[i], &tangents[j]);
                }
            }
            let det = gram.determinant();
            if !(det > 0.0) {
                return Err(Error::Numeric(
                    "flow surface degenerated: non-positive metric determinant".into(),
                ));
            }
            Ok(det.sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypersurface::{
        AnisotropicSphereChart, GraphOverSphereChart, TorusChart,
    };
    use crate::lagrangian::{AngleProfile, IsotropicConstant, QuadraticNorm};
    use crate::oracle::monte_carlo_sphere_integral;
    use crate::symspace::{EuclideanSpace, ProductSpace};
    use std::f64::consts::PI;

    fn euclidean3() -> Arc<dyn AmbientSpace> {
        Arc::new(EuclideanSpace::new(3).unwrap())
    }

    fn torus_immersion(
        model: &Arc<dyn AmbientSpace>,
        lagrangian: &Arc<dyn Lagrangian>,
        res: usize,
    ) -> Immersion {
        let chart = Arc::new(TorusChart::new(1.0, 0.35, res, res).unwrap());
        Immersion::build(model.as_ref(), chart, lagrangian.as_ref()).unwrap()
    }

    fn quadratic_norm() -> Arc<dyn Lagrangian> {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.21, 0.81]));
        Arc::new(QuadraticNorm::new(q).unwrap())
    }

    #[test]
    fn translation_variations_cost_nothing_in_flat_space() {
        let model = euclidean3();
        let lagrangian = quadratic_norm();
        let immersion = torus_immersion(&model, &lagrangian, 32);
        let variation = Variation::translation(DVector::from_vec(vec![0.4, -0.2, 0.7]));
        let report = verify_first_variation(
            &model,
            &immersion,
            &lagrangian,
            &variation,
            &VariationOptions::default(),
        )
        .unwrap();
        assert!(
            report.fd_derivative.abs() < 1e-6,
            "fd {}",
            report.fd_derivative
        );
        assert!(
            report.formula_value.abs() < 1e-6,
            "formula {}",
            report.formula_value
        );
    }

    #[test]
    fn round_sphere_dilation_matches_the_area_derivative() {
        let model = euclidean3();
        let iso: Arc<dyn Lagrangian> = Arc::new(IsotropicConstant::new(1.0, 2).unwrap());
        let radius = 0.8;
        let chart = Arc::new(
            AnisotropicSphereChart::new(model.clone(), iso.clone(), radius, 32).unwrap(),
        );
        let immersion = Immersion::build(model.as_ref(), chart, iso.as_ref()).unwrap();
        // Radial field: ψ = 1, so dE/dt = d/dt 4π(r+t)² = 8πr.
        let variation = Variation::new(Arc::new(|p: &DVector<f64>| p.normalize()));
        let report = verify_first_variation(
            &model,
            &immersion,
            &iso,
            &variation,
            &VariationOptions::default(),
        )
        .unwrap();
        let want = 8.0 * PI * radius;
        assert!(
            (report.fd_derivative - want).abs() < 1e-5,
            "fd {} want {want}",
            report.fd_derivative
        );
        assert!(
            (report.formula_value - want).abs() < 1e-5,
            "formula {} want {want}",
            report.formula_value
        );
        assert!(report.rel_error < 1e-6, "rel {}", report.rel_error);
    }

    #[test]
    fn random_variations_satisfy_the_first_variational_formula() {
        let model = euclidean3();
        let lagrangian = quadratic_norm();
        let immersion = torus_immersion(&model, &lagrangian, 32);
        for seed in 0..2u64 {
            let variation = Variation::new(random_field(3, 40 + seed));
            let report = verify_first_variation(
                &model,
                &immersion,
                &lagrangian,
                &variation,
                &VariationOptions::default(),
            )
            .unwrap();
            assert!(
                report.rel_error <= 1e-4,
                "seed {seed}: fd {} formula {} rel {}",
                report.fd_derivative,
                report.formula_value,
                report.rel_error
            );
        }

        let product: Arc<dyn AmbientSpace> = Arc::new(ProductSpace::spheres(2, 2).unwrap());
        let split = product.tangent_split().unwrap();
        let profile: Arc<dyn Lagrangian> =
            Arc::new(AngleProfile::new(vec![1.0, 0.12, 0.03], split, 3).unwrap());
        let chart = Arc::new(
            AnisotropicSphereChart::new(product.clone(), profile.clone(), 0.35, 16).unwrap(),
        );
        let immersion = Immersion::build(product.as_ref(), chart, profile.as_ref()).unwrap();
        let variation = Variation::new(random_field(6, 77));
        let report = verify_first_variation(
            &product,
            &immersion,
            &profile,
            &variation,
            &VariationOptions::default(),
        )
        .unwrap();
        assert!(
            report.rel_error <= 1e-4,
            "product sphere: fd {} formula {} rel {}",
            report.fd_derivative,
            report.formula_value,
            report.rel_error
        );
    }

    #[test]
    fn richardson_error_falls_by_at_least_four_per_halving() {
        let model = euclidean3();
        let lagrangian = quadratic_norm();
        let immersion = torus_immersion(&model, &lagrangian, 32);
        let variation = Variation::new(random_field(3, 9));
        let mut errors = Vec::new();
        for &step in &[4e-2, 2e-2] {
            // Order-4 requadrature keeps the stencil bias below the
            // Richardson term so the h⁴ decay is visible.
            let report = verify_first_variation(
                &model,
                &immersion,
                &lagrangian,
                &variation,
                &VariationOptions {
                    step,
                    order: 4,
                    max_retries: 4,
                },
            )
            .unwrap();
            errors.push(report.abs_error);
        }
        assert!(
            errors[1] * 4.0 <= errors[0] || errors[1] < 1e-9,
            "no Richardson gain: {errors:?}"
        );
    }

    #[test]
    fn critical_point_tests_separate_wulff_spheres_from_generic_ones() {
        // Wulff sphere of a quadratic norm: constant H_F, so every
        // volume-preserving derivative vanishes.
        let model = euclidean3();
        let lagrangian = quadratic_norm();
        let chart = Arc::new(
            AnisotropicSphereChart::new(model.clone(), lagrangian.clone(), 0.6, 24).unwrap(),
        );
        let immersion = Immersion::build(model.as_ref(), chart, lagrangian.as_ref()).unwrap();
        let report = verify_critical_point(
            &model,
            &immersion,
            &lagrangian,
            CriticalMode::VolumePreserving,
            4,
            11,
            1.0,
            &VariationOptions::default(),
        )
        .unwrap();
        assert!(
            report.max_abs_derivative < 1e-6,
            "wulff derivatives {:?}",
            report.derivatives
        );
        assert!(report.hf_spread < 1e-6, "wulff spread {}", report.hf_spread);

        // Anisotropic geodesic sphere in S²×S²: H_F varies, so some
        // mean-zero profile must see it.
        let product: Arc<dyn AmbientSpace> = Arc::new(ProductSpace::spheres(2, 2).unwrap());
        let split = product.tangent_split().unwrap();
        let profile: Arc<dyn Lagrangian> =
            Arc::new(AngleProfile::new(vec![1.0, 0.12, 0.03], split, 3).unwrap());
        let chart = Arc::new(
            AnisotropicSphereChart::new(product.clone(), profile.clone(), 0.35, 12).unwrap(),
        );
        let immersion = Immersion::build(product.as_ref(), chart, profile.as_ref()).unwrap();
        let report = verify_critical_point(
            &product,
            &immersion,
            &profile,
            CriticalMode::VolumePreserving,
            6,
            23,
            4.0,
            &VariationOptions::default(),
        )
        .unwrap();
        assert!(
            report.max_abs_derivative > 1e-3,
            "anisotropic sphere derivatives {:?}",
            report.derivatives
        );
        assert!(report.hf_spread > 1e-3);
    }

    #[test]
    fn quadratic_energy_agrees_with_monte_carlo() {
        let model = euclidean3();
        let iso: Arc<dyn Lagrangian> = Arc::new(IsotropicConstant::new(1.0, 2).unwrap());
        let lagrangian = quadratic_norm();
        // Round unit sphere carrying the quadratic integrand.
        let chart =
            Arc::new(AnisotropicSphereChart::new(model.clone(), iso, 1.0, 48).unwrap());
        let immersion = Immersion::build(model.as_ref(), chart, lagrangian.as_ref()).unwrap();
        let energy = immersion.energy();
        let f = |v: &DVector<f64>| lagrangian.value(v);
        let (mc, sigma) = monte_carlo_sphere_integral(&f, 2, 1_000_000, 99).unwrap();
        assert!(
            (energy - mc).abs() < 3.0 * sigma,
            "energy {energy} vs MC {mc} ± {sigma}"
        );
    }

    #[test]
    fn flow_is_stationary_on_wulff_spheres_and_descends_on_perturbations() {
        let model = euclidean3();
        let lagrangian = quadratic_norm();
        let chart = Arc::new(
            AnisotropicSphereChart::new(model.clone(), lagrangian.clone(), 0.6, 24).unwrap(),
        );
        let immersion = Immersion::build(model.as_ref(), chart, lagrangian.as_ref()).unwrap();

        // dt = 0 keeps everything fixed, bitwise.
        let (report, _) = gradient_flow(
            model.clone(),
            lagrangian.clone(),
            &immersion,
            3,
            0.0,
            FlowMode::VolumePreserving,
        )
        .unwrap();
        assert!(report.rows.windows(2).all(|w| w[0].energy == w[1].energy));

        // The Wulff sphere is a volume-preserving critical point: energy
        // moves only at discretization level (the residual ψ is the O(h²)
        // noise of the node-based H_F, so the per-step change scales with
        // dt · |ψ|²).
        let (report, _) = gradient_flow(
            model.clone(),
            lagrangian.clone(),
            &immersion,
            20,
            1e-6,
            FlowMode::VolumePreserving,
        )
        .unwrap();
        for w in report.rows.windows(2) {
            assert!(
                (w[1].energy - w[0].energy).abs() < 1e-8,
                "step {}: ΔE = {}",
                w[1].step,
                w[1].energy - w[0].energy
            );
        }

        // An ellipsoidal bump under isotropic flow: strict descent.
        let iso: Arc<dyn Lagrangian> = Arc::new(IsotropicConstant::new(1.0, 2).unwrap());
        let chart = Arc::new(GraphOverSphereChart::new(1.0, 0.15, 24).unwrap());
        let bumped = Immersion::build(model.as_ref(), chart, iso.as_ref()).unwrap();
        let (report, _) = gradient_flow(
            model.clone(),
            iso.clone(),
            &bumped,
            200,
            2e-4,
            FlowMode::Free,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 201);
        for w in report.rows.windows(2) {
            assert!(
                w[1].energy < w[0].energy,
                "step {} did not descend: {} -> {}",
                w[1].step,
                w[0].energy,
                w[1].energy
            );
        }
    }

    #[test]
    fn node_surface_reproduces_the_continuum_curvature() {
        let model = euclidean3();
        let lagrangian = quadratic_norm();
        let immersion = torus_immersion(&model, &lagrangian, 48);
        let surface =
            NodeSurface::from_immersion(model.clone(), lagrangian.clone(), &immersion).unwrap();
        let state = surface.node_state().unwrap();
        // Central differences in the grid spacing carry an O(h²) bias.
        assert!((state.energy - immersion.energy()).abs() < 1e-2 * immersion.energy());
        let mut worst = 0.0f64;
        for (i, s) in immersion.samples.iter().enumerate() {
            worst = worst.max((state.hf[i] - s.mean_f).abs() / (1.0 + s.mean_f.abs()));
        }
        assert!(worst < 5e-2, "discrete H_F off by {worst}");
    }
}
