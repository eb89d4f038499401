//! End-to-end verification battery: eleven numbered criteria, each building
//! its scenario from scratch and checking closed-form results against an
//! independent numerical route with pinned tolerances.
//!
//! The battery is shared between the `acceptance` integration-test target
//! and the CLI `selftest` subcommand, so the two can never drift apart.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::hypersurface::{
    sample_at, AnisotropicSphereChart, Immersion, TorusChart, UnitSpherePatch,
};
use crate::lagrangian::{AngleProfile, IsotropicConstant, Lagrangian, QuadraticNorm};
use crate::linalg::sym_eigenvalues;
use crate::oracle::{loop_holonomy_derivative, rk4_jacobi};
use crate::symspace::{propagate_jacobi, tau_hol, AmbientSpace, EuclideanSpace, ProductSpace};
use crate::tubes::{
    check_equifocal, check_isoparametric, closed_form_afr, closed_form_spectrum,
    default_focal_interval, default_t_grid, node_focal_radii, reconstruct_from_focal, TubeBase,
    TubeSpec,
};
use crate::variational::{random_field, verify_first_variation, Variation, VariationOptions};

/// Outcome of one criterion run.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub index: usize,
    pub name: &'static str,
    pub pass: bool,
    pub seconds: f64,
    pub detail: String,
}

struct CriterionDef {
    index: usize,
    name: &'static str,
    /// Wall-clock budget that is itself part of the criterion.
    time_limit: Option<f64>,
    run: fn() -> Result<(bool, String)>,
}

const DEFS: &[CriterionDef] = &[
    CriterionDef {
        index: 1,
        name: "isotropic limit reduces to the classical operators",
        time_limit: Some(5.0),
        run: isotropic_limit,
    },
    CriterionDef {
        index: 2,
        name: "first variational formula matches finite differences",
        time_limit: Some(120.0),
        run: first_variation,
    },
    CriterionDef {
        index: 3,
        name: "gauss map of anisotropic spheres is the identity",
        time_limit: None,
        run: gauss_map_identity,
    },
    CriterionDef {
        index: 4,
        name: "closed-form spectra match the numeric shape operator",
        time_limit: None,
        run: spectrum_agreement,
    },
    CriterionDef {
        index: 5,
        name: "focal radii match the independent root finder",
        time_limit: None,
        run: focal_agreement,
    },
    CriterionDef {
        index: 6,
        name: "nonconstant profiles break spherical symmetry",
        time_limit: None,
        run: symmetry_breaking,
    },
    CriterionDef {
        index: 7,
        name: "reflective tubes are equifocal and isoparametric",
        time_limit: None,
        run: tube_checks,
    },
    CriterionDef {
        index: 8,
        name: "holonomy correction matches loop derivatives",
        time_limit: None,
        run: holonomy_correction,
    },
    CriterionDef {
        index: 9,
        name: "jacobi propagation matches rk4 integration",
        time_limit: None,
        run: jacobi_propagation,
    },
    CriterionDef {
        index: 10,
        name: "focal collapse and rebuild round-trips",
        time_limit: None,
        run: collapse_rebuild,
    },
    CriterionDef {
        index: 11,
        name: "equifocal and isoparametric checks agree",
        time_limit: None,
        run: checks_agree,
    },
];

pub fn criterion_count() -> usize {
    DEFS.len()
}

/// Run one criterion by its 1-based index, timing it and converting any
/// error into a failed result.
pub fn run_criterion(index: usize) -> CriterionResult {
    let def = DEFS
        .iter()
        .find(|d| d.index == index)
        .unwrap_or_else(|| panic!("no criterion {index}"));
    let start = Instant::now();
    let outcome = (def.run)();
    let seconds = start.elapsed().as_secs_f64();
    let (mut pass, mut detail) = match outcome {
        Ok((pass, detail)) => (pass, detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = def.time_limit {
        detail.push_str(&format!("; ran {seconds:.1}s (budget {limit:.0}s)"));
        if seconds > limit {
            pass = false;
        }
    }
    CriterionResult {
        index: def.index,
        name: def.name,
        pass,
        seconds,
        detail,
    }
}

pub fn run_all() -> Vec<CriterionResult> {
    DEFS.iter().map(|d| run_criterion(d.index)).collect()
}

/// One formatted line per criterion, the shape both front ends print.
pub fn format_line(r: &CriterionResult) -> String {
    format!(
        "criterion {:02} [{}] {:7.2}s  {} — {}",
        r.index,
        if r.pass { "pass" } else { "FAIL" },
        r.seconds,
        r.name,
        r.detail
    )
}

// ---------------------------------------------------------------------------
// Shared scenario builders
// ---------------------------------------------------------------------------

fn spheres() -> Result<Arc<dyn AmbientSpace>> {
    Ok(Arc::new(ProductSpace::spheres(2, 2)?))
}

fn hyperbolic() -> Result<Arc<dyn AmbientSpace>> {
    Ok(Arc::new(ProductSpace::hyperbolic(2, 2)?))
}

/// Nonconstant elliptic profile used throughout the battery.
fn profile(model: &Arc<dyn AmbientSpace>) -> Result<Arc<dyn Lagrangian>> {
    let split = model
        .tangent_split()
        .expect("profile energies need a product model");
    Ok(Arc::new(AngleProfile::new(
        vec![1.0, 0.12, 0.03],
        split,
        model.manifold_dim() - 1,
    )?))
}

fn area(model: &Arc<dyn AmbientSpace>) -> Result<Arc<dyn Lagrangian>> {
    Ok(Arc::new(IsotropicConstant::new(1.0, model.manifold_dim() - 1)?))
}

fn random_tangent(
    model: &dyn AmbientSpace,
    p: &DVector<f64>,
    rng: &mut ChaCha8Rng,
) -> DVector<f64> {
    loop {
        let raw = DVector::from_fn(model.ambient_dim(), |_, _| rng.gen_range(-1.0..1.0));
        let t = model.project_tangent(p, &raw);
        let n = model.norm(p, &t);
        if n > 0.3 {
            return t / n;
        }
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

/// 1. With `F = 1` the anisotropic operators must coincide with the
/// classical shape operator and mean curvature on a round sphere.
fn isotropic_limit() -> Result<(bool, String)> {
    let model: Arc<dyn AmbientSpace> = Arc::new(EuclideanSpace::new(3)?);
    let lagrangian = area(&model)?;
    let chart = Arc::new(AnisotropicSphereChart::new(
        model.clone(),
        lagrangian.clone(),
        0.7,
        96,
    )?);
    let immersion = Immersion::build(model.as_ref(), chart, lagrangian.as_ref())?;
    let mut max_h = 0.0_f64;
    let mut max_a = 0.0_f64;
    for s in &immersion.samples {
        max_h = max_h.max((s.mean_f - s.mean).abs());
        max_a = max_a.max((&s.shape_f - &s.shape).norm());
    }
    let pass = max_h < 1e-8 && max_a < 1e-8 && immersion.diagnostics.excluded_nodes == 0;
    Ok((
        pass,
        format!(
            "96x96 round sphere r=0.7 in R^3: max |H_F - H| = {max_h:.2e}, \
             max |A_F - A| = {max_a:.2e}, tolerance 1e-8"
        ),
    ))
}

/// 2. The first variational formula against Richardson finite differences
/// of the energy, on a flat torus with a quadratic-form energy and on an
/// anisotropic sphere in the compact product model.
fn first_variation() -> Result<(bool, String)> {
    let options = VariationOptions::default();
    let mut max_rel = 0.0_f64;

    let model: Arc<dyn AmbientSpace> = Arc::new(EuclideanSpace::new(3)?);
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.21, 0.81]));
    let lagrangian: Arc<dyn Lagrangian> = Arc::new(QuadraticNorm::new(q)?);
    let chart = Arc::new(TorusChart::new(2.0, 0.75, 64, 64)?);
    let immersion = Immersion::build(model.as_ref(), chart, lagrangian.as_ref())?;
    for k in 0..5 {
        let variation = Variation::new(random_field(model.ambient_dim(), 1000 + k));
        let rep = verify_first_variation(&model, &immersion, &lagrangian, &variation, &options)?;
        max_rel = max_rel.max(rep.rel_error);
    }
    let torus_rel = max_rel;

    let model = spheres()?;
    let lagrangian = profile(&model)?;
    let chart = Arc::new(AnisotropicSphereChart::new(
        model.clone(),
        lagrangian.clone(),
        0.3,
        64,
    )?);
    let immersion = Immersion::build(model.as_ref(), chart, lagrangian.as_ref())?;
    for k in 0..5 {
        let variation = Variation::new(random_field(model.ambient_dim(), 2000 + k));
        let rep = verify_first_variation(&model, &immersion, &lagrangian, &variation, &options)?;
        max_rel = max_rel.max(rep.rel_error);
    }

    let pass = max_rel <= 1e-4;
    Ok((
        pass,
        format!(
            "5 random variations each: torus 64^2 (quadratic form) max rel = {torus_rel:.2e}, \
             overall with anisotropic sphere 64^3 max rel = {max_rel:.2e}, tolerance 1e-4"
        ),
    ))
}

/// 3. The Gauss map of the anisotropic geodesic sphere is the identity on
/// the unit sphere of the base tangent space.
fn gauss_map_identity() -> Result<(bool, String)> {
    let mut max_dev = 0.0_f64;
    let mut count = 0usize;
    for model in [spheres()?, hyperbolic()?] {
        let lagrangian = profile(&model)?;
        let chart =
            AnisotropicSphereChart::new(model.clone(), lagrangian.clone(), 0.25, 16)?;
        let patch = UnitSpherePatch::for_sphere_dim(model.manifold_dim() - 1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x03);
        for _ in 0..260 {
            let params = [
                rng.gen_range(0.08..1.49),
                rng.gen_range(0.1..6.18),
                rng.gen_range(0.1..6.18),
            ];
            let sample = sample_at(model.as_ref(), &chart, lagrangian.as_ref(), 0, &params)?;
            let v = patch.eval(&params);
            max_dev = max_dev.max((&sample.nu - &v).norm());
            count += 1;
        }
    }
    let pass = max_dev < 1e-6 && count >= 500;
    Ok((
        pass,
        format!("max |nu(v) - v| = {max_dev:.2e} over {count} directions, tolerance 1e-6"),
    ))
}

/// Sample grid shared by criteria 4 and 5: both curved product models, two
/// radii, thirteen polar angles spanning `[0.1, 1.4]`.
fn spectrum_sample_plan() -> Vec<f64> {
    (0..13).map(|i| 0.1 + 1.3 * i as f64 / 12.0).collect()
}

/// 4. Closed-form eigenvalues of the anisotropic shape operator against the
/// numeric operator assembled from chart derivatives.
fn spectrum_agreement() -> Result<(bool, String)> {
    let thetas = spectrum_sample_plan();
    let mut max_delta = 0.0_f64;
    let mut count = 0usize;
    let mut all_negative = true;
    for model in [spheres()?, hyperbolic()?] {
        let lagrangian = profile(&model)?;
        for radius in [0.2, 0.4] {
            let spec = TubeSpec::new(
                model.clone(),
                lagrangian.clone(),
                TubeBase::Point,
                radius,
                16,
            )?;
            let chart = spec.chart()?;
            for &theta in &thetas {
                let params = [theta, 1.1, 0.7];
                let closed = sorted(closed_form_spectrum(&spec, &params)?.expanded());
                let sample =
                    sample_at(model.as_ref(), chart.as_ref(), lagrangian.as_ref(), 0, &params)?;
                let numeric = sorted(sym_eigenvalues(&sample.shape_f));
                for (c, n) in closed.iter().zip(&numeric) {
                    max_delta = max_delta.max((c - n).abs());
                    all_negative &= *c < 0.0;
                }
                count += 1;
            }
        }
    }
    let pass = max_delta <= 1e-4 && all_negative && count >= 50;
    Ok((
        pass,
        format!(
            "{count} directions over both product models, r in {{0.2, 0.4}}: \
             max eigenvalue delta = {max_delta:.2e} (tolerance 1e-4), all closed-form \
             eigenvalues negative: {all_negative}"
        ),
    ))
}

/// 5. Closed-form anisotropic focal radii against the bracketing root
/// finder on the Jacobi determinant, over the same sample plan.
fn focal_agreement() -> Result<(bool, String)> {
    let thetas = spectrum_sample_plan();
    let mut max_delta = 0.0_f64;
    let mut count_mismatch = 0usize;
    let mut hyperbolic_trivial = true;
    for model in [spheres()?, hyperbolic()?] {
        let lagrangian = profile(&model)?;
        let compact = model.epsilon() > 0.0;
        for radius in [0.2, 0.4] {
            let spec = TubeSpec::new(
                model.clone(),
                lagrangian.clone(),
                TubeBase::Point,
                radius,
                16,
            )?;
            let chart = spec.chart()?;
            let interval = default_focal_interval(model.as_ref(), radius);
            for &theta in &thetas {
                let params = [theta, 1.1, 0.7];
                let closed = closed_form_afr(&spec, &params, interval)?;
                let sample =
                    sample_at(model.as_ref(), chart.as_ref(), lagrangian.as_ref(), 0, &params)?;
                let numeric = node_focal_radii(&spec, &sample, interval, 900)?;
                if closed.len() != numeric.len() {
                    count_mismatch += 1;
                    continue;
                }
                for ((s, m), found) in closed.iter().zip(&numeric) {
                    max_delta = max_delta.max((s - found.s).abs());
                    if *m != found.multiplicity {
                        count_mismatch += 1;
                    }
                }
                if !compact {
                    hyperbolic_trivial &= closed.len() == 1
                        && (closed[0].0 + radius).abs() < 1e-12
                        && closed[0].1 == 3;
                }
            }
        }
    }
    let pass = max_delta <= 1e-5 && count_mismatch == 0 && hyperbolic_trivial;
    Ok((
        pass,
        format!(
            "max focal-radius delta = {max_delta:.2e} (tolerance 1e-5), \
             {count_mismatch} count/multiplicity mismatches, hyperbolic sets exactly \
             {{-r}} x3: {hyperbolic_trivial}"
        ),
    ))
}

/// 6. A nonconstant profile must shift the spectrum with the polar angle
/// and destroy the isoparametric property of geodesic spheres.
fn symmetry_breaking() -> Result<(bool, String)> {
    let model = spheres()?;
    let lagrangian = profile(&model)?;
    let spec = TubeSpec::new(model.clone(), lagrangian, TubeBase::Point, 0.3, 16)?;
    let low = sorted(closed_form_spectrum(&spec, &[0.3, 0.6, 1.9])?.expanded());
    let high = sorted(closed_form_spectrum(&spec, &[1.2, 0.6, 1.9])?.expanded());
    let gap = low
        .iter()
        .zip(&high)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);

    let iso = check_isoparametric(&spec, &default_t_grid(0.3), 48, 1e-3)?;
    let pass = gap > 1e-3 && !iso.pass;
    Ok((
        pass,
        format!(
            "sorted spectra at theta 0.3 vs 1.2 differ by {gap:.2e} (> 1e-3 required); \
             sphere isoparametric spread = {:.2e} (must exceed 1e-3)",
            iso.max_spread
        ),
    ))
}

/// 7. The anisotropic tube over a reflective factor passes the equifocal
/// and isoparametric checks, and its spectrum matches the closed form.
fn tube_checks() -> Result<(bool, String)> {
    let model = spheres()?;
    let lagrangian = profile(&model)?;
    let spec = TubeSpec::new(
        model.clone(),
        lagrangian.clone(),
        TubeBase::ReflectiveFactor,
        0.35,
        16,
    )?;
    let immersion = spec.build()?;
    let interval = default_focal_interval(model.as_ref(), 0.35);
    let equ = check_equifocal(&spec, &immersion, interval, 700, 32, 1e-5)?;
    let t_grid = default_t_grid(0.35);
    let iso = check_isoparametric(&spec, &t_grid, 32, 1e-5)?;

    let chart = spec.chart()?;
    let grid = chart.grid().clone();
    let mut max_delta = 0.0_f64;
    for flat in (0..grid.node_count()).step_by(grid.node_count() / 6) {
        let params = grid.params(flat);
        let closed = sorted(closed_form_spectrum(&spec, &params)?.expanded());
        let sample = sample_at(model.as_ref(), chart.as_ref(), lagrangian.as_ref(), flat, &params)?;
        let numeric = sorted(sym_eigenvalues(&sample.shape_f));
        for (c, n) in closed.iter().zip(&numeric) {
            max_delta = max_delta.max((c - n).abs());
        }
    }
    let pass = equ.pass && iso.pass && equ.node_count >= 30 && t_grid.len() == 7 && max_delta <= 1e-4;
    Ok((
        pass,
        format!(
            "tube r=0.35 over the first factor: equifocal hausdorff {:.2e} over {} nodes, \
             isoparametric spread {:.2e} over {} offsets (tolerance 1e-5); spectrum delta \
             {max_delta:.2e} (tolerance 1e-4)",
            equ.max_hausdorff,
            equ.node_count,
            iso.max_spread,
            t_grid.len()
        ),
    ))
}

/// 8. The closed-form holonomy correction against central differences of
/// actual transport loops, plus its two vanishing cases.
fn holonomy_correction() -> Result<(bool, String)> {
    let model = ProductSpace::spheres(2, 2)?;
    let p0 = model.base_point();
    let mut rng = ChaCha8Rng::seed_from_u64(0x08);
    let mut max_diff = 0.0_f64;
    for _ in 0..50 {
        let u = random_tangent(&model, &p0, &mut rng) * rng.gen_range(0.25..1.1);
        let p = model.exp_map(&p0, &u);
        let v = random_tangent(&model, &p, &mut rng);
        let w = random_tangent(&model, &p0, &mut rng);
        let closed = tau_hol(&model, &p, &v, &w)?;
        let numeric = loop_holonomy_derivative(&model, &p, &v, &w, 1e-3)?;
        max_diff = max_diff.max((&closed - &numeric).norm());
    }

    let flat = EuclideanSpace::new(3)?;
    let mut flat_max = 0.0_f64;
    for k in 0..10 {
        let p = DVector::from_vec(vec![0.3 * k as f64, -0.2, 0.4]);
        let v = DVector::from_vec(vec![1.0, 0.1 * k as f64, -0.5]);
        let w = DVector::from_vec(vec![0.2, 1.0, 0.3]);
        flat_max = flat_max.max(tau_hol(&flat, &p, &v, &w)?.norm());
    }

    let mut parallel_max = 0.0_f64;
    for _ in 0..10 {
        let u = random_tangent(&model, &p0, &mut rng) * rng.gen_range(0.3..1.0);
        let p = model.exp_map(&p0, &u);
        let v = model.transport_along(&p0, &u, 1.0, &u);
        let w = random_tangent(&model, &p0, &mut rng);
        parallel_max = parallel_max.max(tau_hol(&model, &p, &v, &w)?.norm());
    }

    let pass = max_diff <= 1e-5 && flat_max < 1e-12 && parallel_max < 1e-12;
    Ok((
        pass,
        format!(
            "50 random loops: max |closed - numeric| = {max_diff:.2e} (tolerance 1e-5); \
             flat max = {flat_max:.2e}, parallel-argument max = {parallel_max:.2e}"
        ),
    ))
}

/// 9. Closed-form Jacobi propagation against RK4 integration of the Jacobi
/// equation in ambient coordinates.
fn jacobi_propagation() -> Result<(bool, String)> {
    let models: Vec<Arc<dyn AmbientSpace>> = vec![
        Arc::new(EuclideanSpace::new(3)?),
        spheres()?,
        hyperbolic()?,
    ];
    let mut max_diff = 0.0_f64;
    let mut count = 0usize;
    for (k, model) in models.iter().enumerate() {
        let p0 = model.base_point();
        let mut rng = ChaCha8Rng::seed_from_u64(0x09 + k as u64);
        for _ in 0..50 {
            let offset = random_tangent(model.as_ref(), &p0, &mut rng) * rng.gen_range(0.0..0.9);
            let p = model.exp_map(&p0, &offset);
            let w = random_tangent(model.as_ref(), &p, &mut rng);
            let y0 = random_tangent(model.as_ref(), &p, &mut rng) * rng.gen_range(0.2..1.5);
            let y0p = random_tangent(model.as_ref(), &p, &mut rng) * rng.gen_range(0.2..1.5);
            let s = rng.gen_range(0.2..1.3);
            let closed = propagate_jacobi(model.as_ref(), &p, &w, &y0, &y0p, s);
            let numeric = rk4_jacobi(model.as_ref(), &p, &w, &y0, &y0p, s, 1e-3);
            max_diff = max_diff.max((&closed - &numeric).norm());
            count += 1;
        }
    }
    let pass = max_diff <= 1e-6 && count == 150;
    Ok((
        pass,
        format!("{count} cases over three models: max |closed - rk4| = {max_diff:.2e}, tolerance 1e-6"),
    ))
}

/// 10. Collapsing a sphere or tube along `-xi_F` to its focal variety and
/// rebuilding from it reproduces the surface.
fn collapse_rebuild() -> Result<(bool, String)> {
    let model = spheres()?;
    let lagrangian = profile(&model)?;
    let mut worst = 0.0_f64;
    let mut lines = Vec::new();
    for (base, radius) in [(TubeBase::Point, 0.3), (TubeBase::ReflectiveFactor, 0.35)] {
        let spec = TubeSpec::new(model.clone(), lagrangian.clone(), base, radius, 16)?;
        let immersion = spec.build()?;
        let rep = reconstruct_from_focal(&spec, &immersion, radius, 48)?;
        worst = worst.max(rep.collapse_residual).max(rep.max_rebuild_distance);
        lines.push(format!(
            "{}: collapse {:.2e}, rebuild {:.2e}",
            match base {
                TubeBase::Point => "sphere",
                TubeBase::ReflectiveFactor => "tube",
            },
            rep.collapse_residual,
            rep.max_rebuild_distance
        ));
    }
    let pass = worst < 1e-7;
    Ok((pass, format!("{} (tolerance 1e-7)", lines.join("; "))))
}

/// 11. The equifocal and isoparametric verdicts agree on every example the
/// battery builds, for surfaces that pass and surfaces that fail alike.
fn checks_agree() -> Result<(bool, String)> {
    let flat: Arc<dyn AmbientSpace> = Arc::new(EuclideanSpace::new(3)?);
    let product = spheres()?;
    let examples: Vec<(&str, TubeSpec)> = vec![
        (
            "flat isotropic sphere",
            TubeSpec::new(flat.clone(), area(&flat)?, TubeBase::Point, 0.5, 16)?,
        ),
        (
            "product isotropic sphere",
            TubeSpec::new(product.clone(), area(&product)?, TubeBase::Point, 0.3, 16)?,
        ),
        (
            "product anisotropic sphere",
            TubeSpec::new(product.clone(), profile(&product)?, TubeBase::Point, 0.3, 16)?,
        ),
        (
            "anisotropic tube",
            TubeSpec::new(
                product.clone(),
                profile(&product)?,
                TubeBase::ReflectiveFactor,
                0.35,
                16,
            )?,
        ),
    ];
    let mut all_agree = true;
    let mut lines = Vec::new();
    for (name, spec) in &examples {
        let immersion = spec.build()?;
        let interval = default_focal_interval(spec.model().as_ref(), spec.radius());
        let equ = check_equifocal(spec, &immersion, interval, 600, 16, 1e-5)?;
        let iso = check_isoparametric(spec, &default_t_grid(spec.radius()), 24, 1e-5)?;
        all_agree &= equ.pass == iso.pass;
        lines.push(format!(
            "{name}: equifocal {} / isoparametric {}",
            if equ.pass { "pass" } else { "fail" },
            if iso.pass { "pass" } else { "fail" }
        ));
    }
    Ok((all_agree, format!("{} (verdicts must agree at 1e-5)", lines.join("; "))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_battery_enumerates_eleven_criteria() {
        assert_eq!(criterion_count(), 11);
        let indices: Vec<usize> = DEFS.iter().map(|d| d.index).collect();
        assert_eq!(indices, (1..=11).collect::<Vec<_>>());
    }

    #[test]
    fn failed_runs_format_with_the_fail_marker() {
        let r = CriterionResult {
            index: 3,
            name: "x",
            pass: false,
            seconds: 0.5,
            detail: "d".into(),
        };
        let line = format_line(&r);
        assert!(line.starts_with("criterion 03 [FAIL]"));
        assert!(line.contains("x — d"));
    }
}
