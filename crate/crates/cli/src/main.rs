//! Command-line driver for the anisotropic-curvature toolkit.
//!
//! Every subcommand reads one INI-like scenario config (see the README for
//! the grammar), applies `WULFF_*` environment overrides and command-line
//! flags on top, and emits a JSON report that embeds the resolved config and
//! the tool version. With `--out <dir>` reports are written as files and the
//! paths are printed; without it the JSON body goes to stdout and a one-line
//! summary to stderr.
//!
//! Exit codes: 0 when the command (and any pass/fail check it performs)
//! succeeds, 1 when a check fails, 2 for configuration or usage problems,
//! 3 for numerical failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use wulff_core::config::{params_from_theta, ConfigDoc, Scenario, SectionReader};
use wulff_core::hypersurface::{sample_at, Immersion};
use wulff_core::lagrangian::{
    check_convexity, check_invariance, random_unit_samples, theta_sweep_samples,
};
use wulff_core::linalg::sym_eigenvalues;
use wulff_core::report::{
    fmt_num, AfrData, AfrRow, BuildData, CriterionRow, CriticalData, Csv, Envelope, EquifocalData,
    FlowRowOut, FlowSummary, IsoparametricData, LagrangianCheckData, OffsetRow, ReconstructData,
    SelftestData, SpectrumData, SpectrumRow, VariationCase, VariationData,
};
use wulff_core::tubes::{
    check_equifocal, check_isoparametric, closed_form_afr, closed_form_spectrum,
    default_focal_interval, default_t_grid, node_focal_radii, reconstruct_from_focal, TubeSpec,
};
use wulff_core::variational::{
    gradient_flow, random_field, scale_field, verify_critical_point, verify_first_variation,
    CriticalMode, FlowMode, Variation, VariationOptions, DEFAULT_FD_STEP,
};
use wulff_core::{acceptance, Error, Result};

#[derive(Parser)]
#[command(
    name = "wulff",
    version,
    about = "Anisotropic surface-energy toolkit on symmetric-space product models"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Scenario config file (required by every command except selftest).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for JSON/CSV reports; default prints JSON to stdout.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores); overrides `[run] threads`.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Seed for randomized checks; overrides `[run] seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Pass/fail tolerance; beats section keys, `[run] tolerance` and the
    /// per-command default.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Ellipticity and invariance checks for the configured integrand
    Lagrangian {
        #[command(subcommand)]
        cmd: LagrangianCmd,
    },
    /// Anisotropic geodesic spheres
    Sphere {
        #[command(subcommand)]
        cmd: SphereCmd,
    },
    /// Anisotropic tubes over a reflective factor
    Tube {
        #[command(subcommand)]
        cmd: TubeCmd,
    },
    /// Variational identities on the configured surface
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
    },
    /// Discrete anisotropic gradient flow
    Flow {
        #[command(subcommand)]
        cmd: FlowCmd,
    },
    /// Run the full acceptance battery (config optional)
    Selftest,
}

#[derive(Subcommand)]
enum LagrangianCmd {
    /// Convexity sweep plus holonomy invariance of `F`
    Check,
}

#[derive(Subcommand)]
enum SphereCmd {
    /// Sample every chart node and report area, energy and diagnostics
    Build,
    /// Closed-form shape-operator spectrum vs the numeric eigenvalues
    Spectrum,
    /// Closed-form anisotropic focal radii vs the numeric root finder
    Afr,
}

#[derive(Subcommand)]
enum TubeCmd {
    /// Sample every chart node and report area, energy and diagnostics
    Build,
    /// Closed-form shape-operator spectrum vs the numeric eigenvalues
    Spectrum,
    /// Closed-form anisotropic focal radii vs the numeric root finder
    Afr,
    /// Focal radii must agree across the nodes
    CheckEquifocal,
    /// Every anisotropic parallel surface must have constant H_F
    CheckIsoparametric,
    /// Collapse onto the focal submanifold and rebuild
    Reconstruct,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// First variational formula against finite differences
    Variation,
    /// Vanishing energy derivative at a critical point
    Critical,
}

#[derive(Subcommand)]
enum FlowCmd {
    /// Run the gradient flow and record the energy trajectory
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Command::Selftest = cli.command {
        return run_selftest(&cli.global);
    }
    let ctx = Context::load(&cli.global)?;
    match cli.command {
        Command::Lagrangian { cmd: LagrangianCmd::Check } => lagrangian_check(&ctx),
        Command::Sphere { cmd } => match cmd {
            SphereCmd::Build => build_surface(&ctx, "sphere build"),
            SphereCmd::Spectrum => spectrum(&ctx, "sphere"),
            SphereCmd::Afr => afr(&ctx, "sphere"),
        },
        Command::Tube { cmd } => match cmd {
            TubeCmd::Build => build_surface(&ctx, "tube build"),
            TubeCmd::Spectrum => spectrum(&ctx, "tube"),
            TubeCmd::Afr => afr(&ctx, "tube"),
            TubeCmd::CheckEquifocal => equifocal(&ctx),
            TubeCmd::CheckIsoparametric => isoparametric(&ctx),
            TubeCmd::Reconstruct => reconstruct(&ctx),
        },
        Command::Verify { cmd } => match cmd {
            VerifyCmd::Variation => verify_variation(&ctx),
            VerifyCmd::Critical => verify_critical(&ctx),
        },
        Command::Flow { cmd: FlowCmd::Run } => flow_run(&ctx),
        Command::Selftest => unreachable!("handled above"),
    }
}

// ---------------------------------------------------------------------------
// Context: resolved scenario plus the runtime flags that outrank it
// ---------------------------------------------------------------------------

struct Context {
    scenario: Scenario,
    out: Option<PathBuf>,
    tol_flag: Option<f64>,
}

impl Context {
    /// Parse the config, apply `WULFF_*` environment overrides, then stamp
    /// the command-line flags into `[run]` so reports embed what actually
    /// ran. Precedence: flag > environment > file.
    fn load(global: &GlobalArgs) -> Result<Self> {
        let path = global.config.as_ref().ok_or_else(|| {
            Error::Usage("--config <path> is required for this command".into())
        })?;
        let mut doc = ConfigDoc::from_path(path)?;
        doc.apply_overrides_from(std::env::vars())?;
        if let Some(seed) = global.seed {
            doc.set("run", "seed", &seed.to_string());
        }
        if let Some(threads) = global.threads {
            doc.set("run", "threads", &threads.to_string());
        }
        if let Some(out) = &global.out {
            doc.set("run", "out", &out.to_string_lossy());
        }
        let scenario = Scenario::from_doc(doc)?;
        init_threads(scenario.run.threads);
        let out = global
            .out
            .clone()
            .or_else(|| scenario.run.out.as_ref().map(PathBuf::from));
        Ok(Self {
            scenario,
            out,
            tol_flag: global.tol,
        })
    }

    /// Effective tolerance: `--tol` > section key > `[run] tolerance` >
    /// per-command default.
    fn tolerance(&self, section_value: Option<f64>, default: f64) -> f64 {
        self.tol_flag
            .or(section_value)
            .or(self.scenario.run.tolerance)
            .unwrap_or(default)
    }

    /// Resolved config for embedding: the post-override document with the
    /// effective tolerance written back into the section that consumed it.
    fn embedded_config(&self, section: &str, tolerance: Option<f64>) -> String {
        let mut doc = self.scenario.doc.clone();
        if let Some(tol) = tolerance {
            doc.set(section, "tolerance", &format!("{tol}"));
        }
        doc.canonical_string()
    }

    /// TubeSpec for the sphere/tube command groups, enforcing that the
    /// configured kind matches the command.
    fn tube_spec_for(&self, want: &str) -> Result<TubeSpec> {
        let surface = self.scenario.surface()?;
        if surface.kind_name() != want {
            return Err(Error::Usage(format!(
                "this command needs [surface] kind = {want}, got {}",
                surface.kind_name()
            )));
        }
        surface.tube_spec(&self.scenario.model, &self.scenario.lagrangian)
    }

    fn immersion(&self) -> Result<Immersion> {
        let chart = self
            .scenario
            .surface()?
            .chart(&self.scenario.model, &self.scenario.lagrangian)?;
        Immersion::build(self.scenario.model.as_ref(), chart, self.scenario.lagrangian.as_ref())
    }

    /// Emit a report: file plus path line under `--out`, JSON body on
    /// stdout otherwise. The summary goes where it cannot corrupt the JSON.
    fn emit<T: Serialize>(
        &self,
        slug: &str,
        command: &str,
        config: String,
        data: T,
        summary: &str,
        csv: Option<(&str, &Csv)>,
    ) -> Result<()> {
        let envelope = Envelope::new(command, config, data);
        if let Some(dir) = &self.out {
            let path = dir.join(format!("{slug}.json"));
            envelope.write_json(&path)?;
            println!("wrote {}", path.display());
            if let Some((name, body)) = csv {
                let csv_path = dir.join(name);
                body.write(&csv_path)?;
                println!("wrote {}", csv_path.display());
            }
            println!("{summary}");
        } else {
            print!("{}", envelope.to_json()?);
            eprintln!("{summary}");
        }
        Ok(())
    }
}

fn init_threads(threads: usize) {
    if threads > 0 {
        // A second initialization in the same process is harmless: the
        // first pool wins and rayon reports an error we deliberately drop.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

/// Chart parameters for point evaluations: an explicit `params` list, or
/// `theta` expanded along the documented generic filler values.
fn read_params(r: &mut SectionReader, param_dim: usize) -> Result<Vec<f64>> {
    if let Some(params) = r.get_f64_list("params")? {
        if r.get_f64("theta")?.is_some() {
            return Err(Error::Usage(
                "give either params or theta in this section, not both".into(),
            ));
        }
        if params.len() != param_dim {
            return Err(Error::Usage(format!(
                "params needs {param_dim} comma-separated values, got {}",
                params.len()
            )));
        }
        Ok(params)
    } else {
        let theta = r.get_f64("theta")?.unwrap_or(std::f64::consts::FRAC_PI_4);
        Ok(params_from_theta(theta, param_dim))
    }
}

fn pass_word(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

// ---------------------------------------------------------------------------
// lagrangian check
// ---------------------------------------------------------------------------

fn lagrangian_check(ctx: &Context) -> Result<bool> {
    let scenario = &ctx.scenario;
    let f = scenario.lagrangian.as_ref();
    let n = f.sphere_dim();
    let seed = scenario.run.seed;
    let tol = ctx.tolerance(scenario.run.tolerance, 1e-9);

    let mut samples = random_unit_samples(n, 512, seed);
    if let Some(split) = scenario.model.tangent_split() {
        samples.extend(theta_sweep_samples(n, &split, 64));
    }
    let convexity = check_convexity(f, &samples, tol)?;

    // Flat models have trivial holonomy: nothing to transform against.
    let transforms = scenario.model.holonomy_rotations(64, seed);
    let (inv_transforms, inv_residual, inv_pass) = if transforms.is_empty() {
        (0, 0.0, true)
    } else {
        let report = check_invariance(f, &transforms, &samples, tol)?;
        (report.transforms, report.max_residual, report.pass)
    };

    let pass = convexity.pass && inv_pass;
    let data = LagrangianCheckData {
        family: f.family().to_string(),
        sphere_dim: n,
        samples: samples.len(),
        convexity_min: convexity.min_eigenvalue,
        convexity_pass: convexity.pass,
        invariance_transforms: inv_transforms,
        invariance_residual: inv_residual,
        invariance_pass: inv_pass,
        tolerance: tol,
        pass,
    };
    let summary = format!(
        "lagrangian check [{}]: convexity min eigenvalue {:.3e} over {} samples, \
         invariance residual {:.3e} over {} transforms (tolerance {:.1e})",
        pass_word(pass),
        convexity.min_eigenvalue,
        samples.len(),
        inv_residual,
        inv_transforms,
        tol,
    );
    let config = ctx.embedded_config("run", Some(tol));
    ctx.emit("lagrangian-check", "lagrangian check", config, data, &summary, None)?;
    Ok(pass)
}

// ---------------------------------------------------------------------------
// sphere/tube build
// ---------------------------------------------------------------------------

fn build_surface(ctx: &Context, command: &str) -> Result<bool> {
    let want = command.split_whitespace().next().unwrap_or("sphere");
    // Enforce the kind/command pairing even though build works on any chart.
    ctx.tube_spec_for(want)?;
    let immersion = ctx.immersion()?;
    let d = &immersion.diagnostics;
    let data = BuildData {
        kind: want.to_string(),
        nodes: immersion.samples.len(),
        excluded_nodes: d.excluded_nodes,
        area: immersion.area(),
        energy: immersion.energy(),
        max_w_normal_rel: d.max_w_normal_rel,
        max_form_gap_rel: d.max_form_gap_rel,
        max_shape_asym: d.max_shape_f_asym,
    };
    let summary = format!(
        "{command}: {} nodes ({} excluded), area {:.9e}, energy {:.9e}",
        data.nodes, data.excluded_nodes, data.area, data.energy,
    );
    let slug = command.replace(' ', "-");
    let config = ctx.embedded_config("run", None);
    ctx.emit(&slug, command, config, data, &summary, None)?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// sphere/tube spectrum
// ---------------------------------------------------------------------------

fn spectrum(ctx: &Context, want: &str) -> Result<bool> {
    let scenario = &ctx.scenario;
    let spec = ctx.tube_spec_for(want)?;
    let param_dim = scenario.model.manifold_dim() - 1;

    let mut r = scenario.doc.reader_or_empty("spectrum");
    let params = read_params(&mut r, param_dim)?;
    let tol = ctx.tolerance(r.get_pos_f64("tolerance")?, 1e-4);
    r.finish()?;

    let closed = closed_form_spectrum(&spec, &params)?;
    let chart = spec.chart()?;
    let sample = sample_at(
        scenario.model.as_ref(),
        chart.as_ref(),
        scenario.lagrangian.as_ref(),
        0,
        &params,
    )?;
    let mut closed_sorted = closed.expanded();
    closed_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let numeric = sym_eigenvalues(&sample.shape_f);
    if numeric.len() != closed_sorted.len() {
        return Err(Error::Numeric(format!(
            "spectrum dimensions disagree: closed form {} vs numeric {}",
            closed_sorted.len(),
            numeric.len()
        )));
    }

    let mut max_delta = 0.0f64;
    let entries: Vec<SpectrumRow> = closed_sorted
        .iter()
        .zip(&numeric)
        .map(|(&c, &n)| {
            let delta = (c - n).abs();
            max_delta = max_delta.max(delta);
            SpectrumRow {
                closed_form: c,
                numeric: n,
                delta,
            }
        })
        .collect();
    let pass = max_delta <= tol;
    let data = SpectrumData {
        kind: want.to_string(),
        radius: spec.radius(),
        params: params.clone(),
        f_value: sample.f_value,
        entries,
        max_delta,
        tolerance: tol,
        pass,
    };
    let command = format!("{want} spectrum");
    let summary = format!(
        "{command} [{}]: {} eigenvalues, max |closed - numeric| = {:.3e} (tolerance {:.1e})",
        pass_word(pass),
        closed_sorted.len(),
        max_delta,
        tol,
    );
    let slug = command.replace(' ', "-");
    let config = ctx.embedded_config("spectrum", Some(tol));
    ctx.emit(&slug, &command, config, data, &summary, None)?;
    Ok(pass)
}

// ---------------------------------------------------------------------------
// sphere/tube afr
// ---------------------------------------------------------------------------

fn afr(ctx: &Context, want: &str) -> Result<bool> {
    let scenario = &ctx.scenario;
    let spec = ctx.tube_spec_for(want)?;
    let param_dim = scenario.model.manifold_dim() - 1;
    let default_interval = default_focal_interval(scenario.model.as_ref(), spec.radius());

    let mut r = scenario.doc.reader_or_empty("afr");
    let params = read_params(&mut r, param_dim)?;
    let lo = r.get_f64("lo")?.unwrap_or(default_interval.0);
    let hi = r.get_f64("hi")?.unwrap_or(default_interval.1);
    let grid_density = r.get_usize("grid-density")?.unwrap_or(600);
    let tol = ctx.tolerance(r.get_pos_f64("tolerance")?, 1e-5);
    r.finish()?;

    let closed = closed_form_afr(&spec, &params, (lo, hi))?;
    let chart = spec.chart()?;
    let sample = sample_at(
        scenario.model.as_ref(),
        chart.as_ref(),
        scenario.lagrangian.as_ref(),
        0,
        &params,
    )?;
    let numeric = node_focal_radii(&spec, &sample, (lo, hi), grid_density)?;

    let mut max_delta = 0.0f64;
    let mut pass = closed.len() == numeric.len();
    let mut entries = Vec::with_capacity(closed.len());
    for (k, &(s, multiplicity)) in closed.iter().enumerate() {
        // Both lists are ascending; pair by index when the counts agree and
        // fall back to the nearest root for the diagnostic rows otherwise.
        let found = if closed.len() == numeric.len() {
            numeric.get(k)
        } else {
            numeric.iter().min_by(|a, b| {
                (a.s - s).abs().partial_cmp(&(b.s - s).abs()).unwrap()
            })
        };
        match found {
            Some(root) => {
                let delta = (root.s - s).abs();
                max_delta = max_delta.max(delta);
                if delta > tol || root.multiplicity != multiplicity {
                    pass = false;
                }
                entries.push(AfrRow {
                    s,
                    multiplicity,
                    numeric: Some(root.s),
                    delta: Some(delta),
                });
            }
            None => {
                pass = false;
                entries.push(AfrRow {
                    s,
                    multiplicity,
                    numeric: None,
                    delta: None,
                });
            }
        }
    }
    let data = AfrData {
        kind: want.to_string(),
        radius: spec.radius(),
        params: params.clone(),
        lo,
        hi,
        entries,
        max_delta,
        tolerance: tol,
        pass,
    };
    let command = format!("{want} afr");
    let summary = format!(
        "{command} [{}]: {} closed-form radii vs {} numeric, max delta = {:.3e} (tolerance {:.1e})",
        pass_word(pass),
        closed.len(),
        numeric.len(),
        max_delta,
        tol,
    );
    let slug = command.replace(' ', "-");
    let config = ctx.embedded_config("afr", Some(tol));
    ctx.emit(&slug, &command, config, data, &summary, None)?;
    Ok(pass)
}

// ---------------------------------------------------------------------------
// tube check-equifocal / check-isoparametric / reconstruct
// ---------------------------------------------------------------------------

fn equifocal(ctx: &Context) -> Result<bool> {
    let spec = ctx.tube_spec_for("tube")?;
    let default_interval =
        default_focal_interval(ctx.scenario.model.as_ref(), spec.radius());

    let mut r = ctx.scenario.doc.reader_or_empty("equifocal");
    let lo = r.get_f64("lo")?.unwrap_or(default_interval.0);
    let hi = r.get_f64("hi")?.unwrap_or(default_interval.1);
    let grid_density = r.get_usize("grid-density")?.unwrap_or(700);
    let max_nodes = r.get_usize("max-nodes")?.unwrap_or(24);
    let tol = ctx.tolerance(r.get_pos_f64("tolerance")?, 1e-5);
    r.finish()?;

    let immersion = spec.build()?;
    let report = check_equifocal(&spec, &immersion, (lo, hi), grid_density, max_nodes, tol)?;
    let data = EquifocalData {
        node_count: report.node_count,
        max_hausdorff: report.max_hausdorff,
        tolerance: report.tolerance,
        pass: report.pass,
    };
    let summary = format!(
        "tube check-equifocal [{}]: hausdorff {:.3e} over {} nodes (tolerance {:.1e})",
        pass_word(report.pass),
        report.max_hausdorff,
        report.node_count,
        tol,
    );
    let config = ctx.embedded_config("equifocal", Some(tol));
    ctx.emit("tube-equifocal", "tube check-equifocal", config, data, &summary, None)?;
    Ok(report.pass)
}

fn isoparametric(ctx: &Context) -> Result<bool> {
    let spec = ctx.tube_spec_for("tube")?;

    let mut r = ctx.scenario.doc.reader_or_empty("isoparametric");
    let t_grid = r
        .get_f64_list("offsets")?
        .unwrap_or_else(|| default_t_grid(spec.radius()));
    let max_nodes = r.get_usize("max-nodes")?.unwrap_or(48);
    let tol = ctx.tolerance(r.get_pos_f64("tolerance")?, 1e-5);
    r.finish()?;

    let report = check_isoparametric(&spec, &t_grid, max_nodes, tol)?;
    let data = IsoparametricData {
        offsets: report
            .offsets
            .iter()
            .map(|&(t, spread)| OffsetRow { t, spread })
            .collect(),
        max_spread: report.max_spread,
        tolerance: report.tolerance,
        pass: report.pass,
    };
    let summary = format!(
        "tube check-isoparametric [{}]: max H_F spread {:.3e} over {} offsets (tolerance {:.1e})",
        pass_word(report.pass),
        report.max_spread,
        t_grid.len(),
        tol,
    );
    let config = ctx.embedded_config("isoparametric", Some(tol));
    ctx.emit(
        "tube-isoparametric",
        "tube check-isoparametric",
        config,
        data,
        &summary,
        None,
    )?;
    Ok(report.pass)
}

fn reconstruct(ctx: &Context) -> Result<bool> {
    let spec = ctx.tube_spec_for("tube")?;

    let mut r = ctx.scenario.doc.reader_or_empty("reconstruct");
    let collapse_radius = r.get_pos_f64("collapse-radius")?.unwrap_or(spec.radius());
    let max_nodes = r.get_usize("max-nodes")?.unwrap_or(64);
    let tol = ctx.tolerance(r.get_pos_f64("tolerance")?, 1e-6);
    r.finish()?;

    let immersion = spec.build()?;
    // A non-focal collapse radius surfaces as Error::NotFocal (exit 3).
    let report = reconstruct_from_focal(&spec, &immersion, collapse_radius, max_nodes)?;
    let pass = report.collapse_residual <= tol && report.max_rebuild_distance <= tol;
    let data = ReconstructData {
        collapse_radius,
        collapse_residual: report.collapse_residual,
        max_rebuild_distance: report.max_rebuild_distance,
        tolerance: tol,
        pass,
    };
    let summary = format!(
        "tube reconstruct [{}]: collapse residual {:.3e}, rebuild distance {:.3e} (tolerance {:.1e})",
        pass_word(pass),
        report.collapse_residual,
        report.max_rebuild_distance,
        tol,
    );
    let config = ctx.embedded_config("reconstruct", Some(tol));
    ctx.emit("tube-reconstruct", "tube reconstruct", config, data, &summary, None)?;
    Ok(pass)
}

// ---------------------------------------------------------------------------
// verify variation / critical
// ---------------------------------------------------------------------------

fn variation_options(r: &mut SectionReader) -> Result<VariationOptions> {
    let mut options = VariationOptions::default();
    options.step = r.get_pos_f64("step")?.unwrap_or(DEFAULT_FD_STEP);
    if let Some(order) = r.get_usize("order")? {
        if order != 2 && order != 4 {
            return Err(Error::Usage(format!("stencil order must be 2 or 4, got {order}")));
        }
        options.order = order;
    }
    if let Some(retries) = r.get_usize("max-retries")? {
        options.max_retries = retries;
    }
    Ok(options)
}

fn verify_variation(ctx: &Context) -> Result<bool> {
    let scenario = &ctx.scenario;

    let mut r = scenario.doc.reader_or_empty("variation");
    let count = r.get_usize("count")?.unwrap_or(5);
    let amplitude = r.get_pos_f64("amplitude")?.unwrap_or(1.0);
    let volume_preserving = r.get_bool("volume-preserving")?.unwrap_or(false);
    let options = variation_options(&mut r)?;
    let tol = ctx.tolerance(r.get_pos_f64("tolerance")?, 1e-4);
    r.finish()?;
    if count == 0 {
        return Err(Error::Usage("variation count must be at least 1".into()));
    }

    let immersion = ctx.immersion()?;
    let mut cases = Vec::with_capacity(count);
    let mut max_rel_error = 0.0f64;
    for k in 0..count {
        let field = scale_field(
            &random_field(scenario.model.ambient_dim(), scenario.run.seed.wrapping_add(k as u64)),
            amplitude,
        );
        let variation = if volume_preserving {
            Variation::volume_preserving(field)
        } else {
            Variation::new(field)
        };
        let report = verify_first_variation(
            &scenario.model,
            &immersion,
            &scenario.lagrangian,
            &variation,
            &options,
        )?;
        max_rel_error = max_rel_error.max(report.rel_error);
        cases.push(VariationCase {
            index: k,
            fd_derivative: report.fd_derivative,
            formula_value: report.formula_value,
            abs_error: report.abs_error,
            rel_error: report.rel_error,
            step: report.step,
        });
    }
    let pass = max_rel_error <= tol;
    let data = VariationData {
        volume_preserving,
        cases,
        max_rel_error,
        tolerance: tol,
        pass,
    };
    let summary = format!(
        "verify variation [{}]: max relative error {:.3e} over {} variations (tolerance {:.1e})",
        pass_word(pass),
        max_rel_error,
        count,
        tol,
    );
    let config = ctx.embedded_config("variation", Some(tol));
    ctx.emit("verify-variation", "verify variation", config, data, &summary, None)?;
    Ok(pass)
}

fn verify_critical(ctx: &Context) -> Result<bool> {
    let scenario = &ctx.scenario;

    let mut r = scenario.doc.reader_or_empty("critical");
    let count = r.get_usize("count")?.unwrap_or(8);
    let amplitude = r.get_pos_f64("amplitude")?.unwrap_or(1.0);
    let mode = match r.get("mode").unwrap_or("volume-preserving") {
        "free" => CriticalMode::Free,
        "volume-preserving" => CriticalMode::VolumePreserving,
        other => {
            return Err(Error::Usage(format!(
                "mode must be free or volume-preserving, got `{other}`"
            )))
        }
    };
    let options = variation_options(&mut r)?;
    let tol = ctx.tolerance(r.get_pos_f64("tolerance")?, 1e-6);
    r.finish()?;
    if count == 0 {
        return Err(Error::Usage("critical-point probe count must be at least 1".into()));
    }

    let immersion = ctx.immersion()?;
    let report = verify_critical_point(
        &scenario.model,
        &immersion,
        &scenario.lagrangian,
        mode,
        count,
        scenario.run.seed,
        amplitude,
        &options,
    )?;
    let pass = report.max_abs_derivative <= tol;
    let mode_name = match mode {
        CriticalMode::Free => "free",
        CriticalMode::VolumePreserving => "volume-preserving",
    };
    let data = CriticalData {
        mode: mode_name.to_string(),
        count,
        amplitude,
        derivatives: report.derivatives.clone(),
        max_abs_derivative: report.max_abs_derivative,
        hf_max_abs: report.hf_max_abs,
        hf_spread: report.hf_spread,
        area: report.area,
        energy: immersion.energy(),
        tolerance: tol,
        pass,
    };
    let summary = format!(
        "verify critical [{}]: max |dE| = {:.3e} over {} {} variations (tolerance {:.1e}), \
         H_F spread {:.3e}",
        pass_word(pass),
        report.max_abs_derivative,
        count,
        mode_name,
        tol,
        report.hf_spread,
    );
    let config = ctx.embedded_config("critical", Some(tol));
    ctx.emit("verify-critical", "verify critical", config, data, &summary, None)?;
    Ok(pass)
}

// ---------------------------------------------------------------------------
// flow run
// ---------------------------------------------------------------------------

fn flow_run(ctx: &Context) -> Result<bool> {
    let scenario = &ctx.scenario;

    let mut r = scenario.doc.reader_or_empty("flow");
    let steps = r.get_usize("steps")?.unwrap_or(50);
    let dt = r.get_pos_f64("dt")?.unwrap_or(1e-4);
    let mode = match r.get("mode").unwrap_or("volume-preserving") {
        "free" => FlowMode::Free,
        "volume-preserving" => FlowMode::VolumePreserving,
        other => {
            return Err(Error::Usage(format!(
                "mode must be free or volume-preserving, got `{other}`"
            )))
        }
    };
    r.finish()?;

    let immersion = ctx.immersion()?;
    let (report, _surface) = gradient_flow(
        scenario.model.clone(),
        scenario.lagrangian.clone(),
        &immersion,
        steps,
        dt,
        mode,
    )?;

    let initial_energy = report.rows.first().map(|r| r.energy).unwrap_or(f64::NAN);
    let mut monotone = true;
    for pair in report.rows.windows(2) {
        let slack = 1e-12 * (1.0 + pair[0].energy.abs());
        if pair[1].energy > pair[0].energy + slack {
            monotone = false;
        }
    }
    let last = report.rows.last().expect("flow reports at least the initial row");

    let mut csv = Csv::new(&["step", "energy", "max_abs_hf", "hf_spread", "dt", "halvings"]);
    for row in &report.rows {
        csv.push(vec![
            row.step.to_string(),
            fmt_num(row.energy),
            fmt_num(row.max_abs_hf),
            fmt_num(row.hf_spread),
            fmt_num(row.dt),
            row.halvings.to_string(),
        ]);
    }

    let mode_name = match mode {
        FlowMode::Free => "free",
        FlowMode::VolumePreserving => "volume-preserving",
    };
    let data = FlowSummary {
        mode: mode_name.to_string(),
        steps,
        initial_energy,
        final_energy: report.final_energy,
        energy_drop: initial_energy - report.final_energy,
        monotone,
        final_max_abs_hf: last.max_abs_hf,
        final_hf_spread: last.hf_spread,
        rows: report
            .rows
            .iter()
            .map(|row| FlowRowOut {
                step: row.step,
                energy: row.energy,
                max_abs_hf: row.max_abs_hf,
                hf_spread: row.hf_spread,
                dt: row.dt,
                halvings: row.halvings,
            })
            .collect(),
    };
    let summary = format!(
        "flow run [{}]: {} steps ({}), energy {:.9e} -> {:.9e}, monotone: {}",
        pass_word(monotone),
        steps,
        mode_name,
        initial_energy,
        report.final_energy,
        monotone,
    );
    let config = ctx.embedded_config("flow", None);
    ctx.emit(
        "flow-run",
        "flow run",
        config,
        data,
        &summary,
        Some(("flow-run.csv", &csv)),
    )?;
    Ok(monotone)
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

fn run_selftest(global: &GlobalArgs) -> Result<bool> {
    // The battery pins its own scenarios and seeds; the config (optional
    // here) only contributes run settings and provenance for the report.
    let mut doc = match &global.config {
        Some(path) => {
            let mut doc = ConfigDoc::from_path(path)?;
            doc.apply_overrides_from(std::env::vars())?;
            doc.check_section_names()?;
            doc
        }
        None => ConfigDoc::default(),
    };
    if let Some(threads) = global.threads {
        doc.set("run", "threads", &threads.to_string());
    }
    if let Some(out) = &global.out {
        doc.set("run", "out", &out.to_string_lossy());
    }
    let run = wulff_core::config::build_run_settings(&doc)?;
    init_threads(run.threads);
    let out = global
        .out
        .clone()
        .or_else(|| run.out.as_ref().map(PathBuf::from));

    let mut criteria = Vec::with_capacity(acceptance::criterion_count());
    for index in 1..=acceptance::criterion_count() {
        let result = acceptance::run_criterion(index);
        println!("{}", acceptance::format_line(&result));
        criteria.push(CriterionRow {
            index: result.index,
            name: result.name.to_string(),
            pass: result.pass,
            seconds: result.seconds,
            detail: result.detail.clone(),
        });
    }
    let passed = criteria.iter().filter(|c| c.pass).count();
    let failed = criteria.len() - passed;
    let data = SelftestData {
        criteria,
        passed,
        failed,
    };
    let envelope = Envelope::new("selftest", doc.canonical_string(), data);
    if let Some(dir) = &out {
        let path = dir.join("selftest.json");
        envelope.write_json(&path)?;
        println!("wrote {}", path.display());
    } else {
        print!("{}", envelope.to_json()?);
    }
    println!("selftest [{}]: {passed} passed, {failed} failed", pass_word(failed == 0));
    Ok(failed == 0)
}
