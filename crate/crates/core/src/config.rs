//! Runtime configuration: a small sectioned key-value format, environment
//! overrides, and the name-keyed registries that turn section text into the
//! trait objects the rest of the crate works with.
//!
//! The file grammar is deliberately flat:
//!
//! ```text
//! # full-line comments start with '#' or ';'
//! [ambient]
//! model = sphere-product
//! p = 2
//! q = 2
//!
//! [lagrangian]
//! family = angle-profile
//! coefficients = 1.0, 0.12, 0.03
//!
//! [surface]
//! kind = sphere
//! radius = 0.35
//! resolution = 32
//!
//! [run]
//! seed = 7
//! threads = 0
//! tolerance = 1e-5
//! ```
//!
//! Section and key names use lowercase letters, digits and `-`. Values keep
//! everything after the first `=` (trimmed), so inline `#` is part of the
//! value. Parse and validation errors carry the offending line number.
//!
//! Environment overrides use the prefix `WULFF_`: the variable
//! `WULFF_<SECTION>_<REST>` sets key `rest` (lowercased, `_` mapped to `-`)
//! in `[section]`, e.g. `WULFF_RUN_SEED=9` or `WULFF_SURFACE_BIG_RADIUS=2.5`.
//! Overrides are applied after the file is parsed and before command-line
//! flags, which take final precedence.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hypersurface::{AnisotropicSphereChart, Chart, GraphOverSphereChart, TorusChart};
use crate::lagrangian::{AngleProfile, IsotropicConstant, Lagrangian, QuadraticNorm};
use crate::symspace::{AmbientSpace, EuclideanSpace, ProductSpace};
use crate::tubes::{TubeBase, TubeSpec};

/// Prefix for environment-variable overrides.
pub const ENV_PREFIX: &str = "WULFF_";

/// Sections the tool understands; anything else is a likely typo and is
/// rejected when the document is resolved.
pub const KNOWN_SECTIONS: &[&str] = &[
    "ambient",
    "lagrangian",
    "surface",
    "run",
    "spectrum",
    "afr",
    "variation",
    "critical",
    "flow",
    "equifocal",
    "isoparametric",
    "reconstruct",
];

fn cfg_err(line: Option<usize>, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        msg: msg.into(),
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

// ---------------------------------------------------------------------------
// Document model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    /// Source line, or `None` for values injected by overrides.
    line: Option<usize>,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    line: Option<usize>,
    entries: Vec<Entry>,
}

/// Parsed configuration document: ordered sections of ordered key-value
/// pairs, each remembering where it came from.
#[derive(Debug, Clone, Default)]
pub struct ConfigDoc {
    sections: Vec<Section>,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = ConfigDoc::default();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    cfg_err(Some(lineno), format!("malformed section header `{line}`"))
                })?;
                let name = name.trim();
                if !valid_name(name) {
                    return Err(cfg_err(
                        Some(lineno),
                        format!("section name `{name}` must use lowercase letters, digits or '-'"),
                    ));
                }
                if let Some(prev) = doc.sections.iter().find(|s| s.name == name) {
                    return Err(cfg_err(
                        Some(lineno),
                        format!(
                            "section [{name}] already declared on line {}",
                            prev.line.unwrap_or(0)
                        ),
                    ));
                }
                doc.sections.push(Section {
                    name: name.to_string(),
                    line: Some(lineno),
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                cfg_err(
                    Some(lineno),
                    format!("expected `key = value` or `[section]`, got `{line}`"),
                )
            })?;
            let key = key.trim();
            let value = value.trim();
            if !valid_name(key) {
                return Err(cfg_err(
                    Some(lineno),
                    format!("key `{key}` must use lowercase letters, digits or '-'"),
                ));
            }
            if value.is_empty() {
                return Err(cfg_err(Some(lineno), format!("key `{key}` has an empty value")));
            }
            let section = doc.sections.last_mut().ok_or_else(|| {
                cfg_err(
                    Some(lineno),
                    format!("key `{key}` appears before any [section] header"),
                )
            })?;
            if let Some(prev) = section.entries.iter().find(|e| e.key == key) {
                return Err(cfg_err(
                    Some(lineno),
                    format!(
                        "duplicate key `{key}` in [{}] (first set on line {})",
                        section.name,
                        prev.line.unwrap_or(0)
                    ),
                ));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: Some(lineno),
            });
        }
        Ok(doc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Insert or replace a key; creates the section if needed. Used by
    /// environment and command-line overrides, so entries set this way carry
    /// no source line.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        let sec = match self.sections.iter_mut().find(|s| s.name == section) {
            Some(s) => s,
            None => {
                self.sections.push(Section {
                    name: section.to_string(),
                    line: None,
                    entries: Vec::new(),
                });
                self.sections.last_mut().unwrap()
            }
        };
        match sec.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => {
                e.value = value.to_string();
                e.line = None;
            }
            None => sec.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: None,
            }),
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|s| s.name == section)?
            .entries
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.iter().any(|s| s.name == section)
    }

    /// Apply `WULFF_<SECTION>_<REST>` overrides from an explicit variable
    /// list (exposed for tests; the CLI passes `std::env::vars()`).
    pub fn apply_overrides_from<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut pending: Vec<(String, String, String)> = Vec::new();
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let Some((section, key_part)) = rest.split_once('_') else {
                return Err(cfg_err(
                    None,
                    format!("override variable {name} needs the form {ENV_PREFIX}SECTION_KEY"),
                ));
            };
            let section = section.to_ascii_lowercase();
            let key = key_part.to_ascii_lowercase().replace('_', "-");
            if !valid_name(&section) || !valid_name(&key) {
                return Err(cfg_err(None, format!("override variable {name} is malformed")));
            }
            pending.push((section, key, value));
        }
        // Environment iteration order is unspecified; sort so the resolved
        // document is reproducible.
        pending.sort();
        for (section, key, value) in pending {
            self.set(&section, &key, &value);
        }
        Ok(())
    }

    /// Reject sections the tool does not know about.
    pub fn check_section_names(&self) -> Result<()> {
        for sec in &self.sections {
            if !KNOWN_SECTIONS.contains(&sec.name.as_str()) {
                return Err(cfg_err(
                    sec.line,
                    format!(
                        "unknown section [{}]; expected one of: {}",
                        sec.name,
                        KNOWN_SECTIONS.join(", ")
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Canonical text form of the resolved document, embedded verbatim in
    /// every report so results carry their full provenance.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        for sec in &self.sections {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{}]\n", sec.name));
            for e in &sec.entries {
                out.push_str(&format!("{} = {}\n", e.key, e.value));
            }
        }
        out
    }

    /// Typed reader over one section; `None` if the section is absent.
    pub fn reader<'a>(&'a self, section: &str) -> Option<SectionReader<'a>> {
        self.sections
            .iter()
            .find(|s| s.name == section)
            .map(|sec| SectionReader {
                section: sec.name.clone(),
                entries: &sec.entries,
                used: HashSet::new(),
            })
    }

    /// Reader that treats a missing section as empty, so each key falls
    /// back to its default.
    pub fn reader_or_empty<'a>(&'a self, section: &str) -> SectionReader<'a> {
        self.reader(section).unwrap_or(SectionReader {
            section: section.to_string(),
            entries: &[],
            used: HashSet::new(),
        })
    }

    /// Typed reader that fails with a pointer at the missing section.
    pub fn require_reader<'a>(&'a self, section: &str) -> Result<SectionReader<'a>> {
        self.reader(section)
            .ok_or_else(|| cfg_err(None, format!("missing required section [{section}]")))
    }
}

// ---------------------------------------------------------------------------
// Typed section access
// ---------------------------------------------------------------------------

/// Borrowing reader over a single section. Getters record which keys were
/// consumed; `finish()` turns any leftovers into an error so typos in key
/// names cannot silently change a run.
pub struct SectionReader<'a> {
    section: String,
    entries: &'a [Entry],
    used: HashSet<&'a str>,
}

impl<'a> SectionReader<'a> {
    pub fn name(&self) -> &str {
        &self.section
    }

    fn entry(&mut self, key: &str) -> Option<&'a Entry> {
        let e = self.entries.iter().find(|e| e.key == key)?;
        self.used.insert(e.key.as_str());
        Some(e)
    }

    pub fn get(&mut self, key: &str) -> Option<&'a str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    pub fn require(&mut self, key: &str) -> Result<&'a str> {
        let section = self.section.clone();
        self.get(key)
            .ok_or_else(|| cfg_err(None, format!("[{section}] is missing required key `{key}`")))
    }

    fn parse_with<T, F>(&mut self, key: &str, what: &str, f: F) -> Result<Option<T>>
    where
        F: Fn(&str) -> Option<T>,
    {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).ok_or_else(|| {
                cfg_err(
                    e.line,
                    format!("[{}] {} = {} is not {what}", self.section, key, e.value),
                )
            }),
        }
    }

    pub fn get_f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, "a number", |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
    }

    pub fn get_usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.parse_with(key, "a non-negative integer", |s| s.parse::<usize>().ok())
    }

    pub fn get_u64(&mut self, key: &str) -> Result<Option<u64>> {
        self.parse_with(key, "a non-negative integer", |s| s.parse::<u64>().ok())
    }

    pub fn get_bool(&mut self, key: &str) -> Result<Option<bool>> {
        self.parse_with(key, "true or false", |s| match s {
            "true" | "yes" | "1" => Some(true),
            "false" | "no" | "0" => Some(false),
            _ => None,
        })
    }

    /// Comma-separated list of numbers.
    pub fn get_f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.parse_with(key, "a comma-separated list of numbers", |s| {
            s.split(',')
                .map(|p| p.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .filter(|v| !v.is_empty())
        })
    }

    /// A strictly positive number.
    pub fn get_pos_f64(&mut self, key: &str) -> Result<Option<f64>> {
        let section = self.section.clone();
        match self.get_f64(key)? {
            Some(x) if x > 0.0 => Ok(Some(x)),
            Some(x) => Err(cfg_err(
                self.line_of(key),
                format!("[{section}] {key} must be positive, got {x}"),
            )),
            None => Ok(None),
        }
    }

    pub fn require_pos_f64(&mut self, key: &str) -> Result<f64> {
        let section = self.section.clone();
        self.get_pos_f64(key)?
            .ok_or_else(|| cfg_err(None, format!("[{section}] is missing required key `{key}`")))
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.key == key).and_then(|e| e.line)
    }

    /// Error on keys nobody consumed.
    pub fn finish(self) -> Result<()> {
        for e in self.entries {
            if !self.used.contains(e.key.as_str()) {
                return Err(cfg_err(
                    e.line,
                    format!("unknown key `{}` in [{}]", e.key, self.section),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Registries
// ---------------------------------------------------------------------------

/// Registry row: a family name plus the constructor that reads its
/// parameters from the section and builds the trait object.
pub struct ModelEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub build: fn(&mut SectionReader<'_>) -> Result<Arc<dyn AmbientSpace>>,
}

fn build_euclidean(r: &mut SectionReader<'_>) -> Result<Arc<dyn AmbientSpace>> {
    let dim = r.get_usize("dim")?.unwrap_or(3);
    Ok(Arc::new(EuclideanSpace::new(dim)?))
}

fn build_sphere_product(r: &mut SectionReader<'_>) -> Result<Arc<dyn AmbientSpace>> {
    let p = r.get_usize("p")?.unwrap_or(2);
    let q = r.get_usize("q")?.unwrap_or(2);
    Ok(Arc::new(ProductSpace::spheres(p, q)?))
}

fn build_hyperbolic_product(r: &mut SectionReader<'_>) -> Result<Arc<dyn AmbientSpace>> {
    let p = r.get_usize("p")?.unwrap_or(2);
    let q = r.get_usize("q")?.unwrap_or(2);
    Ok(Arc::new(ProductSpace::hyperbolic(p, q)?))
}

/// Ambient-model registry, selected by `[ambient] model = <name>`.
pub const MODEL_REGISTRY: &[ModelEntry] = &[
    ModelEntry {
        name: "euclidean",
        summary: "flat R^m (keys: dim, default 3)",
        build: build_euclidean,
    },
    ModelEntry {
        name: "sphere-product",
        summary: "S^p(1) x S^q(1) (keys: p, q, default 2, 2)",
        build: build_sphere_product,
    },
    ModelEntry {
        name: "hyperbolic-product",
        summary: "H^p(-1) x H^q(-1) (keys: p, q, default 2, 2)",
        build: build_hyperbolic_product,
    },
];

/// Registry row for surface-energy integrands. Constructors see the ambient
/// model so they can check holonomy compatibility and pick up dimensions.
pub struct LagrangianEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub build:
        fn(&mut SectionReader<'_>, &Arc<dyn AmbientSpace>) -> Result<Arc<dyn Lagrangian>>,
}

fn build_constant(
    r: &mut SectionReader<'_>,
    model: &Arc<dyn AmbientSpace>,
) -> Result<Arc<dyn Lagrangian>> {
    let c = r.get_pos_f64("value")?.unwrap_or(1.0);
    Ok(Arc::new(IsotropicConstant::new(c, model.manifold_dim() - 1)?))
}

fn build_quadratic_form(
    r: &mut SectionReader<'_>,
    model: &Arc<dyn AmbientSpace>,
) -> Result<Arc<dyn Lagrangian>> {
    if model.tangent_split().is_some() {
        return Err(cfg_err(
            None,
            format!(
                "[lagrangian] family quadratic-form is only holonomy invariant over the flat \
                 model, but [ambient] selects model = {}; use family constant or angle-profile \
                 with a product model",
                model.name()
            ),
        ));
    }
    let diag = r.get_f64_list("diagonal")?.ok_or_else(|| {
        cfg_err(None, "[lagrangian] quadratic-form needs `diagonal = d0, d1, ...`".to_string())
    })?;
    let want = model.manifold_dim();
    if diag.len() != want {
        return Err(cfg_err(
            r.line_of("diagonal"),
            format!("[lagrangian] diagonal needs {want} entries for this model, got {}", diag.len()),
        ));
    }
    let q = DMatrix::from_diagonal(&DVector::from_vec(diag));
    Ok(Arc::new(QuadraticNorm::new(q)?))
}

fn build_angle_profile(
    r: &mut SectionReader<'_>,
    model: &Arc<dyn AmbientSpace>,
) -> Result<Arc<dyn Lagrangian>> {
    let split = model.tangent_split().ok_or_else(|| {
        cfg_err(
            None,
            format!(
                "[lagrangian] family angle-profile needs a two-factor ambient model, but \
                 [ambient] selects model = {}; use sphere-product or hyperbolic-product",
                model.name()
            ),
        )
    })?;
    let coeffs = r.get_f64_list("coefficients")?.ok_or_else(|| {
        cfg_err(None, "[lagrangian] angle-profile needs `coefficients = c0, c1, ...`".to_string())
    })?;
    Ok(Arc::new(AngleProfile::new(coeffs, split, model.manifold_dim() - 1)?))
}

/// Lagrangian registry, selected by `[lagrangian] family = <name>`.
pub const LAGRANGIAN_REGISTRY: &[LagrangianEntry] = &[
    LagrangianEntry {
        name: "constant",
        summary: "F = c, the area functional (keys: value, default 1)",
        build: build_constant,
    },
    LagrangianEntry {
        name: "quadratic-form",
        summary: "F = sqrt(v^T Q v), flat model only (keys: diagonal)",
        build: build_quadratic_form,
    },
    LagrangianEntry {
        name: "angle-profile",
        summary: "F = poly(cos 2theta) on product models (keys: coefficients)",
        build: build_angle_profile,
    },
];

fn registry_names<T>(rows: &[T], name: fn(&T) -> &'static str) -> String {
    rows.iter().map(name).collect::<Vec<_>>().join(", ")
}

/// Build the ambient model from `[ambient]`.
pub fn build_model(doc: &ConfigDoc) -> Result<Arc<dyn AmbientSpace>> {
    let mut r = doc.require_reader("ambient")?;
    let name = r.require("model")?;
    let entry = MODEL_REGISTRY.iter().find(|m| m.name == name).ok_or_else(|| {
        cfg_err(
            r.line_of("model"),
            format!(
                "unknown [ambient] model `{name}`; registered models: {}",
                registry_names(MODEL_REGISTRY, |m| m.name)
            ),
        )
    })?;
    let model = (entry.build)(&mut r)?;
    r.finish()?;
    Ok(model)
}

/// Build the surface energy from `[lagrangian]`, checking compatibility with
/// the ambient model.
pub fn build_lagrangian(
    doc: &ConfigDoc,
    model: &Arc<dyn AmbientSpace>,
) -> Result<Arc<dyn Lagrangian>> {
    let mut r = doc.require_reader("lagrangian")?;
    let name = r.require("family")?;
    let entry = LAGRANGIAN_REGISTRY
        .iter()
        .find(|l| l.name == name)
        .ok_or_else(|| {
            cfg_err(
                r.line_of("family"),
                format!(
                    "unknown [lagrangian] family `{name}`; registered families: {}",
                    registry_names(LAGRANGIAN_REGISTRY, |l| l.name)
                ),
            )
        })?;
    let lagrangian = (entry.build)(&mut r, model)?;
    r.finish()?;
    Ok(lagrangian)
}

// ---------------------------------------------------------------------------
// Surface selection
// ---------------------------------------------------------------------------

/// Hypersurface family selected by `[surface] kind = <name>`, with its
/// parameters validated but not yet built.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceConfig {
    /// Anisotropic geodesic sphere (Wulff-type) of the given radius.
    Sphere { radius: f64, resolution: usize },
    /// Anisotropic tube over the first factor of a compact product model.
    Tube { radius: f64, resolution: usize },
    /// Torus of revolution in flat R^3.
    Torus {
        big_radius: f64,
        small_radius: f64,
        resolution: usize,
    },
    /// Radial graph `r (1 + bump v3^2)` over the round sphere in flat R^3.
    Graph {
        radius: f64,
        bump: f64,
        resolution: usize,
    },
}

impl SurfaceConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SurfaceConfig::Sphere { .. } => "sphere",
            SurfaceConfig::Tube { .. } => "tube",
            SurfaceConfig::Torus { .. } => "torus",
            SurfaceConfig::Graph { .. } => "graph",
        }
    }

    pub fn resolution(&self) -> usize {
        match self {
            SurfaceConfig::Sphere { resolution, .. }
            | SurfaceConfig::Tube { resolution, .. }
            | SurfaceConfig::Torus { resolution, .. }
            | SurfaceConfig::Graph { resolution, .. } => *resolution,
        }
    }

    /// Tube machinery (spectra, focal radii, parallel-surface checks) only
    /// applies to the sphere and tube kinds.
    pub fn tube_spec(
        &self,
        model: &Arc<dyn AmbientSpace>,
        lagrangian: &Arc<dyn Lagrangian>,
    ) -> Result<TubeSpec> {
        match self {
            SurfaceConfig::Sphere { radius, resolution } => TubeSpec::new(
                model.clone(),
                lagrangian.clone(),
                TubeBase::Point,
                *radius,
                *resolution,
            ),
            SurfaceConfig::Tube { radius, resolution } => TubeSpec::new(
                model.clone(),
                lagrangian.clone(),
                TubeBase::ReflectiveFactor,
                *radius,
                *resolution,
            ),
            other => Err(Error::Usage(format!(
                "this command needs [surface] kind = sphere or tube, got {}",
                other.kind_name()
            ))),
        }
    }

    /// Chart for general-purpose commands (build, variation, flow).
    pub fn chart(
        &self,
        model: &Arc<dyn AmbientSpace>,
        lagrangian: &Arc<dyn Lagrangian>,
    ) -> Result<Arc<dyn Chart>> {
        match self {
            SurfaceConfig::Sphere { radius, resolution } => Ok(Arc::new(
                AnisotropicSphereChart::new(model.clone(), lagrangian.clone(), *radius, *resolution)?,
            )),
            SurfaceConfig::Tube { .. } => self.tube_spec(model, lagrangian)?.chart(),
            SurfaceConfig::Torus {
                big_radius,
                small_radius,
                resolution,
            } => Ok(Arc::new(TorusChart::new(
                *big_radius,
                *small_radius,
                *resolution,
                *resolution,
            )?)),
            SurfaceConfig::Graph {
                radius,
                bump,
                resolution,
            } => Ok(Arc::new(GraphOverSphereChart::new(*radius, *bump, *resolution)?)),
        }
    }
}

/// Build the surface selection from `[surface]`.
pub fn build_surface(doc: &ConfigDoc, model: &Arc<dyn AmbientSpace>) -> Result<SurfaceConfig> {
    let mut r = doc.require_reader("surface")?;
    let kind = r.require("kind")?;
    let resolution = r.get_usize("resolution")?.unwrap_or(32);
    if resolution < 16 {
        return Err(cfg_err(
            r.line_of("resolution"),
            format!("[surface] resolution must be at least 16 per chart direction, got {resolution}"),
        ));
    }
    if resolution % 2 != 0 {
        return Err(cfg_err(
            r.line_of("resolution"),
            format!("[surface] resolution must be even, got {resolution}"),
        ));
    }
    let surface = match kind {
        "sphere" => SurfaceConfig::Sphere {
            radius: r.get_pos_f64("radius")?.unwrap_or(0.3),
            resolution,
        },
        "tube" => {
            if model.epsilon() != 1.0 {
                return Err(cfg_err(
                    None,
                    format!(
                        "[surface] kind = tube needs the compact [ambient] model sphere-product, \
                         got model = {}",
                        model.name()
                    ),
                ));
            }
            SurfaceConfig::Tube {
                radius: r.get_pos_f64("radius")?.unwrap_or(0.3),
                resolution,
            }
        }
        "torus" => {
            let big_radius = r.get_pos_f64("big-radius")?.unwrap_or(2.0);
            let small_radius = r.get_pos_f64("small-radius")?.unwrap_or(0.75);
            if model.name() != "euclidean" || model.ambient_dim() != 3 {
                return Err(cfg_err(
                    None,
                    format!(
                        "[surface] kind = torus lives in flat R^3; [ambient] selects model = {} \
                         with ambient dimension {}",
                        model.name(),
                        model.ambient_dim()
                    ),
                ));
            }
            SurfaceConfig::Torus {
                big_radius,
                small_radius,
                resolution,
            }
        }
        "graph" => {
            if model.name() != "euclidean" || model.ambient_dim() != 3 {
                return Err(cfg_err(
                    None,
                    format!(
                        "[surface] kind = graph lives in flat R^3; [ambient] selects model = {} \
                         with ambient dimension {}",
                        model.name(),
                        model.ambient_dim()
                    ),
                ));
            }
            SurfaceConfig::Graph {
                radius: r.get_pos_f64("radius")?.unwrap_or(1.0),
                bump: r.get_f64("bump")?.unwrap_or(0.0),
                resolution,
            }
        }
        other => {
            return Err(cfg_err(
                r.line_of("kind"),
                format!(
                    "unknown [surface] kind `{other}`; registered kinds: sphere, tube, torus, graph"
                ),
            ))
        }
    };
    r.finish()?;
    Ok(surface)
}

// ---------------------------------------------------------------------------
// Run settings and the resolved scenario
// ---------------------------------------------------------------------------

/// Global run parameters from `[run]`; every field has a default so the
/// section is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    /// Seed fixing every randomized sample set in the run.
    pub seed: u64,
    /// Rayon thread count; 0 means all available cores.
    pub threads: usize,
    /// Tolerance for pass/fail checks; `None` falls back to each command's
    /// documented default.
    pub tolerance: Option<f64>,
    /// Output directory for reports, if any.
    pub out: Option<String>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            seed: 7,
            threads: 0,
            tolerance: None,
            out: None,
        }
    }
}

pub fn build_run_settings(doc: &ConfigDoc) -> Result<RunSettings> {
    let mut settings = RunSettings::default();
    let Some(mut r) = doc.reader("run") else {
        return Ok(settings);
    };
    if let Some(seed) = r.get_u64("seed")? {
        settings.seed = seed;
    }
    if let Some(threads) = r.get_usize("threads")? {
        settings.threads = threads;
    }
    if let Some(tol) = r.get_pos_f64("tolerance")? {
        settings.tolerance = Some(tol);
    }
    if let Some(out) = r.get("out") {
        settings.out = Some(out.to_string());
    }
    r.finish()?;
    Ok(settings)
}

/// Fully resolved scenario: the trait objects every subcommand starts from,
/// plus the post-override document for report embedding.
pub struct Scenario {
    pub model: Arc<dyn AmbientSpace>,
    pub lagrangian: Arc<dyn Lagrangian>,
    pub surface: Option<SurfaceConfig>,
    pub run: RunSettings,
    pub doc: ConfigDoc,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("model", &self.model.name())
            .field("lagrangian", &self.lagrangian.family())
            .field("surface", &self.surface)
            .field("run", &self.run)
            .finish()
    }
}

impl Scenario {
    /// Resolve a parsed (and already overridden) document.
    pub fn from_doc(doc: ConfigDoc) -> Result<Self> {
        doc.check_section_names()?;
        let model = build_model(&doc)?;
        let lagrangian = build_lagrangian(&doc, &model)?;
        let surface = if doc.has_section("surface") {
            Some(build_surface(&doc, &model)?)
        } else {
            None
        };
        let run = build_run_settings(&doc)?;
        Ok(Self {
            model,
            lagrangian,
            surface,
            run,
            doc,
        })
    }

    /// The surface selection, or a usage error naming the missing section.
    pub fn surface(&self) -> Result<&SurfaceConfig> {
        self.surface
            .as_ref()
            .ok_or_else(|| cfg_err(None, "this command needs a [surface] section".to_string()))
    }
}

/// Default chart parameters for point evaluations (spectra, focal radii):
/// the first parameter is the interesting angle, the rest sit at fixed
/// generic interior values.
pub fn params_from_theta(theta: f64, param_dim: usize) -> Vec<f64> {
    const REST: [f64; 7] = [1.1, 0.7, 0.9, 1.3, 0.6, 1.0, 0.8];
    let mut params = Vec::with_capacity(param_dim);
    params.push(theta);
    for i in 1..param_dim {
        params.push(REST[(i - 1) % REST.len()]);
    }
    params
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
[ambient]
model = sphere-product
p = 2
q = 2

[lagrangian]
family = angle-profile
coefficients = 1.0, 0.12, 0.03

[surface]
kind = sphere
radius = 0.35
resolution = 16

[run]
seed = 11
tolerance = 1e-6
";

    #[test]
    fn a_full_document_resolves_into_trait_objects() {
        let doc = ConfigDoc::parse(BASE).unwrap();
        let scenario = Scenario::from_doc(doc).unwrap();
        assert_eq!(scenario.model.name(), "sphere-product");
        assert_eq!(scenario.lagrangian.family(), "angle-profile");
        assert_eq!(scenario.run.seed, 11);
        assert_eq!(scenario.run.threads, 0);
        let surface = scenario.surface().unwrap();
        assert_eq!(surface.kind_name(), "sphere");
        assert_eq!(surface.resolution(), 16);
        let spec = surface
            .tube_spec(&scenario.model, &scenario.lagrangian)
            .unwrap();
        assert_eq!(spec.radius(), 0.35);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases: &[(&str, usize, &str)] = &[
            ("[ambient\nmodel = euclidean\n", 1, "malformed section header"),
            ("[ambient]\nmodel euclidean\n", 2, "expected `key = value`"),
            ("model = euclidean\n", 1, "before any [section]"),
            ("[ambient]\nmodel = a\nmodel = b\n", 3, "duplicate key"),
            ("[ambient]\nModel = a\n", 2, "lowercase"),
            ("[ambient]\nmodel =\n", 2, "empty value"),
            ("[ambient]\n[ambient]\n", 2, "already declared"),
        ];
        for (text, line, needle) in cases {
            match ConfigDoc::parse(text) {
                Err(Error::Config { line: Some(l), msg }) => {
                    assert_eq!(l, *line, "wrong line for {text:?}");
                    assert!(msg.contains(needle), "missing {needle:?} in {msg:?}");
                }
                other => panic!("expected a config error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_sections_keys_and_names_are_rejected() {
        let doc = ConfigDoc::parse("[ambiente]\nmodel = euclidean\n").unwrap();
        let err = doc.check_section_names().unwrap_err();
        assert!(err.to_string().contains("unknown section [ambiente]"));
        assert!(err.to_string().contains("line 1"));

        let doc =
            ConfigDoc::parse("[ambient]\nmodel = euclidean\ndimension = 3\n").unwrap();
        let err = build_model(&doc).map(|m| m.name()).unwrap_err();
        assert!(err.to_string().contains("unknown key `dimension`"), "{err}");
        assert!(err.to_string().contains("line 3"), "{err}");

        let doc = ConfigDoc::parse("[ambient]\nmodel = minkowski\n").unwrap();
        let err = build_model(&doc).map(|m| m.name()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown [ambient] model `minkowski`"), "{msg}");
        for name in ["euclidean", "sphere-product", "hyperbolic-product"] {
            assert!(msg.contains(name), "registry listing misses {name}: {msg}");
        }
    }

    #[test]
    fn every_registry_entry_builds_by_name() {
        for (ambient, lagrangians) in [
            ("model = euclidean\ndim = 3", vec!["constant", "quadratic-form"]),
            ("model = sphere-product\np = 2\nq = 2", vec!["constant", "angle-profile"]),
            ("model = hyperbolic-product\np = 2\nq = 2", vec!["constant", "angle-profile"]),
        ] {
            for family in lagrangians {
                let extra = match family {
                    "quadratic-form" => "diagonal = 1.0, 1.2, 0.9",
                    "angle-profile" => "coefficients = 1.0, 0.1",
                    _ => "value = 1.0",
                };
                let text = format!("[ambient]\n{ambient}\n[lagrangian]\nfamily = {family}\n{extra}\n");
                let doc = ConfigDoc::parse(&text).unwrap();
                let model = build_model(&doc).unwrap();
                let lagrangian = build_lagrangian(&doc, &model).unwrap();
                assert_eq!(lagrangian.family(), family);
            }
        }
    }

    #[test]
    fn incompatible_family_and_model_pairs_name_both_blocks() {
        let text = "\
[ambient]
model = sphere-product

[lagrangian]
family = quadratic-form
diagonal = 1.0, 1.1, 0.9, 1.2
";
        let doc = ConfigDoc::parse(text).unwrap();
        let model = build_model(&doc).unwrap();
        let err = build_lagrangian(&doc, &model).map(|l| l.family()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[lagrangian]"), "{msg}");
        assert!(msg.contains("[ambient]"), "{msg}");
        assert!(msg.contains("quadratic-form"), "{msg}");
        assert!(msg.contains("sphere-product"), "{msg}");

        let text = "\
[ambient]
model = euclidean

[lagrangian]
family = angle-profile
coefficients = 1.0, 0.1
";
        let doc = ConfigDoc::parse(text).unwrap();
        let model = build_model(&doc).unwrap();
        let err = build_lagrangian(&doc, &model).map(|l| l.family()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[lagrangian]") && msg.contains("[ambient]"), "{msg}");
    }

    #[test]
    fn resolution_and_tolerance_bounds_are_enforced() {
        let doc = ConfigDoc::parse(&BASE.replace("resolution = 16", "resolution = 12")).unwrap();
        let err = Scenario::from_doc(doc).unwrap_err();
        assert!(err.to_string().contains("at least 16"), "{err}");

        let doc = ConfigDoc::parse(&BASE.replace("resolution = 16", "resolution = 17")).unwrap();
        let err = Scenario::from_doc(doc).unwrap_err();
        assert!(err.to_string().contains("even"), "{err}");

        let doc = ConfigDoc::parse(&BASE.replace("tolerance = 1e-6", "tolerance = -1e-6")).unwrap();
        let err = Scenario::from_doc(doc).unwrap_err();
        assert!(err.to_string().contains("positive"), "{err}");
    }

    #[test]
    fn environment_overrides_follow_the_documented_prefix() {
        let mut doc = ConfigDoc::parse(BASE).unwrap();
        doc.apply_overrides_from([
            ("WULFF_RUN_SEED".to_string(), "99".to_string()),
            ("WULFF_SURFACE_RESOLUTION".to_string(), "24".to_string()),
            ("WULFF_FLOW_DT".to_string(), "1e-3".to_string()),
            ("UNRELATED_VAR".to_string(), "x".to_string()),
        ])
        .unwrap();
        let scenario = Scenario::from_doc(doc).unwrap();
        assert_eq!(scenario.run.seed, 99);
        assert_eq!(scenario.surface().unwrap().resolution(), 24);
        assert_eq!(scenario.doc.get("flow", "dt"), Some("1e-3"));

        let mut doc = ConfigDoc::parse(BASE).unwrap();
        doc.apply_overrides_from([("WULFF_TYPO_KEY".to_string(), "x".to_string())])
            .unwrap();
        let err = Scenario::from_doc(doc).unwrap_err();
        assert!(err.to_string().contains("unknown section [typo]"), "{err}");
    }

    #[test]
    fn the_canonical_dump_round_trips() {
        let mut doc = ConfigDoc::parse(BASE).unwrap();
        doc.set("run", "threads", "4");
        let dump = doc.canonical_string();
        let reparsed = ConfigDoc::parse(&dump).unwrap();
        assert_eq!(reparsed.canonical_string(), dump);
        assert!(dump.contains("threads = 4"));
    }

    #[test]
    fn surface_kinds_cover_the_chart_families() {
        let flat = "\
[ambient]
model = euclidean

[lagrangian]
family = constant
";
        for (kind, extra) in [
            ("torus", "big-radius = 2.0\nsmall-radius = 0.75"),
            ("graph", "radius = 1.0\nbump = 0.15"),
            ("sphere", "radius = 0.5"),
        ] {
            let text = format!("{flat}\n[surface]\nkind = {kind}\n{extra}\nresolution = 16\n");
            let doc = ConfigDoc::parse(&text).unwrap();
            let scenario = Scenario::from_doc(doc).unwrap();
            let chart = scenario
                .surface()
                .unwrap()
                .chart(&scenario.model, &scenario.lagrangian)
                .unwrap();
            assert!(chart.grid().node_count() > 0);
        }

        let text = "\
[ambient]
model = hyperbolic-product

[lagrangian]
family = constant

[surface]
kind = tube
radius = 0.3
";
        let doc = ConfigDoc::parse(text).unwrap();
        let err = Scenario::from_doc(doc).unwrap_err();
        assert!(err.to_string().contains("sphere-product"), "{err}");
    }

    #[test]
    fn theta_fills_the_remaining_chart_parameters() {
        assert_eq!(params_from_theta(0.4, 1), vec![0.4]);
        assert_eq!(params_from_theta(0.4, 3), vec![0.4, 1.1, 0.7]);
    }
}
