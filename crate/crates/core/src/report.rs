//! Report serialization shared by the CLI subcommands.
//!
//! Every command emits a JSON envelope whose key order is fixed by struct
//! declaration order, so identical runs produce byte-identical files. The
//! envelope embeds the resolved configuration (canonical text form) and the
//! tool version next to the payload, making each report self-describing.
//! Trajectory-style output additionally goes to CSV with a fixed float
//! format, so `--threads` and platform differences cannot change a byte of
//! the body.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed float rendering for CSV bodies: sign, 12 significant decimals,
/// exponent. Never produces commas or locale-dependent text.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.12e}")
}

// ---------------------------------------------------------------------------
// Envelope
// ---------------------------------------------------------------------------

/// Common wrapper around every JSON report.
#[derive(Debug, Serialize)]
pub struct Envelope<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Canonical text of the resolved configuration (post overrides).
    pub config: String,
    pub data: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(command: &str, config: String, data: T) -> Self {
        Self {
            tool: "wulff",
            version: VERSION,
            command: command.to_string(),
            config,
            data,
        }
    }

    /// Pretty JSON with a trailing newline; key order is declaration order.
    pub fn to_json(&self) -> Result<String> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::Numeric(format!("serialization failed: {e}")))?;
        Ok(body + "\n")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }
}

/// Write a whole file, creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Minimal CSV builder. Fields never need quoting here: headers are
/// identifiers and numeric cells come from [`fmt_num`] or integer formatting.
#[derive(Debug, Clone)]
pub struct Csv {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_string(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_string())
    }
}

// ---------------------------------------------------------------------------
// Payloads
// ---------------------------------------------------------------------------

/// One eigenvalue of the anisotropic shape operator: closed form next to the
/// independent numeric value.
#[derive(Debug, Serialize)]
pub struct SpectrumRow {
    pub closed_form: f64,
    pub numeric: f64,
    pub delta: f64,
}

#[derive(Debug, Serialize)]
pub struct SpectrumData {
    pub kind: String,
    pub radius: f64,
    pub params: Vec<f64>,
    pub f_value: f64,
    pub entries: Vec<SpectrumRow>,
    pub max_delta: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// One anisotropic focal radius with its numeric cross-check (when the
/// root-finder located it inside the search interval).
#[derive(Debug, Serialize)]
pub struct AfrRow {
    pub s: f64,
    pub multiplicity: usize,
    pub numeric: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct AfrData {
    pub kind: String,
    pub radius: f64,
    pub params: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub entries: Vec<AfrRow>,
    pub max_delta: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct BuildData {
    pub kind: String,
    pub nodes: usize,
    pub excluded_nodes: usize,
    pub area: f64,
    pub energy: f64,
    /// `max_rel |<W, nu>|`: the anisotropy vector must stay tangent.
    pub max_w_normal_rel: f64,
    /// Worst relative gap in the Weingarten identity across nodes.
    pub max_form_gap_rel: f64,
    /// Worst asymmetry of the anisotropic shape operator before
    /// symmetrization.
    pub max_shape_asym: f64,
}

#[derive(Debug, Serialize)]
pub struct LagrangianCheckData {
    pub family: String,
    pub sphere_dim: usize,
    pub samples: usize,
    /// Smallest eigenvalue of `∇^S grad F + F id` over the sample set;
    /// positive means elliptic.
    pub convexity_min: f64,
    pub convexity_pass: bool,
    /// Max `|F(T v) - F(v)|` over holonomy rotations (0 transforms in the
    /// flat model, whose holonomy is trivial).
    pub invariance_transforms: usize,
    pub invariance_residual: f64,
    pub invariance_pass: bool,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct VariationCase {
    pub index: usize,
    pub fd_derivative: f64,
    pub formula_value: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub step: f64,
}

#[derive(Debug, Serialize)]
pub struct VariationData {
    pub volume_preserving: bool,
    pub cases: Vec<VariationCase>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct CriticalData {
    pub mode: String,
    pub count: usize,
    pub amplitude: f64,
    pub derivatives: Vec<f64>,
    pub max_abs_derivative: f64,
    pub hf_max_abs: f64,
    pub hf_spread: f64,
    pub area: f64,
    pub energy: f64,
    pub tolerance: f64,
    /// Whether the surface is stationary at the configured tolerance.
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct EquifocalData {
    pub node_count: usize,
    pub max_hausdorff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct OffsetRow {
    pub t: f64,
    pub spread: f64,
}

#[derive(Debug, Serialize)]
pub struct IsoparametricData {
    pub offsets: Vec<OffsetRow>,
    pub max_spread: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct ReconstructData {
    pub collapse_radius: f64,
    pub collapse_residual: f64,
    pub max_rebuild_distance: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct FlowRowOut {
    pub step: usize,
    pub energy: f64,
    pub max_abs_hf: f64,
    pub hf_spread: f64,
    pub dt: f64,
    pub halvings: usize,
}

#[derive(Debug, Serialize)]
pub struct FlowSummary {
    pub mode: String,
    pub steps: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub energy_drop: f64,
    pub monotone: bool,
    pub final_max_abs_hf: f64,
    pub final_hf_spread: f64,
    pub rows: Vec<FlowRowOut>,
}

#[derive(Debug, Serialize)]
pub struct CriterionRow {
    pub index: usize,
    pub name: String,
    pub pass: bool,
    pub seconds: f64,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct SelftestData {
    pub criteria: Vec<CriterionRow>,
    pub passed: usize,
    pub failed: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_envelope_serializes_with_fixed_key_order() {
        let env = Envelope::new(
            "sphere spectrum",
            "[run]\nseed = 7\n".to_string(),
            SpectrumData {
                kind: "sphere".into(),
                radius: 0.3,
                params: vec![0.785],
                f_value: 1.0,
                entries: vec![SpectrumRow {
                    closed_form: -1.0,
                    numeric: -1.0,
                    delta: 0.0,
                }],
                max_delta: 0.0,
                tolerance: 1e-4,
                pass: true,
            },
        );
        let json = env.to_json().unwrap();
        let tool = json.find("\"tool\"").unwrap();
        let version = json.find("\"version\"").unwrap();
        let command = json.find("\"command\"").unwrap();
        let config = json.find("\"config\"").unwrap();
        let data = json.find("\"data\"").unwrap();
        assert!(tool < version && version < command && command < config && config < data);
        assert!(json.contains(VERSION));
        assert!(json.ends_with('\n'));
        // Identical payloads must serialize identically.
        assert_eq!(json, env.to_json().unwrap());
    }

    #[test]
    fn csv_bodies_use_a_fixed_float_format() {
        assert_eq!(fmt_num(1.0), "1.000000000000e0");
        assert_eq!(fmt_num(-0.25), "-2.500000000000e-1");
        assert_eq!(fmt_num(1234.5678), "1.234567800000e3");

        let mut csv = Csv::new(&["step", "energy"]);
        csv.push(vec!["0".into(), fmt_num(12.5)]);
        csv.push(vec!["1".into(), fmt_num(12.25)]);
        assert_eq!(
            csv.to_string(),
            "step,energy\n0,1.250000000000e1\n1,1.225000000000e1\n"
        );
    }

    #[test]
    fn reports_land_on_disk_with_parents_created() {
        let dir = std::env::temp_dir().join(format!("wulff-report-test-{}", std::process::id()));
        let path = dir.join("nested").join("out.json");
        let env = Envelope::new("flow run", String::new(), FlowSummary {
            mode: "free".into(),
            steps: 2,
            initial_energy: 1.0,
            final_energy: 0.5,
            energy_drop: 0.5,
            monotone: true,
            final_max_abs_hf: 0.1,
            final_hf_spread: 0.05,
            rows: Vec::new(),
        });
        env.write_json(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, env.to_json().unwrap());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
