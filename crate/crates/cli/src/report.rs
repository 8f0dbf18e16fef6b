//! On-disk layout of `certificate.json`. Infinite margins (an empty
//! minimum) are stored as `null`.

use serde::{Deserialize, Serialize};

pub const SCHEMA: u32 = 1;
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const SPEC_FILE: &str = "problem.spec";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub schema: u32,
    pub spec_file: String,
    pub config: ConfigRecord,
    pub assumption: Option<AssumptionRecord>,
    pub global_pair: PairRecord,
    pub stages: Vec<StageRecord>,
    pub band_checks: Vec<OrderRecord>,
    pub operator_checks: Vec<OrderRecord>,
    /// `‖T V_N - f‖∞` over unmarked points of the common grid.
    pub final_residual: f64,
    pub reference: Option<ReferenceRecord>,
    pub limits: Vec<LimitRecord>,
    pub verdict: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub gamma: f64,
    pub stages: usize,
    pub eps_max: f64,
    pub seed: u64,
    pub resolution: Vec<usize>,
    pub delta: f64,
}

/// Heuristic probe results; a pass here is evidence only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionRecord {
    pub points: usize,
    pub supported: usize,
    pub min_radius: f64,
    pub heuristic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub eps: f64,
    pub lower_file: String,
    pub upper_file: String,
    pub cells: usize,
    pub lower_floor: Option<f64>,
    pub lower_ceiling: Option<f64>,
    pub upper_floor: Option<f64>,
    pub upper_ceiling: Option<f64>,
    pub points: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellBox {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub n: usize,
    pub file: String,
    pub i_cells: Vec<CellBox>,
    pub eps: Vec<f64>,
    pub anchor_jets: Vec<Vec<f64>>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    /// J-cells per I-cell.
    pub j_cells: Vec<usize>,
    pub margins: StageMargins,
    /// Largest `μ - λ` per slot.
    pub band_widths: Vec<f64>,
    pub bracket: bool,
    pub nested: bool,
    pub narrow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMargins {
    pub bracket_lower: Option<f64>,
    pub bracket_upper: Option<f64>,
    pub nesting: Option<f64>,
    pub containment: Option<f64>,
    pub width_margin: Option<f64>,
    pub width_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub label: String,
    pub monotone: bool,
    pub sup_gap: Option<f64>,
    pub inf_gap: Option<f64>,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub labels: Vec<String>,
    pub distances: Vec<Vec<f64>>,
    pub contained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRecord {
    pub label: String,
    pub tol: f64,
    pub converges: bool,
    pub max_width: f64,
}

pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn stage_file(n: usize) -> String {
    format!("stage_{n}.json")
}

/// `u[1,(0,2)]` becomes `u1_0-2`.
pub fn file_label(label: &str) -> String {
    let inner = label.trim_start_matches("u[").trim_end_matches(")]");
    let (comp, alpha) = inner.split_once(",(").unwrap_or((inner, ""));
    format!("u{comp}_{}", alpha.replace(',', "-"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_become_file_names() {
        assert_eq!(file_label("u[1,(0,2)]"), "u1_0-2");
        assert_eq!(file_label("u[2,(1)]"), "u2_1");
    }
}
