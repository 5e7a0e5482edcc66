//! The machine-readable run report. Serialized as JSON with a stable field
//! order; identical inputs (spec, flags, seed) produce byte-identical
//! output, so reports can be pinned as golden files.

use gafp_core::atlas::DiameterReport;
use gafp_core::axioms::AxiomReport;
use gafp_core::engine::{IterationBound, SolveOutcome};
use gafp_core::ops::{ClassificationReport, CyclicityReport, OperatorClass};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_PARSE_ERROR: i32 = 2;
pub const EXIT_FAULT: i32 = 3;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub spec_path: String,
    /// SHA-256 of the canonical spec text, lowercase hex.
    pub spec_digest: String,
    pub results: Results,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub exit_code: i32,
}

#[derive(Debug, Default, Serialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axioms: Option<AxiomReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cyclicity: Option<CyclicityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fset: Option<Vec<FsetSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diameters: Option<Vec<DiameterReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySummary>,
}

#[derive(Debug, Serialize)]
pub struct SolveSummary {
    pub epsilon: f64,
    pub x0: f64,
    pub k: usize,
    pub outcome: SolveOutcome,
    pub hit_index: Option<usize>,
    pub hit_iterate: Option<f64>,
    pub steps: usize,
    pub delta0: f64,
    pub final_delta: f64,
}

#[derive(Debug, Serialize)]
pub struct FsetSummary {
    pub epsilon: f64,
    pub member_count: usize,
    pub grid_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_member: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_member: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_pair: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_triple: Option<f64>,
    pub approximate: bool,
}

/// One (class rate) x (all grid starts) comparison block inside `verify`.
#[derive(Debug, Serialize)]
pub struct RateCheck {
    pub class: OperatorClass,
    pub rate: f64,
    pub max_decay_ratio: f64,
    pub envelope_violations: u64,
    pub bound_violations: u64,
    pub max_n_star: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example_bound: Option<IterationBound>,
}

#[derive(Debug, Serialize)]
pub struct VerifySummary {
    pub epsilon: f64,
    pub starts: usize,
    pub hits: usize,
    pub non_hits: usize,
    pub rate_checks: Vec<RateCheck>,
    pub diameter_reports: usize,
    pub diameter_failures: usize,
    pub pass: bool,
}
