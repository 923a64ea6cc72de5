//! Wire types for the ocsearch HTTP service.
//!
//! Circuits, logs, and extrema travel as their canonical text formats
//! (TOML and CSV) inside JSON envelopes, so the service API stays a thin
//! transport over the same artifacts the CLI writes to disk.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
}

/// Knobs a caller may override; anything absent keeps the run defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_target: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Replaces an external circuit's simulator command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulator_command: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRequest {
    /// Circuit description in the on-disk TOML format.
    pub circuit_toml: String,
    #[serde(default)]
    pub overrides: RunOverrides,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunAccepted {
    pub id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStatus {
    pub id: u64,
    pub state: JobState,
    /// Set when state is failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// The rest is set when state is completed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violations_found: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_simulations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed_seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_seeds: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleRequest {
    pub circuit_toml: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResponse {
    /// Extrema in the on-disk TOML format.
    pub extrema_toml: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRequest {
    pub circuit_toml: String,
    /// A simulation log previously produced by a run.
    pub log_csv: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrema_toml: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportResponse {
    pub summary: String,
}

/// Uniform error envelope for non-2xx replies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
