//! Wire types shared by the experiment service and its clients.
//!
//! Experiments run as jobs: submit a spec, poll the job, download the
//! output files. Two pure operations (receiver-chain decoding and config
//! validation) are exposed synchronously.

use serde::{Deserialize, Serialize};

pub use hemocomm_core::chain::{Frame, ReceiverChainConfig, StdMode};
pub use hemocomm_core::config::SimulationConfig;
pub use hemocomm_core::experiment::{ExperimentSpec, ExperimentSummary};

/// Prefix of every route.
pub const API_BASE: &str = "/api/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub job_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobInfo {
    pub id: u64,
    pub kind: String,
    pub state: JobState,
    pub steps_done: u64,
    pub steps_total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<ExperimentSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileList {
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
}

/// Run one cell's assimilation event log through the receiver chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeRequest {
    pub events_us: Vec<f64>,
    pub chain: ReceiverChainConfig,
    pub horizon_us: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeResponse {
    pub frames: Vec<Frame>,
    pub final_mode: StdMode,
    pub sync_count: u64,
    pub emitted_one_bits: u64,
    pub decoded_pulses: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateRequest {
    /// TOML configuration document.
    pub config: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<SimulationConfig>,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
