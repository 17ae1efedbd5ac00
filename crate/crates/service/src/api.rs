//! Request and response documents of the HTTP API.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sparktune::gp::ContextVector;
use sparktune::metrics::RuntimeMetrics;
use sparktune::space::Configuration;
use sparktune::store::SCHEMA_VERSION;
use sparktune::tuner::{Budget, Phase, Rationale, Status, Suggestion};

pub fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Whether callers report a cost to minimize or a score to maximize. The
/// tuner always minimizes; maximized objectives are negated internally and
/// reported back in the caller's orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Minimize,
    Maximize,
}

impl Orientation {
    pub fn to_internal(self, objective: f64) -> f64 {
        match self {
            Orientation::Minimize => objective,
            Orientation::Maximize => -objective,
        }
    }

    pub fn to_external(self, objective: f64) -> f64 {
        self.to_internal(objective)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferOverrides {
    pub tau0: Option<f64>,
    pub threshold: Option<f64>,
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateTaskRequest {
    /// Search-space document; the bundled Spark space when absent.
    #[serde(default)]
    pub space: Option<Value>,
    /// Rule document; the bundled rules when absent.
    #[serde(default)]
    pub rules: Option<Value>,
    #[serde(default)]
    pub budget: Option<Budget>,
    #[serde(default)]
    pub orientation: Orientation,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub strategy: Option<String>,
    #[serde(default)]
    pub transfer: Option<TransferOverrides>,
    #[serde(default)]
    pub defaults: Option<Vec<Configuration>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedTask {
    pub schema_version: u32,
    pub task_id: String,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionView {
    pub schema_version: u32,
    pub task_id: String,
    pub index: usize,
    pub config: Configuration,
    pub rationale: Rationale,
    pub phase: Phase,
    pub iteration: usize,
}

impl SuggestionView {
    pub fn new(task_id: &str, s: &Suggestion) -> Self {
        SuggestionView {
            schema_version: SCHEMA_VERSION,
            task_id: task_id.to_string(),
            index: s.index,
            config: s.config.clone(),
            rationale: s.rationale,
            phase: s.phase,
            iteration: s.iteration,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRequest {
    pub config: Configuration,
    pub objective: f64,
    #[serde(default)]
    pub runtime_s: Option<f64>,
    #[serde(default)]
    pub avg_memory_gb: Option<f64>,
    #[serde(default)]
    pub metrics: RuntimeMetrics,
    /// Execution context; data size 1 when absent.
    #[serde(default)]
    pub context: Option<ContextVector>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetRequest {
    pub extra_search: usize,
}

/// One evaluated suggestion, objective in the caller's orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationView {
    pub index: usize,
    pub config: Configuration,
    pub objective: f64,
    pub rationale: Rationale,
    pub phase: Phase,
    pub iteration: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_memory_gb: Option<f64>,
}

/// Arbitration inputs of one search-phase suggestion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbitrationView {
    pub index: usize,
    pub iteration: usize,
    pub expert_weight: f64,
    pub surrogate_weight: f64,
    pub expert_probability: f64,
    pub rationale: Rationale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStatusView {
    pub schema_version: u32,
    pub task_id: String,
    pub status: Status,
    pub phase: Phase,
    pub orientation: Orientation,
    pub iterations: usize,
    pub budget_total: usize,
    pub best_objective: Option<f64>,
    pub best_config: Option<Configuration>,
    /// Best objective after each evaluation.
    pub best_so_far: Vec<f64>,
    /// `best_objective / mean(default objectives)`.
    pub improvement_ratio: Option<f64>,
    pub history: Vec<IterationView>,
    pub arbitration: Vec<ArbitrationView>,
    /// History tasks in the current transfer ensemble.
    pub members: Vec<String>,
    pub restarts: usize,
    pub outstanding: Option<SuggestionView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub status: Status,
    pub phase: Phase,
    pub iterations: usize,
    pub best_objective: Option<f64>,
    pub improvement_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskList {
    pub schema_version: u32,
    pub tasks: Vec<TaskSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalBest {
    pub schema_version: u32,
    pub task_id: String,
    pub status: Status,
    pub best_objective: Option<f64>,
    pub best_config: Option<Configuration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub schema_version: u32,
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}
