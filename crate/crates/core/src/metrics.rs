//! The 17 runtime metrics an execution reports. Rule conditions reference
//! them by name and meta-features average them in the fixed order below.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const METRIC_COUNT: usize = 17;

/// Fixed vectorization order.
pub const METRIC_NAMES: [&str; METRIC_COUNT] = [
    "stage_max_avg_input_run_time",
    "stage_max_avg_tasks_run_time",
    "stage_max_avg_shuffle_read_run_time",
    "max_mem_usage",
    "avg_mem_usage",
    "max_driver_mem_usage",
    "avg_driver_mem_usage",
    "total_memory",
    "input_size_gb",
    "output_size_gb",
    "shuffle_volume_gb",
    "spill_volume_gb",
    "io_volume_gb",
    "task_count",
    "stage_count",
    "executor_count",
    "gc_fraction",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("unknown metric `{0}`")]
    Unknown(String),
    #[error("metric `{0}` is not finite")]
    NotFinite(String),
}

pub fn metric_index(name: &str) -> Option<usize> {
    METRIC_NAMES.iter().position(|m| *m == name)
}

/// Serialized as a `{name: value}` object; metrics missing from a document
/// read as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct RuntimeMetrics {
    values: [f64; METRIC_COUNT],
}

impl Default for RuntimeMetrics {
    fn default() -> Self {
        RuntimeMetrics { values: [0.0; METRIC_COUNT] }
    }
}

impl RuntimeMetrics {
    pub fn from_array(values: [f64; METRIC_COUNT]) -> Self {
        RuntimeMetrics { values }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        metric_index(name).map(|i| self.values[i])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), MetricsError> {
        let i = metric_index(name).ok_or_else(|| MetricsError::Unknown(name.to_string()))?;
        self.values[i] = value;
        Ok(())
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value).expect("known metric name");
        self
    }

    pub fn as_array(&self) -> &[f64; METRIC_COUNT] {
        &self.values
    }
}

impl TryFrom<BTreeMap<String, f64>> for RuntimeMetrics {
    type Error = MetricsError;

    fn try_from(map: BTreeMap<String, f64>) -> Result<Self, MetricsError> {
        let mut out = RuntimeMetrics::default();
        for (name, value) in map {
            if !value.is_finite() {
                return Err(MetricsError::NotFinite(name));
            }
            out.set(&name, value)?;
        }
        Ok(out)
    }
}

impl From<RuntimeMetrics> for BTreeMap<String, f64> {
    fn from(m: RuntimeMetrics) -> Self {
        METRIC_NAMES
            .iter()
            .zip(m.values)
            .map(|(n, v)| (n.to_string(), v))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        for (i, n) in METRIC_NAMES.iter().enumerate() {
            assert_eq!(metric_index(n), Some(i));
        }
    }

    #[test]
    fn json_round_trip_and_missing_default() {
        let m = RuntimeMetrics::default().with("max_mem_usage", 0.8).with("total_memory", 12.0);
        let s = serde_json::to_string(&m).unwrap();
        let back: RuntimeMetrics = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        let partial: RuntimeMetrics = serde_json::from_str(r#"{"max_mem_usage": 0.5}"#).unwrap();
        assert_eq!(partial.get("max_mem_usage"), Some(0.5));
        assert_eq!(partial.get("avg_mem_usage"), Some(0.0));
        assert!(serde_json::from_str::<RuntimeMetrics>(r#"{"bogus": 1}"#).is_err());
    }
}
