//! Suggest/observe HTTP service and command line over the `sparktune`
//! engine. The service never runs workloads: callers evaluate a suggestion
//! and post the result back.

pub mod api;
pub mod cli;
pub mod http;
pub mod service;

pub use service::{ServiceError, Settings, TuningService};
