//! HTTP service and command line over the `facetseg` pipeline.
//!
//! [`service::Service`] owns the knowledge graph, the loaded models and the
//! concept embedding; [`http::router`] exposes it as JSON endpoints and
//! [`cli::run`] drives the same operations from the shell.

pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod service;

pub use config::{Config, ConfigError};
pub use error::{ApiError, ApiResult};
pub use service::{Assets, Service};
