//! Log ingestion, the threshold autoscale baseline, scenario runs and the
//! benchmark suite.

pub mod autoscale;
pub mod instance;
pub mod log;
pub mod scenario;
pub mod suite;

use thiserror::Error;

use crate::construct::ConstructError;
use crate::exact::ExactError;
use crate::ils::IlsError;
use crate::model::{ContentId, ModelError, RequestId};
use crate::tracegen::TraceError;

pub use autoscale::{autoscale_simulate, AutoscalePolicy, AutoscaleRun, Hire};
pub use instance::{build_instance, Catalog};
pub use log::{discretize_and_filter, AccessLog, LogEntry, PeriodCount, PeriodCounts};
pub use scenario::{scenario_one, scenario_two, simulate_scenario, ScenarioFile, ScenarioPolicy, ScenarioReport};
pub use suite::{compute_gap, load_suite_dir, run_suite, write_rows_csv, Method, ResultRow, SuiteConfig};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no requests to build an instance from")]
    EmptyInstance,
    #[error("machine image holds {available_mb} MB but the contents need {needed_mb} MB")]
    ImageTooSmall { needed_mb: f64, available_mb: f64 },
    #[error("no size known for content {0}")]
    MissingSize(ContentId),
    #[error("request {0} is still waiting at the end of the horizon")]
    Unserviceable(RequestId),
    #[error("invalid access log: {0}")]
    InvalidLog(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Ils(#[from] IlsError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
