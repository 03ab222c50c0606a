//! Synthetic flash-crowd traces.
//!
//! Accesses to a content at time `t` are `round(U * X_t)` with
//! `X_t ~ Beta(alpha_t, beta_t)`. Outside a flash crowd the shape is a
//! low-mean base `(a, b)`; at the peak it is mirrored to `(b, a)`, and during
//! the ramps it slides between the two along an exponential weight, keeping
//! `alpha_t + beta_t` fixed.

mod beta;
mod plan;
pub mod scenarios;
mod trace;

use thiserror::Error;

pub use beta::{beta_mean_var, beta_sample, BetaShape};
pub use plan::{
    accesses_at, mean_accesses, ramp_weight, scale_sample, shape_at, PhasePlan, Ramp, RampPhase,
    Sustained,
};
pub use trace::{
    generate_trace, trace_to_requests, BackgroundPlan, InstanceSkeleton, Trace, TraceConfig,
    TraceRow,
};

use crate::model::{ContentId, ModelError};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("beta shape needs positive parameters, got ({alpha}, {beta})")]
    InvalidShape { alpha: f64, beta: f64 },
    #[error("invalid phase plan: {0}")]
    InvalidPlan(String),
    #[error("time {t} outside ramp [{t0}, {t1}]")]
    Domain { t: f64, t0: f64, t1: f64 },
    #[error("trace references unknown content {0}")]
    UnknownContent(ContentId),
    #[error("time step {time_step} maps to period {period}, outside the instance")]
    OutsideHorizon { time_step: usize, period: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
