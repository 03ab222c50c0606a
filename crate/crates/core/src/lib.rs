//! Planning for flash-crowd events on web-serving infrastructure.
//!
//! Given origin servers, an on-demand cloud pool, contents and time-bucketed
//! requests, decide where contents are replicated and which cloud servers are
//! hired so that attendance, backlog and replication time is minimized.
//!
//! * [`model`]: problem data, evaluation and feasibility checking.
//! * [`tracegen`]: synthetic flash-crowd access traces.
//! * [`construct`]: randomized greedy construction.
//! * [`ils`]: iterated local search with randomized variable neighborhood descent.
//! * [`exact`]: branch-and-bound optimum for tiny instances.
//! * [`bench`]: log ingestion, autoscaling baseline, benchmark reports.

pub mod bench;
pub mod construct;
pub mod exact;
pub mod ils;
pub mod model;
pub mod random;
pub mod rng;
pub mod tracegen;

pub use model::{
    check_feasibility, derive_timeline, evaluate, Assignment, CostBreakdown, Instance, Solution,
};
