//! Problem data, solution representation, and exact evaluation of the
//! attendance + backlog + replication time objective.

mod problem;
pub(crate) mod sim;
mod types;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub use problem::Problem;
pub(crate) use problem::Tuple;
pub use types::*;

use sim::{simulate_server, uses_on, Fault, ServerRun};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("unresolved reference: {0}")]
    BrokenReference(String),
    #[error("server {server} cannot store content {content} in period {period}")]
    UnsatisfiableStorage { server: ServerId, content: ContentId, period: usize },
    #[error("request {0} is not assigned")]
    IncompleteSolution(RequestId),
    #[error("request {0} is assigned more than once")]
    DuplicateRequest(RequestId),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A broken feasibility rule.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Unattended { request: RequestId },
    Duplicate { request: RequestId },
    UnknownReference { what: String },
    EmptyAssignment { content: ContentId, server: ServerId, period: usize },
    ContentMismatch { request: RequestId, content: ContentId },
    EarlyService { request: RequestId, period: usize },
    ContentNotStarted { content: ContentId, period: usize },
    OutsideHorizon { period: usize },
    BandwidthExceeded { server: ServerId, period: usize, load_mb: f64, capacity_mb: f64 },
    StorageExceeded { server: ServerId, period: usize, content: ContentId },
    NoReplica { content: ContentId, period: usize },
}

impl Violation {
    pub fn rule(&self) -> &'static str {
        match self {
            Violation::Unattended { .. } => "UNATTENDED",
            Violation::Duplicate { .. } => "DUPLICATE",
            Violation::UnknownReference { .. } => "UNKNOWN_REFERENCE",
            Violation::EmptyAssignment { .. } => "EMPTY_ASSIGNMENT",
            Violation::ContentMismatch { .. } => "CONTENT_MISMATCH",
            Violation::EarlyService { .. } => "EARLY_SERVICE",
            Violation::ContentNotStarted { .. } => "CONTENT_NOT_STARTED",
            Violation::OutsideHorizon { .. } => "OUTSIDE_HORIZON",
            Violation::BandwidthExceeded { .. } => "BANDWIDTH_EXCEEDED",
            Violation::StorageExceeded { .. } => "STORAGE_EXCEEDED",
            Violation::NoReplica { .. } => "NO_REPLICA",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rule())?;
        match self {
            Violation::Unattended { request } | Violation::Duplicate { request } => {
                write!(f, " request={request}")
            }
            Violation::UnknownReference { what } => write!(f, " ref={}", what.replace(' ', ":")),
            Violation::EmptyAssignment { content, server, period } => {
                write!(f, " server={server} period={period} content={content}")
            }
            Violation::ContentMismatch { request, content } => {
                write!(f, " request={request} content={content}")
            }
            Violation::EarlyService { request, period } => {
                write!(f, " request={request} period={period}")
            }
            Violation::ContentNotStarted { content, period }
            | Violation::NoReplica { content, period } => {
                write!(f, " content={content} period={period}")
            }
            Violation::OutsideHorizon { period } => write!(f, " period={period}"),
            Violation::BandwidthExceeded { server, period, load_mb, capacity_mb } => write!(
                f,
                " server={server} period={period} load_mb={load_mb} capacity_mb={capacity_mb}"
            ),
            Violation::StorageExceeded { server, period, content } => {
                write!(f, " server={server} period={period} content={content}")
            }
        }
    }
}

fn server_runs(problem: &Problem, tuples: &[Tuple]) -> Vec<ServerRun> {
    (0..problem.n_servers())
        .map(|j| {
            let mut uses = uses_on(problem, j, tuples);
            simulate_server(problem, j, &mut uses, false)
        })
        .collect()
}

fn storage_error(problem: &Problem, runs: &[ServerRun]) -> Result<(), ModelError> {
    for (j, run) in runs.iter().enumerate() {
        if let Some(Fault::Storage { period, content }) =
            run.faults.iter().find(|f| matches!(f, Fault::Storage { .. }))
        {
            return Err(ModelError::UnsatisfiableStorage {
                server: problem.server_ids[j],
                content: problem.content_ids[*content],
                period: *period,
            });
        }
    }
    Ok(())
}

/// Replica placement over time implied by `solution`.
///
/// Missing replicas are copied in the period they are first needed, from the
/// content's origin when it holds the content, else from the lowest-id holder.
/// Copied replicas stay until evicted under storage pressure. On-demand
/// servers are released after their last use and drop their copies then.
pub fn derive_timeline(instance: &Instance, solution: &Solution) -> Result<ReplicaTimeline, ModelError> {
    let problem = Problem::new(instance)?;
    let tuples = problem.tuples(solution)?;
    let runs = server_runs(&problem, &tuples);
    storage_error(&problem, &runs)?;
    Ok(timeline_from_runs(&problem, &runs))
}

fn timeline_from_runs(problem: &Problem, runs: &[ServerRun]) -> ReplicaTimeline {
    let horizon = problem.horizon();
    let mut holdings: Vec<BTreeMap<ServerId, BTreeSet<ContentId>>> = vec![BTreeMap::new(); horizon];
    for (k, &start) in problem.start.iter().enumerate() {
        for j in (0..problem.n_servers()).filter(|&j| problem.is_pinned(j, k)) {
            for slot in holdings.iter_mut().skip(start) {
                slot.entry(problem.server_ids[j]).or_default().insert(problem.content_ids[k]);
            }
        }
    }
    let mut evictions = Vec::new();
    for (j, run) in runs.iter().enumerate() {
        let sid = problem.server_ids[j];
        let released = match (problem.is_cloud(j), run.last_use) {
            (true, Some(last)) => last + 1,
            _ => horizon,
        };
        for &(placed, k) in &run.copies {
            let until = run
                .evictions
                .iter()
                .filter(|&&(t, c)| c == k && t > placed)
                .map(|&(t, _)| t)
                .min()
                .unwrap_or(horizon)
                .min(released);
            for slot in &mut holdings[placed..until] {
                slot.entry(sid).or_default().insert(problem.content_ids[k]);
            }
        }
        evictions.extend(run.evictions.iter().map(|&(period, k)| Eviction {
            content: problem.content_ids[k],
            server: sid,
            period,
        }));
    }

    let mut copy_events = Vec::new();
    for (j, run) in runs.iter().enumerate() {
        for &(period, k) in &run.copies {
            let origin = problem.server_ids[problem.origin[k]];
            let content = problem.content_ids[k];
            let dest = problem.server_ids[j];
            let holds_before = |s: ServerId| {
                s != dest && holdings[period].get(&s).is_some_and(|c| c.contains(&content))
            };
            let source = if holds_before(origin) {
                origin
            } else {
                problem.server_ids.iter().copied().find(|&s| holds_before(s)).unwrap_or(origin)
            };
            copy_events.push(CopyEvent { content, source, destination: dest, period });
        }
    }
    copy_events.sort_by_key(|e| (e.period, e.destination, e.content));
    evictions.sort_by_key(|e| (e.period, e.server, e.content));

    let mut hire_activity = BTreeMap::new();
    for (j, run) in runs.iter().enumerate() {
        if let (true, Some(active)) = (problem.is_cloud(j), run.active()) {
            hire_activity.insert(problem.server_ids[j], active.collect());
        }
    }
    ReplicaTimeline { holdings, copy_events, evictions, hire_activity }
}

fn completeness(problem: &Problem, tuples: &[Tuple]) -> Result<(), ModelError> {
    let mut seen = vec![false; problem.n_requests()];
    for &i in tuples.iter().flat_map(|t| &t.requests) {
        if std::mem::replace(&mut seen[i], true) {
            return Err(ModelError::DuplicateRequest(problem.request_ids[i]));
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(ModelError::IncompleteSolution(problem.request_ids[i])),
        None => Ok(()),
    }
}

pub(crate) fn breakdown_from_runs(problem: &Problem, tuples: &[Tuple], runs: &[ServerRun]) -> CostBreakdown {
    let attend: f64 = tuples.iter().flat_map(|t| &t.requests).map(|&i| problem.attend[i]).sum();
    let backlog: f64 = tuples
        .iter()
        .flat_map(|t| t.requests.iter().map(move |&i| (i, t.period)))
        .map(|(i, period)| problem.wait_cost(i, period))
        .sum();
    let replication: f64 = runs.iter().map(|r| r.copy_cost).sum();
    let mut servers_od = 0;
    let mut financial = 0.0;
    for (j, run) in runs.iter().enumerate() {
        if let (true, Some(active)) = (problem.is_cloud(j), run.active()) {
            servers_od += 1;
            financial += problem.price[j] * active.count() as f64;
        }
    }
    CostBreakdown { attend, backlog, replication, total: attend + backlog + replication, servers_od, financial }
}

pub(crate) fn evaluate_tuples(problem: &Problem, tuples: &[Tuple]) -> Result<CostBreakdown, ModelError> {
    completeness(problem, tuples)?;
    let runs = server_runs(problem, tuples);
    storage_error(problem, &runs)?;
    Ok(breakdown_from_runs(problem, tuples, &runs))
}

/// Objective value of a complete solution.
///
/// Feasibility is not checked beyond storage; pair with [`check_feasibility`]
/// when the plan is untrusted.
pub fn evaluate(instance: &Instance, solution: &Solution) -> Result<CostBreakdown, ModelError> {
    let problem = Problem::new(instance)?;
    evaluate_with(&problem, solution)
}

pub fn evaluate_with(problem: &Problem, solution: &Solution) -> Result<CostBreakdown, ModelError> {
    let tuples = problem.tuples(solution)?;
    evaluate_tuples(problem, &tuples)
}

/// Every rule `solution` breaks. Empty means complete and feasible.
pub fn check_feasibility(instance: &Instance, solution: &Solution) -> Vec<Violation> {
    match Problem::new(instance) {
        Ok(problem) => check_feasibility_with(&problem, solution),
        Err(e) => vec![Violation::UnknownReference { what: e.to_string() }],
    }
}

pub fn check_feasibility_with(problem: &Problem, solution: &Solution) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut tuples = Vec::with_capacity(solution.assignments.len());
    let mut times_seen = vec![0usize; problem.n_requests()];
    for a in &solution.assignments {
        let t = match problem.tuple(a) {
            Ok(t) => t,
            Err(e) => {
                out.push(Violation::UnknownReference { what: e.to_string() });
                continue;
            }
        };
        if t.requests.is_empty() {
            out.push(Violation::EmptyAssignment {
                content: a.content_id,
                server: a.server_id,
                period: a.period,
            });
        }
        if t.period >= problem.horizon() {
            out.push(Violation::OutsideHorizon { period: t.period });
            continue;
        }
        if t.period < problem.start[t.content] {
            out.push(Violation::ContentNotStarted { content: a.content_id, period: t.period });
        }
        for &i in &t.requests {
            times_seen[i] += 1;
            if problem.req_content[i] != t.content {
                out.push(Violation::ContentMismatch {
                    request: problem.request_ids[i],
                    content: a.content_id,
                });
            }
            if t.period < problem.arrival[i] {
                out.push(Violation::EarlyService { request: problem.request_ids[i], period: t.period });
            }
        }
        tuples.push(t);
    }
    for (i, &n) in times_seen.iter().enumerate() {
        let request = problem.request_ids[i];
        match n {
            0 => out.push(Violation::Unattended { request }),
            1 => {}
            _ => out.push(Violation::Duplicate { request }),
        }
    }

    let runs = server_runs(problem, &tuples);
    for (j, run) in runs.iter().enumerate() {
        let server = problem.server_ids[j];
        for fault in &run.faults {
            out.push(match *fault {
                Fault::Bandwidth { period, load } => Violation::BandwidthExceeded {
                    server,
                    period,
                    load_mb: load,
                    capacity_mb: problem.bandwidth[j],
                },
                Fault::Storage { period, content } => Violation::StorageExceeded {
                    server,
                    period,
                    content: problem.content_ids[content],
                },
            });
        }
    }
    let timeline = timeline_from_runs(problem, &runs);
    for (k, &start) in problem.start.iter().enumerate() {
        let content = problem.content_ids[k];
        for period in start..problem.horizon() {
            if timeline.replica_count(period, content) == 0 {
                out.push(Violation::NoReplica { content, period });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
