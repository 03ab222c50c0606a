//! Replica bookkeeping for a single server.
//!
//! Pinned contents never move, so a server's copy events, evictions and
//! capacity faults depend only on the tuples it serves. Every solver in the
//! crate prices and validates plans through [`simulate_server`].

use super::problem::{Problem, Tuple};

pub(crate) const EPS: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq)]
pub(crate) struct Use {
    pub period: usize,
    pub content: usize,
    pub load: f64,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub(crate) enum Fault {
    Bandwidth { period: usize, load: f64 },
    Storage { period: usize, content: usize },
}

#[derive(Clone, Debug, Default)]
pub(crate) struct ServerRun {
    pub copy_cost: f64,
    /// (period, content) placements, in order.
    pub copies: Vec<(usize, usize)>,
    /// (period, content) evictions, in order.
    pub evictions: Vec<(usize, usize)>,
    pub first_use: Option<usize>,
    pub last_use: Option<usize>,
    pub faults: Vec<Fault>,
}

impl ServerRun {
    /// Periods an on-demand server is hired for: first to last use.
    pub fn active(&self) -> Option<std::ops::RangeInclusive<usize>> {
        Some(self.first_use?..=self.last_use?)
    }

    pub fn is_ok(&self) -> bool {
        self.faults.is_empty()
    }
}

pub(crate) fn uses_on<'a>(
    problem: &Problem,
    server: usize,
    tuples: impl IntoIterator<Item = &'a Tuple>,
) -> Vec<Use> {
    tuples
        .into_iter()
        .filter(|t| t.server == server)
        .map(|t| Use { period: t.period, content: t.content, load: problem.tuple_load(t) })
        .collect()
}

/// Replay `uses` on `server` in period order.
///
/// Contents missing on the server are copied in when first needed. If the
/// copy does not fit, least-recently-used copied replicas not needed in the
/// same period are evicted (ties by content index). Pinned replicas are never
/// evicted. With `strict` the replay stops at the first fault; otherwise
/// oversized placements are forced through so every fault is reported.
pub(crate) fn simulate_server(
    problem: &Problem,
    server: usize,
    uses: &mut [Use],
    strict: bool,
) -> ServerRun {
    uses.sort_by_key(|u| (u.period, u.content));
    let mut run = ServerRun {
        first_use: uses.first().map(|u| u.period),
        last_use: uses.last().map(|u| u.period),
        ..Default::default()
    };
    let capacity = problem.storage[server] - problem.reserved[server];
    let bandwidth = problem.bandwidth[server];
    // (content, last period used)
    let mut held: Vec<(usize, usize)> = Vec::new();
    let mut held_mb = 0.0;
    let mut needed: Vec<usize> = Vec::new();

    let mut start = 0;
    while start < uses.len() {
        let period = uses[start].period;
        let mut end = start;
        let mut load = 0.0;
        needed.clear();
        while end < uses.len() && uses[end].period == period {
            load += uses[end].load;
            if needed.last() != Some(&uses[end].content) {
                needed.push(uses[end].content);
            }
            end += 1;
        }
        if load > bandwidth + EPS {
            run.faults.push(Fault::Bandwidth { period, load });
            if strict {
                return run;
            }
        }
        for &content in &needed {
            if problem.is_pinned(server, content) || held.iter().any(|h| h.0 == content) {
                continue;
            }
            let size = problem.size[content];
            while capacity - held_mb < size - EPS {
                let victim = held
                    .iter()
                    .enumerate()
                    .filter(|(_, h)| needed.binary_search(&h.0).is_err())
                    .min_by_key(|(_, h)| (h.1, h.0))
                    .map(|(pos, _)| pos);
                let Some(pos) = victim else {
                    run.faults.push(Fault::Storage { period, content });
                    break;
                };
                let (gone, _) = held.swap_remove(pos);
                held_mb -= problem.size[gone];
                run.evictions.push((period, gone));
            }
            if strict && !run.faults.is_empty() {
                return run;
            }
            held.push((content, period));
            held_mb += size;
            run.copies.push((period, content));
            run.copy_cost += problem.copy_cost[content];
        }
        for h in held.iter_mut() {
            if needed.binary_search(&h.0).is_ok() {
                h.1 = period;
            }
        }
        start = end;
    }
    run
}

/// Copy cost of `server` when serving `tuples`, or `None` on any fault.
pub(crate) fn server_cost<'a>(
    problem: &Problem,
    server: usize,
    tuples: impl IntoIterator<Item = &'a Tuple>,
) -> Option<f64> {
    let mut uses = uses_on(problem, server, tuples);
    let run = simulate_server(problem, server, &mut uses, true);
    run.is_ok().then_some(run.copy_cost)
}
