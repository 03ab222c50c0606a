//! Depth-first branch-and-bound for tiny instances.
//!
//! Requests are branched in (arrival, id) order over every (server, period)
//! they may be served in. The bound adds, to the attendance and backlog of
//! the assigned requests, one copy per distinct (server, content) pair that
//! needs a replica, plus the attendance cost of every unassigned request.
//! Leaves are replayed through the same per-server simulation the model uses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::construct_tuples;
use crate::model::sim::server_cost;
use crate::model::{Instance, ModelError, Problem, RequestId, ServerId, Solution, Tuple};
use crate::rng::seeded;

const EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactConfig {
    pub node_limit: u64,
    /// Bound pruning, capacity pruning and symmetry breaking. Off, the
    /// search enumerates every branch.
    pub prune: bool,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self { node_limit: 50_000_000, prune: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactOutcome {
    pub solution: Solution,
    pub cost: f64,
    pub proven: bool,
    pub nodes: u64,
}

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("node limit reached after {} nodes; best cost {}", .0.nodes, .0.cost)]
    BudgetExhausted(Box<ExactOutcome>),
    #[error("node limit reached before any feasible solution was found")]
    NoIncumbent,
    #[error("instance has no feasible solution")]
    Infeasible,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A partial assignment of requests to (server, period) slots.
#[derive(Clone, Debug)]
pub struct Partial<'p> {
    problem: &'p Problem,
    choice: Vec<Option<(usize, usize)>>,
    load: Vec<f64>,
    /// Requests per (server, content, period) slot.
    slots: BTreeMap<(usize, usize, usize), usize>,
    /// Slots per (server, content) pair that needs a copied replica.
    copied: BTreeMap<(usize, usize), usize>,
    /// Storage demand of copied contents in use per (server, period).
    held: Vec<f64>,
    service: f64,
    copy_floor: f64,
    unassigned: f64,
}

impl<'p> Partial<'p> {
    pub fn new(problem: &'p Problem) -> Self {
        let cells = problem.n_servers() * problem.horizon();
        Self {
            problem,
            choice: vec![None; problem.n_requests()],
            load: vec![0.0; cells],
            slots: BTreeMap::new(),
            copied: BTreeMap::new(),
            held: vec![0.0; cells],
            service: 0.0,
            copy_floor: 0.0,
            unassigned: problem.attend.iter().sum(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.choice.iter().all(Option::is_some)
    }

    fn cell(&self, j: usize, t: usize) -> usize {
        j * self.problem.horizon() + t
    }

    /// Bound increase of serving `i` on `j` in `t`.
    fn marginal(&self, i: usize, j: usize, t: usize) -> f64 {
        let p = self.problem;
        let k = p.req_content[i];
        let copy = if !p.is_pinned(j, k) && !self.copied.contains_key(&(j, k)) { p.copy_cost[k] } else { 0.0 };
        p.wait_cost(i, t) + copy
    }

    /// Necessary capacity conditions for adding `i` to (`j`, `t`).
    fn fits(&self, i: usize, j: usize, t: usize) -> bool {
        let p = self.problem;
        let k = p.req_content[i];
        let c = self.cell(j, t);
        if self.load[c] + p.size[k] > p.bandwidth[j] + EPS {
            return false;
        }
        let new_content = !p.is_pinned(j, k) && !self.slots.contains_key(&(j, k, t));
        !new_content || p.reserved[j] + self.held[c] + p.size[k] <= p.storage[j] + EPS
    }

    fn push(&mut self, i: usize, j: usize, t: usize) {
        let p = self.problem;
        let k = p.req_content[i];
        let c = self.cell(j, t);
        self.service += p.attend[i] + p.wait_cost(i, t);
        self.unassigned -= p.attend[i];
        self.load[c] += p.size[k];
        let slot = self.slots.entry((j, k, t)).or_insert(0);
        *slot += 1;
        if !p.is_pinned(j, k) {
            if *slot == 1 {
                self.held[c] += p.size[k];
            }
            let pair = self.copied.entry((j, k)).or_insert(0);
            if *pair == 0 {
                self.copy_floor += p.copy_cost[k];
            }
            *pair += 1;
        }
        self.choice[i] = Some((j, t));
    }

    fn pop(&mut self, i: usize) {
        let p = self.problem;
        let (j, t) = self.choice[i].take().expect("request is assigned");
        let k = p.req_content[i];
        let c = self.cell(j, t);
        self.service -= p.attend[i] + p.wait_cost(i, t);
        self.unassigned += p.attend[i];
        self.load[c] -= p.size[k];
        let slot = self.slots.get_mut(&(j, k, t)).expect("slot exists");
        *slot -= 1;
        let emptied = *slot == 0;
        if emptied {
            self.slots.remove(&(j, k, t));
        }
        if !p.is_pinned(j, k) {
            if emptied {
                self.held[c] -= p.size[k];
            }
            let pair = self.copied.get_mut(&(j, k)).expect("pair exists");
            *pair -= 1;
            if *pair == 0 {
                self.copied.remove(&(j, k));
                self.copy_floor -= p.copy_cost[k];
            }
        }
    }

    /// Assign `request` to `server` in `period`.
    pub fn assign(&mut self, request: RequestId, server: ServerId, period: usize) -> Result<(), ModelError> {
        let p = self.problem;
        let i = p
            .request_index(request)
            .ok_or_else(|| ModelError::BrokenReference(format!("request {request}")))?;
        let j = p
            .server_index(server)
            .ok_or_else(|| ModelError::BrokenReference(format!("server {server}")))?;
        if self.choice[i].is_some() {
            return Err(ModelError::DuplicateRequest(request));
        }
        if period >= p.horizon() || period < p.arrival[i].max(p.start[p.req_content[i]]) {
            return Err(ModelError::InvalidInstance(format!("request {request} cannot be served in period {period}")));
        }
        self.push(i, j, period);
        Ok(())
    }

    fn tuples(&self) -> Vec<Tuple> {
        let mut groups: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
        for (i, c) in self.choice.iter().enumerate() {
            if let Some((j, t)) = *c {
                groups.entry((self.problem.req_content[i], j, t)).or_default().push(i);
            }
        }
        groups
            .into_iter()
            .map(|((content, server, period), requests)| Tuple { content, server, period, requests })
            .collect()
    }

    /// Exact cost of a complete assignment, or `None` if it is infeasible.
    fn leaf_cost(&self) -> Option<f64> {
        let p = self.problem;
        let tuples = self.tuples();
        let mut copies = 0.0;
        for j in 0..p.n_servers() {
            copies += server_cost(p, j, &tuples)?;
        }
        Some(self.service + copies)
    }

    pub fn solution(&self) -> Solution {
        self.problem.solution(&self.tuples())
    }
}

/// Admissible bound on every completion of `partial`. For a complete
/// assignment it is the exact cost, or infinity when infeasible.
pub fn lower_bound(partial: &Partial<'_>) -> f64 {
    if partial.is_complete() {
        partial.leaf_cost().unwrap_or(f64::INFINITY)
    } else {
        partial.service + partial.copy_floor + partial.unassigned
    }
}

struct Search<'p> {
    config: ExactConfig,
    order: Vec<usize>,
    /// Serve slots of each request, indexed like `order`.
    options: Vec<Vec<(usize, usize)>>,
    /// Whether the request at this depth is interchangeable with the previous one.
    same_as_prev: Vec<bool>,
    partial: Partial<'p>,
    best: Option<(f64, Solution)>,
    nodes: u64,
    exhausted: bool,
}

impl<'p> Search<'p> {
    fn new(problem: &'p Problem, config: ExactConfig) -> Self {
        let mut order: Vec<usize> = (0..problem.n_requests()).collect();
        order.sort_by_key(|&i| (problem.arrival[i], problem.request_ids[i]));
        let options = order
            .iter()
            .map(|&i| {
                let first = problem.arrival[i].max(problem.start[problem.req_content[i]]);
                (0..problem.n_servers()).flat_map(|j| (first..problem.horizon()).map(move |t| (j, t))).collect()
            })
            .collect();
        let twins = |a: usize, b: usize| {
            problem.req_content[a] == problem.req_content[b]
                && problem.arrival[a] == problem.arrival[b]
                && problem.attend[a] == problem.attend[b]
                && (0..problem.horizon()).all(|t| problem.wait_cost(a, t) == problem.wait_cost(b, t))
        };
        let same_as_prev = (0..order.len()).map(|d| d > 0 && twins(order[d - 1], order[d])).collect();
        Self {
            config,
            order,
            options,
            same_as_prev,
            partial: Partial::new(problem),
            best: None,
            nodes: 0,
            exhausted: false,
        }
    }

    fn incumbent(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.0)
    }

    fn descend(&mut self, depth: usize, bound: f64) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.config.node_limit {
            self.exhausted = true;
            return;
        }
        debug_assert!(lower_bound(&self.partial) + EPS >= bound, "bound decreased along a branch");
        if depth == self.order.len() {
            if let Some(cost) = self.partial.leaf_cost() {
                if cost < self.incumbent() - EPS {
                    self.best = Some((cost, self.partial.solution()));
                }
            }
            return;
        }
        let i = self.order[depth];
        let here = lower_bound(&self.partial);
        let mut children: Vec<(f64, usize, (usize, usize))> = self.options[depth]
            .iter()
            .enumerate()
            .map(|(pos, &(j, t))| (self.partial.marginal(i, j, t), pos, (j, t)))
            .collect();
        if self.config.prune {
            // interchangeable requests take slots in nondecreasing option order
            if self.same_as_prev[depth] {
                let prev = self.order[depth - 1];
                let taken = self.partial.choice[prev].expect("previous depth assigned");
                let floor = self.options[depth].iter().position(|&o| o == taken).unwrap_or(0);
                children.retain(|c| c.1 >= floor);
            }
            children.retain(|&(_, _, (j, t))| self.partial.fits(i, j, t));
            children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        for (marginal, _, (j, t)) in children {
            let child_bound = here + marginal;
            if self.config.prune && child_bound >= self.incumbent() - EPS {
                // children are sorted by bound
                break;
            }
            self.partial.push(i, j, t);
            self.descend(depth + 1, child_bound);
            self.partial.pop(i);
            if self.exhausted {
                return;
            }
        }
    }
}

/// Enumeration size without pruning: one node per prefix of choices.
pub fn unpruned_node_count(instance: &Instance) -> Result<u64, ModelError> {
    let problem = Problem::new(instance)?;
    let search = Search::new(&problem, ExactConfig { node_limit: u64::MAX, prune: false });
    let mut total: u64 = 1;
    let mut level: u64 = 1;
    for opts in &search.options {
        level = level.saturating_mul(opts.len() as u64);
        total = total.saturating_add(level);
    }
    Ok(total)
}

/// Proven optimum of a tiny instance.
pub fn exact_solve(instance: &Instance, config: &ExactConfig) -> Result<ExactOutcome, ExactError> {
    let problem = Problem::new(instance)?;
    let mut search = Search::new(&problem, config.clone());
    if config.prune {
        if let Ok(tuples) = construct_tuples(&problem, &mut seeded(0)) {
            if let Ok(cost) = crate::model::evaluate_tuples(&problem, &tuples) {
                search.best = Some((cost.total, problem.solution(&tuples)));
            }
        }
    }
    search.descend(0, lower_bound(&search.partial));
    let nodes = search.nodes;
    let exhausted = search.exhausted;
    match search.best {
        Some((cost, solution)) => {
            let outcome = ExactOutcome { solution, cost, proven: !exhausted, nodes };
            if exhausted {
                Err(ExactError::BudgetExhausted(Box::new(outcome)))
            } else {
                Ok(outcome)
            }
        }
        None if exhausted => Err(ExactError::NoIncumbent),
        None => Err(ExactError::Infeasible),
    }
}
