//! Randomized greedy construction.
//!
//! Requests are visited in arrival order, shuffled within each arrival
//! period. Each goes to the origin server with the smallest marginal
//! objective increase; cloud servers are considered only when no origin
//! server can take it. A request nobody can take is postponed one period at
//! a time, accruing backlog.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::model::sim::{simulate_server, uses_on, EPS};
use crate::model::{Instance, ModelError, Problem, RequestId, ServerId, Solution, Tuple};

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("request {0} cannot be served within the horizon")]
    Infeasible(RequestId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Partial plan plus the bookkeeping needed to price the next assignment.
pub struct BuildState<'p> {
    problem: &'p Problem,
    tuples: Vec<Tuple>,
    slot: HashMap<(usize, usize, usize), usize>,
    /// Bandwidth in use, indexed `server * horizon + period`.
    load: Vec<f64>,
    copy_cost: Vec<f64>,
}

impl<'p> BuildState<'p> {
    pub fn new(problem: &'p Problem) -> Self {
        Self {
            problem,
            tuples: Vec::new(),
            slot: HashMap::new(),
            load: vec![0.0; problem.n_servers() * problem.horizon()],
            copy_cost: vec![0.0; problem.n_servers()],
        }
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    pub fn remaining_bandwidth(&self, server: ServerId, period: usize) -> Option<f64> {
        let j = self.problem.server_index(server)?;
        (period < self.problem.horizon())
            .then(|| self.problem.bandwidth[j] - self.load[j * self.problem.horizon() + period])
    }

    /// Copy cost of server `j` after adding a use of `content` in `period`,
    /// or `None` when it no longer fits.
    fn copy_cost_with(&self, j: usize, content: usize, period: usize) -> Option<f64> {
        let p = self.problem;
        if p.is_pinned(j, content) || self.slot.contains_key(&(content, j, period)) {
            return Some(self.copy_cost[j]);
        }
        let extra = Tuple { content, server: j, period, requests: Vec::new() };
        let mut uses = uses_on(p, j, self.tuples.iter().chain(std::iter::once(&extra)));
        let run = simulate_server(p, j, &mut uses, true);
        run.faults.is_empty().then_some(run.copy_cost)
    }

    fn marginal(&self, i: usize, j: usize, period: usize) -> Option<f64> {
        let p = self.problem;
        let k = p.req_content[i];
        if period < p.arrival[i] || period < p.start[k] || period >= p.horizon() {
            return None;
        }
        if self.load[j * p.horizon() + period] + p.size[k] > p.bandwidth[j] + EPS {
            return None;
        }
        let copies = self.copy_cost_with(j, k, period)?;
        Some(p.attend[i] + p.wait_cost(i, period) + (copies - self.copy_cost[j]))
    }

    /// Objective increase of serving `request` on `server` in `period`, or
    /// `None` if that breaks bandwidth or storage.
    pub fn marginal_cost(&self, request: RequestId, server: ServerId, period: usize) -> Option<f64> {
        let i = self.problem.request_index(request)?;
        let j = self.problem.server_index(server)?;
        self.marginal(i, j, period)
    }

    fn place(&mut self, i: usize, j: usize, period: usize) {
        let p = self.problem;
        let k = p.req_content[i];
        let new_cost = self.copy_cost_with(j, k, period).expect("placement was priced as feasible");
        self.copy_cost[j] = new_cost;
        self.load[j * p.horizon() + period] += p.size[k];
        match self.slot.get(&(k, j, period)) {
            Some(&pos) => {
                let reqs = &mut self.tuples[pos].requests;
                let at = reqs.partition_point(|&r| r < i);
                reqs.insert(at, i);
            }
            None => {
                self.slot.insert((k, j, period), self.tuples.len());
                self.tuples.push(Tuple { content: k, server: j, period, requests: vec![i] });
            }
        }
    }

    /// Commit `request` to `server` in `period` if feasible.
    pub fn assign(&mut self, request: RequestId, server: ServerId, period: usize) -> Option<f64> {
        let i = self.problem.request_index(request)?;
        let j = self.problem.server_index(server)?;
        let cost = self.marginal(i, j, period)?;
        self.place(i, j, period);
        Some(cost)
    }

    /// Cheapest feasible server in `period`: origin pool first, cloud only as
    /// a fallback; ties go to the lowest server id.
    fn best_server(&self, i: usize, period: usize) -> Option<(usize, f64)> {
        let p = self.problem;
        for cloud in [false, true] {
            let best = (0..p.n_servers())
                .filter(|&j| p.is_cloud(j) == cloud)
                .filter_map(|j| self.marginal(i, j, period).map(|c| (j, c)))
                .fold(None, |acc: Option<(usize, f64)>, (j, c)| match acc {
                    Some((_, bc)) if bc <= c => acc,
                    _ => Some((j, c)),
                });
            if best.is_some() {
                return best;
            }
        }
        None
    }

    pub(crate) fn into_tuples(self) -> Vec<Tuple> {
        self.tuples
    }

    pub fn into_solution(self) -> Solution {
        self.problem.solution(&self.tuples)
    }
}

/// Request visiting order: arrival-major, random within each arrival period.
pub(crate) fn visit_order<R: Rng + ?Sized>(problem: &Problem, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..problem.n_requests()).collect();
    order.sort_by_key(|&i| (problem.arrival[i], i));
    let mut start = 0;
    while start < order.len() {
        let arrival = problem.arrival[order[start]];
        let end = start + order[start..].iter().take_while(|&&i| problem.arrival[i] == arrival).count();
        order[start..end].shuffle(rng);
        start = end;
    }
    order
}

pub(crate) fn construct_tuples<R: Rng + ?Sized>(
    problem: &Problem,
    rng: &mut R,
) -> Result<Vec<Tuple>, ConstructError> {
    let mut state = BuildState::new(problem);
    for i in visit_order(problem, rng) {
        let placed = (problem.arrival[i]..problem.horizon())
            .find_map(|t| state.best_server(i, t).map(|(j, _)| (j, t)));
        match placed {
            Some((j, t)) => state.place(i, j, t),
            None => return Err(ConstructError::Infeasible(problem.request_ids[i])),
        }
    }
    Ok(state.into_tuples())
}

pub fn construct_solution<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Result<Solution, ConstructError> {
    let problem = Problem::new(instance)?;
    let tuples = construct_tuples(&problem, rng)?;
    Ok(problem.solution(&tuples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        check_feasibility, evaluate, Content, ContentId, CostParams, Pool, Request, ServerSpec,
    };
    use crate::rng::seeded;

    fn srv(id: u32, pool: Pool, storage: f64, bw: f64) -> ServerSpec {
        ServerSpec { id: ServerId(id), pool, storage_mb: storage, bandwidth_mb: bw, price_per_period: 1.0 }
    }

    fn inst(servers: Vec<ServerSpec>, arrivals: &[usize], horizon: usize) -> Instance {
        let mut costs = CostParams::default();
        costs.copy.insert(ContentId(0), 90.0);
        let requests: Vec<Request> = arrivals
            .iter()
            .enumerate()
            .map(|(i, &a)| Request { id: RequestId(i as u32), content_id: ContentId(0), arrival_period: a })
            .collect();
        for r in &requests {
            costs.attend.insert(r.id, 90.0);
        }
        Instance {
            servers,
            contents: vec![Content {
                id: ContentId(0),
                size_mb: 600.0,
                start_period: 0,
                origin_server: ServerId(0),
                mirrors: vec![],
            }],
            requests,
            horizon,
            period_seconds: 60.0,
            costs,
        }
    }

    #[test]
    fn marginal_cost_terms() {
        let inst = inst(
            vec![srv(0, Pool::Origin, 5000.0, 5000.0), srv(1, Pool::Cloud, 5000.0, 5000.0)],
            &[0],
            4,
        );
        let p = Problem::new(&inst).unwrap();
        let state = BuildState::new(&p);
        assert_eq!(state.marginal_cost(RequestId(0), ServerId(0), 0), Some(90.0));
        assert_eq!(state.marginal_cost(RequestId(0), ServerId(1), 0), Some(180.0));
        assert_eq!(state.marginal_cost(RequestId(0), ServerId(0), 2), Some(90.0 + 360.0));
    }

    #[test]
    fn marginal_cost_sees_existing_replica() {
        let inst = inst(
            vec![srv(0, Pool::Origin, 5000.0, 5000.0), srv(1, Pool::Cloud, 5000.0, 5000.0)],
            &[0, 1],
            4,
        );
        let p = Problem::new(&inst).unwrap();
        let mut state = BuildState::new(&p);
        assert_eq!(state.assign(RequestId(0), ServerId(1), 0), Some(180.0));
        assert_eq!(state.marginal_cost(RequestId(1), ServerId(1), 1), Some(90.0));
        assert_eq!(state.remaining_bandwidth(ServerId(1), 0), Some(4400.0));
        assert_eq!(state.marginal_cost(RequestId(1), ServerId(1), 0), None);
    }

    #[test]
    fn marginal_cost_infeasible_without_bandwidth_or_storage() {
        let inst = inst(
            vec![srv(0, Pool::Origin, 5000.0, 500.0), srv(1, Pool::Cloud, 100.0, 5000.0)],
            &[0],
            2,
        );
        let p = Problem::new(&inst).unwrap();
        let state = BuildState::new(&p);
        assert_eq!(state.marginal_cost(RequestId(0), ServerId(0), 0), None);
        assert_eq!(state.marginal_cost(RequestId(0), ServerId(1), 0), None);
    }

    #[test]
    fn single_origin_request() {
        let inst = inst(vec![srv(0, Pool::Origin, 5000.0, 5000.0)], &[1], 3);
        let sol = construct_solution(&inst, &mut seeded(1)).unwrap();
        assert_eq!(sol.assignments.len(), 1);
        assert_eq!(sol.assignments[0].server_id, ServerId(0));
        assert_eq!(sol.assignments[0].period, 1);
        assert_eq!(evaluate(&inst, &sol).unwrap().total, 90.0);
    }

    #[test]
    fn overflow_is_backlogged() {
        let inst = inst(vec![srv(0, Pool::Origin, 5000.0, 1000.0)], &[0, 0], 3);
        let sol = construct_solution(&inst, &mut seeded(1)).unwrap();
        assert!(check_feasibility(&inst, &sol).is_empty());
        let mut periods: Vec<_> = sol.assignments.iter().map(|a| a.period).collect();
        periods.sort();
        assert_eq!(periods, vec![0, 1]);
        let cost = evaluate(&inst, &sol).unwrap();
        assert!(cost.backlog > 0.0);
        assert_eq!(cost.total, 90.0 * 2.0 + 180.0);
    }

    #[test]
    fn origin_preferred_on_equal_cost() {
        // content mirrored on cloud-free origin 2 and the cloud server already
        // needs no copy either: origin must win the tie
        let mut inst = inst(
            vec![srv(0, Pool::Origin, 5000.0, 5000.0), srv(1, Pool::Cloud, 5000.0, 5000.0)],
            &[0],
            2,
        );
        inst.costs.copy.insert(ContentId(0), 0.0);
        let sol = construct_solution(&inst, &mut seeded(3)).unwrap();
        assert_eq!(sol.assignments[0].server_id, ServerId(0));
    }

    #[test]
    fn cloud_used_when_origin_is_full() {
        let inst = inst(
            vec![srv(0, Pool::Origin, 5000.0, 600.0), srv(1, Pool::Cloud, 1000.0, 600.0)],
            &[0, 0],
            3,
        );
        let sol = construct_solution(&inst, &mut seeded(1)).unwrap();
        assert!(check_feasibility(&inst, &sol).is_empty());
        let cost = evaluate(&inst, &sol).unwrap();
        assert_eq!(cost.total, 90.0 * 3.0);
        assert_eq!(cost.servers_od, 1);
    }

    #[test]
    fn unservable_request_is_infeasible() {
        let inst = inst(vec![srv(0, Pool::Origin, 5000.0, 600.0)], &[1, 1], 2);
        assert!(matches!(
            construct_solution(&inst, &mut seeded(1)),
            Err(ConstructError::Infeasible(_))
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let inst = inst(
            vec![srv(0, Pool::Origin, 5000.0, 1200.0), srv(1, Pool::Cloud, 1000.0, 1200.0)],
            &[0, 0, 0, 0, 1, 1, 2],
            5,
        );
        let a = construct_solution(&inst, &mut seeded(42)).unwrap();
        let b = construct_solution(&inst, &mut seeded(42)).unwrap();
        assert_eq!(a, b);
    }
}
