use crate::model::sim::{simulate_server, Use};
use crate::model::{evaluate_tuples, CostBreakdown, ModelError, Problem, Tuple};

/// Replace the tuples at `removed` with `added`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Change {
    pub removed: Vec<usize>,
    pub added: Vec<Tuple>,
}

/// A complete feasible plan with cached per-server copy costs.
#[derive(Clone, Debug)]
pub(crate) struct PlanState<'p> {
    pub problem: &'p Problem,
    pub tuples: Vec<Tuple>,
    by_server: Vec<Vec<usize>>,
    server_cost: Vec<f64>,
    service: f64,
    total: f64,
}

impl<'p> PlanState<'p> {
    pub fn new(problem: &'p Problem, tuples: Vec<Tuple>) -> Result<Self, ModelError> {
        evaluate_tuples(problem, &tuples)?;
        let mut state = Self {
            problem,
            tuples,
            by_server: vec![Vec::new(); problem.n_servers()],
            server_cost: vec![0.0; problem.n_servers()],
            service: 0.0,
            total: 0.0,
        };
        state.refresh(None);
        Ok(state)
    }

    pub fn cost(&self) -> f64 {
        self.total
    }

    pub fn breakdown(&self) -> CostBreakdown {
        evaluate_tuples(self.problem, &self.tuples).expect("plan state is always feasible")
    }

    fn refresh(&mut self, touched: Option<&[usize]>) {
        for list in &mut self.by_server {
            list.clear();
        }
        for (pos, t) in self.tuples.iter().enumerate() {
            self.by_server[t.server].push(pos);
        }
        let servers: Vec<usize> = match touched {
            Some(s) => s.to_vec(),
            None => (0..self.problem.n_servers()).collect(),
        };
        for j in servers {
            let mut uses = self.uses(j, &[], &[]);
            let run = simulate_server(self.problem, j, &mut uses, true);
            debug_assert!(run.faults.is_empty(), "plan state became infeasible");
            self.server_cost[j] = run.copy_cost;
        }
        self.service = self.tuples.iter().map(|t| self.problem.tuple_service_cost(t)).sum();
        self.total = self.service + self.server_cost.iter().sum::<f64>();
    }

    fn uses(&self, j: usize, removed: &[usize], added: &[Tuple]) -> Vec<Use> {
        let p = self.problem;
        self.by_server[j]
            .iter()
            .filter(|pos| !removed.contains(pos))
            .map(|&pos| &self.tuples[pos])
            .chain(added.iter().filter(|t| t.server == j))
            .map(|t| Use { period: t.period, content: t.content, load: p.tuple_load(t) })
            .collect()
    }

    fn touched(&self, change: &Change) -> Vec<usize> {
        let mut servers: Vec<usize> = change
            .removed
            .iter()
            .map(|&pos| self.tuples[pos].server)
            .chain(change.added.iter().map(|t| t.server))
            .collect();
        servers.sort_unstable();
        servers.dedup();
        servers
    }

    /// Objective change of `change`, or `None` if the result is infeasible.
    pub fn delta(&self, change: &Change) -> Option<f64> {
        let p = self.problem;
        for t in &change.added {
            if t.requests.is_empty()
                || t.period >= p.horizon()
                || t.period < p.earliest_period(t.content, &t.requests)
            {
                return None;
            }
        }
        let mut delta = 0.0;
        for j in self.touched(change) {
            let mut uses = self.uses(j, &change.removed, &change.added);
            let run = simulate_server(p, j, &mut uses, true);
            if !run.faults.is_empty() {
                return None;
            }
            delta += run.copy_cost - self.server_cost[j];
        }
        delta += change.added.iter().map(|t| p.tuple_service_cost(t)).sum::<f64>();
        delta -= change.removed.iter().map(|&pos| p.tuple_service_cost(&self.tuples[pos])).sum::<f64>();
        Some(delta)
    }

    /// Apply a feasible change; returns the realized objective change.
    pub fn apply(&mut self, change: Change) -> f64 {
        let before = self.total;
        let touched = self.touched(&change);
        let Change { removed, added } = change;
        let mut added = added.into_iter();
        let mut leftover = Vec::new();
        for &pos in &removed {
            match added.next() {
                Some(t) => self.tuples[pos] = t,
                None => leftover.push(pos),
            }
        }
        self.tuples.extend(added);
        leftover.sort_unstable_by(|a, b| b.cmp(a));
        for pos in leftover {
            self.tuples.remove(pos);
        }
        self.refresh(Some(&touched));
        self.total - before
    }
}
