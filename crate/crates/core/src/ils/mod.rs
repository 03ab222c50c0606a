//! Iterated local search with random variable neighborhood descent.
//!
//! Each start builds a greedy solution, descends with RVND, then loops over
//! perturbation levels: perturb with `level + 1` random moves, descend again,
//! and restart the level count whenever the start's incumbent improves.

mod moves;
mod state;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::{construct_tuples, ConstructError};
use crate::model::{evaluate_tuples, CostBreakdown, Instance, ModelError, Problem, Solution};
use crate::rng::substream;

pub use moves::{Move, MoveKind, Neighborhood};
use moves::{best_improving, random_feasible};
use state::PlanState;

/// Minimum objective decrease that counts as an improvement.
pub const IMPROVEMENT_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum IlsError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("move no longer matches the solution")]
    StaleMove,
    #[error("move would make the solution infeasible")]
    InfeasibleMove,
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IlsConfig {
    pub iter_max: usize,
    pub level_max: usize,
    pub delay_d: usize,
    pub seed: u64,
    /// Feasible candidates examined per neighborhood scan.
    pub move_sample_cap: usize,
}

impl Default for IlsConfig {
    fn default() -> Self {
        Self { iter_max: 3, level_max: 7, delay_d: 1, seed: 0, move_sample_cap: 200 }
    }
}

impl IlsConfig {
    pub fn validate(&self) -> Result<(), IlsError> {
        if self.iter_max == 0 {
            return Err(IlsError::InvalidConfig("iter_max must be at least 1".into()));
        }
        if self.delay_d == 0 {
            return Err(IlsError::InvalidConfig("delay_d must be at least 1".into()));
        }
        if self.move_sample_cap == 0 {
            return Err(IlsError::InvalidConfig("move_sample_cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelEvent {
    pub level: usize,
    /// Cost after perturbation and descent.
    pub cost: f64,
    pub improved: bool,
    /// The start's incumbent after the event.
    pub incumbent: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StartStats {
    pub construct_cost: f64,
    pub descent_cost: f64,
    pub final_cost: f64,
    /// Improving moves applied by RVND, per move kind.
    pub accepted: BTreeMap<String, usize>,
    pub perturbation_moves: usize,
    pub levels: Vec<LevelEvent>,
}

impl StartStats {
    pub fn accepted_total(&self) -> usize {
        self.accepted.values().sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub seed: u64,
    pub starts: Vec<StartStats>,
    /// Global best cost after each start.
    pub best_history: Vec<f64>,
    pub best_start: usize,
    pub best_cost: f64,
    pub breakdown: CostBreakdown,
    pub wall_time_s: f64,
}

impl RunStats {
    pub fn start_costs(&self) -> Vec<f64> {
        self.starts.iter().map(|s| s.final_cost).collect()
    }

    pub fn accepted_total(&self) -> usize {
        self.starts.iter().map(StartStats::accepted_total).sum()
    }
}

fn kind_name(kind: MoveKind) -> String {
    format!("{kind:?}")
}

fn check_plan(plan: &PlanState<'_>) {
    if cfg!(debug_assertions) {
        let full = evaluate_tuples(plan.problem, &plan.tuples).expect("plan stays feasible").total;
        debug_assert!(
            (full - plan.cost()).abs() <= 1e-9 * full.abs().max(1.0),
            "incremental cost {} drifted from evaluation {}",
            plan.cost(),
            full
        );
    }
}

fn rvnd_state<R: Rng + ?Sized>(
    plan: &mut PlanState<'_>,
    config: &IlsConfig,
    rng: &mut R,
    mut on_accept: impl FnMut(MoveKind),
) {
    let mut pool = Neighborhood::ALL.to_vec();
    while !pool.is_empty() {
        let pick = rng.random_range(0..pool.len());
        let kind = pool[pick];
        match best_improving(kind, plan, config.delay_d, config.move_sample_cap, rng) {
            Some((op, delta)) => {
                let accepted = op.clone().into_move(plan).kind();
                let realized = plan.apply(op.change(plan));
                debug_assert!((realized - delta).abs() <= 1e-9 * plan.cost().abs().max(1.0));
                check_plan(plan);
                on_accept(accepted);
                pool = Neighborhood::ALL.to_vec();
            }
            None => {
                pool.remove(pick);
            }
        }
    }
}

fn perturb_state<R: Rng + ?Sized>(plan: &mut PlanState<'_>, level: usize, config: &IlsConfig, rng: &mut R) -> usize {
    let mut applied = 0;
    for _ in 0..=level {
        let mut kinds = Neighborhood::PERTURBATION.to_vec();
        let op = loop {
            if kinds.is_empty() {
                break None;
            }
            let kind = kinds.swap_remove(rng.random_range(0..kinds.len()));
            if let Some(op) = random_feasible(kind, plan, config.delay_d, rng) {
                break Some(op);
            }
        };
        let Some(op) = op else { break };
        plan.apply(op.change(plan));
        applied += 1;
    }
    check_plan(plan);
    applied
}

fn plan_for<'p>(problem: &'p Problem, solution: &Solution) -> Result<PlanState<'p>, IlsError> {
    Ok(PlanState::new(problem, problem.tuples(solution)?)?)
}

/// Feasible moves of one neighborhood, at most `config.move_sample_cap`, in
/// uniformly random order.
pub fn neighborhood_moves<R: Rng + ?Sized>(
    kind: Neighborhood,
    solution: &Solution,
    instance: &Instance,
    rng: &mut R,
    config: &IlsConfig,
) -> Result<Vec<Move>, IlsError> {
    let problem = Problem::new(instance)?;
    let plan = plan_for(&problem, solution)?;
    let mut out = Vec::new();
    moves::scan(kind, &plan, config.delay_d, config.move_sample_cap, rng, |op, _| {
        out.push(op.into_move(&plan));
        true
    });
    Ok(out)
}

/// Apply `mv` and return the new solution with its exact objective change.
pub fn apply_move(solution: &Solution, mv: &Move, instance: &Instance) -> Result<(Solution, f64), IlsError> {
    let problem = Problem::new(instance)?;
    let mut plan = plan_for(&problem, solution)?;
    let operands = mv.operands();
    let live = operands.iter().zip(&mv.guard).all(|(&pos, t)| plan.tuples.get(pos) == Some(t));
    if !live {
        return Err(IlsError::StaleMove);
    }
    let change = mv.op.change(&plan);
    if plan.delta(&change).is_none() {
        return Err(IlsError::InfeasibleMove);
    }
    let delta = plan.apply(change);
    Ok((problem.solution(&plan.tuples), delta))
}

/// Random variable neighborhood descent to a local optimum.
pub fn rvnd<R: Rng + ?Sized>(
    solution: &Solution,
    instance: &Instance,
    rng: &mut R,
    config: &IlsConfig,
) -> Result<Solution, IlsError> {
    let problem = Problem::new(instance)?;
    let mut plan = plan_for(&problem, solution)?;
    rvnd_state(&mut plan, config, rng, |_| {});
    Ok(problem.solution(&plan.tuples))
}

/// Apply `level + 1` random feasible Shift, Swap, Split or Merge moves.
pub fn perturb<R: Rng + ?Sized>(
    solution: &Solution,
    level: usize,
    rng: &mut R,
    instance: &Instance,
    config: &IlsConfig,
) -> Result<(Solution, usize), IlsError> {
    let problem = Problem::new(instance)?;
    let mut plan = plan_for(&problem, solution)?;
    let applied = perturb_state(&mut plan, level, config, rng);
    Ok((problem.solution(&plan.tuples), applied))
}

fn run_start<'p>(
    problem: &'p Problem,
    config: &IlsConfig,
    start: usize,
) -> Result<(PlanState<'p>, StartStats), IlsError> {
    let mut rng = substream(config.seed, start as u64);
    let mut stats = StartStats::default();
    let mut plan = PlanState::new(problem, construct_tuples(problem, &mut rng)?)?;
    stats.construct_cost = plan.cost();
    let mut accepted: BTreeMap<String, usize> = BTreeMap::new();
    rvnd_state(&mut plan, config, &mut rng, |k| *accepted.entry(kind_name(k)).or_default() += 1);
    stats.descent_cost = plan.cost();
    let mut level = 0;
    while level < config.level_max {
        let mut trial = plan.clone();
        stats.perturbation_moves += perturb_state(&mut trial, level, config, &mut rng);
        let mut trial_accepted = Vec::new();
        rvnd_state(&mut trial, config, &mut rng, |k| trial_accepted.push(k));
        let improved = trial.cost() < plan.cost() - IMPROVEMENT_EPS;
        let cost = trial.cost();
        let used = level;
        if improved {
            plan = trial;
            for k in trial_accepted {
                *accepted.entry(kind_name(k)).or_default() += 1;
            }
            level = 0;
        }
        stats.levels.push(LevelEvent { level: used, cost, improved, incumbent: plan.cost() });
        if !improved {
            level += 1;
        }
    }
    stats.accepted = accepted;
    stats.final_cost = plan.cost();
    Ok((plan, stats))
}

/// Multi-start ILS-RVND. Starts run in parallel on independent random
/// streams and are reduced in start order, so the result depends only on
/// the instance and the configuration.
pub fn ils_solve(instance: &Instance, config: &IlsConfig) -> Result<(Solution, RunStats), IlsError> {
    config.validate()?;
    let clock = Instant::now();
    let problem = Problem::new(instance)?;
    let results: Vec<Result<(PlanState<'_>, StartStats), IlsError>> =
        (0..config.iter_max).into_par_iter().map(|s| run_start(&problem, config, s)).collect();
    let mut stats = RunStats { seed: config.seed, ..RunStats::default() };
    let mut best: Option<PlanState<'_>> = None;
    for (start, result) in results.into_iter().enumerate() {
        let (plan, start_stats) = result?;
        if best.as_ref().is_none_or(|b| plan.cost() < b.cost() - IMPROVEMENT_EPS) {
            stats.best_start = start;
            best = Some(plan);
        }
        stats.best_history.push(best.as_ref().map_or(f64::INFINITY, PlanState::cost));
        stats.starts.push(start_stats);
    }
    let best = best.expect("iter_max is at least 1");
    stats.breakdown = best.breakdown();
    stats.best_cost = stats.breakdown.total;
    stats.wall_time_s = clock.elapsed().as_secs_f64();
    Ok((problem.solution(&best.tuples), stats))
}
