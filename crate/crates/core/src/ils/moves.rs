//! The five neighborhoods over 4-tuple solutions.
//!
//! * Shift: move one tuple to another server.
//! * Swap: exchange the servers of two tuples on different servers.
//! * Split: divide a tuple's requests between two different servers.
//! * Merge: join two tuples of the same content and period on one server.
//! * d-Delay: move a tuple `d` periods later or earlier.

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::{Change, PlanState};
use crate::model::Tuple;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Neighborhood {
    Shift,
    Swap,
    Split,
    Merge,
    Delay,
}

impl Neighborhood {
    pub const ALL: [Neighborhood; 5] =
        [Neighborhood::Shift, Neighborhood::Swap, Neighborhood::Split, Neighborhood::Merge, Neighborhood::Delay];
    /// d-Delay is used by the local search only.
    pub const PERTURBATION: [Neighborhood; 4] =
        [Neighborhood::Shift, Neighborhood::Swap, Neighborhood::Split, Neighborhood::Merge];
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    Shift,
    Swap,
    Split,
    Merge,
    DelayPlus,
    DelayMinus,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Op {
    Shift { a: usize, to: usize },
    Swap { a: usize, b: usize },
    /// Requests of `a` selected by `mask` go to `to_b`, the rest to `to_c`.
    Split { a: usize, mask: u64, to_b: usize, to_c: usize },
    Merge { a: usize, b: usize, to: usize },
    Delay { a: usize, d: isize },
}

/// A candidate modification of a solution, addressed by assignment position.
#[derive(Clone, Debug, PartialEq)]
pub struct Move {
    pub(crate) op: Op,
    /// Operand tuples as they were when the move was generated.
    pub(crate) guard: Vec<Tuple>,
}

impl Move {
    pub fn kind(&self) -> MoveKind {
        match self.op {
            Op::Shift { .. } => MoveKind::Shift,
            Op::Swap { .. } => MoveKind::Swap,
            Op::Split { .. } => MoveKind::Split,
            Op::Merge { .. } => MoveKind::Merge,
            Op::Delay { d, .. } if d > 0 => MoveKind::DelayPlus,
            Op::Delay { .. } => MoveKind::DelayMinus,
        }
    }

    /// Positions of the operand assignments.
    pub fn operands(&self) -> Vec<usize> {
        match self.op {
            Op::Shift { a, .. } | Op::Split { a, .. } | Op::Delay { a, .. } => vec![a],
            Op::Swap { a, b } | Op::Merge { a, b, .. } => vec![a, b],
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.op {
            Op::Shift { a, to } => write!(f, "shift #{a} -> server[{to}]"),
            Op::Swap { a, b } => write!(f, "swap #{a} <-> #{b}"),
            Op::Split { a, mask, to_b, to_c } => {
                write!(f, "split #{a} mask={mask:#b} -> server[{to_b}], server[{to_c}]")
            }
            Op::Merge { a, b, to } => write!(f, "merge #{a} + #{b} -> server[{to}]"),
            Op::Delay { a, d } => write!(f, "delay #{a} by {d:+}"),
        }
    }
}

/// Requests per tuple up to which every bipartition is enumerated.
const SPLIT_ENUMERATE_MAX: usize = 7;
/// Candidate spaces up to this size are scanned in a full random permutation.
const EXHAUSTIVE_LIMIT: usize = 60_000;

fn with_tuple(t: &Tuple, server: usize, period: usize, requests: Vec<usize>) -> Tuple {
    Tuple { content: t.content, server, period, requests }
}

impl Op {
    pub(crate) fn change(&self, plan: &PlanState<'_>) -> Change {
        let tuples = &plan.tuples;
        match *self {
            Op::Shift { a, to } => {
                let t = &tuples[a];
                Change { removed: vec![a], added: vec![with_tuple(t, to, t.period, t.requests.clone())] }
            }
            Op::Swap { a, b } => {
                let (ta, tb) = (&tuples[a], &tuples[b]);
                Change {
                    removed: vec![a, b],
                    added: vec![
                        with_tuple(ta, tb.server, ta.period, ta.requests.clone()),
                        with_tuple(tb, ta.server, tb.period, tb.requests.clone()),
                    ],
                }
            }
            Op::Split { a, mask, to_b, to_c } => {
                let t = &tuples[a];
                let (part_b, part_c): (Vec<(usize, usize)>, Vec<(usize, usize)>) =
                    t.requests.iter().copied().enumerate().partition(|(pos, _)| mask >> pos & 1 == 1);
                Change {
                    removed: vec![a],
                    added: vec![
                        with_tuple(t, to_b, t.period, part_b.into_iter().map(|x| x.1).collect()),
                        with_tuple(t, to_c, t.period, part_c.into_iter().map(|x| x.1).collect()),
                    ],
                }
            }
            Op::Merge { a, b, to } => {
                let (ta, tb) = (&tuples[a], &tuples[b]);
                let mut requests: Vec<usize> = ta.requests.iter().chain(&tb.requests).copied().collect();
                requests.sort_unstable();
                Change { removed: vec![a, b], added: vec![with_tuple(ta, to, ta.period, requests)] }
            }
            Op::Delay { a, d } => {
                let t = &tuples[a];
                let period = (t.period as isize + d) as usize;
                Change { removed: vec![a], added: vec![with_tuple(t, t.server, period, t.requests.clone())] }
            }
        }
    }

    pub(crate) fn into_move(self, plan: &PlanState<'_>) -> Move {
        let guard = match self {
            Op::Shift { a, .. } | Op::Split { a, .. } | Op::Delay { a, .. } => vec![plan.tuples[a].clone()],
            Op::Swap { a, b } | Op::Merge { a, b, .. } => vec![plan.tuples[a].clone(), plan.tuples[b].clone()],
        };
        Move { op: self, guard }
    }
}

/// Indexable candidate set of one neighborhood; `decode` yields `None` for
/// indices that do not name a valid candidate.
enum Space {
    Shift { tuples: usize, servers: usize },
    Swap { tuples: usize },
    Split { entries: Vec<(usize, Option<u64>)>, servers: usize },
    Merge { pairs: Vec<(usize, usize)>, servers: usize },
    Delay { tuples: usize, d: usize },
}

fn unrank_pair(idx: usize) -> (usize, usize) {
    // idx = b (b - 1) / 2 + a, a < b
    let mut b = ((1.0 + (1.0 + 8.0 * idx as f64).sqrt()) / 2.0) as usize;
    while b * (b - 1) / 2 > idx {
        b -= 1;
    }
    while (b + 1) * b / 2 <= idx {
        b += 1;
    }
    (idx - b * (b - 1) / 2, b)
}

impl Space {
    fn new(kind: Neighborhood, plan: &PlanState<'_>, delay_d: usize) -> Self {
        let p = plan.problem;
        let n = plan.tuples.len();
        let servers = p.n_servers();
        match kind {
            Neighborhood::Shift => Space::Shift { tuples: n, servers },
            Neighborhood::Swap => Space::Swap { tuples: n },
            Neighborhood::Delay => Space::Delay { tuples: n, d: delay_d },
            Neighborhood::Merge => {
                let mut groups: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
                for (pos, t) in plan.tuples.iter().enumerate() {
                    groups.entry((t.content, t.period)).or_default().push(pos);
                }
                let mut pairs = Vec::new();
                for members in groups.values() {
                    for (x, &a) in members.iter().enumerate() {
                        pairs.extend(members[x + 1..].iter().map(|&b| (a, b)));
                    }
                }
                pairs.sort_unstable();
                Space::Merge { pairs, servers }
            }
            Neighborhood::Split => {
                let mut entries = Vec::new();
                for (pos, t) in plan.tuples.iter().enumerate() {
                    let len = t.requests.len();
                    if len < 2 {
                        continue;
                    }
                    if len <= SPLIT_ENUMERATE_MAX {
                        // masks that keep request 0 in the first part and leave the second nonempty
                        let full = (1u64 << len) - 1;
                        entries.extend((1..full).step_by(2).map(|m| (pos, Some(m))));
                    } else {
                        entries.extend(std::iter::repeat_n((pos, None), 8));
                    }
                }
                Space::Split { entries, servers }
            }
        }
    }

    fn len(&self) -> usize {
        match self {
            Space::Shift { tuples, servers } => tuples * servers.saturating_sub(1),
            Space::Swap { tuples } => tuples * tuples.saturating_sub(1) / 2,
            Space::Split { entries, servers } => entries.len() * servers * servers.saturating_sub(1),
            Space::Merge { pairs, servers } => pairs.len() * servers,
            Space::Delay { tuples, .. } => tuples * 2,
        }
    }

    fn decode<R: Rng + ?Sized>(&self, idx: usize, plan: &PlanState<'_>, rng: &mut R) -> Option<Op> {
        let p = plan.problem;
        match *self {
            Space::Shift { servers, .. } => {
                let a = idx / (servers - 1);
                let mut to = idx % (servers - 1);
                if to >= plan.tuples[a].server {
                    to += 1;
                }
                Some(Op::Shift { a, to })
            }
            Space::Swap { .. } => {
                let (a, b) = unrank_pair(idx);
                (plan.tuples[a].server != plan.tuples[b].server).then_some(Op::Swap { a, b })
            }
            Space::Split { ref entries, servers } => {
                let pairs = servers * (servers - 1);
                let (a, mask) = entries[idx / pairs];
                let pair = idx % pairs;
                let to_b = pair / (servers - 1);
                let mut to_c = pair % (servers - 1);
                if to_c >= to_b {
                    to_c += 1;
                }
                let mask = mask.unwrap_or_else(|| {
                    let len = plan.tuples[a].requests.len().min(63);
                    let full = (1u64 << len) - 1;
                    // nonempty proper subset holding request 0
                    (rng.random_range(0..full >> 1) << 1) | 1
                });
                Some(Op::Split { a, mask, to_b, to_c })
            }
            Space::Merge { ref pairs, servers } => {
                let (a, b) = pairs[idx / servers];
                Some(Op::Merge { a, b, to: idx % servers })
            }
            Space::Delay { d, .. } => {
                let a = idx / 2;
                let t = &plan.tuples[a];
                if idx.is_multiple_of(2) {
                    (t.period + d < p.horizon()).then_some(Op::Delay { a, d: d as isize })
                } else {
                    (t.period >= d && t.period - d >= p.earliest_period(t.content, &t.requests))
                        .then_some(Op::Delay { a, d: -(d as isize) })
                }
            }
        }
    }
}

/// Visit candidates of `kind` in uniformly random order, passing each
/// feasible one with its objective change to `visit` until it returns false
/// or `cap` feasible candidates have been seen.
pub(crate) fn scan<R: Rng + ?Sized>(
    kind: Neighborhood,
    plan: &PlanState<'_>,
    delay_d: usize,
    cap: usize,
    rng: &mut R,
    mut visit: impl FnMut(Op, f64) -> bool,
) {
    let space = Space::new(kind, plan, delay_d);
    let len = space.len();
    if len == 0 {
        return;
    }
    let mut feasible = 0;
    let mut try_idx = |idx: usize, rng: &mut R| -> bool {
        let Some(op) = space.decode(idx, plan, rng) else { return true };
        let Some(delta) = plan.delta(&op.change(plan)) else { return true };
        feasible += 1;
        visit(op, delta) && feasible < cap
    };
    if len <= EXHAUSTIVE_LIMIT {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(rng);
        for idx in order {
            if !try_idx(idx, rng) {
                return;
            }
        }
    } else {
        for _ in 0..cap.saturating_mul(50) {
            let idx = rng.random_range(0..len);
            if !try_idx(idx, rng) {
                return;
            }
        }
    }
}

/// Best improving candidate of `kind` among at most `cap` feasible ones.
pub(crate) fn best_improving<R: Rng + ?Sized>(
    kind: Neighborhood,
    plan: &PlanState<'_>,
    delay_d: usize,
    cap: usize,
    rng: &mut R,
) -> Option<(Op, f64)> {
    let mut best: Option<(Op, f64)> = None;
    scan(kind, plan, delay_d, cap, rng, |op, delta| {
        if delta < -super::IMPROVEMENT_EPS && best.as_ref().is_none_or(|(_, b)| delta < *b) {
            best = Some((op, delta));
        }
        true
    });
    best
}

/// First feasible candidate of `kind` in random order.
pub(crate) fn random_feasible<R: Rng + ?Sized>(
    kind: Neighborhood,
    plan: &PlanState<'_>,
    delay_d: usize,
    rng: &mut R,
) -> Option<Op> {
    let mut found = None;
    scan(kind, plan, delay_d, 1, rng, |op, _| {
        found = Some(op);
        false
    });
    found
}
