#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use fchp::ils::{perturb, IlsConfig};
use fchp::model::{BacklogOverride, Instance, Pool, Solution};
use fchp::random::{random_instance, RandomSpec};
use fchp::rng::seeded;

/// Random tiny instance `seed` of the shared corpus.
pub fn tiny(seed: u64) -> Instance {
    random_instance(&RandomSpec::default(), &mut seeded(seed))
}

/// A corpus instance with explicit backlog penalties on some (request, period)
/// pairs and a late-starting content.
pub fn tiny_varied(seed: u64) -> Instance {
    let mut rng = seeded(seed ^ 0x5eed);
    let mut inst = tiny(seed);
    for r in &inst.requests {
        for t in r.arrival_period..inst.horizon {
            if rng.random_bool(0.3) {
                let penalty = rng.random_range(0..=40) as f64;
                inst.costs.backlog_overrides.push(BacklogOverride { request: r.id, period: t, penalty });
            }
        }
    }
    if inst.contents.len() > 1 {
        let id = inst.contents[1].id;
        let first = inst.requests.iter().filter(|r| r.content_id == id).map(|r| r.arrival_period).min();
        inst.contents[1].start_period = rng.random_range(0..=first.unwrap_or(0));
    }
    inst
}

/// Greedy construction followed by a random number of random feasible moves.
pub fn random_feasible<R: Rng>(inst: &Instance, rng: &mut R) -> Solution {
    let sol = fchp::construct::construct_solution(inst, rng).expect("corpus instances are constructible");
    let level = rng.random_range(0..6);
    perturb(&sol, level, rng, inst, &IlsConfig::default()).expect("feasible start").0
}

/// Objective terms summed from explicit decision variables.
#[derive(Debug, Default)]
pub struct Oracle {
    pub attend: f64,
    pub backlog: f64,
    pub replication: f64,
    /// (request, period) pairs with b_it = 1.
    pub backlog_terms: BTreeMap<usize, usize>,
    pub copies: usize,
}

impl Oracle {
    pub fn total(&self) -> f64 {
        self.attend + self.backlog + self.replication
    }
}

/// Builds x_ijt from the assignments, b_it from arrival to service, and w_kjlt
/// by replaying every server period by period: a missing replica is copied from
/// the origin when needed; when storage runs out the least recently used
/// copy not needed in the period goes first (ties to the lower content index).
pub fn brute_force_objective(inst: &Instance, sol: &Solution) -> Oracle {
    let n_req = inst.requests.len();
    let n_srv = inst.servers.len();
    let n_cnt = inst.contents.len();
    let h = inst.horizon;
    let req_pos = |id| inst.requests.iter().position(|r| r.id == id).unwrap();
    let srv_pos = |id| inst.servers.iter().position(|s| s.id == id).unwrap();
    let cnt_pos = |id| inst.contents.iter().position(|c| c.id == id).unwrap();

    // x[i][j][t]
    let mut x = vec![vec![vec![0u8; h]; n_srv]; n_req];
    for a in &sol.assignments {
        for &r in &a.request_ids {
            x[req_pos(r)][srv_pos(a.server_id)][a.period] += 1;
        }
    }
    let mut out = Oracle::default();
    for (i, r) in inst.requests.iter().enumerate() {
        let c = inst.costs.attend[&r.id];
        let mut served = None;
        for j in 0..n_srv {
            for t in 0..h {
                out.attend += c * x[i][j][t] as f64;
                if x[i][j][t] == 1 {
                    served = Some(t);
                }
            }
        }
        let served = served.expect("complete solution");
        // b_it = 1 for arrival <= t < served
        let mut terms = 0;
        for t in 0..h {
            let b = (r.arrival_period <= t && t < served) as u8;
            if b == 1 {
                let p = inst
                    .costs
                    .backlog_overrides
                    .iter()
                    .find(|o| o.request == r.id && o.period == t)
                    .map(|o| o.penalty)
                    .unwrap_or(inst.costs.backlog_rho * c);
                out.backlog += p;
                terms += 1;
            }
        }
        out.backlog_terms.insert(i, terms);
    }

    // pinned[j][k]
    let mut pinned = vec![vec![false; n_cnt]; n_srv];
    for (k, c) in inst.contents.iter().enumerate() {
        pinned[srv_pos(c.origin_server)][k] = true;
        for &m in &c.mirrors {
            pinned[srv_pos(m)][k] = true;
        }
    }
    // needed[j][t] = contents served by j in t
    let mut needed = vec![vec![BTreeSet::new(); h]; n_srv];
    for a in &sol.assignments {
        needed[srv_pos(a.server_id)][a.period].insert(cnt_pos(a.content_id));
    }
    // w[k][j][l][t]
    let mut w = vec![vec![vec![vec![0u8; h]; n_srv]; n_srv]; n_cnt];
    for (j, server) in inst.servers.iter().enumerate() {
        let reserved: f64 = (0..n_cnt).filter(|&k| pinned[j][k]).map(|k| inst.contents[k].size_mb).sum();
        let capacity = server.storage_mb - reserved;
        // content -> last period used
        let mut held: BTreeMap<usize, usize> = BTreeMap::new();
        for t in 0..h {
            for &k in &needed[j][t] {
                if pinned[j][k] || held.contains_key(&k) {
                    continue;
                }
                let size = inst.contents[k].size_mb;
                loop {
                    let used: f64 = held.keys().map(|&c| inst.contents[c].size_mb).sum();
                    if capacity - used >= size - 1e-9 {
                        break;
                    }
                    let victim = held
                        .iter()
                        .filter(|(c, _)| !needed[j][t].contains(c))
                        .min_by_key(|(&c, &last)| (last, c))
                        .map(|(&c, _)| c)
                        .expect("feasible solution never overfills storage");
                    held.remove(&victim);
                }
                held.insert(k, t);
                let source = srv_pos(inst.contents[k].origin_server);
                w[k][j][source][t] = 1;
            }
            for &k in &needed[j][t] {
                if let Some(last) = held.get_mut(&k) {
                    *last = t;
                }
            }
        }
    }
    for (k, c) in inst.contents.iter().enumerate() {
        let hk = inst.costs.copy[&c.id];
        for j in 0..n_srv {
            for l in 0..n_srv {
                for t in 0..h {
                    out.replication += hk * w[k][j][l][t] as f64;
                    out.copies += w[k][j][l][t] as usize;
                }
            }
        }
    }
    out
}

pub fn cloud_pool(inst: &Instance) -> usize {
    inst.servers.iter().filter(|s| s.pool == Pool::Cloud).count()
}
