//! Small random instances for cross-checking the solvers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Content, ContentId, CostParams, Instance, Pool, Request, RequestId, ServerId, ServerSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub max_servers: usize,
    pub max_requests: usize,
    pub max_periods: usize,
    pub max_contents: usize,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self { max_servers: 3, max_requests: 8, max_periods: 3, max_contents: 2 }
    }
}

const SIZES: [f64; 3] = [300.0, 600.0, 900.0];

fn draw<R: Rng + ?Sized>(spec: &RandomSpec, rng: &mut R) -> Instance {
    let n_contents = rng.random_range(1..=spec.max_contents);
    let n_servers = rng.random_range(1..=spec.max_servers);
    let horizon = rng.random_range(1..=spec.max_periods);
    let n_requests = rng.random_range((spec.max_requests / 2).max(1)..=spec.max_requests);

    let contents: Vec<Content> = (0..n_contents as u32)
        .map(|k| Content {
            id: ContentId(k),
            size_mb: SIZES[rng.random_range(0..SIZES.len())],
            start_period: 0,
            origin_server: ServerId(0),
            mirrors: vec![],
        })
        .collect();
    let total: f64 = contents.iter().map(|c| c.size_mb).sum();
    let largest = contents.iter().map(|c| c.size_mb).fold(0.0, f64::max);

    let servers = (0..n_servers as u32)
        .map(|j| {
            let origin = j == 0;
            let storage = if origin || rng.random_bool(0.7) { total + 300.0 } else { largest };
            let bandwidth = if origin { rng.random_range(1..=3) } else { rng.random_range(2..=5) };
            ServerSpec {
                id: ServerId(j),
                pool: if origin { Pool::Origin } else { Pool::Cloud },
                storage_mb: storage,
                bandwidth_mb: largest * bandwidth as f64,
                price_per_period: if origin { 2.0 } else { 1.0 },
            }
        })
        .collect();

    let requests: Vec<Request> = (0..n_requests as u32)
        .map(|i| Request {
            id: RequestId(i),
            content_id: ContentId(rng.random_range(0..n_contents as u32)),
            arrival_period: if rng.random_bool(0.5) { 0 } else { rng.random_range(0..horizon) },
        })
        .collect();

    let mut costs = CostParams::default();
    for c in &contents {
        costs.copy.insert(c.id, rng.random_range(1..=20) as f64);
    }
    for r in &requests {
        costs.attend.insert(r.id, rng.random_range(1..=10) as f64);
    }
    Instance { servers, contents, requests, horizon, period_seconds: 3600.0, costs }
}

/// Greedy construction places a request in the last period whenever some
/// server that can store every content has bandwidth left for it; this holds
/// if the total load fits in those servers with one largest item to spare.
fn construction_always_succeeds(instance: &Instance) -> bool {
    let size = |k: ContentId| instance.content(k).map_or(0.0, |c| c.size_mb);
    let total: f64 = instance.contents.iter().map(|c| c.size_mb).sum();
    let largest = instance.contents.iter().map(|c| c.size_mb).fold(0.0, f64::max);
    let load: f64 = instance.requests.iter().map(|r| size(r.content_id)).sum();
    let room: f64 = instance
        .servers
        .iter()
        .filter(|s| s.storage_mb >= total)
        .map(|s| s.bandwidth_mb - largest)
        .sum();
    load <= room
}

/// A random instance within `spec` on which greedy construction succeeds
/// for every visiting order. Server 0 is the only origin and holds every
/// content.
pub fn random_instance<R: Rng + ?Sized>(spec: &RandomSpec, rng: &mut R) -> Instance {
    loop {
        let instance = draw(spec, rng);
        if construction_always_succeeds(&instance) {
            return instance;
        }
    }
}
