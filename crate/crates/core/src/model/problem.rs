//! Dense, index-based view of a validated [`Instance`].
//!
//! Servers, contents and requests are renumbered `0..n` in ascending id
//! order, so comparing dense indices is the same as comparing ids.

use std::collections::HashMap;

use super::types::{Assignment, ContentId, Instance, Pool, RequestId, ServerId, Solution};
use super::ModelError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Tuple {
    pub content: usize,
    pub server: usize,
    pub period: usize,
    /// Dense request indices, kept sorted.
    pub requests: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub(crate) horizon: usize,
    pub(crate) server_ids: Vec<ServerId>,
    pub(crate) pool: Vec<Pool>,
    pub(crate) storage: Vec<f64>,
    pub(crate) bandwidth: Vec<f64>,
    pub(crate) price: Vec<f64>,
    /// Storage taken by pinned contents on each server.
    pub(crate) reserved: Vec<f64>,
    pinned: Vec<bool>,

    pub(crate) content_ids: Vec<ContentId>,
    pub(crate) size: Vec<f64>,
    pub(crate) copy_cost: Vec<f64>,
    pub(crate) start: Vec<usize>,
    pub(crate) origin: Vec<usize>,

    pub(crate) request_ids: Vec<RequestId>,
    pub(crate) req_content: Vec<usize>,
    pub(crate) arrival: Vec<usize>,
    pub(crate) attend: Vec<f64>,
    /// `wait[i][w]`: penalty for serving request `i` `w` periods after arrival.
    wait: Vec<Vec<f64>>,

    server_pos: HashMap<ServerId, usize>,
    content_pos: HashMap<ContentId, usize>,
    request_pos: HashMap<RequestId, usize>,
}

impl Problem {
    pub fn new(instance: &Instance) -> Result<Self, ModelError> {
        instance.validate()?;

        let mut servers: Vec<_> = instance.servers.iter().collect();
        servers.sort_by_key(|s| s.id);
        let mut contents: Vec<_> = instance.contents.iter().collect();
        contents.sort_by_key(|c| c.id);
        let mut requests: Vec<_> = instance.requests.iter().collect();
        requests.sort_by_key(|r| r.id);

        let server_pos: HashMap<_, _> = servers.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
        let content_pos: HashMap<_, _> =
            contents.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
        let request_pos: HashMap<_, _> =
            requests.iter().enumerate().map(|(i, r)| (r.id, i)).collect();

        let n_servers = servers.len();
        let n_contents = contents.len();
        let mut pinned = vec![false; n_servers * n_contents];
        let mut reserved = vec![0.0; n_servers];
        for (k, c) in contents.iter().enumerate() {
            for holder in c.pinned_holders() {
                let j = server_pos[&holder];
                pinned[j * n_contents + k] = true;
                reserved[j] += c.size_mb;
            }
        }

        let horizon = instance.horizon;
        let costs = &instance.costs;
        let wait = requests
            .iter()
            .map(|r| {
                let mut acc = 0.0;
                let mut prefix = Vec::with_capacity(horizon - r.arrival_period + 1);
                prefix.push(0.0);
                for t in r.arrival_period..horizon {
                    acc += costs.backlog_penalty(r.id, t).unwrap_or(0.0);
                    prefix.push(acc);
                }
                prefix
            })
            .collect();

        Ok(Self {
            horizon,
            server_ids: servers.iter().map(|s| s.id).collect(),
            pool: servers.iter().map(|s| s.pool).collect(),
            storage: servers.iter().map(|s| s.storage_mb).collect(),
            bandwidth: servers.iter().map(|s| s.bandwidth_mb).collect(),
            price: servers.iter().map(|s| s.price_per_period).collect(),
            reserved,
            pinned,
            content_ids: contents.iter().map(|c| c.id).collect(),
            size: contents.iter().map(|c| c.size_mb).collect(),
            copy_cost: contents.iter().map(|c| costs.copy[&c.id]).collect(),
            start: contents.iter().map(|c| c.start_period).collect(),
            origin: contents.iter().map(|c| server_pos[&c.origin_server]).collect(),
            request_ids: requests.iter().map(|r| r.id).collect(),
            req_content: requests.iter().map(|r| content_pos[&r.content_id]).collect(),
            arrival: requests.iter().map(|r| r.arrival_period).collect(),
            attend: requests.iter().map(|r| costs.attend[&r.id]).collect(),
            wait,
            server_pos,
            content_pos,
            request_pos,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn n_servers(&self) -> usize {
        self.server_ids.len()
    }
    pub fn n_contents(&self) -> usize {
        self.content_ids.len()
    }
    pub fn n_requests(&self) -> usize {
        self.request_ids.len()
    }

    pub(crate) fn is_pinned(&self, server: usize, content: usize) -> bool {
        self.pinned[server * self.content_ids.len() + content]
    }

    pub(crate) fn is_cloud(&self, server: usize) -> bool {
        self.pool[server] == Pool::Cloud
    }

    /// Penalty accrued by request `i` when served in `period`.
    pub(crate) fn wait_cost(&self, i: usize, period: usize) -> f64 {
        let w = period.saturating_sub(self.arrival[i]);
        let prefix = &self.wait[i];
        prefix[w.min(prefix.len() - 1)]
    }

    /// Earliest period a tuple of `content` serving `requests` may be placed in.
    pub(crate) fn earliest_period(&self, content: usize, requests: &[usize]) -> usize {
        requests
            .iter()
            .map(|&i| self.arrival[i])
            .max()
            .unwrap_or(0)
            .max(self.start[content])
    }

    pub(crate) fn server_index(&self, id: ServerId) -> Option<usize> {
        self.server_pos.get(&id).copied()
    }
    pub(crate) fn content_index(&self, id: ContentId) -> Option<usize> {
        self.content_pos.get(&id).copied()
    }
    pub(crate) fn request_index(&self, id: RequestId) -> Option<usize> {
        self.request_pos.get(&id).copied()
    }

    pub(crate) fn tuple(&self, a: &Assignment) -> Result<Tuple, ModelError> {
        let broken = |what: String| ModelError::BrokenReference(what);
        let content = self
            .content_index(a.content_id)
            .ok_or_else(|| broken(format!("content {}", a.content_id)))?;
        let server = self
            .server_index(a.server_id)
            .ok_or_else(|| broken(format!("server {}", a.server_id)))?;
        let mut requests = a
            .request_ids
            .iter()
            .map(|r| self.request_index(*r).ok_or_else(|| broken(format!("request {r}"))))
            .collect::<Result<Vec<_>, _>>()?;
        requests.sort_unstable();
        Ok(Tuple { content, server, period: a.period, requests })
    }

    pub(crate) fn tuples(&self, solution: &Solution) -> Result<Vec<Tuple>, ModelError> {
        solution.assignments.iter().map(|a| self.tuple(a)).collect()
    }

    pub(crate) fn assignment(&self, t: &Tuple) -> Assignment {
        Assignment {
            content_id: self.content_ids[t.content],
            server_id: self.server_ids[t.server],
            request_ids: t.requests.iter().map(|&i| self.request_ids[i]).collect(),
            period: t.period,
        }
    }

    pub(crate) fn solution(&self, tuples: &[Tuple]) -> Solution {
        Solution::new(tuples.iter().map(|t| self.assignment(t)).collect())
    }

    /// Attendance plus backlog of one tuple.
    pub(crate) fn tuple_service_cost(&self, t: &Tuple) -> f64 {
        t.requests
            .iter()
            .map(|&i| self.attend[i] + self.wait_cost(i, t.period))
            .sum()
    }

    pub(crate) fn tuple_load(&self, t: &Tuple) -> f64 {
        t.requests.len() as f64 * self.size[t.content]
    }
}
