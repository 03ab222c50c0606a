use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Server identifier. Lower ids win ties.
    ServerId
);
id_type!(ContentId);
id_type!(RequestId);

/// Which part of the fleet a server belongs to.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    /// Always-on web application servers.
    Origin,
    /// On-demand servers, hired on first use.
    Cloud,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub id: ServerId,
    pub pool: Pool,
    pub storage_mb: f64,
    /// Serving capacity in megabytes per period.
    pub bandwidth_mb: f64,
    /// Currency per active period. Reporting only.
    #[serde(default)]
    pub price_per_period: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Content {
    pub id: ContentId,
    pub size_mb: f64,
    #[serde(default)]
    pub start_period: usize,
    pub origin_server: ServerId,
    /// Further origin-pool servers that hold a pinned copy from `start_period` on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mirrors: Vec<ServerId>,
}

impl Content {
    /// Origin server followed by mirrors.
    pub fn pinned_holders(&self) -> impl Iterator<Item = ServerId> + '_ {
        std::iter::once(self.origin_server).chain(self.mirrors.iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub content_id: ContentId,
    pub arrival_period: usize,
}

/// Explicit backlog penalty for one (request, period) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacklogOverride {
    pub request: RequestId,
    pub period: usize,
    pub penalty: f64,
}

pub const DEFAULT_CLIENT_BANDWIDTH: f64 = 60.0;
pub const DEFAULT_REPLICATION_BANDWIDTH: f64 = 600.0;
pub const DEFAULT_BACKLOG_RHO: f64 = 2.0;

fn default_client_bw() -> f64 {
    DEFAULT_CLIENT_BANDWIDTH
}
fn default_replication_bw() -> f64 {
    DEFAULT_REPLICATION_BANDWIDTH
}
fn default_rho() -> f64 {
    DEFAULT_BACKLOG_RHO
}

/// Time-cost parameters.
///
/// Missing `attend` / `copy` entries are derived from content sizes by
/// [`Instance::fill_default_costs`]: `c_i = size / client_bandwidth`,
/// `h_k = size / replication_bandwidth`. Backlog penalties follow
/// `p_it = rho * c_i` unless overridden.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    #[serde(default)]
    pub attend: BTreeMap<RequestId, f64>,
    #[serde(default)]
    pub copy: BTreeMap<ContentId, f64>,
    #[serde(default = "default_rho")]
    pub backlog_rho: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub backlog_overrides: Vec<BacklogOverride>,
    #[serde(default = "default_client_bw")]
    pub client_bandwidth_mb_per_period: f64,
    #[serde(default = "default_replication_bw")]
    pub replication_bandwidth_mb_per_period: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            attend: BTreeMap::new(),
            copy: BTreeMap::new(),
            backlog_rho: DEFAULT_BACKLOG_RHO,
            backlog_overrides: Vec::new(),
            client_bandwidth_mb_per_period: DEFAULT_CLIENT_BANDWIDTH,
            replication_bandwidth_mb_per_period: DEFAULT_REPLICATION_BANDWIDTH,
        }
    }
}

impl CostParams {
    /// Penalty for request `request` waiting through `period`.
    pub fn backlog_penalty(&self, request: RequestId, period: usize) -> Option<f64> {
        if let Some(o) = self
            .backlog_overrides
            .iter()
            .find(|o| o.request == request && o.period == period)
        {
            return Some(o.penalty);
        }
        self.attend.get(&request).map(|c| self.backlog_rho * c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub servers: Vec<ServerSpec>,
    pub contents: Vec<Content>,
    pub requests: Vec<Request>,
    pub horizon: usize,
    #[serde(default = "default_period_seconds")]
    pub period_seconds: f64,
    #[serde(default)]
    pub costs: CostParams,
}

fn default_period_seconds() -> f64 {
    3600.0
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let mut instance: Instance = serde_json::from_str(text)?;
        instance.fill_default_costs();
        instance.validate()?;
        Ok(instance)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn server(&self, id: ServerId) -> Option<&ServerSpec> {
        self.servers.iter().find(|s| s.id == id)
    }

    pub fn content(&self, id: ContentId) -> Option<&Content> {
        self.contents.iter().find(|c| c.id == id)
    }

    pub fn request(&self, id: RequestId) -> Option<&Request> {
        self.requests.iter().find(|r| r.id == id)
    }

    /// Derive any missing attend/copy costs from content sizes.
    pub fn fill_default_costs(&mut self) {
        let sizes: BTreeMap<ContentId, f64> =
            self.contents.iter().map(|c| (c.id, c.size_mb)).collect();
        let client_bw = self.costs.client_bandwidth_mb_per_period;
        let repl_bw = self.costs.replication_bandwidth_mb_per_period;
        for r in &self.requests {
            if let Some(size) = sizes.get(&r.content_id) {
                self.costs.attend.entry(r.id).or_insert(size / client_bw);
            }
        }
        for (id, size) in &sizes {
            self.costs.copy.entry(*id).or_insert(size / repl_bw);
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidInstance(msg));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.period_seconds > 0.0) {
            return bad("period_seconds must be positive".into());
        }
        let mut server_ids = HashSet::new();
        for s in &self.servers {
            if !server_ids.insert(s.id) {
                return bad(format!("duplicate server id {}", s.id));
            }
            if !(s.storage_mb > 0.0) || !(s.bandwidth_mb > 0.0) || !(s.price_per_period >= 0.0) {
                return bad(format!("server {} has non-positive capacity or negative price", s.id));
            }
        }
        if !self.servers.iter().any(|s| s.pool == Pool::Origin) {
            return bad("at least one origin server is required".into());
        }
        let mut pinned_load: BTreeMap<ServerId, f64> = BTreeMap::new();
        let mut content_ids = HashSet::new();
        for c in &self.contents {
            if !content_ids.insert(c.id) {
                return bad(format!("duplicate content id {}", c.id));
            }
            if !(c.size_mb > 0.0) {
                return bad(format!("content {} has non-positive size", c.id));
            }
            if c.start_period >= self.horizon {
                return bad(format!("content {} starts after the horizon", c.id));
            }
            let mut seen = BTreeSet::new();
            for holder in c.pinned_holders() {
                match self.server(holder) {
                    None => return Err(ModelError::BrokenReference(format!(
                        "content {} references server {holder}",
                        c.id
                    ))),
                    Some(s) if s.pool != Pool::Origin => {
                        return bad(format!("content {} is pinned on cloud server {holder}", c.id))
                    }
                    Some(_) => {}
                }
                if !seen.insert(holder) {
                    return bad(format!("content {} pinned twice on server {holder}", c.id));
                }
                *pinned_load.entry(holder).or_default() += c.size_mb;
            }
        }
        for (sid, load) in pinned_load {
            let cap = self.server(sid).map(|s| s.storage_mb).unwrap_or(0.0);
            if load > cap + 1e-9 {
                return bad(format!(
                    "server {sid} cannot store its pinned contents ({load} > {cap} MB)"
                ));
            }
        }
        let mut request_ids = HashSet::new();
        for r in &self.requests {
            if !request_ids.insert(r.id) {
                return bad(format!("duplicate request id {}", r.id));
            }
            let Some(c) = self.content(r.content_id) else {
                return Err(ModelError::BrokenReference(format!(
                    "request {} references content {}",
                    r.id, r.content_id
                )));
            };
            if r.arrival_period < c.start_period || r.arrival_period >= self.horizon {
                return bad(format!("request {} arrives outside its content's lifetime", r.id));
            }
            match self.costs.attend.get(&r.id) {
                Some(v) if *v >= 0.0 => {}
                Some(_) => return bad(format!("negative attend cost for request {}", r.id)),
                None => return bad(format!("missing attend cost for request {}", r.id)),
            }
        }
        for c in &self.contents {
            match self.costs.copy.get(&c.id) {
                Some(v) if *v >= 0.0 => {}
                _ => return bad(format!("missing or negative copy cost for content {}", c.id)),
            }
        }
        if !(self.costs.backlog_rho >= 0.0)
            || self.costs.backlog_overrides.iter().any(|o| !(o.penalty >= 0.0))
        {
            return bad("backlog penalties must be non-negative".into());
        }
        Ok(())
    }
}

/// One 4-tuple: `content` is replicated on `server` to serve `requests` in `period`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub content_id: ContentId,
    pub server_id: ServerId,
    pub request_ids: Vec<RequestId>,
    pub period: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Solution {
    pub assignments: Vec<Assignment>,
}

impl Solution {
    pub fn new(assignments: Vec<Assignment>) -> Self {
        Self { assignments }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn request_count(&self) -> usize {
        self.assignments.iter().map(|a| a.request_ids.len()).sum()
    }

    /// Sorted by (period, server, content, first request). Cost-neutral.
    pub fn canonicalize(&mut self) {
        for a in &mut self.assignments {
            a.request_ids.sort_unstable();
        }
        self.assignments.sort_by(|a, b| {
            (a.period, a.server_id, a.content_id, a.request_ids.first()).cmp(&(
                b.period,
                b.server_id,
                b.content_id,
                b.request_ids.first(),
            ))
        });
    }
}

/// A copy of `content` from `source` to `destination` in `period`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyEvent {
    pub content: ContentId,
    pub source: ServerId,
    pub destination: ServerId,
    pub period: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Eviction {
    pub content: ContentId,
    pub server: ServerId,
    pub period: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicaTimeline {
    /// `holdings[t][server]` = contents resident on `server` during period `t`.
    pub holdings: Vec<BTreeMap<ServerId, BTreeSet<ContentId>>>,
    pub copy_events: Vec<CopyEvent>,
    pub evictions: Vec<Eviction>,
    /// Active periods per cloud server; servers never used are absent.
    pub hire_activity: BTreeMap<ServerId, BTreeSet<usize>>,
}

impl ReplicaTimeline {
    pub fn holds(&self, period: usize, server: ServerId, content: ContentId) -> bool {
        self.holdings
            .get(period)
            .and_then(|m| m.get(&server))
            .is_some_and(|set| set.contains(&content))
    }

    pub fn replica_count(&self, period: usize, content: ContentId) -> usize {
        self.holdings
            .get(period)
            .map(|m| m.values().filter(|set| set.contains(&content)).count())
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub attend: f64,
    pub backlog: f64,
    pub replication: f64,
    pub total: f64,
    pub servers_od: usize,
    pub financial: f64,
}
