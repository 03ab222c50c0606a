use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::log::PeriodCounts;
use super::BenchError;
use crate::model::{Content, ContentId, CostParams, Instance, Pool, Request, RequestId, ServerSpec};

/// Servers and content sizes that instances are built against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub servers: Vec<ServerSpec>,
    #[serde(default)]
    pub content_sizes: BTreeMap<ContentId, f64>,
    /// Size for contents missing from `content_sizes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_size_mb: Option<f64>,
    /// Minimum horizon; the counts may end earlier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    fn size(&self, id: ContentId) -> Result<f64, BenchError> {
        self.content_sizes.get(&id).copied().or(self.default_size_mb).ok_or(BenchError::MissingSize(id))
    }
}

/// One request per counted access. Every origin server holds every content;
/// the lowest-id origin is the copy source.
pub fn build_instance(
    counts: &PeriodCounts,
    catalog: &Catalog,
    costs: Option<CostParams>,
) -> Result<Instance, BenchError> {
    if counts.total() == 0 {
        return Err(BenchError::EmptyInstance);
    }
    let mut origins: Vec<_> = catalog.servers.iter().filter(|s| s.pool == Pool::Origin).map(|s| s.id).collect();
    origins.sort();
    let Some((&origin, mirrors)) = origins.split_first() else {
        return Err(BenchError::InvalidArgument("catalog has no origin server".into()));
    };

    let mut first_seen: BTreeMap<ContentId, usize> = BTreeMap::new();
    let mut cells = counts.cells.clone();
    cells.sort_by_key(|c| (c.period, c.content_id));
    let mut requests = Vec::with_capacity(counts.total() as usize);
    for cell in cells.iter().filter(|c| c.count > 0) {
        first_seen.entry(cell.content_id).or_insert(cell.period);
        for _ in 0..cell.count {
            let id = RequestId(requests.len() as u32);
            requests.push(Request { id, content_id: cell.content_id, arrival_period: cell.period });
        }
    }
    let contents = first_seen
        .iter()
        .map(|(&id, &start)| {
            Ok(Content {
                id,
                size_mb: catalog.size(id)?,
                start_period: start,
                origin_server: origin,
                mirrors: mirrors.to_vec(),
            })
        })
        .collect::<Result<Vec<_>, BenchError>>()?;
    let last = cells.iter().map(|c| c.period).max().unwrap_or(0);
    let mut instance = Instance {
        servers: catalog.servers.clone(),
        contents,
        requests,
        horizon: (last + 1).max(catalog.horizon.unwrap_or(0)),
        period_seconds: counts.period_seconds,
        costs: costs.unwrap_or_default(),
    };
    instance.fill_default_costs();
    instance.validate()?;
    Ok(instance)
}
