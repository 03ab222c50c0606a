use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::beta::{beta_sample, BetaShape};
use super::plan::{accesses_at, scale_sample, PhasePlan};
use super::TraceError;
use crate::model::{Content, ContentId, CostParams, Instance, Request, RequestId, ServerSpec};
use crate::rng::substream;

fn default_step_seconds() -> f64 {
    1.0
}

/// Steady traffic for a content outside any flash crowd.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundPlan {
    pub content_id: ContentId,
    pub shape: BetaShape,
    pub scale_u: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub plans: Vec<PhasePlan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub background: Vec<BackgroundPlan>,
    pub horizon_units: usize,
    #[serde(default)]
    pub seed: u64,
    /// Wall-clock length of one time step.
    #[serde(default = "default_step_seconds")]
    pub step_seconds: f64,
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        if !(self.step_seconds > 0.0) {
            return Err(TraceError::InvalidPlan("step_seconds must be positive".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let ids = self.plans.iter().map(|p| p.content_id).chain(self.background.iter().map(|b| b.content_id));
        for id in ids {
            if !seen.insert(id) {
                return Err(TraceError::InvalidPlan(format!("content {id} has more than one plan")));
            }
        }
        for b in &self.background {
            b.shape.validate()?;
            if b.scale_u == 0 {
                return Err(TraceError::InvalidPlan(format!("content {}: scale_u must be positive", b.content_id)));
            }
        }
        for p in &self.plans {
            p.validate()?;
            if p.end() >= self.horizon_units {
                return Err(TraceError::InvalidPlan(format!(
                    "content {}: flash crowd runs past the horizon",
                    p.content_id
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TraceError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time_step: usize,
    pub content_id: ContentId,
    pub access_count: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn total_accesses(&self) -> u64 {
        self.rows.iter().map(|r| r.access_count as u64).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TraceError> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, TraceError> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<Result<Vec<TraceRow>, _>>()?;
        Ok(Self { rows })
    }
}

/// Sample every plan at every time step.
///
/// Each plan draws from its own stream keyed by content id, so adding or
/// removing a content leaves the other contents' samples untouched.
pub fn generate_trace(config: &TraceConfig) -> Result<Trace, TraceError> {
    config.validate()?;
    let per_plan: Vec<Vec<TraceRow>> = config
        .plans
        .par_iter()
        .map(|plan| {
            let mut rng = substream(config.seed, plan.content_id.0 as u64);
            (0..config.horizon_units)
                .map(|t| TraceRow {
                    time_step: t,
                    content_id: plan.content_id,
                    access_count: accesses_at(plan, t, &mut rng),
                })
                .collect()
        })
        .collect();
    let steady: Vec<Vec<TraceRow>> = config
        .background
        .par_iter()
        .map(|b| {
            let mut rng = substream(config.seed, b.content_id.0 as u64);
            (0..config.horizon_units)
                .map(|t| TraceRow {
                    time_step: t,
                    content_id: b.content_id,
                    access_count: scale_sample(beta_sample(b.shape, &mut rng), b.scale_u),
                })
                .collect()
        })
        .collect();
    let mut rows: Vec<TraceRow> = per_plan.into_iter().chain(steady).flatten().collect();
    rows.sort_by_key(|r| (r.time_step, r.content_id));
    Ok(Trace { rows })
}

/// Everything of an [`Instance`] except its requests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSkeleton {
    pub servers: Vec<ServerSpec>,
    pub contents: Vec<Content>,
    pub horizon: usize,
    pub period_seconds: f64,
    #[serde(default)]
    pub costs: CostParams,
}

impl InstanceSkeleton {
    pub fn with_requests(&self, requests: Vec<Request>) -> Result<Instance, TraceError> {
        let mut instance = Instance {
            servers: self.servers.clone(),
            contents: self.contents.clone(),
            requests,
            horizon: self.horizon,
            period_seconds: self.period_seconds,
            costs: self.costs.clone(),
        };
        instance.fill_default_costs();
        instance.validate()?;
        Ok(instance)
    }
}

/// Expand trace rows into individual requests, one per access.
pub fn trace_to_requests(
    trace: &Trace,
    skeleton: &InstanceSkeleton,
    step_seconds: f64,
) -> Result<Vec<Request>, TraceError> {
    let mut requests = Vec::with_capacity(trace.total_accesses() as usize);
    for row in &trace.rows {
        let Some(content) = skeleton.contents.iter().find(|c| c.id == row.content_id) else {
            return Err(TraceError::UnknownContent(row.content_id));
        };
        let arrival = (row.time_step as f64 * step_seconds / skeleton.period_seconds).floor() as usize;
        if arrival >= skeleton.horizon || arrival < content.start_period {
            return Err(TraceError::OutsideHorizon { time_step: row.time_step, period: arrival });
        }
        for _ in 0..row.access_count {
            requests.push(Request {
                id: RequestId(requests.len() as u32),
                content_id: row.content_id,
                arrival_period: arrival,
            });
        }
    }
    Ok(requests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Pool, ServerId};
    use crate::tracegen::plan::{mean_accesses, Ramp, Sustained};
    use crate::tracegen::BetaShape;

    fn plan(content: u32) -> PhasePlan {
        PhasePlan {
            content_id: ContentId(content),
            base: BetaShape { alpha: 2.0, beta: 20.0 },
            ramp_up: Ramp { t0: 10, t1: 20, gamma: 0.3 },
            sustained: Sustained { t_start: 20, t_end: 30 },
            ramp_down: Ramp { t0: 30, t1: 45, gamma: 0.2 },
            scale_u: 20,
        }
    }

    fn skeleton(horizon: usize, period_seconds: f64, n_contents: u32) -> InstanceSkeleton {
        InstanceSkeleton {
            servers: vec![ServerSpec {
                id: ServerId(0),
                pool: Pool::Origin,
                storage_mb: 1e6,
                bandwidth_mb: 1e6,
                price_per_period: 1.0,
            }],
            contents: (0..n_contents)
                .map(|k| Content {
                    id: ContentId(k),
                    size_mb: 100.0,
                    start_period: 0,
                    origin_server: ServerId(0),
                    mirrors: vec![],
                })
                .collect(),
            horizon,
            period_seconds,
            costs: CostParams::default(),
        }
    }

    #[test]
    fn one_row_per_step() {
        let mut p = plan(0);
        p.ramp_up = Ramp { t0: 0, t1: 1, gamma: 1.0 };
        p.sustained = Sustained { t_start: 1, t_end: 2 };
        p.ramp_down = Ramp { t0: 2, t1: 3, gamma: 1.0 };
        let trace = generate_trace(&TraceConfig { plans: vec![p], background: vec![], horizon_units: 5, seed: 1, step_seconds: 1.0 })
            .unwrap();
        assert_eq!(trace.rows.len(), 5);
        assert!(trace.rows.windows(2).all(|w| w[0].time_step < w[1].time_step));
    }

    #[test]
    fn plans_use_independent_streams() {
        let a = plan(0);
        let mut b = plan(1);
        b.scale_u = a.scale_u;
        let cfg = TraceConfig { plans: vec![a.clone(), b.clone()], background: vec![], horizon_units: 60, seed: 9, step_seconds: 1.0 };
        let trace = generate_trace(&cfg).unwrap();
        let series = |c: u32| -> Vec<u32> {
            trace.rows.iter().filter(|r| r.content_id.0 == c).map(|r| r.access_count).collect()
        };
        assert_ne!(series(0), series(1));
        for t in 0..60 {
            assert_eq!(mean_accesses(&a, t), mean_accesses(&b, t));
        }
        // dropping a plan leaves the other untouched
        let alone = generate_trace(&TraceConfig { plans: vec![b], ..cfg.clone() }).unwrap();
        assert_eq!(alone.rows.iter().map(|r| r.access_count).collect::<Vec<_>>(), series(1));
    }

    #[test]
    fn counts_bounded_and_reproducible() {
        let cfg = TraceConfig { plans: vec![plan(0), plan(1)], background: vec![], horizon_units: 50, seed: 3, step_seconds: 1.0 };
        let a = generate_trace(&cfg).unwrap();
        assert!(a.rows.iter().all(|r| r.access_count <= 20));
        assert_eq!(a, generate_trace(&cfg).unwrap());
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("time_step,content_id,access_count\n"));
        assert_eq!(Trace::read_csv(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn plans_past_horizon_rejected() {
        let cfg = TraceConfig { plans: vec![plan(0)], background: vec![], horizon_units: 40, seed: 3, step_seconds: 1.0 };
        assert!(generate_trace(&cfg).is_err());
    }

    #[test]
    fn rows_expand_into_requests() {
        let trace = Trace { rows: vec![TraceRow { time_step: 0, content_id: ContentId(0), access_count: 3 }] };
        let reqs = trace_to_requests(&trace, &skeleton(1, 60.0, 1), 1.0).unwrap();
        assert_eq!(reqs.len(), 3);
        assert!(reqs.iter().all(|r| r.arrival_period == 0 && r.content_id == ContentId(0)));
        assert_eq!(reqs.iter().map(|r| r.id.0).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(trace_to_requests(&Trace::default(), &skeleton(1, 60.0, 1), 1.0).unwrap().is_empty());
    }

    #[test]
    fn minute_periods_aggregate_seconds() {
        // 105 accesses spread over an hour of 1 s steps, three contents
        let mut rows = Vec::new();
        for i in 0..105u32 {
            rows.push(TraceRow { time_step: (i as usize * 34) % 3600, content_id: ContentId(i % 3), access_count: 1 });
        }
        rows.sort_by_key(|r| (r.time_step, r.content_id));
        let skel = skeleton(60, 60.0, 3);
        let reqs = trace_to_requests(&Trace { rows }, &skel, 1.0).unwrap();
        let inst = skel.with_requests(reqs).unwrap();
        assert_eq!((inst.contents.len(), inst.requests.len(), inst.horizon), (3, 105, 60));
        assert!(inst.requests.iter().all(|r| r.arrival_period < 60));
    }

    #[test]
    fn unknown_content_or_late_rows_fail() {
        let late = Trace { rows: vec![TraceRow { time_step: 3600, content_id: ContentId(0), access_count: 1 }] };
        assert!(trace_to_requests(&late, &skeleton(60, 60.0, 1), 1.0).is_err());
        let unknown = Trace { rows: vec![TraceRow { time_step: 0, content_id: ContentId(5), access_count: 1 }] };
        assert!(matches!(
            trace_to_requests(&unknown, &skeleton(60, 60.0, 1), 1.0),
            Err(TraceError::UnknownContent(_))
        ));
    }
}
