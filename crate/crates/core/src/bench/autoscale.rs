use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::model::{
    evaluate, Assignment, ContentId, CostBreakdown, Instance, Pool, RequestId, ServerId, ServerSpec, Solution,
};

/// Threshold scaling over clones of a machine image that carries every content.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoscalePolicy {
    pub up_threshold: f64,
    pub down_threshold: f64,
    pub cooldown_periods: usize,
    /// Template for hired machines; its id is replaced on every hire.
    pub machine_type: ServerSpec,
}

impl AutoscalePolicy {
    pub fn new(machine_type: ServerSpec) -> Self {
        Self { up_threshold: 0.8, down_threshold: 0.3, cooldown_periods: 1, machine_type }
    }

    /// Clones of the instance's lowest-id origin server.
    pub fn for_instance(instance: &Instance) -> Result<Self, BenchError> {
        let template = instance
            .servers
            .iter()
            .filter(|s| s.pool == Pool::Origin)
            .min_by_key(|s| s.id)
            .ok_or_else(|| BenchError::InvalidArgument("instance has no origin server".into()))?;
        Ok(Self::new(template.clone()))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let ok = 0.0 < self.down_threshold && self.down_threshold < self.up_threshold && self.up_threshold <= 1.0;
        if !ok {
            return Err(BenchError::InvalidArgument(format!(
                "thresholds must satisfy 0 < down < up <= 1, got down={} up={}",
                self.down_threshold, self.up_threshold
            )));
        }
        if !(self.machine_type.bandwidth_mb > 0.0) {
            return Err(BenchError::InvalidArgument("machine bandwidth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hire {
    pub server: ServerId,
    pub hired: usize,
    /// First period the machine is no longer active.
    pub released: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoscaleRun {
    /// The input instance with every hired machine appended as a cloud server.
    pub instance: Instance,
    pub solution: Solution,
    pub breakdown: CostBreakdown,
    pub hires: Vec<Hire>,
    /// Hired machines active per period.
    pub active: Vec<usize>,
    /// Served megabytes over active bandwidth, per period.
    pub utilization: Vec<f64>,
}

/// Replay the instance under a threshold autoscaler with round-robin load
/// balancing. Each period first applies the scaling decision driven by the
/// previous period's utilization, then dispatches pending requests in
/// arrival order; requests that find no bandwidth wait for the next period.
/// Requests still waiting in the last period get extra clones, hired
/// regardless of thresholds and cooldown.
pub fn autoscale_simulate(instance: &Instance, policy: &AutoscalePolicy) -> Result<AutoscaleRun, BenchError> {
    policy.validate()?;
    instance.validate()?;
    let image: f64 = instance.contents.iter().map(|c| c.size_mb).sum();
    if policy.machine_type.storage_mb < image {
        return Err(BenchError::ImageTooSmall { needed_mb: image, available_mb: policy.machine_type.storage_mb });
    }
    let horizon = instance.horizon;
    let size: BTreeMap<_, _> = instance.contents.iter().map(|c| (c.id, c.size_mb)).collect();
    let holders: BTreeMap<_, Vec<ServerId>> =
        instance.contents.iter().map(|c| (c.id, c.pinned_holders().collect())).collect();

    let mut base: Vec<&ServerSpec> = instance.servers.iter().filter(|s| s.pool == Pool::Origin).collect();
    base.sort_by_key(|s| s.id);
    let mut next_id = instance.servers.iter().map(|s| s.id.0).max().unwrap_or(0) + 1;

    let mut requests: Vec<_> = instance.requests.iter().collect();
    requests.sort_by_key(|r| (r.arrival_period, r.id));
    let mut arrivals = requests.into_iter().peekable();

    let mut hires: Vec<Hire> = Vec::new();
    let mut live: Vec<usize> = Vec::new();
    let mut hired_specs: Vec<ServerSpec> = Vec::new();
    let mut last_action: Option<usize> = None;
    let mut queue: VecDeque<(RequestId, ContentId)> = VecDeque::new();
    let mut served: BTreeMap<(ContentId, ServerId, usize), Vec<RequestId>> = BTreeMap::new();
    let mut cursor = 0usize;
    let mut active = Vec::with_capacity(horizon);
    let mut utilization = Vec::with_capacity(horizon);

    for t in 0..horizon {
        let ready = last_action.is_none_or(|a| t >= a + policy.cooldown_periods);
        if t > 0 && ready {
            let previous = utilization[t - 1];
            if previous > policy.up_threshold {
                let spec = ServerSpec { id: ServerId(next_id), pool: Pool::Cloud, ..policy.machine_type.clone() };
                next_id += 1;
                live.push(hires.len());
                hires.push(Hire { server: spec.id, hired: t, released: None });
                hired_specs.push(spec);
                last_action = Some(t);
            } else if previous < policy.down_threshold {
                if let Some(newest) = live.pop() {
                    hires[newest].released = Some(t);
                    last_action = Some(t);
                }
            }
        }
        while let Some(r) = arrivals.next_if(|r| r.arrival_period == t) {
            queue.push_back((r.id, r.content_id));
        }

        let mut servers: Vec<(ServerId, f64, bool)> = base
            .iter()
            .map(|s| (s.id, s.bandwidth_mb, false))
            .chain(live.iter().map(|&h| (hired_specs[h].id, hired_specs[h].bandwidth_mb, true)))
            .collect();
        let mut load = vec![0.0; servers.len()];
        let mut waiting = VecDeque::new();
        while let Some((id, content)) = queue.pop_front() {
            let need = size[&content];
            let pick = (0..servers.len()).map(|step| (cursor + step) % servers.len()).find(|&pos| {
                let (sid, bw, clone) = servers[pos];
                (clone || holders[&content].contains(&sid)) && load[pos] + need <= bw + 1e-9
            });
            match pick {
                Some(pos) => {
                    load[pos] += need;
                    served.entry((content, servers[pos].0, t)).or_default().push(id);
                    cursor = (pos + 1) % servers.len();
                }
                None => waiting.push_back((id, content)),
            }
        }
        queue = waiting;
        if t + 1 == horizon {
            while !queue.is_empty() {
                let spec = ServerSpec { id: ServerId(next_id), pool: Pool::Cloud, ..policy.machine_type.clone() };
                next_id += 1;
                let bw = spec.bandwidth_mb;
                let mut used = 0.0;
                let before = queue.len();
                queue.retain(|&(id, content)| {
                    let need = size[&content];
                    if used + need > bw + 1e-9 {
                        return true;
                    }
                    used += need;
                    served.entry((content, spec.id, t)).or_default().push(id);
                    false
                });
                if queue.len() == before {
                    break;
                }
                servers.push((spec.id, bw, true));
                load.push(used);
                live.push(hires.len());
                hires.push(Hire { server: spec.id, hired: t, released: None });
                hired_specs.push(spec);
            }
        }
        let capacity: f64 = servers.iter().map(|s| s.1).sum();
        utilization.push(load.iter().sum::<f64>() / capacity);
        active.push(live.len());
    }
    if let Some(&(id, _)) = queue.front() {
        return Err(BenchError::Unserviceable(id));
    }

    let mut augmented = instance.clone();
    augmented.servers.extend(hired_specs);
    let solution = Solution::new(
        served
            .into_iter()
            .map(|((content_id, server_id, period), request_ids)| Assignment {
                content_id,
                server_id,
                request_ids,
                period,
            })
            .collect(),
    );
    let mut breakdown = evaluate(&augmented, &solution)?;
    let image_copy: f64 = instance.costs.copy.values().sum();
    breakdown.replication = image_copy * hires.len() as f64;
    breakdown.total = breakdown.attend + breakdown.backlog + breakdown.replication;
    breakdown.servers_od = hires.len();
    let base_cost: f64 = base.iter().map(|s| s.price_per_period * horizon as f64).sum();
    let hire_cost: f64 = hires
        .iter()
        .map(|h| policy.machine_type.price_per_period * (h.released.unwrap_or(horizon) - h.hired) as f64)
        .sum();
    breakdown.financial = base_cost + hire_cost;
    Ok(AutoscaleRun { instance: augmented, solution, breakdown, hires, active, utilization })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasibility, Content, CostParams, Request};

    /// Origin with bandwidth for two 600 MB requests per period.
    fn instance(per_period: &[usize]) -> Instance {
        let mut requests = Vec::new();
        for (t, &n) in per_period.iter().enumerate() {
            for _ in 0..n {
                let id = RequestId(requests.len() as u32);
                requests.push(Request { id, content_id: ContentId(0), arrival_period: t });
            }
        }
        let mut inst = Instance {
            servers: vec![ServerSpec {
                id: ServerId(0),
                pool: Pool::Origin,
                storage_mb: 2000.0,
                bandwidth_mb: 1200.0,
                price_per_period: 2.0,
            }],
            contents: vec![
                Content { id: ContentId(0), size_mb: 600.0, start_period: 0, origin_server: ServerId(0), mirrors: vec![] },
                Content { id: ContentId(1), size_mb: 600.0, start_period: 0, origin_server: ServerId(0), mirrors: vec![] },
            ],
            requests,
            horizon: per_period.len(),
            period_seconds: 3600.0,
            costs: CostParams::default(),
        };
        inst.fill_default_costs();
        inst
    }

    #[test]
    fn flat_load_hires_nothing() {
        let inst = instance(&[1, 1, 1, 1]);
        let policy = AutoscalePolicy::for_instance(&inst).unwrap();
        let run = autoscale_simulate(&inst, &policy).unwrap();
        assert!(run.hires.is_empty());
        assert_eq!(run.breakdown.financial, 2.0 * 4.0);
        assert!(check_feasibility(&run.instance, &run.solution).is_empty());
    }

    #[test]
    fn utilization_at_threshold_does_not_hire() {
        let inst = instance(&[2, 2, 2]);
        let mut policy = AutoscalePolicy::for_instance(&inst).unwrap();
        policy.up_threshold = 1.0;
        let run = autoscale_simulate(&inst, &policy).unwrap();
        assert_eq!(run.utilization, vec![1.0, 1.0, 1.0]);
        assert!(run.hires.is_empty());
    }

    #[test]
    fn overload_hires_full_image_then_releases() {
        let inst = instance(&[4, 4, 0, 0, 0]);
        let policy = AutoscalePolicy::for_instance(&inst).unwrap();
        let run = autoscale_simulate(&inst, &policy).unwrap();
        // t0 overloads; t1 hires; t1 overloads again; t2 hires; idle periods release the newest
        let hired: Vec<usize> = run.hires.iter().map(|h| h.hired).collect();
        assert_eq!(hired, vec![1, 2]);
        assert_eq!(run.hires[1].released, Some(4));
        assert_eq!(run.hires[0].released, None);
        // full image: both contents copied on every hire though only one is requested
        assert_eq!(run.breakdown.replication, 2.0 * 2.0);
        assert_eq!(run.breakdown.total, run.breakdown.attend + run.breakdown.backlog + run.breakdown.replication);
        assert!(check_feasibility(&run.instance, &run.solution).is_empty());
        assert_eq!(run.active, vec![0, 1, 2, 2, 1]);
        assert_eq!(run.breakdown.financial, 2.0 * 5.0 + 2.0 * 6.0);
    }

    #[test]
    fn small_image_rejected() {
        let inst = instance(&[1]);
        let mut policy = AutoscalePolicy::for_instance(&inst).unwrap();
        policy.machine_type.storage_mb = 1000.0;
        assert!(matches!(autoscale_simulate(&inst, &policy), Err(BenchError::ImageTooSmall { .. })));
    }

    #[test]
    fn last_period_backlog_forces_hires() {
        let inst = instance(&[0, 5]);
        let policy = AutoscalePolicy::for_instance(&inst).unwrap();
        let run = autoscale_simulate(&inst, &policy).unwrap();
        // origin serves 2, two extra clones take 2 and 1
        assert_eq!(run.hires.iter().map(|h| h.hired).collect::<Vec<_>>(), vec![1, 1]);
        assert_eq!(run.active, vec![0, 2]);
        assert!(check_feasibility(&run.instance, &run.solution).is_empty());
    }

    #[test]
    fn request_larger_than_clone_bandwidth_is_unserviceable() {
        let inst = instance(&[0, 3]);
        let mut policy = AutoscalePolicy::for_instance(&inst).unwrap();
        policy.machine_type.bandwidth_mb = 500.0;
        assert!(matches!(autoscale_simulate(&inst, &policy), Err(BenchError::Unserviceable(_))));
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let inst = instance(&[1]);
        let mut policy = AutoscalePolicy::for_instance(&inst).unwrap();
        policy.down_threshold = 0.9;
        assert!(autoscale_simulate(&inst, &policy).is_err());
    }
}
