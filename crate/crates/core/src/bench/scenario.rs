//! Flash-crowd scenarios end to end: trace, instance, and either an ILS plan
//! or the autoscale baseline, with per-period profiles for plotting.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::autoscale::{autoscale_simulate, AutoscalePolicy, Hire};
use super::instance::{build_instance, Catalog};
use super::log::{discretize_and_filter, AccessLog};
use super::suite::base_financial;
use super::BenchError;
use crate::ils::{ils_solve, IlsConfig, RunStats};
use crate::model::{derive_timeline, ContentId, CostBreakdown, Instance, Pool, ServerId, ServerSpec, Solution};
use crate::tracegen::scenarios::{scenario_one_spec, scenario_two_spec, ScenarioSpec};
use crate::tracegen::{generate_trace, Trace};

/// Large machine: stores every content. Medium machine: half the price,
/// storage for one flash content.
pub const LARGE_PRICE: f64 = 2.0;
pub const MEDIUM_PRICE: f64 = 1.0;
pub const SCENARIO_BANDWIDTH_MB: f64 = 3600.0;
pub const LARGE_STORAGE_MB: f64 = 8000.0;
pub const MEDIUM_STORAGE_MB: f64 = 1000.0;
pub const CLOUD_POOL: u32 = 4;

pub fn large_machine(id: u32, pool: Pool) -> ServerSpec {
    ServerSpec {
        id: ServerId(id),
        pool,
        storage_mb: LARGE_STORAGE_MB,
        bandwidth_mb: SCENARIO_BANDWIDTH_MB,
        price_per_period: LARGE_PRICE,
    }
}

pub fn medium_machine(id: u32) -> ServerSpec {
    ServerSpec {
        id: ServerId(id),
        pool: Pool::Cloud,
        storage_mb: MEDIUM_STORAGE_MB,
        bandwidth_mb: SCENARIO_BANDWIDTH_MB,
        price_per_period: MEDIUM_PRICE,
    }
}

/// One large origin and a pool of medium on-demand machines.
pub fn default_catalog(sizes_mb: &[f64], horizon: usize) -> Catalog {
    Catalog {
        servers: std::iter::once(large_machine(0, Pool::Origin)).chain((1..=CLOUD_POOL).map(medium_machine)).collect(),
        content_sizes: sizes_mb.iter().enumerate().map(|(k, &s)| (ContentId(k as u32), s)).collect(),
        default_size_mb: None,
        horizon: Some(horizon),
    }
}

fn default_step() -> f64 {
    60.0
}

fn default_top_k() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub spec: ScenarioSpec,
    pub seed: u64,
    /// Trace resolution in seconds.
    #[serde(default = "default_step")]
    pub step_seconds: f64,
    #[serde(default = "default_step")]
    pub period_seconds: f64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    pub catalog: Catalog,
    pub policy: AutoscalePolicy,
    #[serde(default)]
    pub ils: IlsConfig,
}

fn scenario_file(name: &str, spec: ScenarioSpec, seed: u64) -> ScenarioFile {
    let horizon = (crate::tracegen::scenarios::SCENARIO_SECONDS as f64 / default_step()) as usize;
    ScenarioFile {
        name: name.into(),
        catalog: default_catalog(&spec.sizes_mb, horizon),
        spec,
        seed,
        step_seconds: default_step(),
        period_seconds: default_step(),
        top_k: default_top_k(),
        policy: AutoscalePolicy::new(large_machine(0, Pool::Cloud)),
        ils: IlsConfig::default(),
    }
}

/// A single flash crowd on content 2; 3 contents, 105 requests, 60 periods.
pub fn scenario_one() -> ScenarioFile {
    scenario_file("scenario-1", scenario_one_spec(), SCENARIO_ONE_SEED)
}

/// Flash crowds on contents 0 and 1; 4 contents, 186 requests, 60 periods.
pub fn scenario_two() -> ScenarioFile {
    scenario_file("scenario-2", scenario_two_spec(), SCENARIO_TWO_SEED)
}

pub const SCENARIO_ONE_SEED: u64 = 22;
pub const SCENARIO_TWO_SEED: u64 = 0;

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn trace(&self) -> Result<Trace, BenchError> {
        Ok(generate_trace(&self.spec.trace_config(self.step_seconds, self.seed))?)
    }

    pub fn instance(&self) -> Result<Instance, BenchError> {
        let log = AccessLog::from_trace(&self.trace()?, self.step_seconds, &self.name)?;
        let counts = discretize_and_filter(&log, self.period_seconds, self.top_k)?;
        build_instance(&counts, &self.catalog, None)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioPolicy {
    Ils,
    Autoscale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub period: usize,
    pub arrivals: usize,
    pub served: usize,
    /// Requests still waiting after the period.
    pub waiting: usize,
    pub hired: usize,
}

pub fn period_profile(instance: &Instance, solution: &Solution, hired: &[usize]) -> Vec<ProfileRow> {
    let mut arrivals = vec![0; instance.horizon];
    let mut served = vec![0; instance.horizon];
    for r in &instance.requests {
        arrivals[r.arrival_period] += 1;
    }
    for a in &solution.assignments {
        served[a.period] += a.request_ids.len();
    }
    let mut waiting = 0;
    (0..instance.horizon)
        .map(|t| {
            waiting = waiting + arrivals[t] - served[t];
            ProfileRow { period: t, arrivals: arrivals[t], served: served[t], waiting, hired: hired[t] }
        })
        .collect()
}

pub fn write_profile_csv<W: Write>(rows: &[ProfileRow], out: W) -> Result<(), BenchError> {
    let mut writer = csv::Writer::from_writer(out);
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub policy: ScenarioPolicy,
    pub seed: u64,
    pub contents: usize,
    pub requests: usize,
    pub horizon: usize,
    pub breakdown: CostBreakdown,
    /// Base pool plus on-demand machine time.
    pub financial: f64,
    /// Contents placed on each on-demand machine.
    pub hired_contents: BTreeMap<ServerId, BTreeSet<ContentId>>,
    pub flash_contents: BTreeSet<ContentId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hires: Vec<Hire>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ils_stats: Option<RunStats>,
    pub profile: Vec<ProfileRow>,
    /// Instance the solution refers to; for autoscale it includes the hired machines.
    pub instance: Instance,
    pub solution: Solution,
}

impl ScenarioReport {
    /// Whether every on-demand machine only holds flash-crowd contents.
    pub fn hires_only_flash_contents(&self) -> bool {
        self.hired_contents.values().all(|set| set.is_subset(&self.flash_contents))
    }
}

pub fn simulate_scenario(file: &ScenarioFile, policy: ScenarioPolicy) -> Result<ScenarioReport, BenchError> {
    let instance = file.instance()?;
    let flash_contents: BTreeSet<ContentId> = file.spec.flash.iter().map(|(k, _)| *k).collect();
    let header = |instance: &Instance| (instance.contents.len(), instance.requests.len(), instance.horizon);
    match policy {
        ScenarioPolicy::Ils => {
            let (solution, stats) = ils_solve(&instance, &file.ils)?;
            let timeline = derive_timeline(&instance, &solution)?;
            let mut hired_contents: BTreeMap<ServerId, BTreeSet<ContentId>> = BTreeMap::new();
            for a in &solution.assignments {
                if instance.server(a.server_id).is_some_and(|s| s.pool == Pool::Cloud) {
                    hired_contents.entry(a.server_id).or_default().insert(a.content_id);
                }
            }
            for e in &timeline.copy_events {
                hired_contents.entry(e.destination).or_default().insert(e.content);
            }
            let hired: Vec<usize> = (0..instance.horizon)
                .map(|t| timeline.hire_activity.values().filter(|p| p.contains(&t)).count())
                .collect();
            let breakdown = stats.breakdown.clone();
            let (contents, requests, horizon) = header(&instance);
            Ok(ScenarioReport {
                name: file.name.clone(),
                policy,
                seed: file.seed,
                contents,
                requests,
                horizon,
                financial: breakdown.financial + base_financial(&instance),
                breakdown,
                hired_contents,
                flash_contents,
                hires: Vec::new(),
                ils_stats: Some(stats),
                profile: period_profile(&instance, &solution, &hired),
                instance,
                solution,
            })
        }
        ScenarioPolicy::Autoscale => {
            let run = autoscale_simulate(&instance, &file.policy)?;
            let all: BTreeSet<ContentId> = instance.contents.iter().map(|c| c.id).collect();
            let hired_contents = run.hires.iter().map(|h| (h.server, all.clone())).collect();
            let (contents, requests, horizon) = header(&instance);
            Ok(ScenarioReport {
                name: file.name.clone(),
                policy,
                seed: file.seed,
                contents,
                requests,
                horizon,
                financial: run.breakdown.financial,
                breakdown: run.breakdown,
                hired_contents,
                flash_contents,
                hires: run.hires,
                ils_stats: None,
                profile: period_profile(&run.instance, &run.solution, &run.active),
                instance: run.instance,
                solution: run.solution,
            })
        }
    }
}
