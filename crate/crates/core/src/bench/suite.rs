use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::autoscale::{autoscale_simulate, AutoscalePolicy};
use super::BenchError;
use crate::construct::construct_solution;
use crate::exact::{exact_solve, ExactConfig, ExactError, ExactOutcome};
use crate::ils::{ils_solve, IlsConfig};
use crate::model::{evaluate, CostBreakdown, Instance, Pool};
use crate::rng::seeded;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Greedy,
    Ils,
    Exact,
    Autoscale,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Greedy, Method::Ils, Method::Exact, Method::Autoscale];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Ils => "ils",
            Method::Exact => "exact",
            Method::Autoscale => "autoscale",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| BenchError::InvalidArgument(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub methods: Vec<Method>,
    pub ils: IlsConfig,
    /// ILS runs per instance; the row reports their mean.
    pub ils_runs: usize,
    pub exact: ExactConfig,
    /// Autoscale policy; clones of each instance's first origin server when absent.
    pub autoscale: Option<AutoscalePolicy>,
    pub greedy_seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            ils: IlsConfig::default(),
            ils_runs: 3,
            exact: ExactConfig { node_limit: 2_000_000, prune: true },
            autoscale: None,
            greedy_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub method: String,
    pub servers_od: f64,
    pub total: f64,
    pub attend: f64,
    pub repli: f64,
    pub back: f64,
    pub time_s: f64,
    pub financial: f64,
    pub gap_pct: Option<f64>,
}

pub const CSV_HEADER: [&str; 10] =
    ["instance", "method", "servers_od", "total", "attend", "repli", "back", "time_s", "financial", "gap_pct"];

/// Percentage excess of `heuristic_total` over `reference_total`, rounded to
/// one decimal.
pub fn compute_gap(heuristic_total: f64, reference_total: f64) -> Result<f64, BenchError> {
    if !(reference_total > 0.0) {
        return Err(BenchError::InvalidArgument("reference total must be positive".into()));
    }
    let gap = 100.0 * (heuristic_total - reference_total) / reference_total;
    Ok((gap * 10.0).round() / 10.0 + 0.0)
}

/// Price of the always-on origin pool over the horizon.
pub fn base_financial(instance: &Instance) -> f64 {
    instance
        .servers
        .iter()
        .filter(|s| s.pool == Pool::Origin)
        .map(|s| s.price_per_period * instance.horizon as f64)
        .sum()
}

struct Measured {
    breakdown: CostBreakdown,
    financial: f64,
    seconds: f64,
    proven: Option<bool>,
}

fn measured(breakdown: CostBreakdown, financial: f64, clock: Instant) -> Measured {
    Measured { breakdown, financial, seconds: clock.elapsed().as_secs_f64(), proven: None }
}

fn run_one(instance: &Instance, method: Method, run: usize, config: &SuiteConfig) -> Result<Measured, BenchError> {
    let clock = Instant::now();
    let base = base_financial(instance);
    match method {
        Method::Greedy => {
            let solution = construct_solution(instance, &mut seeded(config.greedy_seed))?;
            let b = evaluate(instance, &solution)?;
            let financial = b.financial + base;
            Ok(measured(b, financial, clock))
        }
        Method::Ils => {
            let ils = IlsConfig { seed: config.ils.seed.wrapping_add(run as u64), ..config.ils.clone() };
            let (_, stats) = ils_solve(instance, &ils)?;
            let financial = stats.breakdown.financial + base;
            Ok(measured(stats.breakdown, financial, clock))
        }
        Method::Exact => {
            let (outcome, proven): (ExactOutcome, bool) = match exact_solve(instance, &config.exact) {
                Ok(o) => (o, true),
                Err(ExactError::BudgetExhausted(o)) => (*o, false),
                Err(e) => return Err(e.into()),
            };
            let b = evaluate(instance, &outcome.solution)?;
            let financial = b.financial + base;
            Ok(Measured { proven: Some(proven), ..measured(b, financial, clock) })
        }
        Method::Autoscale => {
            let policy = match &config.autoscale {
                Some(p) => p.clone(),
                None => AutoscalePolicy::for_instance(instance)?,
            };
            let run = autoscale_simulate(instance, &policy)?;
            let financial = run.breakdown.financial;
            Ok(measured(run.breakdown, financial, clock))
        }
    }
}

fn row(instance: &str, method: Method, runs: &[Measured]) -> ResultRow {
    let n = runs.len() as f64;
    let mean = |f: &dyn Fn(&Measured) -> f64| runs.iter().map(f).sum::<f64>() / n;
    let attend = mean(&|m| m.breakdown.attend);
    let repli = mean(&|m| m.breakdown.replication);
    let back = mean(&|m| m.breakdown.backlog);
    let label = match runs[0].proven {
        Some(false) => format!("{method}-unproven"),
        _ => method.to_string(),
    };
    ResultRow {
        instance: instance.to_string(),
        method: label,
        servers_od: mean(&|m| m.breakdown.servers_od as f64),
        total: attend + repli + back,
        attend,
        repli,
        back,
        time_s: mean(&|m| m.seconds),
        financial: mean(&|m| m.financial),
        gap_pct: None,
    }
}

/// Run every method on every instance. ILS rows average `ils_runs` seeds;
/// exact rows that hit the node limit are labelled `exact-unproven`; gaps are
/// relative to a proven exact optimum of the same instance.
pub fn run_suite(
    instances: &[(String, Instance)],
    config: &SuiteConfig,
    out_path: Option<&Path>,
) -> Result<Vec<ResultRow>, BenchError> {
    let mut jobs = Vec::new();
    for (i, _) in instances.iter().enumerate() {
        for &method in &config.methods {
            let runs = if method == Method::Ils { config.ils_runs.max(1) } else { 1 };
            jobs.extend((0..runs).map(|run| (i, method, run)));
        }
    }
    let results: Vec<Result<Measured, BenchError>> =
        jobs.par_iter().map(|&(i, method, run)| run_one(&instances[i].1, method, run, config)).collect();

    let mut grouped: Vec<Vec<Vec<Measured>>> =
        instances.iter().map(|_| config.methods.iter().map(|_| Vec::new()).collect()).collect();
    for (&(i, method, _), result) in jobs.iter().zip(results) {
        let m = config.methods.iter().position(|&x| x == method).expect("job method is configured");
        grouped[i][m].push(result?);
    }

    let mut rows = Vec::new();
    for ((label, _), per_method) in instances.iter().zip(grouped) {
        let mut block: Vec<ResultRow> =
            config.methods.iter().zip(&per_method).map(|(&method, runs)| row(label, method, runs)).collect();
        let reference = block.iter().find(|r| r.method == Method::Exact.name()).map(|r| r.total);
        if let Some(reference) = reference.filter(|&r| r > 0.0) {
            for r in &mut block {
                r.gap_pct = Some(compute_gap(r.total, reference)?);
            }
        }
        rows.extend(block);
    }
    if let Some(path) = out_path {
        let file = std::fs::File::create(path)?;
        write_rows_csv(&rows, file)?;
    }
    Ok(rows)
}

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), BenchError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for r in rows {
        writer.write_record([
            r.instance.clone(),
            r.method.clone(),
            r.servers_od.to_string(),
            r.total.to_string(),
            r.attend.to_string(),
            r.repli.to_string(),
            r.back.to_string(),
            format!("{:.3}", r.time_s),
            r.financial.to_string(),
            r.gap_pct.map(|g| format!("{g:.1}")).unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Instances (`*.json`, labelled by file stem, sorted) and an optional
/// `suite.json` configuration from a directory.
pub fn load_suite_dir(dir: &Path) -> Result<(Vec<(String, Instance)>, SuiteConfig), BenchError> {
    let mut config = SuiteConfig::default();
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut instances = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path)?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if stem == "suite" {
            config = serde_json::from_str(&text)?;
        } else {
            instances.push((stem, Instance::from_json(&text)?));
        }
    }
    if instances.is_empty() {
        return Err(BenchError::EmptyInstance);
    }
    Ok((instances, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_instance, RandomSpec};

    #[test]
    fn gap_examples() {
        assert_eq!(compute_gap(2139.6, 1993.6).unwrap(), 7.3);
        assert_eq!(compute_gap(2647.0, 1726.9).unwrap(), 53.3);
        assert_eq!(compute_gap(5.0, 5.0).unwrap(), 0.0);
        assert!(compute_gap(1.0, 0.0).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("cplex".parse::<Method>().is_err());
    }

    #[test]
    fn rows_per_method_and_ils_mean() {
        let mut rng = seeded(4);
        let inst = random_instance(&RandomSpec::default(), &mut rng);
        let config = SuiteConfig { methods: vec![Method::Exact, Method::Ils], ..SuiteConfig::default() };
        let rows = run_suite(&[("tiny".into(), inst.clone())], &config, None).unwrap();
        assert_eq!(rows.len(), 2);
        let seeds: Vec<f64> = (0..3)
            .map(|s| ils_solve(&inst, &IlsConfig { seed: s, ..IlsConfig::default() }).unwrap().1.best_cost)
            .collect();
        let mean = seeds.iter().sum::<f64>() / 3.0;
        assert!((rows[1].total - mean).abs() < 1e-9);
        for r in &rows {
            assert_eq!(r.total, r.attend + r.repli + r.back);
            assert!(r.gap_pct.unwrap() >= 0.0);
        }
    }

    #[test]
    fn csv_header_order() {
        let mut out = Vec::new();
        write_rows_csv(&[], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim(), CSV_HEADER.join(","));
    }
}
