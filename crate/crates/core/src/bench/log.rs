use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::model::ContentId;
use crate::tracegen::Trace;

/// One access: second offset and requested content.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub timestamp_seconds: f64,
    pub content_id: ContentId,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccessLog {
    pub entries: Vec<LogEntry>,
    pub source: String,
    /// Sizes given inline by the log, if any.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sizes_mb: BTreeMap<ContentId, f64>,
}

#[derive(Deserialize)]
struct CsvEntry {
    timestamp_seconds: f64,
    content_id: ContentId,
    #[serde(default)]
    size_mb: Option<f64>,
}

impl AccessLog {
    pub fn new(source: impl Into<String>, mut entries: Vec<LogEntry>) -> Result<Self, BenchError> {
        if let Some(bad) = entries.iter().find(|e| !(e.timestamp_seconds >= 0.0)) {
            return Err(BenchError::InvalidLog(format!("timestamp {} is negative", bad.timestamp_seconds)));
        }
        entries.sort_by(|a, b| a.timestamp_seconds.total_cmp(&b.timestamp_seconds).then(a.content_id.cmp(&b.content_id)));
        Ok(Self { entries, source: source.into(), sizes_mb: BTreeMap::new() })
    }

    /// Read `timestamp_seconds,content_id[,size_mb]` rows.
    pub fn read_csv<R: Read>(source: impl Into<String>, input: R) -> Result<Self, BenchError> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
        let mut entries = Vec::new();
        let mut sizes = BTreeMap::new();
        for row in reader.deserialize() {
            let row: CsvEntry = row?;
            if let Some(size) = row.size_mb {
                sizes.insert(row.content_id, size);
            }
            entries.push(LogEntry { timestamp_seconds: row.timestamp_seconds, content_id: row.content_id });
        }
        let mut log = Self::new(source, entries)?;
        log.sizes_mb = sizes;
        Ok(log)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BenchError> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["timestamp_seconds", "content_id"])?;
        for e in &self.entries {
            writer.write_record([e.timestamp_seconds.to_string(), e.content_id.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Expand a generated trace: each access becomes one entry at the start
    /// of its time step.
    pub fn from_trace(trace: &Trace, step_seconds: f64, source: impl Into<String>) -> Result<Self, BenchError> {
        let entries = trace
            .rows
            .iter()
            .flat_map(|r| {
                let e = LogEntry { timestamp_seconds: r.time_step as f64 * step_seconds, content_id: r.content_id };
                std::iter::repeat_n(e, r.access_count as usize)
            })
            .collect();
        Self::new(source, entries)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodCount {
    pub period: usize,
    pub content_id: ContentId,
    pub count: u32,
}

/// Sparse per-period access counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodCounts {
    pub period_seconds: f64,
    pub cells: Vec<PeriodCount>,
}

impl PeriodCounts {
    pub fn total(&self) -> u64 {
        self.cells.iter().map(|c| c.count as u64).sum()
    }
}

/// Bucket a log into periods and keep the `top_k` most requested contents of
/// each period; equal counts keep the lower content id.
pub fn discretize_and_filter(log: &AccessLog, period_seconds: f64, top_k: usize) -> Result<PeriodCounts, BenchError> {
    if top_k == 0 {
        return Err(BenchError::InvalidArgument("top_k must be at least 1".into()));
    }
    if !(period_seconds > 0.0) {
        return Err(BenchError::InvalidArgument("period_seconds must be positive".into()));
    }
    let mut buckets: BTreeMap<usize, BTreeMap<ContentId, u32>> = BTreeMap::new();
    for e in &log.entries {
        let period = (e.timestamp_seconds / period_seconds).floor() as usize;
        *buckets.entry(period).or_default().entry(e.content_id).or_default() += 1;
    }
    let mut cells = Vec::new();
    for (period, counts) in buckets {
        let mut ranked: Vec<(ContentId, u32)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(top_k);
        ranked.sort_by_key(|c| c.0);
        cells.extend(ranked.into_iter().map(|(content_id, count)| PeriodCount { period, content_id, count }));
    }
    Ok(PeriodCounts { period_seconds, cells })
}
