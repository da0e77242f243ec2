//! Latency aggregation over trials and the result-file format.

pub mod analytics;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CSV_HEADER: [&str; 5] = [
    "request_index",
    "latency_avg",
    "latency_p95",
    "latency_avg_smooth",
    "latency_p95_smooth",
];

pub const SMOOTHING_WINDOW: usize = 3;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty series")]
    Empty,
    #[error("window must be odd and positive, got {0}")]
    BadWindow(usize),
    #[error("trial {trial} has {got} latencies, expected {expected}")]
    RaggedTrials {
        trial: usize,
        expected: usize,
        got: usize,
    },
    #[error("unexpected header {0:?}")]
    BadHeader(Vec<String>),
    #[error("row {row}: request index {got}, expected {row}")]
    BadIndex { row: usize, got: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Centered moving average. Near the ends the window is truncated to the
/// points that exist.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>, MetricsError> {
    if window == 0 || window % 2 == 0 {
        return Err(MetricsError::BadWindow(window));
    }
    if series.is_empty() {
        return Err(MetricsError::Empty);
    }
    let half = window / 2;
    Ok((0..series.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(series.len() - 1);
            // Offsets from the first point keep constant stretches exact.
            let part = &series[lo..=hi];
            let base = part[0];
            base + part.iter().map(|x| x - base).sum::<f64>() / part.len() as f64
        })
        .collect())
}

/// Nearest-rank percentile: the smallest value with at least `q` of the
/// sample at or below it.
pub fn percentile_nearest_rank(values: &[u64], q: f64) -> Result<u64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Per-request-index latency statistics across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySeries {
    pub avg: Vec<f64>,
    pub p95: Vec<f64>,
    pub avg_smooth: Vec<f64>,
    pub p95_smooth: Vec<f64>,
}

impl LatencySeries {
    /// `trials[j][n]` is the latency of request `n` in trial `j`.
    pub fn from_trials(trials: &[Vec<u64>]) -> Result<Self, MetricsError> {
        let first = trials.first().ok_or(MetricsError::Empty)?;
        let len = first.len();
        if len == 0 {
            return Err(MetricsError::Empty);
        }
        for (trial, t) in trials.iter().enumerate() {
            if t.len() != len {
                return Err(MetricsError::RaggedTrials {
                    trial,
                    expected: len,
                    got: t.len(),
                });
            }
        }
        let mut avg = Vec::with_capacity(len);
        let mut p95 = Vec::with_capacity(len);
        let mut column = Vec::with_capacity(trials.len());
        for n in 0..len {
            column.clear();
            column.extend(trials.iter().map(|t| t[n]));
            avg.push(column.iter().sum::<u64>() as f64 / column.len() as f64);
            p95.push(percentile_nearest_rank(&column, 0.95)? as f64);
        }
        Ok(LatencySeries {
            avg_smooth: moving_average(&avg, SMOOTHING_WINDOW)?,
            p95_smooth: moving_average(&p95, SMOOTHING_WINDOW)?,
            avg,
            p95,
        })
    }

    pub fn len(&self) -> usize {
        self.avg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.avg.is_empty()
    }

    /// Mean of `avg` over the last `n` request indices.
    pub fn tail_mean(&self, n: usize) -> f64 {
        let tail = &self.avg[self.avg.len().saturating_sub(n)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for i in 0..self.len() {
            w.serialize((i, self.avg[i], self.p95[i], self.avg_smooth[i], self.p95_smooth[i]))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self, MetricsError> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != CSV_HEADER {
            return Err(MetricsError::BadHeader(header));
        }
        let mut s = LatencySeries {
            avg: vec![],
            p95: vec![],
            avg_smooth: vec![],
            p95_smooth: vec![],
        };
        for (row, rec) in r.deserialize::<(usize, f64, f64, f64, f64)>().enumerate() {
            let (i, a, p, asm, psm) = rec?;
            if i != row {
                return Err(MetricsError::BadIndex { row, got: i });
            }
            s.avg.push(a);
            s.p95.push(p);
            s.avg_smooth.push(asm);
            s.p95_smooth.push(psm);
        }
        if s.is_empty() {
            return Err(MetricsError::Empty);
        }
        Ok(s)
    }
}

/// Sidecar document written next to each result CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub label: String,
    pub scheme: String,
    pub seed: u64,
    pub trials: usize,
    pub failed_trials: usize,
    pub build: String,
    pub config: serde_json::Value,
}
