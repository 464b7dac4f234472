//! Run metrics: geometric-mean throughput, per-terminal overall/effective
//! throughput, latency aggregation, co-scheduling distribution, and the
//! baseline-vs-candidate comparison.

use crate::config::Mode;
use crate::error::{Result, SimError};

/// Geometric mean over the nonzero entries, with the zero count reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gm {
    pub value: Option<f64>,
    pub excluded: usize,
}

pub fn geometric_mean(values: &[f64]) -> Gm {
    let nonzero: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    let excluded = values.len() - nonzero.len();
    if nonzero.is_empty() {
        return Gm {
            value: None,
            excluded,
        };
    }
    let log_mean = nonzero.iter().map(|v| v.ln()).sum::<f64>() / nonzero.len() as f64;
    Gm {
        value: Some(log_mean.exp()),
        excluded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputResult {
    /// Delivered bits over the time from the first packet arrival (floored to
    /// its TTI boundary) to run end.
    pub overall_bps: f64,
    /// Delivered bits over the time actually scheduled; absent if the
    /// terminal was never scheduled.
    pub effective_bps: Option<f64>,
}

pub fn throughputs(
    delivered_bytes: u64,
    first_arrival_s: Option<f64>,
    run_end_s: f64,
    scheduled_ttis: u64,
    tti_s: f64,
) -> ThroughputResult {
    let bits = delivered_bytes as f64 * 8.0;
    let overall_bps = match first_arrival_s {
        Some(first) if delivered_bytes > 0 => {
            let active_start = (first / tti_s).floor() * tti_s;
            let active = (run_end_s - active_start).max(tti_s);
            bits / active
        }
        _ => 0.0,
    };
    let effective_bps = if scheduled_ttis == 0 {
        None
    } else {
        Some(bits / (scheduled_ttis as f64 * tti_s))
    };
    ThroughputResult {
        overall_bps,
        effective_bps,
    }
}

/// Log-spaced latency histogram plus exact moments. Covers 1 microsecond to
/// 1000 seconds; percentiles resolve to well under 1% in the value domain.
#[derive(Debug, Clone)]
pub struct LatencyAccum {
    bins: Vec<u64>,
    sum_s: f64,
    count: u64,
}

const LAT_MIN_S: f64 = 1e-6;
const LAT_MAX_S: f64 = 1e3;
const LAT_BINS: usize = 2400;

impl LatencyAccum {
    pub fn new() -> LatencyAccum {
        LatencyAccum {
            bins: vec![0; LAT_BINS],
            sum_s: 0.0,
            count: 0,
        }
    }

    pub fn record(&mut self, latency_s: f64) {
        let clamped = latency_s.clamp(LAT_MIN_S, LAT_MAX_S);
        let step = (LAT_MAX_S / LAT_MIN_S).ln() / LAT_BINS as f64;
        let idx = (((clamped / LAT_MIN_S).ln() / step) as usize).min(LAT_BINS - 1);
        self.bins[idx] += 1;
        self.sum_s += latency_s;
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean_s(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_s / self.count as f64)
    }

    /// Nearest-rank percentile, reported at the geometric midpoint of the bin.
    pub fn percentile_s(&self, p: f64) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        let rank = ((p / 100.0 * self.count as f64).ceil() as u64).clamp(1, self.count);
        let mut seen = 0u64;
        let step = (LAT_MAX_S / LAT_MIN_S).ln() / LAT_BINS as f64;
        for (i, &c) in self.bins.iter().enumerate() {
            seen += c;
            if seen >= rank {
                return Some(LAT_MIN_S * ((i as f64 + 0.5) * step).exp());
            }
        }
        None
    }
}

impl Default for LatencyAccum {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub mean_s: f64,
    pub p50_s: f64,
    pub p95_s: f64,
    pub p99_s: f64,
    pub count: u64,
}

impl LatencySummary {
    pub fn from_accum(acc: &LatencyAccum) -> Option<LatencySummary> {
        Some(LatencySummary {
            mean_s: acc.mean_s()?,
            p50_s: acc.percentile_s(50.0)?,
            p95_s: acc.percentile_s(95.0)?,
            p99_s: acc.percentile_s(99.0)?,
            count: acc.count(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct MtMetrics {
    pub mt_id: usize,
    pub serving_sector: usize,
    pub overall_bps: f64,
    pub effective_bps: Option<f64>,
    pub mean_latency_s: Option<f64>,
    pub p95_latency_s: Option<f64>,
    pub scheduled_ttis: u64,
    pub delivered_bytes: u64,
    pub generated_bytes: u64,
    pub backlog_bytes: u64,
    pub first_arrival_s: Option<f64>,
    pub assignments: u64,
}

/// Zero-violation counters maintained while the run executes.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScheduleAudit {
    pub ttis: u64,
    pub scheduled_ttis: u64,
    pub pairing_violations: u64,
    pub reward_violations: u64,
    pub max_coscheduled: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TimePoint {
    pub t_s: f64,
    pub avg_mt_throughput_mbps: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainSummary {
    pub steps: u64,
    pub final_epsilon: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub mode: Mode,
    pub seed: u64,
    pub duration_s: f64,
    pub per_mt: Vec<MtMetrics>,
    pub gm_overall_bps: Gm,
    pub gm_effective_bps: Gm,
    pub latency: Option<LatencySummary>,
    /// cosched_counts[k-1] = TTIs (across sectors) with exactly k terminals.
    pub cosched_counts: Vec<u64>,
    pub timeseries: Vec<TimePoint>,
    pub audit: ScheduleAudit,
    pub generated_bytes: u64,
    pub delivered_bytes: u64,
    pub backlog_bytes: u64,
    /// Bytes summed over scheduler decisions; must equal delivered_bytes.
    pub scheduler_bytes: u64,
    pub intervals: u64,
    pub train: Option<TrainSummary>,
}

impl MetricsReport {
    pub fn cosched_cdf(&self) -> Vec<(usize, f64)> {
        let total: u64 = self.cosched_counts.iter().sum();
        let mut acc = 0u64;
        self.cosched_counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                acc += c;
                (i + 1, if total == 0 { 0.0 } else { acc as f64 / total as f64 })
            })
            .collect()
    }
}

/// The summary numbers the comparison stage consumes.
#[derive(Debug, Clone, Copy, Default)]
pub struct SummaryValues {
    pub gm_overall_mbps: Option<f64>,
    pub gm_effective_mbps: Option<f64>,
    pub latency_mean_ms: Option<f64>,
    pub latency_p95_ms: Option<f64>,
}

impl SummaryValues {
    pub fn from_report(r: &MetricsReport) -> SummaryValues {
        SummaryValues {
            gm_overall_mbps: r.gm_overall_bps.value.map(|v| v / 1e6),
            gm_effective_mbps: r.gm_effective_bps.value.map(|v| v / 1e6),
            latency_mean_ms: r.latency.map(|l| l.mean_s * 1e3),
            latency_p95_ms: r.latency.map(|l| l.p95_s * 1e3),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Gains {
    pub gm_overall_gain_pct: Option<f64>,
    pub gm_effective_gain_pct: Option<f64>,
    pub latency_mean_factor: Option<f64>,
    pub latency_p95_factor: Option<f64>,
}

/// Candidate-vs-baseline gains: throughput as percent change, latency as an
/// improvement factor (baseline over candidate). Missing inputs propagate as
/// missing outputs.
pub fn compare_values(baseline: &SummaryValues, candidate: &SummaryValues) -> Gains {
    let pct = |b: Option<f64>, c: Option<f64>| -> Option<f64> {
        match (b, c) {
            (Some(b), Some(c)) if b > 0.0 => Some((c / b - 1.0) * 100.0),
            _ => None,
        }
    };
    let factor = |b: Option<f64>, c: Option<f64>| -> Option<f64> {
        match (b, c) {
            (Some(b), Some(c)) if c > 0.0 => Some(b / c),
            _ => None,
        }
    };
    Gains {
        gm_overall_gain_pct: pct(baseline.gm_overall_mbps, candidate.gm_overall_mbps),
        gm_effective_gain_pct: pct(baseline.gm_effective_mbps, candidate.gm_effective_mbps),
        latency_mean_factor: factor(baseline.latency_mean_ms, candidate.latency_mean_ms),
        latency_p95_factor: factor(baseline.latency_p95_ms, candidate.latency_p95_ms),
    }
}

pub fn compare(baseline: &MetricsReport, candidate: &MetricsReport) -> Gains {
    compare_values(
        &SummaryValues::from_report(baseline),
        &SummaryValues::from_report(candidate),
    )
}

/// Format a number with 6 significant digits for CSV output.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        format!("{:.5e}", x)
    } else {
        let decimals = (5 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    }
}

/// Parse a `key=value` summary file back into comparison inputs. A literal
/// `nodata` keeps the field missing.
pub fn parse_summary(text: &str) -> Result<SummaryValues> {
    let mut out = SummaryValues::default();
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let slot = match key.trim() {
            "gm_overall_mbps" => &mut out.gm_overall_mbps,
            "gm_effective_mbps" => &mut out.gm_effective_mbps,
            "latency_mean_ms" => &mut out.latency_mean_ms,
            "latency_p95_ms" => &mut out.latency_p95_ms,
            _ => continue,
        };
        let value = value.trim();
        if value == "nodata" {
            *slot = None;
        } else {
            *slot = Some(value.parse::<f64>().map_err(|_| {
                SimError::Validation(format!("summary: bad number for {key}: '{value}'"))
            })?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gm_idempotent_on_constant() {
        let gm = geometric_mean(&[3.5, 3.5, 3.5]);
        assert!((gm.value.unwrap() - 3.5).abs() < 1e-12);
        assert_eq!(gm.excluded, 0);
    }

    #[test]
    fn gm_two_point() {
        let gm = geometric_mean(&[1.0, 4.0]);
        assert!((gm.value.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gm_excludes_zeros() {
        let gm = geometric_mean(&[0.0, 2.0, 8.0]);
        assert!((gm.value.unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(gm.excluded, 1);
    }

    #[test]
    fn gm_all_zero_is_no_data() {
        let gm = geometric_mean(&[0.0, 0.0]);
        assert_eq!(gm.value, None);
        assert_eq!(gm.excluded, 2);
    }

    #[test]
    fn throughput_scheduled_every_tti() {
        let t = throughputs(125_000, Some(0.0), 1.0, 4000, 0.25e-3);
        assert!((t.overall_bps - 1e6).abs() < 1e-6);
        assert!((t.effective_bps.unwrap() - 1e6).abs() < 1e-6);
    }

    #[test]
    fn throughput_quarter_schedule() {
        // 1 Mbit delivered, active 1 s, scheduled 0.25 s
        let t = throughputs(125_000, Some(0.0), 1.0, 1000, 0.25e-3);
        assert!((t.overall_bps - 1e6).abs() < 1e-6);
        assert!((t.effective_bps.unwrap() - 4e6).abs() < 1e-6);
    }

    #[test]
    fn throughput_zero_delivery_and_never_scheduled() {
        let t = throughputs(0, None, 1.0, 0, 0.25e-3);
        assert_eq!(t.overall_bps, 0.0);
        assert_eq!(t.effective_bps, None);
    }

    #[test]
    fn latency_accum_percentiles_close_to_exact() {
        let mut acc = LatencyAccum::new();
        for i in 1..=1000 {
            acc.record(i as f64 * 1e-3);
        }
        assert!((acc.mean_s().unwrap() - 0.5005).abs() < 1e-9);
        let p50 = acc.percentile_s(50.0).unwrap();
        assert!((p50 - 0.5).abs() / 0.5 < 0.01, "p50 {p50}");
        let p95 = acc.percentile_s(95.0).unwrap();
        assert!((p95 - 0.95).abs() / 0.95 < 0.01, "p95 {p95}");
    }

    #[test]
    fn compare_identical_reports() {
        let vals = SummaryValues {
            gm_overall_mbps: Some(10.0),
            gm_effective_mbps: Some(20.0),
            latency_mean_ms: Some(5.0),
            latency_p95_ms: Some(9.0),
        };
        let g = compare_values(&vals, &vals);
        assert!(g.gm_overall_gain_pct.unwrap().abs() < 1e-12);
        assert!((g.latency_mean_factor.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compare_sixteen_percent_gain_and_7x_latency() {
        let base = SummaryValues {
            gm_overall_mbps: Some(10.0),
            gm_effective_mbps: Some(10.0),
            latency_mean_ms: Some(70.0),
            latency_p95_ms: Some(100.0),
        };
        let cand = SummaryValues {
            gm_overall_mbps: Some(11.6),
            gm_effective_mbps: Some(10.0),
            latency_mean_ms: Some(10.0),
            latency_p95_ms: Some(25.0),
        };
        let g = compare_values(&base, &cand);
        assert!((g.gm_overall_gain_pct.unwrap() - 16.0).abs() < 1e-9);
        assert!((g.latency_mean_factor.unwrap() - 7.0).abs() < 1e-12);
        assert!((g.latency_p95_factor.unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn compare_propagates_missing_fields() {
        let base = SummaryValues {
            gm_overall_mbps: Some(10.0),
            ..Default::default()
        };
        let cand = SummaryValues::default();
        let g = compare_values(&base, &cand);
        assert!(g.gm_overall_gain_pct.is_none());
        assert!(g.latency_mean_factor.is_none());
    }

    #[test]
    fn sig6_formats() {
        assert_eq!(sig6(101.54242509439325), "101.542");
        assert_eq!(sig6(0.5), "0.500000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-3.25), "-3.25000");
        assert_eq!(sig6(1_234_567.0), "1.23457e6");
    }

    #[test]
    fn summary_parse_round_trip() {
        let text = "mode=eval\ngm_overall_mbps=12.3456\ngm_effective_mbps=nodata\nlatency_mean_ms=4.2\nlatency_p95_ms=8.8\n";
        let v = parse_summary(text).unwrap();
        assert_eq!(v.gm_overall_mbps, Some(12.3456));
        assert_eq!(v.gm_effective_mbps, None);
        assert_eq!(v.latency_p95_ms, Some(8.8));
    }
}
