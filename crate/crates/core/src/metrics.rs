//! Evaluation quantities computed from cycle logs and traffic totals.
//!
//! Throughput counts application-payload bits only (goodput); the PSDU-level
//! rate is reported alongside for comparison. The delay fraction is the
//! summed inter-cycle idle time divided by the measurement-window length,
//! which keeps it in [0, 1].

use thiserror::Error;

use crate::engine::CycleRecord;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("measurement window [{t0}, {t1}] is empty")]
    EmptyWindow { t0: f64, t1: f64 },
}

/// Aggregate results of one simulation run over its measurement window.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// Delivered application-payload bits per second (goodput).
    pub throughput_bps: f64,
    /// Delivered PSDU bits per second (payload plus MAC framing).
    pub psdu_throughput_bps: f64,
    pub delay_fraction: f64,
    /// Generated application-payload bits per second; infinite when any
    /// source is backlogged.
    pub offered_load_bps: f64,
    pub mean_cycle_s: f64,
    /// Share of the parallel data phase spent idle on shorter streams.
    pub wasted_airtime_fraction: f64,
    pub cycles_in_window: usize,
    /// Cumulative totals from simulation start (not window-filtered).
    pub delivered_payload_bits: u64,
    pub generated_payload_bits: u64,
}

/// Per-run traffic totals the engine accumulates while streaming arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrafficTotals {
    pub offered_window_bits: u64,
    pub generated_bits: u64,
    pub any_backlogged: bool,
}

/// Payload bits of cycles finishing inside the window, per second.
fn window_is_valid(t0: f64, t1: f64) -> bool {
    t0.is_finite() && t1.is_finite() && t1 > t0
}

pub fn aggregate_throughput(log: &[CycleRecord], window: (f64, f64)) -> Result<f64, MetricsError> {
    let (t0, t1) = window;
    if !window_is_valid(t0, t1) {
        return Err(MetricsError::EmptyWindow { t0, t1 });
    }
    let bits: u64 = log
        .iter()
        .filter(|c| c.tx_end_s > t0 && c.tx_end_s <= t1)
        .map(|c| c.payload_bits())
        .sum();
    Ok(bits as f64 / (t1 - t0))
}

/// Summed inter-cycle delay over the total transmission time.
pub fn delay_fraction(log: &[CycleRecord], total_time_s: f64) -> f64 {
    debug_assert!(total_time_s > 0.0);
    let total_delay: f64 = log.iter().map(|c| c.delay_s).sum();
    total_delay / total_time_s
}

/// Generated application-payload bits per second over the window. Arrivals
/// are (arrival time, payload bytes) pairs; backlogged sources have no
/// finite arrival record and report infinity at the run level instead.
pub fn offered_load<I>(arrivals: I, window: (f64, f64)) -> f64
where
    I: IntoIterator<Item = (f64, u32)>,
{
    let (t0, t1) = window;
    debug_assert!(t1 > t0);
    let bits: u64 = arrivals
        .into_iter()
        .filter(|(t, _)| *t > t0 && *t <= t1)
        .map(|(_, payload)| u64::from(payload) * 8)
        .sum();
    bits as f64 / (t1 - t0)
}

/// Assembles [`RunMetrics`] from a full cycle log. Cycles count toward the
/// window when they finish inside it; the delay of the first in-window cycle
/// is clipped at the window start.
pub fn run_metrics(
    log: &[CycleRecord],
    window: (f64, f64),
    totals: &TrafficTotals,
) -> Result<RunMetrics, MetricsError> {
    let (t0, t1) = window;
    if !window_is_valid(t0, t1) {
        return Err(MetricsError::EmptyWindow { t0, t1 });
    }
    let span = t1 - t0;

    let mut payload_bits = 0u64;
    let mut psdu_bits = 0u64;
    let mut delay_sum = 0.0;
    let mut duration_sum = 0.0;
    let mut wasted = 0.0;
    let mut capacity = 0.0;
    let mut count = 0usize;
    for cycle in log {
        if cycle.tx_end_s <= t0 || cycle.tx_end_s > t1 {
            continue;
        }
        count += 1;
        payload_bits += cycle.payload_bits();
        psdu_bits += cycle.psdu_bits();
        duration_sum += cycle.tx_end_s - cycle.tx_start_s;
        delay_sum += cycle.delay_s.min(cycle.tx_start_s - t0).max(0.0);
        let max_airtime = cycle
            .per_user
            .iter()
            .map(|slot| slot.airtime_s)
            .fold(0.0f64, f64::max);
        for slot in &cycle.per_user {
            wasted += max_airtime - slot.airtime_s;
        }
        capacity += max_airtime * cycle.per_user.len() as f64;
    }

    let delivered: u64 = log.iter().map(|c| c.payload_bits()).sum();
    Ok(RunMetrics {
        throughput_bps: payload_bits as f64 / span,
        psdu_throughput_bps: psdu_bits as f64 / span,
        delay_fraction: delay_sum / span,
        offered_load_bps: if totals.any_backlogged {
            f64::INFINITY
        } else {
            totals.offered_window_bits as f64 / span
        },
        mean_cycle_s: if count > 0 {
            duration_sum / count as f64
        } else {
            0.0
        },
        wasted_airtime_fraction: if capacity > 0.0 {
            wasted / capacity
        } else {
            0.0
        },
        cycles_in_window: count,
        delivered_payload_bits: delivered,
        generated_payload_bits: totals.generated_bits,
    })
}
