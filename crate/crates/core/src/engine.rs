//! Discrete-event downlink loop.
//!
//! The access point serves `n_antennas` parallel streams per transmit cycle.
//! A user is ready once its FIFO queue holds at least `readiness_threshold`
//! packets; when enough users are ready, the earliest head-of-line arrivals
//! win the slots and one A-MPDU per selected user goes out. The cycle lasts
//! the fixed overhead plus the longest stream airtime, so shorter streams
//! waste the difference. When too few users are ready the clock skips to the
//! next arrival and the gap is recorded as inter-cycle delay.
//!
//! Arrival streams are evaluated lazily: each queue materializes at most one
//! aggregate worth of packets ahead, which bounds memory even when the
//! offered load far exceeds the service rate.

use std::collections::VecDeque;

use thiserror::Error;

use crate::framing::{build_ampdu, FramingConstants, FramingError};
use crate::metrics::{run_metrics, MetricsError, RunMetrics, TrafficTotals};
use crate::overhead::{OverheadError, SoundingConfig};
use crate::traffic::{ArrivalStream, Packet, TrafficError, TrafficProfile};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("sim.{key}: {reason}")]
    Config { key: &'static str, reason: String },
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Framing(#[from] FramingError),
    #[error(transparent)]
    Overhead(#[from] OverheadError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn config_err(key: &'static str, reason: impl Into<String>) -> SimError {
    SimError::Config {
        key,
        reason: reason.into(),
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_antennas: usize,
    pub n_users: usize,
    /// Maximum subframes per A-MPDU for this run.
    pub max_agg: usize,
    /// Queue depth at which a user counts as ready; defaults to `max_agg`
    /// (a user is ready only with a full aggregate).
    pub readiness_threshold: Option<usize>,
    pub horizon_s: f64,
    /// Measurement starts here; defaults to 10% of the horizon.
    pub warmup_s: Option<f64>,
    pub seed: u64,
    /// Sound every n-th cycle; intermediate cycles reuse CSI and skip the
    /// sounding exchange. 1 = sound every cycle.
    pub sounding_every_n_cycles: u32,
    pub framing: FramingConstants,
    pub sounding: SoundingConfig,
    pub traffic: TrafficProfile,
    /// Base seed for the traffic RNG streams; defaults to `seed`.
    pub traffic_seed: Option<u64>,
}

impl SimConfig {
    pub fn threshold(&self) -> usize {
        self.readiness_threshold.unwrap_or(self.max_agg)
    }

    pub fn warmup(&self) -> f64 {
        self.warmup_s.unwrap_or(self.horizon_s * 0.1)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_antennas == 0 {
            return Err(config_err("n_antennas", "must be at least 1"));
        }
        if self.n_users < self.n_antennas {
            return Err(config_err(
                "n_users",
                format!(
                    "must be at least n_antennas ({}), got {}",
                    self.n_antennas, self.n_users
                ),
            ));
        }
        self.framing.validate()?;
        self.sounding.validate()?;
        if self.max_agg == 0 || self.max_agg > self.framing.max_aggregation as usize {
            return Err(config_err(
                "max_agg",
                format!(
                    "must lie in [1, {}], got {}",
                    self.framing.max_aggregation, self.max_agg
                ),
            ));
        }
        let threshold = self.threshold();
        if threshold == 0 || threshold > self.max_agg {
            return Err(config_err(
                "readiness_threshold",
                format!(
                    "must lie in [1, max_agg = {}], got {threshold}",
                    self.max_agg
                ),
            ));
        }
        if !self.horizon_s.is_finite() || self.horizon_s <= 0.0 {
            return Err(config_err("horizon_s", "must be positive"));
        }
        let warmup = self.warmup();
        if !warmup.is_finite() || warmup < 0.0 || warmup >= self.horizon_s {
            return Err(config_err(
                "warmup_s",
                format!("must satisfy 0 <= warmup < horizon, got {warmup}"),
            ));
        }
        if self.sounding_every_n_cycles == 0 {
            return Err(config_err("sounding_every_n_cycles", "must be at least 1"));
        }
        self.traffic
            .source(0, self.traffic_seed.unwrap_or(self.seed))
            .validate()?;
        Ok(())
    }
}

/// One downlink transmit cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub index: u64,
    pub tx_start_s: f64,
    pub tx_end_s: f64,
    /// Idle gap since the previous cycle ended (first cycle: since time 0).
    pub delay_s: f64,
    /// Exactly one entry per transmit antenna.
    pub per_user: Vec<UserSlot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSlot {
    pub user_id: u32,
    pub subframes: usize,
    pub payload_bytes: u64,
    pub psdu_bytes: u64,
    pub airtime_s: f64,
}

impl CycleRecord {
    pub fn payload_bits(&self) -> u64 {
        self.per_user.iter().map(|s| s.payload_bytes * 8).sum()
    }

    pub fn psdu_bits(&self) -> u64 {
        self.per_user.iter().map(|s| s.psdu_bytes * 8).sum()
    }

    pub fn duration_s(&self) -> f64 {
        self.tx_end_s - self.tx_start_s
    }
}

/// Snapshot of one user's queue for the grouping decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueView {
    pub user_id: u32,
    pub queue_len: usize,
    pub head_arrival_s: f64,
}

/// FIFO grouping: a user is ready when its queue holds at least `threshold`
/// packets; with at least `n_streams` ready users, the `n_streams` earliest
/// head-of-line arrivals win (ties broken by lower user id). Returns `None`
/// when the group cannot be filled.
pub fn select_users_fifo(
    views: &[QueueView],
    n_streams: usize,
    threshold: usize,
) -> Option<Vec<u32>> {
    let mut ready: Vec<&QueueView> = views.iter().filter(|v| v.queue_len >= threshold).collect();
    if ready.len() < n_streams {
        return None;
    }
    ready.sort_unstable_by(|a, b| {
        a.head_arrival_s
            .total_cmp(&b.head_arrival_s)
            .then(a.user_id.cmp(&b.user_id))
    });
    Some(ready[..n_streams].iter().map(|v| v.user_id).collect())
}

/// Result of one run: the full cycle log and the windowed metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub cycles: Vec<CycleRecord>,
    pub metrics: RunMetrics,
}

struct UserState {
    stream: ArrivalStream,
    queue: VecDeque<Packet>,
    /// Next arrival pulled from the stream but not yet due.
    pending: Option<Packet>,
}

struct Simulation {
    users: Vec<UserState>,
    framing: FramingConstants,
    n_streams: usize,
    max_agg: usize,
    threshold: usize,
    horizon_s: f64,
    warmup_s: f64,
    sounding_every: u64,
    overhead_sounded_s: f64,
    overhead_unsounded_s: f64,
    any_backlogged: bool,
    cycles: Vec<CycleRecord>,
    delivered_bits: u64,
    generated_bits: u64,
    offered_window_bits: u64,
}

impl Simulation {
    fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let traffic_seed = cfg.traffic_seed.unwrap_or(cfg.seed);
        let users: Vec<UserState> = (0..cfg.n_users)
            .map(|uid| {
                let source = cfg.traffic.source(uid as u32, traffic_seed);
                UserState {
                    stream: source.stream(&cfg.framing),
                    queue: VecDeque::new(),
                    pending: None,
                }
            })
            .collect();
        let any_backlogged = users.iter().any(|u| u.stream.is_backlogged());
        Ok(Self {
            any_backlogged,
            framing: cfg.framing.clone(),
            n_streams: cfg.n_antennas,
            max_agg: cfg.max_agg,
            threshold: cfg.threshold(),
            horizon_s: cfg.horizon_s,
            warmup_s: cfg.warmup(),
            sounding_every: u64::from(cfg.sounding_every_n_cycles),
            overhead_sounded_s: cfg.sounding.cycle_overhead(cfg.n_antennas)?,
            overhead_unsounded_s: cfg.sounding.data_only_overhead(cfg.n_antennas),
            users,
            cycles: Vec::new(),
            delivered_bits: 0,
            generated_bits: 0,
            offered_window_bits: 0,
        })
    }

    fn account_arrival(&mut self, packet: &Packet) {
        let bits = u64::from(packet.payload_bytes) * 8;
        self.generated_bits += bits;
        if packet.arrival_time_s > self.warmup_s && packet.arrival_time_s <= self.horizon_s {
            self.offered_window_bits += bits;
        }
    }

    /// Moves due arrivals into the queue, at most one aggregate ahead.
    fn ingest(&mut self, user_idx: usize, clock: f64) {
        if self.users[user_idx].stream.is_backlogged() {
            return;
        }
        loop {
            let user = &mut self.users[user_idx];
            if user.queue.len() >= self.max_agg {
                break;
            }
            if user.pending.is_none() {
                user.pending = user.stream.next_arrival();
            }
            match user.pending {
                Some(p) if p.arrival_time_s <= clock => {
                    user.queue.push_back(p);
                    user.pending = None;
                    self.account_arrival(&p);
                }
                _ => break,
            }
        }
    }

    fn views(&self) -> Vec<QueueView> {
        self.users
            .iter()
            .enumerate()
            .map(|(uid, user)| {
                if user.stream.is_backlogged() {
                    QueueView {
                        user_id: uid as u32,
                        queue_len: usize::MAX,
                        head_arrival_s: 0.0,
                    }
                } else {
                    QueueView {
                        user_id: uid as u32,
                        queue_len: user.queue.len(),
                        head_arrival_s: user
                            .queue
                            .front()
                            .map_or(f64::INFINITY, |p| p.arrival_time_s),
                    }
                }
            })
            .collect()
    }

    /// Earliest arrival that could change a readiness decision.
    fn next_arrival_event(&mut self) -> Option<f64> {
        let mut next: Option<f64> = None;
        for user in &mut self.users {
            if user.stream.is_backlogged() || user.queue.len() >= self.threshold {
                continue;
            }
            if user.pending.is_none() {
                user.pending = user.stream.next_arrival();
            }
            if let Some(p) = &user.pending {
                next = Some(next.map_or(p.arrival_time_s, |t: f64| t.min(p.arrival_time_s)));
            }
        }
        next
    }

    fn execute_cycle(&mut self, index: u64, tx_start: f64, prev_end: f64, selected: &[u32]) {
        let overhead = if index.is_multiple_of(self.sounding_every) {
            self.overhead_sounded_s
        } else {
            self.overhead_unsounded_s
        };
        let mut per_user = Vec::with_capacity(selected.len());
        let mut max_airtime = 0.0f64;
        let mut demanded_bits = 0u64;
        for &uid in selected {
            let ampdu = {
                let user = &mut self.users[uid as usize];
                if user.stream.is_backlogged() {
                    let mut fresh: VecDeque<Packet> = (0..self.max_agg)
                        .map(|_| user.stream.demand(tx_start))
                        .collect();
                    demanded_bits += fresh
                        .iter()
                        .map(|p| u64::from(p.payload_bytes) * 8)
                        .sum::<u64>();
                    build_ampdu(uid, &mut fresh, self.max_agg, &self.framing)
                } else {
                    build_ampdu(uid, &mut user.queue, self.max_agg, &self.framing)
                }
            };
            let airtime = self.framing.psdu_airtime(ampdu.total_psdu_bytes);
            max_airtime = max_airtime.max(airtime);
            self.delivered_bits += ampdu.payload_bytes * 8;
            per_user.push(UserSlot {
                user_id: uid,
                subframes: ampdu.subframes.len(),
                payload_bytes: ampdu.payload_bytes,
                psdu_bytes: ampdu.total_psdu_bytes,
                airtime_s: airtime,
            });
        }
        self.generated_bits += demanded_bits;
        self.cycles.push(CycleRecord {
            index,
            tx_start_s: tx_start,
            tx_end_s: tx_start + overhead + max_airtime,
            delay_s: tx_start - prev_end,
            per_user,
        });
    }

    /// Counts arrivals still inside the horizon that were never materialized,
    /// so the offered-load accounting covers the whole window.
    fn drain_remaining(&mut self) {
        for idx in 0..self.users.len() {
            if self.users[idx].stream.is_backlogged() {
                continue;
            }
            if let Some(p) = self.users[idx].pending.take() {
                if p.arrival_time_s <= self.horizon_s {
                    self.account_arrival(&p);
                } else {
                    continue;
                }
            }
            loop {
                let packet = self.users[idx]
                    .stream
                    .next_arrival()
                    .expect("on/off streams are unbounded");
                if packet.arrival_time_s > self.horizon_s {
                    break;
                }
                let bits = u64::from(packet.payload_bytes) * 8;
                self.generated_bits += bits;
                if packet.arrival_time_s > self.warmup_s {
                    self.offered_window_bits += bits;
                }
            }
        }
    }

    fn run(mut self) -> Result<RunOutput, SimError> {
        let mut clock = 0.0f64;
        let mut prev_end = 0.0f64;
        let mut index = 0u64;
        loop {
            if clock >= self.horizon_s {
                break;
            }
            for idx in 0..self.users.len() {
                self.ingest(idx, clock);
            }
            let views = self.views();
            match select_users_fifo(&views, self.n_streams, self.threshold) {
                Some(selected) => {
                    self.execute_cycle(index, clock, prev_end, &selected);
                    let end = self.cycles.last().expect("just pushed").tx_end_s;
                    clock = end;
                    prev_end = end;
                    index += 1;
                }
                None => match self.next_arrival_event() {
                    Some(t) if t < self.horizon_s => {
                        debug_assert!(t > clock);
                        clock = t;
                    }
                    _ => break,
                },
            }
        }
        self.drain_remaining();
        debug_assert!(
            self.delivered_bits <= self.generated_bits,
            "delivered {} exceeds generated {}",
            self.delivered_bits,
            self.generated_bits
        );
        let totals = TrafficTotals {
            offered_window_bits: self.offered_window_bits,
            generated_bits: self.generated_bits,
            any_backlogged: self.any_backlogged,
        };
        let metrics = run_metrics(&self.cycles, (self.warmup_s, self.horizon_s), &totals)?;
        Ok(RunOutput {
            cycles: self.cycles,
            metrics,
        })
    }
}

/// Runs one simulation to completion. Deterministic for a given config.
pub fn run(cfg: &SimConfig) -> Result<RunOutput, SimError> {
    Simulation::new(cfg)?.run()
}
