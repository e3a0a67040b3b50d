//! Sweep harness: expands a sweep specification into per-point runs, executes
//! them (optionally in parallel), checks row invariants, and serializes the
//! results as CSV. Rows are emitted in deterministic (value, agg, seed)
//! order regardless of execution order.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::Config;
use crate::engine::{self, CycleRecord, SimConfig, SimError};
use crate::metrics::RunMetrics;
use crate::traffic::{PacketSizeModel, TrafficMode};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep.{key}: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invariant violated at {kind} value {value} agg {agg} seed {seed}: {what}")]
    InvariantViolation {
        kind: SweepKind,
        value: f64,
        agg: u32,
        seed: u64,
        what: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Sweeps the extreme-mode weight of the packet-size distribution.
    Variance,
    /// Sweeps the size-correlation run length at fixed extreme weight.
    Correlation,
    /// Sweeps the peak-to-average rate ratio (0 = backlogged sentinel).
    Burstiness,
    /// Runs the base configuration as-is for each (value, agg, seed).
    Custom,
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepKind::Variance => "variance",
            SweepKind::Correlation => "correlation",
            SweepKind::Burstiness => "burstiness",
            SweepKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig5,
    Fig6,
    Fig7,
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig5" => Ok(Figure::Fig5),
            "fig6" => Ok(Figure::Fig6),
            "fig7" => Ok(Figure::Fig7),
            other => Err(format!(
                "unknown figure '{other}' (expected fig5|fig6|fig7)"
            )),
        }
    }
}

/// One experiment: a swept parameter crossed with aggregation rates and seeds
/// over a shared base configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    pub agg_rates: Vec<u32>,
    pub seeds: Vec<u64>,
    pub base: SimConfig,
}

/// One CSV row: a single simulation run keyed by its sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: SweepKind,
    pub value: f64,
    pub agg: u32,
    pub seed: u64,
    pub metrics: RunMetrics,
}

/// Sweep spec for one of the standard experiments.
pub fn make_figure_config(figure: Figure) -> SweepSpec {
    Config::figure(figure)
        .resolve()
        .expect("figure presets are valid")
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.values.is_empty() {
            return Err(SweepError::Invalid {
                key: "values",
                reason: "must not be empty".into(),
            });
        }
        if self.agg_rates.is_empty() {
            return Err(SweepError::Invalid {
                key: "agg_rates",
                reason: "must not be empty".into(),
            });
        }
        if self.seeds.is_empty() {
            return Err(SweepError::Invalid {
                key: "seeds",
                reason: "must not be empty".into(),
            });
        }
        for &value in &self.values {
            match self.kind {
                SweepKind::Variance => {
                    if !(0.0..=0.5).contains(&value) {
                        return Err(SweepError::Invalid {
                            key: "values",
                            reason: format!("variance weight must lie in [0, 0.5], got {value}"),
                        });
                    }
                }
                SweepKind::Correlation => {
                    if value.fract() != 0.0 || !(0.0..=64.0).contains(&value) {
                        return Err(SweepError::Invalid {
                            key: "values",
                            reason: format!(
                                "correlation coefficient must be an integer in [0, 64], got {value}"
                            ),
                        });
                    }
                }
                SweepKind::Burstiness => {
                    if value != 0.0 && value < 1.0 {
                        return Err(SweepError::Invalid {
                            key: "values",
                            reason: format!(
                                "peak-to-average ratio must be 0 (backlogged) or >= 1, got {value}"
                            ),
                        });
                    }
                }
                SweepKind::Custom => {}
            }
        }
        Ok(())
    }

    /// Instantiates the run configuration for one sweep point.
    pub fn configure(&self, value: f64, agg: u32, seed: u64) -> Result<SimConfig, SweepError> {
        let mut cfg = self.base.clone();
        cfg.max_agg = agg as usize;
        cfg.seed = seed;
        let model = &self.base.traffic.size_model;
        match self.kind {
            SweepKind::Variance => {
                cfg.traffic.size_model =
                    PacketSizeModel::three_point(model.size_min, model.size_max, value)
                        .map_err(SimError::from)?;
            }
            SweepKind::Correlation => {
                cfg.traffic.size_model = PacketSizeModel::three_point_correlated(
                    model.size_min,
                    model.size_max,
                    model.extreme_weight,
                    value as u32,
                )
                .map_err(SimError::from)?;
            }
            SweepKind::Burstiness => {
                if value == 0.0 {
                    cfg.traffic.mode = TrafficMode::Backlogged;
                } else {
                    cfg.traffic.mode = TrafficMode::OnOff;
                    cfg.traffic.mean_off_s = (value - 1.0) * cfg.traffic.mean_on_s;
                }
            }
            SweepKind::Custom => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn check_row(spec: &SweepSpec, row: &SweepRow) -> Result<(), SweepError> {
    let violation = |what: String| SweepError::InvariantViolation {
        kind: row.kind,
        value: row.value,
        agg: row.agg,
        seed: row.seed,
        what,
    };
    let m = &row.metrics;
    let cap = spec.base.n_antennas as f64 * spec.base.framing.mcs_rate_bps;
    if m.throughput_bps.is_nan() || m.throughput_bps >= cap {
        return Err(violation(format!(
            "throughput {} not below {} streams x MCS rate",
            m.throughput_bps, spec.base.n_antennas
        )));
    }
    if m.psdu_throughput_bps.is_nan() || m.psdu_throughput_bps >= cap {
        return Err(violation(format!(
            "PSDU throughput {} not below stream capacity",
            m.psdu_throughput_bps
        )));
    }
    if !(0.0..=1.0).contains(&m.delay_fraction) {
        return Err(violation(format!("delay fraction {}", m.delay_fraction)));
    }
    if !(0.0..1.0).contains(&m.wasted_airtime_fraction) {
        return Err(violation(format!(
            "wasted airtime fraction {}",
            m.wasted_airtime_fraction
        )));
    }
    if m.delivered_payload_bits > m.generated_payload_bits {
        return Err(violation(format!(
            "delivered {} exceeds generated {}",
            m.delivered_payload_bits, m.generated_payload_bits
        )));
    }
    // Windowed goodput can nudge past windowed offered load when backlog
    // built during warmup drains inside the window; allow that margin.
    if m.offered_load_bps.is_finite() && m.throughput_bps > m.offered_load_bps * 1.02 + 1e6 {
        return Err(violation(format!(
            "throughput {} exceeds offered load {}",
            m.throughput_bps, m.offered_load_bps
        )));
    }
    Ok(())
}

/// Runs every (value, agg rate, seed) combination. `jobs` bounds the worker
/// threads (`None` = rayon default). When `dump_dir` is given, each run's
/// cycle log is written there as CSV.
pub fn run_sweep(
    spec: &SweepSpec,
    jobs: Option<usize>,
    dump_dir: Option<&Path>,
) -> Result<Vec<SweepRow>, SweepError> {
    spec.validate()?;
    // Configure every point up front so an invalid spec fails before any
    // simulation runs (and before any output exists).
    let mut points = Vec::new();
    for &value in &spec.values {
        for &agg in &spec.agg_rates {
            for &seed in &spec.seeds {
                points.push((value, agg, seed, spec.configure(value, agg, seed)?));
            }
        }
    }
    if let Some(dir) = dump_dir {
        fs::create_dir_all(dir)?;
    }

    let execute = |(value, agg, seed, cfg): &(f64, u32, u64, SimConfig)| {
        let output = engine::run(cfg)?;
        if let Some(dir) = dump_dir {
            let name = format!(
                "cycles_{}_v{}_agg{}_seed{}.csv",
                spec.kind, value, agg, seed
            );
            let mut file = fs::File::create(dir.join(name))?;
            write_cycles_csv(&output.cycles, cfg.n_antennas, &mut file)?;
        }
        Ok(SweepRow {
            kind: spec.kind,
            value: *value,
            agg: *agg,
            seed: *seed,
            metrics: output.metrics,
        })
    };

    let results: Vec<Result<SweepRow, SweepError>> = match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("thread pool");
            pool.install(|| points.par_iter().map(execute).collect())
        }
        None => points.par_iter().map(execute).collect(),
    };

    let mut rows = Vec::with_capacity(results.len());
    for result in results {
        let row = result?;
        check_row(spec, &row)?;
        rows.push(row);
    }
    Ok(rows)
}

fn fmt_mbps(bps: f64) -> String {
    if bps.is_infinite() {
        "inf".to_string()
    } else {
        format!("{:.6}", bps / 1e6)
    }
}

/// Writes the result table; one row per run, deterministic byte-for-byte.
pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "sweep_kind,sweep_value,agg_rate,seed,throughput_mbps,psdu_throughput_mbps,\
         delay_fraction,offered_load_mbps,mean_cycle_us,wasted_airtime_fraction"
    )?;
    for row in rows {
        let m = &row.metrics;
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{},{:.3},{:.6}",
            row.kind,
            row.value,
            row.agg,
            row.seed,
            fmt_mbps(m.throughput_bps),
            fmt_mbps(m.psdu_throughput_bps),
            m.delay_fraction,
            fmt_mbps(m.offered_load_bps),
            m.mean_cycle_s * 1e6,
            m.wasted_airtime_fraction,
        )?;
    }
    Ok(())
}

/// Writes one run's cycle log: timing columns, then user/subframes/payload
/// triplets for each spatial slot.
pub fn write_cycles_csv<W: Write>(
    cycles: &[CycleRecord],
    n_slots: usize,
    mut out: W,
) -> io::Result<()> {
    let mut header = String::from("cycle_index,tx_start_us,tx_end_us,delay_us");
    for slot in 0..n_slots {
        header.push_str(&format!(
            ",slot{slot}_user_id,slot{slot}_subframes,slot{slot}_payload_bytes"
        ));
    }
    writeln!(out, "{header}")?;
    for cycle in cycles {
        let mut line = format!(
            "{},{:.3},{:.3},{:.3}",
            cycle.index,
            cycle.tx_start_s * 1e6,
            cycle.tx_end_s * 1e6,
            cycle.delay_s * 1e6,
        );
        for slot in &cycle.per_user {
            line.push_str(&format!(
                ",{},{},{}",
                slot.user_id, slot.subframes, slot.payload_bytes
            ));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
