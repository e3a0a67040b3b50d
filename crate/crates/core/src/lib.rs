//! Discrete-event simulator of a multi-user MIMO WLAN downlink.
//!
//! An access point with `M` antennas serves `N` stations with one A-MPDU per
//! selected user per transmit cycle. Each cycle pays a fixed overhead
//! (channel sounding, PHY preambles, block ACKs) and then runs the parallel
//! data phase for as long as the longest stream needs, so packet-size
//! variation wastes airtime on the shorter streams and bursty arrivals stall
//! the scheduler while it waits to fill a user group. The crate measures how
//! both effects erode aggregate throughput, and exposes the sweeps behind
//! those measurements through the `simulate` binary.
//!
//! Module map:
//! - [`traffic`]: packet-size models and backlogged / ON-OFF sources.
//! - [`framing`]: A-MPDU byte accounting and airtime.
//! - [`overhead`]: per-cycle sounding and acknowledgment budget.
//! - [`engine`]: the event loop producing cycle logs.
//! - [`metrics`]: throughput, delay fraction, offered load.
//! - [`sweep`] / [`config`]: experiment harness and file format.

pub mod config;
pub mod engine;
pub mod framing;
pub mod metrics;
pub mod overhead;
pub mod sweep;
pub mod traffic;

pub use config::{Config, ConfigError};
pub use engine::{run, CycleRecord, QueueView, RunOutput, SimConfig, SimError};
pub use framing::{build_ampdu, Ampdu, FramingConstants};
pub use metrics::{aggregate_throughput, delay_fraction, offered_load, RunMetrics};
pub use overhead::{OverheadBudget, SoundingConfig};
pub use sweep::{make_figure_config, run_sweep, write_csv, Figure, SweepKind, SweepRow, SweepSpec};
pub use traffic::{Packet, PacketSizeModel, TrafficMode, TrafficProfile, TrafficSource};
