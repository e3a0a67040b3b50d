//! Run configuration: a TOML file with `[sim]`, `[traffic]`, `[framing]`,
//! `[sounding]`, and `[sweep]` sections. Every key has a default matching the
//! baseline experiment setup, `--set section.key=value` overrides win over
//! file values, and the three figure presets produce ready-made sweeps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimConfig;
use crate::framing::FramingConstants;
use crate::overhead::SoundingConfig;
use crate::sweep::{Figure, SweepKind, SweepSpec};
use crate::traffic::{PacketSizeModel, TrafficMode, TrafficProfile};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
    #[error("invalid override '{0}': {1}")]
    BadOverride(String, String),
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub sim: SimSection,
    pub traffic: TrafficSection,
    pub framing: FramingSection,
    pub sounding: SoundingSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n_antennas: usize,
    pub n_users: usize,
    pub max_agg: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readiness_threshold: Option<usize>,
    pub horizon_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_s: Option<f64>,
    pub seed: u64,
    pub sounding_every_n_cycles: u32,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            n_antennas: 4,
            n_users: 4,
            max_agg: 40,
            readiness_threshold: None,
            horizon_s: 20.0,
            warmup_s: None,
            seed: 1,
            sounding_every_n_cycles: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSection {
    /// "backlogged" or "on_off".
    pub mode: String,
    /// "fixed", "three_point", or "three_point_correlated".
    pub kind: String,
    pub size_min: u32,
    pub size_max: u32,
    pub extreme_weight: f64,
    pub correlation_coefficient: u32,
    pub mean_on_ms: f64,
    pub mean_off_ms: f64,
    pub peak_rate_mbps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self {
            mode: "backlogged".into(),
            kind: "fixed".into(),
            size_min: 0,
            size_max: 1024,
            extreme_weight: 0.0,
            correlation_coefficient: 1,
            mean_on_ms: 10.0,
            mean_off_ms: 260.0,
            peak_rate_mbps: 265.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FramingSection {
    pub mac_header_bytes: u32,
    pub delimiter_bytes: u32,
    pub fcs_bytes: u32,
    pub ip_header_bytes: u32,
    pub udp_header_bytes: u32,
    pub subframe_pad_align: u32,
    pub max_aggregation: u32,
    pub phy_header_us: f64,
    pub mcs_rate_mbps: f64,
}

impl Default for FramingSection {
    fn default() -> Self {
        Self {
            mac_header_bytes: 36,
            delimiter_bytes: 4,
            fcs_bytes: 4,
            ip_header_bytes: 20,
            udp_header_bytes: 8,
            subframe_pad_align: 4,
            max_aggregation: 64,
            phy_header_us: 44.0,
            mcs_rate_mbps: 54.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoundingSection {
    pub bandwidth_mhz: f64,
    pub subcarrier_grouping: u32,
    pub psi_bits: u32,
    pub phi_bits: u32,
    pub n_tx: u32,
    pub n_rx_per_user: u32,
    pub feedback_subcarriers: u32,
    pub sifs_us: f64,
    pub ndpa_bytes: u32,
    pub ndp_duration_us: f64,
    pub poll_bytes: u32,
    pub ba_bytes: u32,
    pub control_rate_mbps: f64,
    pub include_ba: bool,
    pub phy_header_us: f64,
}

impl Default for SoundingSection {
    fn default() -> Self {
        Self {
            bandwidth_mhz: 20.0,
            subcarrier_grouping: 4,
            psi_bits: 5,
            phi_bits: 7,
            n_tx: 4,
            n_rx_per_user: 1,
            feedback_subcarriers: 16,
            sifs_us: 16.0,
            ndpa_bytes: 25,
            ndp_duration_us: 44.0,
            poll_bytes: 21,
            ba_bytes: 32,
            control_rate_mbps: 24.0,
            include_ba: true,
            phy_header_us: 44.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// "variance", "correlation", "burstiness", or "custom".
    pub kind: String,
    pub values: Vec<f64>,
    pub agg_rates: Vec<u32>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            kind: "custom".into(),
            values: vec![0.0],
            agg_rates: vec![10, 20, 40],
            seeds: (1..=10).collect(),
        }
    }
}

impl Config {
    /// Ready-made configuration for one of the three standard experiments.
    pub fn figure(figure: Figure) -> Self {
        let mut cfg = Config::default();
        match figure {
            Figure::Fig5 => {
                // Packet-size variance sweep: four backlogged users.
                cfg.traffic.kind = "three_point".into();
                cfg.sweep.kind = "variance".into();
                cfg.sweep.values = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
            }
            Figure::Fig6 => {
                // Size-correlation sweep at the Bernoulli worst case. The
                // grid keeps every value a divisor or multiple of each
                // aggregation rate so run boundaries stay aligned with
                // aggregate boundaries past the saturation point.
                cfg.traffic.kind = "three_point_correlated".into();
                cfg.traffic.extreme_weight = 0.5;
                cfg.sweep.kind = "correlation".into();
                cfg.sweep.values = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 20.0, 40.0];
            }
            Figure::Fig7 => {
                // Burstiness sweep: twelve ON/OFF users, fixed mean-size
                // packets, peak rate high enough that the offered load stays
                // above the lowest aggregation rate's saturation throughput
                // across the whole ratio range.
                cfg.sim.n_users = 12;
                cfg.sim.horizon_s = 100.0;
                cfg.traffic.mode = "on_off".into();
                cfg.traffic.kind = "fixed".into();
                cfg.sweep.kind = "burstiness".into();
                cfg.sweep.values = vec![
                    0.0, 1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0, 21.0, 23.0, 25.0,
                    27.0, 30.0,
                ];
            }
        }
        cfg
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Builds a config from an optional file body or figure preset, then
    /// applies `section.key=value` overrides (overrides win).
    pub fn from_sources(
        file_text: Option<&str>,
        figure: Option<Figure>,
        overrides: &[String],
    ) -> Result<Self, ConfigError> {
        let mut tree: toml::Value = match (file_text, figure) {
            (Some(text), _) => text.parse::<toml::Value>()?,
            (None, Some(f)) => toml::Value::try_from(Config::figure(f)).expect("config serializes"),
            (None, None) => toml::Value::try_from(Config::default()).expect("config serializes"),
        };
        for entry in overrides {
            apply_override(&mut tree, entry)?;
        }
        Ok(tree.try_into()?)
    }

    /// Converts the human-unit sections into the core simulation config.
    pub fn resolve_sim(&self) -> Result<SimConfig, ConfigError> {
        let framing = FramingConstants {
            mac_header_bytes: self.framing.mac_header_bytes,
            delimiter_bytes: self.framing.delimiter_bytes,
            fcs_bytes: self.framing.fcs_bytes,
            ip_header_bytes: self.framing.ip_header_bytes,
            udp_header_bytes: self.framing.udp_header_bytes,
            subframe_pad_align: self.framing.subframe_pad_align,
            max_aggregation: self.framing.max_aggregation,
            phy_header_s: self.framing.phy_header_us * 1e-6,
            mcs_rate_bps: self.framing.mcs_rate_mbps * 1e6,
        };
        let sounding = SoundingConfig {
            bandwidth_hz: self.sounding.bandwidth_mhz * 1e6,
            subcarrier_grouping: self.sounding.subcarrier_grouping,
            psi_bits: self.sounding.psi_bits,
            phi_bits: self.sounding.phi_bits,
            n_tx: self.sounding.n_tx,
            n_rx_per_user: self.sounding.n_rx_per_user,
            feedback_subcarriers: self.sounding.feedback_subcarriers,
            sifs_s: self.sounding.sifs_us * 1e-6,
            ndpa_bytes: self.sounding.ndpa_bytes,
            ndp_duration_s: self.sounding.ndp_duration_us * 1e-6,
            poll_bytes: self.sounding.poll_bytes,
            ba_bytes: self.sounding.ba_bytes,
            control_rate_bps: self.sounding.control_rate_mbps * 1e6,
            include_ba: self.sounding.include_ba,
            phy_header_s: self.sounding.phy_header_us * 1e-6,
        };
        let mode = match self.traffic.mode.as_str() {
            "backlogged" => TrafficMode::Backlogged,
            "on_off" => TrafficMode::OnOff,
            other => {
                return Err(invalid(
                    "traffic.mode",
                    format!("expected 'backlogged' or 'on_off', got '{other}'"),
                ))
            }
        };
        let size_model = match self.traffic.kind.as_str() {
            "fixed" => PacketSizeModel::fixed(self.traffic.size_min, self.traffic.size_max),
            "three_point" => PacketSizeModel::three_point(
                self.traffic.size_min,
                self.traffic.size_max,
                self.traffic.extreme_weight,
            ),
            "three_point_correlated" => PacketSizeModel::three_point_correlated(
                self.traffic.size_min,
                self.traffic.size_max,
                self.traffic.extreme_weight,
                self.traffic.correlation_coefficient,
            ),
            other => {
                return Err(invalid(
                    "traffic.kind",
                    format!(
                    "expected 'fixed', 'three_point', or 'three_point_correlated', got '{other}'"
                ),
                ))
            }
        }
        .map_err(|e| invalid("traffic", e.to_string()))?;
        Ok(SimConfig {
            n_antennas: self.sim.n_antennas,
            n_users: self.sim.n_users,
            max_agg: self.sim.max_agg,
            readiness_threshold: self.sim.readiness_threshold,
            horizon_s: self.sim.horizon_s,
            warmup_s: self.sim.warmup_s,
            seed: self.sim.seed,
            sounding_every_n_cycles: self.sim.sounding_every_n_cycles,
            framing,
            sounding,
            traffic: TrafficProfile {
                mode,
                size_model,
                mean_on_s: self.traffic.mean_on_ms * 1e-3,
                mean_off_s: self.traffic.mean_off_ms * 1e-3,
                peak_rate_bps: self.traffic.peak_rate_mbps * 1e6,
            },
            traffic_seed: self.traffic.seed,
        })
    }

    pub fn resolve(&self) -> Result<SweepSpec, ConfigError> {
        let kind = match self.sweep.kind.as_str() {
            "variance" => SweepKind::Variance,
            "correlation" => SweepKind::Correlation,
            "burstiness" => SweepKind::Burstiness,
            "custom" => SweepKind::Custom,
            other => {
                return Err(invalid(
                    "sweep.kind",
                    format!(
                    "expected 'variance', 'correlation', 'burstiness', or 'custom', got '{other}'"
                ),
                ))
            }
        };
        Ok(SweepSpec {
            kind,
            values: self.sweep.values.clone(),
            agg_rates: self.sweep.agg_rates.clone(),
            seeds: self.sweep.seeds.clone(),
            base: self.resolve_sim()?,
        })
    }
}

/// Applies one `section.key=value` override onto the parsed TOML tree.
fn apply_override(tree: &mut toml::Value, entry: &str) -> Result<(), ConfigError> {
    let (path, raw_value) = entry
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(entry.into(), "expected KEY=VALUE".into()))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(ConfigError::BadOverride(entry.into(), "empty key".into()));
    }
    // Parse the value as a TOML literal; fall back to a plain string.
    let parsed: toml::Value = format!("v = {raw_value}")
        .parse::<toml::Value>()
        .ok()
        .and_then(|mut t| t.as_table_mut().and_then(|m| m.remove("v")))
        .unwrap_or_else(|| toml::Value::String(raw_value.trim().to_string()));
    let mut node = tree;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let table = node.as_table_mut().ok_or_else(|| {
            ConfigError::BadOverride(entry.into(), format!("'{segment}' is not a table"))
        })?;
        if i + 1 == segments.len() {
            table.insert(segment.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    unreachable!("segments is non-empty");
}
