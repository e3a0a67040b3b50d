//! Per-user packet arrival generation.
//!
//! Packet sizes come from a fixed-mean three-point family: mass `w` on each
//! extreme mode and `1 - 2w` on the midpoint, so the mean stays pinned while
//! the variance sweeps from zero (`w = 0`) to the Bernoulli worst case
//! (`w = 0.5`). The correlated variant re-draws the size class only every
//! `correlation` packets. Arrival times come from either a backlogged source
//! (a packet whenever one is requested) or an exponential ON/OFF source that
//! emits back-to-back at the peak rate while ON.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::framing::FramingConstants;

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("traffic.{key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeKind {
    Fixed,
    ThreePoint,
    ThreePointCorrelated,
}

/// Generator descriptor for application-payload sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketSizeModel {
    pub kind: SizeKind,
    pub size_min: u32,
    pub size_max: u32,
    /// Probability mass on each extreme mode.
    pub extreme_weight: f64,
    /// Consecutive same-size packets per class draw; 0 and 1 both mean IID.
    pub correlation: u32,
}

impl PacketSizeModel {
    /// Degenerate model: every packet is the midpoint of [min, max].
    pub fn fixed(size_min: u32, size_max: u32) -> Result<Self, TrafficError> {
        if size_min > size_max {
            return Err(TrafficError::Invalid {
                key: "size_min",
                reason: "size_min must not exceed size_max".into(),
            });
        }
        Ok(Self {
            kind: SizeKind::Fixed,
            size_min,
            size_max,
            extreme_weight: 0.0,
            correlation: 1,
        })
    }

    pub fn three_point(
        size_min: u32,
        size_max: u32,
        extreme_weight: f64,
    ) -> Result<Self, TrafficError> {
        Self::check_three_point(size_min, size_max, extreme_weight)?;
        Ok(Self {
            kind: SizeKind::ThreePoint,
            size_min,
            size_max,
            extreme_weight,
            correlation: 1,
        })
    }

    pub fn three_point_correlated(
        size_min: u32,
        size_max: u32,
        extreme_weight: f64,
        correlation: u32,
    ) -> Result<Self, TrafficError> {
        Self::check_three_point(size_min, size_max, extreme_weight)?;
        Ok(Self {
            kind: SizeKind::ThreePointCorrelated,
            size_min,
            size_max,
            extreme_weight,
            correlation,
        })
    }

    fn check_three_point(
        size_min: u32,
        size_max: u32,
        extreme_weight: f64,
    ) -> Result<(), TrafficError> {
        if size_min >= size_max {
            return Err(TrafficError::Invalid {
                key: "size_min",
                reason: "size_min must be strictly below size_max".into(),
            });
        }
        if !(0.0..=0.5).contains(&extreme_weight) {
            return Err(TrafficError::Invalid {
                key: "extreme_weight",
                reason: format!("must lie in [0, 0.5], got {extreme_weight}"),
            });
        }
        Ok(())
    }

    /// Midpoint of the two extreme modes; the family keeps this fixed.
    pub fn mean_payload(&self) -> u32 {
        (self.size_min + self.size_max) / 2
    }

    /// Variance after mapping sizes affinely so min -> 0 and max -> 1.
    /// Equals `w / 2` for the three-point family.
    pub fn normalized_variance(&self) -> f64 {
        match self.kind {
            SizeKind::Fixed => 0.0,
            _ => self.extreme_weight / 2.0,
        }
    }

    fn run_length(&self) -> u32 {
        match self.kind {
            SizeKind::ThreePointCorrelated => self.correlation.max(1),
            _ => 1,
        }
    }
}

/// Stateful size generator; the run counter carries the correlation state.
#[derive(Debug, Clone)]
pub struct SizeSampler {
    model: PacketSizeModel,
    run_left: u32,
    current: u32,
}

impl SizeSampler {
    pub fn new(model: PacketSizeModel) -> Self {
        Self {
            model,
            run_left: 0,
            current: 0,
        }
    }

    fn draw_class<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let w = self.model.extreme_weight;
        if u < w {
            self.model.size_min
        } else if u < 2.0 * w {
            self.model.size_max
        } else {
            self.model.mean_payload()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u32 {
        match self.model.kind {
            SizeKind::Fixed => self.model.mean_payload(),
            SizeKind::ThreePoint => self.draw_class(rng),
            SizeKind::ThreePointCorrelated => {
                if self.run_left == 0 {
                    self.current = self.draw_class(rng);
                    self.run_left = self.model.run_length();
                }
                self.run_left -= 1;
                self.current
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficMode {
    Backlogged,
    OnOff,
}

/// Source parameters shared by every user in a run; per-user sources differ
/// only in id and RNG stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficProfile {
    pub mode: TrafficMode,
    pub size_model: PacketSizeModel,
    pub mean_on_s: f64,
    pub mean_off_s: f64,
    pub peak_rate_bps: f64,
}

impl TrafficProfile {
    pub fn source(&self, user_id: u32, seed: u64) -> TrafficSource {
        TrafficSource {
            user_id,
            mode: self.mode,
            mean_on_s: self.mean_on_s,
            mean_off_s: self.mean_off_s,
            peak_rate_bps: self.peak_rate_bps,
            size_model: self.size_model.clone(),
            seed,
        }
    }
}

/// One user's arrival process.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSource {
    pub user_id: u32,
    pub mode: TrafficMode,
    pub mean_on_s: f64,
    pub mean_off_s: f64,
    pub peak_rate_bps: f64,
    pub size_model: PacketSizeModel,
    pub seed: u64,
}

impl TrafficSource {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.mode == TrafficMode::OnOff {
            if !self.mean_on_s.is_finite() || self.mean_on_s <= 0.0 {
                return Err(TrafficError::Invalid {
                    key: "mean_on_ms",
                    reason: "must be positive in on_off mode".into(),
                });
            }
            if !self.mean_off_s.is_finite() || self.mean_off_s < 0.0 {
                return Err(TrafficError::Invalid {
                    key: "mean_off_ms",
                    reason: "must be non-negative".into(),
                });
            }
            if !self.peak_rate_bps.is_finite() || self.peak_rate_bps <= 0.0 {
                return Err(TrafficError::Invalid {
                    key: "peak_rate_mbps",
                    reason: "must be positive in on_off mode".into(),
                });
            }
        }
        Ok(())
    }

    /// Burstiness measure `1 + mean_off / mean_on`; `None` flags the
    /// backlogged sentinel (plotted at the zero position).
    pub fn peak_to_average_ratio(&self) -> Option<f64> {
        match self.mode {
            TrafficMode::Backlogged => None,
            TrafficMode::OnOff => Some(1.0 + self.mean_off_s / self.mean_on_s),
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::from(self.user_id));
        rng
    }

    /// Lazy arrival stream; the engine pulls from it on demand.
    pub fn stream(&self, fc: &FramingConstants) -> ArrivalStream {
        let sampler = SizeSampler::new(self.size_model.clone());
        match self.mode {
            TrafficMode::Backlogged => ArrivalStream::Backlogged(BackloggedStream {
                user_id: self.user_id,
                rng: self.rng(),
                sampler,
            }),
            TrafficMode::OnOff => {
                let mut rng = self.rng();
                let on_exp = Exp::new(1.0 / self.mean_on_s).expect("validated mean_on");
                let off_exp = if self.mean_off_s > 0.0 {
                    Some(Exp::new(1.0 / self.mean_off_s).expect("validated mean_off"))
                } else {
                    None
                };
                let first_on = sample_positive(&on_exp, &mut rng);
                ArrivalStream::OnOff(OnOffStream {
                    user_id: self.user_id,
                    rng,
                    sampler,
                    msdu_overhead_bytes: fc.ip_header_bytes + fc.udp_header_bytes,
                    peak_rate_bps: self.peak_rate_bps,
                    on_exp,
                    off_exp,
                    on_start: 0.0,
                    on_end: first_on,
                    emit_t: 0.0,
                })
            }
        }
    }

    /// Materializes the ON/OFF arrival sequence up to `horizon`. Backlogged
    /// sources have no intrinsic arrival times; use [`ArrivalStream::demand`].
    pub fn generate_arrivals(&self, fc: &FramingConstants, horizon_s: f64) -> Vec<Packet> {
        assert!(
            self.mode == TrafficMode::OnOff,
            "backlogged sources are realized lazily via ArrivalStream::demand"
        );
        let mut stream = self.stream(fc);
        let mut out = Vec::new();
        while let Some(p) = stream.next_arrival() {
            if p.arrival_time_s >= horizon_s {
                break;
            }
            out.push(p);
        }
        out
    }
}

fn sample_positive<R: Rng + ?Sized>(exp: &Exp<f64>, rng: &mut R) -> f64 {
    exp.sample(rng).max(1e-12)
}

/// A single application packet offered to the downlink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub user_id: u32,
    pub arrival_time_s: f64,
    pub payload_bytes: u32,
}

/// Either a lazily evaluated ON/OFF arrival sequence or a backlogged source
/// that materializes a packet whenever one is requested.
pub enum ArrivalStream {
    OnOff(OnOffStream),
    Backlogged(BackloggedStream),
}

impl ArrivalStream {
    pub fn is_backlogged(&self) -> bool {
        matches!(self, ArrivalStream::Backlogged(_))
    }

    /// Next timed arrival; `None` for backlogged sources.
    pub fn next_arrival(&mut self) -> Option<Packet> {
        match self {
            ArrivalStream::OnOff(s) => Some(s.next_packet()),
            ArrivalStream::Backlogged(_) => None,
        }
    }

    /// Materializes one packet at the request time. Backlogged mode only.
    pub fn demand(&mut self, now_s: f64) -> Packet {
        match self {
            ArrivalStream::Backlogged(s) => Packet {
                user_id: s.user_id,
                arrival_time_s: now_s,
                payload_bytes: s.sampler.sample(&mut s.rng),
            },
            ArrivalStream::OnOff(_) => unreachable!("demand is only valid for backlogged sources"),
        }
    }
}

pub struct BackloggedStream {
    user_id: u32,
    rng: ChaCha8Rng,
    sampler: SizeSampler,
}

/// Exponential ON/OFF emitter. During ON periods packets leave back-to-back
/// at the peak rate (gap = this packet's MSDU bits / peak rate); the emission
/// cursor carries across contiguous ON periods so the rate never exceeds the
/// peak even when mean_off = 0.
pub struct OnOffStream {
    user_id: u32,
    rng: ChaCha8Rng,
    sampler: SizeSampler,
    msdu_overhead_bytes: u32,
    peak_rate_bps: f64,
    on_exp: Exp<f64>,
    off_exp: Option<Exp<f64>>,
    on_start: f64,
    on_end: f64,
    emit_t: f64,
}

impl OnOffStream {
    fn next_packet(&mut self) -> Packet {
        loop {
            if self.emit_t < self.on_end {
                let payload = self.sampler.sample(&mut self.rng);
                let packet = Packet {
                    user_id: self.user_id,
                    arrival_time_s: self.emit_t,
                    payload_bytes: payload,
                };
                let msdu_bits = f64::from((payload + self.msdu_overhead_bytes) * 8);
                self.emit_t += msdu_bits / self.peak_rate_bps;
                return packet;
            }
            let off = match &self.off_exp {
                Some(exp) => sample_positive(exp, &mut self.rng),
                None => 0.0,
            };
            self.on_start = self.on_end + off;
            self.on_end = self.on_start + sample_positive(&self.on_exp, &mut self.rng);
            if self.emit_t < self.on_start {
                self.emit_t = self.on_start;
            }
        }
    }

    /// ON window that produced the most recent packet (for tests).
    pub fn on_window(&self) -> (f64, f64) {
        (self.on_start, self.on_end)
    }
}
