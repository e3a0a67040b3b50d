//! Byte-exact A-MPDU framing arithmetic.
//!
//! Each subframe is `delimiter | MAC header | MSDU | FCS`, padded up to the
//! subframe alignment, where the MSDU is the application payload plus IP and
//! UDP headers. Airtime is the ideal bit-pipe time of the aggregate at the
//! configured MCS rate; the PHY preamble is billed by the overhead module.

use std::collections::VecDeque;

use thiserror::Error;

use crate::traffic::Packet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FramingError {
    #[error("framing.{key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// 802.11ac framing constants. Defaults match the 20 MHz, 54 Mb/s MCS setup.
#[derive(Debug, Clone, PartialEq)]
pub struct FramingConstants {
    pub mac_header_bytes: u32,
    pub delimiter_bytes: u32,
    pub fcs_bytes: u32,
    pub ip_header_bytes: u32,
    pub udp_header_bytes: u32,
    /// Subframes are padded to a multiple of this (4 => 0-3 pad bytes).
    pub subframe_pad_align: u32,
    /// Hard cap on subframes per A-MPDU; the standard allows up to 64.
    pub max_aggregation: u32,
    /// PHY preamble duration in seconds.
    pub phy_header_s: f64,
    /// Data MCS rate in bits per second.
    pub mcs_rate_bps: f64,
}

impl Default for FramingConstants {
    fn default() -> Self {
        Self {
            mac_header_bytes: 36,
            delimiter_bytes: 4,
            fcs_bytes: 4,
            ip_header_bytes: 20,
            udp_header_bytes: 8,
            subframe_pad_align: 4,
            max_aggregation: 64,
            phy_header_s: 44e-6,
            mcs_rate_bps: 54e6,
        }
    }
}

impl FramingConstants {
    pub fn validate(&self) -> Result<(), FramingError> {
        let positive: [(&'static str, u32); 5] = [
            ("mac_header_bytes", self.mac_header_bytes),
            ("delimiter_bytes", self.delimiter_bytes),
            ("fcs_bytes", self.fcs_bytes),
            ("ip_header_bytes", self.ip_header_bytes),
            ("udp_header_bytes", self.udp_header_bytes),
        ];
        for (key, value) in positive {
            if value == 0 {
                return Err(FramingError::Invalid {
                    key,
                    reason: "must be positive".into(),
                });
            }
        }
        if self.subframe_pad_align == 0 {
            return Err(FramingError::Invalid {
                key: "subframe_pad_align",
                reason: "must be at least 1".into(),
            });
        }
        if self.max_aggregation == 0 || self.max_aggregation > 64 {
            return Err(FramingError::Invalid {
                key: "max_aggregation",
                reason: format!("must lie in [1, 64], got {}", self.max_aggregation),
            });
        }
        if !self.phy_header_s.is_finite() || self.phy_header_s <= 0.0 {
            return Err(FramingError::Invalid {
                key: "phy_header_us",
                reason: "must be positive".into(),
            });
        }
        if !self.mcs_rate_bps.is_finite() || self.mcs_rate_bps <= 0.0 {
            return Err(FramingError::Invalid {
                key: "mcs_rate_mbps",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }

    /// MSDU length: application payload plus IP and UDP headers.
    pub fn msdu_len(&self, payload_bytes: u32) -> u32 {
        payload_bytes + self.ip_header_bytes + self.udp_header_bytes
    }

    /// Padded subframe length: delimiter + MAC header + MSDU + FCS, rounded
    /// up to the pad alignment.
    pub fn subframe_len(&self, payload_bytes: u32) -> u32 {
        let raw = self.delimiter_bytes
            + self.mac_header_bytes
            + self.msdu_len(payload_bytes)
            + self.fcs_bytes;
        raw.div_ceil(self.subframe_pad_align) * self.subframe_pad_align
    }

    /// Data-portion airtime of a PSDU at the MCS rate, in seconds.
    pub fn psdu_airtime(&self, psdu_bytes: u64) -> f64 {
        (psdu_bytes * 8) as f64 / self.mcs_rate_bps
    }
}

/// One aggregated MAC frame bound for a single user.
#[derive(Debug, Clone, PartialEq)]
pub struct Ampdu {
    pub user_id: u32,
    /// Per subframe: (application payload bytes, padded subframe bytes).
    pub subframes: Vec<(u32, u32)>,
    pub total_psdu_bytes: u64,
    pub payload_bytes: u64,
}

/// Dequeues up to `max_agg` packets in FIFO order into one A-MPDU.
///
/// The queue must be non-empty; the scheduler never calls this otherwise.
pub fn build_ampdu(
    user_id: u32,
    queue: &mut VecDeque<Packet>,
    max_agg: usize,
    fc: &FramingConstants,
) -> Ampdu {
    debug_assert!(!queue.is_empty(), "build_ampdu called on an empty queue");
    let count = queue.len().min(max_agg);
    let mut subframes = Vec::with_capacity(count);
    let mut total_psdu = 0u64;
    let mut payload_total = 0u64;
    for _ in 0..count {
        let packet = queue.pop_front().expect("count bounded by queue length");
        let len = fc.subframe_len(packet.payload_bytes);
        subframes.push((packet.payload_bytes, len));
        total_psdu += u64::from(len);
        payload_total += u64::from(packet.payload_bytes);
    }
    Ampdu {
        user_id,
        subframes,
        total_psdu_bytes: total_psdu,
        payload_bytes: payload_total,
    }
}
