//! Fixed per-cycle overhead: the channel-sounding exchange (NDP announcement,
//! NDP, per-user compressed feedback and polls), the data PPDU preamble, and
//! the acknowledgment exchange.
//!
//! The sounding timeline is
//! `NDPA | SIFS | NDP | SIFS | FB(1) | POLL | SIFS | FB(2) | ... | FB(n)`,
//! i.e. one feedback leg per user and a poll before every leg after the
//! first. Control and feedback frames each carry a PHY preamble and are sent
//! at the control rate.

use thiserror::Error;

/// MAC overhead (header + FCS) wrapped around one compressed feedback report.
const FEEDBACK_MAC_BYTES: u32 = 28;
/// Average-SNR field appended to each feedback report.
const FEEDBACK_SNR_BITS: u32 = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OverheadError {
    #[error("sounding.{key}: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("unsupported antenna geometry: {n_tx}x{n_rx_per_user} (feedback sizing needs single-antenna receivers)")]
    UnsupportedGeometry { n_tx: u32, n_rx_per_user: u32 },
    #[error("sounding requires at least one user")]
    NoUsers,
}

/// Channel-sounding and control-exchange parameters.
///
/// Defaults reflect a lean 20 MHz configuration: subcarrier grouping 4
/// (16 feedback subcarriers), 5/7 quantization bits, and 24 Mb/s control
/// frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundingConfig {
    pub bandwidth_hz: f64,
    pub subcarrier_grouping: u32,
    pub psi_bits: u32,
    pub phi_bits: u32,
    pub n_tx: u32,
    pub n_rx_per_user: u32,
    /// Subcarriers carried in each feedback report (bandwidth / grouping).
    pub feedback_subcarriers: u32,
    pub sifs_s: f64,
    pub ndpa_bytes: u32,
    pub ndp_duration_s: f64,
    pub poll_bytes: u32,
    pub ba_bytes: u32,
    pub control_rate_bps: f64,
    pub include_ba: bool,
    /// PHY preamble on control, feedback and data PPDUs.
    pub phy_header_s: f64,
}

impl Default for SoundingConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            subcarrier_grouping: 4,
            psi_bits: 5,
            phi_bits: 7,
            n_tx: 4,
            n_rx_per_user: 1,
            feedback_subcarriers: 16,
            sifs_s: 16e-6,
            ndpa_bytes: 25,
            ndp_duration_s: 44e-6,
            poll_bytes: 21,
            ba_bytes: 32,
            control_rate_bps: 24e6,
            include_ba: true,
            phy_header_s: 44e-6,
        }
    }
}

/// Resolved per-component budget, for diagnostics and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadBudget {
    pub n_users: usize,
    pub feedback_bits_per_user: u32,
    /// (component name, duration in seconds, occurrence count).
    pub components: Vec<(&'static str, f64, usize)>,
    pub sounding_s: f64,
    pub cycle_overhead_s: f64,
}

impl SoundingConfig {
    pub fn validate(&self) -> Result<(), OverheadError> {
        if self.psi_bits > self.phi_bits {
            return Err(OverheadError::Invalid {
                key: "psi_bits",
                reason: format!(
                    "psi quantization ({}) must not exceed phi quantization ({})",
                    self.psi_bits, self.phi_bits
                ),
            });
        }
        if self.feedback_subcarriers == 0 {
            return Err(OverheadError::Invalid {
                key: "feedback_subcarriers",
                reason: "must be at least 1".into(),
            });
        }
        if self.n_tx == 0 {
            return Err(OverheadError::Invalid {
                key: "n_tx",
                reason: "must be at least 1".into(),
            });
        }
        let durations: [(&'static str, f64); 4] = [
            ("sifs_us", self.sifs_s),
            ("ndp_duration_us", self.ndp_duration_s),
            ("phy_header_us", self.phy_header_s),
            ("control_rate_mbps", self.control_rate_bps),
        ];
        for (key, value) in durations {
            if !value.is_finite() || value <= 0.0 {
                return Err(OverheadError::Invalid {
                    key,
                    reason: "must be positive".into(),
                });
            }
        }
        Ok(())
    }

    /// Compressed-beamforming feedback size for one user, in bits.
    ///
    /// An `n_tx x 1` steering vector takes `n_tx - 1` phi and `n_tx - 1` psi
    /// angles per reported subcarrier; one average-SNR byte rides along.
    pub fn feedback_bits_per_user(&self) -> Result<u32, OverheadError> {
        if self.n_rx_per_user != 1 {
            return Err(OverheadError::UnsupportedGeometry {
                n_tx: self.n_tx,
                n_rx_per_user: self.n_rx_per_user,
            });
        }
        let angles_each = self.n_tx - 1;
        let per_subcarrier = angles_each * (self.phi_bits + self.psi_bits);
        Ok(self.feedback_subcarriers * per_subcarrier + FEEDBACK_SNR_BITS)
    }

    fn control_airtime(&self, bytes: u32) -> f64 {
        self.phy_header_s + f64::from(bytes * 8) / self.control_rate_bps
    }

    fn feedback_airtime(&self) -> Result<f64, OverheadError> {
        let bits = self.feedback_bits_per_user()?;
        Ok(self.phy_header_s + f64::from(FEEDBACK_MAC_BYTES * 8 + bits) / self.control_rate_bps)
    }

    /// Duration of the full sounding exchange for `n_users` users.
    pub fn sounding_duration(&self, n_users: usize) -> Result<f64, OverheadError> {
        if n_users == 0 {
            return Err(OverheadError::NoUsers);
        }
        let ndpa = self.control_airtime(self.ndpa_bytes);
        let poll = self.control_airtime(self.poll_bytes);
        let feedback = self.feedback_airtime()?;
        let n = n_users as f64;
        Ok(ndpa
            + self.sifs_s
            + self.ndp_duration_s
            + n * (self.sifs_s + feedback)
            + (n - 1.0) * (poll + self.sifs_s))
    }

    /// Total fixed overhead of one transmit cycle: sounding, the data PPDU
    /// preamble, and (optionally) one block-ACK leg per user.
    pub fn cycle_overhead(&self, n_users: usize) -> Result<f64, OverheadError> {
        Ok(self.sounding_duration(n_users)? + self.post_sounding_overhead(n_users))
    }

    /// Overhead of a cycle that reuses previous CSI (no sounding exchange);
    /// used when sounding is amortized over several cycles.
    pub fn data_only_overhead(&self, n_users: usize) -> f64 {
        self.post_sounding_overhead(n_users)
    }

    fn post_sounding_overhead(&self, n_users: usize) -> f64 {
        let ba_legs = if self.include_ba {
            n_users as f64 * (self.sifs_s + self.control_airtime(self.ba_bytes))
        } else {
            0.0
        };
        self.phy_header_s + ba_legs
    }

    /// Itemized budget for `--explain-overhead`.
    pub fn budget(&self, n_users: usize) -> Result<OverheadBudget, OverheadError> {
        let feedback_bits = self.feedback_bits_per_user()?;
        let sounding = self.sounding_duration(n_users)?;
        let cycle = self.cycle_overhead(n_users)?;
        let mut components = vec![
            ("NDP announcement", self.control_airtime(self.ndpa_bytes), 1),
            ("NDP", self.ndp_duration_s, 1),
            ("poll", self.control_airtime(self.poll_bytes), n_users - 1),
            ("feedback", self.feedback_airtime()?, n_users),
            (
                "SIFS",
                self.sifs_s,
                1 + n_users + (n_users - 1) + if self.include_ba { n_users } else { 0 },
            ),
            ("data PHY header", self.phy_header_s, 1),
        ];
        if self.include_ba {
            components.push(("block ACK", self.control_airtime(self.ba_bytes), n_users));
        }
        Ok(OverheadBudget {
            n_users,
            feedback_bits_per_user: feedback_bits,
            components,
            sounding_s: sounding,
            cycle_overhead_s: cycle,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REL_TOL: f64 = 1e-12;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= REL_TOL * b.abs().max(1e-30)
    }

    #[test]
    fn feedback_bits_default_geometry() {
        let cfg = SoundingConfig::default();
        // 16 subcarriers x (3 phi x 7 + 3 psi x 5) + 8-bit SNR field.
        assert_eq!(cfg.feedback_bits_per_user().unwrap(), 584);
    }

    #[test]
    fn feedback_bits_linear_in_subcarriers() {
        let cfg = SoundingConfig {
            feedback_subcarriers: 32,
            ..SoundingConfig::default()
        };
        assert_eq!(cfg.feedback_bits_per_user().unwrap(), 1160);
    }

    #[test]
    fn feedback_bits_degenerate_quantization() {
        let cfg = SoundingConfig {
            psi_bits: 0,
            phi_bits: 0,
            ..SoundingConfig::default()
        };
        assert_eq!(cfg.feedback_bits_per_user().unwrap(), 8);
    }

    #[test]
    fn feedback_rejects_multi_antenna_receivers() {
        let cfg = SoundingConfig {
            n_rx_per_user: 2,
            ..SoundingConfig::default()
        };
        assert!(matches!(
            cfg.feedback_bits_per_user(),
            Err(OverheadError::UnsupportedGeometry { .. })
        ));
    }

    // Hand-computed timeline with the default constants:
    //   NDPA  = 44 + 25*8/24          = 52.333... us
    //   FB    = 44 + (28*8 + 584)/24  = 77.666... us
    //   POLL  = 44 + 21*8/24          = 51 us
    //   BA    = 44 + 32*8/24          = 54.666... us
    fn oracle_times() -> (f64, f64, f64, f64) {
        let ndpa = 44e-6 + 25.0 * 8.0 / 24e6;
        let fb = 44e-6 + (28.0 * 8.0 + 584.0) / 24e6;
        let poll = 44e-6 + 21.0 * 8.0 / 24e6;
        let ba = 44e-6 + 32.0 * 8.0 / 24e6;
        (ndpa, fb, poll, ba)
    }

    #[test]
    fn sounding_duration_single_user() {
        let cfg = SoundingConfig::default();
        let (ndpa, fb, _, _) = oracle_times();
        let expected = ndpa + 16e-6 + 44e-6 + (16e-6 + fb);
        let got = cfg.sounding_duration(1).unwrap();
        assert!(close(got, expected), "{got} vs {expected}");
        // Numerically: 206.0 us.
        assert!((got - 206.0e-6).abs() < 1e-12);
    }

    #[test]
    fn sounding_duration_four_users_adds_three_legs() {
        let cfg = SoundingConfig::default();
        let (_, fb, poll, _) = oracle_times();
        let single = cfg.sounding_duration(1).unwrap();
        let expected = single + 3.0 * (poll + 16e-6 + fb + 16e-6);
        let got = cfg.sounding_duration(4).unwrap();
        assert!(close(got, expected), "{got} vs {expected}");
        assert!((got - 688.0e-6).abs() < 1e-12);
    }

    #[test]
    fn sounding_requires_users() {
        let cfg = SoundingConfig::default();
        assert_eq!(cfg.sounding_duration(0), Err(OverheadError::NoUsers));
    }

    #[test]
    fn cycle_overhead_without_ba_adds_only_phy_header() {
        let cfg = SoundingConfig {
            include_ba: false,
            ..SoundingConfig::default()
        };
        let got = cfg.cycle_overhead(4).unwrap();
        let expected = cfg.sounding_duration(4).unwrap() + 44e-6;
        assert!(close(got, expected));
    }

    #[test]
    fn cycle_overhead_golden_four_users() {
        // Timeline oracle: 688 + 44 + 4 * (16 + 54.666...) = 1014.666... us.
        let cfg = SoundingConfig::default();
        let (_, _, _, ba) = oracle_times();
        let expected = 688e-6 + 44e-6 + 4.0 * (16e-6 + ba);
        let got = cfg.cycle_overhead(4).unwrap();
        assert!(close(got, expected), "{got} vs {expected}");
        assert!((got - 1014.66666667e-6).abs() < 1e-12);
    }

    #[test]
    fn overhead_fraction_bounded_at_full_aggregation() {
        // At aggregation 40 with 512-byte payloads the data phase dominates.
        let cfg = SoundingConfig::default();
        let overhead = cfg.cycle_overhead(4).unwrap();
        let data = 23_360.0 * 8.0 / 54e6;
        assert!(overhead / (overhead + data) < 0.25);
    }

    #[test]
    fn cycle_overhead_strictly_increasing_in_users() {
        let cfg = SoundingConfig::default();
        let mut prev = 0.0;
        for n in 1..=12 {
            let v = cfg.cycle_overhead(n).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn feedback_bits_linear_in_quantization() {
        let base = SoundingConfig::default();
        let bump_phi = SoundingConfig {
            phi_bits: 8,
            ..base.clone()
        };
        let bump_psi = SoundingConfig {
            psi_bits: 6,
            ..base.clone()
        };
        let b0 = base.feedback_bits_per_user().unwrap();
        // One extra bit per angle per subcarrier: 3 angles x 16 subcarriers.
        assert_eq!(bump_phi.feedback_bits_per_user().unwrap(), b0 + 48);
        assert_eq!(bump_psi.feedback_bits_per_user().unwrap(), b0 + 48);
    }

    #[test]
    fn data_only_overhead_matches_post_sounding_terms() {
        let cfg = SoundingConfig::default();
        let full = cfg.cycle_overhead(4).unwrap();
        let amortized = cfg.data_only_overhead(4);
        let sounding = cfg.sounding_duration(4).unwrap();
        assert!(close(full, sounding + amortized));
    }

    #[test]
    fn budget_components_sum_to_cycle_overhead() {
        let cfg = SoundingConfig::default();
        let budget = cfg.budget(4).unwrap();
        let total: f64 = budget
            .components
            .iter()
            .map(|(_, dur, count)| dur * *count as f64)
            .sum();
        assert!(close(total, budget.cycle_overhead_s));
    }
}
