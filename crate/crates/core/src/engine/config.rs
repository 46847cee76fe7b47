use serde::{Deserialize, Serialize};

use crate::channel::{FadingModel, PhyParams};
use crate::geometry::MobilityModel;
use crate::protocols::ProtocolKind;
use crate::traffic::ArrivalDistribution;
use crate::{Error, Result};

/// How the transmission rate `R = W·log2 β` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RateRule {
    Beta {
        beta: f64,
    },
    /// `γ = K^σ`, i.e. `β = K^(σα/2)`.
    Sigma {
        sigma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhyConfig {
    pub bandwidth: f64,
    pub power: f64,
    #[serde(default = "one")]
    pub xi: f64,
    pub alpha: f64,
    pub tau: f64,
    pub rate: RateRule,
}

fn one() -> f64 {
    1.0
}

impl PhyConfig {
    pub fn beta(&self, relays: usize) -> f64 {
        match self.rate {
            RateRule::Beta { beta } => beta,
            RateRule::Sigma { sigma } => (relays as f64).powf(sigma * self.alpha / 2.0),
        }
    }

    pub fn build(&self, relays: usize) -> Result<PhyParams> {
        PhyParams::new(self.bandwidth, self.power, self.xi, self.alpha, self.beta(relays), self.tau)
    }
}

/// Finite-horizon stand-ins for queue stability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityThresholds {
    /// Largest admissible least-squares drift of `Q_s`, packets per frame.
    pub slope_eps: f64,
    /// The final-decile mean may not exceed this multiple of the window mean.
    pub c_tail: f64,
}

impl Default for StabilityThresholds {
    fn default() -> Self {
        Self { slope_eps: 1e-4, c_tail: 3.0 }
    }
}

/// Everything one replication needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Number of relays `K`.
    pub relays: usize,
    pub radius: f64,
    /// Number of equal-area regions `M`.
    pub regions: usize,
    pub mobility: MobilityModel,
    pub phy: PhyConfig,
    pub fading: FadingModel,
    pub arrivals: ArrivalDistribution,
    pub protocol: ProtocolKind,
    #[serde(default)]
    pub source_capacity: Option<usize>,
    #[serde(default)]
    pub relay_capacity: Option<usize>,
    pub horizon: u64,
    pub warmup: u64,
    pub seed: u64,
    /// Bits per packet `N̄`; defaults to `R·τ`.
    #[serde(default)]
    pub packet_bits: Option<f64>,
    /// Whether the destination can decode the source broadcast directly.
    #[serde(default = "yes")]
    pub direct_link: bool,
    /// Re-sample a relay's position inside its region even when the walk stays put.
    #[serde(default)]
    pub resample_on_stay: bool,
    /// Evaluate every endpoint link each frame to record connectivity frequencies.
    #[serde(default)]
    pub track_connectivity: bool,
    /// Frames averaged into one stored queue-trajectory sample.
    #[serde(default = "default_stride")]
    pub trajectory_stride: u64,
    #[serde(default)]
    pub stability: StabilityThresholds,
}

fn yes() -> bool {
    true
}

fn default_stride() -> u64 {
    10
}

impl SimConfig {
    /// Numerical setting of the reference experiments: `K = 110`, `M = 5`,
    /// `q = 1/5`, `α = 4`, `P = 20 dB`, `W = 1 MHz`, `τ = 5 ms`, `β = K`,
    /// 15-packet batches with probability 0.001 and OBDWF.
    pub fn reference() -> Self {
        Self {
            relays: 110,
            radius: 2.5,
            regions: 5,
            mobility: MobilityModel::RandomWalk { q: 0.2 },
            phy: PhyConfig {
                bandwidth: 1e6,
                power: 100.0,
                xi: 1.0,
                alpha: 4.0,
                tau: 5e-3,
                rate: RateRule::Sigma { sigma: 0.5 },
            },
            fading: FadingModel::Rayleigh,
            arrivals: ArrivalDistribution::new(vec![(15, 0.001), (0, 0.999)]).expect("valid pmf"),
            protocol: ProtocolKind::Obdwf,
            source_capacity: None,
            relay_capacity: None,
            horizon: 1_000_000,
            warmup: 100_000,
            seed: 1,
            packet_bits: None,
            direct_link: true,
            resample_on_stay: false,
            track_connectivity: false,
            trajectory_stride: default_stride(),
            stability: StabilityThresholds::default(),
        }
    }

    /// Physical-layer parameters for this relay count.
    pub fn phy_params(&self) -> Result<PhyParams> {
        self.phy.build(self.relays)
    }

    /// Bits carried by one packet.
    pub fn bits_per_packet(&self) -> Result<f64> {
        let phy = self.phy_params()?;
        Ok(self.packet_bits.unwrap_or(phy.rate * phy.tau))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.relays == 0 {
            return bad("at least one relay is required".into());
        }
        if self.regions == 0 {
            return bad("at least one region is required".into());
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if self.horizon <= self.warmup {
            return bad(format!("horizon {} must exceed warmup {}", self.horizon, self.warmup));
        }
        if self.trajectory_stride == 0 {
            return bad("trajectory stride must be positive".into());
        }
        if self.source_capacity == Some(0) || self.relay_capacity == Some(0) {
            return bad("buffer capacities must be positive".into());
        }
        if !(self.stability.slope_eps > 0.0 && self.stability.c_tail > 0.0) {
            return bad("stability thresholds must be positive".into());
        }
        self.mobility.validate()?;
        self.fading.validate()?;
        self.protocol.validate()?;
        let phy = self.phy_params()?;
        if let Some(bits) = self.packet_bits {
            let cap = phy.rate * phy.tau;
            if !(bits > 0.0) {
                return bad(format!("packet size must be positive, got {bits}"));
            }
            if bits > cap * (1.0 + 1e-12) {
                return bad(format!("packet of {bits} bits does not fit a slot carrying {cap} bits"));
            }
            if bits < cap * (1.0 - 1e-9) {
                log::warn!("packet of {bits} bits leaves {:.1} bits of each slot unused", cap - bits);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid() {
        let c = SimConfig::reference();
        c.validate().unwrap();
        let phy = c.phy_params().unwrap();
        assert!((phy.beta() - 110.0).abs() < 1e-9);
        assert!((c.bits_per_packet().unwrap() - 5e3 * 110f64.log2()).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = SimConfig::reference();
        c.relays = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = SimConfig::reference();
        c.warmup = c.horizon;
        assert!(c.validate().is_err());
        let mut c = SimConfig::reference();
        c.packet_bits = Some(1e9);
        assert!(c.validate().is_err());
        let mut c = SimConfig::reference();
        c.packet_bits = Some(100.0);
        assert!(c.validate().is_ok());
    }
}
