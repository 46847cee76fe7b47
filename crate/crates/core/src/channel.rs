//! Fading, path loss, achievable rates and link connectivity.
//!
//! Noise power is normalised to one, so `power` is the transmit SNR in linear
//! units. A link with fading gain `H` over distance `d` supports
//! `W·log2(1 + P·ξ·H/d^α)` bits/s and is *connected* when that meets the fixed
//! transmission rate `R = W·log2 β`.

use std::f64::consts::LN_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::DiskGeometry;
use crate::{Error, Result};

/// Distances below this are clamped to avoid a singular path loss.
pub const MIN_DISTANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhyParams {
    /// Bandwidth `W` in Hz.
    pub bandwidth: f64,
    /// Transmit SNR `P` (linear).
    pub power: f64,
    pub xi: f64,
    /// Path-loss exponent `α`.
    pub alpha: f64,
    /// Transmission rate `R` in bits/s.
    pub rate: f64,
    /// Transmission-slot duration `τ` in seconds.
    pub tau: f64,
    beta: f64,
    gamma: f64,
}

impl PhyParams {
    /// Builds the parameter set for transmission rate `R = W·log2 β`.
    pub fn new(bandwidth: f64, power: f64, xi: f64, alpha: f64, beta: f64, tau: f64) -> Result<Self> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return bad("bandwidth must be positive");
        }
        if !(power > 0.0) {
            return bad("transmit power must be positive");
        }
        if !(xi > 0.0 && xi <= 1.0) {
            return bad("xi must lie in (0, 1]");
        }
        if !(alpha > 2.0 && alpha.is_finite()) {
            return bad("path-loss exponent must exceed 2");
        }
        if !(beta > 1.0 && beta.is_finite()) {
            return bad("beta must exceed 1 (positive transmission rate)");
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return bad("slot duration must be positive");
        }
        Ok(Self {
            bandwidth,
            power,
            xi,
            alpha,
            rate: bandwidth * beta.log2(),
            tau,
            beta,
            gamma: beta.powf(2.0 / alpha),
        })
    }

    /// `β = 2^(R/W)`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `γ = β^(2/α)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Rate supported at received SNR `snr` (before the `ξ` factor).
    #[inline]
    pub fn rate_for_snr(&self, snr: f64) -> f64 {
        self.bandwidth * (self.xi * snr).ln_1p() / LN_2
    }

    #[inline]
    pub fn supports(&self, snr: f64) -> bool {
        self.rate_for_snr(snr) >= self.rate
    }

    /// Largest distance at which a link with gain `h` is connected.
    pub fn coverage_radius(&self, h: f64) -> f64 {
        (self.power * self.xi * h / (self.beta - 1.0)).powf(1.0 / self.alpha)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingModel {
    /// Unit-mean exponential power gain.
    Rayleigh,
    /// Discrete gain distribution as `(gain, probability)` pairs.
    GeneralTable { pmf: Vec<(f64, f64)> },
}

impl FadingModel {
    pub fn validate(&self) -> Result<()> {
        if let FadingModel::GeneralTable { pmf } = self {
            if pmf.is_empty() {
                return Err(Error::Config("fading table is empty".into()));
            }
            if pmf.iter().any(|&(g, p)| !(g >= 0.0) || !(p >= 0.0)) {
                return Err(Error::Config("fading table needs nonnegative gains and probabilities".into()));
            }
            let total: f64 = pmf.iter().map(|&(_, p)| p).sum();
            let mean: f64 = pmf.iter().map(|&(g, p)| g * p).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("fading probabilities sum to {total}")));
            }
            if (mean - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("fading table mean is {mean}, expected 1")));
            }
        }
        Ok(())
    }

    /// Inverse-CDF map from a uniform variate on `(0, 1]`.
    #[inline]
    pub fn gain_from_uniform(&self, u: f64) -> f64 {
        match self {
            FadingModel::Rayleigh => -u.ln(),
            FadingModel::GeneralTable { pmf } => {
                let mut acc = 0.0;
                for &(g, p) in pmf {
                    acc += p;
                    if u <= acc {
                        return g;
                    }
                }
                pmf.last().map(|&(g, _)| g).unwrap_or(0.0)
            }
        }
    }
}

/// A fresh gain for one link in one frame.
pub fn draw_fading<R: Rng + ?Sized>(model: &FadingModel, rng: &mut R) -> f64 {
    // 1 - gen() maps [0, 1) onto (0, 1].
    model.gain_from_uniform(1.0 - rng.gen::<f64>())
}

/// One link's state in one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkDraw {
    pub h: f64,
    pub d: f64,
    /// Normalised channel gain `S = H/d^α`.
    pub s: f64,
    pub rate: f64,
}

impl LinkDraw {
    pub fn new(h: f64, d: f64, phy: &PhyParams) -> Result<Self> {
        let d = checked_distance(d)?;
        let s = h / d.powf(phy.alpha);
        Ok(Self { h, d, s, rate: phy.rate_for_snr(phy.power * s) })
    }

    /// Builds a draw from a precomputed `d^-α`.
    #[inline]
    pub fn with_path_gain(h: f64, d: f64, inv_path_loss: f64, phy: &PhyParams) -> Self {
        let s = h * inv_path_loss;
        Self { h, d, s, rate: phy.rate_for_snr(phy.power * s) }
    }

    #[inline]
    pub fn connected(&self, phy: &PhyParams) -> bool {
        self.rate >= phy.rate
    }

    /// Received SNR `P·S`.
    #[inline]
    pub fn snr(&self, phy: &PhyParams) -> f64 {
        phy.power * self.s
    }
}

fn checked_distance(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("link distance must be positive, got {d}")));
    }
    Ok(d.max(MIN_DISTANCE))
}

/// `d^-α` with the minimum-distance clamp applied.
pub fn inverse_path_loss(d: f64, alpha: f64) -> f64 {
    let d = d.max(MIN_DISTANCE);
    if alpha == 4.0 {
        let d2 = d * d;
        return 1.0 / (d2 * d2);
    }
    d.powf(-alpha)
}

pub fn link_rate(h: f64, d: f64, phy: &PhyParams) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("fading gain must be nonnegative, got {h}")));
    }
    Ok(LinkDraw::new(h, d, phy)?.rate)
}

/// A link is connected when its achievable rate is at least `R`.
pub fn is_connected(h: f64, d: f64, phy: &PhyParams) -> Result<bool> {
    Ok(link_rate(h, d, phy)? >= phy.rate)
}

/// End-to-end SNR of an amplify-and-forward relay with normalised gains
/// `s_sj` (source side) and `s_jd` (destination side).
pub fn af_effective_snr(s_sj: f64, s_jd: f64, power: f64) -> f64 {
    let num = power * power * s_sj * s_jd;
    if num == 0.0 {
        return 0.0;
    }
    num / (power * s_sj + power * s_jd + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Source,
    Destination,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionEstimate {
    pub phi: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: u64,
}

impl ConnectionEstimate {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Monte Carlo probability that a relay placed uniformly on the disk, with a
/// fresh fading draw, has a connected link to `endpoint`. The interval is the
/// normal-approximation binomial 95% interval.
pub fn connection_probability_mc<R: Rng + ?Sized>(
    phy: &PhyParams,
    fading: &FadingModel,
    geometry: &DiskGeometry,
    endpoint: Endpoint,
    samples: u64,
    rng: &mut R,
) -> Result<ConnectionEstimate> {
    if samples == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let anchor = match endpoint {
        Endpoint::Source => geometry.source(),
        Endpoint::Destination => geometry.destination(),
    };
    let mut hits = 0u64;
    for _ in 0..samples {
        let p = geometry.sample_uniform_disk(rng).point;
        let h = draw_fading(fading, rng);
        let d = p.distance(anchor).max(MIN_DISTANCE);
        if LinkDraw::new(h, d, phy)?.connected(phy) {
            hits += 1;
        }
    }
    let n = samples as f64;
    let phi = hits as f64 / n;
    let half = 1.96 * (phi * (1.0 - phi) / n).sqrt();
    Ok(ConnectionEstimate { phi, ci_low: (phi - half).max(0.0), ci_high: (phi + half).min(1.0), samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn phy(beta: f64) -> PhyParams {
        PhyParams::new(1e6, 100.0, 1.0, 4.0, beta, 5e-3).unwrap()
    }

    #[test]
    fn derived_beta_gamma() {
        let p = phy(110.0);
        assert!((p.rate - 1e6 * 110f64.log2()).abs() < 1e-6);
        assert_eq!(p.gamma(), 110f64.powf(0.5));
        assert!((2f64.powf(p.rate / p.bandwidth) - p.beta()).abs() < 1e-9);
        assert!(PhyParams::new(1e6, 100.0, 1.0, 4.0, 1.0, 5e-3).is_err());
        assert!(PhyParams::new(1e6, 100.0, 1.0, 2.0, 4.0, 5e-3).is_err());
        assert!(PhyParams::new(1e6, 100.0, 1.5, 4.0, 4.0, 5e-3).is_err());
    }

    #[test]
    fn rayleigh_moments() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let (mut sum, mut above) = (0.0, 0u64);
        for _ in 0..n {
            let h = draw_fading(&FadingModel::Rayleigh, &mut r);
            assert!(h >= 0.0);
            sum += h;
            if h > 1.0 {
                above += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt());
        let tail = (-1.0f64).exp();
        let frac = above as f64 / n as f64;
        assert!((frac - tail).abs() < 3.0 * (tail * (1.0 - tail) / n as f64).sqrt());
    }

    #[test]
    fn degenerate_table_is_constant() {
        let m = FadingModel::GeneralTable { pmf: vec![(1.0, 1.0)] };
        m.validate().unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(2);
        assert!((0..1000).all(|_| draw_fading(&m, &mut r) == 1.0));
        let bad = FadingModel::GeneralTable { pmf: vec![(2.0, 1.0)] };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn link_rate_examples() {
        let p = phy(4.0);
        assert_eq!(link_rate(0.0, 1.0, &p).unwrap(), 0.0);
        let r1 = link_rate(1.0, 1.0, &p).unwrap();
        assert!((r1 - 1e6 * 101f64.log2()).abs() < 1e-3);
        assert!((r1 - 6.6582e6).abs() < 1e2);
        let r2 = link_rate(1.0, 2.0, &p).unwrap();
        assert!((r2 - 1e6 * (1.0f64 + 100.0 / 16.0).log2()).abs() < 1e-3);
        assert!((r2 - 2.8580e6).abs() < 1e3);
        assert!(matches!(link_rate(1.0, 0.0, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn connectivity_boundary_and_limits() {
        // Choose R equal to the link's achievable rate: the boundary counts as connected.
        let base = phy(4.0);
        let c = link_rate(1.3, 1.7, &base).unwrap();
        let mut exact = base;
        exact.rate = c;
        assert!(is_connected(1.3, 1.7, &exact).unwrap());
        assert!(!is_connected(0.0, 0.5, &base).unwrap());
        let huge = PhyParams::new(1e6, 1e30, 1.0, 4.0, 1e6, 5e-3).unwrap();
        assert!(is_connected(1e-3, 5.0, &huge).unwrap());
    }

    #[test]
    fn af_metric_examples() {
        assert_eq!(af_effective_snr(0.0, 0.7, 100.0), 0.0);
        assert!((af_effective_snr(0.01, 0.01, 100.0) - 1.0 / 3.0).abs() < 1e-15);
        let s = 1e9;
        let ratio = af_effective_snr(s, s, 100.0) / (100.0 * s);
        assert!((ratio - 0.5).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn rate_monotone(h in 0.01f64..10.0, d in 0.05f64..5.0, dh in 0.001f64..1.0, dd in 0.001f64..1.0) {
            let p = phy(110.0);
            prop_assert!(link_rate(h + dh, d, &p).unwrap() > link_rate(h, d, &p).unwrap());
            prop_assert!(link_rate(h, d + dd, &p).unwrap() < link_rate(h, d, &p).unwrap());
        }

        #[test]
        fn connected_iff_within_coverage(h in 0.01f64..10.0, d in 0.05f64..5.0, beta in 1.5f64..500.0) {
            let p = phy(beta);
            let cov = p.coverage_radius(h);
            // Away from the boundary the two formulations must agree.
            prop_assume!(((d - cov) / cov).abs() > 1e-9);
            prop_assert_eq!(is_connected(h, d, &p).unwrap(), d <= cov);
        }

        #[test]
        fn af_metric_below_either_hop(s1 in 0.0f64..10.0, s2 in 0.0f64..10.0, pw in 0.1f64..1e4) {
            let m = af_effective_snr(s1, s2, pw);
            prop_assert!(m <= pw * s1.min(s2) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn connection_probability_limits_and_determinism() {
        let g = DiskGeometry::new(2.5, 5).unwrap();
        let easy = PhyParams::new(1e6, 1e12, 1.0, 4.0, 1.0 + 1e-9, 5e-3).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let est =
            connection_probability_mc(&easy, &FadingModel::Rayleigh, &g, Endpoint::Source, 20_000, &mut r).unwrap();
        assert!(est.phi > 0.999);

        let p = phy(110.0);
        let run = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            connection_probability_mc(&p, &FadingModel::Rayleigh, &g, Endpoint::Destination, 50_000, &mut r).unwrap()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn connection_probability_ci_scales_with_root_n() {
        let g = DiskGeometry::new(2.5, 5).unwrap();
        let p = phy(110.0);
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let a = connection_probability_mc(&p, &FadingModel::Rayleigh, &g, Endpoint::Source, 100_000, &mut r).unwrap();
        let b = connection_probability_mc(&p, &FadingModel::Rayleigh, &g, Endpoint::Source, 400_000, &mut r).unwrap();
        let ratio = b.ci_width() / a.ci_width();
        assert!((ratio - 0.5).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn source_and_destination_are_symmetric() {
        let g = DiskGeometry::new(2.5, 5).unwrap();
        let p = phy(110.0);
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let s = connection_probability_mc(&p, &FadingModel::Rayleigh, &g, Endpoint::Source, 400_000, &mut r).unwrap();
        let d =
            connection_probability_mc(&p, &FadingModel::Rayleigh, &g, Endpoint::Destination, 400_000, &mut r).unwrap();
        assert!((s.phi - d.phi).abs() < s.ci_width() + d.ci_width());
        // Exact-geometry value from numerical quadrature of the lens area: 0.062030.
        assert!((s.phi - 0.062030).abs() < s.ci_width());
    }
}
