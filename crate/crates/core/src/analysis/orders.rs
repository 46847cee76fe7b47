//! Scaling-order calculators.
//!
//! Each order expression is evaluated with multiplicative constant 1, and
//! asymptotic regime conditions are decided by comparing the finite ratio
//! with 1. The values are meant for trends and slopes, not absolute levels.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderParams {
    pub k: f64,
    pub q: f64,
    pub m: usize,
    pub gamma: f64,
    pub w: f64,
    pub alpha: f64,
    /// Rate exponent: `γ = K^σ`.
    pub sigma: f64,
}

impl OrderParams {
    /// Parameters with `γ = K^σ`.
    pub fn with_sigma(k: f64, q: f64, m: usize, sigma: f64, w: f64, alpha: f64) -> Result<Self> {
        let p = Self { k, q, m, gamma: k.powf(sigma), w, alpha, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.k, self.q, self.gamma, self.w, self.alpha, self.sigma];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.m == 0 {
            return Err(Error::Domain(format!("order parameters must be positive: {self:?}")));
        }
        if self.q > 0.5 {
            return Err(Error::Domain(format!("q must be at most 1/2, got {}", self.q)));
        }
        if self.sigma > 1.0 {
            return Err(Error::Domain(format!("σ must lie in (0, 1], got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn zeta(&self) -> f64 {
        zeta_order(self.k, self.gamma)
    }

    pub fn ddf_service_time(&self) -> f64 {
        ddf_service_time_order(self.k, self.q, self.m, self.gamma)
    }
}

/// Mean frames for the source to hand one packet to the relay network.
pub fn zeta_order(k: f64, gamma: f64) -> f64 {
    (gamma / k).max(1.0)
}

/// Which of the four regimes of the DDF relay-to-destination time applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DdfCase {
    /// `γ/K < 1`, `K/(qγ²) ≥ 1`.
    SparseSlow,
    /// `γ/K < 1`, `K/(qγ²) < 1`.
    SparseFast,
    /// `γ/K ≥ 1`, `1/(qγ) ≥ 1`.
    DenseSlow,
    /// `γ/K ≥ 1`, `1/(qγ) < 1`.
    DenseFast,
}

pub fn ddf_case(k: f64, q: f64, gamma: f64) -> DdfCase {
    if gamma / k < 1.0 {
        if k / (q * gamma * gamma) >= 1.0 {
            DdfCase::SparseSlow
        } else {
            DdfCase::SparseFast
        }
    } else if 1.0 / (q * gamma) >= 1.0 {
        DdfCase::DenseSlow
    } else {
        DdfCase::DenseFast
    }
}

/// Mean frames `η̄` a decoded packet waits for a holding relay to reach the destination.
pub fn ddf_forward_time_order(k: f64, q: f64, m: usize, gamma: f64) -> f64 {
    let mf = m as f64;
    let qm = q.powi(m as i32 - 1);
    match ddf_case(k, q, gamma) {
        DdfCase::SparseSlow => (gamma * gamma / (k * qm)).powf(1.0 / mf).max(1.0),
        DdfCase::SparseFast => gamma * gamma / k,
        DdfCase::DenseSlow => (gamma / qm).powf(1.0 / mf),
        DdfCase::DenseFast => gamma,
    }
}

/// Mean DDF service frames `D̄_S = max(ρ̄, η̄)` with `ρ̄ = max(1, γ/K)`.
pub fn ddf_service_time_order(k: f64, q: f64, m: usize, gamma: f64) -> f64 {
    zeta_order(k, gamma).max(ddf_forward_time_order(k, q, m, gamma))
}

/// OBDWF throughput ceiling in bits/s.
pub fn obdwf_throughput_bound(k: f64, w: f64, alpha: f64) -> f64 {
    w * alpha / 4.0 * k.log2()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DdfThroughputOrder {
    pub value: f64,
    /// Rate parameter maximising the DDF throughput.
    pub gamma_opt: f64,
}

pub fn ddf_throughput_order(k: f64, q: f64, m: usize) -> DdfThroughputOrder {
    let x = k * q.powi(m as i32 - 1);
    let power = x.powf(1.0 / m as f64);
    let value = if x > 1.0 { power.min(x.log2()) } else { power };
    DdfThroughputOrder { value, gamma_opt: x.sqrt().max(1.0) }
}

fn check_stable(load: f64) -> Result<()> {
    if !(load < 1.0) {
        return Err(Error::Unstable(format!("offered load {load} is not below 1")));
    }
    Ok(())
}

/// OBDWF mean delay order in frames.
pub fn obdwf_delay_order(p: &OrderParams, lambda: f64, lambda2: f64) -> Result<f64> {
    let zeta = p.zeta();
    check_stable(lambda * zeta)?;
    let queue = lambda2 * zeta / (lambda * (1.0 - lambda * zeta));
    Ok(queue.max(p.ddf_service_time()))
}

/// DDF mean delay order in frames.
pub fn ddf_delay_order(p: &OrderParams, lambda: f64, lambda2: f64) -> Result<f64> {
    let ds = p.ddf_service_time();
    check_stable(lambda * ds)?;
    Ok(lambda2 * ds / (lambda * (1.0 - lambda * ds)))
}

/// Ratio of the maximum stable arrival rates of OBDWF and DDF.
pub fn stability_gain_order(p: &OrderParams) -> f64 {
    p.ddf_service_time() / p.zeta()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta_order(100.0, 10.0), 1.0);
        assert_eq!(zeta_order(100.0, 1000.0), 10.0);
        assert_eq!(zeta_order(50.0, 50.0), 1.0);
    }

    #[test]
    fn service_time_examples() {
        let v = ddf_service_time_order(1e4, 0.2, 5, 10.0);
        assert_eq!(ddf_case(1e4, 0.2, 10.0), DdfCase::SparseSlow);
        assert!(close(v, 6.25f64.powf(0.2), 1e-12) && close(v, 1.443, 1e-3), "{v}");
        assert_eq!(ddf_case(100.0, 0.5, 200.0), DdfCase::DenseFast);
        assert_eq!(ddf_service_time_order(100.0, 0.5, 5, 200.0), 200.0);
        for k in [16.0, 17.0, 100.0, 1e6] {
            assert_eq!(ddf_service_time_order(k, 0.5, 5, 1.0), 1.0);
        }
        // Below K·q^(M-1) = 1 the floor is exceeded.
        assert!(ddf_service_time_order(2.0, 0.5, 5, 1.0) > 1.0);
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(obdwf_throughput_bound(2.0, 1.0, 4.0), 1.0);
        assert!(close(obdwf_throughput_bound(110.0, 1e6, 4.0), 6.781e6, 1e-4));
        let d = obdwf_throughput_bound(220.0, 3.0, 3.0) - obdwf_throughput_bound(110.0, 3.0, 3.0);
        assert!(close(d, 2.25, 1e-12));

        let o = ddf_throughput_order(110.0, 0.2, 5);
        assert!(close(o.value, 0.176f64.powf(0.2), 1e-4) && close(o.value, 0.707, 1e-3));
        assert_eq!(o.gamma_opt, 1.0);
        let o = ddf_throughput_order(1e6, 0.5, 2);
        assert!(close(o.value, 5e5f64.log2(), 1e-12) && close(o.value, 18.93, 1e-3));
        assert!(close(o.gamma_opt, 5e5f64.sqrt(), 1e-12));
    }

    #[test]
    fn delay_examples() {
        let p = OrderParams { k: 1e4, q: 0.2, m: 5, gamma: 10.0, w: 1.0, alpha: 4.0, sigma: 0.25 };
        let d = obdwf_delay_order(&p, 0.015, 0.225).unwrap();
        assert!(close(d, 0.225 / (0.015 * 0.985), 1e-12) && close(d, 15.23, 1e-3));
        let d = ddf_delay_order(&p, 0.015, 0.225).unwrap();
        assert!(close(d, 22.1, 2e-3), "{d}");
        assert!(matches!(ddf_delay_order(&p, 0.7, 0.7), Err(Error::Unstable(_))));
        assert!(obdwf_delay_order(&p, 0.7, 0.7).is_ok());
        // Vanishing load leaves the service term.
        let d = obdwf_delay_order(&p, 1e-9, 1e-9).unwrap();
        assert!(close(d, p.ddf_service_time(), 1e-9));
    }

    #[test]
    fn stability_gain_examples() {
        for k in [10.0, 100.0, 1000.0] {
            let p = OrderParams { k, q: 0.5, m: 5, gamma: k, w: 1.0, alpha: 4.0, sigma: 1.0 };
            assert!(close(stability_gain_order(&p), k, 1e-12));
        }
        let p = OrderParams { k: 100.0, q: 0.5, m: 5, gamma: 1.0, w: 1.0, alpha: 4.0, sigma: 1e-9 };
        assert_eq!(stability_gain_order(&p), 1.0);
        let p = OrderParams { k: 1e4, q: 0.2, m: 5, gamma: 10.0, w: 1.0, alpha: 4.0, sigma: 0.25 };
        assert!(close(stability_gain_order(&p), 1.443, 1e-3));
    }

    #[test]
    fn branches_agree_at_boundaries() {
        // γ = K: the sparse and dense formulas meet.
        for (k, q) in [(50.0, 0.1), (400.0, 0.3), (7.0, 0.5)] {
            let below = ddf_service_time_order(k, q, 5, k * (1.0 - 1e-12));
            let at = ddf_service_time_order(k, q, 5, k);
            assert!(close(below, at, 1e-9), "{k} {q}: {below} vs {at}");
        }
        // K = qγ² inside the sparse regime, and qγ = 1 inside the dense one.
        let (k, q) = (1e4f64, 0.25f64);
        let g = (k / q).sqrt();
        let a = ddf_service_time_order(k, q, 5, g * (1.0 - 1e-12));
        let b = ddf_service_time_order(k, q, 5, g);
        assert!(close(a, b, 1e-9), "{a} vs {b}");
        let (k, q) = (2.0, 0.2);
        let a = ddf_service_time_order(k, q, 4, 5.0 * (1.0 - 1e-12));
        let b = ddf_service_time_order(k, q, 4, 5.0);
        assert!(close(a, b, 1e-9), "{a} vs {b}");
    }

    proptest! {
        #[test]
        fn service_time_monotone(
            k in 1.0f64..1e5,
            g1 in 1.0f64..1e4,
            g2 in 1.0f64..1e4,
            q1 in 0.01f64..0.5,
            q2 in 0.01f64..0.5,
            m in 2usize..8,
        ) {
            let (gl, gh) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let (ql, qh) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            let tol = 1e-9;
            prop_assert!(ddf_service_time_order(k, ql, m, gl) <= ddf_service_time_order(k, ql, m, gh) * (1.0 + tol));
            prop_assert!(ddf_service_time_order(k, qh, m, gl) <= ddf_service_time_order(k, ql, m, gl) * (1.0 + tol));
            prop_assert!(ddf_service_time_order(k, ql, m, gl) >= 1.0);
        }

        #[test]
        fn obdwf_delay_never_exceeds_ddf_queue_term(k in 2.0f64..1e4, g in 1.0f64..1e3, q in 0.01f64..0.5, lam in 1e-4f64..0.5) {
            let p = OrderParams { k, q, m: 5, gamma: g, w: 1.0, alpha: 4.0, sigma: 1.0 };
            if let Ok(ddf) = ddf_delay_order(&p, lam, lam) {
                let ob = obdwf_delay_order(&p, lam, lam).unwrap();
                prop_assert!(ob <= ddf.max(p.ddf_service_time()) * (1.0 + 1e-9));
            }
        }
    }
}
