//! Batch-arrival single-server queue with generally distributed service.
//!
//! Time is slotted. A batch arrives at the start of a frame, service may
//! start in the arrival frame, and a service of `X` frames started in frame
//! `t` completes at the end of frame `t + X - 1`. Delay counts frames from
//! arrival to completion inclusive.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::traffic::ArrivalDistribution;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ServiceMoments {
    /// Mean service frames.
    pub b: f64,
    /// Second moment of service frames.
    pub b2: f64,
}

impl ServiceMoments {
    pub fn new(b: f64, b2: f64) -> Result<Self> {
        if !(b >= 0.0 && b2 >= b * b * (1.0 - 1e-12)) {
            return Err(Error::Domain(format!("invalid service moments b={b}, b2={b2}")));
        }
        Ok(Self { b, b2 })
    }
}

/// Service-time law in frames (support `≥ 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ServiceLaw {
    Pmf {
        pmf: Vec<(u32, f64)>,
    },
    /// `Pr{X = k} = (1-p)^(k-1) p` for `k ≥ 1`.
    Geometric {
        p: f64,
    },
}

impl ServiceLaw {
    pub fn deterministic(frames: u32) -> Self {
        ServiceLaw::Pmf { pmf: vec![(frames, 1.0)] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ServiceLaw::Pmf { pmf } => {
                if pmf.is_empty() || pmf.iter().any(|&(x, p)| x == 0 || !(0.0..=1.0).contains(&p)) {
                    return Err(Error::Domain("service pmf needs positive support and probabilities in [0, 1]".into()));
                }
                let total: f64 = pmf.iter().map(|e| e.1).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("service pmf sums to {total}")));
                }
            }
            ServiceLaw::Geometric { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(Error::Domain(format!("geometric parameter must lie in (0, 1], got {p}")));
                }
            }
        }
        Ok(())
    }

    pub fn moments(&self) -> ServiceMoments {
        match self {
            ServiceLaw::Pmf { pmf } => {
                let b = pmf.iter().map(|&(x, p)| x as f64 * p).sum();
                let b2 = pmf.iter().map(|&(x, p)| (x as f64).powi(2) * p).sum();
                ServiceMoments { b, b2 }
            }
            ServiceLaw::Geometric { p } => ServiceMoments { b: 1.0 / p, b2: (2.0 - p) / (p * p) },
        }
    }

    pub fn pgf(&self, z: f64) -> f64 {
        match self {
            ServiceLaw::Pmf { pmf } => pmf.iter().map(|&(x, p)| p * z.powi(x as i32)).sum(),
            ServiceLaw::Geometric { p } => p * z / (1.0 - (1.0 - p) * z),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            ServiceLaw::Pmf { pmf } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for &(x, p) in pmf {
                    acc += p;
                    if u < acc {
                        return x as u64;
                    }
                }
                pmf.last().map(|e| e.0 as u64).unwrap_or(1)
            }
            ServiceLaw::Geometric { p } => {
                if *p >= 1.0 {
                    return 1;
                }
                let u = 1.0 - rng.gen::<f64>();
                ((u.ln() / (1.0 - p).ln()).ceil() as u64).max(1)
            }
        }
    }
}

/// Mean delay in frames (waiting plus service) for batch size moments
/// `λ = E[A]`, `λ₂ = E[A²]` and the given service moments.
pub fn mx_g1_wait(lambda: f64, lambda2: f64, m: ServiceMoments) -> Result<f64> {
    if lambda < 0.0 || lambda2 < 0.0 {
        return Err(Error::Domain(format!("arrival moments must be nonnegative: {lambda}, {lambda2}")));
    }
    if lambda == 0.0 {
        return Ok(m.b);
    }
    let load = lambda * m.b;
    if !(load < 1.0) {
        return Err(Error::Unstable(format!("λ·b = {load} is not below 1")));
    }
    let ServiceMoments { b, b2 } = m;
    let num = lambda * lambda * b2 - lambda * lambda * b - lambda * b + lambda2 * b;
    Ok(num / (2.0 * lambda * (1.0 - load)) + b)
}

/// Arrival and service probability generating functions of one queue.
#[derive(Clone, Debug, PartialEq)]
pub struct PgfSpec {
    pub arrivals: ArrivalDistribution,
    pub service: ServiceLaw,
}

impl PgfSpec {
    pub fn validate(&self) -> Result<()> {
        self.service.validate()?;
        let a1 = self.arrival_pgf(1.0);
        let b1 = self.service.pgf(1.0);
        if (a1 - 1.0).abs() > 1e-12 || (b1 - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("generating functions at 1: Λ = {a1}, B = {b1}")));
        }
        Ok(())
    }

    pub fn arrival_pgf(&self, z: f64) -> f64 {
        self.arrivals.pmf().iter().map(|&(n, p)| p * z.powi(n as i32)).sum()
    }

    /// Generating function of the number in system; undefined at `z = 1`.
    fn occupancy_pgf(&self, z: f64, load: f64) -> f64 {
        let bl = self.service.pgf(self.arrival_pgf(z));
        (1.0 - load) * (1.0 - z) * bl / (bl - z)
    }
}

const PGF_STEPS: [f64; 2] = [1e-4, 5e-5];

/// Mean delay from the occupancy generating function and Little's law.
///
/// The derivative at the removable singularity `z = 1` is taken by central
/// differences at `1 ± h`, extrapolated over the two step sizes.
pub fn pgf_mean_system(spec: &PgfSpec, lambda: f64) -> Result<f64> {
    spec.validate()?;
    let (mean, _) = spec.arrivals.moments();
    if (mean - lambda).abs() > 1e-9 * mean.max(1.0) {
        return Err(Error::Domain(format!("λ = {lambda} disagrees with the arrival pmf mean {mean}")));
    }
    if lambda == 0.0 {
        return Ok(spec.service.moments().b);
    }
    let load = lambda * spec.service.moments().b;
    if !(load < 1.0) {
        return Err(Error::Unstable(format!("λ·b = {load} is not below 1")));
    }
    let central = |h: f64| (spec.occupancy_pgf(1.0 + h, load) - spec.occupancy_pgf(1.0 - h, load)) / (2.0 * h);
    let [h1, h2] = PGF_STEPS;
    let (d1, d2) = (central(h1), central(h2));
    let ratio = (h1 / h2).powi(2);
    let n = (ratio * d2 - d1) / (ratio - 1.0);
    if !n.is_finite() || n < 0.0 {
        return Err(Error::Numerical(format!("occupancy derivative at 1 is {n} (central differences {d1}, {d2})")));
    }
    Ok(n / lambda)
}

/// Mean delay of the batch queue measured by direct simulation over `frames` frames.
///
/// Returns the mean over packets that arrived within the horizon, each
/// followed to completion.
pub fn simulate_batch_queue<R: Rng + ?Sized>(
    arrivals: &ArrivalDistribution,
    service: &ServiceLaw,
    frames: u64,
    rng: &mut R,
) -> BatchQueueStats {
    let mut last_finish: Option<u64> = None;
    let mut total = 0u128;
    let mut packets = 0u64;
    for t in 0..frames {
        let n = arrivals.sample(rng);
        for _ in 0..n {
            let start = match last_finish {
                Some(f) if f >= t => f + 1,
                _ => t,
            };
            let finish = start + service.sample(rng) - 1;
            last_finish = Some(finish);
            total += (finish - t + 1) as u128;
            packets += 1;
        }
    }
    BatchQueueStats { packets, mean_delay: if packets == 0 { f64::NAN } else { total as f64 / packets as f64 } }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchQueueStats {
    pub packets: u64,
    pub mean_delay: f64,
}
