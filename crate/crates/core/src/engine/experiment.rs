use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::{run_with, NoObserver, RunMetrics, Traffic};
use super::{RateRule, SimConfig};
use crate::geometry::MobilityModel;
use crate::protocols::ProtocolKind;
use crate::traffic::ArrivalDistribution;
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// `NaN` with fewer than two finite samples.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Finite samples that entered the summary.
    pub n: usize,
}

impl Summary {
    /// Mean and 95% normal confidence interval of the finite values.
    pub fn of(values: &[f64]) -> Self {
        let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        let n = v.len();
        if n == 0 {
            return Self { mean: f64::NAN, ci_low: f64::NAN, ci_high: f64::NAN, n };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, ci_low: f64::NAN, ci_high: f64::NAN, n };
        }
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let half = Z95 * (var / n as f64).sqrt();
        Self { mean, ci_low: mean - half, ci_high: mean + half, n }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Metric names reported by [`aggregate`], in output order.
pub const METRICS: [&str; 10] = [
    "throughput",
    "delay_mean",
    "delay_p95",
    "delay_p99",
    "source_queue_mean",
    "relay_queue_mean",
    "broadcast_fraction",
    "service_mean",
    "stable_fraction",
    "drops",
];

fn metric_value(m: &RunMetrics, name: &str) -> f64 {
    match name {
        "throughput" => m.throughput,
        "delay_mean" => m.delay.mean,
        "delay_p95" => m.delay.p95,
        "delay_p99" => m.delay.p99,
        "source_queue_mean" => m.mean_source_queue,
        "relay_queue_mean" => m.mean_relay_queue,
        "broadcast_fraction" => m.roles.broadcast_fraction(),
        "service_mean" => m.service.map(|s| s.mean()).unwrap_or(f64::NAN),
        "stable_fraction" => m.stable().map(|s| s as u8 as f64).unwrap_or(f64::NAN),
        "drops" => (m.source_drops + m.relay_drops) as f64,
        _ => unreachable!("unknown metric {name}"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replicated {
    pub protocol: ProtocolKind,
    pub seed_base: u64,
    pub n_reps: usize,
    pub metrics: BTreeMap<String, Summary>,
    /// Replications whose source queue was judged unstable.
    pub unstable_runs: usize,
    pub conservation_violations: u64,
    pub dominance_violations: u64,
}

impl Replicated {
    pub fn get(&self, metric: &str) -> Summary {
        self.metrics[metric]
    }
}

/// Combines finished replications; the result does not depend on their order
/// beyond floating-point summation.
pub fn aggregate(runs: &[RunMetrics]) -> Result<Replicated> {
    let first = runs.first().ok_or_else(|| Error::Config("nothing to aggregate".into()))?;
    let metrics = METRICS
        .iter()
        .map(|&name| {
            let v: Vec<f64> = runs.iter().map(|r| metric_value(r, name)).collect();
            (name.to_string(), Summary::of(&v))
        })
        .collect();
    Ok(Replicated {
        protocol: first.protocol,
        seed_base: runs.iter().map(|r| r.seed).min().unwrap_or(first.seed),
        n_reps: runs.len(),
        metrics,
        unstable_runs: runs.iter().filter(|r| r.stable() == Some(false)).count(),
        conservation_violations: runs.iter().map(|r| r.conservation_violations).sum(),
        dominance_violations: runs.iter().map(|r| r.dominance_violations).sum(),
    })
}

/// Runs `n_reps` independent replications with seeds `seed, seed+1, …`
/// in parallel on the current rayon pool, returned in seed order.
pub fn replicate_runs(config: &SimConfig, traffic: Traffic, n_reps: usize) -> Result<Vec<RunMetrics>> {
    if n_reps == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    config.validate()?;
    (0..n_reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(i);
            run_with(&c, traffic, &mut NoObserver)
        })
        .collect()
}

pub fn replicate(config: &SimConfig, traffic: Traffic, n_reps: usize) -> Result<Replicated> {
    aggregate(&replicate_runs(config, traffic, n_reps)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Relay count.
    K,
    /// Random-walk transition probability.
    Q,
    /// Mean arrival rate.
    LambdaS,
    /// `γ = β^(2/α)`; the rate is fixed through `β`.
    Gamma,
    /// Region count.
    M,
    Protocol,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "k" | "relays" => SweepAxis::K,
            "q" => SweepAxis::Q,
            "lambda_s" | "lambda" | "λ_s" => SweepAxis::LambdaS,
            "gamma" | "γ" => SweepAxis::Gamma,
            "m" | "regions" => SweepAxis::M,
            "protocol" => SweepAxis::Protocol,
            _ => return Err(Error::Config(format!("unknown sweep axis {s:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::K => "K",
            SweepAxis::Q => "q",
            SweepAxis::LambdaS => "lambda_s",
            SweepAxis::Gamma => "gamma",
            SweepAxis::M => "M",
            SweepAxis::Protocol => "protocol",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Num(f64),
    Protocol(ProtocolKind),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Num(v) => write!(f, "{v}"),
            SweepValue::Protocol(p) => f.write_str(p.name()),
        }
    }
}

/// Arrival processes indexed by their mean rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ArrivalFamily {
    Bernoulli,
    Batch { size: u32 },
}

impl ArrivalFamily {
    pub fn at(&self, lambda: f64) -> Result<ArrivalDistribution> {
        match *self {
            ArrivalFamily::Bernoulli => ArrivalDistribution::bernoulli(lambda),
            ArrivalFamily::Batch { size } => ArrivalDistribution::batch(size, lambda),
        }
    }

    /// The family of a two-point `{0, n}` pmf; anything else maps to Bernoulli.
    pub fn infer(dist: &ArrivalDistribution) -> Self {
        let support: Vec<u32> = dist.pmf().iter().filter(|e| e.1 > 0.0).map(|e| e.0).collect();
        match support.as_slice() {
            [n] | [n, 0] | [0, n] if *n > 1 => ArrivalFamily::Batch { size: *n },
            _ => ArrivalFamily::Bernoulli,
        }
    }
}

fn whole(v: f64, what: &str) -> Result<usize> {
    if v.fract() != 0.0 || v < 0.0 {
        return Err(Error::Config(format!("{what} must be a nonnegative integer, got {v}")));
    }
    Ok(v as usize)
}

/// `config` with one parameter replaced.
pub fn apply_axis(config: &SimConfig, axis: SweepAxis, value: SweepValue) -> Result<SimConfig> {
    let mut c = config.clone();
    let num = |v: SweepValue| match v {
        SweepValue::Num(x) => Ok(x),
        SweepValue::Protocol(_) => Err(Error::Config(format!("axis {} takes numbers", axis.name()))),
    };
    match axis {
        SweepAxis::K => c.relays = whole(num(value)?, "K")?,
        SweepAxis::M => c.regions = whole(num(value)?, "M")?,
        SweepAxis::Q => match &mut c.mobility {
            MobilityModel::RandomWalk { q } => *q = num(value)?,
            _ => return Err(Error::Config("the q axis needs random-walk mobility".into())),
        },
        SweepAxis::LambdaS => c.arrivals = ArrivalFamily::infer(&config.arrivals).at(num(value)?)?,
        SweepAxis::Gamma => {
            let beta = num(value)?.powf(c.phy.alpha / 2.0);
            c.phy.rate = RateRule::Beta { beta };
        }
        SweepAxis::Protocol => match value {
            SweepValue::Protocol(p) => c.protocol = p,
            SweepValue::Num(_) => return Err(Error::Config("the protocol axis takes protocol names".into())),
        },
    }
    c.validate()?;
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: SweepValue,
    pub result: Replicated,
}

/// One [`replicate`] per value, all with the same base seed.
pub fn sweep(
    base: &SimConfig,
    axis: SweepAxis,
    values: &[SweepValue],
    traffic: Traffic,
    n_reps: usize,
) -> Result<Vec<SweepRow>> {
    let configs = values.iter().map(|&v| apply_axis(base, axis, v)).collect::<Result<Vec<_>>>()?;
    configs
        .iter()
        .zip(values)
        .map(|(c, &value)| Ok(SweepRow { value, result: replicate(c, traffic, n_reps)? }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableRateBracket {
    /// Largest rate judged stable (the lower bound if none was).
    pub lambda_stable: f64,
    /// Smallest rate judged unstable (the upper bound if none was).
    pub lambda_unstable: f64,
    /// Every evaluated `(λ, stable)` pair in order.
    pub evaluations: Vec<(f64, bool)>,
}

impl StableRateBracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lambda_stable + self.lambda_unstable)
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.lambda_stable <= lambda && lambda <= self.lambda_unstable
    }
}

/// Bisects the arrival rate between `lo` (taken as stable) and `hi` (taken
/// as unstable) until the bracket is no wider than `resolution`. At least
/// one midpoint is always evaluated. All evaluations share the config seed.
pub fn max_stable_rate(
    config: &SimConfig,
    family: ArrivalFamily,
    lo: f64,
    hi: f64,
    resolution: f64,
) -> Result<StableRateBracket> {
    if !(0.0 <= lo && lo < hi) {
        return Err(Error::Config(format!("rate bounds need 0 <= lo < hi, got [{lo}, {hi}]")));
    }
    if !(resolution > 0.0) {
        return Err(Error::Config(format!("resolution must be positive, got {resolution}")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut evaluations = Vec::new();
    loop {
        let mid = 0.5 * (a + b);
        let mut c = config.clone();
        c.arrivals = family.at(mid)?;
        let m = run_with(&c, Traffic::Arrivals, &mut NoObserver)?;
        let stable = m.stable().expect("arrival runs carry a verdict");
        log::debug!("λ = {mid}: {}", if stable { "stable" } else { "unstable" });
        evaluations.push((mid, stable));
        if stable {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= resolution {
            break;
        }
    }
    Ok(StableRateBracket { lambda_stable: a, lambda_unstable: b, evaluations })
}
