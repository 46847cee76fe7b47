//! Built-in theory-versus-simulation checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use relaynet::analysis::{
    ddf_service_time_order, linear_fit, loglog_order_fit, mx_g1_wait, obdwf_throughput_bound, pgf_mean_system,
    simulate_batch_queue, PgfSpec, ServiceLaw,
};
use relaynet::channel::{connection_probability_mc, Endpoint, FadingModel, PhyParams};
use relaynet::engine::{infinite_backlog_run, RateRule, SimConfig};
use relaynet::geometry::{DiskGeometry, MobilityModel};
use relaynet::protocols::ProtocolKind;
use relaynet::traffic::ArrivalDistribution;

use crate::output::num;
use crate::Failure;

/// Deliberate errors used to confirm that each check can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Drops the batch-size variance term from the delay formula.
    Formula,
    /// Scales the connection probability by `sqrt(γ)`.
    Phi,
    /// Reverses the measured throughput sequence.
    Trend,
    /// Reverses the measured DDF service times along `γ`.
    Ddf,
    /// Halves the measured single-relay throughput.
    Alternation,
}

impl Fault {
    pub fn parse(s: &str) -> Result<Self, Failure> {
        Ok(match s {
            "formula" => Fault::Formula,
            "phi" => Fault::Phi,
            "trend" => Fault::Trend,
            "ddf" => Fault::Ddf,
            "alternation" => Fault::Alternation,
            _ => return Err(Failure::usage(format!("unknown fault {s:?}"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub target: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn failed(name: &'static str, target: &'static str, e: impl std::fmt::Display) -> Check {
    Check { name, measured: f64::NAN, target, pass: false, detail: format!("error: {e}") }
}

fn queue_formula(seed: u64, fault: Option<Fault>) -> Vec<Check> {
    let cases = [
        (vec![(15, 0.001), (0, 0.999)], ServiceLaw::Pmf { pmf: vec![(1, 0.5), (2, 0.3), (4, 0.2)] }),
        (vec![(1, 0.3), (0, 0.7)], ServiceLaw::deterministic(2)),
        (vec![(4, 0.05), (0, 0.95)], ServiceLaw::Geometric { p: 0.5 }),
    ];
    let (mut worst_sim, mut worst_pgf) = (0.0f64, 0.0f64);
    for (i, (pmf, service)) in cases.into_iter().enumerate() {
        let arrivals = match ArrivalDistribution::new(pmf) {
            Ok(a) => a,
            Err(e) => return vec![failed("queue_formula", "< 2e-2", e)],
        };
        let (l1, mut l2) = arrivals.moments();
        if fault == Some(Fault::Formula) {
            l2 = l1;
        }
        let formula = match mx_g1_wait(l1, l2, service.moments()) {
            Ok(v) => v,
            Err(e) => return vec![failed("queue_formula", "< 2e-2", e)],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let sim = simulate_batch_queue(&arrivals, &service, 2_000_000, &mut rng).mean_delay;
        let pgf = pgf_mean_system(&PgfSpec { arrivals, service }, l1).unwrap_or(f64::NAN);
        worst_sim = worst_sim.max((sim - formula).abs() / formula);
        worst_pgf = worst_pgf.max((pgf - formula).abs() / formula);
    }
    vec![
        Check {
            name: "queue_formula",
            measured: worst_sim,
            target: "< 2e-2",
            pass: worst_sim < 0.02,
            detail: "worst relative gap, closed form vs queue simulation".into(),
        },
        Check {
            name: "queue_pgf",
            measured: worst_pgf,
            target: "< 1e-6",
            pass: worst_pgf < 1e-6,
            detail: "worst relative gap, closed form vs generating function".into(),
        },
    ]
}

fn phi_slope(seed: u64, fault: Option<Fault>) -> Vec<Check> {
    let target = "-1 +/- 0.1";
    let geo = DiskGeometry::new(2.5, 5).expect("valid disk");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    for i in 0..4 {
        let gamma = 10f64.powf(1.0 + i as f64 / 3.0);
        let phy = match PhyParams::new(1e6, 100.0, 1.0, 4.0, gamma * gamma, 5e-3) {
            Ok(p) => p,
            Err(e) => return vec![failed("phi_slope", target, e)],
        };
        let est = connection_probability_mc(&phy, &FadingModel::Rayleigh, &geo, Endpoint::Source, 300_000, &mut rng);
        let mut phi = match est {
            Ok(e) => e.phi,
            Err(e) => return vec![failed("phi_slope", target, e)],
        };
        if fault == Some(Fault::Phi) {
            phi *= gamma.sqrt();
        }
        points.push((gamma, phi));
    }
    match loglog_order_fit(&points) {
        Ok(fit) => vec![Check {
            name: "phi_slope",
            measured: fit.slope,
            target,
            pass: (fit.slope + 1.0).abs() <= 0.1,
            detail: "log-log slope of connection probability over gamma in [10, 100]".into(),
        }],
        Err(e) => vec![failed("phi_slope", target, e)],
    }
}

fn small(k: usize) -> SimConfig {
    let mut c = SimConfig::reference();
    c.relays = k;
    c.horizon = 40_000;
    c.warmup = 4_000;
    c
}

fn obdwf_trend(seed: u64, fault: Option<Fault>) -> Vec<Check> {
    let target = "R^2 >= 0.95; increasing; below bound";
    let ks = [32usize, 64, 128];
    let mut ys = Vec::new();
    let mut below = true;
    for &k in &ks {
        let mut c = small(k);
        c.seed = seed;
        match infinite_backlog_run(&c) {
            Ok(m) => {
                below &= m.throughput <= obdwf_throughput_bound(k as f64, c.phy.bandwidth, c.phy.alpha);
                ys.push(m.throughput);
            }
            Err(e) => return vec![failed("obdwf_trend", target, e)],
        }
    }
    if fault == Some(Fault::Trend) {
        ys.reverse();
    }
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).log2()).collect();
    let increasing = ys.windows(2).all(|w| w[1] > w[0]);
    match linear_fit(&xs, &ys) {
        Ok(fit) => vec![Check {
            name: "obdwf_trend",
            measured: fit.r_squared,
            target,
            pass: fit.r_squared >= 0.95 && increasing && below,
            detail: format!("saturated OBDWF throughput vs log2 K, slope {:.4e}", fit.slope),
        }],
        Err(e) => vec![failed("obdwf_trend", target, e)],
    }
}

fn ddf_branches(seed: u64, fault: Option<Fault>) -> Vec<Check> {
    let k = 60usize;
    let m = 5;
    let betas = [4.0, 16.0, 64.0];
    let qs = [0.1, 0.5];
    let mut measured = [[0.0; 2]; 3];
    let mut theory = [[0.0; 2]; 3];
    let mut identity = true;
    for (i, &beta) in betas.iter().enumerate() {
        for (j, &q) in qs.iter().enumerate() {
            let mut c = small(k);
            c.seed = seed;
            c.protocol = ProtocolKind::Ddf;
            c.phy.rate = RateRule::Beta { beta };
            c.mobility = MobilityModel::RandomWalk { q };
            let run = match infinite_backlog_run(&c) {
                Ok(r) => r,
                Err(e) => return vec![failed("ddf_branches", "1", e)],
            };
            let Some(s) = run.service else {
                return vec![failed("ddf_branches", "1", "no service samples")];
            };
            identity &= s.count > 0 && s.total_sum == s.rho_sum + s.eta_sum;
            measured[i][j] = s.mean();
            theory[i][j] = ddf_service_time_order(k as f64, q, m, beta.powf(2.0 / c.phy.alpha));
        }
    }
    if fault == Some(Fault::Ddf) {
        measured.reverse();
    }
    // Along each axis, wherever the order changes the measurement must move
    // the same way.
    let (mut agree, mut total) = (0u32, 0u32);
    let mut compare = |a: (usize, usize), b: (usize, usize)| {
        let dt = theory[b.0][b.1] - theory[a.0][a.1];
        if dt.abs() > 1e-12 * theory[a.0][a.1].abs() {
            total += 1;
            let dm = measured[b.0][b.1] - measured[a.0][a.1];
            agree += (dm.signum() == dt.signum()) as u32;
        }
    };
    for j in 0..2 {
        compare((0, j), (1, j));
        compare((1, j), (2, j));
    }
    for i in 0..3 {
        compare((i, 0), (i, 1));
    }
    let fraction = if total == 0 { f64::NAN } else { agree as f64 / total as f64 };
    vec![
        Check {
            name: "ddf_branches",
            measured: fraction,
            target: "1",
            pass: fraction == 1.0,
            detail: format!("{agree} of {total} order changes matched by measured service time"),
        },
        Check {
            name: "ddf_identity",
            measured: identity as u8 as f64,
            target: "1",
            pass: identity,
            detail: "service frames equal broadcast plus forward frames".into(),
        },
    ]
}

fn alternation(seed: u64, fault: Option<Fault>) -> Vec<Check> {
    let mut c = SimConfig::reference();
    c.relays = 1;
    c.fading = FadingModel::GeneralTable { pmf: vec![(1.0, 1.0)] };
    c.phy.rate = RateRule::Beta { beta: 1.1 };
    c.direct_link = false;
    c.horizon = 20_000;
    c.warmup = 2_000;
    c.seed = seed;
    let single = c.phy_params().and_then(|p| Ok((p.rate, infinite_backlog_run(&c)?)));
    let mut out = Vec::new();
    match single {
        Ok((rate, m)) => {
            let mut ratio = m.throughput / rate;
            if fault == Some(Fault::Alternation) {
                ratio /= 2.0;
            }
            out.push(Check {
                name: "alternation_exact",
                measured: ratio,
                target: "0.5",
                pass: (ratio - 0.5).abs() <= 1e-9,
                detail: "single always-connected relay, throughput / R".into(),
            });
        }
        Err(e) => out.push(failed("alternation_exact", "0.5", e)),
    }

    let mut big = small(200);
    big.seed = seed;
    big.phy.rate = RateRule::Beta { beta: 4.0 };
    big.track_connectivity = true;
    big.horizon = 20_000;
    big.warmup = 2_000;
    match infinite_backlog_run(&big) {
        Ok(m) => {
            let conn = m.connectivity.map(|c| c.both_fraction()).unwrap_or(0.0);
            let bf = m.roles.broadcast_fraction();
            out.push(Check {
                name: "alternation_large_k",
                measured: bf,
                target: "0.5 +/- 0.01",
                pass: conn > 0.999 && (bf - 0.5).abs() <= 0.01,
                detail: format!("K=200 broadcast fraction, endpoint connectivity {conn:.5}"),
            });
        }
        Err(e) => out.push(failed("alternation_large_k", "0.5 +/- 0.01", e)),
    }
    out
}

type CheckFn = fn(u64, Option<Fault>) -> Vec<Check>;

pub fn run_suite(seed: u64, fault: Option<Fault>) -> Vec<Check> {
    let suite: [CheckFn; 5] = [queue_formula, phi_slope, obdwf_trend, ddf_branches, alternation];
    suite.par_iter().map(|f| f(seed, fault)).collect::<Vec<_>>().into_iter().flatten().collect()
}

pub fn report_csv(checks: &[Check]) -> String {
    let mut s = String::from("check,measured,target,pass\n");
    for c in checks {
        s.push_str(&format!("{},{},{},{}\n", c.name, num(c.measured), c.target, c.pass));
    }
    s
}

pub fn summary(checks: &[Check]) -> String {
    let passed = checks.iter().filter(|c| c.pass).count();
    let mut s = String::new();
    for c in checks {
        s.push_str(&format!(
            "{:4}  {:<20} measured {:<22} target {:<38} {}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            num(c.measured),
            c.target,
            c.detail
        ));
    }
    s.push_str(&format!("{passed} of {} checks passed\n", checks.len()));
    s
}
