//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line with
//! the measured values before asserting.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relaynet::analysis::{linear_fit, loglog_order_fit, mx_g1_wait, pgf_mean_system, PgfSpec, ServiceLaw};
use relaynet::channel::{connection_probability_mc, Endpoint, FadingModel, PhyParams};
use relaynet::engine::{infinite_backlog_run, max_stable_rate, run, ArrivalFamily, RateRule, RunMetrics, SimConfig};
use relaynet::geometry::{DiskGeometry, MobilityModel};
use relaynet::protocols::ProtocolKind;
use relaynet::traffic::ArrivalDistribution;

fn report(id: u32, name: &str, ok: bool, detail: String) {
    println!("criterion {id} {}: {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn base() -> SimConfig {
    let mut c = SimConfig::reference();
    c.horizon = 200_000;
    c.warmup = 20_000;
    c
}

/// Every simulation used below must keep the bookkeeping invariants.
fn clean(m: RunMetrics) -> RunMetrics {
    assert_eq!(m.conservation_violations, 0, "{:?} broke flow conservation", m.protocol);
    assert_eq!(m.dominance_violations, 0, "{:?} broke queue dominance", m.protocol);
    m
}

fn backlog(c: &SimConfig) -> RunMetrics {
    clean(infinite_backlog_run(c).unwrap())
}

fn spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::MIN, f64::max);
    let min = xs.iter().cloned().fold(f64::MAX, f64::min);
    (max - min) / (xs.iter().sum::<f64>() / xs.len() as f64)
}

// Criterion 1 ---------------------------------------------------------------

fn draw_pmf(pmf: &[(u32, f64)], rng: &mut ChaCha8Rng) -> u64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(x, p) in pmf {
        acc += p;
        if u < acc {
            return x as u64;
        }
    }
    pmf.last().unwrap().0 as u64
}

fn draw_service(law: &ServiceLaw, rng: &mut ChaCha8Rng) -> u64 {
    match law {
        ServiceLaw::Pmf { pmf } => draw_pmf(pmf, rng),
        // Count Bernoulli trials up to the first success.
        ServiceLaw::Geometric { p } => {
            let mut n = 1;
            while !rng.gen_bool(*p) {
                n += 1;
            }
            n
        }
    }
}

/// Frame-by-frame FIFO single-server queue. Batches join at the start of a
/// frame, an idle server picks up the head immediately, and a packet served
/// for `X` frames leaves at the end of its `X`-th frame. Returns the mean
/// number of frames from arrival to departure, inclusive.
fn oracle_delay(arrivals: &[(u32, f64)], service: &ServiceLaw, frames: u64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waiting: VecDeque<u64> = VecDeque::new();
    let mut busy: Option<(u64, u64)> = None;
    let (mut total, mut done) = (0u128, 0u64);
    let mut t = 0u64;
    while t < frames || busy.is_some() || !waiting.is_empty() {
        if t < frames {
            for _ in 0..draw_pmf(arrivals, &mut rng) {
                waiting.push_back(t);
            }
        }
        if busy.is_none() {
            if let Some(a) = waiting.pop_front() {
                busy = Some((a, draw_service(service, &mut rng)));
            }
        }
        if let Some((a, left)) = busy {
            if left == 1 {
                total += (t - a + 1) as u128;
                done += 1;
                busy = None;
            } else {
                busy = Some((a, left - 1));
            }
        }
        t += 1;
    }
    total as f64 / done as f64
}

#[test]
fn criterion_1_batch_queue_formula() {
    let pmf = |v: &[(u32, f64)]| ServiceLaw::Pmf { pmf: v.to_vec() };
    let cases: Vec<(Vec<(u32, f64)>, ServiceLaw)> = vec![
        (vec![(15, 0.001), (0, 0.999)], pmf(&[(1, 0.5), (2, 0.3), (4, 0.2)])),
        (vec![(15, 0.001), (0, 0.999)], ServiceLaw::Geometric { p: 0.25 }),
        (vec![(1, 0.3), (0, 0.7)], ServiceLaw::deterministic(2)),
        (vec![(1, 0.2), (3, 0.1), (0, 0.7)], pmf(&[(1, 0.6), (2, 0.4)])),
        (vec![(4, 0.05), (0, 0.95)], pmf(&[(1, 0.5), (3, 0.5)])),
        (vec![(1, 0.1), (0, 0.9)], pmf(&[(2, 0.5), (8, 0.5)])),
    ];
    let mut worst_sim = 0.0f64;
    let mut worst_pgf = 0.0f64;
    let mut lines = Vec::new();
    for (i, (arr, service)) in cases.iter().enumerate() {
        let dist = ArrivalDistribution::new(arr.clone()).unwrap();
        let (l1, l2) = dist.moments();
        let formula = mx_g1_wait(l1, l2, service.moments()).unwrap();
        let sim = oracle_delay(arr, service, 10_000_000, 100 + i as u64);
        let pgf = pgf_mean_system(&PgfSpec { arrivals: dist, service: service.clone() }, l1).unwrap();
        let e_sim = (sim - formula).abs() / formula;
        let e_pgf = (pgf - formula).abs() / formula;
        worst_sim = worst_sim.max(e_sim);
        worst_pgf = worst_pgf.max(e_pgf);
        lines.push(format!("case {i}: formula {formula:.5} sim {sim:.5} pgf {pgf:.8}"));
    }
    for l in &lines {
        println!("  {l}");
    }
    report(
        1,
        "batch-arrival queue delay",
        worst_sim < 0.02 && worst_pgf < 1e-6,
        format!(
            "{} cases, worst sim error {worst_sim:.2e} (< 2e-2), worst pgf error {worst_pgf:.2e} (< 1e-6)",
            cases.len()
        ),
    );
}

// Criterion 2 ---------------------------------------------------------------

#[test]
fn criterion_2_connection_probability_slope() {
    let geo = DiskGeometry::new(2.5, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut points = Vec::new();
    for i in 0..=5 {
        let gamma = 10f64.powf(1.0 + i as f64 / 5.0);
        // γ = β^(2/α) with α = 4.
        let phy = PhyParams::new(1e6, 100.0, 1.0, 4.0, gamma * gamma, 5e-3).unwrap();
        let est = connection_probability_mc(&phy, &FadingModel::Rayleigh, &geo, Endpoint::Source, 2_000_000, &mut rng)
            .unwrap();
        points.push((gamma, est.phi));
    }
    let fit = loglog_order_fit(&points).unwrap();
    let ok = (fit.slope + 1.0).abs() <= 0.1;
    report(
        2,
        "connection probability order in gamma",
        ok,
        format!("slope {:.4} ± {:.4} over gamma in [10, 100] (target -1 ± 0.1)", fit.slope, fit.stderr),
    );
}

// Criterion 3 ---------------------------------------------------------------

#[test]
fn criterion_3_obdwf_throughput_trend() {
    let ks = [32usize, 64, 128, 256];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut below_bound = true;
    for &k in &ks {
        let mut c = base();
        c.relays = k;
        c.phy.rate = RateRule::Sigma { sigma: 0.5 };
        let m = backlog(&c);
        let bound = c.phy.bandwidth * c.phy.alpha / 4.0 * (k as f64).log2();
        below_bound &= m.throughput <= bound;
        println!("  K={k}: throughput {:.6e} bound {bound:.6e}", m.throughput);
        xs.push((k as f64).log2());
        ys.push(m.throughput);
    }
    let monotone = ys.windows(2).all(|w| w[1] > w[0]);
    let fit = linear_fit(&xs, &ys).unwrap();
    report(
        3,
        "OBDWF throughput grows like log K",
        monotone && fit.r_squared >= 0.95 && below_bound,
        format!(
            "monotone {monotone}, R^2 {:.4} (>= 0.95), slope {:.4e} per log2 K, under bound {below_bound}",
            fit.r_squared, fit.slope
        ),
    );
}

// Criterion 4 ---------------------------------------------------------------

#[test]
fn criterion_4_mobility_sensitivity() {
    let qs = [0.1, 0.2, 0.5];
    let throughput = |p: ProtocolKind| -> Vec<f64> {
        qs.iter()
            .map(|&q| {
                let mut c = base();
                c.protocol = p;
                c.mobility = MobilityModel::RandomWalk { q };
                backlog(&c).throughput
            })
            .collect()
    };
    let obdwf = throughput(ProtocolKind::Obdwf);
    let ddf = throughput(ProtocolKind::Ddf);
    let (so, sd) = (spread(&obdwf), spread(&ddf));
    report(
        4,
        "OBDWF insensitive to q, DDF sensitive",
        so < 0.10 && sd > 0.25,
        format!("K=110, OBDWF {obdwf:?} spread {so:.4} (< 0.10); DDF {ddf:?} spread {sd:.4} (> 0.25)"),
    );
}

// Criterion 5 ---------------------------------------------------------------

#[test]
fn criterion_5_protocol_ordering() {
    let mut ok = true;
    for k in [60usize, 110, 160] {
        let mut thr = Vec::new();
        let mut brackets = Vec::new();
        for p in ProtocolKind::all(5, 5) {
            let mut c = base();
            c.relays = k;
            c.protocol = p;
            thr.push((p, backlog(&c).throughput));
            let b = max_stable_rate(&c, ArrivalFamily::Batch { size: 15 }, 0.0, 1.0, 0.01).unwrap();
            brackets.push((p, b.lambda_stable, b.lambda_unstable));
        }
        let (obdwf_thr, obdwf_lo) = (thr[0].1, brackets[0].1);
        for i in 1..thr.len() {
            let better = obdwf_thr > thr[i].1 && obdwf_lo > brackets[i].2;
            ok &= better;
            println!(
                "  K={k} {}: throughput {:.4e} vs OBDWF {obdwf_thr:.4e}; lambda* in [{:.4}, {:.4}] vs OBDWF >= {obdwf_lo:.4}",
                thr[i].0.name(),
                thr[i].1,
                brackets[i].1,
                brackets[i].2
            );
        }

        let mut c = base();
        c.relays = k;
        c.arrivals = ArrivalDistribution::batch(15, 0.015).unwrap();
        let m = clean(run(&c).unwrap());
        let stable = m.stable() == Some(true) && m.delay.mean.is_finite();
        println!("  K={k} OBDWF at lambda 0.015: mean delay {:.3} frames, stable {stable}", m.delay.mean);
        ok &= stable;
    }
    report(5, "OBDWF beats every baseline", ok, "throughput and lambda* at K in {60, 110, 160}".into());
}

// Criterion 6 ---------------------------------------------------------------

#[test]
fn criterion_6_alternation() {
    let mut c = SimConfig::reference();
    c.relays = 1;
    c.fading = FadingModel::GeneralTable { pmf: vec![(1.0, 1.0)] };
    c.phy.rate = RateRule::Beta { beta: 1.1 };
    c.direct_link = false;
    c.horizon = 20_000;
    c.warmup = 2_000;
    let r = c.phy_params().unwrap().rate;
    let m = backlog(&c);
    let exact = m.roles.broadcast == m.roles.relay_forward && (m.throughput - r / 2.0).abs() <= 1e-9 * r;
    let b = max_stable_rate(&c, ArrivalFamily::Bernoulli, 0.0, 1.0, 0.01).unwrap();

    let mut big = base();
    big.relays = 200;
    big.phy.rate = RateRule::Beta { beta: 4.0 };
    big.track_connectivity = true;
    big.horizon = 100_000;
    big.warmup = 10_000;
    let mb = backlog(&big);
    let conn = mb.connectivity.unwrap().both_fraction();
    let bf = mb.roles.broadcast_fraction();
    report(
        6,
        "broadcast and forward frames alternate",
        exact && b.contains(0.5) && conn > 0.999 && (bf - 0.5).abs() <= 0.01,
        format!(
            "K=1 throughput/R = {:.12}, lambda* in [{:.4}, {:.4}]; K=200 connectivity {conn:.5}, broadcast fraction {bf:.5}",
            m.throughput / r,
            b.lambda_stable,
            b.lambda_unstable
        ),
    );
}

// Criterion 7 ---------------------------------------------------------------

#[test]
fn criterion_7_ddf_service_decomposition() {
    let betas = [4.0, 16.0, 64.0];
    let qs = [0.1, 0.2, 0.5];
    let mut grid = [[0.0; 3]; 3];
    let mut identity = true;
    for (i, &beta) in betas.iter().enumerate() {
        for (j, &q) in qs.iter().enumerate() {
            let mut c = base();
            c.protocol = ProtocolKind::Ddf;
            c.phy.rate = RateRule::Beta { beta };
            c.mobility = MobilityModel::RandomWalk { q };
            let m = backlog(&c);
            let s = m.service.unwrap();
            // Both the phase split and the per-packet delays must add up.
            identity &= s.count > 0 && s.total_sum == s.rho_sum + s.eta_sum;
            identity &= m.delay.count == s.count && m.delay.sum + m.delay.count == s.total_sum;
            grid[i][j] = s.mean();
            println!("  beta={beta} q={q}: D_S {:.4} = rho {:.4} + eta {:.4}", s.mean(), s.mean_rho(), s.mean_eta());
        }
    }
    let up_in_gamma = (0..3).all(|j| grid[0][j] <= grid[1][j] && grid[1][j] <= grid[2][j]);
    let down_in_q = grid.iter().all(|row| row[0] >= row[1] && row[1] >= row[2]);
    report(
        7,
        "DDF service time split and monotonicity",
        identity && up_in_gamma && down_in_q,
        format!("identity {identity}, nondecreasing in gamma {up_in_gamma}, nonincreasing in q {down_in_q}"),
    );
}

// Criterion 8 ---------------------------------------------------------------

#[test]
fn criterion_8_engine_hygiene() {
    let mut configs = Vec::new();
    for p in ProtocolKind::all(3, 3) {
        let mut c = SimConfig::reference();
        c.relays = 30;
        c.protocol = p;
        c.horizon = 30_000;
        c.warmup = 3_000;
        c.arrivals = ArrivalDistribution::batch(15, 0.03).unwrap();
        configs.push(c.clone());
        c.source_capacity = Some(25);
        c.relay_capacity = Some(25);
        c.mobility = MobilityModel::RandomWaypoint { speed_min: 0.05, speed_max: 0.3, pause_set: vec![0, 5] };
        configs.push(c);
    }
    let (mut runs, mut identical, mut conservation, mut dominance) = (0, true, 0, 0);
    for c in &configs {
        for traffic_backlog in [false, true] {
            let go = || if traffic_backlog { infinite_backlog_run(c) } else { run(c) };
            let (a, b) = (go().unwrap(), go().unwrap());
            identical &= format!("{a:?}") == format!("{b:?}");
            conservation += a.conservation_violations;
            dominance += a.dominance_violations;
            runs += 1;
        }
    }
    report(
        8,
        "deterministic runs and bookkeeping invariants",
        identical && conservation == 0 && dominance == 0,
        format!("{runs} runs, bit-identical {identical}, conservation violations {conservation}, dominance violations {dominance}"),
    );
}
