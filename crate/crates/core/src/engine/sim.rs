use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stability::{assess_stability, StabilityVerdict, Trajectory, TrajectoryRecorder};
use super::SimConfig;
use crate::channel::{inverse_path_loss, FadingModel, LinkDraw, PhyParams};
use crate::geometry::{
    step_random_walk, step_waypoint, DiskGeometry, MobilityModel, Point, RelayPosition, WaypointState,
};
use crate::protocols::{FrameLinks, FrameOutcome, FrameRole, ProtocolKind, ProtocolState};
use crate::rng::{stream_rng, CounterRng, Stream};
use crate::traffic::{Buffers, Packet};
use crate::{Error, Result};

/// Frames between flow-conservation checks.
const CHECK_EVERY: u64 = 10_000;
const DIRECT_LINK_ID: u64 = u64::MAX;

/// Where packets come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Traffic {
    /// The configured arrival process.
    Arrivals,
    /// A fresh packet replaces the source's last one, so the source never empties.
    InfiniteBacklog,
}

/// Hook called after every protocol step.
pub trait FrameObserver {
    fn observe(&mut self, frame: u64, outcome: &FrameOutcome, buffers: &Buffers);
}

pub struct NoObserver;

impl FrameObserver for NoObserver {
    fn observe(&mut self, _: u64, _: &FrameOutcome, _: &Buffers) {}
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub count: u64,
    /// Sum of delays in frames.
    pub sum: u64,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: u64,
}

impl DelayStats {
    fn from_samples(mut d: Vec<u64>) -> Self {
        if d.is_empty() {
            return Self { mean: f64::NAN, p50: f64::NAN, p95: f64::NAN, p99: f64::NAN, ..Self::default() };
        }
        d.sort_unstable();
        let n = d.len();
        let rank = |p: f64| d[((p * n as f64).ceil() as usize).clamp(1, n) - 1] as f64;
        let sum: u64 = d.iter().sum();
        Self {
            count: n as u64,
            sum,
            mean: sum as f64 / n as f64,
            p50: rank(0.50),
            p95: rank(0.95),
            p99: rank(0.99),
            max: d[n - 1],
        }
    }
}

/// Source-to-relay (`rho`) and relay-to-destination (`eta`) frames of
/// delivered packets, for protocols that hold one packet at a time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ServiceStats {
    pub count: u64,
    pub rho_sum: u64,
    pub eta_sum: u64,
    pub total_sum: u64,
    pub total_sq_sum: u64,
}

impl ServiceStats {
    pub fn mean_rho(&self) -> f64 {
        self.rho_sum as f64 / self.count as f64
    }
    pub fn mean_eta(&self) -> f64 {
        self.eta_sum as f64 / self.count as f64
    }
    pub fn mean(&self) -> f64 {
        self.total_sum as f64 / self.count as f64
    }
    pub fn second_moment(&self) -> f64 {
        self.total_sq_sum as f64 / self.count as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleCounts {
    pub broadcast: u64,
    pub relay_forward: u64,
    pub idle: u64,
}

impl RoleCounts {
    pub fn total(&self) -> u64 {
        self.broadcast + self.relay_forward + self.idle
    }

    pub fn broadcast_fraction(&self) -> f64 {
        self.broadcast as f64 / self.total() as f64
    }
}

/// How often some relay could hear the source, and some relay could reach the destination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityStats {
    pub frames: u64,
    pub source_side: u64,
    pub dest_side: u64,
    pub both: u64,
}

impl ConnectivityStats {
    pub fn both_fraction(&self) -> f64 {
        self.both as f64 / self.frames as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub protocol: ProtocolKind,
    pub traffic: Traffic,
    pub seed: u64,
    pub relays: usize,
    pub frames: u64,
    /// Frames after warmup; all rates and means below refer to them.
    pub measured_frames: u64,
    pub packet_bits: f64,
    pub tau: f64,
    /// Delivered bits per second.
    pub throughput: f64,
    /// Throughput over the first and second half of the measured window.
    pub throughput_halves: (f64, f64),
    pub arrivals: u64,
    pub delivered: u64,
    pub delivered_measured: u64,
    pub in_system: u64,
    pub delay: DelayStats,
    pub source_queue: Trajectory,
    /// Total relay occupancy `Σ_k Q_k`.
    pub relay_queue: Trajectory,
    pub mean_source_queue: f64,
    pub mean_relay_queue: f64,
    pub max_relay_queue: u64,
    pub source_drops: u64,
    pub relay_drops: u64,
    pub service: Option<ServiceStats>,
    pub roles: RoleCounts,
    pub connectivity: Option<ConnectivityStats>,
    pub conservation_violations: u64,
    pub dominance_violations: u64,
    /// `None` under infinite backlog.
    pub stability: Option<StabilityVerdict>,
    pub relay_stability: Option<StabilityVerdict>,
}

impl RunMetrics {
    /// `false` only when a stability verdict exists and is negative.
    pub fn stable(&self) -> Option<bool> {
        self.stability.map(|v| v.stable)
    }

    /// Delivered packets per measured frame.
    pub fn delivery_rate(&self) -> f64 {
        self.delivered_measured as f64 / self.measured_frames as f64
    }
}

/// Per-run constants for the connectivity shortcut.
#[derive(Clone, Copy, Debug)]
struct LinkConsts {
    alpha: f64,
    /// Connected iff `H·d^-α ≥ snr_min`.
    snr_min: f64,
    rayleigh: bool,
}

impl LinkConsts {
    fn new(phy: &PhyParams, fading: &FadingModel) -> Self {
        Self {
            alpha: phy.alpha,
            snr_min: (phy.beta() - 1.0) / (phy.xi * phy.power),
            rayleigh: matches!(fading, FadingModel::Rayleigh),
        }
    }
}

/// Cached geometry of one hop.
#[derive(Clone, Copy, Debug, Default)]
struct Hop {
    d: f64,
    ipl: f64,
    /// Smallest fading gain that connects.
    h_min: f64,
    /// Rayleigh only: connected iff the uniform draw is at most this.
    u_max: f64,
}

impl Hop {
    fn new(d: f64, c: &LinkConsts) -> Self {
        let ipl = inverse_path_loss(d, c.alpha);
        let h_min = c.snr_min / ipl;
        let u_max = if c.rayleigh { (-h_min).exp() } else { 0.0 };
        Self { d, ipl, h_min, u_max }
    }
}

#[derive(Clone, Debug)]
struct Relay {
    pos: RelayPosition,
    waypoint: Option<WaypointState>,
    src: Hop,
    dst: Hop,
}

impl Relay {
    fn place(pos: RelayPosition, waypoint: Option<WaypointState>, geo: &DiskGeometry, c: &LinkConsts) -> Self {
        let mut r = Self { pos, waypoint, src: Hop::default(), dst: Hop::default() };
        r.refresh(geo, c);
        r
    }

    fn move_to(&mut self, pos: RelayPosition, geo: &DiskGeometry, c: &LinkConsts) {
        self.pos = pos;
        self.refresh(geo, c);
    }

    fn refresh(&mut self, geo: &DiskGeometry, c: &LinkConsts) {
        self.src = Hop::new(self.pos.point.distance(geo.source()), c);
        self.dst = Hop::new(self.pos.point.distance(geo.destination()), c);
    }
}

/// Channel draws of one frame, generated on first use from the counter RNG.
struct LazyLinks<'a> {
    frame: u64,
    counter: &'a CounterRng,
    relays: &'a [Relay],
    fading: &'a FadingModel,
    phy: &'a PhyParams,
    rayleigh: bool,
    direct: Option<(f64, f64)>,
}

impl LazyLinks<'_> {
    #[inline]
    fn draw(&self, link: u64, d: f64, ipl: f64) -> LinkDraw {
        let h = self.fading.gain_from_uniform(self.counter.uniform_at(self.frame, link));
        LinkDraw::with_path_gain(h, d, ipl, self.phy)
    }

    #[inline]
    fn hop_connected(&self, link: u64, hop: &Hop) -> bool {
        let u = self.counter.uniform_at(self.frame, link);
        if self.rayleigh {
            u <= hop.u_max
        } else {
            self.fading.gain_from_uniform(u) >= hop.h_min
        }
    }
}

impl FrameLinks for LazyLinks<'_> {
    fn frame(&self) -> u64 {
        self.frame
    }
    fn relays(&self) -> usize {
        self.relays.len()
    }
    #[inline]
    fn source_link(&mut self, relay: usize) -> LinkDraw {
        let h = &self.relays[relay].src;
        self.draw(2 * relay as u64, h.d, h.ipl)
    }
    #[inline]
    fn dest_link(&mut self, relay: usize) -> LinkDraw {
        let h = &self.relays[relay].dst;
        self.draw(2 * relay as u64 + 1, h.d, h.ipl)
    }
    fn direct_link(&mut self) -> Option<LinkDraw> {
        self.direct.map(|(d, ipl)| self.draw(DIRECT_LINK_ID, d, ipl))
    }
    #[inline]
    fn source_connected(&mut self, relay: usize, _phy: &PhyParams) -> bool {
        self.hop_connected(2 * relay as u64, &self.relays[relay].src)
    }
    #[inline]
    fn dest_connected(&mut self, relay: usize, _phy: &PhyParams) -> bool {
        self.hop_connected(2 * relay as u64 + 1, &self.relays[relay].dst)
    }
}

/// Simulates `config.horizon` frames with the configured arrivals.
pub fn run(config: &SimConfig) -> Result<RunMetrics> {
    run_with(config, Traffic::Arrivals, &mut NoObserver)
}

/// Simulates with a source that never runs out of packets.
pub fn infinite_backlog_run(config: &SimConfig) -> Result<RunMetrics> {
    run_with(config, Traffic::InfiniteBacklog, &mut NoObserver)
}

pub fn run_with(config: &SimConfig, traffic: Traffic, observer: &mut dyn FrameObserver) -> Result<RunMetrics> {
    config.validate()?;
    let phy = config.phy_params()?;
    let bits = config.bits_per_packet()?;
    let geo = DiskGeometry::new(config.radius, config.regions)?;
    let alpha = phy.alpha;
    let consts = LinkConsts::new(&phy, &config.fading);
    let k = config.relays;
    let m = config.regions;

    let counter = CounterRng::new(config.seed);
    let mut placement = stream_rng(config.seed, Stream::Placement);
    let mut mobility = stream_rng(config.seed, Stream::Mobility);
    let mut arrivals = stream_rng(config.seed, Stream::Arrivals);
    let mut contention = stream_rng(config.seed, Stream::Contention);

    let mut relays: Vec<Relay> = (0..k)
        .map(|_| {
            let pos = geo.sample_uniform_disk(&mut placement);
            let wp = match &config.mobility {
                MobilityModel::RandomWaypoint { speed_min, speed_max, .. } => {
                    Some(WaypointState::start(pos.point, &geo, *speed_min, *speed_max, &mut placement))
                }
                MobilityModel::RandomWalk { .. } => None,
            };
            Relay::place(pos, wp, &geo, &consts)
        })
        .collect();
    let direct = config.direct_link.then(|| {
        let d = geo.source().distance(geo.destination());
        (d, inverse_path_loss(d, alpha))
    });

    let mut buffers = Buffers::new(k, config.source_capacity, config.relay_capacity);
    let mut protocol = ProtocolState::new(config.protocol);
    let tracks_service = !matches!(config.protocol, ProtocolKind::Obdwf);

    let warmup = config.warmup;
    let horizon = config.horizon;
    let midpoint = warmup + (horizon - warmup) / 2;
    let mut next_id = 0u64;
    let mut arrivals_total = 0u64;
    let mut delivered_total = 0u64;
    let mut delivered_halves = [0u64; 2];
    let mut delays = Vec::new();
    let mut service = ServiceStats::default();
    let mut roles = RoleCounts::default();
    let mut conn = ConnectivityStats::default();
    let mut qs_sum = 0u64;
    let mut qr_sum = 0u64;
    let mut max_relay_queue = 0u64;
    let mut conservation_violations = 0u64;
    let mut dominance_violations = 0u64;
    let mut traj_s = TrajectoryRecorder::new(config.trajectory_stride);
    let mut traj_r = TrajectoryRecorder::new(config.trajectory_stride);

    let new_packet = |id: u64, t: u64| Packet { id, bits: bits.round() as u64, arrival_frame: t, delivery_frame: None };

    for t in 0..horizon {
        match traffic {
            Traffic::Arrivals => {
                let n = config.arrivals.sample(&mut arrivals);
                for _ in 0..n {
                    buffers.source.enqueue(new_packet(next_id, t));
                    next_id += 1;
                }
                arrivals_total += n as u64;
            }
            Traffic::InfiniteBacklog => {
                if buffers.source.is_empty() {
                    buffers.source.enqueue(new_packet(next_id, t));
                    next_id += 1;
                    arrivals_total += 1;
                }
            }
        }

        step_mobility(&mut relays, config, &geo, m, &consts, &mut mobility)?;

        let qs = buffers.source.len() as u64;
        let qr = buffers.relays.total_len() as u64;
        traj_s.push(qs as f64);
        traj_r.push(qr as f64);

        let mut links = LazyLinks {
            frame: t,
            counter: &counter,
            relays: &relays,
            fading: &config.fading,
            phy: &phy,
            rayleigh: consts.rayleigh,
            direct,
        };
        let measured = t >= warmup;
        if measured {
            qs_sum += qs;
            qr_sum += qr;
            if config.track_connectivity {
                let src = (0..k).any(|r| links.source_connected(r, &phy));
                let dst = (0..k).any(|r| links.dest_connected(r, &phy));
                conn.frames += 1;
                conn.source_side += src as u64;
                conn.dest_side += dst as u64;
                conn.both += (src && dst) as u64;
            }
        }
        let out = protocol.step(&mut links, &mut buffers, &phy, &mut contention);
        observer.observe(t, &out, &buffers);

        if let Some(p) = &out.delivered {
            delivered_total += 1;
            if measured {
                delivered_halves[(t >= midpoint) as usize] += 1;
                delays.push(p.delay().expect("delivered packets carry a delivery frame"));
            }
        }
        if measured {
            match out.role {
                FrameRole::Broadcast => roles.broadcast += 1,
                FrameRole::RelayForward => roles.relay_forward += 1,
                FrameRole::Idle => roles.idle += 1,
            }
            if let Some(s) = out.service {
                service.count += 1;
                service.rho_sum += s.rho;
                service.eta_sum += s.eta;
                service.total_sum += s.total();
                service.total_sq_sum += s.total() * s.total();
            }
        }

        if (t + 1) % CHECK_EVERY == 0 || t + 1 == horizon {
            let in_system = buffers.in_system() as u64;
            if arrivals_total != delivered_total + in_system + buffers.source.dropped() {
                conservation_violations += 1;
            }
            let largest = (0..k).map(|r| buffers.relays.len(r)).max().unwrap_or(0) as u64;
            max_relay_queue = max_relay_queue.max(largest);
            if largest > in_system {
                dominance_violations += 1;
            }
        }
    }

    let measured_frames = horizon - warmup;
    let tau = phy.tau;
    let delivered_measured = delivered_halves[0] + delivered_halves[1];
    let half = |n: u64, frames: u64| n as f64 * bits / (frames as f64 * tau);
    let source_queue = traj_s.finish();
    let relay_queue = traj_r.finish();
    let (stability, relay_stability) = match traffic {
        Traffic::Arrivals => (
            Some(assess_stability(&source_queue, warmup, &config.stability)?),
            Some(assess_stability(&relay_queue, warmup, &config.stability)?),
        ),
        Traffic::InfiniteBacklog => (None, None),
    };
    if let (Some(s), Some(r)) = (stability, relay_stability) {
        if s.stable && !r.stable && config.protocol == ProtocolKind::Obdwf {
            dominance_violations += 1;
        }
    }
    if conservation_violations > 0 {
        log::error!("flow conservation failed {conservation_violations} times (seed {})", config.seed);
    }

    Ok(RunMetrics {
        protocol: config.protocol,
        traffic,
        seed: config.seed,
        relays: k,
        frames: horizon,
        measured_frames,
        packet_bits: bits,
        tau,
        throughput: half(delivered_measured, measured_frames),
        throughput_halves: (
            half(delivered_halves[0], midpoint - warmup),
            half(delivered_halves[1], horizon - midpoint),
        ),
        arrivals: arrivals_total,
        delivered: delivered_total,
        delivered_measured,
        in_system: buffers.in_system() as u64,
        delay: DelayStats::from_samples(delays),
        source_queue,
        relay_queue,
        mean_source_queue: qs_sum as f64 / measured_frames as f64,
        mean_relay_queue: qr_sum as f64 / measured_frames as f64,
        max_relay_queue,
        source_drops: buffers.source.dropped(),
        relay_drops: buffers.relays.dropped(),
        service: tracks_service.then_some(service),
        roles,
        connectivity: config.track_connectivity.then_some(conn),
        conservation_violations,
        dominance_violations,
        stability,
        relay_stability,
    })
}

fn step_mobility<R: Rng + ?Sized>(
    relays: &mut [Relay],
    config: &SimConfig,
    geo: &DiskGeometry,
    m: usize,
    consts: &LinkConsts,
    rng: &mut R,
) -> Result<()> {
    match &config.mobility {
        MobilityModel::RandomWalk { q } => {
            for r in relays.iter_mut() {
                let next = step_random_walk(r.pos.region, *q, m, rng);
                if next != r.pos.region || config.resample_on_stay {
                    let pos = geo.sample_uniform_in_region(next, rng);
                    r.move_to(pos, geo, consts);
                }
            }
        }
        MobilityModel::RandomWaypoint { speed_min, speed_max, pause_set } => {
            for r in relays.iter_mut() {
                let wp = r.waypoint.as_mut().ok_or_else(|| Error::Config("relay lacks waypoint state".into()))?;
                let before: Point = wp.point;
                step_waypoint(wp, geo, *speed_min, *speed_max, pause_set, rng);
                if wp.point != before {
                    let point = wp.point;
                    let region = geo.region_of(point)?;
                    r.move_to(RelayPosition { region, point }, geo, consts);
                }
            }
        }
    }
    Ok(())
}
