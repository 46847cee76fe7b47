//! Frame-level relay protocols.
//!
//! Every protocol is a state machine advanced once per frame. A step sees the
//! frame's link draws through [`FrameLinks`], mutates the buffers and reports
//! what happened in a [`FrameOutcome`].

mod af;
mod df;
mod obdwf;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::channel::{LinkDraw, PhyParams};
use crate::traffic::{Buffers, Packet, PacketId};
use crate::{Error, Result};

pub use af::{af_step, afsc_step, AfState};
pub use df::{ddf_step, dfsc_step, DfPhase, DfState};
pub use obdwf::obdwf_step;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Opportunistic buffered decode-wait-and-forward.
    Obdwf,
    /// Conventional dynamic decode-and-forward.
    Ddf,
    /// Amplify-and-forward with best-relay selection.
    Af,
    /// Amplify-and-forward from the `n_a` best relays, combined at the destination.
    Afsc { n_a: usize },
    /// Decode-and-forward waiting for `n_d` decoders, combined at the destination.
    Dfsc { n_d: usize },
}

impl ProtocolKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolKind::Obdwf => "OBDWF",
            ProtocolKind::Ddf => "DDF",
            ProtocolKind::Af => "AF",
            ProtocolKind::Afsc { .. } => "AFSC",
            ProtocolKind::Dfsc { .. } => "DFSC",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProtocolKind::Afsc { n_a: 0 } | ProtocolKind::Dfsc { n_d: 0 } => {
                Err(Error::Config("spatial-combining relay count must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// The five protocols with the given combining sizes.
    pub fn all(n_a: usize, n_d: usize) -> [ProtocolKind; 5] {
        [
            ProtocolKind::Obdwf,
            ProtocolKind::Ddf,
            ProtocolKind::Af,
            ProtocolKind::Afsc { n_a },
            ProtocolKind::Dfsc { n_d },
        ]
    }

    /// Parses `OBDWF`, `DDF`, `AF`, `AFSC[:n]`, `DFSC[:n]` (case-insensitive).
    /// Combining sizes default to 5.
    pub fn parse(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (lower.as_str(), None),
        };
        let size = |a: Option<&str>| -> Result<usize> {
            a.map(|v| v.parse::<usize>().map_err(|_| Error::Config(format!("bad relay count in {s:?}"))))
                .unwrap_or(Ok(5))
        };
        let kind = match name {
            "obdwf" => ProtocolKind::Obdwf,
            "ddf" => ProtocolKind::Ddf,
            "af" => ProtocolKind::Af,
            "afsc" => ProtocolKind::Afsc { n_a: size(arg)? },
            "dfsc" => ProtocolKind::Dfsc { n_d: size(arg)? },
            _ => return Err(Error::Config(format!("unknown protocol {s:?}"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Link draws of one frame.
///
/// Implementations must return the same draw for repeated queries of one
/// link within a frame.
pub trait FrameLinks {
    fn frame(&self) -> u64;
    fn relays(&self) -> usize;
    fn source_link(&mut self, relay: usize) -> LinkDraw;
    fn dest_link(&mut self, relay: usize) -> LinkDraw;
    /// `None` when the direct source–destination link is disabled.
    fn direct_link(&mut self) -> Option<LinkDraw>;

    /// Whether `relay` decodes the source this frame. Must agree with
    /// `source_link(relay).connected(phy)`.
    fn source_connected(&mut self, relay: usize, phy: &PhyParams) -> bool {
        self.source_link(relay).connected(phy)
    }

    /// Whether `relay` reaches the destination this frame.
    fn dest_connected(&mut self, relay: usize, phy: &PhyParams) -> bool {
        self.dest_link(relay).connected(phy)
    }
}

/// Explicit per-link draws, mainly for driving protocols by hand.
#[derive(Clone, Debug)]
pub struct StaticLinks {
    pub frame: u64,
    pub source: Vec<LinkDraw>,
    pub dest: Vec<LinkDraw>,
    pub direct: Option<LinkDraw>,
}

impl FrameLinks for StaticLinks {
    fn frame(&self) -> u64 {
        self.frame
    }
    fn relays(&self) -> usize {
        self.source.len()
    }
    fn source_link(&mut self, relay: usize) -> LinkDraw {
        self.source[relay]
    }
    fn dest_link(&mut self, relay: usize) -> LinkDraw {
        self.dest[relay]
    }
    fn direct_link(&mut self) -> Option<LinkDraw> {
        self.direct
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameRole {
    Broadcast,
    RelayForward,
    Idle,
}

/// Frames a packet spent in source-to-relay (`rho`) and relay-to-destination
/// (`eta`) service.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ServiceSample {
    pub rho: u64,
    pub eta: u64,
}

impl ServiceSample {
    pub fn total(&self) -> u64 {
        self.rho + self.eta
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameOutcome {
    pub role: FrameRole,
    pub delivered: Option<Packet>,
    pub source_dequeued: bool,
    /// Relays that decoded the source broadcast this frame.
    pub decoded: SmallVec<[(u32, PacketId); 8]>,
    /// Relays that transmitted towards the destination this frame.
    pub forwarders: SmallVec<[u32; 8]>,
    /// Completed service of a delivered packet, for protocols that track it.
    pub service: Option<ServiceSample>,
}

impl FrameOutcome {
    pub fn idle() -> Self {
        Self::with_role(FrameRole::Idle)
    }

    fn with_role(role: FrameRole) -> Self {
        Self {
            role,
            delivered: None,
            source_dequeued: false,
            decoded: SmallVec::new(),
            forwarders: SmallVec::new(),
            service: None,
        }
    }
}

/// Uniform choice among contenders.
///
/// # Panics
/// If `contenders` is empty.
pub fn contention_select<R: Rng + ?Sized>(contenders: &[usize], rng: &mut R) -> usize {
    assert!(!contenders.is_empty(), "contention needs at least one contender");
    contenders[rng.gen_range(0..contenders.len())]
}

/// Removes a delivered packet from every buffer holding it and stamps its delivery frame.
fn complete_delivery(buffers: &mut Buffers, id: PacketId, frame: u64) -> Packet {
    let from_relays = buffers.relays.take(id).map(|(p, _)| p);
    let from_source = if buffers.source.head().is_some_and(|p| p.id == id) { buffers.source.dequeue() } else { None };
    let mut packet = from_source.or(from_relays).expect("delivered packet must be buffered somewhere");
    packet.delivery_frame = Some(frame);
    packet
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProtocolState {
    Obdwf,
    Ddf(DfState),
    Af(AfState),
    Afsc(AfState),
    Dfsc(DfState),
}

impl ProtocolState {
    pub fn new(kind: ProtocolKind) -> Self {
        match kind {
            ProtocolKind::Obdwf => ProtocolState::Obdwf,
            ProtocolKind::Ddf => ProtocolState::Ddf(DfState::new(1)),
            ProtocolKind::Af => ProtocolState::Af(AfState::new(1)),
            ProtocolKind::Afsc { n_a } => ProtocolState::Afsc(AfState::new(n_a)),
            ProtocolKind::Dfsc { n_d } => ProtocolState::Dfsc(DfState::new(n_d)),
        }
    }

    pub fn step<L, R>(&mut self, links: &mut L, buffers: &mut Buffers, phy: &PhyParams, rng: &mut R) -> FrameOutcome
    where
        L: FrameLinks + ?Sized,
        R: Rng + ?Sized,
    {
        match self {
            ProtocolState::Obdwf => obdwf_step(links, buffers, phy, rng),
            ProtocolState::Ddf(s) => ddf_step(s, links, buffers, phy, rng),
            ProtocolState::Af(s) => af_step(s, links, buffers, phy),
            ProtocolState::Afsc(s) => afsc_step(s, links, buffers, phy),
            ProtocolState::Dfsc(s) => dfsc_step(s, links, buffers, phy),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn contention_examples() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(contention_select(&[3], &mut r), 3);
        let set = [1, 2, 3, 4];
        let n = 100_000;
        let mut c = [0usize; 5];
        for _ in 0..n {
            c[contention_select(&set, &mut r)] += 1;
        }
        let sd = (0.25f64 * 0.75 / n as f64).sqrt();
        for &v in &c[1..] {
            assert!((v as f64 / n as f64 - 0.25).abs() < 3.0 * sd, "{c:?}");
        }
        let a = contention_select(&set, &mut ChaCha8Rng::seed_from_u64(9));
        let b = contention_select(&set, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    #[should_panic]
    fn contention_rejects_empty_set() {
        contention_select(&[], &mut ChaCha8Rng::seed_from_u64(1));
    }

    #[test]
    fn parse_protocols() {
        assert_eq!(ProtocolKind::parse("obdwf").unwrap(), ProtocolKind::Obdwf);
        assert_eq!(ProtocolKind::parse("AFSC").unwrap(), ProtocolKind::Afsc { n_a: 5 });
        assert_eq!(ProtocolKind::parse("dfsc:3").unwrap(), ProtocolKind::Dfsc { n_d: 3 });
        assert!(ProtocolKind::parse("dfsc:0").is_err());
        assert!(ProtocolKind::parse("cf").is_err());
    }
}
