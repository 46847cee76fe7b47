use rand::Rng;
use smallvec::SmallVec;

use super::{complete_delivery, contention_select, FrameLinks, FrameOutcome, FrameRole, ServiceSample};
use crate::channel::PhyParams;
use crate::traffic::{Buffers, PacketId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DfPhase {
    /// The source repeats its head packet until enough relays decode it.
    Broadcast,
    /// Relays holding the packet try to reach the destination.
    Forward,
}

/// Per-packet state of the unbuffered decode-and-forward baselines.
///
/// The packet in service stays at the head of the source queue until it is
/// delivered, so the source is blocked for the whole service time.
#[derive(Clone, Debug, PartialEq)]
pub struct DfState {
    phase: DfPhase,
    required: usize,
    packet: Option<PacketId>,
    holders: SmallVec<[u32; 16]>,
    rho: u64,
    eta: u64,
}

impl DfState {
    /// `required` relays must decode before forwarding starts.
    pub fn new(required: usize) -> Self {
        assert!(required >= 1);
        Self { phase: DfPhase::Broadcast, required, packet: None, holders: SmallVec::new(), rho: 0, eta: 0 }
    }

    pub fn phase(&self) -> DfPhase {
        self.phase
    }

    pub fn required(&self) -> usize {
        self.required
    }

    /// Relays that decoded the packet in service, in decoding order.
    pub fn holders(&self) -> &[u32] {
        &self.holders
    }

    fn finish(&mut self) -> ServiceSample {
        let s = ServiceSample { rho: self.rho, eta: self.eta };
        self.phase = DfPhase::Broadcast;
        self.packet = None;
        self.holders.clear();
        self.rho = 0;
        self.eta = 0;
        s
    }

    fn broadcast<L: FrameLinks + ?Sized>(
        &mut self,
        links: &mut L,
        buffers: &mut Buffers,
        phy: &PhyParams,
    ) -> FrameOutcome {
        let Some(head) = buffers.source.head().copied() else {
            return FrameOutcome::idle();
        };
        if self.packet != Some(head.id) {
            self.packet = Some(head.id);
            self.holders.clear();
            self.rho = 0;
            self.eta = 0;
        }
        self.rho += 1;
        let mut out = FrameOutcome::with_role(FrameRole::Broadcast);
        for r in 0..links.relays() {
            if buffers.relays.holds(r, head.id) || !links.source_connected(r, phy) {
                continue;
            }
            if buffers.relays.enqueue(r, &head) {
                self.holders.push(r as u32);
                out.decoded.push((r as u32, head.id));
            }
        }
        if links.direct_link().is_some_and(|l| l.connected(phy)) {
            out.delivered = Some(complete_delivery(buffers, head.id, links.frame()));
            out.source_dequeued = true;
            out.service = Some(self.finish());
        } else if self.holders.len() >= self.required {
            self.phase = DfPhase::Forward;
        }
        out
    }

    fn deliver(&mut self, out: &mut FrameOutcome, buffers: &mut Buffers, frame: u64) {
        let id = self.packet.expect("forward phase has a packet");
        out.delivered = Some(complete_delivery(buffers, id, frame));
        out.source_dequeued = true;
        out.service = Some(self.finish());
    }
}

/// One DDF frame: a single decoding relay suffices, and in the forward phase
/// one destination-connected holder (chosen by contention) delivers.
pub fn ddf_step<L, R>(
    state: &mut DfState,
    links: &mut L,
    buffers: &mut Buffers,
    phy: &PhyParams,
    rng: &mut R,
) -> FrameOutcome
where
    L: FrameLinks + ?Sized,
    R: Rng + ?Sized,
{
    if state.phase == DfPhase::Broadcast {
        return state.broadcast(links, buffers, phy);
    }
    debug_assert!(!state.holders.is_empty());
    state.eta += 1;
    let ready: SmallVec<[usize; 16]> =
        state.holders.iter().map(|&r| r as usize).filter(|&r| links.dest_connected(r, phy)).collect();
    if ready.is_empty() {
        return FrameOutcome::idle();
    }
    let winner = contention_select(&ready, rng);
    let mut out = FrameOutcome::with_role(FrameRole::RelayForward);
    out.forwarders.push(winner as u32);
    state.deliver(&mut out, buffers, links.frame());
    out
}

/// One DFSC frame: forwarding starts once `required` relays decode, and then
/// every relay holding the packet transmits each forward frame; the
/// destination succeeds when their summed SNR supports the target rate.
pub fn dfsc_step<L>(state: &mut DfState, links: &mut L, buffers: &mut Buffers, phy: &PhyParams) -> FrameOutcome
where
    L: FrameLinks + ?Sized,
{
    if state.phase == DfPhase::Broadcast {
        return state.broadcast(links, buffers, phy);
    }
    state.eta += 1;
    let mut out = FrameOutcome::with_role(FrameRole::RelayForward);
    let mut snr = 0.0;
    for &r in &state.holders {
        snr += links.dest_link(r as usize).snr(phy);
        out.forwarders.push(r);
    }
    if phy.supports(snr) {
        state.deliver(&mut out, buffers, links.frame());
    }
    out
}
