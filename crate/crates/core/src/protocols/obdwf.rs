use rand::Rng;
use smallvec::SmallVec;

use super::{complete_delivery, contention_select, FrameLinks, FrameOutcome, FrameRole};
use crate::channel::PhyParams;
use crate::traffic::Buffers;

/// One OBDWF frame.
///
/// Non-empty relays with a usable destination link contend first; the
/// winner delivers its head-of-line packet, which every other relay then
/// discards. With no contender the source broadcasts its head packet and
/// each connected relay stores a copy. The source releases the packet once
/// some relay (or the destination over the direct link) has it.
pub fn obdwf_step<L, R>(links: &mut L, buffers: &mut Buffers, phy: &PhyParams, rng: &mut R) -> FrameOutcome
where
    L: FrameLinks + ?Sized,
    R: Rng + ?Sized,
{
    let frame = links.frame();
    let k = links.relays();

    let mut contenders: SmallVec<[usize; 16]> = SmallVec::new();
    for r in 0..k {
        if !buffers.relays.is_empty(r) && links.dest_connected(r, phy) {
            contenders.push(r);
        }
    }
    if !contenders.is_empty() {
        let winner = contention_select(&contenders, rng);
        let id = buffers.relays.head(winner).expect("contender has a packet");
        let mut out = FrameOutcome::with_role(FrameRole::RelayForward);
        out.forwarders.push(winner as u32);
        out.delivered = Some(complete_delivery(buffers, id, frame));
        return out;
    }

    let Some(head) = buffers.source.head().copied() else {
        return FrameOutcome::idle();
    };
    let mut out = FrameOutcome::with_role(FrameRole::Broadcast);
    let mut stored = false;
    for r in 0..k {
        if links.source_connected(r, phy) {
            out.decoded.push((r as u32, head.id));
            stored |= buffers.relays.enqueue(r, &head);
        }
    }
    let direct = links.direct_link().is_some_and(|l| l.connected(phy));
    if direct {
        out.delivered = Some(complete_delivery(buffers, head.id, frame));
        out.source_dequeued = true;
    } else if stored {
        buffers.source.dequeue();
        out.source_dequeued = true;
    }
    out
}
