use super::{complete_delivery, FrameLinks, FrameOutcome, FrameRole, ServiceSample};
use crate::channel::{af_effective_snr, PhyParams};
use crate::traffic::{Buffers, PacketId};

/// Two-frame amplify-and-forward cycle: the source transmits while the
/// relays listen, then the selected relays amplify what they heard.
#[derive(Clone, Debug, PartialEq)]
pub struct AfState {
    selected: usize,
    heard: Option<PacketId>,
    source_gain: Vec<f64>,
    metric: Vec<f64>,
    rho: u64,
    eta: u64,
}

impl AfState {
    /// `selected` relays forward each cycle.
    pub fn new(selected: usize) -> Self {
        assert!(selected >= 1);
        Self { selected, heard: None, source_gain: Vec::new(), metric: Vec::new(), rho: 0, eta: 0 }
    }

    pub fn selected(&self) -> usize {
        self.selected
    }

    /// Whether the next frame is a forwarding frame.
    pub fn listening(&self) -> bool {
        self.heard.is_some()
    }
}

fn af_cycle<L: FrameLinks + ?Sized>(
    state: &mut AfState,
    links: &mut L,
    buffers: &mut Buffers,
    phy: &PhyParams,
) -> FrameOutcome {
    let k = links.relays();
    let Some(id) = state.heard.take() else {
        let Some(head) = buffers.source.head().copied() else {
            return FrameOutcome::idle();
        };
        state.rho += 1;
        state.heard = Some(head.id);
        state.source_gain.clear();
        state.source_gain.extend((0..k).map(|r| links.source_link(r).s));
        return FrameOutcome::with_role(FrameRole::Broadcast);
    };

    state.eta += 1;
    state.metric.clear();
    for r in 0..k {
        let m = af_effective_snr(state.source_gain[r], links.dest_link(r).s, phy.power);
        state.metric.push(m);
    }
    let mut order: Vec<usize> = (0..k).collect();
    let n = state.selected.min(k);
    if n < k {
        order.select_nth_unstable_by(n, |&a, &b| state.metric[b].total_cmp(&state.metric[a]).then(a.cmp(&b)));
        order.truncate(n);
    }
    order.sort_unstable();
    let snr: f64 = order.iter().map(|&r| state.metric[r]).sum();

    let mut out = FrameOutcome::with_role(FrameRole::RelayForward);
    out.forwarders.extend(order.iter().map(|&r| r as u32));
    if k > 0 && phy.supports(snr) {
        out.delivered = Some(complete_delivery(buffers, id, links.frame()));
        out.source_dequeued = true;
        out.service = Some(ServiceSample { rho: state.rho, eta: state.eta });
        state.rho = 0;
        state.eta = 0;
    }
    out
}

/// One AF frame with best-relay selection.
pub fn af_step<L: FrameLinks + ?Sized>(
    state: &mut AfState,
    links: &mut L,
    buffers: &mut Buffers,
    phy: &PhyParams,
) -> FrameOutcome {
    af_cycle(state, links, buffers, phy)
}

/// One AFSC frame: the best `state.selected()` relays forward and the
/// destination combines their end-to-end SNRs.
pub fn afsc_step<L: FrameLinks + ?Sized>(
    state: &mut AfState,
    links: &mut L,
    buffers: &mut Buffers,
    phy: &PhyParams,
) -> FrameOutcome {
    af_cycle(state, links, buffers, phy)
}
