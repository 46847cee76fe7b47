//! Bursty arrivals, packet records and the source/relay buffers.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::{Error, Result};

pub type PacketId = u64;

/// Per-frame batch-size distribution of the source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, f64)>", into = "Vec<(u32, f64)>")]
pub struct ArrivalDistribution {
    /// `(batch size, probability)` pairs.
    pmf: Vec<(u32, f64)>,
    cdf: Vec<f64>,
}

impl TryFrom<Vec<(u32, f64)>> for ArrivalDistribution {
    type Error = Error;
    fn try_from(pmf: Vec<(u32, f64)>) -> Result<Self> {
        Self::new(pmf)
    }
}

impl From<ArrivalDistribution> for Vec<(u32, f64)> {
    fn from(d: ArrivalDistribution) -> Self {
        d.pmf
    }
}

impl ArrivalDistribution {
    pub fn new(pmf: Vec<(u32, f64)>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::Config("arrival pmf is empty".into()));
        }
        if pmf.iter().any(|&(_, p)| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Config("arrival probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = pmf.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("arrival probabilities sum to {total}")));
        }
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|&(_, p)| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { pmf, cdf })
    }

    /// `{1: λ, 0: 1 − λ}`.
    pub fn bernoulli(lambda: f64) -> Result<Self> {
        Self::new(vec![(1, lambda), (0, 1.0 - lambda)])
    }

    /// Batches of `size` packets with probability `λ/size`, so the mean rate is `λ`.
    pub fn batch(size: u32, lambda: f64) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let p = lambda / size as f64;
        Self::new(vec![(size, p), (0, 1.0 - p)])
    }

    pub fn pmf(&self) -> &[(u32, f64)] {
        &self.pmf
    }

    /// `(E[A], E[A²])`.
    pub fn moments(&self) -> (f64, f64) {
        self.pmf.iter().fold((0.0, 0.0), |(m1, m2), &(a, p)| {
            let a = a as f64;
            (m1 + p * a, m2 + p * a * a)
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u = rng.gen::<f64>();
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.pmf.len() - 1);
        self.pmf[idx].0
    }
}

pub fn sample_arrivals<R: Rng + ?Sized>(dist: &ArrivalDistribution, rng: &mut R) -> u32 {
    dist.sample(rng)
}

pub fn arrival_moments(dist: &ArrivalDistribution) -> (f64, f64) {
    dist.moments()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Packet {
    pub id: PacketId,
    pub bits: u64,
    pub arrival_frame: u64,
    pub delivery_frame: Option<u64>,
}

impl Packet {
    /// Frames between arrival and delivery.
    pub fn delay(&self) -> Option<u64> {
        self.delivery_frame.map(|d| d - self.arrival_frame)
    }
}

/// FIFO source buffer with optional capacity and tail drop.
#[derive(Clone, Debug)]
pub struct SourceQueue {
    packets: VecDeque<Packet>,
    capacity: Option<usize>,
    dropped: u64,
}

impl SourceQueue {
    pub fn new(capacity: Option<usize>) -> Self {
        Self { packets: VecDeque::new(), capacity, dropped: 0 }
    }

    /// Appends `packet` unless the buffer is full, in which case it is dropped.
    pub fn enqueue(&mut self, packet: Packet) -> bool {
        if self.capacity.is_some_and(|c| self.packets.len() >= c) {
            self.dropped += 1;
            return false;
        }
        self.packets.push_back(packet);
        true
    }

    pub fn is_full(&self) -> bool {
        self.capacity.is_some_and(|c| self.packets.len() >= c)
    }

    /// Counts a packet turned away before it was given an id.
    pub fn record_drop(&mut self) {
        self.dropped += 1;
    }

    pub fn head(&self) -> Option<&Packet> {
        self.packets.front()
    }

    pub fn dequeue(&mut self) -> Option<Packet> {
        self.packets.pop_front()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn ids(&self) -> impl Iterator<Item = PacketId> + '_ {
        self.packets.iter().map(|p| p.id)
    }
}

#[derive(Clone, Debug)]
struct Held {
    packet: Packet,
    holders: SmallVec<[u32; 8]>,
}

/// The `K` relay buffers.
///
/// A packet is always removed from every relay at once, so each queue keeps
/// its ids in arrival order and skips removed ones lazily; `len` is exact.
#[derive(Clone, Debug)]
pub struct RelayQueues {
    entries: Vec<VecDeque<PacketId>>,
    live_len: Vec<usize>,
    held: HashMap<PacketId, Held>,
    capacity: Option<usize>,
    dropped: u64,
    total: usize,
}

impl RelayQueues {
    pub fn new(relays: usize, capacity: Option<usize>) -> Self {
        Self {
            entries: vec![VecDeque::new(); relays],
            live_len: vec![0; relays],
            held: HashMap::new(),
            capacity,
            dropped: 0,
            total: 0,
        }
    }

    pub fn relays(&self) -> usize {
        self.entries.len()
    }

    pub fn len(&self, relay: usize) -> usize {
        self.live_len[relay]
    }

    pub fn is_empty(&self, relay: usize) -> bool {
        self.live_len[relay] == 0
    }

    /// `Σ_k Q_k`, counting every copy.
    pub fn total_len(&self) -> usize {
        self.total
    }

    /// Number of distinct packets held by at least one relay.
    pub fn distinct(&self) -> usize {
        self.held.len()
    }

    pub fn distinct_ids(&self) -> impl Iterator<Item = PacketId> + '_ {
        self.held.keys().copied()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn holds(&self, relay: usize, id: PacketId) -> bool {
        self.held.get(&id).is_some_and(|h| h.holders.contains(&(relay as u32)))
    }

    pub fn holders(&self, id: PacketId) -> &[u32] {
        self.held.get(&id).map(|h| h.holders.as_slice()).unwrap_or(&[])
    }

    pub fn packet(&self, id: PacketId) -> Option<&Packet> {
        self.held.get(&id).map(|h| &h.packet)
    }

    /// Appends a copy of `packet` to `relay`'s buffer. Returns `false` (and
    /// counts a drop) when the buffer is full. A relay never holds two copies.
    pub fn enqueue(&mut self, relay: usize, packet: &Packet) -> bool {
        if self.holds(relay, packet.id) {
            return true;
        }
        if self.capacity.is_some_and(|c| self.live_len[relay] >= c) {
            self.dropped += 1;
            return false;
        }
        self.held
            .entry(packet.id)
            .or_insert_with(|| Held { packet: *packet, holders: SmallVec::new() })
            .holders
            .push(relay as u32);
        self.entries[relay].push_back(packet.id);
        self.live_len[relay] += 1;
        self.total += 1;
        true
    }

    /// Oldest packet still held by `relay`.
    pub fn head(&mut self, relay: usize) -> Option<PacketId> {
        let q = &mut self.entries[relay];
        while let Some(&id) = q.front() {
            if self.held.contains_key(&id) {
                return Some(id);
            }
            q.pop_front();
        }
        None
    }

    /// Removes `id` from every relay holding it; returns the number of copies removed.
    pub fn dequeue_id(&mut self, id: PacketId) -> usize {
        self.take(id).map(|(_, n)| n).unwrap_or(0)
    }

    /// Removes `id` everywhere and returns its record with the number of copies removed.
    pub fn take(&mut self, id: PacketId) -> Option<(Packet, usize)> {
        let held = self.held.remove(&id)?;
        for &r in &held.holders {
            self.live_len[r as usize] -= 1;
        }
        let n = held.holders.len();
        self.total -= n;
        Some((held.packet, n))
    }

    /// Live ids of one relay, oldest first.
    pub fn queue_ids(&self, relay: usize) -> Vec<PacketId> {
        self.entries[relay].iter().copied().filter(|id| self.holds(relay, *id)).collect()
    }
}

/// Source and relay buffers of one replication.
#[derive(Clone, Debug)]
pub struct Buffers {
    pub source: SourceQueue,
    pub relays: RelayQueues,
}

impl Buffers {
    pub fn new(relays: usize, source_capacity: Option<usize>, relay_capacity: Option<usize>) -> Self {
        Self { source: SourceQueue::new(source_capacity), relays: RelayQueues::new(relays, relay_capacity) }
    }

    /// Packets in the system, counting a packet once even when both the
    /// source and several relays hold it.
    pub fn in_system(&self) -> usize {
        let (lo, hi) = match (self.source.head(), self.source.packets.back()) {
            (Some(a), Some(b)) => (a.id, b.id),
            _ => (1, 0),
        };
        let overlap = self
            .relays
            .distinct_ids()
            .filter(|id| (lo..=hi).contains(id) && self.source.ids().any(|s| s == *id))
            .count();
        self.source.len() + self.relays.distinct() - overlap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pkt(id: PacketId) -> Packet {
        Packet { id, bits: 100, arrival_frame: id, delivery_frame: None }
    }

    #[test]
    fn pmf_validation() {
        assert!(ArrivalDistribution::new(vec![(1, 0.5), (0, 0.4)]).is_err());
        assert!(ArrivalDistribution::new(vec![]).is_err());
        assert!(ArrivalDistribution::new(vec![(0, 1.0)]).is_ok());
    }

    #[test]
    fn moments_examples() {
        let d = ArrivalDistribution::new(vec![(15, 0.001), (0, 0.999)]).unwrap();
        let (m1, m2) = arrival_moments(&d);
        assert!((m1 - 0.015).abs() < 1e-15 && (m2 - 0.225).abs() < 1e-15);
        assert_eq!(ArrivalDistribution::new(vec![(0, 1.0)]).unwrap().moments(), (0.0, 0.0));
        let b = ArrivalDistribution::bernoulli(0.37).unwrap();
        let (m1, m2) = b.moments();
        assert!((m1 - 0.37).abs() < 1e-15 && (m2 - 0.37).abs() < 1e-15);
        let (m1, m2) = ArrivalDistribution::batch(15, 0.015).unwrap().moments();
        assert!((m1 - 0.015).abs() < 1e-15 && (m2 - 0.225).abs() < 1e-12);
    }

    fn empirical_mean(d: &ArrivalDistribution, n: usize, seed: u64) -> f64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| sample_arrivals(d, &mut r) as f64).sum::<f64>() / n as f64
    }

    #[test]
    fn sampling_examples() {
        let n = 1_000_000;
        let bursty = ArrivalDistribution::new(vec![(15, 0.001), (0, 0.999)]).unwrap();
        let sd = ((0.225 - 0.015f64 * 0.015) / n as f64).sqrt();
        assert!((empirical_mean(&bursty, n, 1) - 0.015).abs() < 3.0 * sd);

        let zero = ArrivalDistribution::new(vec![(0, 1.0)]).unwrap();
        assert_eq!(empirical_mean(&zero, 10_000, 2), 0.0);

        let bern = ArrivalDistribution::bernoulli(0.3).unwrap();
        let sd = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((empirical_mean(&bern, n, 3) - 0.3).abs() < 3.0 * sd);
    }

    #[test]
    fn source_queue_capacity() {
        let mut q = SourceQueue::new(Some(25));
        for i in 0..25 {
            assert!(q.enqueue(pkt(i)));
        }
        assert!(!q.enqueue(pkt(25)));
        assert_eq!((q.len(), q.dropped()), (25, 1));

        let mut u = SourceQueue::new(None);
        assert!((0..10_000).all(|i| u.enqueue(pkt(i))));

        let mut one = SourceQueue::new(Some(1));
        assert!(one.enqueue(pkt(0)));
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn relay_capacity_and_duplicates() {
        let mut r = RelayQueues::new(2, Some(1));
        assert!(r.enqueue(0, &pkt(1)));
        assert!(r.enqueue(0, &pkt(1)));
        assert_eq!(r.len(0), 1);
        assert!(!r.enqueue(0, &pkt(2)));
        assert_eq!(r.dropped(), 1);
    }

    #[test]
    fn dequeue_id_removes_everywhere_and_keeps_order() {
        let mut r = RelayQueues::new(5, None);
        for relay in 0..5 {
            for id in [1, 7, 9] {
                if relay < 3 || id != 7 {
                    r.enqueue(relay, &pkt(id));
                }
            }
        }
        assert_eq!(r.dequeue_id(7), 3);
        for relay in 0..5 {
            assert!(!r.holds(relay, 7));
            assert_eq!(r.queue_ids(relay), vec![1, 9]);
            assert_eq!(r.len(relay), 2);
        }
        assert_eq!(r.dequeue_id(42), 0);
        assert_eq!(r.total_len(), 10);
        assert_eq!(r.dequeue_id(1), 5);
        assert_eq!(r.head(0), Some(9));
        assert_eq!(r.total_len(), 5);
    }

    #[test]
    fn in_system_counts_shared_packets_once() {
        let mut b = Buffers::new(3, None, None);
        b.source.enqueue(pkt(4));
        b.source.enqueue(pkt(5));
        b.relays.enqueue(0, &pkt(4));
        b.relays.enqueue(1, &pkt(4));
        b.relays.enqueue(2, &pkt(2));
        assert_eq!(b.in_system(), 3);
    }
}
