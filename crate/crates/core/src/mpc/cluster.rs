use std::collections::BTreeMap;

use serde::Serialize;

use super::config::MpcConfig;
use super::ledger::{Ledger, MachineSpan};
use super::Word;
use crate::error::{Error, Result};

/// Handle to a block of words stored on the cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RegionId(u64);

/// `machines` consecutive machines starting at `first`, each holding `words`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Extent {
    pub first: usize,
    pub machines: usize,
    pub words: usize,
}

/// Named data laid out over machines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Region {
    pub name: String,
    pub extents: Vec<Extent>,
    pub words: usize,
}

impl Region {
    /// `(machine, words)` for every machine the region touches.
    pub fn per_machine(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.extents
            .iter()
            .flat_map(|e| (e.first..e.first + e.machines).map(move |m| (m, e.words)))
    }

    /// Machine holding word `offset` when the region was filled in order.
    pub fn machine_of(&self, offset: usize) -> Option<usize> {
        let mut base = 0;
        for e in &self.extents {
            let span = e.machines * e.words;
            if offset < base + span {
                return Some(e.first + (offset - base) / e.words);
            }
            base += span;
        }
        None
    }
}

/// A message addressed to another machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub to: usize,
    pub payload: Vec<Word>,
}

/// A delivered message with its canonical ordering key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub from: usize,
    pub seq: usize,
    pub payload: Vec<Word>,
}

/// Messages received in one round, per receiver, in (sender, sequence) order.
pub type Delivery = BTreeMap<usize, Vec<Envelope>>;

/// The simulated fleet: M machines with s words each.
///
/// Long-lived data lives in regions, which may fill at most ⌊s/2⌋ words of
/// a machine so that the other half stays free for messages. Message payloads
/// land in per-machine buffers and count toward residency until cleared.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    s: usize,
    machines: usize,
    fill_cap: usize,
    config: MpcConfig,
    used: Vec<usize>,
    used_total: usize,
    first_open: usize,
    regions: BTreeMap<RegionId, Region>,
    next_region: u64,
    /// Words waiting in each machine's message buffer.
    buffered: Vec<usize>,
    /// Contents of the buffers that were filled with real payloads.
    contents: BTreeMap<usize, Vec<Word>>,
    buffered_total: usize,
    peak_total: usize,
    budget: Option<usize>,
    ledger: Ledger,
}

impl ClusterState {
    /// Empty cluster for an instance with `vertex_count` vertices.
    pub fn new(machines: usize, s: usize, config: MpcConfig, vertex_count: usize) -> Result<Self> {
        config.validate()?;
        if machines == 0 {
            return Err(Error::Param("need at least one machine".into()));
        }
        let floor = config.min_s(vertex_count).max(2);
        if s < floor {
            return Err(Error::Model(format!(
                "s = {s} is below the floor c_s*ceil(log2 N) = {floor} for N = {vertex_count}"
            )));
        }
        Ok(ClusterState {
            s,
            machines,
            fill_cap: s / 2,
            config,
            used: vec![0; machines],
            used_total: 0,
            first_open: 0,
            regions: BTreeMap::new(),
            next_region: 0,
            buffered: vec![0; machines],
            contents: BTreeMap::new(),
            buffered_total: 0,
            peak_total: 0,
            budget: None,
            ledger: Ledger::new(machines, s),
        })
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn fill_cap(&self) -> usize {
        self.fill_cap
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    pub fn round(&self) -> usize {
        self.ledger.rounds()
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn peak_total(&self) -> usize {
        self.peak_total
    }

    pub fn resident_total(&self) -> usize {
        self.used_total + self.buffered_total
    }

    pub fn resident(&self, machine: usize) -> usize {
        self.used[machine] + self.buffered[machine]
    }

    /// Region words that could still be allocated.
    pub fn total_free(&self) -> usize {
        self.machines * self.fill_cap - self.used_total
    }

    /// Caps total resident words; allocations beyond it fail.
    pub fn set_budget(&mut self, budget: Option<usize>) {
        self.budget = budget;
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }

    pub fn region(&self, id: RegionId) -> &Region {
        &self.regions[&id]
    }

    pub fn regions(&self) -> impl Iterator<Item = (RegionId, &Region)> {
        self.regions.iter().map(|(id, r)| (*id, r))
    }

    fn check_budget(&self, context: &str, extra: usize) -> Result<()> {
        if let Some(budget) = self.budget {
            let needed = self.resident_total() + extra;
            if needed > budget {
                return Err(Error::capacity(
                    format!("{context} (space budget)"),
                    needed,
                    budget,
                ));
            }
        }
        Ok(())
    }

    fn touch_peak(&mut self) {
        self.peak_total = self.peak_total.max(self.resident_total());
    }

    fn insert_region(&mut self, name: &str, extents: Vec<Extent>, words: usize) -> RegionId {
        for e in &extents {
            for m in e.first..e.first + e.machines {
                self.used[m] += e.words;
            }
        }
        self.used_total += words;
        while self.first_open < self.machines && self.used[self.first_open] >= self.fill_cap {
            self.first_open += 1;
        }
        let id = RegionId(self.next_region);
        self.next_region += 1;
        self.regions.insert(
            id,
            Region {
                name: name.to_string(),
                extents,
                words,
            },
        );
        self.touch_peak();
        id
    }

    /// Places `words` words on the lowest-numbered machines with free space.
    pub fn alloc(&mut self, name: &str, words: usize) -> Result<RegionId> {
        if words > self.total_free() {
            return Err(Error::capacity(name, words, self.total_free()));
        }
        self.check_budget(name, words)?;
        let mut extents: Vec<Extent> = Vec::new();
        let mut left = words;
        let mut m = self.first_open;
        while left > 0 {
            let take = (self.fill_cap - self.used[m]).min(left);
            if take > 0 {
                match extents.last_mut() {
                    Some(e) if e.words == take && e.first + e.machines == m => e.machines += 1,
                    _ => extents.push(Extent {
                        first: m,
                        machines: 1,
                        words: take,
                    }),
                }
                left -= take;
            }
            m += 1;
        }
        Ok(self.insert_region(name, extents, words))
    }

    /// Places `counts(m)` words on each of the first `machines` machines.
    pub fn alloc_with_counts(
        &mut self,
        name: &str,
        machines: usize,
        counts: impl Fn(usize) -> usize,
    ) -> Result<RegionId> {
        let machines = machines.min(self.machines);
        let mut extents: Vec<Extent> = Vec::new();
        let mut words = 0;
        for m in 0..machines {
            let c = counts(m);
            if c == 0 {
                continue;
            }
            if self.used[m] + c > self.fill_cap {
                let needed: usize = (0..machines).map(&counts).sum();
                return Err(Error::capacity(name, needed, self.total_free()));
            }
            words += c;
            match extents.last_mut() {
                Some(e) if e.words == c && e.first + e.machines == m => e.machines += 1,
                _ => extents.push(Extent {
                    first: m,
                    machines: 1,
                    words: c,
                }),
            }
        }
        self.check_budget(name, words)?;
        Ok(self.insert_region(name, extents, words))
    }

    /// Spreads `words` words evenly over all machines.
    pub fn alloc_striped(&mut self, name: &str, words: usize) -> Result<RegionId> {
        let base = words / self.machines;
        let extra = words % self.machines;
        self.alloc_with_counts(name, self.machines, |m| base + usize::from(m < extra))
    }

    pub fn free(&mut self, id: RegionId) {
        if let Some(region) = self.regions.remove(&id) {
            for e in &region.extents {
                for m in e.first..e.first + e.machines {
                    self.used[m] -= e.words;
                }
                self.first_open = self.first_open.min(e.first);
            }
            self.used_total -= region.words;
        }
    }

    /// Appends words to a machine's message buffer outside any round.
    pub fn load_buffer(&mut self, machine: usize, words: Vec<Word>) -> Result<()> {
        self.load_words(machine, words.len())?;
        self.contents.entry(machine).or_default().extend(words);
        Ok(())
    }

    /// Like `load_buffer` when only the word count matters.
    pub(crate) fn load_words(&mut self, machine: usize, words: usize) -> Result<()> {
        if self.resident(machine) + words > self.s {
            return Err(Error::MemoryCap {
                machine,
                round: self.round(),
                words: self.resident(machine) + words,
                cap: self.s,
            });
        }
        self.check_budget("message buffer", words)?;
        self.buffered_total += words;
        self.buffered[machine] += words;
        self.touch_peak();
        Ok(())
    }

    pub fn buffered(&self, machine: usize) -> usize {
        self.buffered[machine]
    }

    /// Buffered payload words. Words moved by the tree primitives are only
    /// counted, not stored, so this may be shorter than `buffered`.
    pub fn buffer(&self, machine: usize) -> &[Word] {
        self.contents.get(&machine).map_or(&[], Vec::as_slice)
    }

    pub fn take_buffer(&mut self, machine: usize) -> Vec<Word> {
        self.buffered_total -= self.buffered[machine];
        self.buffered[machine] = 0;
        self.contents.remove(&machine).unwrap_or_default()
    }

    /// Shortens a machine's message buffer to `len` words.
    pub fn truncate_buffer(&mut self, machine: usize, len: usize) {
        let b = &mut self.buffered[machine];
        if len < *b {
            self.buffered_total -= *b - len;
            *b = len;
            if let Some(c) = self.contents.get_mut(&machine) {
                c.truncate(len);
                if c.is_empty() {
                    self.contents.remove(&machine);
                }
            }
        }
    }

    pub fn clear_buffers(&mut self) {
        self.buffered.iter_mut().for_each(|b| *b = 0);
        self.contents.clear();
        self.buffered_total = 0;
    }

    /// One synchronous round: every sender's outbox is checked against the
    /// send cap, every receiver against the receive and memory caps, then
    /// payloads are appended to the receivers' buffers in (sender, sequence)
    /// order. Nothing changes if any check fails.
    pub fn exchange_round(
        &mut self,
        primitive: &str,
        mut outboxes: Vec<(usize, Vec<Message>)>,
    ) -> Result<Delivery> {
        // Stable, so a sender's outboxes keep their order.
        outboxes.sort_by_key(|(from, _)| *from);
        let sends: Vec<(usize, usize, usize)> = outboxes
            .iter()
            .flat_map(|(from, msgs)| msgs.iter().map(move |m| (*from, m.to, m.payload.len())))
            .collect();
        if let Some(&(from, _)) = outboxes.iter().find(|(from, _)| *from >= self.machines) {
            return Err(Error::Param(format!("no machine {from}")));
        }
        self.exchange_counts(primitive, &sends)?;
        let mut delivery = Delivery::new();
        // Sequence numbers run across all of a sender's outboxes.
        let mut next = (usize::MAX, 0);
        for (from, msgs) in outboxes {
            if next.0 != from {
                next = (from, 0);
            }
            for msg in msgs {
                let seq = next.1;
                next.1 += 1;
                self.contents.entry(msg.to).or_default().extend_from_slice(&msg.payload);
                delivery.entry(msg.to).or_default().push(Envelope {
                    from,
                    seq,
                    payload: msg.payload,
                });
            }
        }
        Ok(delivery)
    }

    /// A round given as (sender, receiver, words) triples; the receivers'
    /// buffers grow by the counts only.
    pub(crate) fn exchange_counts(&mut self, primitive: &str, sends: &[(usize, usize, usize)]) -> Result<()> {
        let round = self.round() + 1;
        let mut sent = vec![0usize; self.machines];
        let mut received = vec![0usize; self.machines];
        for &(from, to, words) in sends {
            for m in [from, to] {
                if m >= self.machines {
                    return Err(Error::Param(format!("no machine {m}")));
                }
            }
            sent[from] += words;
            received[to] += words;
        }
        if let Some(m) = (0..self.machines).find(|&m| sent[m] > self.s) {
            return Err(Error::SendCap {
                machine: m,
                round,
                words: sent[m],
                cap: self.s,
            });
        }
        for m in 0..self.machines {
            if received[m] > self.s {
                return Err(Error::ReceiveCap {
                    machine: m,
                    round,
                    words: received[m],
                    cap: self.s,
                });
            }
            if self.resident(m) + received[m] > self.s {
                return Err(Error::MemoryCap {
                    machine: m,
                    round,
                    words: self.resident(m) + received[m],
                    cap: self.s,
                });
            }
        }
        let incoming: usize = received.iter().sum();
        self.check_budget(primitive, incoming)?;
        for (b, r) in self.buffered.iter_mut().zip(&received) {
            *b += r;
        }
        self.buffered_total += incoming;
        self.touch_peak();
        let (used, buffered) = (&self.used, &self.buffered);
        self.ledger
            .push_with(primitive, |m| (sent[m], received[m], used[m] + buffered[m]));
        Ok(())
    }

    /// Books `rounds` rounds for a charged primitive. In each, every machine
    /// sends and receives the words it holds of the `traffic` regions.
    pub fn charge(&mut self, primitive: &str, rounds: usize, traffic: &[RegionId]) -> Result<usize> {
        let mut moved = vec![0usize; self.machines];
        for id in traffic {
            for (m, w) in self.regions[id].per_machine() {
                moved[m] += w;
            }
        }
        if let Some(m) = (0..self.machines).find(|&m| moved[m] > self.s) {
            return Err(Error::SendCap {
                machine: m,
                round: self.round() + 1,
                words: moved[m],
                cap: self.s,
            });
        }
        let (used, buffered) = (&self.used, &self.buffered);
        self.ledger
            .push_with(primitive, |m| (moved[m], moved[m], used[m] + buffered[m]));
        let spans: Vec<MachineSpan> = self.ledger.records().last().unwrap().spans.clone();
        for _ in 1..rounds {
            self.ledger.push_spans(primitive, spans.clone());
        }
        Ok(rounds)
    }

    /// Charges `c·max(1, ⌈log_s items⌉)` rounds.
    pub fn charge_log(
        &mut self,
        primitive: &str,
        c: usize,
        items: usize,
        traffic: &[RegionId],
    ) -> Result<usize> {
        let rounds = c * ceil_log(self.s, items);
        self.charge(primitive, rounds, traffic)
    }
}

/// max(1, ⌈log_s x⌉), computed exactly in integers.
pub fn ceil_log(s: usize, x: usize) -> usize {
    let s = s.max(2) as u128;
    let x = x as u128;
    let mut t = 1;
    let mut pow = s;
    while pow < x {
        pow *= s;
        t += 1;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster(m: usize, s: usize) -> ClusterState {
        ClusterState::new(m, s, MpcConfig::default(), 4).unwrap()
    }

    #[test]
    fn init_floor() {
        assert!(ClusterState::new(4, 16, MpcConfig::default(), 256).is_ok());
        assert!(matches!(
            ClusterState::new(4, 4, MpcConfig::default(), 256),
            Err(Error::Model(_))
        ));
        assert_eq!(
            ClusterState::new(4, 16, MpcConfig::default(), 256).unwrap(),
            ClusterState::new(4, 16, MpcConfig::default(), 256).unwrap()
        );
    }

    #[test]
    fn ceil_log_values() {
        assert_eq!(ceil_log(4, 16), 2);
        assert_eq!(ceil_log(4, 17), 3);
        assert_eq!(ceil_log(4, 1), 1);
        assert_eq!(ceil_log(4, 0), 1);
        assert_eq!(ceil_log(16, 256), 2);
    }

    #[test]
    fn send_exactly_at_cap() {
        let mut c = cluster(2, 8);
        let d = c
            .exchange_round("t", vec![(0, vec![Message { to: 1, payload: vec![7; 8] }])])
            .unwrap();
        assert_eq!(c.round(), 1);
        assert_eq!(d[&1][0].payload.len(), 8);
        assert_eq!(c.resident(1), 8);
    }

    #[test]
    fn send_over_cap() {
        let mut c = cluster(2, 8);
        let err = c
            .exchange_round("t", vec![(0, vec![Message { to: 1, payload: vec![7; 9] }])])
            .unwrap_err();
        assert_eq!(
            err,
            Error::SendCap {
                machine: 0,
                round: 1,
                words: 9,
                cap: 8
            }
        );
        assert_eq!(c.round(), 0);
    }

    #[test]
    fn memory_cap_on_receiver() {
        let s = 8;
        let mut c = cluster(3, s);
        c.load_buffer(2, vec![0; s / 2]).unwrap();
        let half = || vec![Message { to: 2, payload: vec![1; s / 2] }];
        let err = c
            .exchange_round("t", vec![(0, half()), (1, half())])
            .unwrap_err();
        assert!(matches!(err, Error::MemoryCap { machine: 2, round: 1, words: 12, .. }));
    }

    #[test]
    fn delivery_order_is_canonical() {
        let mut c = cluster(3, 8);
        let d = c
            .exchange_round(
                "t",
                vec![
                    (1, vec![Message { to: 0, payload: vec![10] }]),
                    (2, vec![Message { to: 0, payload: vec![20] }, Message { to: 0, payload: vec![21] }]),
                ],
            )
            .unwrap();
        let keys: Vec<(usize, usize)> = d[&0].iter().map(|e| (e.from, e.seq)).collect();
        assert_eq!(keys, vec![(1, 0), (2, 0), (2, 1)]);
        assert_eq!(c.buffer(0), &[10, 20, 21]);
    }

    #[test]
    fn regions_respect_fill_cap() {
        let mut c = cluster(3, 8);
        let a = c.alloc("a", 6).unwrap();
        assert_eq!(c.region(a).extents, vec![Extent { first: 0, machines: 1, words: 4 }, Extent { first: 1, machines: 1, words: 2 }]);
        let b = c.alloc("b", 6).unwrap();
        assert_eq!(c.resident(1), 4);
        assert_eq!(c.resident(2), 4);
        assert!(matches!(c.alloc("c", 1), Err(Error::Capacity { .. })));
        c.free(a);
        assert_eq!(c.total_free(), 6);
        c.free(b);
        assert_eq!(c.peak_total(), 12);
    }

    #[test]
    fn budget_blocks_allocation() {
        let mut c = cluster(4, 8);
        c.set_budget(Some(5));
        assert!(c.alloc("a", 5).is_ok());
        assert!(matches!(c.alloc("b", 1), Err(Error::Capacity { .. })));
    }

    #[test]
    fn charged_rounds_record_region_traffic() {
        let mut c = cluster(4, 8);
        let r = c.alloc("a", 6).unwrap();
        c.charge("sort", 3, &[r]).unwrap();
        assert_eq!(c.round(), 3);
        let rec = &c.ledger().records()[2];
        assert_eq!(rec.round, 3);
        assert_eq!(rec.spans[0].sent, 4);
        assert!(c.ledger().violations().is_empty());
    }
}
