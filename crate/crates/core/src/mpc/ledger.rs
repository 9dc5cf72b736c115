use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// A run of consecutive machines with identical counters in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MachineSpan {
    pub first: usize,
    pub last: usize,
    pub sent: usize,
    pub received: usize,
    pub resident: usize,
}

/// Per-machine traffic of one round, run-length encoded over machine ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    /// 1-based round number.
    pub round: usize,
    pub primitive: String,
    pub spans: Vec<MachineSpan>,
}

/// A recorded counter above the per-machine cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub round: usize,
    pub machine: usize,
    pub what: &'static str,
    pub words: usize,
}

/// Round-by-round account of every machine's traffic and residency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ledger {
    machines: usize,
    cap: usize,
    records: Vec<RoundRecord>,
}

impl Ledger {
    pub(crate) fn new(machines: usize, cap: usize) -> Self {
        Ledger {
            machines,
            cap,
            records: Vec::new(),
        }
    }

    /// Records a round from each machine's (sent, received, resident).
    pub(crate) fn push_with(&mut self, primitive: &str, machine: impl Fn(usize) -> (usize, usize, usize)) {
        let mut spans: Vec<MachineSpan> = Vec::new();
        for m in 0..self.machines {
            let (s, r, h) = machine(m);
            match spans.last_mut() {
                Some(span) if span.sent == s && span.received == r && span.resident == h => {
                    span.last = m;
                }
                _ => spans.push(MachineSpan {
                    first: m,
                    last: m,
                    sent: s,
                    received: r,
                    resident: h,
                }),
            }
        }
        self.push_spans(primitive, spans);
    }

    pub(crate) fn push_spans(&mut self, primitive: &str, spans: Vec<MachineSpan>) {
        self.records.push(RoundRecord {
            round: self.records.len() + 1,
            primitive: primitive.to_string(),
            spans,
        });
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn rounds(&self) -> usize {
        self.records.len()
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    fn spans(&self) -> impl Iterator<Item = (usize, &MachineSpan)> {
        self.records
            .iter()
            .flat_map(|r| r.spans.iter().map(move |s| (r.round, s)))
    }

    pub fn max_sent(&self) -> usize {
        self.spans().map(|(_, s)| s.sent).max().unwrap_or(0)
    }

    pub fn max_received(&self) -> usize {
        self.spans().map(|(_, s)| s.received).max().unwrap_or(0)
    }

    pub fn max_resident(&self) -> usize {
        self.spans().map(|(_, s)| s.resident).max().unwrap_or(0)
    }

    /// Every counter that exceeds the cap; empty for any run the cluster
    /// accepted.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (round, span) in self.spans() {
            for (what, words) in [
                ("sent", span.sent),
                ("received", span.received),
                ("resident", span.resident),
            ] {
                if words > self.cap {
                    out.push(Violation {
                        round,
                        machine: span.first,
                        what,
                        words,
                    });
                }
            }
        }
        out
    }

    /// Number of rounds attributed to each primitive.
    pub fn rounds_by_primitive(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.primitive.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Hash of every record, for comparing runs without writing them out.
    pub fn digest(&self) -> u64 {
        let mut h = std::hash::DefaultHasher::new();
        self.machines.hash(&mut h);
        self.cap.hash(&mut h);
        for r in &self.records {
            r.primitive.hash(&mut h);
            for s in &r.spans {
                (s.first, s.last, s.sent, s.received, s.resident).hash(&mut h);
            }
        }
        h.finish()
    }

    /// One CSV row per (round, machine).
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "round,machine,words_sent,words_received,words_resident,primitive")?;
        for r in &self.records {
            for span in &r.spans {
                for m in span.first..=span.last {
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        r.round, m, span.sent, span.received, span.resident, r.primitive
                    )?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_compress_equal_machines() {
        let mut l = Ledger::new(4, 8);
        let (s, r) = ([1, 1, 0, 0], [0, 0, 2, 0]);
        l.push_with("x", |m| (s[m], r[m], 3));
        let spans = &l.records()[0].spans;
        assert_eq!(spans.len(), 3);
        assert_eq!((spans[0].first, spans[0].last), (0, 1));
        assert!(l.violations().is_empty());
        let mut csv = Vec::new();
        l.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("1,2,0,2,3,x"));
    }

    #[test]
    fn over_cap_is_reported() {
        let mut l = Ledger::new(2, 4);
        l.push_with("x", |m| ([5, 0][m], 0, 0));
        let v = l.violations();
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].round, v[0].machine, v[0].what), (1, 0, "sent"));
    }
}
