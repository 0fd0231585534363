use std::fmt::Write as _;

use serde::Serialize;

use crate::layout::Span;

/// One contiguous copy from a sender's shared slab into a receiver's halo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TransferRecord {
    pub step: u64,
    pub src: usize,
    pub dst: usize,
    pub src_span: Span,
    pub dst_span: Span,
    pub elements: usize,
}

/// Append-only log of halo transfers.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TransferLedger {
    records: Vec<TransferRecord>,
}

impl TransferLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TransferRecord) {
        debug_assert_eq!(record.src_span.len, record.dst_span.len);
        self.records.push(record);
    }

    pub fn records(&self) -> &[TransferRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn steps(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.records.iter().map(|r| r.step).collect();
        s.dedup();
        s
    }

    /// (alpha, beta) of everything partition `src` sent in `step`.
    pub fn sent(&self, step: u64, src: usize) -> (usize, usize) {
        self.aggregate(|r| r.step == step && r.src == src)
    }

    /// (alpha, beta) over all partitions in `step`.
    pub fn step_totals(&self, step: u64) -> (usize, usize) {
        self.aggregate(|r| r.step == step)
    }

    fn aggregate(&self, keep: impl Fn(&TransferRecord) -> bool) -> (usize, usize) {
        self.records
            .iter()
            .filter(|r| keep(r))
            .fold((0, 0), |(a, b), r| (a + 1, b + r.elements))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,src,dst,base_src,base_dst,elements\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.step, r.src, r.dst, r.src_span.base, r.dst_span.base, r.elements
            );
        }
        out
    }
}

/// Phase events of the overlapped step, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    HaloBegin { step: u64 },
    Private { step: u64, partition: usize },
    HaloEnd { step: u64 },
    Shared { step: u64, partition: usize },
}

/// True when no shared-voxel phase of a step starts before that step's halo
/// update has completed.
pub fn trace_respects_halo_dependency(trace: &[TraceEvent]) -> bool {
    let mut done = std::collections::HashSet::new();
    for ev in trace {
        match *ev {
            TraceEvent::HaloEnd { step } => {
                done.insert(step);
            }
            TraceEvent::Shared { step, .. } if !done.contains(&step) => return false,
            _ => {}
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates_and_csv() {
        let mut l = TransferLedger::new();
        let span = |b, n| Span { base: b, len: n };
        l.push(TransferRecord {
            step: 0,
            src: 1,
            dst: 0,
            src_span: span(10, 4),
            dst_span: span(0, 4),
            elements: 4,
        });
        l.push(TransferRecord {
            step: 0,
            src: 1,
            dst: 2,
            src_span: span(20, 4),
            dst_span: span(0, 4),
            elements: 4,
        });
        assert_eq!(l.sent(0, 1), (2, 8));
        assert_eq!(l.sent(0, 0), (0, 0));
        assert_eq!(l.to_csv().lines().nth(1), Some("0,1,0,10,0,4"));
    }

    #[test]
    fn dependency_check() {
        use TraceEvent::*;
        assert!(trace_respects_halo_dependency(&[
            HaloBegin { step: 0 },
            Private {
                step: 0,
                partition: 0
            },
            HaloEnd { step: 0 },
            Shared {
                step: 0,
                partition: 0
            },
        ]));
        assert!(!trace_respects_halo_dependency(&[
            HaloBegin { step: 0 },
            Shared {
                step: 0,
                partition: 0
            },
            HaloEnd { step: 0 },
        ]));
    }
}
