//! Per-run measurement ledgers and cross-run confidence intervals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::message::{FrameType, MessageKind};

pub const DEFAULT_RINGS: [f64; 4] = [300.0, 600.0, 1200.0, 1500.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("confidence interval needs at least 2 values, got {0}")]
    TooFewRuns(usize),
    #[error("confidence level must lie in (0, 1), got {0}")]
    Level(f64),
}

/// Counters for one distance ring: receivers whose distance to the warning
/// origin at creation time falls in `(previous upper, upper]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RingCounters {
    pub upper: f64,
    pub frames_sent: u64,
    pub frames_delivered: u64,
    /// Per frame type I, P, B: (sent, delivered).
    pub frames_by_type: [(u64, u64); 3],
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub delay_sum: f64,
    pub delay_count: u64,
}

/// Everything measured during one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLedger {
    pub rings: Vec<RingCounters>,
    /// Cumulative duplicate receptions sampled over time: (t, total).
    pub duplicates: Vec<(f64, u64)>,
    pub duplicates_total: u64,
    /// Fraction of nodes holding the warning, sampled over time.
    pub coverage: Vec<(f64, f64)>,
    pub collisions: u64,
    pub messages_by_kind: BTreeMap<MessageKind, u64>,
    pub scf_stores: u64,
    /// Frame receptions that could have succeeded (in range when sent).
    pub receivable: u64,
    pub received: u64,
    pub lost_collision: u64,
    pub lost_link: u64,
    /// Unicast packets generated and delivered end to end.
    pub e2e_sent: u64,
    pub e2e_delivered: u64,
    pub e2e_delay_sum: f64,
    /// Decisions whose equilibrium iteration did not converge.
    pub nonconverged: u64,
}

impl MetricsLedger {
    pub fn new(rings: &[f64]) -> Self {
        MetricsLedger {
            rings: rings.iter().map(|&upper| RingCounters { upper, ..RingCounters::default() }).collect(),
            ..MetricsLedger::default()
        }
    }

    /// Ring index for a distance from the origin; `None` beyond the last ring.
    pub fn ring_of(&self, distance: f64) -> Option<usize> {
        self.rings.iter().position(|r| distance <= r.upper)
    }

    pub fn ring(&self, upper: f64) -> Option<&RingCounters> {
        self.rings.iter().find(|r| r.upper == upper)
    }

    pub fn record_frame(&mut self, ring: usize, frame_type: FrameType, delivered: bool) {
        let r = &mut self.rings[ring];
        r.frames_sent += 1;
        r.frames_by_type[frame_type.index()].0 += 1;
        if delivered {
            r.frames_delivered += 1;
            r.frames_by_type[frame_type.index()].1 += 1;
        }
    }

    pub fn record_packet(&mut self, ring: usize, delay: Option<f64>) {
        let r = &mut self.rings[ring];
        r.packets_sent += 1;
        if let Some(d) = delay {
            r.packets_delivered += 1;
            r.delay_sum += d;
            r.delay_count += 1;
        }
    }

    pub fn count_message(&mut self, kind: MessageKind) {
        *self.messages_by_kind.entry(kind).or_insert(0) += 1;
    }

    pub fn messages(&self, kind: MessageKind) -> u64 {
        self.messages_by_kind.get(&kind).copied().unwrap_or(0)
    }

    /// Transmissions of every kind except beacons.
    pub fn payload_messages(&self) -> u64 {
        self.messages_by_kind
            .iter()
            .filter(|(k, _)| **k != MessageKind::Beacon)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn note_duplicate(&mut self) {
        self.duplicates_total += 1;
    }

    pub fn snapshot(&mut self, t: f64, coverage: f64) {
        self.duplicates.push((t, self.duplicates_total));
        self.coverage.push((t, coverage));
    }

    /// Coverage at the last snapshot no later than `t`.
    pub fn coverage_at(&self, t: f64) -> Option<f64> {
        self.coverage.iter().rev().find(|(s, _)| *s <= t).map(|&(_, c)| c)
    }

    /// Fraction of frames fully received in ring `upper`; `None` when no frames were due there.
    pub fn fdr(&self, upper: f64) -> Option<f64> {
        let r = self.ring(upper)?;
        (r.frames_sent > 0).then(|| r.frames_delivered as f64 / r.frames_sent as f64)
    }

    pub fn fdr_by_type(&self, upper: f64, t: FrameType) -> Option<f64> {
        let (s, d) = self.ring(upper)?.frames_by_type[t.index()];
        (s > 0).then(|| d as f64 / s as f64)
    }

    pub fn pdr(&self, upper: f64) -> Option<f64> {
        let r = self.ring(upper)?;
        (r.packets_sent > 0).then(|| r.packets_delivered as f64 / r.packets_sent as f64)
    }

    /// Mean delay of delivered packets in ring `upper`; `None` without deliveries.
    pub fn mean_delay(&self, upper: f64) -> Option<f64> {
        let r = self.ring(upper)?;
        (r.delay_count > 0).then(|| r.delay_sum / r.delay_count as f64)
    }

    pub fn e2e_loss(&self) -> Option<f64> {
        (self.e2e_sent > 0).then(|| 1.0 - self.e2e_delivered as f64 / self.e2e_sent as f64)
    }

    pub fn e2e_mean_delay(&self) -> Option<f64> {
        (self.e2e_delivered > 0).then(|| self.e2e_delay_sum / self.e2e_delivered as f64)
    }

    /// received + lost to collision + lost to link equals receivable.
    pub fn conserved(&self) -> bool {
        self.received + self.lost_collision + self.lost_link == self.receivable
    }

    /// Named scalar outputs used for cross-run aggregation, in a fixed order.
    pub fn scalars(&self) -> Vec<(String, Option<f64>)> {
        let mut out = Vec::new();
        for r in &self.rings {
            out.push((format!("fdr_{}", r.upper), self.fdr(r.upper)));
        }
        for r in &self.rings {
            for t in [FrameType::I, FrameType::P, FrameType::B] {
                out.push((format!("fdr_{:?}_{}", t, r.upper), self.fdr_by_type(r.upper, t)));
            }
        }
        for r in &self.rings {
            out.push((format!("pdr_{}", r.upper), self.pdr(r.upper)));
        }
        for r in &self.rings {
            out.push((format!("delay_{}", r.upper), self.mean_delay(r.upper)));
        }
        out.push(("duplicates".into(), Some(self.duplicates_total as f64)));
        out.push(("coverage".into(), self.coverage.last().map(|c| c.1)));
        out.push(("collisions".into(), Some(self.collisions as f64)));
        for k in MessageKind::ALL {
            out.push((format!("messages_{}", k.name()), Some(self.messages(k) as f64)));
        }
        out.push(("messages_total".into(), Some(self.payload_messages() as f64)));
        out.push(("scf_stores".into(), Some(self.scf_stores as f64)));
        out.push(("e2e_loss".into(), self.e2e_loss()));
        out.push(("e2e_delay".into(), self.e2e_mean_delay()));
        out.push(("nonconverged".into(), Some(self.nonconverged as f64)));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiSummary {
    pub mean: f64,
    pub half_width: f64,
    pub level: f64,
    pub n_runs: usize,
}

/// Student-t confidence interval on the mean of per-run values.
pub fn ci(values: &[f64], level: f64) -> Result<CiSummary, MetricsError> {
    let n = values.len();
    if n < 2 {
        return Err(MetricsError::TooFewRuns(n));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricsError::Level(level));
    }
    let constant = values.iter().all(|v| *v == values[0]);
    let mean = if constant {
        values[0]
    } else {
        values.iter().sum::<f64>() / n as f64
    };
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + level / 2.0);
    let half_width = if !constant && var > 0.0 { t * var.sqrt() / (n as f64).sqrt() } else { 0.0 };
    Ok(CiSummary { mean, half_width, level, n_runs: n })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger_with(sent: u64, delivered: u64) -> MetricsLedger {
        let mut l = MetricsLedger::new(&DEFAULT_RINGS);
        for i in 0..sent {
            l.record_frame(0, FrameType::P, i < delivered);
        }
        l
    }

    #[test]
    fn fdr_examples() {
        assert_eq!(ledger_with(100, 97).fdr(300.0), Some(0.97));
        assert_eq!(ledger_with(10, 0).fdr(300.0), Some(0.0));
        assert_eq!(ledger_with(10, 10).fdr(300.0), Some(1.0));
        assert_eq!(ledger_with(10, 10).fdr(600.0), None);
    }

    #[test]
    fn delay_examples() {
        let mut l = MetricsLedger::new(&DEFAULT_RINGS);
        for d in [1.0, 2.0, 3.0] {
            l.record_packet(1, Some(d));
        }
        l.record_packet(1, None);
        assert_eq!(l.mean_delay(600.0), Some(2.0));
        l.record_packet(0, Some(0.5));
        assert_eq!(l.mean_delay(300.0), Some(0.5));
        assert_eq!(l.mean_delay(1200.0), None);
        let r = l.ring(600.0).unwrap();
        assert_eq!(r.delay_count, r.packets_delivered);
    }

    #[test]
    fn rings_are_annuli() {
        let l = MetricsLedger::new(&DEFAULT_RINGS);
        assert_eq!(l.ring_of(0.0), Some(0));
        assert_eq!(l.ring_of(300.0), Some(0));
        assert_eq!(l.ring_of(300.1), Some(1));
        assert_eq!(l.ring_of(1500.1), None);
    }

    #[test]
    fn ci_examples() {
        let c = ci(&[0.7, 0.7, 0.7], 0.9).unwrap();
        assert_eq!(c.half_width, 0.0);
        // t(0.975, 1 d.o.f.) = 12.7062; s/sqrt(n) = 0.5
        let c = ci(&[0.0, 1.0], 0.95).unwrap();
        assert!((c.mean - 0.5).abs() < 1e-12);
        assert!((c.half_width - 12.7062 * 0.5).abs() < 1e-3, "{}", c.half_width);
        assert_eq!(ci(&[1.0], 0.95), Err(MetricsError::TooFewRuns(1)));
    }
}
