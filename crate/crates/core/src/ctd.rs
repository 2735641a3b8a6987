//! Collaborative alert assessment among pedestrian devices.
//!
//! Two schemes decide whether a locally detected alert is spread:
//!
//! - query: the detector asks its neighbors and broadcasts only if a strict
//!   majority of the replies received within a window confirm
//! - passive: every receiver compares the alert against what it has seen and
//!   decides on its own, without replies
//!
//! A neighbor's judgement is modeled as a coin: it refuses the alert with
//! probability `p_a`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtdError {
    #[error("ctd.p_a must lie in [0, 1], got {0}")]
    Pa(f64),
    #[error("ctd.reply_window must be positive, got {0}")]
    ReplyWindow(f64),
    #[error("ctd.majority_threshold must lie in [0, 1), got {0}")]
    Threshold(f64),
    #[error("ctd.dup_radius and ctd.dup_window must be non-negative")]
    Dup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventType {
    Accident,
    Fire,
    Flood,
    Crowd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    /// Unique per proposer.
    pub id: u64,
    pub event_type: EventType,
    pub origin: Point,
    pub created: f64,
    pub proposer: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtdConfig {
    pub reply_window: f64,
    /// Confirmed fraction that must be strictly exceeded.
    pub majority_threshold: f64,
    /// Probability that a node refuses to accept the alert.
    pub p_a: f64,
    pub dup_radius: f64,
    pub dup_window: f64,
}

impl Default for CtdConfig {
    fn default() -> Self {
        CtdConfig { reply_window: 2.0, majority_threshold: 0.5, p_a: 0.0, dup_radius: 100.0, dup_window: 60.0 }
    }
}

impl CtdConfig {
    pub fn validate(&self) -> Vec<CtdError> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.p_a) {
            errs.push(CtdError::Pa(self.p_a));
        }
        if !(self.reply_window > 0.0) {
            errs.push(CtdError::ReplyWindow(self.reply_window));
        }
        if !(0.0..1.0).contains(&self.majority_threshold) {
            errs.push(CtdError::Threshold(self.majority_threshold));
        }
        if !(self.dup_radius >= 0.0 && self.dup_window >= 0.0) {
            errs.push(CtdError::Dup);
        }
        errs
    }
}

/// Same event type, origins within `dup_radius`, creation times within `dup_window`.
pub fn alert_similarity(a: &Alert, b: &Alert, cfg: &CtdConfig) -> bool {
    a.event_type == b.event_type
        && a.origin.distance(&b.origin) <= cfg.dup_radius
        && (a.created - b.created).abs() <= cfg.dup_window
}

/// A neighbor's reply to an assessment query: true confirms.
pub fn assess<R: Rng>(cfg: &CtdConfig, rng: &mut R) -> bool {
    rng.random::<f64>() >= cfg.p_a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryOutcome {
    Broadcast,
    Discard,
}

/// Tally replies collected during the reply window.
///
/// Broadcast iff confirms/replies strictly exceeds the threshold; with no
/// replies the alert is discarded and the query is not repeated.
pub fn ctd_query_decide(confirms: usize, replies: usize, cfg: &CtdConfig) -> QueryOutcome {
    if replies == 0 {
        return QueryOutcome::Discard;
    }
    if confirms as f64 / replies as f64 > cfg.majority_threshold {
        QueryOutcome::Broadcast
    } else {
        QueryOutcome::Discard
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PassiveOutcome {
    Rebroadcast,
    /// Similar alert already seen.
    Suppress,
    /// Stored as seen but refused.
    Reject,
}

/// Per-node memory of alerts seen, for similarity-based suppression.
#[derive(Debug, Clone, Default)]
pub struct AlertMemory {
    seen: Vec<Alert>,
}

impl AlertMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn has_similar(&self, alert: &Alert, cfg: &CtdConfig) -> bool {
        self.seen.iter().any(|s| alert_similarity(s, alert, cfg))
    }

    pub fn remember(&mut self, alert: Alert) {
        self.seen.push(alert);
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Passive assessment of an incoming alert; updates `memory`.
pub fn ctd_passive_process<R: Rng>(
    memory: &mut AlertMemory,
    incoming: &Alert,
    cfg: &CtdConfig,
    rng: &mut R,
) -> PassiveOutcome {
    if memory.has_similar(incoming, cfg) {
        return PassiveOutcome::Suppress;
    }
    memory.remember(incoming.clone());
    if assess(cfg, rng) {
        PassiveOutcome::Rebroadcast
    } else {
        PassiveOutcome::Reject
    }
}
