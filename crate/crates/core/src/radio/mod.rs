//! Broadcast radio abstraction.
//!
//! Propagation is unit-disk: a frame is receivable iff the receiver is within
//! `r_max` and, when obstacle blocking is enabled, the straight line between
//! the two positions misses every building. Receivers that hear two
//! overlapping transmissions lose both.

mod channel;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use channel::{BroadcastOutcome, Channel, Transmission, TxId};

use crate::geom::Point;
use crate::roadnet::RoadGraph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("r_max must be positive, got {0}")]
    Range(f64),
    #[error("bitrate must be positive, got {0}")]
    Bitrate(f64),
    #[error("per_link_loss must lie in [0, 1], got {0}")]
    Loss(f64),
    #[error("slot must be positive, got {0}")]
    Slot(f64),
    #[error("link quality input {name} = {value} outside [0, 1]")]
    LinkInput { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Transmission range in meters.
    pub r_max: f64,
    /// Channel bitrate in bits/s.
    pub bitrate: f64,
    /// Independent per-reception loss probability.
    pub per_link_loss: f64,
    pub obstacle_blocking: bool,
    /// Backoff and carrier-sense granularity in seconds.
    pub slot: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            r_max: 300.0,
            bitrate: 6e6,
            per_link_loss: 0.05,
            obstacle_blocking: false,
            slot: 13e-6,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Vec<RadioError> {
        let mut errs = Vec::new();
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            errs.push(RadioError::Range(self.r_max));
        }
        if !(self.bitrate > 0.0 && self.bitrate.is_finite()) {
            errs.push(RadioError::Bitrate(self.bitrate));
        }
        if !(0.0..=1.0).contains(&self.per_link_loss) {
            errs.push(RadioError::Loss(self.per_link_loss));
        }
        if !(self.slot > 0.0 && self.slot.is_finite()) {
            errs.push(RadioError::Slot(self.slot));
        }
        errs
    }

    /// Airtime of a frame of `size_bytes`.
    pub fn airtime(&self, size_bytes: u32) -> f64 {
        size_bytes as f64 * 8.0 / self.bitrate
    }
}

/// Unit-disk reachability with optional obstacle blocking.
pub fn in_range(a: &Point, b: &Point, cfg: &RadioConfig, graph: &RoadGraph) -> bool {
    a.distance(b) <= cfg.r_max && !(cfg.obstacle_blocking && graph.line_blocked(a, b))
}

/// Ingredients of the link-quality factor, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQualityInputs {
    pub signal: f64,
    pub channel: f64,
    pub collision_prob: f64,
}

impl LinkQualityInputs {
    pub fn new(signal: f64, channel: f64, collision_prob: f64) -> Result<Self, RadioError> {
        for (name, value) in [("signal", signal), ("channel", channel), ("collision_prob", collision_prob)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(RadioError::LinkInput { name, value });
            }
        }
        Ok(LinkQualityInputs { signal, channel, collision_prob })
    }

    /// Inputs as observed by a receiver `distance` meters from the sender.
    ///
    /// Signal falls linearly to zero at `r_max`; channel quality is the idle
    /// fraction of the receiver's recent airtime.
    pub fn observed(distance: f64, r_max: f64, busy_ratio: f64, collision_prob: f64) -> Self {
        LinkQualityInputs {
            signal: (1.0 - distance / r_max).clamp(0.0, 1.0),
            channel: (1.0 - busy_ratio).clamp(0.0, 1.0),
            collision_prob: collision_prob.clamp(0.0, 1.0),
        }
    }
}

/// Link-quality factor: equal-weight mean of signal, channel and collision-free quality.
pub fn lqf(inputs: &LinkQualityInputs) -> f64 {
    (inputs.signal + inputs.channel + (1.0 - inputs.collision_prob)) / 3.0
}

/// Available bandwidth: the idle fraction of the channel times its bitrate.
pub fn abe_estimate(busy_ratio: f64, bitrate: f64) -> f64 {
    (1.0 - busy_ratio.clamp(0.0, 1.0)) * bitrate
}

/// Adaptive beacon interval: grows quadratically with channel load.
pub fn atb_interval(busy_ratio: f64, i_min: f64, i_max: f64) -> f64 {
    debug_assert!(0.0 < i_min && i_min <= i_max);
    let b = busy_ratio.clamp(0.0, 1.0);
    i_min + (i_max - i_min) * b * b
}
