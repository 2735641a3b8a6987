//! Deterministic discrete-event simulation of warning dissemination in urban
//! vehicular and pedestrian ad hoc networks.
//!
//! The crate is organized bottom-up:
//!
//! - [`sim`]: event queue, clock and seeded random substreams
//! - [`roadnet`]: road graphs, grid scenarios and mobility traces
//! - [`radio`]: unit-disk broadcast channel with collisions and link metrics
//! - [`routing`]: GPSR and five-metric forwarder selection with adaptive weights
//! - [`dissemination`]: game-theoretic broadcast suppression, timers and baselines
//! - [`ctd`]: collaborative alert assessment for pedestrian devices
//! - [`metrics`]: per-run ledgers, delivery ratios and confidence intervals
//! - [`scenario`], [`netsim`], [`experiment`], [`report`]: configuration, the
//!   protocol-driving simulator, multi-seed sweeps and report files

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ctd;
pub mod dissemination;
pub mod experiment;
pub mod geom;
pub mod message;
pub mod metrics;
pub mod netsim;
pub mod radio;
pub mod report;
pub mod roadnet;
pub mod routing;
pub mod scenario;
pub mod sim;
pub mod spatial;

use serde::{Deserialize, Serialize};

pub use geom::{Point, Rect, Vec2};

/// Identifier of a vehicle, pedestrian device or roadside unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
