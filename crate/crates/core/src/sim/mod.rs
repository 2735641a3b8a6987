//! Deterministic discrete-event engine.
//!
//! Events are ordered by `(fire_time, sequence)`. The sequence counter is
//! assigned at scheduling time, so equal-time events fire in insertion order
//! regardless of which node they target.

mod engine;
mod rng;

pub use engine::{EventHandle, EventKind, Scheduler, SimError, SimEvent, Target};
pub use rng::{RngStreams, StreamId};
