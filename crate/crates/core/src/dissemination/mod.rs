//! Broadcast warning dissemination.
//!
//! Pure decision functions live here; the simulator in [`crate::netsim`]
//! applies them to live node state. Forwarding suppression under ADD uses a
//! utility built from a distance factor and a link-quality factor, mapped to
//! a forwarding probability by either a volunteer's-dilemma law or the
//! equilibrium of a forwarding game.

mod factors;
mod game;
mod policy;
mod timers;

pub use factors::{availability, distance_factor, utility, FactorError, UtilityInputs};
pub use game::{
    forwarding_game_equilibrium, forwarding_game_payoff, vod_forward_probability, Equilibrium, GameConfig,
    GameError, Mechanism,
};
pub(crate) use policy::add_probability;
pub use policy::{on_receive_warning, Action, BroadcastProtocol, Decision, DisseminationState, ReceiveContext};
pub use timers::{retransmission_delay, TimerConfig, TimerError, TimerScheme};
