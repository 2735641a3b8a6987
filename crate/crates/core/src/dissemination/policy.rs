use rand::Rng;
use serde::{Deserialize, Serialize};

use super::factors::{availability, distance_factor, utility, UtilityInputs};
use super::game::{forwarding_game_equilibrium, vod_forward_probability, GameConfig, Mechanism};
use super::timers::{retransmission_delay, TimerConfig, TimerScheme};
use crate::roadnet::IntersectionId;
use crate::sim::EventHandle;

/// Broadcast dissemination schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BroadcastProtocol {
    /// Rebroadcast iff the sender is farther than a distance threshold.
    FloodingDistance,
    /// Rebroadcast at every new junction while the message is alive.
    Jsf,
    /// Rebroadcast when neighbors exist, otherwise carry until a new neighbor appears.
    Nsf,
    /// Rebroadcast only when closest to an intersection among the likely hearers.
    Njl,
    AddVod,
    AddFg,
    TimerFixed,
    TimerSpeed,
    TimerMap,
}

impl BroadcastProtocol {
    pub fn timer_scheme(self) -> Option<TimerScheme> {
        match self {
            BroadcastProtocol::TimerFixed => Some(TimerScheme::Fixed),
            BroadcastProtocol::TimerSpeed => Some(TimerScheme::SpeedAdaptive),
            BroadcastProtocol::TimerMap => Some(TimerScheme::MapPolling),
            _ => None,
        }
    }

    pub fn is_add(self) -> bool {
        matches!(self, BroadcastProtocol::AddVod | BroadcastProtocol::AddFg)
    }
}

/// Per-node, per-message bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct DisseminationState {
    pub first_heard: f64,
    pub times_heard: u32,
    pub last_sender_distance: f64,
    /// Holding a copy for store-carry-forward.
    pub scf_buffer: bool,
    pub timer: Option<EventHandle>,
    pub forwarded: u32,
    /// Intersection of the most recent junction relay.
    pub last_junction: Option<IntersectionId>,
    /// Time of the node's latest transmission of this message.
    pub last_tx: Option<f64>,
}

impl DisseminationState {
    pub fn first(t: f64, sender_distance: f64) -> Self {
        DisseminationState {
            first_heard: t,
            times_heard: 1,
            last_sender_distance: sender_distance,
            scf_buffer: false,
            timer: None,
            forwarded: 0,
            last_junction: None,
            last_tx: None,
        }
    }

    pub fn heard_again(&mut self, sender_distance: f64) {
        self.times_heard += 1;
        self.last_sender_distance = sender_distance;
    }
}

/// What the receiver knows when a warning copy arrives.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveContext<'a> {
    /// The message id was already seen.
    pub duplicate: bool,
    pub sender_distance: f64,
    pub r_max: f64,
    /// Distance to the nearest intersection.
    pub d_rint: f64,
    pub at_intersection: bool,
    /// Closest to an intersection among the nodes that likely heard the same copy.
    pub closest_to_intersection: bool,
    pub lqf: f64,
    /// ABE over bitrate, in [0, 1].
    pub abe_norm: f64,
    pub fresh_neighbors: usize,
    /// Estimated availabilities of the other candidates (forwarding game).
    pub peer_availabilities: &'a [f64],
    pub speed: f64,
    pub v_max: f64,
    pub d_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    /// Already seen.
    Suppress,
    Forward,
    /// Keep the copy without forwarding now.
    Decline,
    /// No neighbors: buffer and retry on the next contact.
    StoreCarry,
    /// Retransmit after the given delay.
    Schedule(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Forwarding probability used, for game-based schemes.
    pub probability: Option<f64>,
    /// The equilibrium iteration did not converge.
    pub flagged: bool,
}

impl Decision {
    fn plain(action: Action) -> Self {
        Decision { action, probability: None, flagged: false }
    }
}

/// Forwarding probability of an ADD receiver. Returns (p, non-convergence flag).
pub(crate) fn add_probability(ctx: &ReceiveContext<'_>, game: &GameConfig) -> (f64, bool) {
    match game.mechanism {
        Mechanism::VolunteerDilemma => {
            let d_sr = ctx.sender_distance.min(ctx.r_max);
            let df = distance_factor(d_sr, ctx.d_rint, ctx.r_max).unwrap_or(0.0);
            let u = utility(&UtilityInputs {
                df,
                lqf: ctx.lqf.clamp(0.0, 1.0),
                alpha1: game.alpha1,
                alpha2: game.alpha2,
            });
            (vod_forward_probability(u, ctx.fresh_neighbors.max(1), game.cost_k), false)
        }
        Mechanism::ForwardingGame => {
            let own = availability(ctx.sender_distance.min(ctx.r_max), ctx.r_max, ctx.abe_norm.clamp(0.0, 1.0));
            let mut avails = Vec::with_capacity(ctx.peer_availabilities.len() + 1);
            avails.push(own);
            avails.extend_from_slice(ctx.peer_availabilities);
            let eq = forwarding_game_equilibrium(&avails, game);
            (eq.probs[0], !eq.converged)
        }
    }
}

/// Decide what to do with an arriving warning copy.
pub fn on_receive_warning<R: Rng>(
    protocol: BroadcastProtocol,
    ctx: &ReceiveContext<'_>,
    game: &GameConfig,
    timers: &TimerConfig,
    rng: &mut R,
) -> Decision {
    if ctx.duplicate {
        return Decision::plain(Action::Suppress);
    }
    match protocol {
        BroadcastProtocol::FloodingDistance => Decision::plain(if ctx.sender_distance > ctx.d_threshold {
            Action::Forward
        } else {
            Action::Decline
        }),
        BroadcastProtocol::Jsf => Decision::plain(if ctx.at_intersection { Action::Forward } else { Action::Decline }),
        BroadcastProtocol::Nsf => Decision::plain(if ctx.fresh_neighbors > 0 {
            Action::Forward
        } else {
            Action::StoreCarry
        }),
        BroadcastProtocol::Njl => Decision::plain(if ctx.closest_to_intersection {
            Action::Forward
        } else {
            Action::Decline
        }),
        BroadcastProtocol::AddVod | BroadcastProtocol::AddFg => {
            if ctx.fresh_neighbors == 0 {
                return Decision::plain(Action::StoreCarry);
            }
            let game = GameConfig {
                mechanism: if protocol == BroadcastProtocol::AddVod {
                    Mechanism::VolunteerDilemma
                } else {
                    Mechanism::ForwardingGame
                },
                ..game.clone()
            };
            let (p, flagged) = add_probability(ctx, &game);
            let forward = p >= 1.0 || rng.random::<f64>() < p;
            Decision {
                action: if forward { Action::Forward } else { Action::Decline },
                probability: Some(p),
                flagged,
            }
        }
        BroadcastProtocol::TimerFixed | BroadcastProtocol::TimerSpeed | BroadcastProtocol::TimerMap => {
            let scheme = protocol.timer_scheme().expect("timer protocol");
            let d = retransmission_delay(scheme, ctx.speed, ctx.v_max, ctx.at_intersection, timers);
            Decision::plain(if d == 0.0 { Action::Forward } else { Action::Schedule(d) })
        }
    }
}
