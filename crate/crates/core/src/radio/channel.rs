use std::collections::VecDeque;

use rand::Rng;

use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxId(pub u64);

/// A frame on the air.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub id: TxId,
    pub sender: NodeId,
    pub start: f64,
    pub end: f64,
    /// Nodes in range of the sender at `start`, ascending.
    pub candidates: Vec<NodeId>,
    resolved: bool,
}

impl Transmission {
    pub fn audible_at(&self, node: NodeId) -> bool {
        self.candidates.binary_search(&node).is_ok()
    }

    fn overlaps(&self, other: &Transmission) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Result of resolving one transmission at its end time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BroadcastOutcome {
    /// Receivers that got the frame, with the delivery time.
    pub delivered: Vec<(NodeId, f64)>,
    /// Receivers that lost the frame to an overlapping transmission.
    pub collided: Vec<NodeId>,
    /// Receivers that lost the frame to independent link loss.
    pub lost: Vec<NodeId>,
    /// New collision events (each overlapping pair counted once per receiver).
    pub collision_events: u64,
}

impl BroadcastOutcome {
    pub fn receivable(&self) -> usize {
        self.delivered.len() + self.collided.len() + self.lost.len()
    }
}

#[derive(Debug, Clone, Default)]
struct NodeStats {
    /// Disjoint, time-ordered busy intervals heard by the node.
    busy: VecDeque<(f64, f64)>,
    /// Reception attempts: (time, lost to collision).
    receptions: VecDeque<(f64, bool)>,
    collided_in_window: usize,
}

/// Shared medium: tracks frames on the air, resolves collisions and keeps
/// per-node sliding-window load statistics.
#[derive(Debug, Clone)]
pub struct Channel {
    active: Vec<Transmission>,
    next_id: u64,
    max_airtime: f64,
    window: f64,
    stats: Vec<NodeStats>,
}

impl Channel {
    /// `window` is the statistics horizon in seconds (busy ratio, collision fraction).
    pub fn new(node_count: usize, window: f64) -> Self {
        Channel {
            active: Vec::new(),
            next_id: 0,
            max_airtime: 0.0,
            window,
            stats: vec![NodeStats::default(); node_count],
        }
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Put a frame on the air. `candidates` must exclude the sender.
    pub fn begin(&mut self, sender: NodeId, start: f64, airtime: f64, mut candidates: Vec<NodeId>) -> TxId {
        candidates.sort_unstable();
        candidates.dedup();
        debug_assert!(candidates.binary_search(&sender).is_err());
        let id = TxId(self.next_id);
        self.next_id += 1;
        let end = start + airtime;
        self.max_airtime = self.max_airtime.max(airtime);
        self.note_busy(sender, start, end);
        for &c in &candidates {
            self.note_busy(c, start, end);
        }
        self.active.push(Transmission { id, sender, start, end, candidates, resolved: false });
        id
    }

    pub fn transmission(&self, id: TxId) -> Option<&Transmission> {
        self.active.binary_search_by_key(&id, |t| t.id).ok().map(|i| &self.active[i])
    }

    /// Whether `node` is currently sending.
    pub fn is_transmitting(&self, node: NodeId, now: f64) -> bool {
        self.active.iter().any(|t| t.sender == node && t.start <= now && now < t.end)
    }

    /// End of the latest transmission `node` can sense at `now`, if any.
    ///
    /// Frames that started less than `sense_delay` ago are not yet sensed.
    pub fn busy_until(&self, node: NodeId, now: f64, sense_delay: f64) -> Option<f64> {
        self.active
            .iter()
            .filter(|t| t.end > now && (t.sender == node || (t.start <= now - sense_delay && t.audible_at(node))))
            .map(|t| t.end)
            .reduce(f64::max)
    }

    /// Resolve a transmission at its end time.
    ///
    /// A candidate that heard any other overlapping frame (or was itself
    /// sending) loses this frame; survivors are then dropped independently
    /// with probability `per_link_loss`.
    pub fn complete<R: Rng>(&mut self, id: TxId, per_link_loss: f64, rng: &mut R) -> BroadcastOutcome {
        let idx = self
            .active
            .binary_search_by_key(&id, |t| t.id)
            .expect("completing an unknown transmission");
        let mut out = BroadcastOutcome::default();
        let now = self.active[idx].end;
        {
            let tx = &self.active[idx];
            for &r in &tx.candidates {
                let mut collided = false;
                for other in &self.active {
                    if other.id == tx.id || !other.overlaps(tx) {
                        continue;
                    }
                    if other.sender == r {
                        collided = true;
                        out.collision_events += 1;
                    } else if other.audible_at(r) {
                        collided = true;
                        if other.id < tx.id {
                            out.collision_events += 1;
                        }
                    }
                }
                if collided {
                    out.collided.push(r);
                } else if per_link_loss > 0.0 && rng.random::<f64>() < per_link_loss {
                    out.lost.push(r);
                } else {
                    out.delivered.push((r, now));
                }
            }
        }
        self.active[idx].resolved = true;
        for &r in &out.collided {
            self.note_reception(r, now, true);
        }
        for &r in &out.lost {
            self.note_reception(r, now, false);
        }
        for &(r, _) in &out.delivered {
            self.note_reception(r, now, false);
        }
        let horizon = now - self.max_airtime;
        self.active.retain(|t| !(t.resolved && t.end < horizon));
        out
    }

    fn note_busy(&mut self, node: NodeId, start: f64, end: f64) {
        let Some(st) = self.stats.get_mut(node.index()) else {
            return;
        };
        match st.busy.back_mut() {
            Some(last) if start <= last.1 => last.1 = last.1.max(end),
            _ => st.busy.push_back((start, end)),
        }
        let cutoff = start - self.window;
        while st.busy.front().is_some_and(|&(_, e)| e < cutoff) {
            st.busy.pop_front();
        }
    }

    fn note_reception(&mut self, node: NodeId, t: f64, collided: bool) {
        let window = self.window;
        let Some(st) = self.stats.get_mut(node.index()) else {
            return;
        };
        st.receptions.push_back((t, collided));
        if collided {
            st.collided_in_window += 1;
        }
        prune_receptions(st, t - window);
    }

    /// Fraction of the last `window` seconds during which `node` heard the medium busy.
    pub fn busy_ratio(&self, node: NodeId, now: f64) -> f64 {
        let Some(st) = self.stats.get(node.index()) else {
            return 0.0;
        };
        let lo = now - self.window;
        let busy: f64 = st
            .busy
            .iter()
            .map(|&(s, e)| (e.min(now) - s.max(lo)).max(0.0))
            .sum();
        (busy / self.window).clamp(0.0, 1.0)
    }

    /// Fraction of receptions at `node` within the window lost to collisions.
    pub fn collision_fraction(&mut self, node: NodeId, now: f64) -> f64 {
        let window = self.window;
        let Some(st) = self.stats.get_mut(node.index()) else {
            return 0.0;
        };
        prune_receptions(st, now - window);
        if st.receptions.is_empty() {
            0.0
        } else {
            st.collided_in_window as f64 / st.receptions.len() as f64
        }
    }
}

fn prune_receptions(st: &mut NodeStats, cutoff: f64) {
    while let Some(&(t, c)) = st.receptions.front() {
        if t >= cutoff {
            break;
        }
        st.receptions.pop_front();
        if c {
            st.collided_in_window -= 1;
        }
    }
}
