use std::collections::BTreeMap;

use crate::geom::{Point, Vec2};
use crate::NodeId;

/// What a node knows about one neighbor from its latest hello.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborEntry {
    pub id: NodeId,
    pub pos: Point,
    pub speed: f64,
    pub heading: Vec2,
    /// Nodes per km² around the neighbor, as advertised.
    pub advertised_density: f64,
    /// Available bandwidth in bits/s, as advertised.
    pub advertised_abe: f64,
    /// Fraction of failed MAC transmissions, as advertised.
    pub advertised_mac_loss: f64,
    pub last_heard: f64,
}

impl NeighborEntry {
    /// Minimal entry carrying only identity and position.
    pub fn at(id: NodeId, pos: Point, last_heard: f64) -> Self {
        NeighborEntry {
            id,
            pos,
            speed: 0.0,
            heading: Vec2::default(),
            advertised_density: 0.0,
            advertised_abe: 0.0,
            advertised_mac_loss: 0.0,
            last_heard,
        }
    }
}

/// Neighbor table with timeout-based expiry.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    entries: BTreeMap<NodeId, NeighborEntry>,
    timeout: f64,
}

impl NeighborTable {
    pub fn new(timeout: f64) -> Self {
        NeighborTable { entries: BTreeMap::new(), timeout }
    }

    pub fn timeout(&self) -> f64 {
        self.timeout
    }

    /// Insert or refresh an entry. Returns true when the neighbor was absent
    /// or had already expired (a new contact).
    pub fn upsert(&mut self, mut entry: NeighborEntry) -> bool {
        entry.advertised_mac_loss = entry.advertised_mac_loss.clamp(0.0, 1.0);
        entry.advertised_abe = entry.advertised_abe.max(0.0);
        let now = entry.last_heard;
        let new_contact = match self.entries.get(&entry.id) {
            Some(old) => now - old.last_heard > self.timeout,
            None => true,
        };
        self.entries.insert(entry.id, entry);
        new_contact
    }

    pub fn remove(&mut self, id: NodeId) -> Option<NeighborEntry> {
        self.entries.remove(&id)
    }

    pub fn is_fresh(&self, id: NodeId, now: f64) -> bool {
        self.entries.get(&id).is_some_and(|e| now - e.last_heard <= self.timeout)
    }

    pub fn get(&self, id: NodeId) -> Option<&NeighborEntry> {
        self.entries.get(&id)
    }

    /// Fresh entries in ascending id order.
    pub fn fresh(&self, now: f64) -> impl Iterator<Item = &NeighborEntry> {
        let timeout = self.timeout;
        self.entries.values().filter(move |e| now - e.last_heard <= timeout)
    }

    pub fn fresh_count(&self, now: f64) -> usize {
        self.fresh(now).count()
    }

    /// Drop entries not heard for longer than the timeout.
    pub fn expire(&mut self, now: f64) {
        let timeout = self.timeout;
        self.entries.retain(|_, e| now - e.last_heard <= timeout);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_expire_after_timeout() {
        let mut t = NeighborTable::new(3.0);
        assert!(t.upsert(NeighborEntry::at(NodeId(4), Point::new(1.0, 1.0), 0.0)));
        assert!(!t.upsert(NeighborEntry::at(NodeId(4), Point::new(2.0, 1.0), 1.0)));
        assert_eq!(t.fresh_count(3.9), 1);
        assert_eq!(t.fresh_count(4.1), 0);
        assert!(t.upsert(NeighborEntry::at(NodeId(4), Point::new(2.0, 1.0), 4.5)));
        t.expire(9.0);
        assert!(t.is_empty());
    }

    #[test]
    fn advertised_values_are_clamped() {
        let mut t = NeighborTable::new(1.0);
        let mut e = NeighborEntry::at(NodeId(1), Point::default(), 0.0);
        e.advertised_mac_loss = 1.5;
        e.advertised_abe = -3.0;
        t.upsert(e);
        let e = t.get(NodeId(1)).unwrap();
        assert_eq!(e.advertised_mac_loss, 1.0);
        assert_eq!(e.advertised_abe, 0.0);
    }
}
