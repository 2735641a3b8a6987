//! CSMA medium access: carrier sense, random backoff, unicast retries.

use rand::Rng;

use super::node::{Body, Ev, Outgoing, Packet};
use super::{target, NetsimError, RxRecord, Sim, TxRecord, MAC_QUEUE_LIMIT};
use crate::message::MessageKind;
use crate::radio::TxId;
use crate::sim::{EventKind, Scheduler};
use crate::NodeId;

/// Inter-frame space in slots.
const DIFS_SLOTS: u32 = 3;
const CW_MIN: u32 = 15;
const CW_MAX: u32 = 1023;
/// Smoothing of the per-node MAC loss estimate.
const MAC_LOSS_EWMA: f64 = 0.1;

impl Sim<'_> {
    fn backoff(&mut self, retries: u32) -> f64 {
        let cw = ((CW_MIN + 1) << retries.min(6)).saturating_sub(1).min(CW_MAX);
        let slots = DIFS_SLOTS + self.rng.mac.random_range(0..=cw);
        slots as f64 * self.cfg.radio.slot
    }

    pub(super) fn enqueue(
        &mut self,
        sched: &mut Scheduler<Ev>,
        t: f64,
        node: u32,
        pkt: Packet,
    ) -> Result<(), NetsimError> {
        let n = &mut self.nodes[node as usize];
        if n.queue.len() >= MAC_QUEUE_LIMIT {
            return Ok(());
        }
        n.queue.push_back(Outgoing { pkt, retries: 0 });
        if !n.mac_busy {
            n.mac_busy = true;
            let delay = self.backoff(0);
            sched.schedule(t + delay, target(node), EventKind::TransmitStart, Ev::MacAttempt(node))?;
        }
        Ok(())
    }

    pub(super) fn on_mac_attempt(&mut self, sched: &mut Scheduler<Ev>, t: f64, node: u32) -> Result<(), NetsimError> {
        let id = NodeId(node);
        let Some(front) = self.nodes[node as usize].queue.front() else {
            self.nodes[node as usize].mac_busy = false;
            return Ok(());
        };
        let retries = front.retries;
        if let Some(end) = self.channel.busy_until(id, t, self.cfg.radio.slot) {
            let delay = self.backoff(retries);
            sched.schedule(end + delay, target(node), EventKind::TransmitStart, Ev::MacAttempt(node))?;
            return Ok(());
        }
        let out = self.nodes[node as usize].queue.pop_front().expect("checked non-empty");
        let sender_pos = self.nodes[node as usize].pos;
        let mut near = Vec::new();
        self.grid.within(&sender_pos, self.cfg.radio.r_max, &mut near);
        let candidates: Vec<NodeId> = near
            .into_iter()
            .filter(|&j| j != node as usize)
            .filter(|&j| !(self.cfg.radio.obstacle_blocking && self.graph.line_blocked(&sender_pos, &self.nodes[j].pos)))
            .map(|j| NodeId(j as u32))
            .collect();
        let airtime = self.cfg.radio.airtime(out.pkt.msg.size_bytes);
        self.ledger.count_message(out.pkt.msg.kind);
        if let Some(log) = &mut self.log {
            if out.pkt.msg.kind != MessageKind::Beacon {
                log.tx.push(TxRecord {
                    t,
                    sender: id,
                    kind: out.pkt.msg.kind,
                    id: out.pkt.msg.id,
                    origin: out.pkt.msg.origin,
                    ttl: out.pkt.msg.ttl,
                    hops: out.pkt.msg.hops,
                });
            }
        }
        if let Body::Payload(p) = out.pkt.body {
            if let Some(st) = self.nodes[node as usize].state[p as usize].as_mut() {
                st.last_tx = Some(t);
                st.forwarded += 1;
            }
        }
        let tx = self.channel.begin(id, t, airtime, candidates);
        self.in_flight.insert(tx, (node, out.pkt, out.retries));
        sched.schedule(t + airtime, target(node), EventKind::TransmitEnd, Ev::TxEnd(tx))?;
        Ok(())
    }

    pub(super) fn on_tx_end(&mut self, sched: &mut Scheduler<Ev>, t: f64, tx: TxId) -> Result<(), NetsimError> {
        let outcome = self.channel.complete(tx, self.cfg.radio.per_link_loss, &mut self.rng.radio);
        let (sender, pkt, retries) = self.in_flight.remove(&tx).expect("transmission in flight");
        self.ledger.receivable += outcome.receivable() as u64;
        self.ledger.received += outcome.delivered.len() as u64;
        self.ledger.lost_collision += outcome.collided.len() as u64;
        self.ledger.lost_link += outcome.lost.len() as u64;
        self.ledger.collisions += outcome.collision_events;

        match pkt.dest {
            Some(dest) => {
                let ok = outcome.delivered.iter().any(|&(r, _)| r == dest);
                let n = &mut self.nodes[sender as usize];
                n.mac_loss = (1.0 - MAC_LOSS_EWMA) * n.mac_loss + MAC_LOSS_EWMA * if ok { 0.0 } else { 1.0 };
                if ok {
                    self.receive(sched, t, dest.0, sender, &pkt)?;
                } else if retries < self.cfg.routing.mac_retries {
                    n.queue.push_front(Outgoing { pkt, retries: retries + 1 });
                } else if matches!(pkt.body, Body::Data { .. }) {
                    // Link failure feedback: forget the neighbor and pick another hop.
                    n.table.remove(dest);
                    n.summaries.remove(&dest);
                    self.route(sched, t, sender, Packet { dest: None, ..pkt })?;
                }
            }
            None => {
                for &(r, _) in &outcome.delivered {
                    self.receive(sched, t, r.0, sender, &pkt)?;
                }
            }
        }

        let n = &self.nodes[sender as usize];
        if n.queue.is_empty() {
            self.nodes[sender as usize].mac_busy = false;
        } else {
            let retries = n.queue.front().map_or(0, |o| o.retries);
            let delay = self.backoff(retries);
            sched.schedule(t + delay, target(sender), EventKind::TransmitStart, Ev::MacAttempt(sender))?;
        }
        Ok(())
    }

    pub(super) fn log_rx(&mut self, t: f64, receiver: u32, sender: u32, pkt: &Packet, duplicate: bool) {
        if let Some(log) = &mut self.log {
            log.rx.push(RxRecord {
                t,
                receiver: NodeId(receiver),
                sender: NodeId(sender),
                kind: pkt.msg.kind,
                id: pkt.msg.id,
                ttl: pkt.msg.ttl,
                duplicate,
            });
        }
    }
}
