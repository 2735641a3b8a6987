//! Beacon, dissemination, routing and assessment event handlers.

use std::f64::consts::PI;

use rand::Rng;

use super::bitset::Bitset;
use super::node::{BeaconInfo, Body, Ev, NodeKind, Packet, QueryTally};
use super::{target, NetsimError, Sim};
use crate::ctd::{assess, ctd_passive_process, ctd_query_decide, PassiveOutcome, QueryOutcome};
use crate::dissemination::{
    add_probability, availability, on_receive_warning, Action, BroadcastProtocol, DisseminationState,
    GameConfig, Mechanism, ReceiveContext, TimerScheme, retransmission_delay,
};
use crate::geom::Point;
use crate::message::{Message, MessageKind};
use crate::radio::{abe_estimate, atb_interval, lqf, LinkQualityInputs};
use crate::routing::{
    dsw_update, gpsr_greedy_next, gpsr_perimeter_next, normalize_metrics, select_forwarder, MetricVector,
    NeighborEntry, PerimeterState, PerimeterStep,
};
use crate::scenario::{BeaconMode, Protocol, ProtocolFamily};
use crate::sim::{EventKind, Scheduler, Target};
use crate::NodeId;

/// Size of an assessment reply frame, bytes.
const REPLY_BYTES: u32 = 64;
/// Upper bound on forwarding-game players considered per decision.
const FG_MAX_PEERS: usize = 8;

impl Sim<'_> {
    fn broadcast_protocol(&self) -> Option<BroadcastProtocol> {
        match self.protocol.family() {
            ProtocolFamily::Broadcast(b) => Some(b),
            _ => None,
        }
    }

    fn alive(&self, p: u32, t: f64) -> bool {
        t <= self.payloads[p as usize].created + self.cfg.warning.lifetime
    }

    /// Copy of payload `p` as node `node` would transmit it next.
    fn outgoing_copy(&self, node: u32, p: u32) -> Option<Message> {
        let base = &self.payloads[p as usize];
        if Some(node) == self.source {
            return Some(base.clone());
        }
        let n = &self.nodes[node as usize];
        if n.kind == NodeKind::Pedestrian && base.origin == NodeId(node) {
            return Some(base.clone());
        }
        let held = Message { hops: n.rx_hops[p as usize], ttl: n.rx_ttl[p as usize], ..base.clone() };
        held.relay().ok()
    }

    fn jitter(&mut self) -> f64 {
        if self.cfg.warning.jitter > 0.0 {
            self.rng.mac.random_range(0.0..self.cfg.warning.jitter)
        } else {
            0.0
        }
    }

    /// Broadcast payload `p` from `node` after a random jitter.
    fn send_payload(
        &mut self,
        sched: &mut Scheduler<Ev>,
        t: f64,
        node: u32,
        p: u32,
        guard: Option<(u32, u32)>,
    ) -> Result<(), NetsimError> {
        let Some(msg) = self.outgoing_copy(node, p) else {
            return Ok(());
        };
        let delay = self.jitter();
        let pkt = Box::new(Packet { msg, body: Body::Payload(p), dest: None });
        sched.schedule(t + delay, target(node), EventKind::TimerExpiry, Ev::Send { node, pkt, guard })?;
        Ok(())
    }

    pub(super) fn receive(
        &mut self,
        sched: &mut Scheduler<Ev>,
        t: f64,
        receiver: u32,
        sender: u32,
        pkt: &Packet,
    ) -> Result<(), NetsimError> {
        match &pkt.body {
            Body::Beacon(info) => {
                self.on_beacon_rx(sched, t, receiver, sender, info);
                Ok(())
            }
            Body::Payload(p) => match self.protocol.family() {
                ProtocolFamily::Ctd => self.on_alert_rx(sched, t, receiver, sender, pkt, *p),
                _ => self.on_warning_rx(sched, t, receiver, sender, pkt, *p),
            },
            Body::Data { .. } => self.on_data_rx(sched, t, receiver, sender, pkt),
            Body::Query(k) => self.on_query_rx(sched, t, receiver, sender, *k),
            Body::Reply { alert, confirm } => {
                if let Some(tally) = self.nodes[receiver as usize].tallies.get_mut(alert) {
                    if tally.open {
                        tally.replies += 1;
                        tally.confirms += usize::from(*confirm);
                    }
                }
                Ok(())
            }
        }
    }

    // ---- beacons ----

    pub(super) fn on_beacon(&mut self, sched: &mut Scheduler<Ev>, t: f64, n: u32) -> Result<(), NetsimError> {
        let id = NodeId(n);
        let busy = self.channel.busy_ratio(id, t);
        let r_max = self.cfg.radio.r_max;
        let carries_summary = self.broadcast_protocol().is_some();
        let node = &mut self.nodes[n as usize];
        node.table.expire(t);
        node.summaries.retain(|k, _| node.table.get(*k).is_some());
        let fresh = node.table.fresh_count(t);
        let info = BeaconInfo {
            pos: node.pos,
            speed: node.speed,
            heading: node.heading,
            density: (fresh + 1) as f64 / (PI * r_max * r_max / 1e6),
            abe: abe_estimate(busy, self.cfg.radio.bitrate),
            mac_loss: node.mac_loss,
            have: if carries_summary { node.have.clone() } else { Bitset::new(0) },
        };
        let msg = Message {
            id: self.fresh_msg_id(),
            kind: MessageKind::Beacon,
            origin: id,
            origin_pos: info.pos,
            created: t,
            size_bytes: self.cfg.beacon.size_bytes,
            hops: 0,
            ttl: 1,
            frame: None,
        };
        self.enqueue(sched, t, n, Packet { msg, body: Body::Beacon(Box::new(info)), dest: None })?;

        if self.protocol == Protocol::MrpDsw {
            self.update_weights(t, n);
        }
        if fresh > 0 {
            self.retry_buffered(sched, t, n)?;
        }

        let interval = match self.cfg.beacon.mode {
            BeaconMode::Fixed => self.cfg.beacon.interval,
            BeaconMode::Atb => atb_interval(busy, self.cfg.beacon.i_min, self.cfg.beacon.i_max),
        };
        let next = t + interval * (1.0 + self.rng.mac.random_range(-0.05..0.05));
        if next <= self.cfg.duration {
            sched.schedule(next, target(n), EventKind::Beacon, Ev::Beacon(n))?;
        }
        Ok(())
    }

    fn update_weights(&mut self, t: f64, n: u32) {
        let Some(rsu) = self.rsus.first().copied() else {
            return;
        };
        let dest = self.nodes[rsu as usize].pos;
        let node = &self.nodes[n as usize];
        let snaps: Vec<MetricVector> =
            node.table.fresh(t).map(|e| normalize_metrics(e, &node.pos, &dest, &self.metric_cfg)).collect();
        if snaps.len() < 2 {
            return;
        }
        let w = dsw_update(&snaps, &node.weights, self.cfg.routing.lambda, self.cfg.routing.w_floor);
        self.nodes[n as usize].weights = w;
        if let Some(log) = self.log.as_mut() {
            log.weights.push((t, NodeId(n), w));
        }
    }

    fn on_beacon_rx(&mut self, sched: &mut Scheduler<Ev>, t: f64, r: u32, s: u32, info: &BeaconInfo) {
        let node = &mut self.nodes[r as usize];
        let new_contact = node.table.upsert(NeighborEntry {
            id: NodeId(s),
            pos: info.pos,
            speed: info.speed,
            heading: info.heading,
            advertised_density: info.density,
            advertised_abe: info.abe,
            advertised_mac_loss: info.mac_loss,
            last_heard: t,
        });
        node.summaries.insert(NodeId(s), info.have.clone());
        let Some(bp) = self.broadcast_protocol() else {
            return;
        };
        let missing: Vec<u32> = self.nodes[r as usize]
            .have
            .missing_from(&info.have)
            .map(|p| p as u32)
            .filter(|&p| self.alive(p, t))
            .take(self.cfg.warning.scf_burst as usize)
            .collect();
        if missing.is_empty() {
            return;
        }
        // Errors here can only come from scheduling in the past, which a
        // jittered future send cannot do.
        let _ = match bp {
            BroadcastProtocol::Nsf if new_contact => {
                missing.iter().try_for_each(|&p| self.send_payload(sched, t, r, p, None))
            }
            BroadcastProtocol::AddVod | BroadcastProtocol::AddFg => self.scf_offer(sched, t, r, s, info, bp, &missing),
            _ => Ok(()),
        };
    }

    /// ADD store-carry-forward: decide whether to push payloads a neighbor lacks.
    #[allow(clippy::too_many_arguments)]
    fn scf_offer(
        &mut self,
        sched: &mut Scheduler<Ev>,
        t: f64,
        r: u32,
        s: u32,
        info: &BeaconInfo,
        bp: BroadcastProtocol,
        missing: &[u32],
    ) -> Result<(), NetsimError> {
        let r_max = self.cfg.radio.r_max;
        let bitrate = self.cfg.radio.bitrate;
        let game = self.game_for(bp);
        let busy = self.channel.busy_ratio(NodeId(r), t);
        let coll = self.channel.collision_fraction(NodeId(r), t);
        for &p in missing {
            let node = &self.nodes[r as usize];
            let d = node.pos.distance(&info.pos);
            let mut holders = Vec::new();
            for e in node.table.fresh(t) {
                if e.id == NodeId(s) || e.pos.distance(&info.pos) > r_max {
                    continue;
                }
                if node.summaries.get(&e.id).is_some_and(|h| h.get(p as usize)) {
                    holders.push(availability(e.pos.distance(&info.pos).min(r_max), r_max, (e.advertised_abe / bitrate).clamp(0.0, 1.0)));
                }
            }
            holders.sort_by(|a, b| b.total_cmp(a));
            holders.truncate(FG_MAX_PEERS);
            let ctx = ReceiveContext {
                duplicate: false,
                sender_distance: d,
                r_max,
                d_rint: node.d_rint,
                at_intersection: false,
                closest_to_intersection: false,
                lqf: lqf(&LinkQualityInputs::observed(d, r_max, busy, coll)),
                abe_norm: 1.0 - busy,
                fresh_neighbors: 1 + holders.len(),
                peer_availabilities: &holders,
                speed: node.speed,
                v_max: self.v_max,
                d_threshold: 0.0,
            };
            let (prob, flag) = add_probability(&ctx, &game);
            self.note_flag(flag);
            if prob >= 1.0 || self.rng.game.random::<f64>() < prob {
                let heard = self.nodes[r as usize].state[p as usize].as_ref().map_or(0, |st| st.times_heard);
                self.send_payload(sched, t, r, p, Some((p, heard)))?;
            }
        }
        Ok(())
    }

    fn game_for(&self, bp: BroadcastProtocol) -> GameConfig {
        GameConfig {
            mechanism: if bp == BroadcastProtocol::AddFg {
                Mechanism::ForwardingGame
            } else {
                Mechanism::VolunteerDilemma
            },
            ..self.cfg.game.clone()
        }
    }

    fn note_flag(&mut self, flag: bool) {
        if flag {
            self.flagged = true;
            self.ledger.nonconverged += 1;
        }
    }

    /// Re-attempt buffered payloads once neighbors are around.
    fn retry_buffered(&mut self, sched: &mut Scheduler<Ev>, t: f64, n: u32) -> Result<(), NetsimError> {
        let Some(bp) = self.broadcast_protocol() else {
            return Ok(());
        };
        if !matches!(bp, BroadcastProtocol::Nsf | BroadcastProtocol::AddVod | BroadcastProtocol::AddFg) {
            return Ok(());
        }
        let buffered: Vec<u32> = self.nodes[n as usize]
            .state
            .iter()
            .enumerate()
            .filter(|(_, s)| s.as_ref().is_some_and(|s| s.scf_buffer))
            .map(|(p, _)| p as u32)
            .collect();
        for p in buffered {
            if let Some(st) = self.nodes[n as usize].state[p as usize].as_mut() {
                st.scf_buffer = false;
            }
            if !self.alive(p, t) {
                continue;
            }
            let forward = if bp == BroadcastProtocol::Nsf {
                true
            } else {
                let ctx_owned = self.context(t, n, None, p);
                let (prob, flag) = add_probability(&ctx_owned.ctx(), &self.game_for(bp));
                self.note_flag(flag);
                prob >= 1.0 || self.rng.game.random::<f64>() < prob
            };
            if forward {
                self.send_payload(sched, t, n, p, None)?;
            }
        }
        Ok(())
    }

    // ---- warning dissemination ----

    /// Receiver-side decision inputs. `sender` is the node the copy came from.
    fn context(&mut self, t: f64, r: u32, sender: Option<u32>, _p: u32) -> OwnedContext {
        let r_max = self.cfg.radio.r_max;
        let bitrate = self.cfg.radio.bitrate;
        let busy = self.channel.busy_ratio(NodeId(r), t);
        let coll = self.channel.collision_fraction(NodeId(r), t);
        let node = &self.nodes[r as usize];
        let sender_pos = sender.map(|s| self.nodes[s as usize].pos);
        let d = sender_pos.map_or(r_max, |sp| node.pos.distance(&sp));
        let fresh: Vec<&NeighborEntry> = node.table.fresh(t).collect();
        let mut closest = true;
        let mut peers = Vec::new();
        if let Some(sp) = sender_pos {
            for e in &fresh {
                if Some(e.id.0) == sender || e.pos.distance(&sp) > r_max {
                    continue;
                }
                if self.graph.nearest_intersection(&e.pos).1 < node.d_rint {
                    closest = false;
                }
                peers.push(availability(e.pos.distance(&sp).min(r_max), r_max, (e.advertised_abe / bitrate).clamp(0.0, 1.0)));
            }
        }
        peers.sort_by(|a, b| b.total_cmp(a));
        peers.truncate(FG_MAX_PEERS);
        OwnedContext {
            sender_distance: d,
            r_max,
            d_rint: node.d_rint,
            at_intersection: self.at_intersection(r),
            closest_to_intersection: closest,
            lqf: lqf(&LinkQualityInputs::observed(d, r_max, busy, coll)),
            abe_norm: 1.0 - busy,
            fresh_neighbors: fresh.len(),
            peers,
            speed: node.speed,
            v_max: self.v_max,
            d_threshold: self.cfg.warning.d_threshold_factor * r_max,
        }
    }

    fn on_warning_rx(
        &mut self,
        sched: &mut Scheduler<Ev>,
        t: f64,
        r: u32,
        s: u32,
        pkt: &Packet,
        p: u32,
    ) -> Result<(), NetsimError> {
        let bp = self.broadcast_protocol().expect("broadcast run");
        let dist = self.nodes[r as usize].pos.distance(&self.nodes[s as usize].pos);
        let duplicate = self.nodes[r as usize].have.get(p as usize);
        self.log_rx(t, r, s, pkt, duplicate);
        if Some(r) == self.source {
            return Ok(());
        }
        if duplicate {
            self.ledger.note_duplicate();
            if let Some(st) = self.nodes[r as usize].state[p as usize].as_mut() {
                st.heard_again(dist);
            }
            return Ok(());
        }
        {
            let at_int = self.at_intersection(r);
            let node = &mut self.nodes[r as usize];
            node.have.set(p as usize);
            node.first_rx[p as usize] = t;
            node.rx_ttl[p as usize] = pkt.msg.ttl;
            node.rx_hops[p as usize] = pkt.msg.hops;
            let mut st = DisseminationState::first(t, dist);
            st.last_tx = Some(t);
            if at_int {
                st.last_junction = Some(node.nearest_int);
            }
            node.state[p as usize] = Some(st);
        }
        let owned = self.context(t, r, Some(s), p);
        let decision = on_receive_warning(bp, &owned.ctx(), &self.cfg.game, &self.cfg.timers, &mut self.rng.game);
        self.note_flag(decision.flagged);
        match decision.action {
            Action::Forward => {
                self.send_payload(sched, t, r, p, None)?;
                if let Some(TimerScheme::MapPolling) = bp.timer_scheme() {
                    let delay = self.cfg.timers.poll.min(self.cfg.timers.t_max);
                    self.schedule_retransmit(sched, t + delay, r, p)?;
                }
            }
            Action::StoreCarry => {
                if let Some(st) = self.nodes[r as usize].state[p as usize].as_mut() {
                    st.scf_buffer = true;
                }
                self.ledger.scf_stores += 1;
            }
            Action::Schedule(d) => self.schedule_retransmit(sched, t + d, r, p)?,
            Action::Decline | Action::Suppress => {}
        }
        Ok(())
    }

    fn schedule_retransmit(&mut self, sched: &mut Scheduler<Ev>, at: f64, node: u32, p: u32) -> Result<(), NetsimError> {
        if !self.alive(p, at) || at > self.cfg.duration {
            return Ok(());
        }
        let h = sched.schedule(at, target(node), EventKind::TimerExpiry, Ev::Retransmit { node, payload: p })?;
        if let Some(st) = self.nodes[node as usize].state[p as usize].as_mut() {
            st.timer = Some(h);
        }
        Ok(())
    }

    pub(super) fn on_retransmit(&mut self, sched: &mut Scheduler<Ev>, t: f64, n: u32, p: u32) -> Result<(), NetsimError> {
        let Some(scheme) = self.broadcast_protocol().and_then(|b| b.timer_scheme()) else {
            return Ok(());
        };
        if !self.alive(p, t) {
            return Ok(());
        }
        let timers = self.cfg.timers.clone();
        let at_int = self.at_intersection(n);
        let node = &self.nodes[n as usize];
        let (speed, int_id) = (node.speed, node.nearest_int);
        let st = node.state[p as usize].as_ref().expect("timer for held payload");
        let last_tx = st.last_tx.unwrap_or(st.first_heard);
        match scheme {
            TimerScheme::Fixed | TimerScheme::SpeedAdaptive => {
                self.send_payload(sched, t, n, p, None)?;
                let d = retransmission_delay(scheme, speed, self.v_max, at_int, &timers);
                self.schedule_retransmit(sched, t + d, n, p)?;
            }
            TimerScheme::MapPolling => {
                if at_int || t - last_tx >= timers.t_max - 1e-9 {
                    if let Some(st) = self.nodes[n as usize].state[p as usize].as_mut() {
                        st.last_tx = Some(t);
                        if at_int {
                            st.last_junction = Some(int_id);
                        }
                    }
                    self.send_payload(sched, t, n, p, None)?;
                }
                let next = (t + timers.poll).min(self.nodes[n as usize].state[p as usize].as_ref().and_then(|s| s.last_tx).unwrap_or(t) + timers.t_max);
                self.schedule_retransmit(sched, next.max(t + 1e-6), n, p)?;
            }
        }
        Ok(())
    }

    /// Junction-store-forward: rebroadcast held messages on reaching a new junction.
    pub(super) fn jsf_junction_check(&mut self, sched: &mut Scheduler<Ev>, t: f64, n: u32) -> Result<(), NetsimError> {
        let node = &self.nodes[n as usize];
        if node.kind != NodeKind::Vehicle || !self.at_intersection(n) || node.last_junction == Some(node.nearest_int) {
            return Ok(());
        }
        let junction = node.nearest_int;
        let burst = self.cfg.warning.scf_burst as usize;
        let mut held: Vec<u32> = (0..self.payloads.len() as u32)
            .rev()
            .filter(|&p| node.have.get(p as usize) && self.alive(p, t))
            .filter(|&p| node.state[p as usize].as_ref().is_some_and(|s| s.last_junction != Some(junction)))
            .take(burst)
            .collect();
        held.reverse();
        self.nodes[n as usize].last_junction = Some(junction);
        for p in held {
            if let Some(st) = self.nodes[n as usize].state[p as usize].as_mut() {
                st.last_junction = Some(junction);
            }
            self.send_payload(sched, t, n, p, None)?;
        }
        Ok(())
    }

    pub(super) fn on_frame_gen(&mut self, sched: &mut Scheduler<Ev>, t: f64, f: u32) -> Result<(), NetsimError> {
        let src = self.source.expect("source node");
        let frame = self.frames[f as usize].clone();
        let routing = self.protocol.family() == ProtocolFamily::Routing;
        if !routing {
            for v in 0..self.nodes.len() as u32 {
                if self.nodes[v as usize].kind != NodeKind::Vehicle {
                    continue;
                }
                if let Some(ring) = self.ledger.ring_of(self.nodes[v as usize].pos.distance(&self.origin)) {
                    self.frame_due.push((v, f, ring));
                    for p in frame.payloads.clone() {
                        self.packet_due.push((v, p, ring));
                    }
                }
            }
        }
        for p in frame.payloads.clone() {
            let node = &mut self.nodes[src as usize];
            node.have.set(p as usize);
            node.first_rx[p as usize] = t;
            node.state[p as usize] = Some(DisseminationState::first(t, 0.0));
            let msg = self.payloads[p as usize].clone();
            if routing {
                let rsu = self.target_rsu();
                let Some(rsu) = rsu else { continue };
                self.ledger.e2e_sent += 1;
                let pkt = Packet {
                    msg,
                    body: Body::Data { rsu: NodeId(rsu), dest_pos: self.nodes[rsu as usize].pos, perimeter: None },
                    dest: None,
                };
                self.route(sched, t, src, pkt)?;
            } else {
                self.enqueue(sched, t, src, Packet { msg, body: Body::Payload(p), dest: None })?;
            }
        }
        let next = f + 1;
        if (next as usize) < self.frames.len() {
            let at = self.frames[next as usize].created;
            if at <= self.cfg.duration {
                sched.schedule(at, Target::Engine, EventKind::TimerExpiry, Ev::FrameGen(next))?;
            }
        }
        Ok(())
    }

    // ---- unicast routing ----

    fn target_rsu(&self) -> Option<u32> {
        self.rsus
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = self.nodes[a as usize].pos.distance(&self.origin);
                let db = self.nodes[b as usize].pos.distance(&self.origin);
                da.total_cmp(&db).then(a.cmp(&b))
            })
    }

    /// Pick the next hop for a data packet held by `holder` and hand it to the MAC.
    pub(super) fn route(&mut self, sched: &mut Scheduler<Ev>, t: f64, holder: u32, mut pkt: Packet) -> Result<(), NetsimError> {
        let Body::Data { rsu, dest_pos, perimeter } = &mut pkt.body else {
            return Ok(());
        };
        let (rsu, dest_pos) = (*rsu, *dest_pos);
        let node = &self.nodes[holder as usize];
        let here = node.pos;
        let next = if node.table.is_fresh(rsu, t) {
            *perimeter = None;
            Some(rsu)
        } else {
            let neighbors: Vec<(NodeId, Point)> = node.table.fresh(t).map(|e| (e.id, e.pos)).collect();
            if perimeter.as_ref().is_some_and(|ps| ps.can_resume_greedy(&here, &dest_pos)) {
                *perimeter = None;
            }
            let greedy = if perimeter.is_none() {
                match self.protocol {
                    Protocol::Gpsr => gpsr_greedy_next(&here, neighbors.iter().map(|(id, p)| (*id, p)), &dest_pos),
                    _ => {
                        let d_here = here.distance(&dest_pos);
                        let cands: Vec<(NodeId, MetricVector)> = node
                            .table
                            .fresh(t)
                            .filter(|e| e.pos.distance(&dest_pos) < d_here)
                            .map(|e| (e.id, normalize_metrics(e, &here, &dest_pos, &self.metric_cfg)))
                            .collect();
                        let w = if self.protocol == Protocol::MrpDsw {
                            node.weights
                        } else {
                            crate::routing::MetricWeights::equal()
                        };
                        select_forwarder(&cands, &w)
                    }
                }
            } else {
                None
            };
            match greedy {
                Some(g) => Some(g),
                None => {
                    let ps = perimeter.get_or_insert_with(|| PerimeterState::enter(here));
                    match gpsr_perimeter_next((NodeId(holder), here), &neighbors, &dest_pos, ps) {
                        PerimeterStep::Forward(n) => Some(n),
                        PerimeterStep::Drop => None,
                    }
                }
            }
        };
        if let Some(next) = next {
            pkt.dest = Some(next);
            self.enqueue(sched, t, holder, pkt)?;
        }
        Ok(())
    }

    fn on_data_rx(
        &mut self,
        sched: &mut Scheduler<Ev>,
        t: f64,
        r: u32,
        s: u32,
        pkt: &Packet,
    ) -> Result<(), NetsimError> {
        let p = pkt.msg.id.0 as usize;
        let duplicate = self.nodes[r as usize].have.get(p);
        self.log_rx(t, r, s, pkt, duplicate);
        let Body::Data { rsu, .. } = &pkt.body else {
            return Ok(());
        };
        if NodeId(r) == *rsu {
            if !duplicate {
                self.nodes[r as usize].have.set(p);
                self.nodes[r as usize].first_rx[p] = t;
                self.ledger.e2e_delivered += 1;
                self.ledger.e2e_delay_sum += t - pkt.msg.created;
            }
            return Ok(());
        }
        self.nodes[r as usize].have.set(p);
        let Ok(msg) = pkt.msg.relay() else {
            return Ok(());
        };
        let fwd = Packet { msg, body: pkt.body.clone(), dest: None };
        self.route(sched, t, r, fwd)
    }

    // ---- collaborative alert assessment ----

    pub(super) fn on_alert_start(&mut self, sched: &mut Scheduler<Ev>, t: f64, k: u32) -> Result<(), NetsimError> {
        let origin = self.origin;
        let mut peds: Vec<(f64, u32)> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Pedestrian)
            .map(|n| (n.pos.distance(&origin), n.id.0))
            .collect();
        peds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some(&(_, sender)) = peds.get(k as usize) else {
            return Ok(());
        };
        self.alerts[k as usize].proposer = NodeId(sender);
        self.payloads[k as usize].origin = NodeId(sender);
        self.payloads[k as usize].origin_pos = self.nodes[sender as usize].pos;
        match self.protocol {
            Protocol::CtdQuery => {
                self.nodes[sender as usize].tallies.insert(k, QueryTally { open: true, ..QueryTally::default() });
                let msg = Message {
                    id: self.fresh_msg_id(),
                    kind: MessageKind::CtdQuery,
                    origin: NodeId(sender),
                    origin_pos: self.nodes[sender as usize].pos,
                    created: t,
                    size_bytes: self.cfg.alerts.size_bytes,
                    hops: 0,
                    ttl: 1,
                    frame: None,
                };
                self.enqueue(sched, t, sender, Packet { msg, body: Body::Query(k), dest: None })?;
                sched.schedule(
                    t + self.cfg.ctd.reply_window,
                    target(sender),
                    EventKind::TimerExpiry,
                    Ev::QueryClose { node: sender, alert: k },
                )?;
            }
            _ => self.publish_alert(sched, t, sender, k)?,
        }
        Ok(())
    }

    fn publish_alert(&mut self, sched: &mut Scheduler<Ev>, t: f64, sender: u32, k: u32) -> Result<(), NetsimError> {
        let alert = self.alerts[k as usize].clone();
        let node = &mut self.nodes[sender as usize];
        node.have.set(k as usize);
        node.first_rx[k as usize] = t;
        node.memory.remember(alert);
        let msg = self.payloads[k as usize].clone();
        self.enqueue(sched, t, sender, Packet { msg, body: Body::Payload(k), dest: None })
    }

    fn on_query_rx(&mut self, sched: &mut Scheduler<Ev>, t: f64, r: u32, s: u32, k: u32) -> Result<(), NetsimError> {
        if !self.nodes[r as usize].replied.insert(k) {
            return Ok(());
        }
        let confirm = assess(&self.cfg.ctd, &mut self.rng.assess);
        let delay = self.rng.mac.random_range(0.0..self.cfg.ctd.reply_window / 4.0);
        let msg = Message {
            id: self.fresh_msg_id(),
            kind: MessageKind::CtdReply,
            origin: NodeId(r),
            origin_pos: self.nodes[r as usize].pos,
            created: t,
            size_bytes: REPLY_BYTES,
            hops: 0,
            ttl: 1,
            frame: None,
        };
        let pkt = Box::new(Packet { msg, body: Body::Reply { alert: k, confirm }, dest: Some(NodeId(s)) });
        sched.schedule(t + delay, target(r), EventKind::TimerExpiry, Ev::Send { node: r, pkt, guard: None })?;
        Ok(())
    }

    pub(super) fn on_query_close(&mut self, sched: &mut Scheduler<Ev>, t: f64, n: u32, k: u32) -> Result<(), NetsimError> {
        let Some(tally) = self.nodes[n as usize].tallies.get_mut(&k) else {
            return Ok(());
        };
        tally.open = false;
        let (confirms, replies) = (tally.confirms, tally.replies);
        if ctd_query_decide(confirms, replies, &self.cfg.ctd) == QueryOutcome::Broadcast {
            self.publish_alert(sched, t, n, k)?;
        }
        Ok(())
    }

    fn on_alert_rx(
        &mut self,
        sched: &mut Scheduler<Ev>,
        t: f64,
        r: u32,
        s: u32,
        pkt: &Packet,
        k: u32,
    ) -> Result<(), NetsimError> {
        let duplicate = self.nodes[r as usize].have.get(k as usize);
        self.log_rx(t, r, s, pkt, duplicate);
        if duplicate {
            self.ledger.note_duplicate();
            return Ok(());
        }
        {
            let node = &mut self.nodes[r as usize];
            node.have.set(k as usize);
            node.first_rx[k as usize] = t;
            node.rx_ttl[k as usize] = pkt.msg.ttl;
            node.rx_hops[k as usize] = pkt.msg.hops;
        }
        let relay = match self.protocol {
            Protocol::NoneAssessment => true,
            _ => {
                let alert = self.alerts[k as usize].clone();
                let node = &mut self.nodes[r as usize];
                ctd_passive_process(&mut node.memory, &alert, &self.cfg.ctd, &mut self.rng.assess)
                    == PassiveOutcome::Rebroadcast
            }
        };
        if relay {
            self.send_payload(sched, t, r, k, None)?;
        }
        Ok(())
    }
}

/// [`ReceiveContext`] with owned peer availabilities.
struct OwnedContext {
    sender_distance: f64,
    r_max: f64,
    d_rint: f64,
    at_intersection: bool,
    closest_to_intersection: bool,
    lqf: f64,
    abe_norm: f64,
    fresh_neighbors: usize,
    peers: Vec<f64>,
    speed: f64,
    v_max: f64,
    d_threshold: f64,
}

impl OwnedContext {
    fn ctx(&self) -> ReceiveContext<'_> {
        ReceiveContext {
            duplicate: false,
            sender_distance: self.sender_distance,
            r_max: self.r_max,
            d_rint: self.d_rint,
            at_intersection: self.at_intersection,
            closest_to_intersection: self.closest_to_intersection,
            lqf: self.lqf,
            abe_norm: self.abe_norm,
            fresh_neighbors: self.fresh_neighbors,
            peer_availabilities: &self.peers,
            speed: self.speed,
            v_max: self.v_max,
            d_threshold: self.d_threshold,
        }
    }
}
