//! Protocol-driving network simulator.
//!
//! One call to [`simulate`] builds the road network and node population for
//! a scenario, then runs the discrete-event loop: mobility steps, hello
//! beacons, a CSMA medium access layer over the shared [`Channel`], and the
//! selected routing, dissemination or assessment protocol. The outcome is a
//! [`MetricsLedger`].

mod bitset;
mod handlers;
mod mac;
mod node;

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctd::Alert;
use crate::geom::Point;
use crate::message::{fragment_sizes, FrameRef, FrameTrace, FrameTraceError, Message, MessageId, MessageKind};
use crate::metrics::MetricsLedger;
use crate::radio::{Channel, TxId};
use crate::roadnet::{
    build_grid_graph, generate_walkers, MobilityTrace, RoadGraph, RoadnetError, SpeedModel, TraceError, WalkerSpec,
    DEFAULT_INTERSECTION_RADIUS, PEDESTRIAN_SPEED,
};
use crate::routing::{MetricConfig, MetricWeights};
use crate::scenario::{Protocol, ProtocolFamily, ScenarioConfig};
use crate::sim::{EventKind, RngStreams, Scheduler, SimError, StreamId, Target};
use crate::spatial::SpatialGrid;
use crate::NodeId;

pub use bitset::Bitset;
use node::{Ev, Node, NodeKind, Packet};

/// Interval between position updates, seconds.
pub const MOBILITY_STEP: f64 = 0.1;
/// Interval between duplicate and coverage samples, seconds.
pub const SNAPSHOT_INTERVAL: f64 = 1.0;
const MAC_QUEUE_LIMIT: usize = 1000;

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error(transparent)]
    Roadnet(#[from] RoadnetError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Frames(#[from] FrameTraceError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Setup(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep a transmission and reception log (for invariant checks).
    pub record_log: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub t: f64,
    pub sender: NodeId,
    pub kind: MessageKind,
    pub id: MessageId,
    pub origin: NodeId,
    pub ttl: u32,
    pub hops: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RxRecord {
    pub t: f64,
    pub receiver: NodeId,
    pub sender: NodeId,
    pub kind: MessageKind,
    pub id: MessageId,
    pub ttl: u32,
    /// The payload had been received before.
    pub duplicate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub tx: Vec<TxRecord>,
    pub rx: Vec<RxRecord>,
    /// (t, node, weights) after every adaptive weight update.
    pub weights: Vec<(f64, NodeId, MetricWeights)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub ledger: MetricsLedger,
    /// Some equilibrium computation did not converge.
    pub flagged: bool,
    pub events: u64,
    pub log: Option<RunLog>,
}

/// Frame bookkeeping for delivery accounting.
#[derive(Debug, Clone)]
struct FrameInfo {
    created: f64,
    frame_type: crate::message::FrameType,
    /// Payload indices of its fragments.
    payloads: std::ops::Range<u32>,
}

struct Rngs {
    radio: ChaCha8Rng,
    game: ChaCha8Rng,
    assess: ChaCha8Rng,
    mac: ChaCha8Rng,
}

pub(crate) struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    protocol: Protocol,
    graph: RoadGraph,
    traces: MobilityTrace,
    nodes: Vec<Node>,
    grid: SpatialGrid,
    channel: Channel,
    in_flight: BTreeMap<TxId, (u32, Packet, u32)>,
    payloads: Vec<Message>,
    frames: Vec<FrameInfo>,
    alerts: Vec<Alert>,
    /// (vehicle, frame, ring) for every frame due at a vehicle.
    frame_due: Vec<(u32, u32, usize)>,
    /// (vehicle, payload, ring) for every fragment due at a vehicle.
    packet_due: Vec<(u32, u32, usize)>,
    origin: Point,
    source: Option<u32>,
    rsus: Vec<u32>,
    ledger: MetricsLedger,
    log: Option<RunLog>,
    rng: Rngs,
    metric_cfg: MetricConfig,
    v_max: f64,
    flagged: bool,
    next_msg_id: u64,
}

/// Run one simulation of `protocol` at vehicle `density` with `seed`.
pub fn simulate(
    cfg: &ScenarioConfig,
    protocol: Protocol,
    density: f64,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunOutput, NetsimError> {
    let mut sim = Sim::build(cfg, protocol, density, seed, opts)?;
    let mut sched: Scheduler<Ev> = Scheduler::new();
    sim.prime(&mut sched)?;
    sched.run_until(cfg.duration, |s, ev| sim.handle(s, ev.payload))?;
    let events = sched.processed();
    Ok(sim.finish(events))
}

fn target(node: u32) -> Target {
    Target::Node(NodeId(node))
}

impl<'a> Sim<'a> {
    fn build(
        cfg: &'a ScenarioConfig,
        protocol: Protocol,
        density: f64,
        seed: u64,
        opts: &RunOptions,
    ) -> Result<Self, NetsimError> {
        let streams = RngStreams::new(seed);
        let mut mobility_rng = streams.stream(StreamId::Mobility);
        let family = protocol.family();
        let horizon = cfg.duration + 1.0;

        let graph = match &cfg.area.road_graph {
            Some(p) => RoadGraph::load(&cfg.resolve(p))?,
            None => build_grid_graph(
                cfg.area.width,
                cfg.area.height,
                cfg.area.block_size,
                cfg.area.speed_limit,
                cfg.area.obstacles,
            )?,
        };
        let bounds = graph.bounds();
        let center = bounds.min.midpoint(&bounds.max);

        let mut traces = MobilityTrace::new();
        let mut vehicle_ids = Vec::new();
        if family != ProtocolFamily::Ctd {
            let vt = match &cfg.area.mobility_trace {
                Some(p) => MobilityTrace::load(&cfg.resolve(p))?,
                None => {
                    let area_km2 = (bounds.max.x - bounds.min.x) * (bounds.max.y - bounds.min.y) / 1e6;
                    let spec = WalkerSpec {
                        count: (density * area_km2).round() as usize,
                        first_id: 0,
                        duration: horizon,
                        speed: SpeedModel::FractionOfLimit { lo: 0.5, hi: 1.0 },
                    };
                    generate_walkers(&graph, &spec, &mut mobility_rng)
                }
            };
            for id in vt.node_ids().collect::<Vec<_>>() {
                vehicle_ids.push(id);
                traces.push_node(id, vt.records(id).expect("listed").to_vec())?;
            }
        }
        let mut pedestrian_ids = Vec::new();
        if cfg.pedestrian_count > 0 && family == ProtocolFamily::Ctd {
            let first_id = vehicle_ids.iter().map(|n| n.0 + 1).max().unwrap_or(0);
            let spec = WalkerSpec {
                count: cfg.pedestrian_count as usize,
                first_id,
                duration: horizon,
                speed: SpeedModel::Constant(PEDESTRIAN_SPEED),
            };
            let pt = generate_walkers(&graph, &spec, &mut mobility_rng);
            for id in pt.node_ids().collect::<Vec<_>>() {
                pedestrian_ids.push(id);
                traces.push_node(id, pt.records(id).expect("listed").to_vec())?;
            }
        }

        let origin = match (family, cfg.alerts.origin) {
            (ProtocolFamily::Ctd, Some([x, y])) => Point::new(x, y),
            _ => cfg.origin_or(center),
        };
        let radio = &cfg.radio;

        // Payload index space: warning fragments or alerts.
        let mut payloads = Vec::new();
        let mut frames = Vec::new();
        let mut alerts = Vec::new();
        let mut next_msg_id = 0u64;
        match family {
            ProtocolFamily::Broadcast(_) | ProtocolFamily::Routing => {
                let trace = match &cfg.warning.frame_trace {
                    Some(p) => FrameTrace::load(&cfg.resolve(p))?,
                    None => FrameTrace::synthetic(cfg.warning.frames, cfg.warning.fps, cfg.warning.bitrate),
                };
                for (fi, f) in trace.frames.iter().enumerate() {
                    let created = cfg.warning.start + fi as f64 / cfg.warning.fps;
                    let sizes = fragment_sizes(f.size_bytes, cfg.warning.mtu);
                    let first = payloads.len() as u32;
                    let kind = if family == ProtocolFamily::Routing { MessageKind::Data } else { MessageKind::Warning };
                    let ttl = if family == ProtocolFamily::Routing { cfg.routing.ttl } else { cfg.warning.ttl };
                    for (k, &size) in sizes.iter().enumerate() {
                        payloads.push(Message {
                            id: MessageId(next_msg_id),
                            kind,
                            origin: NodeId(0),
                            origin_pos: origin,
                            created,
                            size_bytes: size,
                            hops: 0,
                            ttl,
                            frame: Some(FrameRef {
                                frame: fi as u32,
                                frame_type: f.frame_type,
                                fragment: k as u16,
                                fragments: sizes.len() as u16,
                            }),
                        });
                        next_msg_id += 1;
                    }
                    frames.push(FrameInfo {
                        created,
                        frame_type: f.frame_type,
                        payloads: first..payloads.len() as u32,
                    });
                }
            }
            ProtocolFamily::Ctd => {
                for k in 0..cfg.alerts.senders {
                    payloads.push(Message {
                        id: MessageId(next_msg_id),
                        kind: MessageKind::Alert,
                        origin: NodeId(0),
                        origin_pos: origin,
                        created: cfg.alerts.time,
                        size_bytes: cfg.alerts.size_bytes,
                        hops: 0,
                        ttl: cfg.warning.ttl,
                        frame: None,
                    });
                    next_msg_id += 1;
                    alerts.push(Alert {
                        id: k as u64,
                        event_type: cfg.alerts.event_type,
                        origin,
                        created: cfg.alerts.time,
                        proposer: NodeId(0),
                    });
                }
            }
        }

        let timeout = cfg.beacon.timeout();
        let n_payloads = payloads.len();
        let mut nodes = Vec::new();
        for &v in &vehicle_ids {
            nodes.push(Node::new(NodeId(nodes.len() as u32), NodeKind::Vehicle, Some(v), Point::default(), timeout, n_payloads));
        }
        for &p in &pedestrian_ids {
            nodes.push(Node::new(NodeId(nodes.len() as u32), NodeKind::Pedestrian, Some(p), Point::default(), timeout, n_payloads));
        }
        let mut source = None;
        if family != ProtocolFamily::Ctd {
            source = Some(nodes.len() as u32);
            nodes.push(Node::new(NodeId(nodes.len() as u32), NodeKind::Source, None, origin, timeout, n_payloads));
        }
        let mut rsus = Vec::new();
        if family == ProtocolFamily::Routing {
            for &[x, y] in &cfg.routing.rsus {
                rsus.push(nodes.len() as u32);
                nodes.push(Node::new(NodeId(nodes.len() as u32), NodeKind::Rsu, None, Point::new(x, y), timeout, n_payloads));
            }
        }
        if let Some(s) = source {
            for m in &mut payloads {
                m.origin = NodeId(s);
            }
        }
        let node_count = nodes.len();
        let mut sim = Sim {
            cfg,
            protocol,
            v_max: graph.max_speed_limit(),
            graph,
            traces,
            grid: SpatialGrid::build(&[], radio.r_max),
            channel: Channel::new(node_count, 5.0),
            in_flight: BTreeMap::new(),
            nodes,
            payloads,
            frames,
            alerts,
            frame_due: Vec::new(),
            packet_due: Vec::new(),
            origin,
            source,
            rsus,
            ledger: MetricsLedger::new(&cfg.rings),
            log: opts.record_log.then(RunLog::default),
            rng: Rngs {
                radio: streams.stream(StreamId::RadioLoss),
                game: streams.stream(StreamId::GameDraw),
                assess: streams.stream(StreamId::Assessment),
                mac: streams.stream(StreamId::Mac),
            },
            metric_cfg: MetricConfig { density_ref: cfg.routing.density_ref, bitrate: radio.bitrate, horizon: 1.0 },
            flagged: false,
            next_msg_id,
        };
        sim.update_positions(0.0)?;
        Ok(sim)
    }

    fn prime(&mut self, sched: &mut Scheduler<Ev>) -> Result<(), NetsimError> {
        use rand::Rng;
        sched.schedule(MOBILITY_STEP, Target::Engine, EventKind::MobilityStep, Ev::Mobility)?;
        sched.schedule(0.0, Target::Engine, EventKind::MetricSnapshot, Ev::Snapshot)?;
        if self.uses_beacons() {
            for i in 0..self.nodes.len() as u32 {
                let phase = self.rng.mac.random_range(0.0..self.cfg.beacon.interval);
                sched.schedule(phase, target(i), EventKind::Beacon, Ev::Beacon(i))?;
            }
        }
        match self.protocol.family() {
            ProtocolFamily::Ctd => {
                for k in 0..self.alerts.len() as u32 {
                    sched.schedule(self.cfg.alerts.time, Target::Engine, EventKind::TimerExpiry, Ev::AlertStart(k))?;
                }
            }
            _ => {
                if !self.frames.is_empty() {
                    sched.schedule(self.frames[0].created, Target::Engine, EventKind::TimerExpiry, Ev::FrameGen(0))?;
                }
            }
        }
        Ok(())
    }

    fn uses_beacons(&self) -> bool {
        self.protocol.family() != ProtocolFamily::Ctd
    }

    fn handle(&mut self, sched: &mut Scheduler<Ev>, ev: Ev) -> Result<(), NetsimError> {
        let t = sched.now();
        match ev {
            Ev::Mobility => self.on_mobility(sched, t),
            Ev::Snapshot => {
                self.on_snapshot(t);
                let next = t + SNAPSHOT_INTERVAL;
                if next <= self.cfg.duration {
                    sched.schedule(next, Target::Engine, EventKind::MetricSnapshot, Ev::Snapshot)?;
                }
                Ok(())
            }
            Ev::Beacon(n) => self.on_beacon(sched, t, n),
            Ev::MacAttempt(n) => self.on_mac_attempt(sched, t, n),
            Ev::TxEnd(tx) => self.on_tx_end(sched, t, tx),
            Ev::Send { node, pkt, guard } => {
                if let Some((p, heard)) = guard {
                    let still_needed = self.nodes[node as usize].state[p as usize]
                        .as_ref()
                        .is_none_or(|s| s.times_heard == heard);
                    if !still_needed {
                        return Ok(());
                    }
                }
                self.enqueue(sched, t, node, *pkt)
            }
            Ev::Retransmit { node, payload } => self.on_retransmit(sched, t, node, payload),
            Ev::FrameGen(f) => self.on_frame_gen(sched, t, f),
            Ev::AlertStart(k) => self.on_alert_start(sched, t, k),
            Ev::QueryClose { node, alert } => self.on_query_close(sched, t, node, alert),
        }
    }

    fn update_positions(&mut self, t: f64) -> Result<(), NetsimError> {
        for n in &mut self.nodes {
            if let Some(tid) = n.trace_id {
                let (start, end) = self.traces.span(tid).expect("trace node");
                let st = self.traces.state_at(tid, t.clamp(start, end))?;
                n.pos = st.pos;
                n.speed = st.speed;
                n.heading = st.heading;
            }
            let (int_id, d) = self.graph.nearest_intersection(&n.pos);
            n.nearest_int = int_id;
            n.d_rint = d;
        }
        let pts: Vec<Point> = self.nodes.iter().map(|n| n.pos).collect();
        self.grid = SpatialGrid::build(&pts, self.cfg.radio.r_max.max(1.0));
        Ok(())
    }

    fn on_mobility(&mut self, sched: &mut Scheduler<Ev>, t: f64) -> Result<(), NetsimError> {
        self.update_positions(t)?;
        if let ProtocolFamily::Broadcast(crate::dissemination::BroadcastProtocol::Jsf) = self.protocol.family() {
            for i in 0..self.nodes.len() as u32 {
                self.jsf_junction_check(sched, t, i)?;
            }
        }
        let next = t + MOBILITY_STEP;
        if next <= self.cfg.duration {
            sched.schedule(next, Target::Engine, EventKind::MobilityStep, Ev::Mobility)?;
        }
        Ok(())
    }

    fn at_intersection(&self, i: u32) -> bool {
        self.nodes[i as usize].d_rint <= DEFAULT_INTERSECTION_RADIUS
    }

    /// Nodes whose coverage is tracked: vehicles, or pedestrians in assessment runs.
    fn population(&self) -> impl Iterator<Item = &Node> {
        let want = if self.protocol.family() == ProtocolFamily::Ctd { NodeKind::Pedestrian } else { NodeKind::Vehicle };
        self.nodes.iter().filter(move |n| n.kind == want)
    }

    fn on_snapshot(&mut self, t: f64) {
        let (mut total, mut covered) = (0usize, 0usize);
        for n in self.population() {
            total += 1;
            if n.have.count() > 0 {
                covered += 1;
            }
        }
        let coverage = if total > 0 { covered as f64 / total as f64 } else { 0.0 };
        self.ledger.snapshot(t, coverage);
    }

    fn finish(mut self, events: u64) -> RunOutput {
        let due = std::mem::take(&mut self.frame_due);
        for (v, f, ring) in due {
            let frame = &self.frames[f as usize];
            let node = &self.nodes[v as usize];
            let delivered = frame.payloads.clone().all(|p| node.have.get(p as usize));
            self.ledger.record_frame(ring, frame.frame_type, delivered);
        }
        let due = std::mem::take(&mut self.packet_due);
        for (v, p, ring) in due {
            let node = &self.nodes[v as usize];
            let delay = node.have.get(p as usize).then(|| node.first_rx[p as usize] - self.payloads[p as usize].created);
            self.ledger.record_packet(ring, delay);
        }
        RunOutput { ledger: self.ledger, flagged: self.flagged, events, log: self.log }
    }

    fn fresh_msg_id(&mut self) -> MessageId {
        let id = MessageId(self.next_msg_id);
        self.next_msg_id += 1;
        id
    }
}
