use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::ctd::AlertMemory;
use crate::dissemination::DisseminationState;
use crate::geom::{Point, Vec2};
use crate::message::Message;
use crate::radio::TxId;
use crate::roadnet::IntersectionId;
use crate::routing::{MetricWeights, NeighborTable, PerimeterState};
use crate::NodeId;

use super::bitset::Bitset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum NodeKind {
    Vehicle,
    Pedestrian,
    Rsu,
    /// Static node at the warning origin.
    Source,
}

#[derive(Debug, Clone)]
pub(super) struct BeaconInfo {
    pub pos: Point,
    pub speed: f64,
    pub heading: Vec2,
    pub density: f64,
    pub abe: f64,
    pub mac_loss: f64,
    pub have: Bitset,
}

#[derive(Debug, Clone)]
pub(super) enum Body {
    Beacon(Box<BeaconInfo>),
    /// Warning fragment or alert, by payload index.
    Payload(u32),
    Data {
        rsu: NodeId,
        dest_pos: Point,
        perimeter: Option<PerimeterState>,
    },
    Query(u32),
    Reply {
        alert: u32,
        confirm: bool,
    },
}

#[derive(Debug, Clone)]
pub(super) struct Packet {
    pub msg: Message,
    pub body: Body,
    /// Intended receiver of a unicast frame.
    pub dest: Option<NodeId>,
}

#[derive(Debug, Clone)]
pub(super) struct Outgoing {
    pub pkt: Packet,
    pub retries: u32,
}

#[derive(Debug, Clone)]
pub(super) enum Ev {
    Mobility,
    Snapshot,
    Beacon(u32),
    MacAttempt(u32),
    TxEnd(TxId),
    /// Enqueue after a delay. The guard `(payload, times_heard)` cancels the
    /// send if another copy of the payload was heard in the meantime.
    Send {
        node: u32,
        pkt: Box<Packet>,
        guard: Option<(u32, u32)>,
    },
    Retransmit {
        node: u32,
        payload: u32,
    },
    FrameGen(u32),
    AlertStart(u32),
    QueryClose {
        node: u32,
        alert: u32,
    },
}

#[derive(Debug, Clone, Default)]
pub(super) struct QueryTally {
    pub confirms: usize,
    pub replies: usize,
    pub open: bool,
}

#[derive(Debug)]
pub(super) struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub trace_id: Option<NodeId>,
    pub pos: Point,
    pub speed: f64,
    pub heading: Vec2,
    pub nearest_int: IntersectionId,
    pub d_rint: f64,
    pub table: NeighborTable,
    /// Latest held-payload summary advertised by each neighbor.
    pub summaries: BTreeMap<NodeId, Bitset>,
    pub queue: VecDeque<Outgoing>,
    pub mac_busy: bool,
    pub mac_loss: f64,
    pub weights: MetricWeights,
    pub last_junction: Option<IntersectionId>,
    pub state: Vec<Option<DisseminationState>>,
    pub have: Bitset,
    pub first_rx: Vec<f64>,
    pub rx_ttl: Vec<u32>,
    pub rx_hops: Vec<u32>,
    pub memory: AlertMemory,
    pub replied: BTreeSet<u32>,
    pub tallies: BTreeMap<u32, QueryTally>,
}

impl Node {
    pub fn new(id: NodeId, kind: NodeKind, trace_id: Option<NodeId>, pos: Point, timeout: f64, payloads: usize) -> Self {
        Node {
            id,
            kind,
            trace_id,
            pos,
            speed: 0.0,
            heading: Vec2::default(),
            nearest_int: 0,
            d_rint: f64::INFINITY,
            table: NeighborTable::new(timeout),
            summaries: BTreeMap::new(),
            queue: VecDeque::new(),
            mac_busy: false,
            mac_loss: 0.0,
            weights: MetricWeights::equal(),
            last_junction: None,
            state: vec![None; payloads],
            have: Bitset::new(payloads),
            first_rx: vec![f64::INFINITY; payloads],
            rx_ttl: vec![0; payloads],
            rx_hops: vec![0; payloads],
            memory: AlertMemory::new(),
            replied: BTreeSet::new(),
            tallies: BTreeMap::new(),
        }
    }
}
