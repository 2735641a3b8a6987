use std::f64::consts::TAU;

use crate::geom::{segment_intersection, Point};
use crate::NodeId;

/// Greedy next hop: the neighbor strictly closer to `dest` than `current`,
/// minimizing distance to `dest` (ties to the lowest id). `None` marks a
/// local minimum.
pub fn gpsr_greedy_next<'a, I>(current: &Point, neighbors: I, dest: &Point) -> Option<NodeId>
where
    I: IntoIterator<Item = (NodeId, &'a Point)>,
{
    let own = current.distance(dest);
    let mut best: Option<(NodeId, f64)> = None;
    for (id, pos) in neighbors {
        let d = pos.distance(dest);
        if d >= own {
            continue;
        }
        best = match best {
            Some((bid, bd)) if bd < d || (bd == d && bid < id) => Some((bid, bd)),
            _ => Some((id, d)),
        };
    }
    best.map(|(id, _)| id)
}

/// Gabriel-graph planarization of the local neighbor set.
///
/// Edge `current-v` survives unless some other neighbor lies strictly inside
/// the circle whose diameter is that edge.
pub fn gabriel_neighbors(current: &Point, neighbors: &[(NodeId, Point)]) -> Vec<(NodeId, Point)> {
    neighbors
        .iter()
        .filter(|(v, pv)| {
            let mid = current.midpoint(pv);
            let r2 = current.distance_sq(pv) / 4.0;
            !neighbors
                .iter()
                .any(|(w, pw)| w != v && mid.distance_sq(pw) < r2)
        })
        .copied()
        .collect()
}

/// Perimeter-mode header carried with a packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PerimeterState {
    /// Where the packet entered perimeter mode.
    pub entry: Point,
    /// Point on the current face closest to the destination seen so far.
    pub face_point: Point,
    /// First directed edge traversed on the current face.
    pub first_edge: Option<(NodeId, NodeId)>,
    /// Previous hop and its position.
    pub prev: Option<(NodeId, Point)>,
}

impl PerimeterState {
    pub fn enter(at: Point) -> Self {
        PerimeterState { entry: at, face_point: at, first_edge: None, prev: None }
    }

    /// True once the packet is closer to the destination than where it entered.
    pub fn can_resume_greedy(&self, current: &Point, dest: &Point) -> bool {
        current.distance(dest) < self.entry.distance(dest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerimeterStep {
    Forward(NodeId),
    /// No neighbors, or the face tour came back to its first edge.
    Drop,
}

/// Next neighbor counterclockwise about `current` from direction `reference`,
/// skipping nothing; a neighbor exactly on the reference ray comes last.
fn next_ccw(current: &Point, reference: f64, planar: &[(NodeId, Point)]) -> Option<(NodeId, Point)> {
    planar
        .iter()
        .map(|&(id, p)| {
            let mut delta = (current.bearing_to(&p) - reference).rem_euclid(TAU);
            if delta <= 1e-12 {
                delta = TAU;
            }
            (delta, id, p)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id, p)| (id, p))
}

/// Right-hand-rule step on the Gabriel-planarized neighbor graph.
///
/// On entry (no previous hop) the first edge counterclockwise from the line
/// to `dest` is taken. Otherwise the next edge counterclockwise from the edge
/// the packet arrived on. Whenever the chosen edge crosses the entry-to-dest
/// line closer to `dest` than the current face point, the packet switches to
/// the adjacent face. Returning to the first edge of a face means the
/// destination is unreachable.
pub fn gpsr_perimeter_next(
    current: (NodeId, Point),
    neighbors: &[(NodeId, Point)],
    dest: &Point,
    state: &mut PerimeterState,
) -> PerimeterStep {
    let (me, here) = current;
    let planar = gabriel_neighbors(&here, neighbors);
    if planar.is_empty() {
        return PerimeterStep::Drop;
    }
    let reference = match state.prev {
        Some((_, prev_pos)) => here.bearing_to(&prev_pos),
        None => here.bearing_to(dest),
    };
    let Some(mut next) = next_ccw(&here, reference, &planar) else {
        return PerimeterStep::Drop;
    };
    let entering = state.prev.is_none();
    if entering {
        state.first_edge = Some((me, next.0));
    } else if state.first_edge == Some((me, next.0)) {
        return PerimeterStep::Drop;
    }
    // Face changes: bounded by the number of planar edges at this node.
    for _ in 0..planar.len() {
        let Some(cross) = segment_intersection(&here, &next.1, &state.entry, dest) else {
            break;
        };
        if cross.distance(dest) < state.face_point.distance(dest) - 1e-9 {
            state.face_point = cross;
            next = next_ccw(&here, here.bearing_to(&next.1), &planar).expect("non-empty");
            state.first_edge = Some((me, next.0));
        } else {
            break;
        }
    }
    state.prev = Some((me, here));
    PerimeterStep::Forward(next.0)
}

/// Fixed node placement with unit-disk links, for routing checks.
#[derive(Debug, Clone)]
pub struct StaticTopology {
    pub positions: Vec<Point>,
    pub range: f64,
}

impl StaticTopology {
    pub fn neighbors(&self, i: usize) -> Vec<(NodeId, Point)> {
        let p = self.positions[i];
        self.positions
            .iter()
            .enumerate()
            .filter(|&(j, q)| j != i && p.distance(q) <= self.range)
            .map(|(j, q)| (NodeId(j as u32), *q))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.positions.len()).map(|i| self.neighbors(i).len()).sum::<usize>() / 2
    }

    /// Whether `dst` is reachable from `src` at all.
    pub fn connected(&self, src: usize, dst: usize) -> bool {
        let mut seen = vec![false; self.positions.len()];
        let mut stack = vec![src];
        seen[src] = true;
        while let Some(i) = stack.pop() {
            if i == dst {
                return true;
            }
            for (j, _) in self.neighbors(i) {
                if !seen[j.index()] {
                    seen[j.index()] = true;
                    stack.push(j.index());
                }
            }
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticRoute {
    pub path: Vec<NodeId>,
    pub delivered: bool,
    pub perimeter_hops: usize,
}

impl StaticRoute {
    pub fn hops(&self) -> usize {
        self.path.len().saturating_sub(1)
    }
}

/// Hop-by-hop GPSR over a static topology.
///
/// With `allow_perimeter = false` the packet is dropped at the first local minimum.
pub fn route_static(
    topo: &StaticTopology,
    src: usize,
    dst: usize,
    max_hops: usize,
    allow_perimeter: bool,
) -> StaticRoute {
    let dest = topo.positions[dst];
    let mut path = vec![NodeId(src as u32)];
    let mut cur = src;
    let mut perimeter: Option<PerimeterState> = None;
    let mut perimeter_hops = 0;
    while path.len() <= max_hops {
        if cur == dst {
            return StaticRoute { path, delivered: true, perimeter_hops };
        }
        let here = topo.positions[cur];
        let nbrs = topo.neighbors(cur);
        if nbrs.iter().any(|(id, _)| id.index() == dst) {
            cur = dst;
            path.push(NodeId(dst as u32));
            continue;
        }
        if perimeter.as_ref().is_some_and(|s| s.can_resume_greedy(&here, &dest)) {
            perimeter = None;
        }
        if perimeter.is_none() {
            if let Some(next) = gpsr_greedy_next(&here, nbrs.iter().map(|(id, p)| (*id, p)), &dest) {
                cur = next.index();
                path.push(next);
                continue;
            }
            if !allow_perimeter {
                break;
            }
            perimeter = Some(PerimeterState::enter(here));
        }
        let state = perimeter.as_mut().expect("perimeter mode");
        match gpsr_perimeter_next((NodeId(cur as u32), here), &nbrs, &dest, state) {
            PerimeterStep::Forward(next) => {
                perimeter_hops += 1;
                cur = next.index();
                path.push(next);
            }
            PerimeterStep::Drop => break,
        }
    }
    StaticRoute { path, delivered: false, perimeter_hops }
}
