use std::collections::BTreeMap;

use rand::Rng;

use super::graph::{Intersection, RoadGraph, RoadnetError, Segment};
use super::trace::{MobilityTrace, TraceRecord};
use crate::geom::{Point, Rect};
use crate::sim::{RngStreams, StreamId};
use crate::NodeId;

/// 50 km/h.
pub const DEFAULT_SPEED_LIMIT: f64 = 13.89;
/// Nominal walking speed for pedestrian devices, m/s.
pub const PEDESTRIAN_SPEED: f64 = 1.4;
/// Building blocks stop this far from street centerlines.
pub const OBSTACLE_INSET: f64 = 5.0;

/// Manhattan grid scenario parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub width: f64,
    pub height: f64,
    pub block_size: f64,
    /// Vehicles per km².
    pub density: f64,
    /// Trace length in seconds.
    pub duration: f64,
    pub speed_limit: f64,
    /// Vehicles cruise at a uniform draw from this fraction range of the limit.
    pub speed_fraction: (f64, f64),
    pub obstacles: bool,
}

impl GridSpec {
    pub fn new(width: f64, height: f64, block_size: f64, density: f64) -> Self {
        GridSpec {
            width,
            height,
            block_size,
            density,
            duration: 60.0,
            speed_limit: DEFAULT_SPEED_LIMIT,
            speed_fraction: (0.5, 1.0),
            obstacles: false,
        }
    }

    pub fn area_km2(&self) -> f64 {
        self.width * self.height / 1e6
    }

    pub fn vehicle_count(&self) -> usize {
        (self.density * self.area_km2()).round() as usize
    }
}

/// Speed rule for walkers moving over the graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedModel {
    /// Per-walker fraction of each segment's limit, drawn uniformly from `[lo, hi]`.
    FractionOfLimit { lo: f64, hi: f64 },
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkerSpec {
    pub count: usize,
    pub first_id: u32,
    pub duration: f64,
    pub speed: SpeedModel,
}

/// Build the Manhattan grid road graph for an area.
pub fn build_grid_graph(
    width: f64,
    height: f64,
    block_size: f64,
    speed_limit: f64,
    obstacles: bool,
) -> Result<RoadGraph, RoadnetError> {
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(RoadnetError::InvalidGrid(format!("area {width}x{height} has no extent")));
    }
    if !(block_size > 0.0 && block_size < width.min(height)) {
        return Err(RoadnetError::InvalidGrid(format!(
            "block size {block_size} must be positive and below min(width, height)"
        )));
    }
    let nx = (width / block_size + 1e-9).floor() as u32 + 1;
    let ny = (height / block_size + 1e-9).floor() as u32 + 1;
    let id = |i: u32, j: u32| j * nx + i;
    let mut intersections = Vec::with_capacity((nx * ny) as usize);
    for j in 0..ny {
        for i in 0..nx {
            intersections.push(Intersection {
                id: id(i, j),
                x: i as f64 * block_size,
                y: j as f64 * block_size,
            });
        }
    }
    let mut segments = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                segments.push(Segment {
                    id: segments.len() as u32,
                    a: id(i, j),
                    b: id(i + 1, j),
                    length: block_size,
                    speed_limit,
                });
            }
            if j + 1 < ny {
                segments.push(Segment {
                    id: segments.len() as u32,
                    a: id(i, j),
                    b: id(i, j + 1),
                    length: block_size,
                    speed_limit,
                });
            }
        }
    }
    let mut rects = Vec::new();
    if obstacles && block_size > 2.0 * OBSTACLE_INSET {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let x = i as f64 * block_size;
                let y = j as f64 * block_size;
                rects.push(Rect::new(
                    Point::new(x + OBSTACLE_INSET, y + OBSTACLE_INSET),
                    Point::new(x + block_size - OBSTACLE_INSET, y + block_size - OBSTACLE_INSET),
                ));
            }
        }
    }
    RoadGraph::new(intersections, segments, rects)
}

/// Generate a Manhattan grid and vehicle trips over it.
///
/// Vehicles start uniformly along the streets and drive shortest-path trips to
/// random intersections, picking uniformly among equally short continuations at
/// each junction. Node ids are `0..vehicle_count`.
pub fn generate_grid(spec: &GridSpec, seed: u64) -> Result<(RoadGraph, MobilityTrace), RoadnetError> {
    if !(spec.density > 0.0 && spec.density.is_finite()) {
        return Err(RoadnetError::InvalidGrid(format!("density {} must be positive", spec.density)));
    }
    if !(spec.duration > 0.0) {
        return Err(RoadnetError::InvalidGrid("duration must be positive".into()));
    }
    let (lo, hi) = spec.speed_fraction;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(RoadnetError::InvalidGrid("speed fraction must satisfy 0 < lo <= hi <= 1".into()));
    }
    let graph = build_grid_graph(spec.width, spec.height, spec.block_size, spec.speed_limit, spec.obstacles)?;
    let mut rng = RngStreams::new(seed).stream(StreamId::Mobility);
    let walkers = WalkerSpec {
        count: spec.vehicle_count(),
        first_id: 0,
        duration: spec.duration,
        speed: SpeedModel::FractionOfLimit { lo, hi },
    };
    let trace = generate_walkers(&graph, &walkers, &mut rng);
    Ok((graph, trace))
}

/// Random-trip mobility over an existing graph (vehicles or pedestrians).
pub fn generate_walkers<R: Rng>(graph: &RoadGraph, spec: &WalkerSpec, rng: &mut R) -> MobilityTrace {
    let segs = graph.segments();
    let mut cumulative = Vec::with_capacity(segs.len());
    let mut total = 0.0;
    for s in segs {
        total += s.length;
        cumulative.push(total);
    }
    let mut dist_cache: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let n_int = graph.intersections().len();
    let mut trace = MobilityTrace::new();
    for k in 0..spec.count {
        let node = NodeId(spec.first_id + k as u32);
        let fraction = match spec.speed {
            SpeedModel::FractionOfLimit { lo, hi } => {
                if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                }
            }
            SpeedModel::Constant(_) => 1.0,
        };
        let speed_on = |seg: &Segment| match spec.speed {
            SpeedModel::FractionOfLimit { .. } => fraction * seg.speed_limit,
            SpeedModel::Constant(v) => v,
        };
        let mut records = Vec::new();
        let pick: f64 = rng.random_range(0.0..total);
        let si = cumulative.partition_point(|&c| c <= pick).min(segs.len() - 1);
        let seg = graph.segment_at(si);
        let ia = graph.index_of(seg.a).expect("validated");
        let ib = graph.index_of(seg.b).expect("validated");
        let u: f64 = rng.random();
        let mut pos = graph.intersection_at(ia).pos().lerp(&graph.intersection_at(ib).pos(), u);
        let mut next = if rng.random_bool(0.5) { ia } else { ib };
        let mut speed = speed_on(seg);
        let mut dest: Option<usize> = None;
        let mut t = 0.0;
        records.push(record(t, node, pos, speed));
        loop {
            let target = graph.intersection_at(next).pos();
            let remaining = pos.distance(&target);
            if remaining > 0.0 {
                let dt = remaining / speed;
                if t + dt >= spec.duration {
                    let f = (spec.duration - t) / dt;
                    let end = pos.lerp(&target, f);
                    if spec.duration > t {
                        records.push(record(spec.duration, node, end, speed));
                    }
                    break;
                }
                t += dt;
            }
            pos = target;
            let here = next;
            if dest.is_none_or(|d| d == here) && n_int > 1 {
                let mut d = rng.random_range(0..n_int - 1);
                if d >= here {
                    d += 1;
                }
                dest = Some(d);
            }
            let d = dest.unwrap_or(here);
            let dist = dist_cache.entry(d).or_insert_with(|| graph.distances_to(d));
            let options: Vec<(usize, usize)> = graph
                .neighbors_of(here)
                .iter()
                .copied()
                .filter(|&(j, s)| (dist[j] + graph.segment_at(s).length - dist[here]).abs() < 1e-6)
                .collect();
            let options = if options.is_empty() { graph.neighbors_of(here).to_vec() } else { options };
            let (j, s) = options[rng.random_range(0..options.len())];
            next = j;
            speed = speed_on(graph.segment_at(s));
            if remaining > 0.0 {
                records.push(record(t, node, pos, speed));
            } else if let Some(last) = records.last_mut() {
                last.speed = speed;
            }
        }
        trace.push_node(node, records).expect("generated times increase");
    }
    trace
}

fn record(time: f64, node: NodeId, p: Point, speed: f64) -> TraceRecord {
    TraceRecord { time, node_id: node, x: p.x, y: p.y, speed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vehicle_counts() {
        let spec = GridSpec::new(2500.0, 2500.0, 250.0, 40.0);
        assert_eq!(spec.vehicle_count(), 250);
        let spec = GridSpec::new(2500.0, 2500.0, 250.0, 100.0);
        assert_eq!(spec.vehicle_count(), 625);
    }

    #[test]
    fn generated_count_matches() {
        let mut spec = GridSpec::new(2500.0, 2500.0, 250.0, 40.0);
        spec.duration = 5.0;
        let (_, trace) = generate_grid(&spec, 1).unwrap();
        assert_eq!(trace.node_count(), 250);
    }

    #[test]
    fn zero_density_rejected() {
        let spec = GridSpec::new(1000.0, 1000.0, 100.0, 0.0);
        assert!(matches!(generate_grid(&spec, 1), Err(RoadnetError::InvalidGrid(_))));
    }

    #[test]
    fn degenerate_grid_rejected() {
        assert!(generate_grid(&GridSpec::new(0.0, 1000.0, 100.0, 10.0), 1).is_err());
        assert!(generate_grid(&GridSpec::new(1000.0, 1000.0, 1000.0, 10.0), 1).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let mut spec = GridSpec::new(1000.0, 600.0, 100.0, 50.0);
        spec.duration = 30.0;
        let (_, a) = generate_grid(&spec, 9).unwrap();
        let (_, b) = generate_grid(&spec, 9).unwrap();
        let (_, c) = generate_grid(&spec, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn obstacles_fill_blocks() {
        let g = build_grid_graph(500.0, 500.0, 250.0, DEFAULT_SPEED_LIMIT, true).unwrap();
        assert_eq!(g.obstacles().len(), 4);
        assert!(g.line_blocked(&Point::new(0.0, 100.0), &Point::new(250.0, 100.0)));
        assert!(!g.line_blocked(&Point::new(0.0, 0.0), &Point::new(500.0, 0.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn grids_satisfy_graph_and_trace_invariants(
            w in 300.0..2000.0f64,
            h in 300.0..2000.0f64,
            block in 50.0..290.0f64,
            density in 1.0..80.0f64,
            seed in 0u64..1000,
        ) {
            let mut spec = GridSpec::new(w, h, block, density);
            spec.duration = 40.0;
            let (g, trace) = generate_grid(&spec, seed).unwrap();
            for s in g.segments() {
                let a = g.intersection(s.a).unwrap().pos();
                let b = g.intersection(s.b).unwrap().pos();
                prop_assert!((a.distance(&b) - s.length).abs() <= 1e-6);
            }
            prop_assert_eq!(trace.node_count(), spec.vehicle_count());
            for node in trace.node_ids() {
                let (start, end) = trace.span(node).unwrap();
                prop_assert_eq!(start, 0.0);
                prop_assert_eq!(end, spec.duration);
                let mut t = 0.0;
                while t <= spec.duration {
                    let (p, v) = trace.position_at(node, t).unwrap();
                    prop_assert!(g.distance_to_network(&p) <= 0.5);
                    prop_assert!(v <= spec.speed_limit + 1e-9);
                    t += 1.7;
                }
            }
        }
    }
}
