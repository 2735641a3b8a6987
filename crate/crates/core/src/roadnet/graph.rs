use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{point_segment_distance, Point, Rect};
use crate::spatial::SpatialGrid;

/// Default radius for "vehicle is at an intersection", meters.
pub const DEFAULT_INTERSECTION_RADIUS: f64 = 10.0;

const LENGTH_TOLERANCE: f64 = 1e-6;

pub type IntersectionId = u32;
pub type SegmentId = u32;

#[derive(Debug, Error)]
pub enum RoadnetError {
    #[error("road graph has no intersections")]
    Empty,
    #[error("duplicate intersection id {0}")]
    DuplicateIntersectionId(IntersectionId),
    #[error("intersections {0} and {1} share coordinates")]
    DuplicateCoordinates(IntersectionId, IntersectionId),
    #[error("segment {segment} references unknown intersection {intersection}")]
    UnknownEndpoint {
        segment: SegmentId,
        intersection: IntersectionId,
    },
    #[error("segment {segment} length {length} differs from endpoint distance {expected}")]
    LengthMismatch {
        segment: SegmentId,
        length: f64,
        expected: f64,
    },
    #[error("segment {0} has a non-positive speed limit")]
    BadSpeedLimit(SegmentId),
    #[error("segment {0} is degenerate")]
    DegenerateSegment(SegmentId),
    #[error("duplicate segment id {0}")]
    DuplicateSegmentId(SegmentId),
    #[error("road graph is not connected")]
    Disconnected,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("reading road graph {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing road graph: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: IntersectionId,
    pub x: f64,
    pub y: f64,
}

impl Intersection {
    pub fn pos(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    pub a: IntersectionId,
    pub b: IntersectionId,
    pub length: f64,
    pub speed_limit: f64,
}

/// On-disk road graph schema (TOML):
///
/// ```toml
/// [[intersections]]
/// id = 0
/// x = 0.0
/// y = 0.0
///
/// [[segments]]
/// id = 0
/// a = 0
/// b = 1
/// length = 250.0
/// speed_limit = 13.89
///
/// [[obstacles]]
/// min = { x = 5.0, y = 5.0 }
/// max = { x = 245.0, y = 245.0 }
/// ```
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RoadGraphFile {
    pub intersections: Vec<Intersection>,
    #[serde(default)]
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
}

/// Validated road network with derived lookup structures.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    intersections: Vec<Intersection>,
    segments: Vec<Segment>,
    obstacles: Vec<Rect>,
    index: BTreeMap<IntersectionId, usize>,
    /// Per intersection index: (neighbor index, segment index).
    adjacency: Vec<Vec<(usize, usize)>>,
    points: SpatialGrid,
    obstacle_cells: ObstacleIndex,
}

impl RoadGraph {
    pub fn new(
        intersections: Vec<Intersection>,
        segments: Vec<Segment>,
        obstacles: Vec<Rect>,
    ) -> Result<Self, RoadnetError> {
        if intersections.is_empty() {
            return Err(RoadnetError::Empty);
        }
        let mut index = BTreeMap::new();
        for (i, n) in intersections.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(RoadnetError::DuplicateIntersectionId(n.id));
            }
        }
        let mut by_coord: Vec<usize> = (0..intersections.len()).collect();
        by_coord.sort_by(|&a, &b| {
            intersections[a]
                .x
                .total_cmp(&intersections[b].x)
                .then(intersections[a].y.total_cmp(&intersections[b].y))
        });
        for w in by_coord.windows(2) {
            let (p, q) = (&intersections[w[0]], &intersections[w[1]]);
            if p.x == q.x && p.y == q.y {
                let (lo, hi) = if p.id < q.id { (p.id, q.id) } else { (q.id, p.id) };
                return Err(RoadnetError::DuplicateCoordinates(lo, hi));
            }
        }
        let mut adjacency = vec![Vec::new(); intersections.len()];
        let mut seg_ids = BTreeMap::new();
        for (si, s) in segments.iter().enumerate() {
            if seg_ids.insert(s.id, si).is_some() {
                return Err(RoadnetError::DuplicateSegmentId(s.id));
            }
            let ia = *index.get(&s.a).ok_or(RoadnetError::UnknownEndpoint {
                segment: s.id,
                intersection: s.a,
            })?;
            let ib = *index.get(&s.b).ok_or(RoadnetError::UnknownEndpoint {
                segment: s.id,
                intersection: s.b,
            })?;
            if ia == ib {
                return Err(RoadnetError::DegenerateSegment(s.id));
            }
            let expected = intersections[ia].pos().distance(&intersections[ib].pos());
            if (s.length - expected).abs() > LENGTH_TOLERANCE {
                return Err(RoadnetError::LengthMismatch {
                    segment: s.id,
                    length: s.length,
                    expected,
                });
            }
            if !(s.speed_limit > 0.0 && s.speed_limit.is_finite()) {
                return Err(RoadnetError::BadSpeedLimit(s.id));
            }
            adjacency[ia].push((ib, si));
            adjacency[ib].push((ia, si));
        }
        for adj in adjacency.iter_mut() {
            adj.sort_unstable();
        }
        // Connectivity by BFS from the first intersection.
        let mut seen = vec![false; intersections.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &(j, _) in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(RoadnetError::Disconnected);
        }
        let pts: Vec<Point> = intersections.iter().map(|n| n.pos()).collect();
        let cell = typical_spacing(&segments).max(1.0);
        let obstacle_cells = ObstacleIndex::build(&obstacles, cell.max(50.0));
        Ok(RoadGraph {
            points: SpatialGrid::build(&pts, cell),
            intersections,
            segments,
            obstacles,
            index,
            adjacency,
            obstacle_cells,
        })
    }

    pub fn from_file_repr(file: RoadGraphFile) -> Result<Self, RoadnetError> {
        RoadGraph::new(file.intersections, file.segments, file.obstacles)
    }

    pub fn to_file_repr(&self) -> RoadGraphFile {
        RoadGraphFile {
            intersections: self.intersections.clone(),
            segments: self.segments.clone(),
            obstacles: self.obstacles.clone(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, RoadnetError> {
        let file: RoadGraphFile = toml::from_str(s).map_err(|e| RoadnetError::Parse(e.to_string()))?;
        RoadGraph::from_file_repr(file)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file_repr()).expect("road graph serializes")
    }

    pub fn load(path: &Path) -> Result<Self, RoadnetError> {
        let s = std::fs::read_to_string(path).map_err(|source| RoadnetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        RoadGraph::from_toml_str(&s)
    }

    pub fn intersections(&self) -> &[Intersection] {
        &self.intersections
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn obstacles(&self) -> &[Rect] {
        &self.obstacles
    }

    pub fn intersection(&self, id: IntersectionId) -> Option<&Intersection> {
        self.index.get(&id).map(|&i| &self.intersections[i])
    }

    pub(crate) fn intersection_at(&self, idx: usize) -> &Intersection {
        &self.intersections[idx]
    }

    pub(crate) fn neighbors_of(&self, idx: usize) -> &[(usize, usize)] {
        &self.adjacency[idx]
    }

    pub(crate) fn segment_at(&self, idx: usize) -> &Segment {
        &self.segments[idx]
    }

    pub(crate) fn index_of(&self, id: IntersectionId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Bounding box of all intersections.
    pub fn bounds(&self) -> Rect {
        let mut min = self.intersections[0].pos();
        let mut max = min;
        for n in &self.intersections {
            min.x = min.x.min(n.x);
            min.y = min.y.min(n.y);
            max.x = max.x.max(n.x);
            max.y = max.y.max(n.y);
        }
        Rect::new(min, max)
    }

    pub fn max_speed_limit(&self) -> f64 {
        self.segments.iter().map(|s| s.speed_limit).fold(0.0, f64::max)
    }

    /// Intersection closest to `p` and its distance; ties go to the lowest id.
    pub fn nearest_intersection(&self, p: &Point) -> (IntersectionId, f64) {
        let (i, d) = self
            .points
            .nearest_by(p, |i| self.intersections[i].id)
            .expect("graph is non-empty");
        (self.intersections[i].id, d)
    }

    /// True iff the nearest intersection lies within `radius` (closed boundary).
    pub fn is_at_intersection(&self, p: &Point, radius: f64) -> bool {
        debug_assert!(radius > 0.0);
        self.nearest_intersection(p).1 <= radius
    }

    /// Distance from `p` to the closest segment of the network.
    pub fn distance_to_network(&self, p: &Point) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let a = self.intersections[self.index[&s.a]].pos();
                let b = self.intersections[self.index[&s.b]].pos();
                point_segment_distance(p, &a, &b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the straight line `a-b` passes through any obstacle.
    pub fn line_blocked(&self, a: &Point, b: &Point) -> bool {
        if self.obstacles.is_empty() {
            return false;
        }
        self.obstacle_cells
            .candidates(a, b)
            .any(|i| self.obstacles[i].intersects_segment(a, b))
    }

    /// Shortest-path distances (meters) from every intersection index to `target`.
    pub(crate) fn distances_to(&self, target: usize) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
            }
        }
        let mut dist = vec![f64::INFINITY; self.intersections.len()];
        dist[target] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Item(0.0, target));
        while let Some(Item(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for &(j, s) in &self.adjacency[i] {
                let nd = d + self.segments[s].length;
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Item(nd, j));
                }
            }
        }
        dist
    }
}

fn typical_spacing(segments: &[Segment]) -> f64 {
    if segments.is_empty() {
        return 100.0;
    }
    let mut lengths: Vec<f64> = segments.iter().map(|s| s.length).collect();
    lengths.sort_by(f64::total_cmp);
    lengths[lengths.len() / 2]
}

/// Bucket grid over obstacle rectangles for line-of-sight queries.
#[derive(Debug, Clone, Default)]
struct ObstacleIndex {
    origin: Point,
    cell: f64,
    nx: i64,
    ny: i64,
    buckets: Vec<Vec<usize>>,
}

impl ObstacleIndex {
    fn build(obstacles: &[Rect], cell: f64) -> Self {
        if obstacles.is_empty() {
            return ObstacleIndex::default();
        }
        let mut min = obstacles[0].min;
        let mut max = obstacles[0].max;
        for r in obstacles {
            min.x = min.x.min(r.min.x);
            min.y = min.y.min(r.min.y);
            max.x = max.x.max(r.max.x);
            max.y = max.y.max(r.max.y);
        }
        let nx = ((max.x - min.x) / cell).floor() as i64 + 1;
        let ny = ((max.y - min.y) / cell).floor() as i64 + 1;
        let mut buckets = vec![Vec::new(); (nx * ny) as usize];
        for (i, r) in obstacles.iter().enumerate() {
            let x0 = ((r.min.x - min.x) / cell).floor() as i64;
            let x1 = ((r.max.x - min.x) / cell).floor() as i64;
            let y0 = ((r.min.y - min.y) / cell).floor() as i64;
            let y1 = ((r.max.y - min.y) / cell).floor() as i64;
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    buckets[(cy * nx + cx) as usize].push(i);
                }
            }
        }
        ObstacleIndex {
            origin: min,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn candidates<'a>(&'a self, a: &Point, b: &Point) -> impl Iterator<Item = usize> + 'a {
        let mut found: Vec<usize> = Vec::new();
        if !self.buckets.is_empty() {
            let cx = |x: f64| (((x - self.origin.x) / self.cell).floor() as i64).clamp(0, self.nx - 1);
            let cy = |y: f64| (((y - self.origin.y) / self.cell).floor() as i64).clamp(0, self.ny - 1);
            let (x0, x1) = (cx(a.x.min(b.x)), cx(a.x.max(b.x)));
            let (y0, y1) = (cy(a.y.min(b.y)), cy(a.y.max(b.y)));
            for y in y0..=y1 {
                for x in x0..=x1 {
                    found.extend_from_slice(&self.buckets[(y * self.nx + x) as usize]);
                }
            }
            found.sort_unstable();
            found.dedup();
        }
        found.into_iter()
    }
}
