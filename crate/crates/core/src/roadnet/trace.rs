use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point, Vec2};
use crate::NodeId;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("node {node}: time {t} outside trace span [{start}, {end}]")]
    OutOfSpan { node: NodeId, t: f64, start: f64, end: f64 },
    #[error("node {0} has no trace records")]
    UnknownNode(NodeId),
    #[error("node {node}: record times must strictly increase ({prev} then {next})")]
    NonIncreasing { node: NodeId, prev: f64, next: f64 },
    #[error("node {node}: non-finite value at t={t}")]
    NonFinite { node: NodeId, t: f64 },
    #[error("trace csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace header must be `time,node_id,x,y,speed`, got `{0}`")]
    Header(String),
}

/// One trace line: `time,node_id,x,y,speed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub node_id: NodeId,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionState {
    pub pos: Point,
    pub speed: f64,
    /// Unit vector of travel; zero while stationary.
    pub heading: Vec2,
}

/// Per-node time-ordered position records with linear playback.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MobilityTrace {
    nodes: BTreeMap<NodeId, Vec<TraceRecord>>,
}

const HEADER: [&str; 5] = ["time", "node_id", "x", "y", "speed"];

impl MobilityTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from records in any order; per-node order is by time.
    pub fn from_records(records: impl IntoIterator<Item = TraceRecord>) -> Result<Self, TraceError> {
        let mut nodes: BTreeMap<NodeId, Vec<TraceRecord>> = BTreeMap::new();
        for r in records {
            if !(r.time.is_finite() && r.x.is_finite() && r.y.is_finite() && r.speed.is_finite()) {
                return Err(TraceError::NonFinite { node: r.node_id, t: r.time });
            }
            nodes.entry(r.node_id).or_default().push(r);
        }
        for (node, recs) in nodes.iter_mut() {
            recs.sort_by(|a, b| a.time.total_cmp(&b.time));
            for w in recs.windows(2) {
                if w[1].time <= w[0].time {
                    return Err(TraceError::NonIncreasing {
                        node: *node,
                        prev: w[0].time,
                        next: w[1].time,
                    });
                }
            }
        }
        Ok(MobilityTrace { nodes })
    }

    /// Append records for one node (times must continue increasing).
    pub fn push_node(&mut self, node: NodeId, records: Vec<TraceRecord>) -> Result<(), TraceError> {
        for w in records.windows(2) {
            if w[1].time <= w[0].time {
                return Err(TraceError::NonIncreasing { node, prev: w[0].time, next: w[1].time });
            }
        }
        self.nodes.insert(node, records);
        Ok(())
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn records(&self, node: NodeId) -> Option<&[TraceRecord]> {
        self.nodes.get(&node).map(|v| v.as_slice())
    }

    pub fn all_records(&self) -> impl Iterator<Item = &TraceRecord> {
        self.nodes.values().flatten()
    }

    pub fn span(&self, node: NodeId) -> Option<(f64, f64)> {
        let r = self.nodes.get(&node)?;
        Some((r.first()?.time, r.last()?.time))
    }

    /// Interpolated position and speed of `node` at time `t`.
    pub fn position_at(&self, node: NodeId, t: f64) -> Result<(Point, f64), TraceError> {
        let s = self.state_at(node, t)?;
        Ok((s.pos, s.speed))
    }

    pub fn state_at(&self, node: NodeId, t: f64) -> Result<MotionState, TraceError> {
        let recs = self.nodes.get(&node).ok_or(TraceError::UnknownNode(node))?;
        let (start, end) = (recs[0].time, recs[recs.len() - 1].time);
        if !(t >= start && t <= end) {
            return Err(TraceError::OutOfSpan { node, t, start, end });
        }
        // First record with time > t; the bracket is [k-1, k].
        let k = recs.partition_point(|r| r.time <= t);
        if k == recs.len() {
            let last = &recs[k - 1];
            let heading = if k >= 2 {
                Vec2::between(&pos(&recs[k - 2]), &pos(last)).unit()
            } else {
                Vec2::default()
            };
            return Ok(MotionState { pos: pos(last), speed: last.speed, heading });
        }
        let a = &recs[k - 1];
        let b = &recs[k];
        let f = (t - a.time) / (b.time - a.time);
        let heading = Vec2::between(&pos(a), &pos(b)).unit();
        Ok(MotionState {
            pos: pos(a).lerp(&pos(b), f),
            speed: a.speed + (b.speed - a.speed) * f,
            heading,
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TraceError> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        // serialize() emits the header from the field names on the first record
        if self.node_count() == 0 {
            wr.write_record(HEADER)?;
        }
        for r in self.all_records() {
            wr.serialize(r)?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, TraceError> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers()?.clone();
        if header.iter().map(str::trim).ne(HEADER) {
            return Err(TraceError::Header(header.iter().collect::<Vec<_>>().join(",")));
        }
        let records: Result<Vec<TraceRecord>, _> = rd.deserialize().collect();
        MobilityTrace::from_records(records?)
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let f = std::fs::File::open(path).map_err(csv::Error::from)?;
        MobilityTrace::read_csv(std::io::BufReader::new(f))
    }
}

fn pos(r: &TraceRecord) -> Point {
    Point::new(r.x, r.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, x: f64, speed: f64) -> TraceRecord {
        TraceRecord { time: t, node_id: NodeId(1), x, y: 0.0, speed }
    }

    #[test]
    fn interpolates_linearly() {
        let tr = MobilityTrace::from_records([rec(0.0, 0.0, 10.0), rec(10.0, 100.0, 10.0)]).unwrap();
        let (p, v) = tr.position_at(NodeId(1), 5.0).unwrap();
        assert_eq!(p, Point::new(50.0, 0.0));
        assert_eq!(v, 10.0);
    }

    #[test]
    fn exact_record_time() {
        let tr = MobilityTrace::from_records([rec(0.0, 0.0, 1.0), rec(4.0, 40.0, 3.0), rec(10.0, 100.0, 5.0)])
            .unwrap();
        assert_eq!(tr.position_at(NodeId(1), 4.0).unwrap(), (Point::new(40.0, 0.0), 3.0));
        assert_eq!(tr.position_at(NodeId(1), 10.0).unwrap(), (Point::new(100.0, 0.0), 5.0));
        assert_eq!(tr.position_at(NodeId(1), 0.0).unwrap(), (Point::new(0.0, 0.0), 1.0));
    }

    #[test]
    fn outside_span_names_node() {
        let tr = MobilityTrace::from_records([rec(0.0, 0.0, 10.0), rec(10.0, 100.0, 10.0)]).unwrap();
        let err = tr.position_at(NodeId(1), 11.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("node 1") && msg.contains("[0, 10]"), "{msg}");
    }

    #[test]
    fn rejects_repeated_times() {
        assert!(matches!(
            MobilityTrace::from_records([rec(1.0, 0.0, 1.0), rec(1.0, 1.0, 1.0)]),
            Err(TraceError::NonIncreasing { .. })
        ));
    }

    #[test]
    fn csv_format() {
        let tr = MobilityTrace::from_records([rec(0.0, 0.0, 10.0), rec(2.5, 25.0, 10.0)]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "time,node_id,x,y,speed\n0.0,1,0.0,0.0,10.0\n2.5,1,25.0,0.0,10.0\n");
        assert_eq!(MobilityTrace::read_csv(buf.as_slice()).unwrap(), tr);
    }

    #[test]
    fn missing_header_rejected() {
        let text = "t,id,x,y,v\n0,1,0,0,1\n";
        assert!(matches!(MobilityTrace::read_csv(text.as_bytes()), Err(TraceError::Header(_))));
    }
}
