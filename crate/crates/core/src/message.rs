//! Messages carried over the radio and the video frame traces that feed them.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    Beacon,
    /// Broadcast warning payload (a video fragment or a single warning).
    Warning,
    /// Unicast payload routed toward a roadside unit.
    Data,
    CtdQuery,
    CtdReply,
    Alert,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::Beacon,
        MessageKind::Warning,
        MessageKind::Data,
        MessageKind::CtdQuery,
        MessageKind::CtdReply,
        MessageKind::Alert,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Beacon => "beacon",
            MessageKind::Warning => "warning",
            MessageKind::Data => "data",
            MessageKind::CtdQuery => "ctd-query",
            MessageKind::CtdReply => "ctd-reply",
            MessageKind::Alert => "alert",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrameType {
    I,
    P,
    B,
}

impl FrameType {
    pub fn index(self) -> usize {
        match self {
            FrameType::I => 0,
            FrameType::P => 1,
            FrameType::B => 2,
        }
    }
}

/// Which part of which video frame a message carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRef {
    pub frame: u32,
    pub frame_type: FrameType,
    pub fragment: u16,
    pub fragments: u16,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("message {0:?} has no hops left")]
pub struct TtlExpired(pub MessageId);

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub id: MessageId,
    pub kind: MessageKind,
    pub origin: NodeId,
    pub origin_pos: Point,
    pub created: f64,
    pub size_bytes: u32,
    pub hops: u32,
    pub ttl: u32,
    pub frame: Option<FrameRef>,
}

impl Message {
    /// Copy for the next hop: one more hop, one less TTL.
    pub fn relay(&self) -> Result<Message, TtlExpired> {
        if self.ttl == 0 {
            return Err(TtlExpired(self.id));
        }
        Ok(Message { hops: self.hops + 1, ttl: self.ttl - 1, ..self.clone() })
    }
}

#[derive(Debug, Error)]
pub enum FrameTraceError {
    #[error("frame trace: {0}")]
    Csv(#[from] csv::Error),
    #[error("frame trace header must be frame_index,frame_type,size_bytes (got {0})")]
    Header(String),
    #[error("frame trace row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("frame trace is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: u32,
    pub frame_type: FrameType,
    pub size_bytes: u32,
}

/// Video frame sequence: `frame_index,frame_type,size_bytes`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameTrace {
    pub frames: Vec<FrameRecord>,
}

const FRAME_HEADER: [&str; 3] = ["frame_index", "frame_type", "size_bytes"];

/// Group of pictures used by the synthetic trace.
const GOP: &[FrameType] = &[
    FrameType::I,
    FrameType::B,
    FrameType::B,
    FrameType::P,
    FrameType::B,
    FrameType::B,
    FrameType::P,
    FrameType::B,
    FrameType::B,
    FrameType::P,
    FrameType::B,
    FrameType::B,
];

fn gop_weight(t: FrameType) -> u32 {
    match t {
        FrameType::I => 5,
        FrameType::P => 2,
        FrameType::B => 1,
    }
}

impl FrameTrace {
    /// Deterministic trace with a repeating 12-frame GOP whose mean rate matches `bitrate`.
    pub fn synthetic(n_frames: u32, fps: f64, bitrate: f64) -> Self {
        let total_weight: u32 = GOP.iter().map(|&t| gop_weight(t)).sum();
        let unit = bitrate / 8.0 / fps * GOP.len() as f64 / total_weight as f64;
        let frames = (0..n_frames)
            .map(|i| {
                let frame_type = GOP[i as usize % GOP.len()];
                FrameRecord {
                    frame_index: i,
                    frame_type,
                    size_bytes: (unit * gop_weight(frame_type) as f64).round().max(1.0) as u32,
                }
            })
            .collect();
        FrameTrace { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.frames.iter().map(|f| f.size_bytes as u64).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FrameTraceError> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        if self.frames.is_empty() {
            wr.write_record(FRAME_HEADER)?;
        }
        for f in &self.frames {
            wr.serialize(f)?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, FrameTraceError> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let header = rd.headers()?.clone();
        if header.iter().ne(FRAME_HEADER) {
            return Err(FrameTraceError::Header(header.iter().collect::<Vec<_>>().join(",")));
        }
        let mut frames: Vec<FrameRecord> = Vec::new();
        for (row, rec) in rd.deserialize().enumerate() {
            let rec: FrameRecord = rec?;
            if rec.size_bytes == 0 {
                return Err(FrameTraceError::Row { row: row + 1, reason: "size_bytes must be positive".into() });
            }
            if let Some(prev) = frames.last() {
                if rec.frame_index <= prev.frame_index {
                    return Err(FrameTraceError::Row { row: row + 1, reason: "frame_index must increase".into() });
                }
            }
            frames.push(rec);
        }
        if frames.is_empty() {
            return Err(FrameTraceError::Empty);
        }
        Ok(FrameTrace { frames })
    }

    pub fn load(path: &Path) -> Result<Self, FrameTraceError> {
        let f = std::fs::File::open(path).map_err(csv::Error::from)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Split `size` bytes into fragments of at most `mtu` bytes.
pub fn fragment_sizes(size: u32, mtu: u32) -> Vec<u32> {
    let mtu = mtu.max(1);
    let n = size.div_ceil(mtu).max(1);
    (0..n).map(|i| if i + 1 < n { mtu } else { size - mtu * (n - 1) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_rate_matches() {
        let tr = FrameTrace::synthetic(250, 25.0, 150_000.0);
        let rate = tr.total_bytes() as f64 * 8.0 / 10.0;
        assert!((rate - 150_000.0).abs() / 150_000.0 < 0.01, "{rate}");
        assert_eq!(tr.frames[0].frame_type, FrameType::I);
        assert_eq!(tr.frames[12].frame_type, FrameType::I);
    }

    #[test]
    fn csv_round_trip() {
        let tr = FrameTrace::synthetic(13, 25.0, 150_000.0);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("frame_index,frame_type,size_bytes\n0,I,"));
        assert_eq!(FrameTrace::read_csv(&buf[..]).unwrap(), tr);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(matches!(FrameTrace::read_csv("a,b,c\n".as_bytes()), Err(FrameTraceError::Header(_))));
    }

    #[test]
    fn fragments() {
        assert_eq!(fragment_sizes(3000, 1400), vec![1400, 1400, 200]);
        assert_eq!(fragment_sizes(10, 1400), vec![10]);
    }

    #[test]
    fn relay_decrements_ttl() {
        let m = Message {
            id: MessageId(1),
            kind: MessageKind::Warning,
            origin: NodeId(0),
            origin_pos: Point::new(0.0, 0.0),
            created: 0.0,
            size_bytes: 100,
            hops: 0,
            ttl: 1,
            frame: None,
        };
        let r = m.relay().unwrap();
        assert_eq!((r.hops, r.ttl), (1, 0));
        assert_eq!(r.relay(), Err(TtlExpired(MessageId(1))));
    }
}
