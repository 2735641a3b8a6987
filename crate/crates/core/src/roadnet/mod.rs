//! Urban road graph, synthetic grid scenarios and mobility traces.

mod generate;
mod graph;
mod trace;

pub use generate::{
    build_grid_graph, generate_grid, generate_walkers, GridSpec, SpeedModel, WalkerSpec, DEFAULT_SPEED_LIMIT,
    OBSTACLE_INSET, PEDESTRIAN_SPEED,
};
pub use graph::{
    Intersection, IntersectionId, RoadGraph, RoadGraphFile, RoadnetError, Segment, SegmentId,
    DEFAULT_INTERSECTION_RADIUS,
};
pub use trace::{MobilityTrace, MotionState, TraceError, TraceRecord};
