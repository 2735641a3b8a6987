//! Unicast geographic routing toward a fixed destination point.
//!
//! Two forwarder-selection rules share the same neighbor tables:
//! GPSR (closest-to-destination greedy with right-hand-rule perimeter
//! recovery) and a five-metric scorer whose weights can adapt to how much
//! each metric discriminates among the current neighbors.

mod gpsr;
mod multimetric;
mod neighbor;

pub use gpsr::{
    gabriel_neighbors, gpsr_greedy_next, gpsr_perimeter_next, route_static, PerimeterState, PerimeterStep,
    StaticRoute, StaticTopology,
};
pub use multimetric::{
    coefficient_of_variation, dsw_update, multimetric_score, normalize_metrics, select_forwarder, MetricConfig,
    MetricVector, MetricWeights, WeightsError, DEFAULT_W_FLOOR, METRIC_COUNT,
};
pub use neighbor::{NeighborEntry, NeighborTable};
