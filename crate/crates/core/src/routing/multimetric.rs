use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::NodeId;

use super::NeighborEntry;

pub const METRIC_COUNT: usize = 5;
pub const DEFAULT_W_FLOOR: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightsError {
    #[error("weights sum to {0}, expected 1")]
    Sum(f64),
    #[error("weight {index} = {value} below floor {floor}")]
    BelowFloor { index: usize, value: f64, floor: f64 },
    #[error("floor {0} is infeasible for {METRIC_COUNT} weights")]
    Floor(f64),
}

/// Five normalized forwarding metrics; higher is better for every component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricVector {
    pub m_dist: f64,
    pub m_density: f64,
    pub m_traj: f64,
    pub m_abe: f64,
    pub m_mac: f64,
}

impl MetricVector {
    pub fn to_array(&self) -> [f64; METRIC_COUNT] {
        [self.m_dist, self.m_density, self.m_traj, self.m_abe, self.m_mac]
    }

    pub fn from_array(a: [f64; METRIC_COUNT]) -> Self {
        MetricVector { m_dist: a[0], m_density: a[1], m_traj: a[2], m_abe: a[3], m_mac: a[4] }
    }
}

/// Metric weights. Always sum to 1 with every component at or above the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWeights {
    pub w_dist: f64,
    pub w_density: f64,
    pub w_traj: f64,
    pub w_abe: f64,
    pub w_mac: f64,
}

impl MetricWeights {
    pub fn equal() -> Self {
        Self::from_array_unchecked([1.0 / METRIC_COUNT as f64; METRIC_COUNT])
    }

    pub fn new(w: [f64; METRIC_COUNT], floor: f64) -> Result<Self, WeightsError> {
        let out = Self::from_array_unchecked(w);
        out.check(floor)?;
        Ok(out)
    }

    fn from_array_unchecked(a: [f64; METRIC_COUNT]) -> Self {
        MetricWeights { w_dist: a[0], w_density: a[1], w_traj: a[2], w_abe: a[3], w_mac: a[4] }
    }

    pub fn to_array(&self) -> [f64; METRIC_COUNT] {
        [self.w_dist, self.w_density, self.w_traj, self.w_abe, self.w_mac]
    }

    pub fn check(&self, floor: f64) -> Result<(), WeightsError> {
        if !(0.0..=1.0 / METRIC_COUNT as f64).contains(&floor) {
            return Err(WeightsError::Floor(floor));
        }
        let a = self.to_array();
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(WeightsError::Sum(sum));
        }
        for (index, &value) in a.iter().enumerate() {
            if value < floor - 1e-12 {
                return Err(WeightsError::BelowFloor { index, value, floor });
            }
        }
        Ok(())
    }
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self::equal()
    }
}

/// Normalization references for [`normalize_metrics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    /// Density mapped to 1.0, in nodes/km².
    pub density_ref: f64,
    /// Channel bitrate in bits/s, used to scale the advertised ABE.
    pub bitrate: f64,
    /// Look-ahead for the trajectory metric, in seconds.
    pub horizon: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { density_ref: 100.0, bitrate: 6e6, horizon: 1.0 }
    }
}

/// Map one neighbor's advertised state to a [`MetricVector`].
pub fn normalize_metrics(entry: &NeighborEntry, current: &Point, dest: &Point, cfg: &MetricConfig) -> MetricVector {
    let d_ref = current.distance(dest);
    let d = entry.pos.distance(dest);
    let m_dist = if d_ref > 0.0 {
        (1.0 - d / d_ref).clamp(0.0, 1.0)
    } else if d == 0.0 {
        1.0
    } else {
        0.0
    };
    let m_density = if cfg.density_ref > 0.0 {
        (entry.advertised_density / cfg.density_ref).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let ahead = entry.pos.offset(entry.heading, entry.speed * cfg.horizon);
    let m_traj = if ahead.distance(dest) < d { 1.0 } else { 0.0 };
    let m_abe = (entry.advertised_abe / cfg.bitrate).clamp(0.0, 1.0);
    let m_mac = (1.0 - entry.advertised_mac_loss).clamp(0.0, 1.0);
    MetricVector { m_dist, m_density, m_traj, m_abe, m_mac }
}

pub fn multimetric_score(v: &MetricVector, w: &MetricWeights) -> f64 {
    v.to_array().iter().zip(w.to_array()).map(|(m, w)| m * w).sum()
}

/// Highest-scoring candidate; ties go to the lowest id.
pub fn select_forwarder(candidates: &[(NodeId, MetricVector)], w: &MetricWeights) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for &(id, ref v) in candidates {
        let s = multimetric_score(v, w);
        best = match best {
            Some((bid, bs)) if bs > s || (bs == s && bid < id) => Some((bid, bs)),
            _ => Some((id, s)),
        };
    }
    best.map(|(id, _)| id)
}

/// Population coefficient of variation; 0 when the mean is 0 or there are no values.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean.abs() < 1e-300 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean.abs()
}

/// Rescale non-negative weights to sum to 1 with every entry at least `floor`.
///
/// Entries pushed below the floor are pinned there and the remaining mass is
/// shared among the others in proportion to their current values.
fn renormalize_with_floor(mut w: [f64; METRIC_COUNT], floor: f64) -> [f64; METRIC_COUNT] {
    let mut pinned = [false; METRIC_COUNT];
    loop {
        let n_pinned = pinned.iter().filter(|&&p| p).count();
        let budget = 1.0 - n_pinned as f64 * floor;
        let free_sum: f64 = (0..METRIC_COUNT).filter(|&i| !pinned[i]).map(|i| w[i]).sum();
        let n_free = METRIC_COUNT - n_pinned;
        for i in 0..METRIC_COUNT {
            if pinned[i] {
                w[i] = floor;
            } else if free_sum > 0.0 {
                w[i] *= budget / free_sum;
            } else {
                w[i] = budget / n_free as f64;
            }
        }
        let mut changed = false;
        for i in 0..METRIC_COUNT {
            if !pinned[i] && w[i] < floor {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed || pinned.iter().all(|&p| p) {
            for i in 0..METRIC_COUNT {
                if pinned[i] {
                    w[i] = floor;
                }
            }
            return w;
        }
    }
}

/// Dynamic self-configured weights.
///
/// Each metric's candidate weight is its coefficient of variation across the
/// current neighbors, normalized over the five metrics, so a metric that
/// separates neighbors gains influence and a constant one fades to the
/// floor. The result is blended with `prev` by `lambda` and renormalized.
/// With fewer than two neighbors the equal split is returned.
pub fn dsw_update(snapshots: &[MetricVector], prev: &MetricWeights, lambda: f64, floor: f64) -> MetricWeights {
    if snapshots.len() < 2 {
        return MetricWeights::equal();
    }
    let lambda = lambda.clamp(0.0, 1.0);
    let floor = floor.clamp(0.0, 1.0 / METRIC_COUNT as f64);
    let mut raw = [0.0; METRIC_COUNT];
    for (k, r) in raw.iter_mut().enumerate() {
        let col: Vec<f64> = snapshots.iter().map(|v| v.to_array()[k]).collect();
        *r = coefficient_of_variation(&col);
    }
    let total: f64 = raw.iter().sum();
    let candidate = if total > 0.0 {
        raw.map(|r| r / total)
    } else {
        [1.0 / METRIC_COUNT as f64; METRIC_COUNT]
    };
    let p = prev.to_array();
    let mut blended = [0.0; METRIC_COUNT];
    for k in 0..METRIC_COUNT {
        blended[k] = lambda * candidate[k] + (1.0 - lambda) * p[k];
    }
    MetricWeights::from_array_unchecked(renormalize_with_floor(blended, floor))
}
