use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimerError {
    #[error("timers: need 0 < t_min <= t_max (t_min={t_min}, t_max={t_max})")]
    Bounds { t_min: f64, t_max: f64 },
    #[error("timers.t_fixed must be positive, got {0}")]
    Fixed(f64),
    #[error("timers.poll must be positive, got {0}")]
    Poll(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimerScheme {
    Fixed,
    SpeedAdaptive,
    MapPolling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimerConfig {
    /// Interval for the fixed scheme, seconds.
    pub t_fixed: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Map-polling period, seconds.
    pub poll: f64,
}

impl Default for TimerConfig {
    fn default() -> Self {
        TimerConfig { t_fixed: 2.0, t_min: 1.0, t_max: 5.0, poll: 0.5 }
    }
}

impl TimerConfig {
    pub fn validate(&self) -> Vec<TimerError> {
        let mut errs = Vec::new();
        if !(self.t_min > 0.0 && self.t_min <= self.t_max) {
            errs.push(TimerError::Bounds { t_min: self.t_min, t_max: self.t_max });
        }
        if !(self.t_fixed > 0.0) {
            errs.push(TimerError::Fixed(self.t_fixed));
        }
        if !(self.poll > 0.0) {
            errs.push(TimerError::Poll(self.poll));
        }
        errs
    }
}

/// Delay until the next retransmission attempt.
///
/// Fixed: always `t_fixed`. Speed-adaptive: interpolates from `t_max` when
/// stopped to `t_min` at `v_max`. Map-polling: zero when the vehicle is at an
/// intersection, else one poll period; callers enforce the `t_max` cap.
pub fn retransmission_delay(scheme: TimerScheme, v: f64, v_max: f64, at_intersection: bool, cfg: &TimerConfig) -> f64 {
    match scheme {
        TimerScheme::Fixed => cfg.t_fixed,
        TimerScheme::SpeedAdaptive => {
            let ratio = if v_max > 0.0 { (v / v_max).clamp(0.0, 1.0) } else { 0.0 };
            cfg.t_min + (cfg.t_max - cfg.t_min) * (1.0 - ratio)
        }
        TimerScheme::MapPolling => {
            if at_intersection {
                0.0
            } else {
                cfg.poll.min(cfg.t_max)
            }
        }
    }
}
