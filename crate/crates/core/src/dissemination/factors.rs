use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("sender distance {d_sr} exceeds range {r_max}")]
    OutOfRange { d_sr: f64, r_max: f64 },
    #[error("{name} = {value} is invalid")]
    Invalid { name: &'static str, value: f64 },
    #[error("alpha1+alpha2 must equal 10 (got {0})")]
    AlphaSum(f64),
}

/// Distance factor of a receiver.
///
/// Away from intersections (`d_rint > r_max`) the farthest receiver from the
/// sender scores highest; otherwise the score grows as the receiver nears an
/// intersection, reaching 1 exactly on it.
pub fn distance_factor(d_sr: f64, d_rint: f64, r_max: f64) -> Result<f64, FactorError> {
    if !(r_max > 0.0) {
        return Err(FactorError::Invalid { name: "r_max", value: r_max });
    }
    if !(d_sr >= 0.0) {
        return Err(FactorError::Invalid { name: "d_sr", value: d_sr });
    }
    if !(d_rint >= 0.0) {
        return Err(FactorError::Invalid { name: "d_rint", value: d_rint });
    }
    if d_sr > r_max {
        return Err(FactorError::OutOfRange { d_sr, r_max });
    }
    if d_rint > r_max {
        Ok(d_sr / r_max)
    } else {
        Ok(1.0 - d_rint / (d_rint + 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityInputs {
    pub df: f64,
    pub lqf: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl UtilityInputs {
    pub fn new(df: f64, lqf: f64, alpha1: f64, alpha2: f64) -> Result<Self, FactorError> {
        for (name, value) in [("df", df), ("lqf", lqf)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(FactorError::Invalid { name, value });
            }
        }
        if ((alpha1 + alpha2) - 10.0).abs() > 1e-9 {
            return Err(FactorError::AlphaSum(alpha1 + alpha2));
        }
        Ok(UtilityInputs { df, lqf, alpha1, alpha2 })
    }

    /// Default weights 6 and 4.
    pub fn with_defaults(df: f64, lqf: f64) -> Result<Self, FactorError> {
        Self::new(df, lqf, 6.0, 4.0)
    }
}

/// Forwarding utility; lower is a better relay. Spans [1, 1e10] when the weights sum to 10.
pub fn utility(u: &UtilityInputs) -> f64 {
    10f64.powf(10.0 - (u.alpha1 * u.df + u.alpha2 * u.lqf))
}

/// Normalized availability of a receiver for the forwarding game.
pub fn availability(d_sr: f64, r_max: f64, abe_norm: f64) -> f64 {
    0.5 * (d_sr / r_max) + 0.5 * abe_norm
}
