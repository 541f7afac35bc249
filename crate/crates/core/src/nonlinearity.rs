//! Known static input nonlinearities applied ahead of the linear plant.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Memoryless input nonlinearity `sigma` with `sigma(0) = 0`.
///
/// Vector controls are mapped componentwise with the same kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Identity,
    /// Magnitude saturation onto `[u_min, u_max]`.
    Saturation { u_min: f64, u_max: f64 },
    /// Zero on `|u| < dead_halfwidth`, identity up to `sat_level`, then
    /// saturated at `±sat_level`.
    DeadzoneSaturation { dead_halfwidth: f64, sat_level: f64 },
}

impl Nonlinearity {
    pub fn saturation(u_min: f64, u_max: f64) -> Result<Self> {
        let nl = Nonlinearity::Saturation { u_min, u_max };
        nl.validate()?;
        Ok(nl)
    }

    pub fn deadzone_saturation(dead_halfwidth: f64, sat_level: f64) -> Result<Self> {
        let nl = Nonlinearity::DeadzoneSaturation { dead_halfwidth, sat_level };
        nl.validate()?;
        Ok(nl)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Nonlinearity::Identity => Ok(()),
            Nonlinearity::Saturation { u_min, u_max } => {
                if u_min < 0.0 && 0.0 < u_max {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "saturation needs u_min < 0 < u_max, got [{u_min}, {u_max}]"
                    )))
                }
            }
            Nonlinearity::DeadzoneSaturation { dead_halfwidth, sat_level } => {
                if 0.0 < dead_halfwidth && dead_halfwidth < sat_level {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "deadzone needs 0 < dead_halfwidth < sat_level, got {dead_halfwidth}, {sat_level}"
                    )))
                }
            }
        }
    }

    /// Scalar evaluation of `sigma`.
    pub fn apply(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Identity => u,
            Nonlinearity::Saturation { u_min, u_max } => u.clamp(u_min, u_max),
            Nonlinearity::DeadzoneSaturation { dead_halfwidth, sat_level } => {
                let a = u.abs();
                if a < dead_halfwidth {
                    0.0
                } else if a <= sat_level {
                    u
                } else {
                    sat_level.copysign(u)
                }
            }
        }
    }

    /// Componentwise evaluation on a control vector.
    pub fn evaluate(&self, u: &DVector<f64>) -> DVector<f64> {
        u.map(|v| self.apply(v))
    }

    /// `sigma(u) / u`, with the removable singularity at zero filled by its limit.
    pub fn gain_ratio(&self, u: f64) -> f64 {
        if u == 0.0 {
            return self.gain_at_zero();
        }
        self.apply(u) / u
    }

    /// `lim_{u -> 0} sigma(u) / u`.
    pub fn gain_at_zero(&self) -> f64 {
        match self {
            Nonlinearity::Identity | Nonlinearity::Saturation { .. } => 1.0,
            Nonlinearity::DeadzoneSaturation { .. } => 0.0,
        }
    }

    /// Largest output magnitude, `None` when unbounded.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            Nonlinearity::Identity => None,
            Nonlinearity::Saturation { u_min, u_max } => Some(u_min.abs().max(u_max)),
            Nonlinearity::DeadzoneSaturation { sat_level, .. } => Some(sat_level),
        }
    }
}
