//! Continuous-time plant with input nonlinearity and harmonic disturbance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ode::{self, Tolerances};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::serde_mat;

/// One harmonic term `d_c cos(omega t) + d_s sin(omega t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub omega: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

/// Disturbance active from `start` seconds until the next segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSegment {
    pub start: f64,
    pub harmonics: Vec<Harmonic>,
}

/// Constant command active from `start` seconds until the next segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandSegment {
    pub start: f64,
    pub value: Vec<f64>,
}

fn default_tol() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    #[serde(with = "serde_mat::matrix")]
    pub a: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub b: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub d1: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub c: DMatrix<f64>,
    #[serde(default)]
    pub disturbance: Vec<DisturbanceSegment>,
    #[serde(default)]
    pub command: Vec<CommandSegment>,
    #[serde(default)]
    pub noise_std: f64,
    pub x0: Vec<f64>,
    pub sample_time: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub rtol: f64,
    #[serde(default = "default_tol")]
    pub atol: f64,
}

/// Switch times within this fraction of a sample count as reached.
const SWITCH_SLACK: f64 = 1e-9;

impl PlantConfig {
    /// SISO chain of `n` integrators with `B = D1 = e_n` and output row `c`.
    pub fn chain_of_integrators(c: &[f64], x0: &[f64], sample_time: f64, duration: f64) -> Self {
        let n = c.len();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        let mut b = DMatrix::zeros(n, 1);
        b[(n - 1, 0)] = 1.0;
        PlantConfig {
            a,
            d1: b.clone(),
            b,
            c: DMatrix::from_row_slice(1, n, c),
            disturbance: Vec::new(),
            command: Vec::new(),
            noise_std: 0.0,
            x0: x0.to_vec(),
            sample_time,
            duration,
            seed: 0,
            rtol: 1e-5,
            atol: 1e-5,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn disturbance_dim(&self) -> usize {
        self.d1.ncols()
    }

    /// Number of sample intervals simulated.
    pub fn steps(&self) -> usize {
        (self.duration / self.sample_time).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.state_dim();
        let bad = |m: String| Err(Error::Config(m));
        if self.a.ncols() != n || self.b.nrows() != n || self.d1.nrows() != n || self.c.ncols() != n {
            return bad("plant matrices have inconsistent dimensions".into());
        }
        if self.x0.len() != n {
            return bad(format!("x0 has length {}, expected {n}", self.x0.len()));
        }
        if !(self.sample_time > 0.0) || !(self.duration >= 0.0) {
            return bad("sample_time must be positive and duration nonnegative".into());
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be nonnegative".into());
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("integrator tolerances must be positive".into());
        }
        let q = self.disturbance_dim();
        for seg in &self.disturbance {
            for h in &seg.harmonics {
                if !(h.omega > 0.0) {
                    return bad(format!("disturbance frequency must be positive, got {}", h.omega));
                }
                if (!h.cos.is_empty() && h.cos.len() != q) || (!h.sin.is_empty() && h.sin.len() != q) {
                    return bad(format!("disturbance amplitudes must have length {q}"));
                }
            }
        }
        for seg in &self.command {
            if seg.value.len() != self.output_dim() {
                return bad(format!("command value must have length {}", self.output_dim()));
            }
        }
        Ok(())
    }

    fn active<'a, T>(&self, segments: &'a [T], start: impl Fn(&T) -> f64, t: f64) -> Option<&'a T> {
        let slack = SWITCH_SLACK * self.sample_time;
        segments.iter().filter(|s| start(s) <= t + slack).last()
    }

    /// Disturbance segment governing the sample interval starting at `t0`.
    pub fn disturbance_segment(&self, t0: f64) -> Option<&DisturbanceSegment> {
        self.active(&self.disturbance, |s| s.start, t0)
    }

    /// `d(t)` using `segment`'s harmonics.
    pub fn disturbance_value(&self, segment: Option<&DisturbanceSegment>, t: f64) -> DVector<f64> {
        let mut d = DVector::zeros(self.disturbance_dim());
        if let Some(seg) = segment {
            for h in &seg.harmonics {
                let (c, s) = ((h.omega * t).cos(), (h.omega * t).sin());
                for (i, v) in h.cos.iter().enumerate() {
                    d[i] += v * c;
                }
                for (i, v) in h.sin.iter().enumerate() {
                    d[i] += v * s;
                }
            }
        }
        d
    }

    /// `d(t)` at a sample time.
    pub fn disturbance_at(&self, t: f64) -> DVector<f64> {
        self.disturbance_value(self.disturbance_segment(t), t)
    }

    /// Command `r` at a sample time (zero before the first segment).
    pub fn command_at(&self, t: f64) -> DVector<f64> {
        match self.active(&self.command, |s| s.start, t) {
            Some(seg) => DVector::from_column_slice(&seg.value),
            None => DVector::zeros(self.output_dim()),
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { rtol: self.rtol, atol: self.atol }
    }
}

/// `x(t0 + T_s)` under `dx/dt = A x + B sigma(u) + D1 d(t)` with `u` held.
pub fn integrate_sample_interval(
    plant: &PlantConfig,
    x: &DVector<f64>,
    u_held: &DVector<f64>,
    t0: f64,
    nl: &Nonlinearity,
) -> Result<DVector<f64>> {
    let segment = plant.disturbance_segment(t0);
    let forced = &plant.b * nl.evaluate(u_held);
    let rhs = |t: f64, x: &DVector<f64>| {
        let mut dx = &plant.a * x + &forced;
        if segment.is_some() {
            dx += &plant.d1 * plant.disturbance_value(segment, t);
        }
        dx
    };
    let (x1, _) = ode::integrate(rhs, t0, t0 + plant.sample_time, x, plant.tolerances())?;
    Ok(x1)
}

/// Equilibrium `x_* = (r / c_1, 0, .., 0)` of the integrator chain with `C x_* = r`.
pub fn shift_coordinates(r: f64, c: &[f64]) -> Result<DVector<f64>> {
    let first = *c.first().ok_or_else(|| Error::Dimension("empty output row".into()))?;
    if first == 0.0 {
        return Err(Error::Config(
            "first output coefficient is zero; command is not reachable at a chain equilibrium".into(),
        ));
    }
    let mut x = DVector::zeros(c.len());
    x[0] = r / first;
    Ok(x)
}
