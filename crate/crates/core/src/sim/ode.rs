//! Dormand-Prince 5(4) embedded Runge-Kutta with adaptive steps.

use nalgebra::DVector;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

// 5th-order weights (also the last stage row, FSAL)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// difference between 5th- and 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-5, atol: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `dx/dt = rhs(t, x)` from `t0` to `t1`, returning `x(t1)`.
///
/// The step error is measured in the max norm against
/// `atol + rtol * max(|x|, |x_new|)` per component.
pub fn integrate<F>(rhs: F, t0: f64, t1: f64, x0: &DVector<f64>, tol: Tolerances) -> Result<(DVector<f64>, OdeStats)>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let mut stats = OdeStats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((x0.clone(), stats));
    }
    let mut t = t0;
    let mut x = x0.clone();
    let mut h = span;
    let mut k1 = rhs(t, &x);
    let max_steps = 100_000;

    while (t1 - t) > 1e-14 * span.abs().max(t1.abs()) {
        if stats.accepted + stats.rejected > max_steps {
            return Err(Error::Integration { t, reason: "too many steps".into() });
        }
        if h.abs() < 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::Integration { t, reason: "step size underflow".into() });
        }
        if t + h > t1 {
            h = t1 - t;
        }
        let k2 = rhs(t + C2 * h, &(&x + &k1 * (h * A21)));
        let k3 = rhs(t + C3 * h, &(&x + (&k1 * A31 + &k2 * A32) * h));
        let k4 = rhs(t + C4 * h, &(&x + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h));
        let k5 = rhs(t + C5 * h, &(&x + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h));
        let k6 = rhs(t + h, &(&x + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h));
        let x_new = &x + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
        let k7 = rhs(t + h, &x_new);
        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;

        let mut err = 0.0_f64;
        for i in 0..x.len() {
            let sc = tol.atol + tol.rtol * x[i].abs().max(x_new[i].abs());
            err = err.max(err_vec[i].abs() / sc);
        }

        if err <= 1.0 {
            t += h;
            x = x_new;
            k1 = k7;
            stats.accepted += 1;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok((x, stats))
}
