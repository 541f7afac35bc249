//! F-distribution quantiles through the regularized incomplete beta function.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// CDF of the F(d1, d2) distribution.
pub fn f_cdf(d1: f64, d2: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    inc_beta(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2))
}

/// Solves `I_z(a, b) = target` for `z` in `(0, 0.5]`, assuming `I_{0.5}(a, b) >= target`.
fn solve_lower(a: f64, b: f64, target: f64) -> Result<f64> {
    let lb = ln_beta(a, b);
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    let mut z = 0.25;
    for _ in 0..500 {
        let val = inc_beta(a, b, z) - target;
        if val == 0.0 {
            return Ok(z);
        }
        if val < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let dens = ((a - 1.0) * z.ln() + (b - 1.0) * (1.0 - z).ln() - lb).exp();
        let mut next = z - val / dens;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 1e-15 * z.abs() || hi - lo <= 1e-16 * hi {
            return Ok(next);
        }
        z = next;
    }
    Err(Error::NoConvergence(format!(
        "incomplete beta inverse a={a} b={b} target={target}"
    )))
}

/// Quantile of the F(d1, d2) distribution at probability `q`.
pub fn f_inverse_cdf(d1: f64, d2: f64, q: f64) -> Result<f64> {
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(Error::Config(format!("degrees of freedom must be positive, got {d1}, {d2}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Config(format!("probability must lie in (0, 1), got {q}")));
    }
    let (a, b) = (0.5 * d1, 0.5 * d2);
    if q <= inc_beta(a, b, 0.5) {
        let z = solve_lower(a, b, q)?;
        Ok(d2 * z / (d1 * (1.0 - z)))
    } else {
        // solve on the complement so 1 - z keeps full precision
        let w = solve_lower(b, a, 1.0 - q)?;
        Ok(d2 * (1.0 - w) / (d1 * w))
    }
}
