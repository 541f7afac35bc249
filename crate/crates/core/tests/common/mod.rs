//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's numerical routines: each oracle is
//! a separate, deliberately simple algorithm.

#![allow(dead_code)]

pub mod criteria;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use icd_pcac::QpProblem;

// ---------------------------------------------------------------------------
// QP: exhaustive active-set enumeration
// ---------------------------------------------------------------------------

/// Minimizer of a strictly convex QP found by trying every subset of
/// inequality rows (bounds included) as an equality set and keeping the
/// feasible face minimizer with the lowest objective.
pub fn qp_enumeration(problem: &QpProblem) -> Option<DVector<f64>> {
    let n = problem.dim();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..problem.b_ineq.len() {
        rows.push((problem.a_ineq.row(i).transpose(), problem.b_ineq[i]));
    }
    for i in 0..n {
        if problem.ub[i].is_finite() {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            rows.push((e, problem.ub[i]));
        }
        if problem.lb[i].is_finite() {
            let mut e = DVector::zeros(n);
            e[i] = -1.0;
            rows.push((e, -problem.lb[i]));
        }
    }
    let n_eq = problem.b_eq.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1u32 << rows.len()) {
        let active: Vec<usize> = (0..rows.len()).filter(|i| mask & (1 << i) != 0).collect();
        let k = n_eq + active.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&problem.h);
        rhs.rows_mut(0, n).copy_from(&(-&problem.f));
        for r in 0..n_eq {
            let a = problem.a_eq.row(r);
            kkt.view_mut((n + r, 0), (1, n)).copy_from(&a);
            kkt.view_mut((0, n + r), (n, 1)).copy_from(&a.transpose());
            rhs[n + r] = problem.b_eq[r];
        }
        for (j, &i) in active.iter().enumerate() {
            let (a, b) = &rows[i];
            kkt.view_mut((n + n_eq + j, 0), (1, n)).copy_from(&a.transpose());
            kkt.view_mut((0, n + n_eq + j), (n, 1)).copy_from(a);
            rhs[n + n_eq + j] = *b;
        }
        let svd = kkt.clone().svd(false, false);
        if svd.singular_values.min() < 1e-10 * svd.singular_values.max() {
            continue;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, n).into_owned();
        let feasible = rows.iter().all(|(a, b)| a.dot(&x) <= b + 1e-9 * (1.0 + b.abs()));
        if !feasible {
            continue;
        }
        let obj = problem.objective(&x);
        if best.as_ref().map_or(true, |(o, _)| obj < *o) {
            best = Some((obj, x));
        }
    }
    best.map(|(_, x)| x)
}

/// Random strictly convex QP with a known feasible point.
pub fn random_qp(rng: &mut ChaCha8Rng) -> QpProblem {
    let n = rng.gen_range(1..=10);
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = m.transpose() * &m + DMatrix::identity(n, n) * 0.1;
    let f = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));

    let n_ineq = rng.gen_range(0..=4);
    let a_ineq = DMatrix::from_fn(n_ineq, n, |_, _| rng.gen_range(-1.0..1.0));
    let b_ineq = &a_ineq * &x0 + DVector::from_fn(n_ineq, |_, _| rng.gen_range(0.0..0.5));

    let n_eq = rng.gen_range(0..=2.min(n - 1));
    let a_eq = DMatrix::from_fn(n_eq, n, |_, _| rng.gen_range(-1.0..1.0));
    let b_eq = &a_eq * &x0;

    let mut lb = DVector::from_element(n, f64::NEG_INFINITY);
    let mut ub = DVector::from_element(n, f64::INFINITY);
    for _ in 0..rng.gen_range(0..=2) {
        let i = rng.gen_range(0..n);
        lb[i] = x0[i] - rng.gen_range(0.0..1.0);
        ub[i] = x0[i] + rng.gen_range(0.0..1.0);
    }
    QpProblem::new(h, f)
        .with_inequalities(a_ineq, b_ineq)
        .with_equalities(a_eq, b_eq)
        .with_bounds(lb, ub)
}

// ---------------------------------------------------------------------------
// F distribution by quadrature
// ---------------------------------------------------------------------------

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Regularized incomplete beta `I_z(a, b)` by quadrature of the normalized
/// beta density.
///
/// For `a < 1` the density is unbounded at the origin, so `t = s^(1/a)` is
/// substituted, giving the bounded integrand `(1 - s^(1/a))^(b-1) / a`. For
/// `z > 1/2` the reflection `I_z(a, b) = 1 - I_{1-z}(b, a)` keeps the other
/// endpoint away.
pub fn incomplete_beta_quadrature(a: f64, b: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z >= 1.0 {
        return 1.0;
    }
    if z > 0.5 {
        return 1.0 - incomplete_beta_quadrature(b, a, 1.0 - z);
    }
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    if a < 1.0 {
        let integrand = |s: f64| ((b - 1.0) * (-s.powf(1.0 / a)).ln_1p() - ln_beta).exp() / a;
        return integrate(&integrand, 0.0, z.powf(a), 1e-14);
    }
    let density = |t: f64| {
        if t == 0.0 {
            return if a == 1.0 { (-ln_beta).exp() } else { 0.0 };
        }
        ((a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p() - ln_beta).exp()
    };
    integrate(&density, 0.0, z, 1e-14)
}

/// F(d1, d2) CDF by quadrature.
pub fn f_cdf_quadrature(d1: f64, d2: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let z = d1 * x / (d1 * x + d2);
    incomplete_beta_quadrature(d1 / 2.0, d2 / 2.0, z)
}

/// Closed-form F(1, 1) quantile: the CDF is `(2/pi) atan(sqrt(x))`.
pub fn f11_quantile(q: f64) -> f64 {
    (std::f64::consts::FRAC_PI_2 * q).tan().powi(2)
}

// ---------------------------------------------------------------------------
// Least squares and ARX data
// ---------------------------------------------------------------------------

/// Regularized batch least squares
/// `argmin sum |y_i - phi_i theta|^2 + (theta - theta0)' P0^{-1} (theta - theta0)`.
pub fn batch_least_squares(
    regressors: &[DMatrix<f64>],
    outputs: &[DVector<f64>],
    theta0: &DVector<f64>,
    psi0_scale: f64,
) -> DVector<f64> {
    let n = theta0.len();
    let mut normal = DMatrix::identity(n, n) / psi0_scale;
    let mut rhs = theta0 / psi0_scale;
    for (phi, y) in regressors.iter().zip(outputs) {
        normal += phi.transpose() * phi;
        rhs += phi.transpose() * y;
    }
    normal.cholesky().expect("normal equations positive definite").solve(&rhs)
}

/// Direct ARX recursion `y_k = -sum F_i y_{k-i} + sum G_i u_{k-i}` with zero
/// initial history, written with explicit sums over plain slices.
pub fn arx_simulate(f: &[DMatrix<f64>], g: &[DMatrix<f64>], inputs: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let p = f[0].nrows();
    let mut ys: Vec<DVector<f64>> = Vec::with_capacity(inputs.len());
    for k in 0..inputs.len() {
        let mut y = DVector::zeros(p);
        for i in 1..=f.len() {
            if k >= i {
                y -= &f[i - 1] * &ys[k - i];
                y += &g[i - 1] * &inputs[k - i];
            }
        }
        ys.push(y);
    }
    ys
}

/// Random ARX coefficients whose companion matrix has spectral radius below
/// `radius`, obtained by rejection.
pub fn stable_arx(
    rng: &mut ChaCha8Rng,
    n_hat: usize,
    p: usize,
    m: usize,
    radius: f64,
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    loop {
        let f: Vec<_> = (0..n_hat)
            .map(|_| DMatrix::from_fn(p, p, |_, _| rng.gen_range(-0.6..0.6)))
            .collect();
        let g: Vec<_> = (0..n_hat)
            .map(|_| DMatrix::from_fn(p, m, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let dim = n_hat * p;
        let mut a = DMatrix::zeros(dim, dim);
        for i in 0..n_hat {
            a.view_mut((i * p, 0), (p, p)).copy_from(&(-&f[i]));
            if i + 1 < n_hat {
                a.view_mut((i * p, (i + 1) * p), (p, p)).fill_with_identity();
            }
        }
        let rho = a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if rho < radius {
            return (f, g);
        }
    }
}

/// `vec[F_1 .. F_n G_1 .. G_n]`, column-major.
pub fn stack_theta(f: &[DMatrix<f64>], g: &[DMatrix<f64>]) -> DVector<f64> {
    let mut out = Vec::new();
    for blk in f.iter().chain(g) {
        out.extend(blk.iter());
    }
    DVector::from_vec(out)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    use rand_distr::{Distribution, StandardNormal};
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}
