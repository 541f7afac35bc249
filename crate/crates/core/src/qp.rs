//! Dense convex quadratic programming.
//!
//! ```text
//! minimize    1/2 x' H x + f' x
//! subject to  A_ineq x <= b_ineq
//!             A_eq x    = b_eq
//!             lb <= x <= ub
//! ```
//!
//! Equalities are eliminated through an orthonormal null-space basis. The
//! reduced problem is solved with the Goldfarb-Idnani dual active-set method,
//! which needs no feasible starting point and reports infeasibility directly.
//! A previous solution's active set can be passed as a warm start: it is tried
//! first and accepted when it satisfies the optimality conditions.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl QpProblem {
    /// Unconstrained problem; the Hessian is symmetrized.
    pub fn new(h: DMatrix<f64>, f: DVector<f64>) -> Self {
        let n = f.len();
        let h = (&h + h.transpose()) * 0.5;
        QpProblem {
            h,
            f,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            lb: DVector::from_element(n, f64::NEG_INFINITY),
            ub: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_ineq = a;
        self.b_ineq = b;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_bounds(mut self, lb: DVector<f64>, ub: DVector<f64>) -> Self {
        self.lb = lb;
        self.ub = ub;
        self
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let dim_err = |what: &str| Err(Error::Dimension(format!("QP {what} inconsistent with n = {n}")));
        if self.h.shape() != (n, n) {
            return dim_err("Hessian");
        }
        if self.a_ineq.ncols() != n || self.a_ineq.nrows() != self.b_ineq.len() {
            return dim_err("inequality system");
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return dim_err("equality system");
        }
        if self.lb.len() != n || self.ub.len() != n {
            return dim_err("bounds");
        }
        if self.lb.iter().zip(self.ub.iter()).any(|(l, u)| l > u) {
            return Err(Error::Config("lower bound exceeds upper bound".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.f.dot(x)
    }

    /// Largest scaled constraint violation at `x`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst = 0.0_f64;
        if !self.b_ineq.is_empty() {
            let ax = &self.a_ineq * x;
            for i in 0..ax.len() {
                worst = worst.max((ax[i] - self.b_ineq[i]) / (1.0 + self.b_ineq[i].abs()));
            }
        }
        if !self.b_eq.is_empty() {
            let r = &self.a_eq * x - &self.b_eq;
            worst = worst.max(r.amax() / (1.0 + self.b_eq.amax()));
        }
        for i in 0..x.len() {
            if self.lb[i].is_finite() {
                worst = worst.max((self.lb[i] - x[i]) / (1.0 + self.lb[i].abs()));
            }
            if self.ub[i].is_finite() {
                worst = worst.max((x[i] - self.ub[i]) / (1.0 + self.ub[i].abs()));
            }
        }
        worst
    }

    /// Plain-text dump for offline cross-checking: one `name rows cols`
    /// header per block followed by row-major values.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut block = |name: &str, m: &DMatrix<f64>| -> std::io::Result<()> {
            writeln!(out, "{name} {} {}", m.nrows(), m.ncols())?;
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
                writeln!(out, "{}", row.join(" "))?;
            }
            Ok(())
        };
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        block("H", &self.h)?;
        block("f", &col(&self.f))?;
        block("A_ineq", &self.a_ineq)?;
        block("b_ineq", &col(&self.b_ineq))?;
        block("A_eq", &self.a_eq)?;
        block("b_eq", &col(&self.b_eq))?;
        block("lb", &col(&self.lb))?;
        block("ub", &col(&self.ub))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Which constraint a row of the reduced problem came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintId {
    Inequality(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub status: QpStatus,
    pub iterations: usize,
    /// Active inequality/bound constraints at the solution.
    pub active: Vec<ConstraintId>,
    pub lambda_ineq: DVector<f64>,
    pub lambda_lower: DVector<f64>,
    pub lambda_upper: DVector<f64>,
    pub mu_eq: DVector<f64>,
    /// True when a ridge had to be added to the reduced Hessian.
    pub regularized: bool,
}

struct Row {
    normal: DVector<f64>,
    rhs: f64,
    id: ConstraintId,
}

struct Reduced {
    x_p: DVector<f64>,
    z: Option<DMatrix<f64>>,
    g: DMatrix<f64>,
    c: DVector<f64>,
    rows: Vec<Row>,
}

fn null_space_reduction(problem: &QpProblem, tol: f64) -> Result<Reduced> {
    let n = problem.dim();
    let n_eq = problem.b_eq.len();
    let (x_p, z) = if n_eq == 0 {
        (DVector::zeros(n), None)
    } else {
        let svd = problem.a_eq.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let cutoff = smax.max(1.0) * 1e-12 * n.max(n_eq) as f64;
        let x_p = svd
            .solve(&problem.b_eq, cutoff)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        let resid = (&problem.a_eq * &x_p - &problem.b_eq).amax();
        if resid > 100.0 * tol * (1.0 + problem.b_eq.amax()) {
            return Err(Error::Infeasible);
        }
        // full left singular basis of A_eq' (square-padded)
        let mut at = DMatrix::zeros(n, n.max(n_eq));
        at.view_mut((0, 0), (n, n_eq)).copy_from(&problem.a_eq.transpose());
        let svd_t = at.svd(true, false);
        let u = svd_t.u.expect("requested");
        let null_cols: Vec<usize> = (0..n)
            .filter(|&i| i >= svd_t.singular_values.len() || svd_t.singular_values[i] <= cutoff)
            .collect();
        let mut z = DMatrix::zeros(n, null_cols.len());
        for (j, &i) in null_cols.iter().enumerate() {
            z.set_column(j, &u.column(i));
        }
        (x_p, Some(z))
    };

    let grad_p = &problem.h * &x_p + &problem.f;
    let (g, c) = match &z {
        None => (problem.h.clone(), grad_p.clone()),
        Some(z) => (z.transpose() * &problem.h * z, z.transpose() * &grad_p),
    };
    let project = |a: DVector<f64>| match &z {
        None => a,
        Some(z) => z.transpose() * a,
    };

    let mut rows = Vec::new();
    for i in 0..problem.b_ineq.len() {
        let a = problem.a_ineq.row(i).transpose();
        let rhs = problem.b_ineq[i] - a.dot(&x_p);
        rows.push(Row { normal: project(a), rhs, id: ConstraintId::Inequality(i) });
    }
    for i in 0..n {
        if problem.lb[i].is_finite() {
            let mut e = DVector::zeros(n);
            e[i] = -1.0;
            rows.push(Row { normal: project(e), rhs: x_p[i] - problem.lb[i], id: ConstraintId::Lower(i) });
        }
        if problem.ub[i].is_finite() {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            rows.push(Row { normal: project(e), rhs: problem.ub[i] - x_p[i], id: ConstraintId::Upper(i) });
        }
    }
    Ok(Reduced { x_p, z, g, c, rows })
}

fn factor_hessian(g: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, bool)> {
    let sym = (g + g.transpose()) * 0.5;
    if let Some(ch) = sym.clone().cholesky() {
        return Ok((ch, false));
    }
    let n = sym.nrows();
    let scale = 1.0 + sym.amax() * n as f64;
    let mut ridge = 1e-9 * scale;
    for _ in 0..4 {
        if let Some(ch) = (&sym + DMatrix::identity(n, n) * ridge).cholesky() {
            return Ok((ch, true));
        }
        ridge *= 100.0;
    }
    Err(Error::Config("QP Hessian is not positive semidefinite".into()))
}

/// Dual active-set iteration on the reduced problem.
struct DualActiveSet<'a> {
    chol: &'a Cholesky<f64, Dyn>,
    c: &'a DVector<f64>,
    rows: &'a [Row],
    tol: f64,
}

enum DualOutcome {
    Optimal { w: DVector<f64>, active: Vec<usize>, u: Vec<f64>, iterations: usize },
    Infeasible { w: DVector<f64>, iterations: usize },
    MaxIterations { w: DVector<f64>, active: Vec<usize>, u: Vec<f64>, iterations: usize },
}

impl DualActiveSet<'_> {
    fn normals(&self, active: &[usize]) -> DMatrix<f64> {
        let n = self.c.len();
        let mut na = DMatrix::zeros(n, active.len());
        for (j, &i) in active.iter().enumerate() {
            na.set_column(j, &self.rows[i].normal);
        }
        na
    }

    fn feasibility_tol(&self, i: usize) -> f64 {
        self.tol * (1.0 + self.rows[i].rhs.abs())
    }

    /// Minimizer with the rows in `active` held as equalities.
    fn equality_solve(&self, active: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
        let ginv_c = self.chol.solve(self.c);
        if active.is_empty() {
            return Some((-ginv_c, DVector::zeros(0)));
        }
        let na = self.normals(active);
        let ginv_na = self.chol.solve(&na);
        let k = na.transpose() * &ginv_na;
        let d = DVector::from_iterator(active.len(), active.iter().map(|&i| self.rows[i].rhs));
        let rhs = -(d + na.transpose() * &ginv_c);
        let u = k.lu().solve(&rhs)?;
        if u.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let w = -(ginv_c + ginv_na * &u);
        Some((w, u))
    }

    fn try_warm(&self, guess: &[usize]) -> Option<(DVector<f64>, Vec<f64>)> {
        let (w, u) = self.equality_solve(guess)?;
        let dual_ok = u.iter().all(|&v| v >= -self.tol);
        let primal_ok = self
            .rows
            .iter()
            .enumerate()
            .all(|(i, r)| r.normal.dot(&w) - r.rhs <= self.feasibility_tol(i));
        (dual_ok && primal_ok).then(|| (w, u.iter().map(|v| v.max(0.0)).collect()))
    }

    fn run(&self, max_iter: usize) -> DualOutcome {
        let mut w = -self.chol.solve(self.c);
        let mut active: Vec<usize> = Vec::new();
        let mut u: Vec<f64> = Vec::new();
        let mut iterations = 0;
        let eps = 1e-14;

        loop {
            // most violated inactive row
            let mut pick = None;
            let mut worst = 0.0;
            for (i, r) in self.rows.iter().enumerate() {
                if active.contains(&i) {
                    continue;
                }
                let viol = r.normal.dot(&w) - r.rhs;
                if viol > self.feasibility_tol(i) && viol / (1.0 + r.rhs.abs()) > worst {
                    worst = viol / (1.0 + r.rhs.abs());
                    pick = Some(i);
                }
            }
            let Some(p) = pick else {
                return DualOutcome::Optimal { w, active, u, iterations };
            };
            let np = &self.rows[p].normal;
            let mut up = 0.0;

            loop {
                iterations += 1;
                if iterations > max_iter {
                    return DualOutcome::MaxIterations { w, active, u, iterations };
                }
                let ginv_np = self.chol.solve(np);
                let (z, r) = if active.is_empty() {
                    (ginv_np.clone(), DVector::zeros(0))
                } else {
                    let na = self.normals(&active);
                    let ginv_na = self.chol.solve(&na);
                    let k = na.transpose() * &ginv_na;
                    let r = k
                        .lu()
                        .solve(&(na.transpose() * &ginv_np))
                        .unwrap_or_else(|| DVector::zeros(active.len()));
                    (&ginv_np - ginv_na * &r, r)
                };

                let mut t1 = f64::INFINITY;
                let mut drop = None;
                for j in 0..active.len() {
                    if r[j] > eps && u[j] / r[j] < t1 {
                        t1 = u[j] / r[j];
                        drop = Some(j);
                    }
                }
                let zn = np.dot(&z);
                let viol = np.dot(&w) - self.rows[p].rhs;
                let t2 = if zn > eps * (1.0 + np.norm_squared()) { viol.max(0.0) / zn } else { f64::INFINITY };

                if t1.is_infinite() && t2.is_infinite() {
                    return DualOutcome::Infeasible { w, iterations };
                }
                if t2.is_infinite() {
                    for j in 0..active.len() {
                        u[j] -= t1 * r[j];
                    }
                    up += t1;
                    let j = drop.expect("finite t1 has an index");
                    active.remove(j);
                    u.remove(j);
                    continue;
                }
                let t = t1.min(t2);
                w -= &z * t;
                for j in 0..active.len() {
                    u[j] -= t * r[j];
                }
                up += t;
                if t2 <= t1 {
                    active.push(p);
                    u.push(up);
                    break;
                }
                let j = drop.expect("finite t1 has an index");
                active.remove(j);
                u.remove(j);
            }
        }
    }
}

/// Solves `problem`. `warm` seeds the active set from an earlier solution of
/// a similar problem.
pub fn solve(problem: &QpProblem, warm: Option<&QpSolution>, tol: f64) -> Result<QpSolution> {
    problem.validate()?;
    let n = problem.dim();
    let reduced = match null_space_reduction(problem, tol) {
        Ok(r) => r,
        Err(Error::Infeasible) => return Ok(infeasible_solution(problem, DVector::zeros(n), 0)),
        Err(e) => return Err(e),
    };
    let nz = reduced.c.len();
    if nz == 0 {
        let x = reduced.x_p.clone();
        return Ok(finish(problem, &reduced, x, &[], &[], 0, false, tol));
    }
    let (chol, regularized) = factor_hessian(&reduced.g)?;
    let solver = DualActiveSet { chol: &chol, c: &reduced.c, rows: &reduced.rows, tol };
    let lift = |w: &DVector<f64>| match &reduced.z {
        None => w.clone(),
        Some(z) => &reduced.x_p + z * w,
    };

    if let Some(prev) = warm {
        let guess: Vec<usize> = prev
            .active
            .iter()
            .filter_map(|id| reduced.rows.iter().position(|r| r.id == *id))
            .collect();
        if let Some((w, u)) = solver.try_warm(&guess) {
            let x = lift(&w);
            return Ok(finish(problem, &reduced, x, &guess, &u, 0, regularized, tol));
        }
    }

    let max_iter = 50 * n.max(1);
    match solver.run(max_iter) {
        DualOutcome::Optimal { w, active, u, iterations } => {
            // polish on the final active set
            let (w, u) = match solver.equality_solve(&active) {
                Some((wp, up)) if up.iter().all(|v| *v >= -tol) => (wp, up.iter().map(|v| v.max(0.0)).collect()),
                _ => (w, u),
            };
            let x = lift(&w);
            Ok(finish(problem, &reduced, x, &active, &u, iterations, regularized, tol))
        }
        DualOutcome::Infeasible { w, iterations } => Ok(infeasible_solution(problem, lift(&w), iterations)),
        DualOutcome::MaxIterations { w, active, u, iterations } => {
            let x = lift(&w);
            let mut sol = finish(problem, &reduced, x, &active, &u, iterations, regularized, tol);
            sol.status = QpStatus::MaxIterations;
            Ok(sol)
        }
    }
}

fn infeasible_solution(problem: &QpProblem, x: DVector<f64>, iterations: usize) -> QpSolution {
    let n = problem.dim();
    QpSolution {
        objective: problem.objective(&x),
        x,
        kkt_residual: f64::INFINITY,
        status: QpStatus::Infeasible,
        iterations,
        active: Vec::new(),
        lambda_ineq: DVector::zeros(problem.b_ineq.len()),
        lambda_lower: DVector::zeros(n),
        lambda_upper: DVector::zeros(n),
        mu_eq: DVector::zeros(problem.b_eq.len()),
        regularized: false,
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &QpProblem,
    reduced: &Reduced,
    x: DVector<f64>,
    active: &[usize],
    u: &[f64],
    iterations: usize,
    regularized: bool,
    tol: f64,
) -> QpSolution {
    let n = problem.dim();
    let mut lambda_ineq = DVector::zeros(problem.b_ineq.len());
    let mut lambda_lower = DVector::zeros(n);
    let mut lambda_upper = DVector::zeros(n);
    let mut ids = Vec::with_capacity(active.len());
    for (&i, &mult) in active.iter().zip(u) {
        let id = reduced.rows[i].id;
        ids.push(id);
        match id {
            ConstraintId::Inequality(j) => lambda_ineq[j] += mult,
            ConstraintId::Lower(j) => lambda_lower[j] += mult,
            ConstraintId::Upper(j) => lambda_upper[j] += mult,
        }
    }
    let hx = &problem.h * &x;
    let mut grad = &hx + &problem.f + problem.a_ineq.transpose() * &lambda_ineq + &lambda_upper - &lambda_lower;
    let mu_eq = if !problem.b_eq.is_empty() {
        let at = problem.a_eq.transpose();
        let mu = at
            .clone()
            .svd(true, true)
            .solve(&(-&grad), 1e-12 * (1.0 + at.amax()))
            .unwrap_or_else(|_| DVector::zeros(problem.b_eq.len()));
        grad += at * &mu;
        mu
    } else {
        DVector::zeros(0)
    };

    let h_norm = problem.h.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let scale = 1.0 + (h_norm * x.amax()).max(problem.f.amax());
    let stationarity = grad.amax() / scale;
    let primal = problem.max_violation(&x).max(0.0);
    let mut complementarity = 0.0_f64;
    let mut dual = 0.0_f64;
    if !problem.b_ineq.is_empty() {
        let slack = &problem.b_ineq - &problem.a_ineq * &x;
        for i in 0..slack.len() {
            complementarity = complementarity.max((lambda_ineq[i] * slack[i]).abs() / scale);
            dual = dual.max(-lambda_ineq[i] / scale);
        }
    }
    for i in 0..n {
        if problem.lb[i].is_finite() {
            complementarity = complementarity.max((lambda_lower[i] * (x[i] - problem.lb[i])).abs() / scale);
        }
        if problem.ub[i].is_finite() {
            complementarity = complementarity.max((lambda_upper[i] * (problem.ub[i] - x[i])).abs() / scale);
        }
        dual = dual.max(-lambda_lower[i] / scale).max(-lambda_upper[i] / scale);
    }
    let kkt_residual = stationarity.max(primal).max(complementarity).max(dual);
    let status = if kkt_residual <= tol {
        QpStatus::Optimal
    } else {
        QpStatus::MaxIterations
    };
    QpSolution {
        objective: problem.objective(&x),
        x,
        kkt_residual,
        status,
        iterations,
        active: ids,
        lambda_ineq,
        lambda_lower,
        lambda_upper,
        mu_eq,
        regularized,
    }
}
