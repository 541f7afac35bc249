//! Receding-horizon control with iterated control-dependent input coefficients.
//!
//! Each step predicts with the identified realization `(A, B)` but replaces
//! `B sigma(u)` by `B_j(u) u`, where `B_j(u) = B sigma(u) u' / |u|^2` is
//! evaluated at the previous iterate's control sequence. The resulting QP is
//! linear in the decision variables; it is re-solved until the control
//! sequence stops moving or the iteration budget is spent. Only the first
//! control of the final sequence is applied.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bocf::BocfModel;
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::qp::{self, QpProblem, QpSolution, QpStatus};
use crate::serde_mat;

/// Cost weight given as a scalar multiple of identity, a diagonal, or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl Weight {
    pub fn to_matrix(&self, dim: usize) -> Result<DMatrix<f64>> {
        let m = match self {
            Weight::Scalar(s) => DMatrix::identity(dim, dim) * *s,
            Weight::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Weight::Full(rows) => serde_mat::from_rows(rows).map_err(Error::Config)?,
        };
        if m.shape() != (dim, dim) {
            return Err(Error::Dimension(format!("weight is {:?}, expected ({dim}, {dim})", m.shape())));
        }
        Ok(m)
    }
}

/// Optional constraints over the stacked variable
/// `nu = [xi_1' .. xi_l' mu_1' .. mu_{l-1}']'`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StackedConstraints {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a_ineq: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b_ineq: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a_eq: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b_eq: Vec<f64>,
    /// Empty means unbounded; otherwise one entry per component of `nu`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lower: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub upper: Vec<f64>,
}

impl StackedConstraints {
    pub fn is_empty(&self) -> bool {
        self.b_ineq.is_empty() && self.b_eq.is_empty() && self.lower.is_empty() && self.upper.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// States and controls are both decision variables.
    Stacked,
    /// States eliminated through the prediction model; controls only.
    #[default]
    Condensed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    /// Horizon `l >= 2`; the QP optimizes `l - 1` future controls.
    pub horizon: usize,
    /// Iteration budget `rho >= 1` (iteration 1 is the initial guess).
    pub max_iterations: usize,
    /// Stopping tolerance on the Euclidean change of the control sequence.
    pub tolerance: f64,
    pub q: Weight,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_terminal: Option<Weight>,
    pub r: Weight,
    #[serde(default, skip_serializing_if = "StackedConstraints::is_empty")]
    pub constraints: StackedConstraints,
    #[serde(default)]
    pub formulation: Formulation,
    /// Control applied before the first computed one; empty means zero.
    #[serde(default)]
    pub u0: Vec<f64>,
    /// When false the plain input matrix is used and a single QP is solved.
    #[serde(default = "default_true")]
    pub icd: bool,
    #[serde(default = "default_qp_tol")]
    pub qp_tol: f64,
    /// Without constraints, solve each subproblem by a backward Riccati
    /// recursion instead of a dense QP. Both give the same minimizer.
    #[serde(default = "default_true")]
    pub riccati: bool,
}

fn default_true() -> bool {
    true
}

fn default_qp_tol() -> f64 {
    qp::DEFAULT_TOL
}

/// Validated numeric form of [`MpcConfig`] for a given realization size.
#[derive(Debug, Clone)]
pub struct MpcWeights {
    pub q: DMatrix<f64>,
    pub q_terminal: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl MpcConfig {
    pub fn weights(&self, state_dim: usize, input_dim: usize) -> Result<MpcWeights> {
        if self.horizon < 2 {
            return Err(Error::Config(format!("horizon must be >= 2, got {}", self.horizon)));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        let q = self.q.to_matrix(state_dim)?;
        let q_terminal = match &self.q_terminal {
            Some(w) => w.to_matrix(state_dim)?,
            None => q.clone(),
        };
        let r = self.r.to_matrix(input_dim)?;
        for (name, w) in [("Q", &q), ("Q_terminal", &q_terminal)] {
            let eig = w.clone().symmetric_eigen().eigenvalues;
            if eig.min() < -1e-12 * (1.0 + eig.amax()) || (w - w.transpose()).amax() > 1e-12 * (1.0 + w.amax()) {
                return Err(Error::Config(format!("{name} must be symmetric positive semidefinite")));
            }
        }
        if r.clone().cholesky().is_none() {
            return Err(Error::Config("R must be positive definite".into()));
        }
        Ok(MpcWeights { q, q_terminal, r })
    }

    pub fn initial_control(&self, m: usize) -> Result<DVector<f64>> {
        if self.u0.is_empty() {
            return Ok(DVector::zeros(m));
        }
        if self.u0.len() != m {
            return Err(Error::Dimension(format!("u0 has length {}, expected {m}", self.u0.len())));
        }
        Ok(DVector::from_column_slice(&self.u0))
    }

    /// Length of the stacked variable, `l (n + m) - m`.
    pub fn stacked_len(&self, state_dim: usize, input_dim: usize) -> usize {
        self.horizon * (state_dim + input_dim) - input_dim
    }
}

/// `B sigma(u) u' / |u|^2`, or `B` when `u = 0`.
pub fn icd_coefficient(b: &DMatrix<f64>, u: &DVector<f64>, nl: &Nonlinearity) -> DMatrix<f64> {
    let nsq = u.norm_squared();
    if nsq == 0.0 {
        return b.clone();
    }
    (b * nl.evaluate(u)) * u.transpose() / nsq
}

/// `A eta_k + B sigma(u_k)`: the first predicted state, fixed across iterations.
pub fn predict_initial_state(model: &BocfModel, u_k: &DVector<f64>, nl: &Nonlinearity) -> DVector<f64> {
    &model.a * &model.eta + &model.b * nl.evaluate(u_k)
}

/// A QP over either formulation together with what is needed to read the
/// controls back out of its minimizer.
#[derive(Debug, Clone)]
pub struct MpcQp {
    pub problem: QpProblem,
    pub formulation: Formulation,
    /// Cost terms independent of the decision variables (condensed only).
    pub constant: f64,
    state_dim: usize,
    input_dim: usize,
    horizon: usize,
}

impl MpcQp {
    /// The stacked control sequence `[mu_1' .. mu_{l-1}']'`.
    pub fn controls(&self, x: &DVector<f64>) -> DVector<f64> {
        let len = (self.horizon - 1) * self.input_dim;
        match self.formulation {
            Formulation::Condensed => x.clone(),
            Formulation::Stacked => x.rows(self.horizon * self.state_dim, len).into_owned(),
        }
    }

    /// Value of the MPC cost at the QP minimizer.
    pub fn cost(&self, solution: &QpSolution) -> f64 {
        solution.objective + self.constant
    }
}

fn stacked_constraints(
    c: &StackedConstraints,
    len: usize,
) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
    let mat = |rows: &[Vec<f64>], b: &[f64], what: &str| -> Result<(DMatrix<f64>, DVector<f64>)> {
        if rows.is_empty() && b.is_empty() {
            return Ok((DMatrix::zeros(0, len), DVector::zeros(0)));
        }
        let a = serde_mat::from_rows(rows).map_err(Error::Config)?;
        if a.ncols() != len || a.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "{what} is {}x{} with {} right-hand sides; nu has length {len}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        Ok((a, DVector::from_column_slice(b)))
    };
    let (a_ineq, b_ineq) = mat(&c.a_ineq, &c.b_ineq, "inequality matrix")?;
    let (a_eq, b_eq) = mat(&c.a_eq, &c.b_eq, "equality matrix")?;
    let bound = |v: &[f64], fill: f64, what: &str| -> Result<DVector<f64>> {
        if v.is_empty() {
            Ok(DVector::from_element(len, fill))
        } else if v.len() == len {
            Ok(DVector::from_column_slice(v))
        } else {
            Err(Error::Dimension(format!("{what} bound has length {}, nu has {len}", v.len())))
        }
    };
    let lb = bound(&c.lower, f64::NEG_INFINITY, "lower")?;
    let ub = bound(&c.upper, f64::INFINITY, "upper")?;
    Ok((a_ineq, b_ineq, a_eq, b_eq, lb, ub))
}

/// Assembles the QP for one ICD iteration. `stage_inputs[j]` multiplies
/// `mu_{j+1}` in the prediction model.
pub fn assemble_qp(
    model: &BocfModel,
    config: &MpcConfig,
    eta_k1: &DVector<f64>,
    stage_inputs: &[DMatrix<f64>],
) -> Result<MpcQp> {
    let n = model.state_dim();
    let m = model.input_dim();
    let l = config.horizon;
    let weights = config.weights(n, m)?;
    if stage_inputs.len() != l - 1 {
        return Err(Error::Dimension(format!(
            "{} stage input matrices supplied for horizon {l}",
            stage_inputs.len()
        )));
    }
    if stage_inputs.iter().any(|b| b.shape() != (n, m)) || eta_k1.len() != n {
        return Err(Error::Dimension("stage input matrix or initial state has wrong shape".into()));
    }
    match config.formulation {
        Formulation::Stacked => assemble_stacked(model, config, &weights, eta_k1, stage_inputs),
        Formulation::Condensed => assemble_condensed(model, config, &weights, eta_k1, stage_inputs),
    }
}

fn assemble_stacked(
    model: &BocfModel,
    config: &MpcConfig,
    w: &MpcWeights,
    eta_k1: &DVector<f64>,
    stage_inputs: &[DMatrix<f64>],
) -> Result<MpcQp> {
    let (n, m, l) = (model.state_dim(), model.input_dim(), config.horizon);
    let len = config.stacked_len(n, m);
    let mu0 = l * n;

    let mut h = DMatrix::zeros(len, len);
    for j in 0..l {
        let q = if j + 1 == l { &w.q_terminal } else { &w.q };
        h.view_mut((j * n, j * n), (n, n)).copy_from(q);
    }
    for j in 0..l - 1 {
        h.view_mut((mu0 + j * m, mu0 + j * m), (m, m)).copy_from(&w.r);
    }

    // xi_1 = eta_{k,1};  xi_{j+1} - A xi_j - B_j mu_j = 0
    let (a_user_ineq, b_user_ineq, a_user_eq, b_user_eq, lb, ub) = stacked_constraints(&config.constraints, len)?;
    let n_dyn = l * n;
    let n_eq = n_dyn + a_user_eq.nrows();
    let mut a_eq = DMatrix::zeros(n_eq, len);
    let mut b_eq = DVector::zeros(n_eq);
    a_eq.view_mut((0, 0), (n, n)).fill_with_identity();
    b_eq.rows_mut(0, n).copy_from(eta_k1);
    for j in 0..l - 1 {
        let row = (j + 1) * n;
        a_eq.view_mut((row, (j + 1) * n), (n, n)).fill_with_identity();
        a_eq.view_mut((row, j * n), (n, n)).copy_from(&(-&model.a));
        a_eq.view_mut((row, mu0 + j * m), (n, m)).copy_from(&(-&stage_inputs[j]));
    }
    if a_user_eq.nrows() > 0 {
        a_eq.view_mut((n_dyn, 0), (a_user_eq.nrows(), len)).copy_from(&a_user_eq);
        b_eq.rows_mut(n_dyn, b_user_eq.len()).copy_from(&b_user_eq);
    }

    let problem = QpProblem::new(h, DVector::zeros(len))
        .with_equalities(a_eq, b_eq)
        .with_inequalities(a_user_ineq, b_user_ineq)
        .with_bounds(lb, ub);
    Ok(MpcQp { problem, formulation: Formulation::Stacked, constant: 0.0, state_dim: n, input_dim: m, horizon: l })
}

fn assemble_condensed(
    model: &BocfModel,
    config: &MpcConfig,
    w: &MpcWeights,
    eta_k1: &DVector<f64>,
    stage_inputs: &[DMatrix<f64>],
) -> Result<MpcQp> {
    let (n, m, l) = (model.state_dim(), model.input_dim(), config.horizon);
    let a = &model.a;
    let at = a.transpose();
    let nu = (l - 1) * m;

    // free response xi_j (controls zero), j = 1..l
    let mut free = Vec::with_capacity(l);
    free.push(eta_k1.clone());
    for j in 1..l {
        free.push(a * &free[j - 1]);
    }
    let q_of = |j: usize| if j == l { &w.q_terminal } else { &w.q }; // 1-based state index

    // P_t = sum_{j=t+1}^{l} (A^{j-1-t})' Q_j A^{j-1-t}, t = 1..l-1
    let mut p = vec![DMatrix::zeros(n, n); l];
    p[l - 1] = w.q_terminal.clone();
    for t in (1..l - 1).rev() {
        p[t] = q_of(t + 1) + &at * &p[t + 1] * a;
    }
    // h_s = sum_{j=s+1}^{l} (A^{j-1-s})' Q_j xi_j^free
    let mut hvec = vec![DVector::zeros(n); l];
    hvec[l - 1] = &w.q_terminal * &free[l - 1];
    for s in (1..l - 1).rev() {
        hvec[s] = q_of(s + 1) * &free[s] + &at * &hvec[s + 1];
    }

    let mut h = DMatrix::zeros(nu, nu);
    let mut f = DVector::zeros(nu);
    let pb: Vec<DMatrix<f64>> = (1..l).map(|t| &p[t] * &stage_inputs[t - 1]).collect();
    for s in 1..l {
        let bs = &stage_inputs[s - 1];
        f.rows_mut((s - 1) * m, m).copy_from(&(bs.transpose() * &hvec[s]));
        // g = A^{t-s} B_s for t = s..l-1
        let mut g = bs.clone();
        for t in s..l {
            let block = g.transpose() * &pb[t - 1];
            h.view_mut(((s - 1) * m, (t - 1) * m), (m, m)).copy_from(&block);
            if t != s {
                h.view_mut(((t - 1) * m, (s - 1) * m), (m, m)).copy_from(&block.transpose());
            }
            if t + 1 < l {
                g = a * g;
            }
        }
        let mut diag = h.view(((s - 1) * m, (s - 1) * m), (m, m)).into_owned();
        diag += &w.r;
        h.view_mut(((s - 1) * m, (s - 1) * m), (m, m)).copy_from(&diag);
    }
    let constant = 0.5
        * (1..=l)
            .map(|j| free[j - 1].dot(&(q_of(j) * &free[j - 1])))
            .sum::<f64>();

    let mut problem = QpProblem::new(h, f);
    if !config.constraints.is_empty() {
        let len = config.stacked_len(n, m);
        let (a_in, b_in, a_eq, b_eq, lb, ub) = stacked_constraints(&config.constraints, len)?;
        // nu = T mu + nu0
        let mut t_map = DMatrix::zeros(len, nu);
        let mut nu0 = DVector::zeros(len);
        for j in 0..l {
            nu0.rows_mut(j * n, n).copy_from(&free[j]);
        }
        for s in 1..l {
            let mut g = stage_inputs[s - 1].clone();
            for j in (s + 1)..=l {
                t_map.view_mut(((j - 1) * n, (s - 1) * m), (n, m)).copy_from(&g);
                if j < l {
                    g = a * g;
                }
            }
        }
        t_map.view_mut((l * n, 0), (nu, nu)).fill_with_identity();

        let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
        for i in 0..a_in.nrows() {
            let ai = a_in.row(i);
            rows.push(((ai * &t_map).transpose(), b_in[i] - (ai * &nu0)[0]));
        }
        for s in 0..l * n {
            let ts = t_map.row(s).transpose();
            if ub[s].is_finite() {
                rows.push((ts.clone(), ub[s] - nu0[s]));
            }
            if lb[s].is_finite() {
                rows.push((-ts, nu0[s] - lb[s]));
            }
        }
        if !rows.is_empty() {
            let a_c = DMatrix::from_fn(rows.len(), nu, |i, j| rows[i].0[j]);
            let b_c = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
            problem = problem.with_inequalities(a_c, b_c);
        }
        if a_eq.nrows() > 0 {
            let b_c = &b_eq - &a_eq * &nu0;
            problem = problem.with_equalities(&a_eq * &t_map, b_c);
        }
        problem = problem.with_bounds(lb.rows(l * n, nu).into_owned(), ub.rows(l * n, nu).into_owned());
    }
    Ok(MpcQp { problem, formulation: Formulation::Condensed, constant, state_dim: n, input_dim: m, horizon: l })
}

/// Minimizer of an unconstrained subproblem computed by dynamic programming.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    /// Stacked controls `[mu_1' .. mu_{l-1}']'`.
    pub controls: DVector<f64>,
    /// Optimal MPC cost, `xi_1' P_1 xi_1 / 2`.
    pub cost: f64,
    /// Scaled infinity norm of the cost gradient at `controls`.
    pub kkt_residual: f64,
}

/// Solves the unconstrained subproblem with time-varying input matrices by
/// the backward recursion
/// `K_j = (R + B_j' P_{j+1} B_j)^{-1} B_j' P_{j+1} A`,
/// `P_j = Q + A' P_{j+1} (A - B_j K_j)`, `P_l = Q_l`,
/// then rolls `mu_j = -K_j xi_j` forward from `xi_1 = eta_k1`.
pub fn solve_riccati(
    model: &BocfModel,
    weights: &MpcWeights,
    eta_k1: &DVector<f64>,
    stage_inputs: &[DMatrix<f64>],
) -> Result<RiccatiSolution> {
    let a = &model.a;
    let at = a.transpose();
    let stages = stage_inputs.len();
    let mut p = weights.q_terminal.clone();
    let mut gains = vec![DMatrix::zeros(0, 0); stages];
    for j in (0..stages).rev() {
        let b = &stage_inputs[j];
        let pb = &p * b;
        let s = &weights.r + b.transpose() * &pb;
        let chol = s
            .cholesky()
            .ok_or_else(|| Error::Config("R + B' P B is not positive definite".into()))?;
        let k = chol.solve(&(pb.transpose() * a));
        let pa = &p * a;
        p = &weights.q + &at * (&pa - &pb * &k);
        p = (&p + p.transpose()) * 0.5;
        gains[j] = k;
    }
    let cost = 0.5 * eta_k1.dot(&(&p * eta_k1));

    let m = model.input_dim();
    let mut controls = DVector::zeros(stages * m);
    let mut xs = Vec::with_capacity(stages + 1);
    xs.push(eta_k1.clone());
    for j in 0..stages {
        let mu = -&gains[j] * &xs[j];
        xs.push(a * &xs[j] + &stage_inputs[j] * &mu);
        controls.rows_mut(j * m, m).copy_from(&mu);
    }

    // gradient via the costate: lambda_l = Q_l xi_l, lambda_j = Q xi_j + A' lambda_{j+1}
    let mut lambda = &weights.q_terminal * &xs[stages];
    let mut residual = 0.0_f64;
    let mut scale = 0.0_f64;
    for j in (0..stages).rev() {
        let mu = controls.rows(j * m, m);
        let ru = &weights.r * mu;
        let bl = stage_inputs[j].transpose() * &lambda;
        residual = residual.max((&ru + &bl).amax());
        scale = scale.max(ru.amax()).max(bl.amax());
        lambda = &weights.q * &xs[j] + &at * &lambda;
    }
    Ok(RiccatiSolution { controls, cost, kkt_residual: residual / (1.0 + scale) })
}

/// Result of one controller step.
#[derive(Debug, Clone)]
pub struct IcdPlan {
    /// `U_{k|i}` for `i = 1..=rho_k`.
    pub control_sequences: Vec<DVector<f64>>,
    /// Index of the last iteration performed.
    pub rho_k: usize,
    /// `u_{k+1}`: the first control of the final sequence.
    pub applied_control: DVector<f64>,
    /// `xi_1 .. xi_l` under the final sequence and its stage inputs.
    pub predicted_states: Vec<DVector<f64>>,
    /// Norm of the last sequence change (`NaN` if no QP was solved).
    pub final_change: f64,
    pub qp_solves: usize,
    pub qp_iterations: usize,
    /// MPC cost after each QP, in iteration order.
    pub objectives: Vec<f64>,
    pub max_kkt_residual: f64,
    /// True if any QP stopped without meeting the KKT tolerance.
    pub qp_not_optimal: bool,
    last_qp: Option<QpSolution>,
}

impl IcdPlan {
    pub fn final_sequence(&self) -> &DVector<f64> {
        self.control_sequences.last().expect("at least the initial sequence")
    }

    pub fn objective(&self) -> f64 {
        self.objectives.last().copied().unwrap_or(f64::NAN)
    }

    pub fn horizon_controls(&self, m: usize) -> Vec<DVector<f64>> {
        split_controls(self.final_sequence(), m)
    }
}

fn split_controls(seq: &DVector<f64>, m: usize) -> Vec<DVector<f64>> {
    (0..seq.len() / m).map(|j| seq.rows(j * m, m).into_owned()).collect()
}

fn stack_controls(parts: &[DVector<f64>]) -> DVector<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend(p.iter());
    }
    DVector::from_vec(out)
}

/// Iteration-1 sequence: `u_k` everywhere at the first step, otherwise the
/// previous final sequence shifted by one with its last entry repeated.
pub fn initial_sequence(u_k: &DVector<f64>, horizon: usize, warm: Option<&IcdPlan>) -> DVector<f64> {
    let m = u_k.len();
    let stages = horizon - 1;
    if let Some(prev) = warm {
        let prev_seq = prev.final_sequence();
        if prev_seq.len() == stages * m {
            let mut seq = DVector::zeros(stages * m);
            for j in 0..stages {
                let src = (j + 1).min(stages - 1);
                seq.rows_mut(j * m, m).copy_from(&prev_seq.rows(src * m, m));
            }
            return seq;
        }
    }
    stack_controls(&vec![u_k.clone(); stages])
}

/// Simulates `xi_{j+1} = A xi_j + B_j mu_j` from `xi_1`.
pub fn predict_states(
    model: &BocfModel,
    eta_k1: &DVector<f64>,
    stage_inputs: &[DMatrix<f64>],
    controls: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    let mut xs = Vec::with_capacity(controls.len() + 1);
    xs.push(eta_k1.clone());
    for (bj, uj) in stage_inputs.iter().zip(controls) {
        let next = &model.a * xs.last().unwrap() + bj * uj;
        xs.push(next);
    }
    xs
}

fn stage_inputs_for(model: &BocfModel, seq: &DVector<f64>, nl: &Nonlinearity, icd: bool) -> Vec<DMatrix<f64>> {
    split_controls(seq, model.input_dim())
        .iter()
        .map(|u| if icd { icd_coefficient(&model.b, u, nl) } else { model.b.clone() })
        .collect()
}

/// One controller step: ICD iterations with stopping test and warm start.
pub fn plan_step(
    model: &BocfModel,
    u_k: &DVector<f64>,
    config: &MpcConfig,
    warm: Option<&IcdPlan>,
    nl: &Nonlinearity,
) -> Result<IcdPlan> {
    let m = model.input_dim();
    if u_k.len() != m {
        return Err(Error::Dimension(format!("u_k has length {}, expected {m}", u_k.len())));
    }
    let eta_k1 = predict_initial_state(model, u_k, nl);
    let mut sequences = vec![initial_sequence(u_k, config.horizon, warm)];
    let mut objectives = Vec::new();
    let mut final_change = f64::NAN;
    let mut qp_solves = 0;
    let mut qp_iterations = 0;
    let mut max_kkt_residual = 0.0_f64;
    let mut qp_not_optimal = false;
    let mut last_qp: Option<QpSolution> = warm.and_then(|w| w.last_qp.clone());
    let mut stage_inputs = stage_inputs_for(model, &sequences[0], nl, config.icd);

    let weights = config.weights(model.state_dim(), m)?;
    let use_riccati = config.riccati && config.constraints.is_empty();

    for _i in 2..=config.max_iterations {
        let prev = sequences.last().unwrap();
        stage_inputs = stage_inputs_for(model, prev, nl, config.icd);
        if use_riccati {
            let sol = solve_riccati(model, &weights, &eta_k1, &stage_inputs)?;
            qp_solves += 1;
            max_kkt_residual = max_kkt_residual.max(sol.kkt_residual);
            qp_not_optimal |= !(sol.kkt_residual <= config.qp_tol);
            objectives.push(sol.cost);
            final_change = (&sol.controls - prev).norm();
            sequences.push(sol.controls);
            if final_change < config.tolerance || !config.icd {
                break;
            }
            continue;
        }
        let mpc_qp = assemble_qp(model, config, &eta_k1, &stage_inputs)?;
        let sol = qp::solve(&mpc_qp.problem, last_qp.as_ref(), config.qp_tol)?;
        qp_solves += 1;
        qp_iterations += sol.iterations;
        match sol.status {
            QpStatus::Infeasible => return Err(Error::Infeasible),
            QpStatus::MaxIterations => qp_not_optimal = true,
            QpStatus::Optimal => {}
        }
        max_kkt_residual = max_kkt_residual.max(sol.kkt_residual);
        objectives.push(mpc_qp.cost(&sol));
        let seq = mpc_qp.controls(&sol.x);
        final_change = (&seq - prev).norm();
        sequences.push(seq);
        last_qp = Some(sol);
        if final_change < config.tolerance || !config.icd {
            break;
        }
    }

    let final_seq = sequences.last().unwrap();
    let controls = split_controls(final_seq, m);
    let predicted_states = predict_states(model, &eta_k1, &stage_inputs, &controls);
    Ok(IcdPlan {
        rho_k: sequences.len(),
        applied_control: controls[0].clone(),
        control_sequences: sequences,
        predicted_states,
        final_change,
        qp_solves,
        qp_iterations,
        objectives,
        max_kkt_residual,
        qp_not_optimal,
        last_qp,
    })
}

/// Stateful wrapper that carries the warm start between steps.
#[derive(Debug, Clone)]
pub struct IcdController {
    config: MpcConfig,
    nl: Nonlinearity,
    previous: Option<IcdPlan>,
}

impl IcdController {
    pub fn new(config: MpcConfig, nl: Nonlinearity) -> Self {
        IcdController { config, nl, previous: None }
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    pub fn step(&mut self, model: &BocfModel, u_k: &DVector<f64>) -> Result<&IcdPlan> {
        let plan = plan_step(model, u_k, &self.config, self.previous.as_ref(), &self.nl)?;
        self.previous = Some(plan);
        Ok(self.previous.as_ref().unwrap())
    }

    pub fn previous(&self) -> Option<&IcdPlan> {
        self.previous.as_ref()
    }
}
