//! Recursive least squares with variable-rate forgetting.
//!
//! The identified model is the ARX predictor
//!
//! ```text
//! y_hat_k = -sum_i F_i y_{k-i} + sum_i G_i sigma(u_{k-i}),   i = 1..n_hat
//! ```
//!
//! with the coefficients stacked column-major into `theta = vec[F_1 .. F_n G_1 .. G_n]`.
//! Forgetting is switched on only when the short-window prediction-error
//! variance is significantly larger than the long-window one, judged against
//! an F-distribution quantile.

mod fdist;

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use fdist::{f_cdf, f_inverse_cdf, inc_beta, ln_gamma};

use crate::error::{Error, Result};
use crate::history::IoHistory;
use crate::nonlinearity::Nonlinearity;

/// Below this long-window variance the forgetting statistic is forced to zero.
const DEGENERATE_VARIANCE: f64 = 1e-12;
/// Condition-number cutoff for the long-window covariance (p > 1).
const DEGENERATE_CONDITION: f64 = 1e12;
const COVARIANCE_RIDGE: f64 = 1e-10;

/// Initial coefficient estimate: either every entry equal, or an explicit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialTheta {
    Fill(f64),
    Vector(Vec<f64>),
}

impl Default for InitialTheta {
    fn default() -> Self {
        InitialTheta::Fill(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifierConfig {
    /// Model order.
    pub n_hat: usize,
    /// Output dimension.
    pub p: usize,
    /// Input dimension.
    pub m: usize,
    /// `Psi_0 = psi0_scale * I`.
    pub psi0_scale: f64,
    pub theta0: InitialTheta,
    /// Long window length.
    pub tau_d: usize,
    /// Short window length.
    pub tau_n: usize,
    /// Significance level.
    pub alpha: f64,
    /// Forgetting gain.
    pub zeta: f64,
    /// When false, `beta_k = 1` for every step (classical RLS).
    #[serde(default = "default_true")]
    pub forgetting: bool,
}

fn default_true() -> bool {
    true
}

impl IdentifierConfig {
    /// Length of `theta`, `n_hat * p * (m + p)`.
    pub fn theta_len(&self) -> usize {
        self.n_hat * self.p * (self.m + self.p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_hat == 0 || self.p == 0 || self.m == 0 {
            return bad("n_hat, p and m must be positive".into());
        }
        if !(self.psi0_scale > 0.0) {
            return bad(format!("psi0_scale must be positive, got {}", self.psi0_scale));
        }
        if let InitialTheta::Vector(v) = &self.theta0 {
            if v.len() != self.theta_len() {
                return bad(format!(
                    "theta0 has length {}, expected n_hat*p*(m+p) = {}",
                    v.len(),
                    self.theta_len()
                ));
            }
        }
        if self.tau_d <= self.p {
            return bad(format!("tau_d = {} must exceed p = {}", self.tau_d, self.p));
        }
        if self.tau_n < self.p || self.tau_n >= self.tau_d {
            return bad(format!("tau_n = {} must lie in [p, tau_d)", self.tau_n));
        }
        if self.p > 1 && self.tau_d <= self.p + 3 {
            return bad(format!("p > 1 requires tau_d > p + 3, got tau_d = {}", self.tau_d));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.zeta > 0.0) {
            return bad(format!("zeta must be positive, got {}", self.zeta));
        }
        Ok(())
    }

    fn initial_theta(&self) -> DVector<f64> {
        match &self.theta0 {
            InitialTheta::Fill(v) => DVector::from_element(self.theta_len(), *v),
            InitialTheta::Vector(v) => DVector::from_column_slice(v),
        }
    }

    /// `sqrt` of the F quantile the short/long ratio is compared against.
    pub fn forgetting_threshold(&self) -> Result<f64> {
        if self.alpha >= 1.0 {
            // quantile at probability 0
            return Ok(0.0);
        }
        let q = 1.0 - self.alpha;
        let quantile = if self.p == 1 {
            f_inverse_cdf(self.tau_n as f64, self.tau_d as f64, q)?
        } else {
            let (_, b, _) = multivariate_constants(self.p, self.tau_n, self.tau_d);
            f_inverse_cdf((self.p * self.tau_n) as f64, b, q)?
        };
        Ok(quantile.sqrt())
    }
}

/// The `(a, b, c)` constants of the multi-output statistic.
pub fn multivariate_constants(p: usize, tau_n: usize, tau_d: usize) -> (f64, f64, f64) {
    let (p, tn, td) = (p as f64, tau_n as f64, tau_d as f64);
    let a = (tn + td - p - 1.0) * (td - 1.0) / ((td - p - 3.0) * (td - p));
    let b = 4.0 + (p * tn + 2.0) / (a - 1.0);
    let c = p * tn * (b - 2.0) / (b * (td - p - 1.0));
    (a, b, c)
}

/// ARX coefficient blocks `F_1..F_n` (p x p) and `G_1..G_n` (p x m).
#[derive(Debug, Clone, PartialEq)]
pub struct ArxCoefficients {
    pub f: Vec<DMatrix<f64>>,
    pub g: Vec<DMatrix<f64>>,
}

impl ArxCoefficients {
    pub fn n_hat(&self) -> usize {
        self.f.len()
    }

    pub fn output_dim(&self) -> usize {
        self.f.first().map_or(0, |f| f.nrows())
    }

    pub fn input_dim(&self) -> usize {
        self.g.first().map_or(0, |g| g.ncols())
    }

    /// Un-vectorizes `theta` (column-major `[F_1 .. F_n G_1 .. G_n]`).
    pub fn from_theta(theta: &DVector<f64>, n_hat: usize, p: usize, m: usize) -> Result<Self> {
        let expected = n_hat * p * (m + p);
        if theta.len() != expected {
            return Err(Error::Dimension(format!(
                "theta has length {}, expected {expected}",
                theta.len()
            )));
        }
        let wide = DMatrix::from_column_slice(p, n_hat * (p + m), theta.as_slice());
        let f = (0..n_hat).map(|i| wide.columns(i * p, p).into_owned()).collect();
        let g = (0..n_hat)
            .map(|i| wide.columns(n_hat * p + i * m, m).into_owned())
            .collect();
        Ok(ArxCoefficients { f, g })
    }

    pub fn to_theta(&self) -> DVector<f64> {
        let (n, p, m) = (self.n_hat(), self.output_dim(), self.input_dim());
        let mut wide = DMatrix::zeros(p, n * (p + m));
        for (i, f) in self.f.iter().enumerate() {
            wide.columns_mut(i * p, p).copy_from(f);
        }
        for (i, g) in self.g.iter().enumerate() {
            wide.columns_mut(n * p + i * m, m).copy_from(g);
        }
        DVector::from_column_slice(wide.as_slice())
    }

    /// One-step ARX prediction in summation form.
    pub fn predict(&self, past: &IoHistory, nl: &Nonlinearity) -> DVector<f64> {
        let mut y = DVector::zeros(self.output_dim());
        for i in 0..self.n_hat() {
            y -= &self.f[i] * past.y(i + 1);
            y += &self.g[i] * nl.evaluate(&past.u(i + 1));
        }
        y
    }
}

/// `phi_k = [-y_{k-1}' .. -y_{k-n}' sigma(u_{k-1})' .. sigma(u_{k-n})'] (x) I_p`.
pub fn build_regressor(past: &IoHistory, n_hat: usize, nl: &Nonlinearity) -> Result<DMatrix<f64>> {
    if past.depth() < n_hat {
        return Err(Error::Dimension(format!(
            "history depth {} shorter than model order {n_hat}",
            past.depth()
        )));
    }
    let (p, m) = (past.output_dim(), past.input_dim());
    let mut row = Vec::with_capacity(n_hat * (p + m));
    for lag in 1..=n_hat {
        row.extend(past.y(lag).iter().map(|v| -v));
    }
    for lag in 1..=n_hat {
        row.extend(nl.evaluate(&past.u(lag)).iter());
    }
    let mut phi = DMatrix::zeros(p, row.len() * p);
    for (c, z) in row.iter().enumerate() {
        for r in 0..p {
            phi[(r, c * p + r)] = *z;
        }
    }
    Ok(phi)
}

fn window_mean(window: &[DVector<f64>]) -> DVector<f64> {
    let mut mean = DVector::zeros(window[0].len());
    for e in window {
        mean += e;
    }
    mean / window.len() as f64
}

/// Population covariance of a window (mean removed, divisor = length).
pub fn window_covariance(window: &[DVector<f64>]) -> DMatrix<f64> {
    let mean = window_mean(window);
    let p = mean.len();
    let mut cov = DMatrix::zeros(p, p);
    for e in window {
        let d = e - &mean;
        cov += &d * d.transpose();
    }
    cov / window.len() as f64
}

/// Forgetting statistic `g` from the newest `tau_d + 1` errors, given the
/// precomputed `sqrt` of the F quantile.
pub fn forgetting_statistic_with(
    window: &[DVector<f64>],
    tau_n: usize,
    tau_d: usize,
    threshold: f64,
) -> Result<f64> {
    if window.len() < tau_d + 1 {
        return Err(Error::Dimension(format!(
            "error window holds {} entries, need tau_d + 1 = {}",
            window.len(),
            tau_d + 1
        )));
    }
    let long = &window[window.len() - (tau_d + 1)..];
    let short = &window[window.len() - (tau_n + 1)..];
    let p = long[0].len();
    let cov_d = window_covariance(long);
    let cov_n = window_covariance(short);
    if p == 1 {
        let var_d = cov_d[(0, 0)];
        if var_d < DEGENERATE_VARIANCE {
            return Ok(0.0);
        }
        return Ok((cov_n[(0, 0)] / var_d).sqrt() - threshold);
    }
    let eig = cov_d.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if hi < DEGENERATE_VARIANCE || lo <= 0.0 || hi / lo > DEGENERATE_CONDITION {
        return Ok(0.0);
    }
    let chol = match cov_d.clone().cholesky() {
        Some(c) => c,
        None => (cov_d + DMatrix::identity(p, p) * COVARIANCE_RIDGE)
            .cholesky()
            .ok_or_else(|| Error::Dimension("long-window covariance not factorizable".into()))?,
    };
    // tr(S_n S_d^{-1}) = tr(S_d^{-1} S_n)
    let trace = chol.solve(&cov_n).trace();
    let (_, _, c) = multivariate_constants(p, tau_n, tau_d);
    let ratio = (tau_n as f64 / (c * tau_d as f64)) * trace;
    Ok(ratio.max(0.0).sqrt() - threshold)
}

/// Forgetting statistic `g` for the configured windows and significance level.
pub fn forgetting_statistic(window: &[DVector<f64>], config: &IdentifierConfig) -> Result<f64> {
    let threshold = config.forgetting_threshold()?;
    forgetting_statistic_with(window, config.tau_n, config.tau_d, threshold)
}

/// `beta = 1 + zeta * g * 1(g)`.
pub fn forgetting_parameter(g: f64, zeta: f64) -> f64 {
    if g >= 0.0 {
        1.0 + zeta * g
    } else {
        1.0
    }
}

/// Mutable identifier state.
#[derive(Debug, Clone)]
pub struct IdentifierState {
    pub theta: DVector<f64>,
    pub psi: DMatrix<f64>,
    /// Past outputs and controls feeding the regressor.
    pub history: IoHistory,
    /// Newest identification errors, at most `tau_d + 1` of them.
    pub error_window: VecDeque<DVector<f64>>,
    pub beta: f64,
    /// Number of completed updates.
    pub step: usize,
}

/// Per-update diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RlsDiagnostics {
    pub k: usize,
    pub beta: f64,
    /// `NaN` before the long window is full.
    pub g: f64,
    pub error_norm: f64,
    pub psi_trace: f64,
    /// False if the covariance failed a Cholesky check after the update.
    pub psi_positive_definite: bool,
}

/// Recursive least squares identifier with variable-rate forgetting.
#[derive(Debug, Clone)]
pub struct Rls {
    config: IdentifierConfig,
    threshold: f64,
    state: IdentifierState,
}

impl Rls {
    pub fn new(config: IdentifierConfig) -> Result<Self> {
        config.validate()?;
        let n = config.theta_len();
        let threshold = config.forgetting_threshold()?;
        let state = IdentifierState {
            theta: config.initial_theta(),
            psi: DMatrix::identity(n, n) * config.psi0_scale,
            history: IoHistory::new(config.n_hat, config.p, config.m),
            error_window: VecDeque::with_capacity(config.tau_d + 2),
            beta: 1.0,
            step: 0,
        };
        Ok(Rls { config, threshold, state })
    }

    pub fn config(&self) -> &IdentifierConfig {
        &self.config
    }

    pub fn state(&self) -> &IdentifierState {
        &self.state
    }

    /// The cached `sqrt(F^{-1}(1 - alpha))`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn regressor(&self, nl: &Nonlinearity) -> DMatrix<f64> {
        build_regressor(&self.state.history, self.config.n_hat, nl)
            .expect("history depth equals n_hat by construction")
    }

    pub fn coefficients(&self) -> ArxCoefficients {
        ArxCoefficients::from_theta(&self.state.theta, self.config.n_hat, self.config.p, self.config.m)
            .expect("theta length fixed by construction")
    }

    /// Processes measurement `y_k` against the regressor built from the
    /// current history and returns the diagnostics of this step. The history
    /// itself is not advanced; call [`Rls::push`] afterwards.
    pub fn update(&mut self, y: &DVector<f64>, nl: &Nonlinearity) -> Result<RlsDiagnostics> {
        if y.len() != self.config.p {
            return Err(Error::Dimension(format!(
                "measurement has length {}, expected {}",
                y.len(),
                self.config.p
            )));
        }
        let phi = self.regressor(nl);
        let k = self.state.step;
        let error = y - &phi * &self.state.theta;
        let st = &mut self.state;
        st.error_window.push_back(error.clone());
        while st.error_window.len() > self.config.tau_d + 1 {
            st.error_window.pop_front();
        }

        let mut g = f64::NAN;
        let mut beta = 1.0;
        if k >= self.config.tau_d {
            let window: Vec<_> = st.error_window.iter().cloned().collect();
            g = forgetting_statistic_with(&window, self.config.tau_n, self.config.tau_d, self.threshold)?;
            if self.config.forgetting {
                beta = forgetting_parameter(g, self.config.zeta);
            }
        }

        let p = self.config.p;
        let psi_phit = &st.psi * phi.transpose();
        let mut s = &phi * &psi_phit;
        for i in 0..p {
            s[(i, i)] += 1.0 / beta;
        }
        let s_chol = s
            .cholesky()
            .ok_or_else(|| Error::Dimension("innovation matrix not positive definite".into()))?;
        let gain = s_chol.solve(&psi_phit.transpose()); // S^{-1} phi Psi
        let mut psi = (&st.psi - &psi_phit * gain) * beta;
        psi = (&psi + psi.transpose()) * 0.5;
        let theta = &st.theta + &psi * phi.transpose() * &error;

        let psi_positive_definite = psi.clone().cholesky().is_some();
        st.psi = psi;
        st.theta = theta;
        st.beta = beta;
        st.step += 1;

        Ok(RlsDiagnostics {
            k,
            beta,
            g,
            error_norm: error.norm(),
            psi_trace: st.psi.trace(),
            psi_positive_definite,
        })
    }

    /// Advances the regressor history with `(y_k, u_k)`.
    pub fn push(&mut self, y: DVector<f64>, u: DVector<f64>) {
        self.state.history.push(y, u);
    }
}
