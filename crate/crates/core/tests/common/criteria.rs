//! One check per acceptance criterion. Each returns whether it passed and a
//! short description of the measured quantities.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use icd_pcac::bocf::{build_realization, reconstruct_state};
use icd_pcac::experiments::ErrorStats;
use icd_pcac::mpc::{plan_step, Weight};
use icd_pcac::qp::{self, QpStatus};
use icd_pcac::rls::{
    build_regressor, f_inverse_cdf, forgetting_parameter, forgetting_statistic, ArxCoefficients, InitialTheta,
};
use icd_pcac::sim::doa_sweep;
use icd_pcac::{
    run_closed_loop, BocfModel, ExperimentConfig, IdentifierConfig, IoHistory, MpcConfig, Nonlinearity, Rls,
    SimTrace,
};

use super::*;

/// Bound on `|y|` (Example 1) and on the mean tracking error (Examples 3
/// and 4) over the final 10 s.
pub const TERMINAL_BOUND: f64 = 0.5;

pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into() }
    }
}

fn identifier(n_hat: usize, p: usize, m: usize, psi0_scale: f64, forgetting: bool) -> IdentifierConfig {
    IdentifierConfig {
        n_hat,
        p,
        m,
        psi0_scale,
        theta0: InitialTheta::Fill(0.0),
        tau_d: 80,
        tau_n: 10,
        alpha: 0.01,
        zeta: 1.0,
        forgetting,
    }
}

/// Feeds an ARX data set to the identifier and also returns every regressor
/// and output it saw.
fn identify(
    config: IdentifierConfig,
    inputs: &[DVector<f64>],
    outputs: &[DVector<f64>],
) -> (Rls, Vec<DMatrix<f64>>, Vec<DVector<f64>>) {
    let nl = Nonlinearity::Identity;
    let mut rls = Rls::new(config).unwrap();
    let mut phis = Vec::new();
    let mut ys = Vec::new();
    for (u, y) in inputs.iter().zip(outputs) {
        phis.push(rls.regressor(&nl));
        ys.push(y.clone());
        rls.update(y, &nl).unwrap();
        rls.push(y.clone(), u.clone());
    }
    (rls, phis, ys)
}

pub fn rls_exactness() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_exact = 0.0_f64;
    let mut worst_batch = 0.0_f64;
    for &(n_hat, p, m) in &[(2, 1, 1), (3, 1, 1), (2, 2, 1), (2, 1, 2)] {
        let (f, g) = stable_arx(&mut rng, n_hat, p, m, 0.9);
        let inputs: Vec<_> = (0..200).map(|_| gaussian_vec(&mut rng, m)).collect();
        let outputs = arx_simulate(&f, &g, &inputs);
        let truth = stack_theta(&f, &g);

        let (rls, _, _) = identify(identifier(n_hat, p, m, 1e8, true), &inputs, &outputs);
        worst_exact = worst_exact.max((&rls.state().theta - &truth).amax());

        let noisy: Vec<_> = outputs.iter().map(|y| y + gaussian_vec(&mut rng, p) * 0.1).collect();
        let (rls, phis, ys) = identify(identifier(n_hat, p, m, 10.0, false), &inputs, &noisy);
        let batch = batch_least_squares(&phis, &ys, &DVector::zeros(truth.len()), 10.0);
        let rel = (&rls.state().theta - &batch).amax() / (1.0 + batch.amax());
        worst_batch = worst_batch.max(rel);
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        worst_exact < 1e-6 && worst_batch < 1e-8 && secs < 1.0,
        format!("coefficient error {worst_exact:.2e}, recursive vs batch {worst_batch:.2e}, {secs:.3} s"),
    )
}

pub fn f_quantile() -> Outcome {
    let started = Instant::now();
    let mut worst_closed = 0.0_f64;
    for q in [0.5, 0.9, 0.99] {
        let x = f_inverse_cdf(1.0, 1.0, q).unwrap();
        let exact = f11_quantile(q);
        worst_closed = worst_closed.max((x - exact).abs() / exact.max(1.0));
    }
    let grid = [
        (1.0, 1.0, 0.3),
        (1.0, 5.0, 0.9),
        (2.0, 2.0, 0.5),
        (2.0, 7.0, 0.95),
        (3.0, 12.0, 0.99),
        (4.0, 4.0, 0.1),
        (5.0, 2.0, 0.75),
        (5.0, 30.0, 0.999),
        (7.0, 3.0, 0.6),
        (8.0, 80.0, 0.99),
        (10.0, 80.0, 0.99),
        (10.0, 80.0, 0.5),
        (10.0, 10.0, 0.05),
        (12.0, 1.0, 0.9),
        (15.0, 25.0, 0.2),
        (20.0, 40.0, 0.95),
        (30.0, 5.0, 0.99),
        (40.0, 100.0, 0.01),
        (3.0, 50.0, 0.999),
        (6.0, 9.5, 0.8),
    ];
    let mut worst_trip = 0.0_f64;
    for &(d1, d2, q) in &grid {
        let x = f_inverse_cdf(d1, d2, q).unwrap();
        worst_trip = worst_trip.max((f_cdf_quadrature(d1, d2, x) - q).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        worst_closed < 1e-8 && worst_trip < 1e-8 && secs < 1.0,
        format!("closed form {worst_closed:.2e}, quadrature round trip {worst_trip:.2e}, {secs:.3} s"),
    )
}

/// Long window of unit-variance errors whose newest `tau_n + 1` entries have
/// `scale` times the standard deviation.
pub fn error_window(rng: &mut ChaCha8Rng, config: &IdentifierConfig, scale: f64) -> Vec<DVector<f64>> {
    let len = config.tau_d + 1;
    (0..len)
        .map(|i| {
            let s = if i >= len - (config.tau_n + 1) { scale } else { 1.0 };
            gaussian_vec(rng, config.p) * s
        })
        .collect()
}

pub fn forgetting_trigger() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut details = Vec::new();
    let mut passed = true;
    for p in [1, 2] {
        let config = identifier(1, p, 1, 1.0, true);
        let mut triggered = 0;
        let trials = 200;
        for _ in 0..trials {
            let g = forgetting_statistic(&error_window(&mut rng, &config, 10.0), &config).unwrap();
            if g > 0.0 && forgetting_parameter(g, config.zeta) > 1.0 {
                triggered += 1;
            }
        }
        let mut quiet = 0;
        for _ in 0..trials {
            let g = forgetting_statistic(&error_window(&mut rng, &config, 1.0), &config).unwrap();
            if forgetting_parameter(g, config.zeta) == 1.0 {
                quiet += 1;
            }
        }
        let quiet_frac = quiet as f64 / trials as f64;
        passed &= triggered == trials && quiet_frac >= 0.95;
        details.push(format!("p={p}: jump triggers {triggered}/{trials}, stationary beta=1 in {:.1}%", 100.0 * quiet_frac));
    }
    Outcome::new(passed, details.join("; "))
}

/// Frozen-coefficient realization driven from rest against the direct recursion.
pub fn bocf_max_deviation(rng: &mut ChaCha8Rng, n_hat: usize, p: usize, m: usize, nl: &Nonlinearity) -> f64 {
    let (f, g) = stable_arx(rng, n_hat, p, m, 0.95);
    let coeffs = ArxCoefficients { f: f.clone(), g: g.clone() };
    let (a, b, c) = build_realization(&coeffs).unwrap();
    let inputs: Vec<_> = (0..100).map(|_| gaussian_vec(rng, m) * 2.0).collect();
    let effective: Vec<_> = inputs.iter().map(|u| nl.evaluate(u)).collect();
    let direct = arx_simulate(&f, &g, &effective);

    let mut eta = DVector::zeros(n_hat * p);
    let mut past = IoHistory::new(n_hat, p, m);
    let mut worst = 0.0_f64;
    for (k, u) in inputs.iter().enumerate() {
        let y = &c * &eta;
        worst = worst.max((&y - &direct[k]).amax());
        let rebuilt = reconstruct_state(&coeffs, &y, &past, nl).unwrap();
        worst = worst.max((&rebuilt - &eta).amax());
        eta = &a * &eta + &b * nl.evaluate(u);
        past.push(y, u.clone());
    }
    worst
}

pub fn bocf_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let nl = Nonlinearity::Saturation { u_min: -1.5, u_max: 1.0 };
    let mut parts = Vec::new();
    let mut worst = 0.0_f64;
    for &(p, m, n_hat) in &[(1, 1, 3), (2, 1, 2), (1, 2, 4)] {
        let dev = bocf_max_deviation(&mut rng, n_hat, p, m, &nl);
        worst = worst.max(dev);
        parts.push(format!("({p},{m},{n_hat}) {dev:.1e}"));
    }
    Outcome::new(worst <= 1e-12, format!("max deviation {}", parts.join(", ")))
}

pub fn qp_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_x = 0.0_f64;
    let mut worst_kkt = 0.0_f64;
    let mut not_optimal = 0;
    for _ in 0..100 {
        let problem = random_qp(&mut rng);
        let oracle = qp_enumeration(&problem).expect("feasible by construction");
        let sol = qp::solve(&problem, None, qp::DEFAULT_TOL).unwrap();
        if sol.status != QpStatus::Optimal {
            not_optimal += 1;
            continue;
        }
        worst_x = worst_x.max((&sol.x - &oracle).amax() / (1.0 + oracle.amax()));
        worst_kkt = worst_kkt.max(sol.kkt_residual);
    }
    Outcome::new(
        not_optimal == 0 && worst_x <= 1e-8 && worst_kkt <= 1e-8,
        format!("100 problems, max solution error {worst_x:.2e}, max KKT residual {worst_kkt:.2e}, non-optimal {not_optimal}"),
    )
}

/// Runs an adaptive loop on a discrete ARX plant with identity input map,
/// comparing every ICD step against a single QP on the same model.
pub fn icd_identity_case(riccati: bool) -> (usize, f64) {
    let nl = Nonlinearity::Identity;
    let plant_f = [DMatrix::from_element(1, 1, -1.6), DMatrix::from_element(1, 1, 0.8)];
    let plant_g = [DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 0.3)];
    let icd = MpcConfig {
        horizon: 15,
        max_iterations: 30,
        tolerance: 1e-3,
        q: Weight::Diagonal(vec![10.0, 0.0]),
        q_terminal: None,
        r: Weight::Scalar(1.0),
        constraints: Default::default(),
        formulation: Default::default(),
        u0: vec![0.0],
        icd: true,
        qp_tol: qp::DEFAULT_TOL,
        riccati,
    };
    let single = MpcConfig { icd: false, ..icd.clone() };
    let mut config = identifier(2, 1, 1, 1e4, true);
    config.theta0 = InitialTheta::Fill(0.1);
    let mut rls = Rls::new(config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);

    let mut ys: Vec<f64> = vec![5.0];
    let mut us: Vec<f64> = Vec::new();
    let mut u = DVector::from_element(1, 0.0);
    let mut warm = None;
    let mut max_rho = 0;
    let mut worst = 0.0_f64;
    for k in 0..150 {
        let y = DVector::from_element(1, ys[k]);
        rls.update(&y, &nl).unwrap();
        let model = BocfModel::from_data(&rls.coefficients(), &y, &rls.state().history, &nl).unwrap();
        let plan = plan_step(&model, &u, &icd, warm.as_ref(), &nl).unwrap();
        let reference = plan_step(&model, &u, &single, None, &nl).unwrap();
        max_rho = max_rho.max(plan.rho_k);
        let scale = 1.0 + reference.applied_control.amax();
        worst = worst.max((&plan.applied_control - &reference.applied_control).amax() / scale);

        us.push(u[0] + 0.01 * rng.gen_range(-1.0..1.0));
        let mut next = 0.0;
        for i in 0..2 {
            if k >= i {
                next += -plant_f[i][(0, 0)] * ys[k - i] + plant_g[i][(0, 0)] * us[k - i];
            }
        }
        ys.push(next);
        rls.push(y, DVector::from_element(1, us[k]));
        u = plan.applied_control.clone();
        warm = Some(plan);
    }
    (max_rho, worst)
}

pub fn icd_degenerate() -> Outcome {
    let (rho_qp, dev_qp) = icd_identity_case(false);
    let (rho_ric, dev_ric) = icd_identity_case(true);
    Outcome::new(
        rho_qp <= 3 && rho_ric <= 3 && dev_qp <= 1e-8 && dev_ric <= 1e-8,
        format!("dense QP: max rho {rho_qp}, deviation {dev_qp:.1e}; Riccati: max rho {rho_ric}, deviation {dev_ric:.1e}"),
    )
}

pub fn run_preset(config: &ExperimentConfig) -> SimTrace {
    run_closed_loop(&config.plant, &config.identifier, &config.mpc, &config.nonlinearity).unwrap()
}

pub fn trace_csv(trace: &SimTrace) -> Vec<u8> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    buf
}

pub struct Example1Runs {
    pub short: SimTrace,
    pub short_secs: f64,
    pub full: SimTrace,
    pub no_icd: SimTrace,
}

pub fn example1_runs() -> Example1Runs {
    let mut short_cfg = ExperimentConfig::example1_sat();
    short_cfg.mpc.horizon = 50;
    let started = Instant::now();
    let short = run_preset(&short_cfg);
    let short_secs = started.elapsed().as_secs_f64();
    let full = run_preset(&ExperimentConfig::example1_sat());
    let no_icd = run_preset(&ExperimentConfig::example1_sat_no_icd());
    Example1Runs { short, short_secs, full, no_icd }
}

pub fn example1(runs: &Example1Runs) -> Outcome {
    let short = ErrorStats::from_trace(&runs.short, 50.0);
    let full = ErrorStats::from_trace(&runs.full, 50.0);
    let no_icd = ErrorStats::from_trace(&runs.no_icd, 50.0);
    let failures = [&runs.short, &runs.full]
        .iter()
        .flat_map(|t| &t.records)
        .filter(|r| r.failed)
        .count();
    Outcome::new(
        short.max_abs < TERMINAL_BOUND
            && full.max_abs < TERMINAL_BOUND
            && no_icd.max_abs >= TERMINAL_BOUND
            && runs.short.len() == 601
            && failures == 0
            && runs.short_secs < 120.0,
        format!(
            "max |y| on [50, 60] s: l=50 {:.3e} ({:.1} s), l=200 {:.3e}, without ICD {:.3e}; bound {TERMINAL_BOUND}",
            short.max_abs, runs.short_secs, full.max_abs, no_icd.max_abs
        ),
    )
}

pub fn example3() -> Outcome {
    let mut cfg = ExperimentConfig::example3_track();
    cfg.mpc.horizon = 50;
    let stats = ErrorStats::from_trace(&run_preset(&cfg), 50.0);
    Outcome::new(
        stats.mean_abs < TERMINAL_BOUND,
        format!("mean |y - r| on [50, 60] s {:.3e}; bound {TERMINAL_BOUND}", stats.mean_abs),
    )
}

pub fn example4() -> Outcome {
    let cfg = ExperimentConfig::example4_deadzone();
    let stats = ErrorStats::from_trace(&run_preset(&cfg), 90.0);
    Outcome::new(
        stats.mean_abs < TERMINAL_BOUND,
        format!("mean |y - r| on [90, 100] s {:.3e}; bound {TERMINAL_BOUND}", stats.mean_abs),
    )
}

pub fn doa_monotonicity() -> Outcome {
    let cfg = ExperimentConfig::example5_doa();
    let doa = cfg.doa.clone().unwrap().with_grid(5, -10.0, 10.0);
    let map = doa_sweep(&cfg.plant, &cfg.identifier, &cfg.mpc, &cfg.nonlinearity, &doa, 0).unwrap();
    let counts: Vec<usize> = (0..map.horizons.len()).map(|h| map.converged_count(h)).collect();
    let monotone = counts.windows(2).all(|w| w[0] <= w[1]);
    let listing: Vec<String> = map.horizons.iter().zip(&counts).map(|(l, c)| format!("l={l}: {c}/25")).collect();
    Outcome::new(monotone, format!("converged {}", listing.join(", ")))
}

pub fn determinism(first: &SimTrace) -> Outcome {
    let second = run_preset(&ExperimentConfig::example1_sat());
    let (a, b) = (trace_csv(first), trace_csv(&second));
    Outcome::new(a == b, format!("example1_sat trace CSVs of {} bytes, identical: {}", a.len(), a == b))
}

/// Sanity check that the regressor layout is the one the oracles assume.
pub fn regressor_layout_matches(p: usize, m: usize, n_hat: usize) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut past = IoHistory::new(n_hat, p, m);
    for _ in 0..n_hat {
        past.push(gaussian_vec(&mut rng, p), gaussian_vec(&mut rng, m));
    }
    let (f, g) = stable_arx(&mut rng, n_hat, p, m, 0.9);
    let phi = build_regressor(&past, n_hat, &Nonlinearity::Identity).unwrap();
    let mut direct = DVector::zeros(p);
    for i in 0..n_hat {
        direct += -&f[i] * past.y(i + 1) + &g[i] * past.u(i + 1);
    }
    (phi * stack_theta(&f, &g) - direct).amax() < 1e-12
}
