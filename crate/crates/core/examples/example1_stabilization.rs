//! Adaptive stabilization of the nonminimum-phase triple integrator under
//! input saturation, with and without control-dependent coefficients.
//!
//! ```text
//! cargo run --release --example example1_stabilization -- [horizon] [trace.csv]
//! ```

use icd_pcac::experiments::{ErrorStats, ExperimentConfig};
use icd_pcac::{run_closed_loop, SimTrace};

fn report(label: &str, trace: &SimTrace) {
    let stats = ErrorStats::from_trace(trace, 50.0);
    let mean_rho = trace.records.iter().map(|r| r.rho_k as f64).sum::<f64>() / trace.len() as f64;
    println!("{label:<12} max |y| on [50, 60] s = {:.4e}, mean rho_k = {mean_rho:.1}", stats.max_abs);
    for r in trace.records.iter().step_by(100) {
        println!("    t = {:>5.1}  y = {:+.4e}  sigma(u) = {:+.3}", r.t, r.y_true[0], r.sigma_u[0]);
    }
}

fn main() -> icd_pcac::Result<()> {
    let mut args = std::env::args().skip(1);
    let horizon: usize = args.next().map_or(200, |s| s.parse().expect("horizon must be an integer"));
    let csv = args.next();

    let mut cfg = ExperimentConfig::example1_sat();
    cfg.mpc.horizon = horizon;
    let trace = run_closed_loop(&cfg.plant, &cfg.identifier, &cfg.mpc, &cfg.nonlinearity)?;
    report("with ICD", &trace);

    cfg.mpc.icd = false;
    let plain = run_closed_loop(&cfg.plant, &cfg.identifier, &cfg.mpc, &cfg.nonlinearity)?;
    report("without ICD", &plain);

    if let Some(path) = csv {
        trace.save_csv(path.as_ref())?;
        println!("trace written to {path}");
    }
    Ok(())
}
