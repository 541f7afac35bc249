//! Command following with a harmonic disturbance and sensor noise.
//!
//! ```text
//! cargo run --release --example example3_tracking -- [horizon]
//! ```

use icd_pcac::experiments::{ErrorStats, ExperimentConfig};
use icd_pcac::run_closed_loop;

fn main() -> icd_pcac::Result<()> {
    let horizon: usize = std::env::args().nth(1).map_or(50, |s| s.parse().expect("horizon must be an integer"));
    let mut cfg = ExperimentConfig::example3_track();
    cfg.mpc.horizon = horizon;
    let trace = run_closed_loop(&cfg.plant, &cfg.identifier, &cfg.mpc, &cfg.nonlinearity)?;
    for r in trace.records.iter().step_by(50) {
        println!(
            "t = {:>5.1}  y = {:+.4e}  r = {:+.1}  d = {:+.3}  sigma(u) = {:+.3}  beta = {:.3}",
            r.t, r.y_true[0], r.command[0], r.disturbance[0], r.sigma_u[0], r.rls.beta
        );
    }
    let stats = ErrorStats::from_trace(&trace, 50.0);
    println!("mean |y - r| on [50, 60] s = {:.4e}", stats.mean_abs);
    Ok(())
}
