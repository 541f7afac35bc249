//! Deadzone-saturation input with a command and disturbance switch at 50 s.
//!
//! ```text
//! cargo run --release --example example4_deadzone -- [horizon]
//! ```

use icd_pcac::experiments::{ErrorStats, ExperimentConfig};
use icd_pcac::run_closed_loop;

fn main() -> icd_pcac::Result<()> {
    let mut cfg = ExperimentConfig::example4_deadzone();
    if let Some(h) = std::env::args().nth(1) {
        cfg.mpc.horizon = h.parse().expect("horizon must be an integer");
    }
    let trace = run_closed_loop(&cfg.plant, &cfg.identifier, &cfg.mpc, &cfg.nonlinearity)?;
    for r in trace.records.iter().step_by(100) {
        println!(
            "t = {:>5.1}  y - r = {:+.4e}  r = {:+.0}  u = {:+.3e}  sigma(u) = {:+.3}",
            r.t,
            r.y_true[0] - r.command[0],
            r.command[0],
            r.u[0],
            r.sigma_u[0]
        );
    }
    for (from, label) in [(40.0, "before the switch"), (90.0, "after the switch")] {
        let window: Vec<_> = trace.records.iter().filter(|r| r.t <= from + 10.0 + 1e-9).cloned().collect();
        let stats = ErrorStats::from_trace(&icd_pcac::SimTrace { records: window }, from);
        println!("{label}: mean |y - r| on [{from}, {}] s = {:.4e}", from + 10.0, stats.mean_abs);
    }
    Ok(())
}
