//! Evaluates the F-distribution quantile used as the forgetting threshold
//! for a few window configurations.
//!
//! ```text
//! cargo run --example f_quantile
//! ```

use icd_pcac::rls::{f_cdf, f_inverse_cdf, InitialTheta};
use icd_pcac::IdentifierConfig;

fn main() -> icd_pcac::Result<()> {
    println!("{:>6} {:>6} {:>7} {:>12} {:>12}", "d1", "d2", "q", "quantile", "cdf check");
    for &(d1, d2, q) in &[(1.0, 1.0, 0.5), (1.0, 1.0, 0.99), (10.0, 80.0, 0.99), (5.0, 40.0, 0.95), (20.0, 60.0, 0.999)] {
        let x = f_inverse_cdf(d1, d2, q)?;
        println!("{d1:>6} {d2:>6} {q:>7} {x:>12.6} {:>12.3e}", f_cdf(d1, d2, x) - q);
    }

    for (p, tau_n, tau_d) in [(1, 10, 80), (2, 10, 80), (3, 20, 200)] {
        let cfg = IdentifierConfig {
            n_hat: 1,
            p,
            m: 1,
            psi0_scale: 1.0,
            theta0: InitialTheta::Fill(0.0),
            tau_d,
            tau_n,
            alpha: 0.01,
            zeta: 1.0,
            forgetting: true,
        };
        println!("p={p} tau_n={tau_n} tau_d={tau_d}: sqrt threshold {:.6}", cfg.forgetting_threshold()?);
    }
    Ok(())
}
