//! Identifies a second-order ARX model from input/output data and shows how
//! the forgetting factor reacts when the output noise level jumps.
//!
//! ```text
//! cargo run --example rls_identification
//! ```

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use icd_pcac::rls::InitialTheta;
use icd_pcac::{IdentifierConfig, Nonlinearity, Rls};

fn main() -> icd_pcac::Result<()> {
    // y_k = 1.5 y_{k-1} - 0.7 y_{k-2} + 0.5 u_{k-1} + 0.2 u_{k-2} + v_k
    let (f, g) = ([-1.5, 0.7], [0.5, 0.2]);
    let config = IdentifierConfig {
        n_hat: 2,
        p: 1,
        m: 1,
        psi0_scale: 1e4,
        theta0: InitialTheta::Fill(0.0),
        tau_d: 80,
        tau_n: 10,
        alpha: 0.01,
        zeta: 1.0,
        forgetting: true,
    };
    let nl = Nonlinearity::Identity;
    let mut rls = Rls::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let input = Normal::new(0.0, 1.0).unwrap();
    let noise = Normal::new(0.0, 1.0).unwrap();

    let (mut y, mut u) = (vec![0.0; 2], vec![0.0; 2]);
    println!("{:>5} {:>10} {:>10} {:>8}", "k", "|e_k|", "beta", "g");
    for k in 0..400 {
        let level = if k < 300 { 1e-3 } else { 1e-1 };
        let yk = -f[0] * y[0] - f[1] * y[1] + g[0] * u[0] + g[1] * u[1] + level * noise.sample(&mut rng);
        let uk = input.sample(&mut rng);
        let diag = rls.update(&DVector::from_element(1, yk), &nl)?;
        if k % 50 == 0 || (diag.beta > 1.0 && k < 320) {
            println!("{k:>5} {:>10.3e} {:>10.4} {:>8.3}", diag.error_norm, diag.beta, diag.g);
        }
        rls.push(DVector::from_element(1, yk), DVector::from_element(1, uk));
        y = vec![yk, y[0]];
        u = vec![uk, u[0]];
    }
    let c = rls.coefficients();
    println!("F = [{:.4}, {:.4}]  (true {f:?})", c.f[0][(0, 0)], c.f[1][(0, 0)]);
    println!("G = [{:.4}, {:.4}]  (true {g:?})", c.g[0][(0, 0)], c.g[1][(0, 0)]);
    Ok(())
}
