//! One controller step on a fixed model with input saturation: prints the
//! iterated control sequences until they stop moving.
//!
//! ```text
//! cargo run --example icd_step
//! ```

use nalgebra::{DMatrix, DVector};

use icd_pcac::mpc::{plan_step, Weight};
use icd_pcac::{BocfModel, MpcConfig, Nonlinearity};

fn main() -> icd_pcac::Result<()> {
    let model = BocfModel {
        a: DMatrix::from_row_slice(2, 2, &[1.6, 1.0, -0.8, 0.0]),
        b: DMatrix::from_column_slice(2, 1, &[0.5, 0.3]),
        c: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        eta: DVector::from_column_slice(&[2.0, -0.6]),
    };
    let nl = Nonlinearity::Saturation { u_min: -1.0, u_max: 1.0 };
    for icd in [true, false] {
        let config = MpcConfig {
            horizon: 20,
            max_iterations: 30,
            tolerance: 1e-6,
            q: Weight::Diagonal(vec![10.0, 0.0]),
            q_terminal: None,
            r: Weight::Scalar(10.0),
            constraints: Default::default(),
            formulation: Default::default(),
            u0: vec![0.0],
            icd,
            qp_tol: 1e-8,
            riccati: true,
        };
        let plan = plan_step(&model, &DVector::zeros(1), &config, None, &nl)?;
        println!("icd = {icd}: rho_k = {}, final change {:.2e}", plan.rho_k, plan.final_change);
        for (i, seq) in plan.control_sequences.iter().enumerate() {
            let head: Vec<String> = seq.iter().take(5).map(|u| format!("{u:+.4}")).collect();
            println!("  U_{} = [{} ...]", i + 1, head.join(", "));
        }
        println!("  applied u_(k+1) = {:+.4}, sigma = {:+.4}", plan.applied_control[0], nl.apply(plan.applied_control[0]));
    }
    Ok(())
}
