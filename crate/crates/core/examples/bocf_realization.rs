//! Builds the block observable canonical realization of an ARX model and
//! reconstructs its state from past data.
//!
//! ```text
//! cargo run --example bocf_realization
//! ```

use nalgebra::{DMatrix, DVector};

use icd_pcac::bocf::build_realization;
use icd_pcac::rls::ArxCoefficients;
use icd_pcac::{BocfModel, IoHistory, Nonlinearity};

fn main() -> icd_pcac::Result<()> {
    let coeffs = ArxCoefficients {
        f: vec![DMatrix::from_element(1, 1, -1.2), DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, -0.1)],
        g: vec![DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 0.4), DMatrix::from_element(1, 1, 0.0)],
    };
    let nl = Nonlinearity::Saturation { u_min: -1.0, u_max: 1.0 };
    let (a, b, c) = build_realization(&coeffs)?;
    println!("A = {a}B = {b}C = {c}");

    let inputs = [0.5, 2.0, -0.3, 1.5, 0.0, -2.0];
    let mut past = IoHistory::new(3, 1, 1);
    let mut eta = DVector::zeros(3);
    for (k, &u) in inputs.iter().enumerate() {
        let y = &c * &eta;
        let model = BocfModel::from_data(&coeffs, &y, &past, &nl)?;
        println!(
            "k={k} y={:+.4} eta simulated {:?} reconstructed {:?}",
            y[0],
            eta.as_slice(),
            model.eta.as_slice()
        );
        let u = DVector::from_element(1, u);
        eta = &a * &eta + &b * nl.evaluate(&u);
        past.push(y, u);
    }
    Ok(())
}
