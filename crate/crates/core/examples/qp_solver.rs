//! Solves a small QP with an inequality, an equality and bounds, and prints
//! the active set and multipliers.
//!
//! ```text
//! cargo run --example qp_solver
//! ```

use nalgebra::{DMatrix, DVector};

use icd_pcac::qp::{self, DEFAULT_TOL};
use icd_pcac::QpProblem;

fn main() -> icd_pcac::Result<()> {
    let h = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
    let f = DVector::from_column_slice(&[-8.0, -3.0, -3.0]);
    let problem = QpProblem::new(h, f)
        .with_inequalities(DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]), DVector::from_element(1, 2.0))
        .with_equalities(DMatrix::from_row_slice(1, 3, &[1.0, -1.0, 0.0]), DVector::from_element(1, 0.5))
        .with_bounds(DVector::from_element(3, -1.0), DVector::from_element(3, 1.0));

    let sol = qp::solve(&problem, None, DEFAULT_TOL)?;
    println!("status      {:?}", sol.status);
    println!("x           {:?}", sol.x.as_slice());
    println!("objective   {:.6}", sol.objective);
    println!("active      {:?}", sol.active);
    println!("lambda_ineq {:?}", sol.lambda_ineq.as_slice());
    println!("mu_eq       {:?}", sol.mu_eq.as_slice());
    println!("kkt         {:.2e} after {} iterations", sol.kkt_residual, sol.iterations);

    let warm = qp::solve(&problem, Some(&sol), DEFAULT_TOL)?;
    println!("warm start  {} iterations", warm.iterations);
    Ok(())
}
