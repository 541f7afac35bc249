mod common;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{qp_enumeration, random_qp};
use icd_pcac::qp::{self, QpStatus};
use icd_pcac::QpProblem;

#[test]
fn matches_enumeration_on_random_problems() {
    let outcome = common::criteria::qp_correctness();
    assert!(outcome.passed, "{}", outcome.detail);
}

#[test]
fn warm_start_reaches_the_same_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..30 {
        let problem = random_qp(&mut rng);
        let cold = qp::solve(&problem, None, qp::DEFAULT_TOL).unwrap();
        let mut shifted = problem.clone();
        shifted.f *= 1.01;
        let warm = qp::solve(&shifted, Some(&cold), qp::DEFAULT_TOL).unwrap();
        let oracle = qp_enumeration(&shifted).unwrap();
        assert_eq!(warm.status, QpStatus::Optimal);
        assert!((&warm.x - &oracle).amax() <= 1e-8 * (1.0 + oracle.amax()));
    }
}

#[test]
fn reports_infeasible_inequalities() {
    let problem = QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(2)).with_inequalities(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]),
        DVector::from_column_slice(&[-1.0, -1.0]),
    );
    let sol = qp::solve(&problem, None, qp::DEFAULT_TOL).unwrap();
    assert_eq!(sol.status, QpStatus::Infeasible);
}

#[test]
fn semidefinite_hessian_yields_a_minimizer() {
    // The second coordinate is cost-free; any value inside its box is optimal.
    let h = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 0.0]));
    let problem = QpProblem::new(h, DVector::from_column_slice(&[-2.0, 0.0])).with_bounds(
        DVector::from_column_slice(&[-5.0, -1.0]),
        DVector::from_column_slice(&[5.0, 1.0]),
    );
    let sol = qp::solve(&problem, None, qp::DEFAULT_TOL).unwrap();
    assert_eq!(sol.status, QpStatus::Optimal);
    assert!((sol.x[0] - 1.0).abs() < 1e-6);
    assert!(sol.x[1].abs() <= 1.0 + 1e-9);
}

#[test]
fn rejects_inconsistent_dimensions() {
    let problem = QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(3));
    assert!(qp::solve(&problem, None, qp::DEFAULT_TOL).is_err());
}
