//! Block observable canonical form of the identified ARX model.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::history::IoHistory;
use crate::nonlinearity::Nonlinearity;
use crate::rls::ArxCoefficients;

/// State-space realization `eta_{k+1} = A eta_k + B sigma(u_k)`, `y_k = C eta_k`,
/// together with the reconstructed state `eta_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BocfModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub eta: DVector<f64>,
}

impl BocfModel {
    /// Realization from the coefficients with the state reconstructed from data.
    pub fn from_data(
        coeffs: &ArxCoefficients,
        y_k: &DVector<f64>,
        past: &IoHistory,
        nl: &Nonlinearity,
    ) -> Result<Self> {
        let (a, b, c) = build_realization(coeffs)?;
        let eta = reconstruct_state(coeffs, y_k, past, nl)?;
        Ok(BocfModel { a, b, c, eta })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
}

fn check_blocks(coeffs: &ArxCoefficients) -> Result<(usize, usize, usize)> {
    let n = coeffs.n_hat();
    if n == 0 || coeffs.g.len() != n {
        return Err(Error::Dimension(format!(
            "expected matching F/G block counts, got {} and {}",
            n,
            coeffs.g.len()
        )));
    }
    let p = coeffs.output_dim();
    let m = coeffs.input_dim();
    for f in &coeffs.f {
        if f.shape() != (p, p) {
            return Err(Error::Dimension(format!("F block {:?}, expected ({p}, {p})", f.shape())));
        }
    }
    for g in &coeffs.g {
        if g.shape() != (p, m) {
            return Err(Error::Dimension(format!("G block {:?}, expected ({p}, {m})", g.shape())));
        }
    }
    Ok((n, p, m))
}

/// Companion-form `(A, B, C)`: first block column of `A` is `-F_i`, identity
/// blocks on the superdiagonal, `B` stacks `G_i`, `C = [I 0 .. 0]`.
pub fn build_realization(
    coeffs: &ArxCoefficients,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (n, p, m) = check_blocks(coeffs)?;
    let dim = n * p;
    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DMatrix::zeros(dim, m);
    for i in 0..n {
        a.view_mut((i * p, 0), (p, p)).copy_from(&(-&coeffs.f[i]));
        if i + 1 < n {
            a.view_mut((i * p, (i + 1) * p), (p, p)).fill_with_identity();
        }
        b.view_mut((i * p, 0), (p, m)).copy_from(&coeffs.g[i]);
    }
    let mut c = DMatrix::zeros(p, dim);
    c.view_mut((0, 0), (p, p)).fill_with_identity();
    Ok((a, b, c))
}

/// `eta_k` from `y_k` and the past window holding `y_{k-1}.., u_{k-1}..`.
///
/// Block `j` (1-based, `j >= 2`) is
/// `-sum_{i=1}^{n-j+1} F_{i+j-1} y_{k-i} + sum_{i=1}^{n-j+1} G_{i+j-1} sigma(u_{k-i})`.
pub fn reconstruct_state(
    coeffs: &ArxCoefficients,
    y_k: &DVector<f64>,
    past: &IoHistory,
    nl: &Nonlinearity,
) -> Result<DVector<f64>> {
    let (n, p, m) = check_blocks(coeffs)?;
    if y_k.len() != p || past.output_dim() != p || past.input_dim() != m {
        return Err(Error::Dimension(format!(
            "history dims (p={}, m={}) and y_k len {} do not match coefficients (p={p}, m={m})",
            past.output_dim(),
            past.input_dim(),
            y_k.len()
        )));
    }
    if n > 1 && past.depth() + 1 < n {
        return Err(Error::Dimension(format!(
            "history depth {} too short for order {n}",
            past.depth()
        )));
    }
    let mut eta = DVector::zeros(n * p);
    eta.rows_mut(0, p).copy_from(y_k);
    let sig: Vec<_> = (1..n).map(|lag| nl.evaluate(&past.u(lag))).collect();
    for j in 2..=n {
        let mut block = DVector::zeros(p);
        for i in 1..=(n - j + 1) {
            block -= &coeffs.f[i + j - 2] * past.y(i);
            block += &coeffs.g[i + j - 2] * &sig[i - 1];
        }
        eta.rows_mut((j - 1) * p, p).copy_from(&block);
    }
    Ok(eta)
}
