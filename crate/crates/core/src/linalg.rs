//! Dense symmetric factorization helpers shared by the GP, baseline and simulator code.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative jitter schedule: first the bare matrix, then 1e-10 .. 1e-4 of the mean diagonal.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_CAP: f64 = 1e-4;

/// Cholesky factor plus the absolute jitter that had to be added to the diagonal.
#[derive(Clone, Debug)]
pub struct JitteredCholesky {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl JitteredCholesky {
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn ln_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
    }
}

pub fn mean_diagonal(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.diagonal().iter().sum::<f64>() / m.nrows() as f64
}

/// Factorizes a symmetric matrix, escalating diagonal jitter by ×10 up to the cap.
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Result<JitteredCholesky> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance matrix".into()));
    }
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(JitteredCholesky { chol, jitter: 0.0 });
    }
    let scale = {
        let md = mean_diagonal(m).abs();
        if md > 0.0 {
            md
        } else {
            1.0
        }
    };
    let mut rel = JITTER_START;
    while rel <= JITTER_CAP * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut jm = m.clone();
        for i in 0..jm.nrows() {
            jm[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(jm) {
            return Ok(JitteredCholesky { chol, jitter });
        }
        rel *= 10.0;
    }
    Err(Error::Factorization(format!(
        "not positive definite after jitter {:e} (min eigenvalue {:e})",
        JITTER_CAP * scale,
        min_eigenvalue(m)
    )))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    eigen_extremes(m).0
}

/// (min, max) eigenvalue of a symmetric matrix.
pub fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// True when `min eig >= -tol * max(|max eig|, tiny)`.
pub fn is_psd(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let (min, max) = eigen_extremes(m);
    min >= -rel_tol * max.abs().max(f64::MIN_POSITIVE)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_pd_gets_no_jitter() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let c = cholesky_jittered(&m).unwrap();
        assert_eq!(c.jitter, 0.0);
        let l = c.l();
        assert!((&l * l.transpose() - &m).amax() < 1e-14);
        assert!((c.ln_det() - (2.0f64 - 0.25).ln()).abs() < 1e-14);
    }

    #[test]
    fn singular_psd_is_rescued_by_jitter() {
        let m = DMatrix::from_element(3, 3, 1.0);
        let c = cholesky_jittered(&m).unwrap();
        assert!(c.jitter > 0.0 && c.jitter <= 1e-4);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky_jittered(&m), Err(Error::Factorization(_))));
        assert!(!is_psd(&m, 1e-8));
    }
}
