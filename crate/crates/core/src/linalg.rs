//! Small dense helpers shared by the criteria and the optimizers.

use nalgebra::{DMatrix, DVector};

/// Relative eigenvalue cutoff below which an information matrix is singular.
pub const PD_REL_TOL: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    symmetrize(m).symmetric_eigenvalues()
}

/// Positive definite with smallest eigenvalue above `PD_REL_TOL * trace`.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    let trace = m.trace();
    if !(trace > 0.0 && trace.is_finite()) {
        return false;
    }
    sym_eigenvalues(m).min() > PD_REL_TOL * trace
}

/// Inverse of a positive definite matrix, `None` when singular by the
/// relative eigenvalue cutoff.
pub fn pd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !is_positive_definite(m) {
        return None;
    }
    let s = symmetrize(m);
    let inv = s.clone().cholesky().map(|c| c.inverse()).or_else(|| s.try_inverse())?;
    Some(symmetrize(&inv))
}

/// Determinant of a symmetric positive definite matrix, `None` if singular.
pub fn pd_determinant(m: &DMatrix<f64>) -> Option<f64> {
    if !is_positive_definite(m) {
        return None;
    }
    let s = symmetrize(m);
    match s.clone().cholesky() {
        Some(c) => {
            let d = c.l_dirty().diagonal().iter().map(|x| x * x).product();
            Some(d)
        }
        None => Some(s.determinant()),
    }
}

/// Largest entrywise difference relative to the largest entry of `reference`.
pub fn max_rel_diff(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let scale = reference.amax().max(f64::MIN_POSITIVE);
    (a - reference).amax() / scale
}

pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(!is_positive_definite(&m));
        assert!(pd_inverse(&m).is_none());
        assert!(pd_determinant(&m).is_none());
    }

    #[test]
    fn determinant_and_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((pd_determinant(&m).unwrap() - 3.0).abs() < 1e-14);
        let inv = pd_inverse(&m).unwrap();
        assert!(((&m * inv) - DMatrix::identity(2, 2)).amax() < 1e-14);
    }
}
