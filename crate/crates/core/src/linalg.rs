//! Small dense kernels shared by the precoders.

use crate::error::{Error, Result};
use crate::CMatrix;

/// Condition estimate above which a Gram matrix is treated as singular.
pub(crate) const MAX_CONDITION: f64 = 1e12;

/// Solves `gram * X = rhs` for Hermitian positive-definite `gram` through a
/// Cholesky factorization and forward/backward substitution.
pub(crate) fn solve_hermitian(gram: CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    let n = gram.nrows();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::SingularChannel(format!("{n}x{n} Gram matrix is not positive definite")))?;
    // squared ratio of the extreme Cholesky pivots bounds cond(gram) from below
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().map(|d| d.re).fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let cond = (hi / lo).powi(2);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularChannel(format!("Gram condition estimate {cond:.3e} exceeds {MAX_CONDITION:.0e}")));
    }
    Ok(chol.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn solves_small_system() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(4.0, 0.0), Complex64::new(1.0, 1.0), Complex64::new(1.0, -1.0), Complex64::new(3.0, 0.0)],
        );
        let b = CMatrix::identity(2, 2);
        let x = solve_hermitian(a.clone(), &b).unwrap();
        assert!((a * x - b).norm() < 1e-12);
    }

    #[test]
    fn rejects_singular() {
        let a = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(solve_hermitian(a, &CMatrix::identity(2, 2)), Err(Error::SingularChannel(_))));
    }
}
