//! Thomas algorithm for a fixed tridiagonal matrix, factored once.

/// LU factors of a tridiagonal matrix with sub-diagonal `lower`, diagonal
/// `diag` and super-diagonal `upper` (`lower[0]` and `upper[n-1]` unused).
#[derive(Debug, Clone)]
pub(crate) struct Tridiagonal {
    lower: Vec<f64>,
    /// Modified super-diagonal `c'_i`.
    upper: Vec<f64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
}

impl Tridiagonal {
    pub(crate) fn factor(lower: Vec<f64>, diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        assert!(n >= 1 && lower.len() == n && upper.len() == n);
        let mut cp = vec![0.0; n];
        let mut inv = vec![0.0; n];
        inv[0] = 1.0 / diag[0];
        cp[0] = upper[0] * inv[0];
        for i in 1..n {
            let pivot = diag[i] - lower[i] * cp[i - 1];
            inv[i] = 1.0 / pivot;
            cp[i] = upper[i] * inv[i];
        }
        Tridiagonal {
            lower,
            upper: cp,
            inv_pivot: inv,
        }
    }

    /// Overwrites `rhs` with the solution.
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}
