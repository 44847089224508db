//! ILU(0): incomplete LU factorization with zero fill-in, natural ordering.
//! The factors share the sparsity pattern of the input matrix; L has unit
//! diagonal and is stored strictly below it, U on and above.

use super::csr::CsrMatrix;
use crate::error::{FracporeError, Result};

pub struct Ilu0 {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &CsrMatrix) -> Result<Ilu0> {
        let n = a.n_rows;
        assert_eq!(n, a.n_cols);
        let row_ptr = a.row_ptr.clone();
        let col_idx = a.col_idx.clone();
        let mut values = a.values.clone();

        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                if col_idx[k] == i {
                    diag_pos[i] = k;
                }
            }
            if diag_pos[i] == usize::MAX {
                return Err(FracporeError::SingularMatrix(format!(
                    "ILU(0): row {i} has no diagonal entry"
                )));
            }
        }

        // position lookup of the current row, stamped to avoid clearing
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = k;
            }
            let mut k = row_ptr[i];
            while k < row_ptr[i + 1] {
                let c = col_idx[k];
                if c >= i {
                    break;
                }
                let piv = values[diag_pos[c]];
                if piv == 0.0 {
                    return Err(FracporeError::SingularMatrix(format!(
                        "ILU(0): zero pivot at row {c}"
                    )));
                }
                let factor = values[k] / piv;
                values[k] = factor;
                for kk in diag_pos[c] + 1..row_ptr[c + 1] {
                    let j = col_idx[kk];
                    let p = pos[j];
                    if p != usize::MAX && p >= row_ptr[i] && p < row_ptr[i + 1] {
                        values[p] -= factor * values[kk];
                    }
                }
                k += 1;
            }
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = usize::MAX;
            }
            if values[diag_pos[i]] == 0.0 {
                // Zero-pivot replacement. Degenerate two-phase states produce
                // identically zero rows (e.g. a gas flux balance at a fracture
                // intersection before any gas arrived); those rows carry a
                // zero residual, so a unit pivot on the row-equilibrated
                // system leaves the Krylov solve untouched elsewhere.
                values[diag_pos[i]] = 1.0;
            }
        }

        Ok(Ilu0 {
            n,
            row_ptr,
            col_idx,
            values,
            diag_pos,
        })
    }

    /// Applies `(LU)^{-1}` to `b`.
    pub fn apply(&self, b: &[f64], x: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        x.copy_from_slice(b);
        // forward solve L y = b (unit diagonal)
        for i in 0..self.n {
            let mut acc = x[i];
            for k in self.row_ptr[i]..self.diag_pos[i] {
                acc -= self.values[k] * x[self.col_idx[k]];
            }
            x[i] = acc;
        }
        // backward solve U x = y
        for i in (0..self.n).rev() {
            let mut acc = x[i];
            for k in self.diag_pos[i] + 1..self.row_ptr[i + 1] {
                acc -= self.values[k] * x[self.col_idx[k]];
            }
            x[i] = acc / self.values[self.diag_pos[i]];
        }
    }
}
