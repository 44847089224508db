//! Restarted GMRES with right preconditioning (modified Gram-Schmidt Arnoldi,
//! Givens rotations). With right preconditioning the rotated residual norm is
//! the true residual norm, so the stopping test needs no extra matvec.

use super::csr::{axpy, norm2};
use crate::error::{FracporeError, Result};

pub struct GmresConfig {
    /// Relative tolerance on ||Ax - b|| / ||b||.
    pub tol: f64,
    pub restart: usize,
    /// Cap on the total iteration count across restarts.
    pub max_iters: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            tol: 1e-8,
            restart: 50,
            max_iters: 1000,
        }
    }
}

pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    pub residual_norm: f64,
    /// Relative residual after each iteration (from the Givens recurrence).
    pub history: Vec<f64>,
}

/// Solves `A x = b` where `apply_a` computes `y = A v` and `precond` applies an
/// approximate inverse `y = M^{-1} v` (pass a copy for no preconditioning).
pub fn gmres<A, P>(
    apply_a: A,
    precond: P,
    b: &[f64],
    x0: &[f64],
    cfg: &GmresConfig,
) -> Result<GmresOutcome>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(GmresOutcome {
            x: vec![0.0; n],
            iters: 0,
            residual_norm: 0.0,
            history: Vec::new(),
        });
    }
    let mut x = x0.to_vec();
    let mut total_iters = 0usize;
    let mut history: Vec<f64> = Vec::new();
    let m = cfg.restart.max(1);

    let mut work = vec![0.0; n];
    loop {
        // r = b - A x
        apply_a(&x, &mut work);
        let mut r: Vec<f64> = b.iter().zip(&work).map(|(bi, ai)| bi - ai).collect();
        let mut beta = norm2(&r);
        if beta / b_norm <= cfg.tol {
            return Ok(GmresOutcome {
                x,
                iters: total_iters,
                residual_norm: beta / b_norm,
                history,
            });
        }
        for v in r.iter_mut() {
            *v /= beta;
        }
        let mut basis: Vec<Vec<f64>> = vec![r];
        let mut h = vec![vec![0.0_f64; m]; m + 1]; // h[i][j]
        let mut cs = vec![0.0_f64; m];
        let mut sn = vec![0.0_f64; m];
        let mut g = vec![0.0_f64; m + 1];
        g[0] = beta;

        let mut k_used = 0;
        for j in 0..m {
            if total_iters >= cfg.max_iters {
                break;
            }
            total_iters += 1;
            // w = A M^{-1} v_j
            precond(&basis[j], &mut work);
            let z = work.clone();
            apply_a(&z, &mut work);
            let mut w = work.clone();
            for i in 0..=j {
                let hij = super::csr::dot(&w, &basis[i]);
                h[i][j] = hij;
                axpy(-hij, &basis[i], &mut w);
            }
            let wn = norm2(&w);
            h[j + 1][j] = wn;
            // apply accumulated rotations to the new column
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if denom == 0.0 {
                k_used = j;
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k_used = j + 1;
            beta = g[j + 1].abs();
            history.push(beta / b_norm);
            if beta / b_norm <= cfg.tol || wn == 0.0 {
                break;
            }
            for v in w.iter_mut() {
                *v /= wn;
            }
            basis.push(w);
        }

        // back substitution for y, then x += M^{-1} (V y)
        if k_used > 0 {
            let mut y = vec![0.0_f64; k_used];
            for i in (0..k_used).rev() {
                let mut acc = g[i];
                for jj in i + 1..k_used {
                    acc -= h[i][jj] * y[jj];
                }
                y[i] = acc / h[i][i];
            }
            let mut vy = vec![0.0; n];
            for (jj, yj) in y.iter().enumerate() {
                axpy(*yj, &basis[jj], &mut vy);
            }
            precond(&vy, &mut work);
            axpy(1.0, &work, &mut x);
        }

        if beta / b_norm <= cfg.tol {
            return Ok(GmresOutcome {
                x,
                iters: total_iters,
                residual_norm: beta / b_norm,
                history,
            });
        }
        if total_iters >= cfg.max_iters {
            return Err(FracporeError::IterationLimit(format!(
                "GMRES: {total_iters} iterations, residual {:.3e} > tol {:.3e}",
                beta / b_norm,
                cfg.tol
            )));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::csr::TripletBuilder;

    fn ident(v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(v);
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let b = vec![1.0, -2.0, 3.0];
        let out = gmres(ident, ident, &b, &[0.0; 3], &GmresConfig::default()).unwrap();
        assert_eq!(out.iters, 1);
        for (x, e) in out.x.iter().zip(&b) {
            assert!((x - e).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_matches_direct_solve() {
        let n = 40;
        let mut tb = TripletBuilder::new(n, n);
        for i in 0..n {
            tb.add(i, i, (i + 1) as f64);
        }
        let a = tb.build();
        let b = vec![1.0; n];
        let out = gmres(
            |v, y| a.matvec(v, y),
            ident,
            &b,
            &vec![0.0; n],
            &GmresConfig {
                tol: 1e-12,
                restart: 50,
                max_iters: 500,
            },
        )
        .unwrap();
        for i in 0..n {
            let expect = 1.0 / (i + 1) as f64;
            assert!((out.x[i] - expect).abs() < 1e-10, "i={i}");
        }
    }

    #[test]
    fn residual_monotone_within_cycle() {
        let n = 30;
        let mut tb = TripletBuilder::new(n, n);
        for i in 0..n {
            tb.add(i, i, 2.0 + (i % 5) as f64);
            if i + 1 < n {
                tb.add(i, i + 1, -1.0);
                tb.add(i + 1, i, -0.5);
            }
        }
        let a = tb.build();
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let out = gmres(
            |v, y| a.matvec(v, y),
            ident,
            &b,
            &vec![0.0; n],
            &GmresConfig {
                tol: 1e-10,
                restart: 40,
                max_iters: 100,
            },
        )
        .unwrap();
        assert!(out.history.len() >= 2);
        for w in out.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-14, "history must be non-increasing: {w:?}");
        }
    }

    #[test]
    fn iteration_limit_reported() {
        let n = 50;
        let mut tb = TripletBuilder::new(n, n);
        for i in 0..n {
            tb.add(i, i, 1.0 + i as f64);
            if i + 1 < n {
                tb.add(i, i + 1, 0.9);
                tb.add(i + 1, i, -0.9);
            }
        }
        let a = tb.build();
        let b = vec![1.0; n];
        let r = gmres(
            |v, y| a.matvec(v, y),
            ident,
            &b,
            &vec![0.0; n],
            &GmresConfig {
                tol: 1e-14,
                restart: 3,
                max_iters: 4,
            },
        );
        assert!(matches!(r, Err(FracporeError::IterationLimit(_))));
    }
}
