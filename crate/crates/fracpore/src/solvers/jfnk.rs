//! Jacobian-free Newton-Krylov acceleration of a fixed-point map.
//!
//! Solves `F(u) = G(u) - u = 0` by Newton iterations where the Jacobian-vector
//! products are finite-differenced, `F'(u) v ~ (F(u + eps v) - F(u)) / eps`,
//! and the inner linear solve is a loosely converged unpreconditioned GMRES.
//! One inner GMRES iteration costs one evaluation of `G`.

use super::csr::{axpy, norm2};
use crate::error::{FracporeError, Result};

#[derive(Debug, Clone)]
pub struct FixedPointConfig {
    /// Stop when ||du|| / max(||u||, floor) drops below this.
    pub rel_increment_tol: f64,
    pub max_outer: usize,
    /// Finite-difference scale: eps = fd_eps_scale * (1 + ||u||) / ||v||.
    pub fd_eps_scale: f64,
    /// Inner GMRES relative tolerance (loose inner/outer).
    pub inner_tol: f64,
    pub inner_restart: usize,
    pub inner_max_iters: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            rel_increment_tol: 1e-5,
            max_outer: 100,
            fd_eps_scale: 1e-7,
            inner_tol: 1e-2,
            inner_restart: 30,
            inner_max_iters: 60,
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FixedPointStats {
    pub outer_iters: usize,
    pub g_evaluations: usize,
    pub inner_gmres_iters: usize,
}

/// Runs the accelerated fixed point on `g`. Returns the converged iterate.
/// `g` failures propagate immediately (a failed flow solve aborts the step).
pub fn newton_krylov_fixed_point<G>(
    mut g: G,
    u0: &[f64],
    cfg: &FixedPointConfig,
) -> Result<(Vec<f64>, FixedPointStats)>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = u0.len();
    let mut stats = FixedPointStats::default();
    let mut u = u0.to_vec();
    let mut gu = g(&u)?;
    stats.g_evaluations += 1;
    let mut f: Vec<f64> = gu.iter().zip(&u).map(|(a, b)| a - b).collect();

    let scale = |u: &[f64]| norm2(u).max(1e-30);
    if norm2(&f) <= 1e-13 * scale(&u) {
        return Ok((u, stats)); // already a fixed point
    }

    for _outer in 1..=cfg.max_outer {
        stats.outer_iters += 1;
        // Solve F'(u) du = -F(u) with matrix-free GMRES (no restart benefit
        // expected at these inner tolerances, but keep it bounded).
        let u_norm = norm2(&u);
        let du = {
            let matvec = |v: &[f64], out: &mut [f64]| -> Result<()> {
                let vn = norm2(v);
                if vn == 0.0 {
                    out.fill(0.0);
                    return Ok(());
                }
                let eps = cfg.fd_eps_scale * (1.0 + u_norm) / vn;
                let mut up = u.clone();
                axpy(eps, v, &mut up);
                let gup = g(&up)?;
                for i in 0..n {
                    out[i] = ((gup[i] - up[i]) - f[i]) / eps;
                }
                Ok(())
            };
            matrix_free_gmres(matvec, &f, cfg, &mut stats)?
        };
        axpy(1.0, &du, &mut u);
        gu = g(&u)?;
        stats.g_evaluations += 1;
        for i in 0..n {
            f[i] = gu[i] - u[i];
        }
        let rel_inc = norm2(&du) / scale(&u);
        if std::env::var_os("FRACPORE_FP_TRACE").is_some() {
            eprintln!(
                "  fp outer {}: |du|/|u| {:.3e} |F|/|u| {:.3e}",
                stats.outer_iters,
                rel_inc,
                norm2(&f) / scale(&u)
            );
        }
        if rel_inc < cfg.rel_increment_tol || norm2(&f) <= 1e-13 * scale(&u) {
            return Ok((u, stats));
        }
    }
    Err(FracporeError::OuterNonConvergence(format!(
        "fixed point not converged in {} outer iterations",
        cfg.max_outer
    )))
}

/// Minimal single-cycle-restarted GMRES on a fallible matrix-free operator,
/// solving `J du = -f`.
fn matrix_free_gmres<Mv>(
    mut matvec: Mv,
    f: &[f64],
    cfg: &FixedPointConfig,
    stats: &mut FixedPointStats,
) -> Result<Vec<f64>>
where
    Mv: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let n = f.len();
    let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
    let b_norm = norm2(&rhs);
    let mut x = vec![0.0f64; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let m = cfg.inner_restart.max(1);
    let mut total = 0usize;
    let mut work = vec![0.0; n];
    loop {
        matvec(&x, &mut work)?;
        total += 1;
        stats.inner_gmres_iters += 1;
        stats.g_evaluations += 1;
        let mut r: Vec<f64> = rhs.iter().zip(&work).map(|(b, a)| b - a).collect();
        let mut beta = norm2(&r);
        if beta / b_norm <= cfg.inner_tol {
            return Ok(x);
        }
        for v in r.iter_mut() {
            *v /= beta;
        }
        let mut basis = vec![r];
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut gv = vec![0.0f64; m + 1];
        gv[0] = beta;
        let mut k_used = 0;
        for j in 0..m {
            if total >= cfg.inner_max_iters {
                break;
            }
            matvec(&basis[j], &mut work)?;
            total += 1;
            stats.inner_gmres_iters += 1;
            stats.g_evaluations += 1;
            let mut w = work.clone();
            for i in 0..=j {
                let hij = super::csr::dot(&w, &basis[i]);
                h[i][j] = hij;
                axpy(-hij, &basis[i], &mut w);
            }
            let wn = norm2(&w);
            h[j + 1][j] = wn;
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
            gv[j + 1] = -sn[j] * gv[j];
            gv[j] *= cs[j];
            k_used = j + 1;
            beta = gv[j + 1].abs();
            if beta / b_norm <= cfg.inner_tol || wn == 0.0 {
                break;
            }
            for v in w.iter_mut() {
                *v /= wn;
            }
            basis.push(w);
        }
        if k_used > 0 {
            let mut y = vec![0.0f64; k_used];
            for i in (0..k_used).rev() {
                let mut acc = gv[i];
                for jj in i + 1..k_used {
                    acc -= h[i][jj] * y[jj];
                }
                y[i] = acc / h[i][i];
            }
            for (jj, yj) in y.iter().enumerate() {
                axpy(*yj, &basis[jj], &mut x);
            }
        }
        if beta / b_norm <= cfg.inner_tol || total >= cfg.inner_max_iters {
            // loose inner solve: running out of budget is acceptable, the
            // outer Newton absorbs the inexactness
            return Ok(x);
        }
    }
}
