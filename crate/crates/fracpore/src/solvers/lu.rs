//! Sparse direct LU: left-looking Gilbert-Peierls factorization with partial
//! pivoting, preceded by a reverse Cuthill-McKee reordering of the symmetrized
//! pattern to keep fill-in down on FEM/FV matrices. Deterministic by
//! construction (ties broken by smallest index).

use super::csr::CsrMatrix;
use crate::error::{FracporeError, Result};

pub struct SparseLu {
    n: usize,
    /// Fill-reducing symmetric permutation: `perm[k]` = original index of the
    /// k-th reordered row/column.
    perm: Vec<usize>,
    // L in CSC over pivot-order rows: unit diagonal stored explicitly first.
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    // U in CSC over pivot-order rows: diagonal stored last in each column.
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
    /// pivot row (in RCM numbering) of each pivot step.
    pivot_rows: Vec<usize>,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<SparseLu> {
        if a.n_rows != a.n_cols {
            return Err(FracporeError::SingularMatrix("matrix not square".into()));
        }
        let n = a.n_rows;
        let perm = rcm_order(a);
        let mut perm_inv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            perm_inv[p] = k;
        }

        // Permuted matrix in CSC: column k holds A(perm[i], perm[k]).
        let nnz = a.nnz();
        let mut col_count = vec![0usize; n + 1];
        for i in 0..n {
            for kk in a.row_ptr[i]..a.row_ptr[i + 1] {
                col_count[perm_inv[a.col_idx[kk]] + 1] += 1;
            }
        }
        for k in 0..n {
            col_count[k + 1] += col_count[k];
        }
        let mut cp = col_count.clone();
        let mut ari = vec![0usize; nnz];
        let mut arx = vec![0.0f64; nnz];
        for i in 0..n {
            let pi = perm_inv[i];
            for kk in a.row_ptr[i]..a.row_ptr[i + 1] {
                let pj = perm_inv[a.col_idx[kk]];
                let slot = cp[pj];
                cp[pj] += 1;
                ari[slot] = pi;
                arx[slot] = a.values[kk];
            }
        }
        let ap = col_count;

        let mut lu = SparseLu {
            n,
            perm,
            lp: vec![0],
            li: Vec::new(),
            lx: Vec::new(),
            up: vec![0],
            ui: Vec::new(),
            ux: Vec::new(),
            pivot_rows: Vec::with_capacity(n),
        };

        // pinv[row] = pivot step at which `row` (RCM numbering) was chosen.
        let mut pinv = vec![usize::MAX; n];
        let mut x = vec![0.0f64; n];
        let mut mark = vec![usize::MAX; n];
        let mut topo: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for j in 0..n {
            // --- symbolic: reachability of A(:,j) through the L graph ---
            topo.clear();
            for kk in ap[j]..ap[j + 1] {
                let root = ari[kk];
                if mark[root] == j {
                    continue;
                }
                // DFS with explicit stack; (node, next child position)
                stack.push((root, usize::MAX));
                mark[root] = j;
                while let Some(top) = stack.len().checked_sub(1) {
                    let (node, pos) = stack[top];
                    let k = pinv[node];
                    if k == usize::MAX {
                        topo.push(node);
                        stack.pop();
                        continue;
                    }
                    let (start, end) = (lu.lp[k] + 1, lu.lp[k + 1]);
                    let mut p = if pos == usize::MAX { start } else { pos };
                    let mut descended = false;
                    while p < end {
                        let child = lu.li[p];
                        p += 1;
                        if mark[child] != j {
                            mark[child] = j;
                            stack[top].1 = p;
                            stack.push((child, usize::MAX));
                            descended = true;
                            break;
                        }
                    }
                    if !descended {
                        topo.push(node);
                        stack.pop();
                    }
                }
            }

            // --- numeric: x = L^{-1} A(:,j) on the reach pattern ---
            for &r in &topo {
                x[r] = 0.0;
            }
            for kk in ap[j]..ap[j + 1] {
                x[ari[kk]] += arx[kk];
            }
            for idx in (0..topo.len()).rev() {
                let r = topo[idx];
                let k = pinv[r];
                if k == usize::MAX {
                    continue;
                }
                let xr = x[r];
                if xr == 0.0 {
                    continue;
                }
                for p in lu.lp[k] + 1..lu.lp[k + 1] {
                    x[lu.li[p]] -= lu.lx[p] * xr;
                }
            }

            // --- pivot choice: largest magnitude among unpivoted rows ---
            let mut pivot = usize::MAX;
            let mut pivot_val = 0.0f64;
            for &r in &topo {
                if pinv[r] == usize::MAX {
                    let v = x[r].abs();
                    if v > pivot_val || (v == pivot_val && v > 0.0 && r < pivot) {
                        pivot = r;
                        pivot_val = v;
                    }
                }
            }
            if pivot == usize::MAX || pivot_val == 0.0 {
                return Err(FracporeError::SingularMatrix(format!(
                    "no usable pivot in column {j}"
                )));
            }
            let piv_x = x[pivot];

            // U column: already-pivoted entries (topological order), diag last.
            for idx in (0..topo.len()).rev() {
                let r = topo[idx];
                let k = pinv[r];
                if k != usize::MAX && x[r] != 0.0 {
                    lu.ui.push(k);
                    lu.ux.push(x[r]);
                }
            }
            lu.ui.push(j);
            lu.ux.push(piv_x);
            lu.up.push(lu.ui.len());

            // L column: unit diagonal first, then unpivoted rows scaled.
            lu.li.push(pivot);
            lu.lx.push(1.0);
            for &r in &topo {
                if pinv[r] == usize::MAX && r != pivot && x[r] != 0.0 {
                    lu.li.push(r);
                    lu.lx.push(x[r] / piv_x);
                }
            }
            lu.lp.push(lu.li.len());

            pinv[pivot] = j;
            lu.pivot_rows.push(pivot);
        }

        // Remap L row indices from RCM row numbers to pivot positions.
        for idx in lu.li.iter_mut() {
            *idx = pinv[*idx];
        }
        Ok(lu)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let n = self.n;
        // y = P_rcm b, then pivot-permute
        let mut y = vec![0.0f64; n];
        for k in 0..n {
            y[k] = b[self.perm[self.pivot_rows[k]]];
        }
        // forward: L z = y (unit diagonal first entry per column)
        for k in 0..n {
            let t = y[k];
            if t != 0.0 {
                for p in self.lp[k] + 1..self.lp[k + 1] {
                    y[self.li[p]] -= self.lx[p] * t;
                }
            }
        }
        // backward: U x = z (diag last in each column)
        for j in (0..n).rev() {
            let diag_pos = self.up[j + 1] - 1;
            let xj = y[j] / self.ux[diag_pos];
            y[j] = xj;
            if xj != 0.0 {
                for p in self.up[j]..diag_pos {
                    y[self.ui[p]] -= self.ux[p] * xj;
                }
            }
        }
        // undo orderings: solution component for permuted column k belongs to
        // original unknown perm[k].
        let mut x = vec![0.0f64; n];
        for k in 0..n {
            x[self.perm[k]] = y[k];
        }
        x
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Reverse Cuthill-McKee on the symmetrized pattern, per connected component,
/// starting from a pseudo-peripheral vertex found by a double BFS.
fn rcm_order(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for kk in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.col_idx[kk];
            if j != i {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();

    let bfs = |start: usize, visited: &mut [bool], order: &mut Vec<usize>| -> usize {
        let begin = order.len();
        order.push(start);
        visited[start] = true;
        let mut head = begin;
        let mut last = start;
        while head < order.len() {
            let v = order[head];
            head += 1;
            last = v;
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            nbrs.sort_by_key(|&u| (degree[u], u));
            for u in nbrs {
                if !visited[u] {
                    visited[u] = true;
                    order.push(u);
                }
            }
        }
        last
    };

    let mut visited = vec![false; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    loop {
        // next unvisited vertex of minimum degree
        let mut start = usize::MAX;
        for v in 0..n {
            if !visited[v] && (start == usize::MAX || degree[v] < degree[start]) {
                start = v;
            }
        }
        if start == usize::MAX {
            break;
        }
        // pseudo-peripheral: BFS twice
        let mut tmp_visited = visited.clone();
        let mut tmp_order = Vec::new();
        let far = bfs(start, &mut tmp_visited, &mut tmp_order);
        bfs(far, &mut visited, &mut order);
    }
    order.reverse();
    order
}
