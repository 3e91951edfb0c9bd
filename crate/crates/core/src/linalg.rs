//! Sparse matrices and the symmetric positive definite solvers used by the
//! interior and collar problems.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed.
#[derive(Debug, Default, Clone)]
pub struct TripletBuilder {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.rows[row].push((col, val));
    }

    /// Replace a whole row at once (used by parallel assembly).
    pub fn set_row(&mut self, row: usize, entries: Vec<(usize, f64)>) {
        self.rows[row] = entries;
    }

    pub fn build(self) -> CsrMatrix {
        let n = self.n;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in self.rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }
}

impl CsrMatrix {
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Largest `|a_ij - a_ji|` relative to the largest `|a_ij|`.
    pub fn relative_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                scale = scale.max(v.abs());
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

/// Preconditioner choice for [`pcg`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    Jacobi,
    IncompleteCholesky,
}

/// Zero fill-in incomplete Cholesky factor, stored as the lower triangle
/// (diagonal last in each row).
struct Ic0 {
    lower: CsrMatrix,
}

impl Ic0 {
    fn new(a: &CsrMatrix) -> Option<Self> {
        let n = a.n;
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    col_idx.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let mut lower = CsrMatrix {
            n,
            row_ptr,
            col_idx,
            vals,
        };
        // Row-oriented IC(0): L[i][j] = (a_ij - sum_k L[i][k] L[j][k]) / L[j][j].
        let mut diag_pos = vec![0usize; n];
        for i in 0..n {
            let start = lower.row_ptr[i];
            let end = lower.row_ptr[i + 1];
            if end == start || lower.col_idx[end - 1] != i {
                return None;
            }
            for k in start..end {
                let j = lower.col_idx[k];
                // dot of row i and row j over common columns < j
                let mut s = lower.vals[k];
                let (mut p, mut q) = (start, lower.row_ptr[j]);
                let q_end = if j == i { end - 1 } else { diag_pos[j] };
                while p < k && q < q_end {
                    let (cp, cq) = (lower.col_idx[p], lower.col_idx[q]);
                    if cp == cq {
                        s -= lower.vals[p] * lower.vals[q];
                        p += 1;
                        q += 1;
                    } else if cp < cq {
                        p += 1;
                    } else {
                        q += 1;
                    }
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    lower.vals[k] = s.sqrt();
                    diag_pos[i] = k;
                } else {
                    lower.vals[k] = s / lower.vals[diag_pos[j]];
                }
            }
        }
        Some(Self { lower })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let l = &self.lower;
        let n = l.n;
        // forward: L y = r
        for i in 0..n {
            let mut s = r[i];
            let end = l.row_ptr[i + 1] - 1;
            for k in l.row_ptr[i]..end {
                s -= l.vals[k] * z[l.col_idx[k]];
            }
            z[i] = s / l.vals[end];
        }
        // backward: L^T z = y
        for i in (0..n).rev() {
            let end = l.row_ptr[i + 1] - 1;
            z[i] /= l.vals[end];
            let zi = z[i];
            for k in l.row_ptr[i]..end {
                z[l.col_idx[k]] -= l.vals[k] * zi;
            }
        }
    }
}

/// Outcome of a conjugate gradient solve.
#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    /// Final `max_i |r_i| / a_ii`.
    pub scaled_residual: f64,
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// matrix. Stops when `max_i |r_i| / a_ii <= tol`.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    precond: Preconditioner,
) -> Result<CgStats> {
    let n = a.n;
    let diag = a.diagonal();
    if diag.iter().any(|d| *d <= 0.0 || !d.is_finite()) {
        return Err(Error::SingularSystem(
            "non-positive diagonal in SPD solve".into(),
        ));
    }
    let ic = match precond {
        Preconditioner::IncompleteCholesky => Ic0::new(a),
        Preconditioner::Jacobi => None,
    };
    let apply = |r: &[f64], z: &mut [f64]| match &ic {
        Some(f) => f.apply(r, z),
        None => {
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
        }
    };
    let scaled = |r: &[f64]| {
        r.iter()
            .zip(&diag)
            .fold(0.0f64, |m, (ri, di)| m.max(ri.abs() / di))
    };

    let mut r = a.mul(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = scaled(&r);
    if res <= tol {
        return Ok(CgStats {
            iterations: 0,
            scaled_residual: res,
        });
    }
    let mut z = vec![0.0; n];
    apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::SingularSystem(format!(
                "CG breakdown at iteration {it}: p'Ap = {pap:e}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = scaled(&r);
        if res <= tol {
            return Ok(CgStats {
                iterations: it,
                scaled_residual: res,
            });
        }
        apply(&r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SingularSystem(format!(
        "CG did not converge in {max_iter} iterations (scaled residual {res:e})"
    )))
}

/// Solve a tridiagonal system by the Thomas algorithm. `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
