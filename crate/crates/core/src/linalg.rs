//! Dense kernels: LU with partial pivoting and unrestarted GMRES.
//!
//! Matrices are stored row-major. GMRES is matrix-free: it only needs a
//! closure computing the operator applied to a vector, so it is driven by
//! finite-difference Jacobian-vector products in the continuation layer.

use crate::error::{ensure_finite, ensure_len, Result, SolverError};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure_len(rows * cols, data.len())?;
        ensure_finite(&data, "matrix entries")?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            ensure_len(n_cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_row_major(n_rows, n_cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = *v;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.cols, v.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        ensure_len(self.cols, other.rows)?;
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `‖A − Aᵀ‖_∞ / ‖A‖_∞`, zero for the zero matrix.
    pub fn relative_asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let norm = self.norm_inf();
        if norm == 0.0 {
            return 0.0;
        }
        let n = self.rows;
        let skew = (0..n)
            .map(|i| (0..n).map(|j| (self[(i, j)] - self[(j, i)]).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        skew / norm
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Default singularity floor: `1e-14 · ‖A‖_∞`.
pub fn default_pivot_floor(a: &DenseMatrix) -> f64 {
    1e-14 * a.norm_inf()
}

/// Packed LU factors of a row-permuted matrix, `P·A = L·U`.
///
/// `lu` holds the strictly lower part of the unit-lower `L` and the upper
/// triangle of `U`. Row `i` of `P·A` is row `perm[i]` of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn lower(&self) -> DenseMatrix {
        let n = self.dim();
        let mut l = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..i {
                l[(i, j)] = self.lu[(i, j)];
            }
        }
        l
    }

    pub fn upper(&self) -> DenseMatrix {
        let n = self.dim();
        let mut u = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                u[(i, j)] = self.lu[(i, j)];
            }
        }
        u
    }

    /// Applies the row permutation to `a`, giving `P·A`.
    pub fn permute_rows(&self, a: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(a.rows, a.cols);
        for (i, &src) in self.perm.iter().enumerate() {
            out.data[i * a.cols..(i + 1) * a.cols].copy_from_slice(a.row(src));
        }
        out
    }
}

/// Gaussian elimination with partial (row) pivoting.
///
/// Fails with [`SolverError::SingularMatrix`] as soon as the largest
/// available pivot in a column has magnitude `<= pivot_floor`.
pub fn lu_factor(a: &DenseMatrix, pivot_floor: f64) -> Result<LuFactors> {
    if !a.is_square() {
        return Err(SolverError::DimensionMismatch {
            expected: a.rows,
            found: a.cols,
        });
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let (pivot_row, pivot_abs) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs <= pivot_floor {
            return Err(SolverError::SingularMatrix {
                column: k,
                pivot: pivot_abs,
                floor: pivot_floor,
            });
        }
        if pivot_row != k {
            for j in 0..n {
                lu.data.swap(k * n + j, pivot_row * n + j);
            }
            perm.swap(k, pivot_row);
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            if factor != 0.0 {
                for j in (k + 1)..n {
                    lu.data[i * n + j] -= factor * lu.data[k * n + j];
                }
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

/// Solves `A·z = r` from the factors: permute, then forward and back
/// substitution.
pub fn lu_solve(f: &LuFactors, r: &[f64]) -> Result<Vec<f64>> {
    let n = f.dim();
    ensure_len(n, r.len())?;
    let mut z: Vec<f64> = f.perm.iter().map(|&p| r[p]).collect();
    for i in 0..n {
        let row = f.lu.row(i);
        z[i] -= dot(&row[..i], &z[..i]);
    }
    for i in (0..n).rev() {
        let row = f.lu.row(i);
        let s = dot(&row[i + 1..], &z[i + 1..]);
        z[i] = (z[i] - s) / row[i];
    }
    Ok(z)
}

/// Outcome of a GMRES solve.
#[derive(Debug, Clone, PartialEq)]
pub struct GmresReport {
    pub iterations: usize,
    /// Residual norm estimate before the first and after every iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

impl GmresReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }
}

/// Unrestarted GMRES with modified Gram-Schmidt and Givens rotations.
///
/// With a preconditioner `M = L·U` the left-preconditioned system
/// `M⁻¹A x = M⁻¹b` is solved, and `tol_abs` bounds the preconditioned
/// residual norm. The Krylov dimension is capped at `min(max_iter, n)`.
pub fn gmres<A>(
    mut apply: A,
    b: &[f64],
    x0: &[f64],
    precond: Option<&LuFactors>,
    tol_abs: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, GmresReport)>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    ensure_len(n, x0.len())?;
    if let Some(m) = precond {
        ensure_len(n, m.dim())?;
    }
    if !(tol_abs > 0.0) || max_iter == 0 {
        return Err(SolverError::InvalidParams(format!(
            "gmres needs tol_abs > 0 and max_iter >= 1 (got {tol_abs}, {max_iter})"
        )));
    }

    let ax0 = if x0.iter().all(|&v| v == 0.0) {
        vec![0.0; n]
    } else {
        let w = apply(x0)?;
        ensure_len(n, w.len())?;
        ensure_finite(&w, "gmres operator output")?;
        w
    };
    let mut op = |v: &[f64]| -> Result<Vec<f64>> {
        let w = apply(v)?;
        ensure_len(n, w.len())?;
        ensure_finite(&w, "gmres operator output")?;
        match precond {
            Some(m) => lu_solve(m, &w),
            None => Ok(w),
        }
    };

    let r0: Vec<f64> = b.iter().zip(&ax0).map(|(bi, ai)| bi - ai).collect();
    let r0 = match precond {
        Some(m) => lu_solve(m, &r0)?,
        None => r0,
    };
    let beta = norm2(&r0);
    let mut history = vec![beta];
    if beta <= tol_abs || n == 0 {
        return Ok((
            x0.to_vec(),
            GmresReport {
                iterations: 0,
                residual_history: history,
                converged: true,
            },
        ));
    }

    let kmax = max_iter.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(kmax + 1);
    basis.push(r0.iter().map(|v| v / beta).collect());
    // Column j of the Hessenberg matrix, rotated in place.
    let mut hess: Vec<Vec<f64>> = Vec::with_capacity(kmax);
    let mut cs: Vec<f64> = Vec::with_capacity(kmax);
    let mut sn: Vec<f64> = Vec::with_capacity(kmax);
    let mut g = vec![0.0; kmax + 1];
    g[0] = beta;
    let mut k = 0;

    while k < kmax {
        let mut w = op(&basis[k])?;
        let mut col = vec![0.0; k + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(&w, v);
            col[i] = hij;
            for (wj, vj) in w.iter_mut().zip(v) {
                *wj -= hij * vj;
            }
        }
        let h_next = norm2(&w);
        col[k + 1] = h_next;

        for i in 0..k {
            let t = cs[i] * col[i] + sn[i] * col[i + 1];
            col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
            col[i] = t;
        }
        let d = col[k].hypot(col[k + 1]);
        let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (col[k] / d, col[k + 1] / d) };
        col[k] = d;
        col[k + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g[k + 1] = -s * g[k];
        g[k] *= c;
        hess.push(col);
        k += 1;

        let res = g[k].abs();
        history.push(res);
        // Happy breakdown: the Krylov space is invariant, `res` is exact zero
        // up to roundoff.
        let breakdown = h_next <= f64::EPSILON * beta;
        if res <= tol_abs || breakdown {
            break;
        }
        basis.push(w.iter().map(|v| v / h_next).collect());
    }

    // Back substitution on the rotated triangular system.
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in (i + 1)..k {
            s -= hess[j][i] * y[j];
        }
        y[i] = if hess[i][i] == 0.0 { 0.0 } else { s / hess[i][i] };
    }
    let mut x = x0.to_vec();
    for (yi, v) in y.iter().zip(&basis) {
        for (xj, vj) in x.iter_mut().zip(v) {
            *xj += yi * vj;
        }
    }
    ensure_finite(&x, "gmres iterate")?;

    let converged = history[k] <= tol_abs;
    Ok((
        x,
        GmresReport {
            iterations: k,
            residual_history: history,
            converged,
        },
    ))
}
