//! Small dense and integer linear algebra helpers used by the lattice layer.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Neumaier compensated accumulator. Long lattice sums add up to 1e8 terms;
/// naive summation roundoff (n * eps * |sum|) would exceed the certified tail
/// bounds, compensation keeps it near eps * sum|terms|.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum with compensation, in the order given.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = Accumulator::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

// ---------------------------------------------------------------------------
// Integer matrices: Smith normal form with transform tracking.
//
// Coefficient matrices here are tiny (rank <= 12, a few hundred columns) with
// small entries, so a textbook reduction over i128 is plenty.
// ---------------------------------------------------------------------------

/// U * A * V = D with U, V unimodular and D diagonal (divisibility chain).
/// `u_inv` is kept alongside because saturation and unimodular completion read
/// columns of U^{-1} directly.
pub struct Snf {
    pub rows: usize,
    pub cols: usize,
    /// Elementary divisors, nonzero entries first; length = min(rows, cols).
    pub diag: Vec<i128>,
    pub u: Vec<Vec<i128>>,
    pub u_inv: Vec<Vec<i128>>,
    pub v: Vec<Vec<i128>>,
}

impl Snf {
    pub fn rank(&self) -> usize {
        self.diag.iter().filter(|d| **d != 0).count()
    }

    /// True when the columns of A generate a direct summand of Z^rows,
    /// i.e. every elementary divisor is 1.
    pub fn is_primitive(&self, expected_rank: usize) -> bool {
        self.rank() == expected_rank && self.diag.iter().take(expected_rank).all(|d| d.abs() == 1)
    }

    /// Basis (as columns, coefficients in Z^rows) of the saturation of the
    /// column span: span_Q(A) intersected with Z^rows.
    pub fn saturation_basis(&self) -> DMatrix<i64> {
        let r = self.rank();
        let mut out = DMatrix::zeros(self.rows, r);
        for j in 0..r {
            for i in 0..self.rows {
                out[(i, j)] = narrow(self.u_inv[i][j]);
            }
        }
        out
    }

    /// Basis (as columns, coefficients in Z^rows) of the integer span of A's
    /// columns: the nonzero divisor d_j times column j of U^{-1}. Differs from
    /// the saturation exactly when some divisor exceeds 1.
    pub fn column_span_basis(&self) -> DMatrix<i64> {
        let r = self.rank();
        let mut out = DMatrix::zeros(self.rows, r);
        for j in 0..r {
            for i in 0..self.rows {
                out[(i, j)] = narrow(self.diag[j] * self.u_inv[i][j]);
            }
        }
        out
    }

    /// Columns of U^{-1}: a basis of Z^rows whose first `rank` columns span the
    /// saturation of A's column span.
    pub fn adapted_basis(&self) -> DMatrix<i64> {
        let mut out = DMatrix::zeros(self.rows, self.rows);
        for j in 0..self.rows {
            for i in 0..self.rows {
                out[(i, j)] = narrow(self.u_inv[i][j]);
            }
        }
        out
    }
}

fn narrow(x: i128) -> i64 {
    i64::try_from(x).expect("integer reduction overflowed i64 range")
}

fn identity_i128(n: usize) -> Vec<Vec<i128>> {
    let mut m = vec![vec![0i128; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1;
    }
    m
}

/// Smith normal form by alternating row/column Euclid steps.
pub fn smith_normal_form(a: &DMatrix<i64>) -> Snf {
    let rows = a.nrows();
    let cols = a.ncols();
    let mut m: Vec<Vec<i128>> = (0..rows)
        .map(|i| (0..cols).map(|j| a[(i, j)] as i128).collect())
        .collect();
    let mut u = identity_i128(rows);
    let mut u_inv = identity_i128(rows);
    let mut v = identity_i128(cols);

    let k = rows.min(cols);
    for t in 0..k {
        'outer: loop {
            // pivot: smallest nonzero |entry| in the trailing block
            let mut pivot: Option<(usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    if m[i][j] != 0
                        && pivot.is_none_or(|(pi, pj)| m[i][j].abs() < m[pi][pj].abs())
                    {
                        pivot = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = pivot else {
                break; // trailing block is all zero
            };
            if pi != t {
                m.swap(pi, t);
                u.swap(pi, t);
                for row in u_inv.iter_mut() {
                    row.swap(pi, t);
                }
            }
            if pj != t {
                for row in m.iter_mut() {
                    row.swap(pj, t);
                }
                for row in v.iter_mut() {
                    row.swap(pj, t);
                }
            }

            let mut clean = true;
            for i in t + 1..rows {
                let q = div_round(m[i][t], m[t][t]);
                if q != 0 {
                    for j in t..cols {
                        m[i][j] -= q * m[t][j];
                    }
                    for j in 0..rows {
                        u[i][j] -= q * u[t][j];
                        u_inv[j][t] += q * u_inv[j][i];
                    }
                }
                if m[i][t] != 0 {
                    clean = false;
                }
            }
            for j in t + 1..cols {
                let q = div_round(m[t][j], m[t][t]);
                if q != 0 {
                    for i in t..rows {
                        m[i][j] -= q * m[i][t];
                    }
                    for i in 0..cols {
                        v[i][j] -= q * v[i][t];
                    }
                }
                if m[t][j] != 0 {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }

            // enforce the divisibility chain
            for i in t + 1..rows {
                for j in t + 1..cols {
                    if m[i][j] % m[t][t] != 0 {
                        // add row i to row t and restart the reduction
                        for jj in 0..cols {
                            m[t][jj] += m[i][jj];
                        }
                        for jj in 0..rows {
                            u[t][jj] += u[i][jj];
                            u_inv[jj][i] -= u_inv[jj][t];
                        }
                        continue 'outer;
                    }
                }
            }
            break;
        }
        if m[t][t] < 0 {
            for j in 0..cols {
                m[t][j] = -m[t][j];
            }
            for j in 0..rows {
                u[t][j] = -u[t][j];
                u_inv[j][t] = -u_inv[j][t];
            }
        }
    }

    let diag = (0..k).map(|t| m[t][t]).collect();
    Snf {
        rows,
        cols,
        diag,
        u,
        u_inv,
        v,
    }
}

/// Quotient rounded to nearest, which keeps Euclid steps short.
fn div_round(a: i128, b: i128) -> i128 {
    debug_assert!(b != 0);
    let q = a / b;
    let r = a - q * b;
    if 2 * r.abs() > b.abs() {
        q + if (r > 0) == (b > 0) { 1 } else { -1 }
    } else {
        q
    }
}

// ---------------------------------------------------------------------------
// Orthonormalization
// ---------------------------------------------------------------------------

/// Orthonormal basis of the column span via modified Gram-Schmidt with one
/// re-orthogonalization pass. Columns whose residual falls below `tol` times
/// their original norm are dropped, so the result has full column rank.
pub fn orthonormal_columns(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut q: Vec<DVector<f64>> = Vec::new();
    for j in 0..m.ncols() {
        let mut v = m.column(j).into_owned();
        let orig = v.norm();
        if orig == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &q {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let r = v.norm();
        if r > tol * orig {
            q.push(v / r);
        }
    }
    let mut out = DMatrix::zeros(n, q.len());
    for (j, col) in q.iter().enumerate() {
        out.set_column(j, col);
    }
    out
}

/// Orthonormal basis of span(whole) ∩ span(sub)^⊥, obtained by projecting
/// `whole`'s columns away from `sub_q` (orthonormal) and orthonormalizing.
pub fn orthonormal_complement_within(
    whole: &DMatrix<f64>,
    sub_q: &DMatrix<f64>,
    tol: f64,
) -> DMatrix<f64> {
    let mut proj = whole.clone();
    for j in 0..proj.ncols() {
        let mut col = proj.column(j).into_owned();
        let orig = col.norm();
        for _ in 0..2 {
            for b in 0..sub_q.ncols() {
                let q = sub_q.column(b);
                let c = q.dot(&col);
                col.axpy(-c, &q.into_owned(), 1.0);
            }
        }
        // a column that collapsed relative to its own size lies inside
        // span(sub); zero it exactly so leftover rounding dust cannot get
        // normalized into a spurious complement direction
        if col.norm() <= tol * orig {
            col.fill(0.0);
        }
        proj.set_column(j, &col);
    }
    orthonormal_columns(&proj, tol)
}

// ---------------------------------------------------------------------------
// Symmetric matrices
// ---------------------------------------------------------------------------

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Largest |eigenvalue| of a symmetric matrix.
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()))
}

/// Matrix exponential by scaling and squaring with a Taylor core.
///
/// The argument is scaled until its 1-norm is below 1/4; the truncated series
/// then converges past double precision, and the handful of squarings that
/// follow keep the overall error comfortably under 1e-12 for the ‖A‖ ≤ log 2
/// inputs this crate feeds it.
pub fn matrix_exp(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(
            "matrix exponential needs a square matrix".into(),
        ));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = a.iter().map(|x| x.abs()).fold(0.0f64, f64::max) * n as f64;
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
        if squarings > 64 {
            return Err(Error::Domain("matrix exponential argument too large".into()));
        }
    }
    let m = a * scale;
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for j in 1..=30 {
        term = (&term * &m) / j as f64;
        result += &term;
        let tn = term.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
        if tn < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}
