//! Lattice bases, Gram matrices, duals, quotients and direct sums.
//!
//! A lattice of rank d in R^n is stored as the n×d matrix whose columns are a
//! basis. Rank 0 is the trivial lattice {0}; by convention its determinant
//! is 1 so that direct sums and quotient identities hold without special
//! cases downstream.

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_columns, orthonormal_complement_within, smith_normal_form};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const INTEGRALITY_TOL: f64 = 1e-9;
pub const SPAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LatticeBasis {
    ambient_dim: usize,
    rank: usize,
    columns: DMatrix<f64>,
}

/// One enumerated lattice point: integer coordinates in the originating basis,
/// the embedded vector, and its squared norm.
#[derive(Debug, Clone)]
pub struct LatticeVector {
    pub coeffs: Vec<i64>,
    pub embedding: DVector<f64>,
    pub norm_sq: f64,
}

impl LatticeBasis {
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        let n = columns.nrows();
        let d = columns.ncols();
        if d > n {
            return Err(Error::DimensionMismatch(format!(
                "rank {d} exceeds ambient dimension {n}"
            )));
        }
        if d > 0 {
            let gram = columns.transpose() * &columns;
            let gdet = gram.determinant();
            // scale-free degeneracy test: Hadamard ratio of the Gram matrix
            let mut had = 1.0;
            for i in 0..d {
                had *= gram[(i, i)];
            }
            if !(gdet > 0.0) || !gdet.is_finite() || (had > 0.0 && gdet / had < 1e-20) {
                return Err(Error::DegenerateBasis { gram_det: gdet });
            }
        }
        Ok(LatticeBasis {
            ambient_dim: n,
            rank: d,
            columns,
        })
    }

    /// The lattice {0} sitting in R^n.
    pub fn trivial(ambient_dim: usize) -> Self {
        LatticeBasis {
            ambient_dim,
            rank: 0,
            columns: DMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn standard(n: usize) -> Self {
        LatticeBasis::new(DMatrix::identity(n, n)).expect("identity basis")
    }

    /// Diagonal lattice diag(entries) * Z^n.
    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        let n = entries.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        LatticeBasis::new(m)
    }

    /// Hexagonal planar lattice with shortest vector 1:
    /// basis (1,0), (1/2, sqrt(3)/2); determinant sqrt(3)/2.
    pub fn hexagonal() -> Self {
        let h = 3.0f64.sqrt() / 2.0;
        LatticeBasis::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, h])).unwrap()
    }

    /// Hexagonal lattice rescaled to determinant 1
    /// (shortest vector 2^{1/2}/3^{1/4} ≈ 1.07457).
    pub fn hexagonal_unit_det() -> Self {
        let a = (2.0 / 3.0f64.sqrt()).sqrt();
        let base = LatticeBasis::hexagonal();
        LatticeBasis::new(base.columns * a).unwrap()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_trivial(&self) -> bool {
        self.rank == 0
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn basis_vector(&self, j: usize) -> DVector<f64> {
        self.columns.column(j).into_owned()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.columns.transpose() * &self.columns
    }

    pub fn gram_matrix(&self) -> GramMatrix {
        GramMatrix(self.gram())
    }

    /// Covolume sqrt(det(BᵀB)); 1 for the trivial lattice.
    pub fn determinant(&self) -> f64 {
        if self.rank == 0 {
            return 1.0;
        }
        let gram = self.gram();
        match gram.clone().cholesky() {
            Some(ch) => {
                let l = ch.l();
                let mut d = 1.0;
                for i in 0..self.rank {
                    d *= l[(i, i)];
                }
                d
            }
            None => gram.determinant().max(0.0).sqrt(),
        }
    }

    /// Dual basis B(BᵀB)^{-1}; spans the same subspace, Gram inverse to ours.
    pub fn dual(&self) -> Result<LatticeBasis> {
        if self.rank == 0 {
            return Ok(self.clone());
        }
        // B·(BᵀB)^{-1} computed as Q·R^{-T}; only the condition number of
        // B enters, not its square
        let qr = self.columns.clone().qr();
        let q = qr.q();
        let r = qr.r();
        if (0..self.rank).any(|i| r[(i, i)].abs() < 1e-14) {
            return Err(Error::DegenerateBasis { gram_det: 0.0 });
        }
        let rt_inv = r
            .transpose()
            .solve_lower_triangular(&DMatrix::identity(self.rank, self.rank))
            .ok_or(Error::DegenerateBasis { gram_det: 0.0 })?;
        LatticeBasis::new(q * rt_inv)
    }

    /// Image under an invertible ambient map M (n×n).
    pub fn apply_transform(&self, m: &DMatrix<f64>) -> Result<LatticeBasis> {
        if m.nrows() != self.ambient_dim || m.ncols() != self.ambient_dim {
            return Err(Error::DimensionMismatch(format!(
                "transform is {}x{}, ambient dimension is {}",
                m.nrows(),
                m.ncols(),
                self.ambient_dim
            )));
        }
        if self.ambient_dim > 0 && m.determinant().abs() < 1e-300 {
            return Err(Error::SingularTransform);
        }
        if self.rank == 0 {
            return Ok(self.clone());
        }
        LatticeBasis::new(m * &self.columns)
    }

    /// Orthogonal direct sum: block-diagonal basis in R^{n1+n2}.
    pub fn direct_sum(&self, other: &LatticeBasis) -> LatticeBasis {
        let n = self.ambient_dim + other.ambient_dim;
        let d = self.rank + other.rank;
        let mut cols = DMatrix::zeros(n, d);
        cols.view_mut((0, 0), (self.ambient_dim, self.rank))
            .copy_from(&self.columns);
        cols.view_mut(
            (self.ambient_dim, self.rank),
            (other.ambient_dim, other.rank),
        )
        .copy_from(&other.columns);
        LatticeBasis {
            ambient_dim: n,
            rank: d,
            columns: cols,
        }
    }

    /// Sublattice generated by integer coefficient columns.
    pub fn sublattice(&self, coeffs: &DMatrix<i64>) -> Result<LatticeBasis> {
        if coeffs.nrows() != self.rank {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix has {} rows, rank is {}",
                coeffs.nrows(),
                self.rank
            )));
        }
        let cf = coeffs.map(|x| x as f64);
        LatticeBasis::new(&self.columns * cf)
    }

    /// Integer coordinates of `v` in this basis, or None when `v` is not a
    /// lattice point (outside the span, or non-integer coefficients beyond
    /// the 1e-9 integrality tolerance).
    pub fn coefficients_of(&self, v: &DVector<f64>) -> Option<Vec<i64>> {
        if v.len() != self.ambient_dim {
            return None;
        }
        if self.rank == 0 {
            return if v.norm() <= SPAN_TOL { Some(vec![]) } else { None };
        }
        let gram = self.gram();
        let rhs = self.columns.transpose() * v;
        let x = gram.lu().solve(&rhs)?;
        let recon = &self.columns * &x;
        let scale = v.norm().max(1.0);
        if (recon - v).norm() > SPAN_TOL * scale {
            return None;
        }
        let mut out = Vec::with_capacity(self.rank);
        for i in 0..self.rank {
            let r = x[i].round();
            if (x[i] - r).abs() > INTEGRALITY_TOL * x[i].abs().max(1.0) {
                return None;
            }
            out.push(r as i64);
        }
        Some(out)
    }

    /// Coefficient matrix of another basis whose columns must all be lattice
    /// points of `self`.
    pub fn coefficient_matrix(&self, sub: &LatticeBasis) -> Result<DMatrix<i64>> {
        if sub.ambient_dim != self.ambient_dim {
            return Err(Error::DimensionMismatch(
                "sublattice lives in a different ambient space".into(),
            ));
        }
        let mut x = DMatrix::zeros(self.rank, sub.rank);
        for j in 0..sub.rank {
            let col = sub.basis_vector(j);
            let coeffs = self.coefficients_of(&col).ok_or(Error::NotASublattice)?;
            for i in 0..self.rank {
                x[(i, j)] = coeffs[i];
            }
        }
        Ok(x)
    }

    /// Is `sub` a primitive sublattice (equal to the intersection of the
    /// lattice with its span)? Decided exactly on the integer coefficient
    /// matrix via Smith reduction.
    pub fn is_primitive_sublattice(&self, sub: &LatticeBasis) -> Result<bool> {
        if sub.rank == 0 {
            return Ok(true);
        }
        let x = self.coefficient_matrix(sub)?;
        let snf = smith_normal_form(&x);
        Ok(snf.is_primitive(sub.rank))
    }

    /// Smallest primitive sublattice containing the span of `coeffs`.
    pub fn saturation(&self, coeffs: &DMatrix<i64>) -> Result<LatticeBasis> {
        let snf = smith_normal_form(coeffs);
        self.sublattice(&snf.saturation_basis())
    }

    /// Projection of the lattice onto the orthogonal complement of a primitive
    /// sublattice, expressed in a rank-(d−k) orthonormal frame of that
    /// complement (intersected with our span). Satisfies
    /// det(L/L') = det(L)/det(L').
    pub fn quotient(&self, sub: &LatticeBasis) -> Result<LatticeBasis> {
        if sub.rank == 0 {
            // L/{0} = L, reframed to a full-rank coordinate system
            let q = orthonormal_columns(&self.columns, 1e-12);
            return LatticeBasis::new(q.transpose() * &self.columns);
        }
        if sub.rank == self.rank {
            if !self.is_primitive_sublattice(sub)? {
                return Err(Error::NotPrimitive);
            }
            return Ok(LatticeBasis::trivial(0));
        }
        let x = self.coefficient_matrix(sub)?;
        let snf = smith_normal_form(&x);
        if !snf.is_primitive(sub.rank) {
            return Err(Error::NotPrimitive);
        }
        let adapted = snf.adapted_basis().map(|v| v as f64);
        let b_adapted = &self.columns * adapted;
        let k = sub.rank;
        let rest = b_adapted.columns(k, self.rank - k).into_owned();
        let q_sub = orthonormal_columns(&sub.columns, 1e-12);
        let frame = orthonormal_complement_within(&self.columns, &q_sub, 1e-12);
        if frame.ncols() != self.rank - k {
            return Err(Error::DegenerateBasis { gram_det: 0.0 });
        }
        // project the completing vectors, then express them in the frame
        let mut proj = rest.clone();
        for j in 0..proj.ncols() {
            let mut col = proj.column(j).into_owned();
            for b in 0..q_sub.ncols() {
                let q = q_sub.column(b).into_owned();
                let c = q.dot(&col);
                col.axpy(-c, &q, 1.0);
            }
            proj.set_column(j, &col);
        }
        LatticeBasis::new(frame.transpose() * proj)
    }

    /// The lattice expressed in an orthonormal frame of its own span
    /// (ambient dimension becomes the rank). Geometry is unchanged.
    pub fn in_own_frame(&self) -> LatticeBasis {
        if self.rank == 0 {
            return LatticeBasis::trivial(0);
        }
        if self.rank == self.ambient_dim {
            return self.clone();
        }
        let q = orthonormal_columns(&self.columns, 1e-12);
        LatticeBasis::new(q.transpose() * &self.columns).expect("reframing preserves rank")
    }
}

// ---------------------------------------------------------------------------
// Gram matrix newtype
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GramMatrix(DMatrix<f64>);

impl GramMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch("Gram matrix must be square".into()));
        }
        if !crate::linalg::is_symmetric(&m, 1e-9) {
            return Err(Error::Domain("Gram matrix must be symmetric".into()));
        }
        if m.nrows() > 0 && m.clone().cholesky().is_none() {
            return Err(Error::Domain("Gram matrix must be positive definite".into()));
        }
        Ok(GramMatrix(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Max-abs entrywise distance, the metric used by recovery tests.
    pub fn distance(&self, other: &GramMatrix) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        let mut d = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                d = d.max((self.0[(i, j)] - other.0[(i, j)]).abs());
            }
        }
        d
    }
}

// ---------------------------------------------------------------------------
// JSON lattice files: {"ambient_dim": n, "rank": d, "basis": [[rows of B]]}
// with entries given as numbers or decimal strings.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LatticeFile {
    ambient_dim: usize,
    rank: usize,
    basis: Vec<Vec<Cell>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn value(&self) -> Result<f64> {
        match self {
            Cell::Num(x) => Ok(*x),
            Cell::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad numeric cell {s:?}: {e}"))),
        }
    }
}

impl LatticeBasis {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: LatticeFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.basis.len() != file.ambient_dim {
            return Err(Error::Parse(format!(
                "expected {} basis rows, found {}",
                file.ambient_dim,
                file.basis.len()
            )));
        }
        let mut cols = DMatrix::zeros(file.ambient_dim, file.rank);
        for (i, row) in file.basis.iter().enumerate() {
            if row.len() != file.rank {
                return Err(Error::Parse(format!(
                    "row {i} has {} entries, rank is {}",
                    row.len(),
                    file.rank
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                cols[(i, j)] = cell.value()?;
            }
        }
        if file.rank == 0 {
            return Ok(LatticeBasis::trivial(file.ambient_dim));
        }
        LatticeBasis::new(cols)
    }

    pub fn to_json(&self) -> String {
        let basis: Vec<Vec<Cell>> = (0..self.ambient_dim)
            .map(|i| (0..self.rank).map(|j| Cell::Num(self.columns[(i, j)])).collect())
            .collect();
        serde_json::to_string_pretty(&LatticeFile {
            ambient_dim: self.ambient_dim,
            rank: self.rank,
            basis,
        })
        .expect("lattice serialization cannot fail")
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
