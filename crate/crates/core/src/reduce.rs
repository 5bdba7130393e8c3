//! Floating-point LLL reduction with unimodular transform tracking.
//!
//! Reduction quality only affects enumeration speed and numerical margins,
//! never correctness of the set of enumerated points, so plain f64 arithmetic
//! with delta = 0.99 is enough here.

use crate::error::Result;
use crate::lattice::LatticeBasis;
use nalgebra::DMatrix;

pub const DEFAULT_DELTA: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct Reduction {
    /// Reduced basis, equal to original · transform.
    pub basis: LatticeBasis,
    /// Unimodular coefficient matrix (det ±1).
    pub transform: DMatrix<i64>,
}

/// Gram-Schmidt data of a column basis: squared star norms and the mu
/// coefficients (mu[(i,j)] for j < i).
pub fn gram_schmidt(cols: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let d = cols.ncols();
    let mut star: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(d);
    let mut star_sq = vec![0.0; d];
    let mut mu = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut v = cols.column(i).into_owned();
        for j in 0..i {
            let m = if star_sq[j] > 0.0 {
                cols.column(i).dot(&star[j]) / star_sq[j]
            } else {
                0.0
            };
            mu[(i, j)] = m;
            v.axpy(-m, &star[j], 1.0);
        }
        star_sq[i] = v.norm_squared();
        star.push(v);
    }
    (star_sq, mu)
}

pub fn lll_reduce(l: &LatticeBasis, delta: f64) -> Result<Reduction> {
    let d = l.rank();
    let mut cols = l.columns().clone();
    let mut u: DMatrix<i64> = DMatrix::identity(d, d);
    if d <= 1 {
        return Ok(Reduction {
            basis: if d == 0 { l.clone() } else { LatticeBasis::new(cols)? },
            transform: u,
        });
    }

    let (mut star_sq, mut mu) = gram_schmidt(&cols);
    let mut k = 1usize;
    let mut steps = 0u64;
    let cap = 200_000u64 * (d as u64) * (d as u64);
    while k < d {
        steps += 1;
        if steps > cap {
            break; // rounding stalemate; current basis is still valid
        }
        // size-reduce column k against all earlier columns
        for j in (0..k).rev() {
            let r = mu[(k, j)].round();
            if r != 0.0 && r.abs() < 9.0e15 {
                let ri = r as i64;
                let cj = cols.column(j).into_owned();
                {
                    let mut ck = cols.column_mut(k);
                    ck.axpy(-r, &cj, 1.0);
                }
                for row in 0..d {
                    u[(row, k)] -= ri.saturating_mul(u[(row, j)]);
                }
                for t in 0..j {
                    mu[(k, t)] -= r * mu[(j, t)];
                }
                mu[(k, j)] -= r;
            }
        }
        // Lovasz condition between k-1 and k
        if star_sq[k] >= (delta - mu[(k, k - 1)] * mu[(k, k - 1)]) * star_sq[k - 1] {
            k += 1;
        } else {
            cols.swap_columns(k - 1, k);
            u.swap_columns(k - 1, k);
            let (s, m) = gram_schmidt(&cols);
            star_sq = s;
            mu = m;
            k = k.max(2) - 1;
            if k == 0 {
                k = 1;
            }
        }
    }

    Ok(Reduction {
        basis: LatticeBasis::new(cols)?,
        transform: u,
    })
}
