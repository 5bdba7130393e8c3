//! Orthogonal decomposition into indecomposable direct summands, and the
//! Z^n recognizer built on it.
//!
//! The algorithm works relative to a generating set V of short lattice
//! vectors: connected components of V under "inner product is nonzero" span
//! pairwise orthogonal sublattices, and when V generates the whole lattice
//! those components assemble into a genuine direct-sum splitting. That
//! direction is sound unconditionally; completeness (components as fine as
//! the true indecomposable splitting) holds when the radius is small enough
//! to exclude mixed vectors, which covers the fixtures in this suite.

use crate::context::Context;
use crate::enumerate::half_vectors_in_ball;
use crate::error::{Error, Result};
use crate::lattice::LatticeBasis;
use crate::linalg::smith_normal_form;
use crate::reduce::{lll_reduce, DEFAULT_DELTA};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    /// Indecomposable summands, each expressed in its own coordinate frame.
    pub summands: Vec<LatticeBasis>,
    /// Orthogonal matrix mapping the block-diagonal direct sum of `summands`
    /// onto the input lattice.
    pub assembly: DMatrix<f64>,
    /// True when the generating set provably spanned the input lattice.
    pub certified: bool,
}

/// Orthogonality threshold for the component graph: inner products below
/// this (relative to the vector norms) count as zero.
const ORTHO_TOL: f64 = 1e-9;

/// Splits the lattice into orthogonal summands using the vectors of norm
/// <= generating_radius. Those vectors must generate the lattice (checked via
/// the integer span's elementary divisors); otherwise the radius is reported
/// as insufficient.
pub fn decompose(
    l: &LatticeBasis,
    generating_radius: f64,
    ctx: &Context,
) -> Result<DecompositionResult> {
    let n = l.rank();
    if n == 0 || n != l.ambient_dim() {
        return Err(Error::Domain(
            "decomposition requires a full-rank lattice".into(),
        ));
    }
    if !(generating_radius > 0.0) {
        return Err(Error::Domain(format!(
            "generating radius must be positive, got {generating_radius}"
        )));
    }
    let pts = half_vectors_in_ball(l, generating_radius, ctx)?;

    // generation check: the integer span of V must be all of Z^n in
    // coefficient space, i.e. every elementary divisor is 1
    let mut coeff_mat = DMatrix::zeros(n, pts.len());
    for (j, p) in pts.iter().enumerate() {
        for i in 0..n {
            coeff_mat[(i, j)] = p.coeffs[i];
        }
    }
    let snf = smith_normal_form(&coeff_mat);
    if !snf.is_primitive(n) {
        let generated = (0..snf.rank())
            .filter(|&j| snf.diag[j].abs() == 1)
            .count();
        return Err(Error::InsufficientRadius {
            radius: generating_radius,
            found: generated,
            needed: n,
        });
    }

    // connected components under <u,v> != 0; vectors come sorted by
    // (norm, coefficients), so component ids follow first appearance and the
    // output order is deterministic
    let m = pts.len();
    let mut component = vec![usize::MAX; m];
    let mut next_id = 0usize;
    for start in 0..m {
        if component[start] != usize::MAX {
            continue;
        }
        let id = next_id;
        next_id += 1;
        let mut queue = vec![start];
        component[start] = id;
        while let Some(i) = queue.pop() {
            for j in 0..m {
                if component[j] != usize::MAX {
                    continue;
                }
                let dot = pts[i].embedding.dot(&pts[j].embedding);
                let scale = (pts[i].norm_sq * pts[j].norm_sq).sqrt();
                if dot.abs() > ORTHO_TOL * scale {
                    component[j] = id;
                    queue.push(j);
                }
            }
        }
    }

    let mut summands = Vec::with_capacity(next_id);
    let mut assembly = DMatrix::zeros(n, n);
    let mut col_at = 0usize;
    for id in 0..next_id {
        let members: Vec<usize> = (0..m).filter(|&i| component[i] == id).collect();
        let mut comp_coeffs = DMatrix::zeros(n, members.len());
        for (j, &i) in members.iter().enumerate() {
            for row in 0..n {
                comp_coeffs[(row, j)] = pts[i].coeffs[row];
            }
        }
        let span = smith_normal_form(&comp_coeffs).column_span_basis();
        let sub = l.sublattice(&span)?;
        let frame = crate::linalg::orthonormal_columns(sub.columns(), 1e-12);
        if frame.ncols() != sub.rank() {
            return Err(Error::DegenerateBasis { gram_det: 0.0 });
        }
        let own = LatticeBasis::new(frame.transpose() * sub.columns())?;
        assembly
            .view_mut((0, col_at), (n, own.rank()))
            .copy_from(&frame);
        col_at += own.rank();
        summands.push(own);
    }
    debug_assert_eq!(col_at, n);

    let gram_gap = (assembly.transpose() * &assembly - DMatrix::identity(n, n)).norm();
    if gram_gap > 1e-9 {
        return Err(Error::Domain(format!(
            "summand spans overlap: assembly deviates from orthogonality by {gram_gap:.3e}"
        )));
    }
    let det_product: f64 = summands.iter().map(|s| s.determinant()).product();
    if (det_product - l.determinant()).abs() > 1e-9 * l.determinant() {
        return Err(Error::Domain(format!(
            "summand determinants multiply to {det_product}, lattice has {}",
            l.determinant()
        )));
    }

    Ok(DecompositionResult {
        summands,
        assembly,
        certified: true,
    })
}

/// Radius that always admits a generating set: the longest vector of a
/// reduced basis.
pub fn default_generating_radius(l: &LatticeBasis) -> Result<f64> {
    let red = lll_reduce(l, DEFAULT_DELTA)?;
    let mut r: f64 = 0.0;
    for j in 0..red.basis.rank() {
        r = r.max(red.basis.basis_vector(j).norm());
    }
    Ok(r)
}

/// decompose with the default radius, doubling it once if the first attempt
/// cannot certify generation.
pub fn decompose_auto(l: &LatticeBasis, ctx: &Context) -> Result<DecompositionResult> {
    let radius = default_generating_radius(l)?;
    match decompose(l, radius, ctx) {
        Err(Error::InsufficientRadius { .. }) => decompose(l, 2.0 * radius, ctx),
        other => other,
    }
}

/// True exactly when the lattice splits into rank-1 summands of determinant 1,
/// i.e. when it is a rotation of Z^n.
pub fn is_isomorphic_to_zn(l: &LatticeBasis, ctx: &Context) -> Result<bool> {
    let d = decompose_auto(l, ctx)?;
    Ok(d.summands.len() == l.rank()
        && d.summands
            .iter()
            .all(|s| s.rank() == 1 && (s.determinant() - 1.0).abs() <= 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::enumerate_vectors;
    use nalgebra::DVector;

    fn ctx() -> Context {
        Context::default()
    }

    #[test]
    fn standard_lattice_splits_into_axes() {
        for n in 1..=6 {
            let l = LatticeBasis::standard(n);
            let d = decompose(&l, 1.0, &ctx()).unwrap();
            assert_eq!(d.summands.len(), n, "Z^{n}");
            for s in &d.summands {
                assert_eq!(s.rank(), 1);
                assert!((s.determinant() - 1.0).abs() < 1e-12);
            }
            assert!(d.certified);
            assert!(is_isomorphic_to_zn(&l, &ctx()).unwrap());
        }
    }

    #[test]
    fn hexagonal_lattice_is_indecomposable() {
        let hex = LatticeBasis::hexagonal_unit_det();
        let d = decompose(&hex, 1.2, &ctx()).unwrap();
        assert_eq!(d.summands.len(), 1);
        assert_eq!(d.summands[0].rank(), 2);
        assert!(!is_isomorphic_to_zn(&hex, &ctx()).unwrap());
    }

    #[test]
    fn rectangular_lattice_splits_with_dets() {
        let l = LatticeBasis::diagonal(&[1.0, 2.0]).unwrap();
        let d = decompose(&l, 2.0, &ctx()).unwrap();
        assert_eq!(d.summands.len(), 2);
        let mut dets: Vec<f64> = d.summands.iter().map(|s| s.determinant()).collect();
        dets.sort_by(f64::total_cmp);
        assert!((dets[0] - 1.0).abs() < 1e-12);
        assert!((dets[1] - 2.0).abs() < 1e-12);
        assert!(!is_isomorphic_to_zn(&l, &ctx()).unwrap());
    }

    #[test]
    fn rotated_square_sublattice_splits() {
        // Z(2,0) + Z(1,1) is sqrt(2) * (Z^2 rotated 45 degrees)
        let cols = DMatrix::from_column_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
        let l = LatticeBasis::new(cols).unwrap();
        let d = decompose_auto(&l, &ctx()).unwrap();
        assert_eq!(d.summands.len(), 2);
        for s in &d.summands {
            assert!((s.determinant() - 2f64.sqrt()).abs() < 1e-12);
        }
        assert!(!is_isomorphic_to_zn(&l, &ctx()).unwrap());
    }

    #[test]
    fn recognizes_rotated_standard_lattice() {
        let a = 0.6f64;
        let b = -1.1f64;
        let mut r1: DMatrix<f64> = DMatrix::identity(3, 3);
        r1[(0, 0)] = a.cos();
        r1[(0, 1)] = -a.sin();
        r1[(1, 0)] = a.sin();
        r1[(1, 1)] = a.cos();
        let mut r2: DMatrix<f64> = DMatrix::identity(3, 3);
        r2[(1, 1)] = b.cos();
        r2[(1, 2)] = -b.sin();
        r2[(2, 1)] = b.sin();
        r2[(2, 2)] = b.cos();
        let l = LatticeBasis::standard(3)
            .apply_transform(&(r1 * r2))
            .unwrap();
        assert!(is_isomorphic_to_zn(&l, &ctx()).unwrap());
        assert!(!is_isomorphic_to_zn(
            &LatticeBasis::diagonal(&[1.0, 1.0, 2.0]).unwrap(),
            &ctx()
        )
        .unwrap());
    }

    #[test]
    fn insufficient_radius_is_reported() {
        match decompose(&LatticeBasis::standard(2), 0.5, &ctx()) {
            Err(Error::InsufficientRadius { found, needed, .. }) => {
                assert_eq!(found, 0);
                assert_eq!(needed, 2);
            }
            other => panic!("expected insufficient radius, got {other:?}"),
        }
    }

    #[test]
    fn recomposition_matches_input() {
        // diagonal entries close to the hexagonal minimum keep every mixed
        // vector longer than the generating radius, so the splitting is finest
        let hex = LatticeBasis::hexagonal_unit_det();
        let rect = LatticeBasis::diagonal(&[1.9, 2.1]).unwrap();
        let l = hex.direct_sum(&rect);
        let d = decompose_auto(&l, &ctx()).unwrap();
        assert_eq!(d.summands.len(), 3);

        let mut block = LatticeBasis::trivial(0);
        for s in &d.summands {
            block = block.direct_sum(s);
        }
        let recomposed = block.apply_transform(&d.assembly).unwrap();
        assert!((recomposed.determinant() - l.determinant()).abs() < 1e-9);

        let lam1 = crate::enumerate::lambda1(&l, &ctx()).unwrap();
        for v in enumerate_vectors(&l, 2.0 * lam1, &ctx()).unwrap() {
            let emb: DVector<f64> = v.embedding.clone();
            assert!(
                recomposed.coefficients_of(&emb).is_some(),
                "input vector missing from recomposed lattice"
            );
        }
        for v in enumerate_vectors(&recomposed, 2.0 * lam1, &ctx()).unwrap() {
            let emb: DVector<f64> = v.embedding.clone();
            assert!(
                l.coefficients_of(&emb).is_some(),
                "recomposed vector missing from input lattice"
            );
        }
    }
}
