//! Stability of unit-determinant lattices: minimal sublattice determinants,
//! stable/unstable verdicts, the contraction that maps a semi-stable lattice
//! onto a stable one, and detection of the stable-set boundary.
//!
//! A lattice is stable when det(L) = 1 and every sublattice has determinant
//! at least 1. The searches below are exhaustive over sublattices whose
//! successive minima fit inside the stated radius; within that family the
//! results are exact, and too-small radii surface as errors, never as silent
//! wrong answers.

use crate::context::Context;
use crate::enumerate::half_vectors_in_ball;
use crate::error::{Error, Result};
use crate::lattice::LatticeBasis;
use crate::linalg::{orthonormal_columns, orthonormal_complement_within, smith_normal_form};
use crate::reduce::{gram_schmidt, lll_reduce, DEFAULT_DELTA};
use nalgebra::{DMatrix, DVector};

/// Tolerance band around det = 1: equality surfaces are measure-zero but
/// ubiquitous in fixtures (Z^n, direct sums), so determinants this close to 1
/// count as exactly 1.
const UNIT_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVerdict {
    Stable,
    Unstable,
    NotUnitDet,
}

/// Minimal determinant over searched rank-k sublattices, with the sublattice
/// attaining it (saturated to primitivity).
#[derive(Debug, Clone)]
pub struct MinDetEntry {
    pub rank: usize,
    pub det: f64,
    pub attainer: LatticeBasis,
}

#[derive(Debug, Clone)]
pub struct StabilityCertificate {
    pub verdict: StabilityVerdict,
    /// A sublattice with determinant < 1 when the verdict is unstable.
    pub witness: Option<LatticeBasis>,
    /// One entry per rank k = 1..=n.
    pub min_dets: Vec<MinDetEntry>,
    /// Enumeration radius the verdict is based on.
    pub search_radius: f64,
}

#[derive(Debug, Clone)]
pub enum BoundaryVerdict {
    Interior,
    /// A proper primitive sublattice L' such that L' and L/L' are both stable.
    Boundary { witness: LatticeBasis },
    NotStable,
}

/// Hermite constants gamma_k for k <= 8 (exact); larger k fall back to
/// Hermite's bound gamma_k <= (4/3)^((k-1)/2). Used only as a pruning floor:
/// a rank-k lattice with shortest vector lambda has det >= (lambda^2/gamma_k)^(k/2).
fn hermite_constant(k: usize) -> f64 {
    const EXACT: [f64; 9] = [
        1.0,
        1.0,
        1.1547005383792515,
        1.2599210498948732,
        1.4142135623730951,
        1.5157165665103982,
        1.6653663553112063,
        1.8114473285278132,
        2.0,
    ];
    if k < EXACT.len() {
        EXACT[k]
    } else {
        (4.0f64 / 3.0).powf((k as f64 - 1.0) / 2.0)
    }
}

fn minkowski_floor(norm: f64, k: usize) -> f64 {
    (norm * norm / hermite_constant(k)).powf(k as f64 / 2.0)
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn coeffs_primitive(c: &[i64]) -> bool {
    c.iter().fold(0, |g, &x| gcd(g, x)) == 1
}

struct Candidate {
    norm: f64,
    coeffs: Vec<i64>,
}

/// One representative per +- pair, primitive coefficients only, sorted by
/// (norm, lexicographic coefficients) so ties resolve deterministically.
fn primitive_candidates(l: &LatticeBasis, radius: f64, ctx: &Context) -> Result<Vec<Candidate>> {
    let pts = half_vectors_in_ball(l, radius, ctx)?;
    Ok(pts
        .into_iter()
        .filter(|p| coeffs_primitive(&p.coeffs))
        .map(|p| Candidate {
            norm: p.norm_sq.sqrt(),
            coeffs: p.coeffs,
        })
        .collect())
}

/// Rank of the candidate set's embeddings (for the insufficient-radius check).
fn candidate_rank(l: &LatticeBasis, cands: &[Candidate]) -> usize {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in cands {
        let coeff = DVector::from_iterator(c.coeffs.len(), c.coeffs.iter().map(|&x| x as f64));
        let mut v = l.columns() * coeff;
        let orig = v.norm();
        for b in &basis {
            let dot = b.dot(&v);
            v.axpy(-dot, b, 1.0);
        }
        if v.norm() > 1e-9 * orig.max(1.0) {
            let n = v.norm();
            basis.push(v / n);
        }
        if basis.len() == l.rank() {
            break;
        }
    }
    basis.len()
}

/// Quotient of `l` by the primitive sublattice spanned by the coefficient
/// columns `sub_coeffs`, together with integer lifts: column j of the returned
/// matrix is a coefficient vector of `l` projecting onto basis vector j of the
/// quotient. The quotient lives in an orthonormal frame of span(L) ∩ span(sub)^⊥.
fn quotient_with_lift(
    l: &LatticeBasis,
    sub_coeffs: &DMatrix<i64>,
) -> Result<(LatticeBasis, DMatrix<i64>)> {
    let r = l.rank();
    let k = sub_coeffs.ncols();
    if k == 0 {
        return Ok((l.clone(), DMatrix::identity(r, r)));
    }
    let snf = smith_normal_form(sub_coeffs);
    if !snf.is_primitive(k) {
        return Err(Error::NotPrimitive);
    }
    let adapted = snf.adapted_basis();
    let lift = adapted.columns(k, r - k).into_owned();
    let sub_embed = l.columns() * adapted.columns(0, k).map(|x| x as f64);
    let q_sub = orthonormal_columns(&sub_embed, 1e-12);
    let frame = orthonormal_complement_within(l.columns(), &q_sub, 1e-12);
    if frame.ncols() != r - k {
        return Err(Error::DegenerateBasis { gram_det: 0.0 });
    }
    let mut rest = l.columns() * lift.map(|x| x as f64);
    for j in 0..rest.ncols() {
        let mut col = rest.column(j).into_owned();
        for _ in 0..2 {
            for b in 0..q_sub.ncols() {
                let q = q_sub.column(b).into_owned();
                let c = q.dot(&col);
                col.axpy(-c, &q, 1.0);
            }
        }
        rest.set_column(j, &col);
    }
    Ok((LatticeBasis::new(frame.transpose() * rest)?, lift))
}

/// Depth-first minimum over rank-k sublattices reachable from vectors of norm
/// <= radius. Each branch fixes a primitive vector v (the would-be shortest
/// vector of the minimizer) and recurses into L/v; the branch value
/// ‖v‖ · det(minimizer of quotient) equals the determinant of an actual
/// primitive sublattice, so the running best is always an upper bound for the
/// true minimum and the Minkowski floor prunes soundly.
fn search_min_det(
    l: &LatticeBasis,
    k: usize,
    radius: f64,
    prefix: f64,
    best: &mut f64,
    ctx: &Context,
) -> Result<Option<(f64, Vec<DVector<i64>>)>> {
    let cands = primitive_candidates(l, radius, ctx)?;
    if k == 1 {
        let Some(first) = cands.first() else {
            return Ok(None);
        };
        *best = best.min(prefix * first.norm);
        return Ok(Some((
            first.norm,
            vec![DVector::from_vec(first.coeffs.clone())],
        )));
    }
    let mut local: Option<(f64, Vec<DVector<i64>>)> = None;
    for v in &cands {
        if prefix * minkowski_floor(v.norm, k) > *best + 1e-12 {
            break;
        }
        let coeff_col = DMatrix::from_vec(v.coeffs.len(), 1, v.coeffs.clone());
        let (q, lift) = quotient_with_lift(l, &coeff_col)?;
        let Some((dq, gens_q)) = search_min_det(&q, k - 1, radius, prefix * v.norm, best, ctx)?
        else {
            continue;
        };
        let det = v.norm * dq;
        if local.as_ref().is_none_or(|(d, _)| det < d - 1e-12) {
            let mut gens = vec![DVector::from_vec(v.coeffs.clone())];
            for g in &gens_q {
                gens.push(&lift * g);
            }
            local = Some((det, gens));
        }
    }
    Ok(local)
}

/// Minimum determinant over primitive rank-k sublattices generated by k
/// independent vectors of norm <= search_radius, together with the attaining
/// sublattice. Exact whenever the true minimizer's successive minima all fit
/// within the radius; fewer than k independent vectors in the ball is an
/// insufficient-radius error.
pub fn min_sublattice_det(
    l: &LatticeBasis,
    k: usize,
    search_radius: f64,
    ctx: &Context,
) -> Result<(f64, LatticeBasis)> {
    let n = l.rank();
    if k == 0 || k > n {
        return Err(Error::Domain(format!(
            "sublattice rank {k} out of range 1..={n}"
        )));
    }
    if !(search_radius > 0.0) {
        return Err(Error::Domain(format!(
            "search radius must be positive, got {search_radius}"
        )));
    }
    let cands = primitive_candidates(l, search_radius, ctx)?;
    let found = candidate_rank(l, &cands);
    if found < k {
        return Err(Error::InsufficientRadius {
            radius: search_radius,
            found,
            needed: k,
        });
    }
    if k == n {
        return Ok((l.determinant(), l.clone()));
    }
    let mut best = seed_upper_bound(l, &cands, k);
    let result = search_min_det(l, k, search_radius, 1.0, &mut best, ctx)?
        .expect("candidate rank was checked, so a complete selection exists");
    let (_, gens) = result;
    let mut coeffs = DMatrix::zeros(n, k);
    for (j, g) in gens.iter().enumerate() {
        coeffs.set_column(j, g);
    }
    let attainer = l.saturation(&coeffs)?;
    Ok((attainer.determinant(), attainer))
}

/// Determinant of the sublattice spanned by the first k independent
/// candidates: a cheap valid upper bound that lets pruning bite immediately.
fn seed_upper_bound(l: &LatticeBasis, cands: &[Candidate], k: usize) -> f64 {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut det = 1.0;
    for c in cands {
        let coeff = DVector::from_iterator(c.coeffs.len(), c.coeffs.iter().map(|&x| x as f64));
        let mut v = l.columns() * coeff;
        for b in &basis {
            let dot = b.dot(&v);
            v.axpy(-dot, b, 1.0);
        }
        let r = v.norm();
        if r > 1e-9 * c.norm.max(1.0) {
            det *= r;
            basis.push(v / r);
        }
        if basis.len() == k {
            return det;
        }
    }
    f64::INFINITY
}

/// Enumeration radius for stability scans: any minimal sublattice at desk
/// scale admits a generating set inside max(sqrt(n), 2 * max Gram-Schmidt norm
/// of the reduced basis).
pub fn stability_search_radius(l: &LatticeBasis) -> Result<f64> {
    if l.rank() == 0 {
        return Ok(1.0);
    }
    let red = lll_reduce(l, DEFAULT_DELTA)?;
    let (star_sq, _) = gram_schmidt(red.basis.columns());
    let max_gs = star_sq.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt();
    Ok((l.rank() as f64).sqrt().max(2.0 * max_gs))
}

fn scan_min_dets(l: &LatticeBasis, radius: f64, ctx: &Context) -> Result<Vec<MinDetEntry>> {
    let n = l.rank();
    let mut out = Vec::with_capacity(n);
    for k in 1..n {
        let (det, attainer) = min_sublattice_det(l, k, radius, ctx)?;
        out.push(MinDetEntry { rank: k, det, attainer });
    }
    if n > 0 {
        out.push(MinDetEntry {
            rank: n,
            det: l.determinant(),
            attainer: l.clone(),
        });
    }
    Ok(out)
}

/// Stability verdict with the per-rank minimal determinants backing it.
pub fn is_stable(l: &LatticeBasis, ctx: &Context) -> Result<StabilityCertificate> {
    let n = l.rank();
    let radius = stability_search_radius(l)?;
    let min_dets = scan_min_dets(l, radius, ctx)?;
    if n == 0 {
        return Ok(StabilityCertificate {
            verdict: StabilityVerdict::Stable,
            witness: None,
            min_dets,
            search_radius: radius,
        });
    }
    let det = l.determinant();
    if (det - 1.0).abs() > ctx.unit_det_tol {
        return Ok(StabilityCertificate {
            verdict: StabilityVerdict::NotUnitDet,
            witness: None,
            min_dets,
            search_radius: radius,
        });
    }
    let worst = min_dets[..n - 1]
        .iter()
        .min_by(|a, b| a.det.total_cmp(&b.det));
    if let Some(entry) = worst {
        if entry.det < 1.0 - UNIT_BAND {
            return Ok(StabilityCertificate {
                verdict: StabilityVerdict::Unstable,
                witness: Some(entry.attainer.clone()),
                min_dets,
                search_radius: radius,
            });
        }
    }
    Ok(StabilityCertificate {
        verdict: StabilityVerdict::Stable,
        witness: None,
        min_dets,
        search_radius: radius,
    })
}

/// Smallest det(L')^(1/rank') over nonzero sublattices L' of q, with the
/// attainer. Drives the contraction step size.
fn contraction_factor(q: &LatticeBasis, ctx: &Context) -> Result<(f64, LatticeBasis)> {
    let radius = stability_search_radius(q)?;
    let entries = scan_min_dets(q, radius, ctx)?;
    let best = entries
        .iter()
        .min_by(|a, b| {
            let fa = a.det.powf(1.0 / a.rank as f64);
            let fb = b.det.powf(1.0 / b.rank as f64);
            fa.total_cmp(&fb)
        })
        .expect("quotient has positive rank");
    Ok((
        best.det.powf(1.0 / best.rank as f64),
        best.attainer.clone(),
    ))
}

/// Maps a lattice all of whose sublattices have determinant >= 1 onto a
/// stable lattice via a linear contraction A (operator norm <= 1): repeatedly
/// fix the maximal-rank determinant-1 sublattice L1 and shrink its orthogonal
/// complement by the smallest normalized determinant among extensions of L1.
/// Returns (A·L, A). Stable inputs return unchanged with A = identity.
pub fn stabilize(l: &LatticeBasis, ctx: &Context) -> Result<(LatticeBasis, DMatrix<f64>)> {
    let n = l.rank();
    if n != l.ambient_dim() {
        return Err(Error::Domain(
            "stabilization requires a full-rank lattice".into(),
        ));
    }
    if n == 0 {
        return Ok((l.clone(), DMatrix::identity(0, 0)));
    }
    let mut cur = l.clone();
    let mut a_total: DMatrix<f64> = DMatrix::identity(n, n);
    // coefficient columns of the current maximal-rank det-1 sublattice;
    // integer coefficients stay valid across the linear rescalings below
    let mut l1_coeffs: DMatrix<i64> = DMatrix::zeros(n, 0);

    for iteration in 0..=(2 * n + 1) {
        let radius = stability_search_radius(&cur)?;
        let min_dets = scan_min_dets(&cur, radius, ctx)?;
        if let Some(bad) = min_dets
            .iter()
            .min_by(|a, b| a.det.total_cmp(&b.det))
            .filter(|e| e.det < 1.0 - UNIT_BAND)
        {
            if iteration == 0 {
                return Err(Error::NotSemiStable {
                    rank: bad.rank,
                    det: bad.det,
                });
            }
            return Err(Error::StabilizationFailed(format!(
                "semi-stability lost during contraction: rank-{} determinant {:.12}",
                bad.rank, bad.det
            )));
        }
        if (cur.determinant() - 1.0).abs() <= ctx.unit_det_tol {
            // semi-stable with unit determinant is exactly stability
            return Ok((cur, a_total));
        }
        if let Some(entry) = min_dets
            .iter()
            .rev()
            .filter(|e| e.rank < n && e.det <= 1.0 + UNIT_BAND)
            .next()
        {
            if entry.rank > l1_coeffs.ncols() {
                l1_coeffs = cur.coefficient_matrix(&entry.attainer)?;
            }
        }
        let k = l1_coeffs.ncols();
        let (quot, lift) = quotient_with_lift(&cur, &l1_coeffs)?;
        let (t, att) = contraction_factor(&quot, ctx)?;
        let att_coeffs = quot.coefficient_matrix(&att)?;
        let lifted = &lift * &att_coeffs;
        let mut joined = DMatrix::zeros(n, k + lifted.ncols());
        joined.view_mut((0, 0), (n, k)).copy_from(&l1_coeffs);
        joined
            .view_mut((0, k), (n, lifted.ncols()))
            .copy_from(&lifted);
        if t <= 1.0 + UNIT_BAND {
            // a det-1 extension escaped the direct scan (radius mismatch
            // between L and the quotient); absorb it and rescan
            let promoted = cur.saturation(&joined)?;
            l1_coeffs = cur.coefficient_matrix(&promoted)?;
            continue;
        }
        let proj = if k == 0 {
            DMatrix::zeros(n, n)
        } else {
            let sub_embed = cur.columns() * l1_coeffs.map(|x| x as f64);
            let q1 = orthonormal_columns(&sub_embed, 1e-12);
            &q1 * q1.transpose()
        };
        let a_step = &proj + (DMatrix::identity(n, n) - &proj) / t;
        cur = cur.apply_transform(&a_step)?;
        a_total = &a_step * a_total;
        // after the rescale the chosen extension has determinant 1
        let promoted = cur.saturation(&joined)?;
        l1_coeffs = cur.coefficient_matrix(&promoted)?;
    }
    Err(Error::StabilizationFailed(
        "contraction did not terminate within the rank bound".into(),
    ))
}

/// Locates a stable lattice relative to the boundary of the stable set: on
/// the boundary iff some proper primitive sublattice L' has determinant 1, in
/// which case L' and L/L' are themselves stable and L' is returned as witness.
pub fn on_stable_boundary(l: &LatticeBasis, ctx: &Context) -> Result<BoundaryVerdict> {
    let cert = is_stable(l, ctx)?;
    if cert.verdict != StabilityVerdict::Stable {
        return Ok(BoundaryVerdict::NotStable);
    }
    let n = l.rank();
    if n < 2 {
        return Ok(BoundaryVerdict::Interior);
    }
    for entry in &cert.min_dets[..n - 1] {
        if entry.det <= 1.0 + UNIT_BAND {
            return Ok(BoundaryVerdict::Boundary {
                witness: entry.attainer.clone(),
            });
        }
    }
    Ok(BoundaryVerdict::Interior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summation::zeta_prime_direct;

    fn ctx() -> Context {
        Context::default()
    }

    #[test]
    fn min_det_reference_values() {
        let z3 = LatticeBasis::standard(3);
        let (d, att) = min_sublattice_det(&z3, 2, 1.5, &ctx()).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert_eq!(att.rank(), 2);
        assert!(z3.is_primitive_sublattice(&att).unwrap());

        let squeezed = LatticeBasis::diagonal(&[0.5, 2.0]).unwrap();
        let (d, att) = min_sublattice_det(&squeezed, 1, 1.0, &ctx()).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert!((att.determinant() - 0.5).abs() < 1e-12);

        let hex = LatticeBasis::hexagonal_unit_det();
        let (d, _) = min_sublattice_det(&hex, 1, 1.2, &ctx()).unwrap();
        let expect = 2f64.sqrt() / 3f64.powf(0.25);
        assert!((d - expect).abs() < 1e-12, "got {d}, want {expect}");

        let (d, att) = min_sublattice_det(&z3, 3, 2.0, &ctx()).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert_eq!(att.rank(), 3);
    }

    #[test]
    fn min_det_sees_skewed_dense_plane() {
        let cols = DMatrix::from_column_slice(
            3,
            3,
            &[1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 2.0],
        );
        let l = LatticeBasis::new(cols).unwrap();
        let (d, att) = min_sublattice_det(&l, 2, 2.5, &ctx()).unwrap();
        assert!((d - 0.5).abs() < 1e-12, "got {d}");
        assert_eq!(att.rank(), 2);
        assert!((att.determinant() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn min_det_insufficient_radius() {
        let squeezed = LatticeBasis::diagonal(&[0.5, 2.0]).unwrap();
        match min_sublattice_det(&squeezed, 2, 1.0, &ctx()) {
            Err(Error::InsufficientRadius { found, needed, .. }) => {
                assert_eq!(found, 1);
                assert_eq!(needed, 2);
            }
            other => panic!("expected insufficient radius, got {other:?}"),
        }
        assert!(matches!(
            min_sublattice_det(&squeezed, 3, 1.0, &ctx()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn stability_verdicts() {
        for n in 1..=4 {
            let cert = is_stable(&LatticeBasis::standard(n), &ctx()).unwrap();
            assert_eq!(cert.verdict, StabilityVerdict::Stable, "Z^{n}");
            assert_eq!(cert.min_dets.len(), n);
            for (k, e) in cert.min_dets.iter().enumerate() {
                assert_eq!(e.rank, k + 1);
                assert!((e.det - 1.0).abs() < 1e-12);
            }
        }

        let squeezed = LatticeBasis::diagonal(&[0.5, 2.0]).unwrap();
        let cert = is_stable(&squeezed, &ctx()).unwrap();
        assert_eq!(cert.verdict, StabilityVerdict::Unstable);
        let witness = cert.witness.expect("unstable verdict carries a witness");
        assert!(witness.determinant() < 1.0 - 1e-9);
        assert!((witness.determinant() - 0.5).abs() < 1e-12);

        let cert = is_stable(&LatticeBasis::diagonal(&[1.0, 4.0]).unwrap(), &ctx()).unwrap();
        assert_eq!(cert.verdict, StabilityVerdict::NotUnitDet);

        let cert = is_stable(&LatticeBasis::hexagonal_unit_det(), &ctx()).unwrap();
        assert_eq!(cert.verdict, StabilityVerdict::Stable);
    }

    #[test]
    fn direct_sums_of_stable_lattices_are_stable() {
        let hex = LatticeBasis::hexagonal_unit_det();
        let z2 = LatticeBasis::standard(2);
        for sum in [hex.direct_sum(&z2), hex.direct_sum(&hex)] {
            let cert = is_stable(&sum, &ctx()).unwrap();
            assert_eq!(cert.verdict, StabilityVerdict::Stable);
        }
    }

    #[test]
    fn stabilize_recovers_cubic_lattices() {
        let (out, a) = stabilize(&LatticeBasis::diagonal(&[1.0, 4.0]).unwrap(), &ctx()).unwrap();
        let gram = out.gram_matrix();
        assert!(gram.distance(&LatticeBasis::standard(2).gram_matrix()) < 1e-9);
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.25]));
        assert!((a - expect).norm() < 1e-9);

        let (out, a) = stabilize(&LatticeBasis::diagonal(&[1.0, 2.0, 2.0]).unwrap(), &ctx()).unwrap();
        assert!(gram_distance_to_standard(&out) < 1e-9);
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5, 0.5]));
        assert!((a - expect).norm() < 1e-9);
    }

    fn gram_distance_to_standard(l: &LatticeBasis) -> f64 {
        l.gram_matrix()
            .distance(&LatticeBasis::standard(l.rank()).gram_matrix())
    }

    #[test]
    fn stabilize_is_idempotent_on_stable_inputs() {
        for l in [LatticeBasis::standard(3), LatticeBasis::hexagonal_unit_det()] {
            let (out, a) = stabilize(&l, &ctx()).unwrap();
            assert!((a - DMatrix::identity(l.rank(), l.rank())).norm() < 1e-12);
            assert!(out.gram_matrix().distance(&l.gram_matrix()) < 1e-12);
        }
    }

    #[test]
    fn stabilize_rejects_dense_sublattices() {
        let squeezed = LatticeBasis::diagonal(&[0.5, 2.0]).unwrap();
        match stabilize(&squeezed, &ctx()) {
            Err(Error::NotSemiStable { rank, det }) => {
                assert_eq!(rank, 1);
                assert!((det - 0.5).abs() < 1e-12);
            }
            other => panic!("expected not-semi-stable, got {other:?}"),
        }
    }

    fn rotation3(a: f64, b: f64) -> DMatrix<f64> {
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
        r1 * r2
    }

    #[test]
    fn stabilize_contracts_and_zeta_grows() {
        let rot = rotation3(0.7, -0.4);
        let base = LatticeBasis::diagonal(&[1.0, 2.0, 2.0]).unwrap();
        let l = base.apply_transform(&rot).unwrap();
        let (out, a) = stabilize(&l, &ctx()).unwrap();
        let cert = is_stable(&out, &ctx()).unwrap();
        assert_eq!(cert.verdict, StabilityVerdict::Stable);

        for i in 0..100 {
            let x = DVector::from_vec(vec![
                (0.37 * i as f64 + 0.11).cos(),
                (0.53 * i as f64 + 1.9).sin(),
                (0.91 * i as f64).cos(),
            ]);
            let x = &x / x.norm();
            assert!((&a * &x).norm() <= 1.0 + 1e-9);
        }

        let c = ctx();
        let before = zeta_prime_direct(&l, 2.5, 0.0, 1e-9, &c).unwrap().value;
        let after = zeta_prime_direct(&out, 2.5, 0.0, 1e-9, &c).unwrap().value;
        assert!(after >= before - 1e-9, "before {before}, after {after}");
    }

    #[test]
    fn boundary_location() {
        for n in [2usize, 4] {
            match on_stable_boundary(&LatticeBasis::standard(n), &ctx()).unwrap() {
                BoundaryVerdict::Boundary { witness } => {
                    assert!(witness.rank() >= 1 && witness.rank() < n);
                    assert!((witness.determinant() - 1.0).abs() < 1e-9);
                }
                other => panic!("Z^{n} should sit on the boundary, got {other:?}"),
            }
        }
        assert!(matches!(
            on_stable_boundary(&LatticeBasis::hexagonal_unit_det(), &ctx()).unwrap(),
            BoundaryVerdict::Interior
        ));
        assert!(matches!(
            on_stable_boundary(&LatticeBasis::diagonal(&[0.5, 2.0]).unwrap(), &ctx()).unwrap(),
            BoundaryVerdict::NotStable
        ));
        assert!(matches!(
            on_stable_boundary(&LatticeBasis::standard(1), &ctx()).unwrap(),
            BoundaryVerdict::Interior
        ));
    }
}
