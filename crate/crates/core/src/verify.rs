//! Batch verification harness: seeded random stable lattices, margin
//! reports for ζ′_q(L, s) ≤ ζ′_q(Zⁿ, s) over stable L, and the reduction
//! from semi-stable inputs to stable ones by the contracting rescale.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::context::Context;
use crate::decompose::is_isomorphic_to_zn;
use crate::error::{Error, Result};
use crate::lattice::LatticeBasis;
use crate::stability::{is_stable, stabilize, StabilityVerdict};
use crate::summation::zeta_prime_auto;

const EVAL_REL_TOL: f64 = 1e-10;

/// Proven q-range endpoint for rank n at exponent s.
pub fn q_upper_bound(n: usize, s: f64) -> f64 {
    (2.0 * s - n as f64) / (n as f64 + 2.0)
}

fn gaussian_matrix(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample(StandardNormal))
}

/// A random stable unit-determinant lattice: a Gaussian basis is
/// determinant-normalized, rescaled up so every sublattice determinant
/// reaches 1, then driven to the stable set by `stabilize`. Deterministic
/// in (n, seed); inconclusive attempts resample on a fresh stream.
pub fn random_stable_lattice(n: usize, seed: u64, ctx: &Context) -> Result<LatticeBasis> {
    if n == 0 || n > 8 {
        return Err(Error::Range(format!(
            "random stable lattices cover ranks 1..=8, got {n}"
        )));
    }
    let mut last = Error::StabilizationFailed("no attempt ran".into());
    for attempt in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        match try_stable_sample(n, &mut rng, ctx) {
            Ok(l) => return Ok(l),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn try_stable_sample(n: usize, rng: &mut ChaCha8Rng, ctx: &Context) -> Result<LatticeBasis> {
    let mut b = gaussian_matrix(n, rng);
    let det = b.clone().lu().determinant().abs();
    if !(det > 1e-6) {
        return Err(Error::DegenerateBasis { gram_det: det * det });
    }
    b /= det.powf(1.0 / n as f64);
    let l = LatticeBasis::new(b)?;

    // lift the worst sublattice determinant to 1: scaling by c multiplies a
    // rank-k determinant by c^k, so c = 1/min_k (min det_k)^{1/k} works
    let cert = is_stable(&l, ctx)?;
    let t = cert
        .min_dets
        .iter()
        .map(|e| e.det.powf(1.0 / e.rank as f64))
        .fold(f64::INFINITY, f64::min);
    let semi = if t < 1.0 - 1e-12 {
        let n_amb = l.ambient_dim();
        l.apply_transform(&(DMatrix::identity(n_amb, n_amb) / t))?
    } else {
        l
    };

    let (stable, _) = stabilize(&semi, ctx)?;
    let cert = is_stable(&stable, ctx)?;
    if cert.verdict != StabilityVerdict::Stable {
        return Err(Error::StabilizationFailed(format!(
            "stabilized sample failed the stability re-check: {:?}",
            cert.verdict
        )));
    }
    Ok(stable)
}

/// One row of the verification report.
#[derive(Debug, Clone, Serialize)]
pub struct LatticeReport {
    pub lattice_id: String,
    pub zeta_prime: f64,
    /// ζ′_q(Zⁿ, s) − ζ′_q(L, s); nonnegative up to evaluator error when the
    /// inequality holds.
    pub margin: f64,
    #[serde(rename = "is_Zn")]
    pub is_zn: bool,
    pub tail_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub n: usize,
    pub s: f64,
    pub q: f64,
    /// Set when q lies beyond the proven range and was admitted explicitly.
    pub exploratory: bool,
    pub reference_zeta_prime: f64,
    pub per_lattice: Vec<LatticeReport>,
    pub violations: usize,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// One line per lattice: id, n, s, q, zeta_prime, margin, is_zn,
    /// tail_bound.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,n,s,q,zeta_prime,margin,is_zn,tail_bound\n");
        for row in &self.per_lattice {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.lattice_id,
                self.n,
                self.s,
                self.q,
                row.zeta_prime,
                row.margin,
                row.is_zn,
                row.tail_bound
            ));
        }
        out
    }
}

fn deterministic_rotation(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let m = gaussian_matrix(n, &mut rng);
    let qr = m.qr();
    let mut q = qr.q();
    let r = qr.r();
    // fix the sign convention so the factorization is unique
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

fn boundary_block() -> DMatrix<f64> {
    // unit-det plane with a norm-1 vector: stable and on the boundary,
    // yet not isometric to Z²
    DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.5, 1.0])
}

/// The designated fixtures for rank n: Zⁿ itself, a rotated copy, a
/// hexagonal-based stable lattice, and a stable boundary lattice (the last
/// two only when the rank admits them).
fn fixtures(n: usize, seed: u64) -> Vec<(String, LatticeBasis)> {
    let mut out = vec![
        ("fixture-zn".to_string(), LatticeBasis::standard(n)),
        (
            "fixture-zn-rotated".to_string(),
            LatticeBasis::new(deterministic_rotation(n, seed))
                .expect("rotations are nondegenerate"),
        ),
    ];
    if n >= 2 {
        let hex = LatticeBasis::hexagonal_unit_det();
        let a2_based = if n == 2 {
            hex
        } else {
            hex.direct_sum(&LatticeBasis::standard(n - 2))
        };
        out.push(("fixture-a2-block".to_string(), a2_based));

        let plane = LatticeBasis::new(boundary_block()).expect("unit-det plane");
        let boundary = if n == 2 {
            plane
        } else {
            plane.direct_sum(&LatticeBasis::standard(n - 2))
        };
        out.push(("fixture-boundary".to_string(), boundary));
    }
    out
}

fn child_seed(seed: u64, index: usize) -> u64 {
    seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1))
}

/// Margin report for ζ′_q(L, s) ≤ ζ′_q(Zⁿ, s) over `count` random stable
/// lattices plus the designated fixtures. A violation is recorded only when
/// the margin undercuts the combined truncation bounds, so truncation can
/// never fake one. Per-lattice evaluator failures are recorded in the row
/// and the run continues.
pub fn verify_theorem(
    n: usize,
    s: f64,
    q: f64,
    count: usize,
    seed: u64,
    explore_q: bool,
    ctx: &Context,
) -> Result<VerificationReport> {
    if n == 0 || n > 8 {
        return Err(Error::Range(format!("rank must lie in 1..=8, got {n}")));
    }
    if s <= n as f64 / 2.0 {
        return Err(Error::Divergence {
            s,
            limit: n as f64 / 2.0,
        });
    }
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!("shift q must be ≥ 0, got {q}")));
    }
    let bound = q_upper_bound(n, s);
    let exploratory = q > bound + 1e-12;
    if exploratory && !explore_q {
        return Err(Error::Range(format!(
            "q = {q} exceeds the proven range [0, {bound:.6}]; \
             pass the exploration flag to probe it anyway"
        )));
    }

    let reference = zeta_prime_auto(&LatticeBasis::standard(n), s, q, EVAL_REL_TOL, ctx)?;

    let mut jobs: Vec<(String, Result<LatticeBasis>)> = fixtures(n, seed)
        .into_iter()
        .map(|(id, l)| (id, Ok(l)))
        .collect();
    for i in 0..count {
        jobs.push((
            format!("random-{i:04}"),
            random_stable_lattice(n, child_seed(seed, i), ctx),
        ));
    }

    let mut per_lattice: Vec<LatticeReport> = jobs
        .into_par_iter()
        .map(|(lattice_id, built)| {
            let evaluated = built.and_then(|l| {
                let v = zeta_prime_auto(&l, s, q, EVAL_REL_TOL, ctx)?;
                let is_zn = is_isomorphic_to_zn(&l, ctx)?;
                Ok((v, is_zn))
            });
            match evaluated {
                Ok((v, is_zn)) => LatticeReport {
                    lattice_id,
                    zeta_prime: v.value,
                    margin: reference.value - v.value,
                    is_zn,
                    tail_bound: v.tail_bound + reference.tail_bound,
                    error: None,
                },
                Err(e) => LatticeReport {
                    lattice_id,
                    zeta_prime: 0.0,
                    margin: 0.0,
                    is_zn: false,
                    tail_bound: f64::INFINITY,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    per_lattice.sort_by(|a, b| a.lattice_id.cmp(&b.lattice_id));

    let violations = per_lattice
        .iter()
        .filter(|r| r.error.is_none() && r.margin < -(r.tail_bound + 1e-10))
        .count();

    Ok(VerificationReport {
        seed,
        n,
        s,
        q,
        exploratory,
        reference_zeta_prime: reference.value,
        per_lattice,
        violations,
    })
}

/// The reduction step from a semi-stable lattice to a stable one: returns
/// (ζ′_q(L, s), ζ′_q(A·L, s)) for the stabilizing contraction A and checks
/// that the contraction only increased the value (it shortens every vector).
pub fn general_case_reduction(
    l: &LatticeBasis,
    s: f64,
    q: f64,
    ctx: &Context,
) -> Result<(f64, f64)> {
    let cert = is_stable(l, ctx)?;
    if let Some(bad) = cert.min_dets.iter().find(|e| e.det < 1.0 - 1e-9) {
        return Err(Error::NotSemiStable {
            rank: bad.rank,
            det: bad.det,
        });
    }
    let (stable, _) = stabilize(l, ctx)?;
    let lhs = zeta_prime_auto(l, s, q, EVAL_REL_TOL, ctx)?;
    let rhs = zeta_prime_auto(&stable, s, q, EVAL_REL_TOL, ctx)?;
    if lhs.value > rhs.value + 1e-9 {
        return Err(Error::Domain(format!(
            "contraction decreased the value: {} > {}",
            lhs.value, rhs.value
        )));
    }
    Ok((lhs.value, rhs.value))
}
