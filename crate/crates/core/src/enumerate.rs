//! Lattice point enumeration inside a ball (Fincke-Pohst over an
//! LLL-reduced basis).
//!
//! Points come in ± pairs, so the search fixes the sign of the highest-index
//! nonzero coefficient and callers either double their sums or ask for both
//! signs explicitly. Collected lists are sorted by (squared norm, then
//! coefficients lexicographically) so downstream output is deterministic.
//! A shared node budget guards against runaway searches.

use crate::context::Context;
use crate::error::{Error, Result};
use crate::lattice::{LatticeBasis, LatticeVector};
use crate::linalg::Accumulator;
use crate::reduce::{gram_schmidt, lll_reduce, DEFAULT_DELTA};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};

/// Relative slack applied to the squared radius so that points lying exactly
/// on a shell boundary are kept regardless of rounding.
const RADIUS_SLACK: f64 = 1e-10;

struct Prepared {
    rank: usize,
    star_sq: Vec<f64>,
    mu: DMatrix<f64>,
    /// original coefficients = transform · reduced coefficients
    transform: DMatrix<i64>,
    reduced_cols: DMatrix<f64>,
}

fn prepare(l: &LatticeBasis) -> Result<Prepared> {
    let red = lll_reduce(l, DEFAULT_DELTA)?;
    let (star_sq, mu) = gram_schmidt(red.basis.columns());
    Ok(Prepared {
        rank: l.rank(),
        star_sq,
        mu,
        transform: red.transform,
        reduced_cols: red.basis.columns().clone(),
    })
}

struct Search<'a> {
    p: &'a Prepared,
    r2: f64,
    budget: &'a AtomicU64,
    cap: u64,
}

impl<'a> Search<'a> {
    fn spend(&self, local: &mut u64, amount: u64) -> Result<()> {
        *local += amount;
        if *local >= 1024 {
            let seen = self.budget.fetch_add(*local, Ordering::Relaxed) + *local;
            *local = 0;
            if seen > self.cap {
                return Err(Error::EnumerationBudget {
                    visited: seen,
                    cap: self.cap,
                });
            }
        }
        Ok(())
    }

    /// Range of values at `level` given coefficients already fixed above it.
    /// Returns (center, lo, hi) with the ball constraint |z + center| bounded.
    fn level_range(&self, level: usize, z: &[i64], acc: f64) -> (f64, i64, i64) {
        let mut center = 0.0;
        for t in (level + 1)..self.p.rank {
            center += (z[t] as f64) * self.p.mu[(t, level)];
        }
        let room = self.r2 - acc;
        if room < 0.0 || self.p.star_sq[level] <= 0.0 {
            return (center, 1, 0);
        }
        let half = (room / self.p.star_sq[level]).sqrt();
        let lo = (-center - half).ceil() as i64;
        let hi = (-center + half).floor() as i64;
        (center, lo, hi)
    }

    /// Walk the subtree below `level`, calling `emit` for each nonzero point
    /// with the fixed sign convention. `all_zero` says every coefficient
    /// above this level is zero.
    fn walk<E: FnMut(&[i64], f64) -> Result<()>>(
        &self,
        level: usize,
        z: &mut [i64],
        acc: f64,
        all_zero: bool,
        local: &mut u64,
        emit: &mut E,
    ) -> Result<()> {
        let (center, lo, hi) = self.level_range(level, z, acc);
        let lo = if all_zero { lo.max(0) } else { lo };
        for v in lo..=hi {
            self.spend(local, 1)?;
            z[level] = v;
            let t = v as f64 + center;
            let next_acc = acc + self.p.star_sq[level] * t * t;
            if next_acc > self.r2 {
                continue;
            }
            let next_all_zero = all_zero && v == 0;
            if level == 0 {
                if !next_all_zero {
                    emit(z, next_acc)?;
                }
            } else {
                self.walk(level - 1, z, next_acc, next_all_zero, local, emit)?;
            }
        }
        z[level] = 0;
        Ok(())
    }
}

fn to_vector(p: &Prepared, z: &[i64], norm_sq: f64) -> LatticeVector {
    let d = p.rank;
    let mut coeffs = vec![0i64; d];
    for i in 0..d {
        let mut c = 0i64;
        for j in 0..d {
            c += p.transform[(i, j)] * z[j];
        }
        coeffs[i] = c;
    }
    let zf = nalgebra::DVector::from_iterator(d, z.iter().map(|&v| v as f64));
    let embedding = &p.reduced_cols * zf;
    LatticeVector {
        coeffs,
        embedding,
        norm_sq,
    }
}

fn sort_points(points: &mut [LatticeVector]) {
    points.sort_by(|a, b| {
        a.norm_sq
            .partial_cmp(&b.norm_sq)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.coeffs.cmp(&b.coeffs))
    });
}

/// One representative from every ± pair of nonzero points with ‖y‖ ≤ radius.
pub fn half_vectors_in_ball(
    l: &LatticeBasis,
    radius: f64,
    ctx: &Context,
) -> Result<Vec<LatticeVector>> {
    if l.rank() == 0 || radius <= 0.0 {
        return Ok(vec![]);
    }
    let p = prepare(l)?;
    let budget = AtomicU64::new(0);
    let search = Search {
        p: &p,
        r2: radius * radius * (1.0 + RADIUS_SLACK),
        budget: &budget,
        cap: ctx.enum_budget,
    };
    let mut out = Vec::new();
    let mut z = vec![0i64; p.rank];
    let mut local = 0u64;
    search.walk(p.rank - 1, &mut z, 0.0, true, &mut local, &mut |z, nsq| {
        out.push(to_vector(&p, z, nsq));
        Ok(())
    })?;
    sort_points(&mut out);
    Ok(out)
}

/// All nonzero points with ‖y‖ ≤ radius, both signs.
pub fn enumerate_vectors(l: &LatticeBasis, radius: f64, ctx: &Context) -> Result<Vec<LatticeVector>> {
    let half = half_vectors_in_ball(l, radius, ctx)?;
    let mut out = Vec::with_capacity(half.len() * 2);
    for v in half {
        let neg = LatticeVector {
            coeffs: v.coeffs.iter().map(|c| -c).collect(),
            embedding: -&v.embedding,
            norm_sq: v.norm_sq,
        };
        out.push(v);
        out.push(neg);
    }
    sort_points(&mut out);
    Ok(out)
}

pub struct FoldOutcome {
    /// Sum of f(‖y‖²) over one representative of each ± pair.
    pub half_sum: f64,
    /// Number of ± pairs inside the ball.
    pub half_count: u64,
}

/// Stream f(‖y‖²) over half the nonzero points without materializing them.
/// Subtrees under each top-level coefficient run in parallel; partial sums
/// are combined in a fixed order so the result is deterministic.
pub fn fold_half_norms<F>(l: &LatticeBasis, radius: f64, ctx: &Context, f: F) -> Result<FoldOutcome>
where
    F: Fn(f64) -> f64 + Sync,
{
    if l.rank() == 0 || radius <= 0.0 {
        return Ok(FoldOutcome {
            half_sum: 0.0,
            half_count: 0,
        });
    }
    let p = prepare(l)?;
    let budget = AtomicU64::new(0);
    let search = Search {
        p: &p,
        r2: radius * radius * (1.0 + RADIUS_SLACK),
        budget: &budget,
        cap: ctx.enum_budget,
    };
    let top = p.rank - 1;
    let z0 = vec![0i64; p.rank];
    let (_, _, hi) = search.level_range(top, &z0, 0.0);
    if hi < 0 {
        return Ok(FoldOutcome {
            half_sum: 0.0,
            half_count: 0,
        });
    }

    let partials: Result<Vec<(f64, u64)>> = (0..=hi)
        .into_par_iter()
        .map(|v| {
            let mut z = vec![0i64; p.rank];
            z[top] = v;
            let t = {
                let (center, _, _) = search.level_range(top, &z0, 0.0);
                v as f64 + center
            };
            let acc = search.p.star_sq[top] * t * t;
            if acc > search.r2 {
                return Ok((0.0, 0));
            }
            let mut local = 1u64;
            let mut sum = Accumulator::new();
            let mut count = 0u64;
            if p.rank == 1 {
                if v != 0 {
                    sum.add(f(acc));
                    count = 1;
                }
            } else {
                search.walk(
                    top - 1,
                    &mut z,
                    acc,
                    v == 0,
                    &mut local,
                    &mut |_z, nsq| {
                        sum.add(f(nsq));
                        count += 1;
                        Ok(())
                    },
                )?;
            }
            Ok((sum.value(), count))
        })
        .collect();
    let partials = partials?;

    let mut total = Accumulator::new();
    let mut count = 0u64;
    for (s, c) in partials {
        total.add(s);
        count += c;
    }
    Ok(FoldOutcome {
        half_sum: total.value(),
        half_count: count,
    })
}

/// Length of a shortest nonzero vector.
pub fn lambda1(l: &LatticeBasis, ctx: &Context) -> Result<f64> {
    if l.rank() == 0 {
        return Err(Error::Domain(
            "the trivial lattice has no shortest vector".into(),
        ));
    }
    let red = lll_reduce(l, DEFAULT_DELTA)?;
    let mut upper = f64::INFINITY;
    for j in 0..red.basis.rank() {
        upper = upper.min(red.basis.basis_vector(j).norm_squared());
    }
    let pts = half_vectors_in_ball(l, upper.sqrt(), ctx)?;
    let best = pts
        .iter()
        .map(|v| v.norm_sq)
        .fold(f64::INFINITY, f64::min)
        .min(upper);
    Ok(best.sqrt())
}

/// All shortest nonzero vectors (both signs).
pub fn shortest_vectors(l: &LatticeBasis, ctx: &Context) -> Result<Vec<LatticeVector>> {
    let lam = lambda1(l, ctx)?;
    let all = enumerate_vectors(l, lam * (1.0 + 1e-9), ctx)?;
    let cutoff = lam * lam * (1.0 + 5e-9);
    Ok(all.into_iter().filter(|v| v.norm_sq <= cutoff).collect())
}
