//! Certified truncation bounds for lattice sums.
//!
//! Everything here rests on one counting estimate: open balls of radius
//! λ1/2 around distinct lattice points are disjoint, so the number of points
//! with ‖y‖ ≤ r is at most (1 + 2r/λ1)^d. For a decreasing radial term
//! f(‖y‖) the layer-cake identity then gives
//!   Σ_{‖y‖>R} f(‖y‖) ≤ ∫_R^∞ (−f′(r)) (1 + 2r/λ1)^d dr,
//! and each bound below is that integral evaluated (or upper-bounded) in
//! closed form. Conservative by design, never wrong.

use crate::error::{Error, Result};
use crate::special::{gamma, upper_gamma_int};

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut v = 1.0;
    for i in 0..k {
        v *= (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Surface measure of the unit sphere S^{d-1} in R^d.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// Certified bound on Σ_{y ∈ L, ‖y‖ > R} (‖y‖² + q)^{−s}.
/// Needs s > d/2 (otherwise the sum itself diverges).
pub fn zeta_sum_tail(d: usize, lambda1: f64, s: f64, q: f64, radius: f64) -> Result<f64> {
    if s <= d as f64 / 2.0 {
        return Err(Error::Divergence {
            s,
            limit: d as f64 / 2.0,
        });
    }
    if !(lambda1 > 0.0) || !(radius >= 0.0) || q < 0.0 {
        return Err(Error::Domain("zeta tail needs λ1 > 0, R ≥ 0, q ≥ 0".into()));
    }
    let base = radius * radius + q;
    if base <= 0.0 {
        return Err(Error::Domain(
            "zeta tail at radius 0 needs a positive shift".into(),
        ));
    }
    let mut total = 0.0;
    for j in 0..=d {
        let jf = j as f64;
        total += s * binomial(d, j) * (2.0 / lambda1).powi(j as i32) * base.powf(jf / 2.0 - s)
            / (s - jf / 2.0);
    }
    Ok(total)
}

/// Certified bound on Σ_{y ∈ L, ‖y‖ > R} e^{−t‖y‖²} for t > 0.
pub fn theta_sum_tail(d: usize, lambda1: f64, t: f64, radius: f64) -> Result<f64> {
    if !(t > 0.0) || !(lambda1 > 0.0) || !(radius > 0.0) {
        return Err(Error::Domain(
            "theta tail needs t > 0, λ1 > 0, R > 0".into(),
        ));
    }
    let z = t * radius * radius;
    let mut total = 0.0;
    for j in 0..=d {
        let coeff = 2.0 * t * binomial(d, j) * (2.0 / lambda1).powi(j as i32);
        // ∫_R^∞ r^{j+1} e^{−tr²} dr, with odd powers bumped up by one via
        // r^{j+1} ≤ r^{j+2}/R so the incomplete gamma order stays integral
        let integral = if j % 2 == 0 {
            let m = j as u32 / 2;
            upper_gamma_int(m, z) / (2.0 * t.powi(m as i32 + 1))
        } else {
            let m = (j as u32 + 1) / 2;
            upper_gamma_int(m, z) / (2.0 * radius * t.powi(m as i32 + 1))
        };
        total += coeff * integral;
    }
    Ok(total)
}

/// Rigorous pointwise bound K_α(x) ≤ √(2π/x) e^{−x} e^{α²/(2x)}, from
/// cosh t ≥ 1 + t²/2 and cosh(αt) ≤ e^{|α|t} in the defining integral.
pub fn bessel_k_envelope(alpha: f64, x: f64) -> f64 {
    let a = alpha.abs();
    (2.0 * std::f64::consts::PI / x).sqrt() * (-x).exp() * (a * a / (2.0 * x)).exp()
}

/// Same envelope for the normalized kernel:
/// kbar(α, x) ≤ 2^{1−α} √(2π) x^{α−1/2} e^{−x} e^{α²/(2x)}.
pub fn kbar_envelope(alpha: f64, x: f64) -> f64 {
    let log_v = (1.0 - alpha) * 2.0f64.ln()
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + (alpha - 0.5) * x.ln()
        - x
        + alpha * alpha / (2.0 * x);
    log_v.exp()
}

/// Certified bound on Σ_{w ∈ Λ, ‖w‖ > R} kbar(α, c‖w‖) over a lattice with
/// shortest vector λ1. Requires cR ≥ max(α − 1/2, 0) so the envelope is
/// decreasing past R.
pub fn psf_sum_tail(d: usize, lambda1: f64, alpha: f64, c: f64, radius: f64) -> Result<f64> {
    if !(c > 0.0) || !(radius > 0.0) || !(lambda1 > 0.0) {
        return Err(Error::Domain("psf tail needs c > 0, R > 0, λ1 > 0".into()));
    }
    let beta = alpha - 0.5;
    if beta > 0.0 && c * radius < beta {
        return Err(Error::Domain(format!(
            "psf tail needs cR ≥ α − 1/2 (cR = {}, α = {alpha})",
            c * radius
        )));
    }
    // envelope E(r) = A r^β e^{−cr} with A frozen at the worst (smallest) r
    let log_a = (1.0 - alpha) * 2.0f64.ln()
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + beta * c.ln()
        + alpha * alpha / (2.0 * c * radius);
    let a = log_a.exp();
    // −E′(r) ≤ A c (1 + max(0,−β)/(cR)) r^β e^{−cr} for r ≥ R
    let slope_fudge = 1.0 + (-beta).max(0.0) / (c * radius);
    let mut total = 0.0;
    for j in 0..=d {
        let p = beta + j as f64;
        // ∫_R^∞ r^p e^{−cr} dr, p rounded up to an integer power against R
        let integral = if p <= 0.0 {
            radius.powf(p) * (-c * radius).exp() / c
        } else {
            let m = p.ceil() as u32;
            radius.powf(p - m as f64) * upper_gamma_int(m, c * radius) / c.powi(m as i32 + 1)
        };
        total += binomial(d, j) * (2.0 / lambda1).powi(j as i32) * integral;
    }
    Ok(a * c * slope_fudge * total)
}

/// Exact ∫_{‖x‖>T} (‖x‖²+q)^{−s} dx in R^d, by the binomial series in q/T².
/// Needs s > d/2 and q < 0.9 T².
pub fn ball_complement_integral(d: usize, s: f64, q: f64, t: f64) -> Result<f64> {
    if s <= d as f64 / 2.0 {
        return Err(Error::Divergence {
            s,
            limit: d as f64 / 2.0,
        });
    }
    if !(t > 0.0) || q < 0.0 || q >= 0.9 * t * t {
        return Err(Error::Range(format!(
            "complement integral needs 0 ≤ q < 0.9 T² (q = {q}, T = {t})"
        )));
    }
    // ∫_T^∞ r^{d−1}(r²+q)^{−s} dr = (1/2) Σ_k (−1)^k C(s+k−1,k) q^k T^{d−2s−2k}/(s+k−d/2)
    let df = d as f64;
    let mut coef = 1.0; // C(s+k−1, k) (−1)^k q^k, built multiplicatively
    let mut sum = 0.0;
    for k in 0..500 {
        let kf = k as f64;
        let term = coef * t.powf(df - 2.0 * s - 2.0 * kf) / (s + kf - df / 2.0);
        sum += term;
        if term.abs() < sum.abs().max(1e-300) * 1e-17 && k > 2 {
            return Ok(sphere_area(d) * 0.5 * sum);
        }
        coef *= -(s + kf) / (kf + 1.0) * q;
    }
    Err(Error::Domain("complement integral series stalled".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::Context;
    use crate::enumerate::half_vectors_in_ball;
    use crate::lattice::LatticeBasis;
    use crate::special::kbar;

    /// Brute tail Σ_{R < ‖y‖ ≤ big} f(‖y‖²) over both signs.
    fn brute_tail<F: Fn(f64) -> f64>(l: &LatticeBasis, r: f64, big: f64, f: F) -> f64 {
        let ctx = Context::default().with_budget(200_000_000);
        half_vectors_in_ball(l, big, &ctx)
            .unwrap()
            .iter()
            .filter(|v| v.norm_sq > r * r)
            .map(|v| 2.0 * f(v.norm_sq))
            .sum()
    }

    #[test]
    fn zeta_tail_dominates_brute_force() {
        let l = LatticeBasis::standard(2);
        for &(s, q, r) in &[(2.0, 0.0, 5.0), (2.0, 1.0, 8.0), (3.5, 0.3, 4.0)] {
            let brute = brute_tail(&l, r, r * 12.0, |nsq| (nsq + q).powf(-s));
            let bound = zeta_sum_tail(2, 1.0, s, q, r).unwrap();
            assert!(bound >= brute, "s={s} q={q}: {bound} < {brute}");
            assert!(bound < 120.0 * brute.max(1e-300), "uselessly loose at s={s}");
        }
        assert!(matches!(
            zeta_sum_tail(4, 1.0, 1.5, 0.0, 3.0),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn theta_tail_dominates_brute_force() {
        let l = LatticeBasis::hexagonal();
        let t = std::f64::consts::PI * 0.4;
        for &r in &[2.0, 3.0, 4.5] {
            let brute = brute_tail(&l, r, r + 8.0, |nsq| (-t * nsq).exp());
            let bound = theta_sum_tail(2, 1.0, t, r).unwrap();
            assert!(bound >= brute);
            assert!(bound < 1e4 * brute.max(1e-300));
        }
    }

    #[test]
    fn bessel_envelope_really_envelopes() {
        for &alpha in &[0.25, 0.75, 2.0, 4.5] {
            for &x in &[0.5, 1.0, 3.0, 10.0, 40.0] {
                let exact = kbar(alpha, x).unwrap();
                let env = kbar_envelope(alpha, x);
                assert!(env >= exact, "alpha={alpha} x={x}: {env} < {exact}");
            }
        }
    }

    #[test]
    fn psf_tail_dominates_brute_force() {
        // dual of Z² is Z²; sum kbar(α, c‖w‖) beyond R
        let l = LatticeBasis::standard(2);
        let alpha = 1.75;
        let c = 2.0;
        for &r in &[2.0, 3.5] {
            let brute = brute_tail(&l, r, r + 14.0, |nsq| kbar(alpha, c * nsq.sqrt()).unwrap());
            let bound = psf_sum_tail(2, 1.0, alpha, c, r).unwrap();
            assert!(bound >= brute, "R={r}: {bound} < {brute}");
            assert!(bound < 1e5 * brute.max(1e-300));
        }
    }

    #[test]
    fn complement_integral_matches_quadrature() {
        // reference by plain Simpson far out
        let quad = |d: usize, s: f64, q: f64, t: f64| {
            let f = |r: f64| r.powi(d as i32 - 1) * (r * r + q).powf(-s);
            let hi = t * 400.0;
            let n = 4_000_000usize;
            let h = (hi - t) / n as f64;
            let mut acc = f(t) + f(hi);
            for i in 1..n {
                acc += f(t + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            sphere_area(d) * acc * h / 3.0
        };
        for &(d, s, q, t) in &[(2usize, 2.0, 0.0, 3.0), (3, 2.25, 1.0, 4.0), (4, 2.75, 5.0, 6.0)] {
            let series = ball_complement_integral(d, s, q, t).unwrap();
            let reference = quad(d, s, q, t);
            assert!(
                (series - reference).abs() < 2e-4 * reference,
                "d={d} s={s}: {series} vs {reference}"
            );
        }
    }

    #[test]
    fn complement_integral_rejects_bad_ranges() {
        assert!(ball_complement_integral(2, 0.9, 0.0, 3.0).is_err());
        assert!(ball_complement_integral(2, 2.0, 9.0, 3.0).is_err());
    }
}
