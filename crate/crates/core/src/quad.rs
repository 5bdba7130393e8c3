//! Fixed-order Gauss–Legendre panels for smooth integrands.

use std::sync::OnceLock;

/// Nodes and weights on [−1, 1] by Newton iteration on P_n from the
/// Chebyshev initial guess.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let nf = n as f64;
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    rule
}

fn rule32() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(32))
}

/// 32-point Gauss–Legendre on a single interval.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(x, w) in rule32() {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Composite rule: [a, b] cut into `panels` equal panels, 32 nodes each.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        acc += integrate(f, a + i as f64 * h, a + (i + 1) as f64 * h);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_hits_analytic_integrals() {
        let cubic = integrate(&|x: f64| x * x * x, 0.0, 1.0);
        assert!((cubic - 0.25).abs() < 1e-15);
        let sine = integrate_panels(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 3);
        assert!((sine - 2.0).abs() < 1e-14);
        // splitting must not change the answer for smooth f
        let a = integrate_panels(&|x: f64| (-x).exp() * x.powf(1.7), 1.0, 9.0, 8);
        let b = integrate_panels(&|x: f64| (-x).exp() * x.powf(1.7), 1.0, 9.0, 16);
        assert!((a - b).abs() < 1e-14 * a.abs());
    }
}
