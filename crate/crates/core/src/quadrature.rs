//! Gauss–Legendre rules on `[0, 1]`.

use std::f64::consts::PI;

/// Nodes and weights of the `count`-point Gauss–Legendre rule mapped to
/// `[0, 1]`. Exact for polynomials of degree `2 count - 1`.
pub fn gauss_legendre_unit(count: usize) -> Vec<(f64, f64)> {
    assert!(count >= 1, "quadrature needs at least one node");
    let n = count;
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((0.5 * (1.0 - x), 0.5 * w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let j = j as f64;
        let p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_monomials_exactly() {
        for count in 1..=6 {
            let rule = gauss_legendre_unit(count);
            let wsum: f64 = rule.iter().map(|r| r.1).sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for deg in 0..(2 * count) {
                let q: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!(
                    (q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14,
                    "count {count} deg {deg}"
                );
            }
        }
    }

    #[test]
    fn two_point_rule() {
        let r = gauss_legendre_unit(2);
        let off = 0.5 / 3f64.sqrt();
        assert!((r[0].0 - (0.5 - off)).abs() < 1e-15);
        assert!((r[1].0 - (0.5 + off)).abs() < 1e-15);
    }
}
