//! Elementary symmetric polynomials on eigenvalue vectors.
//!
//! All wedge-product normalizations live here. With ω the identity in frame
//! and χ diagonal with eigenvalues λ, the top-degree form χ^m ∧ ω^{n-m} has
//! coefficient `m!(n-m)! σ_m(λ)` against the volume element, and the
//! (n-1,n-1)-form χ^{m-1} ∧ ω^{n-m} has coefficient `(m-1)!(n-m)! σ_{m-1}(λ|i)`
//! in the direction that omits index i.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest complex dimension supported by the stack-allocated kernels.
pub const MAX_DIM: usize = 16;

/// Eigenvalues of a real (1,1)-form relative to ω.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.len() > MAX_DIM {
            return Err(Error::arg(format!(
                "spectrum length {} outside 2..={MAX_DIM}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::arg(format!("non-finite eigenvalue {bad}")));
        }
        Ok(Spectrum(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Spectrum {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Dimension and degree data of a (possibly weighted) general J-flow.
///
/// The numerator of the flow quotient is `Σ_m b_m χ^m ∧ ω^{n-m}` over
/// `m = 0..k`; single-quotient mode is `b_l = 1` and every other weight zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowIndices {
    n: usize,
    k: usize,
    weights: Vec<f64>,
    single: Option<usize>,
}

impl FlowIndices {
    /// The flow `u_t = c - χ_u^l ∧ ω^{n-l} / χ_u^k ∧ ω^{n-k}`.
    pub fn single(n: usize, k: usize, l: usize) -> Result<Self> {
        if !(n >= k && k > l && l >= 1) {
            return Err(Error::Config(format!(
                "indices must satisfy n >= k > l >= 1, got n={n}, k={k}, l={l}"
            )));
        }
        check_dim(n)?;
        let mut weights = vec![0.0; k];
        weights[l] = 1.0;
        Ok(FlowIndices {
            n,
            k,
            weights,
            single: Some(l),
        })
    }

    /// The weighted flow with numerator `Σ_{m<k} b_m χ_u^m ∧ ω^{n-m}`.
    pub fn weighted(n: usize, k: usize, weights: Vec<f64>) -> Result<Self> {
        if !(n >= k && k >= 1) {
            return Err(Error::Config(format!(
                "indices must satisfy n >= k >= 1, got n={n}, k={k}"
            )));
        }
        check_dim(n)?;
        if weights.len() != k {
            return Err(Error::Config(format!(
                "weighted mode needs k = {k} weights b_0..b_{}, got {}",
                k - 1,
                weights.len()
            )));
        }
        if let Some(b) = weights.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(Error::Config(format!(
                "weights must be finite and b_m >= 0, got {b}"
            )));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("weights must satisfy Σ b_m > 0".into()));
        }
        Ok(FlowIndices {
            n,
            k,
            weights,
            single: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `Some(l)` in single-quotient mode.
    pub fn l(&self) -> Option<usize> {
        self.single
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nonzero `(m, b_m)` pairs of the numerator.
    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, b)| *b != 0.0)
    }
}

fn check_dim(n: usize) -> Result<()> {
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::Config(format!(
            "dimension n = {n} outside 2..={MAX_DIM}"
        )));
    }
    Ok(())
}

pub(crate) fn factorial(m: usize) -> f64 {
    (1..=m).fold(1.0, |acc, j| acc * j as f64)
}

/// Coefficient `m!(n-m)!` linking `σ_m` to the top form χ^m ∧ ω^{n-m}.
pub fn wedge_factor(n: usize, m: usize) -> f64 {
    factorial(m) * factorial(n - m)
}

/// `σ_0..σ_n` of `λ` by coefficient accumulation; entries past `n` are zero.
pub fn sigma_all(lambda: &[f64]) -> [f64; MAX_DIM + 1] {
    let mut e = [0.0; MAX_DIM + 1];
    e[0] = 1.0;
    for (count, &x) in lambda.iter().enumerate() {
        for j in (1..=count + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// `σ_0..σ_{n-1}` of `λ` with entry `skip` removed.
pub fn sigma_all_minor(lambda: &[f64], skip: usize) -> [f64; MAX_DIM + 1] {
    let mut e = [0.0; MAX_DIM + 1];
    e[0] = 1.0;
    let mut count = 0;
    for (idx, &x) in lambda.iter().enumerate() {
        if idx == skip {
            continue;
        }
        for j in (1..=count + 1).rev() {
            e[j] += x * e[j - 1];
        }
        count += 1;
    }
    e
}

/// The m-th elementary symmetric polynomial, `σ_0 = 1`.
pub fn sigma(m: usize, lambda: &[f64]) -> Result<f64> {
    if m > lambda.len() {
        return Err(Error::arg(format!(
            "σ_{m} undefined for n = {}",
            lambda.len()
        )));
    }
    Ok(sigma_all(lambda)[m])
}

/// `σ_m(λ|i)`: the symmetric polynomial of `λ` with `λ_i` removed (`i` 0-based).
pub fn sigma_minor(m: usize, lambda: &[f64], i: usize) -> Result<f64> {
    let n = lambda.len();
    if i >= n {
        return Err(Error::arg(format!("index {i} out of range for n = {n}")));
    }
    if m + 1 > n {
        return Err(Error::arg(format!("σ_{m}(λ|i) undefined for n = {n}")));
    }
    Ok(sigma_all_minor(lambda, i)[m])
}

/// Gårding cone membership: `σ_j(λ) > 0` for `j = 1..=k`.
pub fn in_gamma_k(lambda: &[f64], k: usize) -> bool {
    let e = sigma_all(lambda);
    e[1..=k.min(lambda.len())].iter().all(|&s| s > 0.0)
}

fn check_k(lambda: &[f64], k: usize) -> Result<()> {
    if k == 0 || k > lambda.len() {
        return Err(Error::arg(format!("k = {k} outside 1..={}", lambda.len())));
    }
    Ok(())
}

fn violation(lambda: &[f64], k: usize) -> Error {
    Error::ConeViolation {
        point: None,
        spectrum: lambda.to_vec(),
        k,
    }
}

/// Numerator and denominator densities `(Σ b_m m!(n-m)!σ_m, k!(n-k)!σ_k)`.
pub fn quotient_parts(lambda: &[f64], idx: &FlowIndices) -> (f64, f64) {
    let n = lambda.len();
    let e = sigma_all(lambda);
    let num = idx
        .terms()
        .map(|(m, b)| b * wedge_factor(n, m) * e[m])
        .sum::<f64>();
    (num, wedge_factor(n, idx.k()) * e[idx.k()])
}

/// Pointwise flow quotient `Σ b_m χ^m∧ω^{n-m} / χ^k∧ω^{n-k}`.
pub fn quotient_rhs(lambda: &[f64], idx: &FlowIndices) -> Result<f64> {
    if lambda.len() != idx.n() {
        return Err(Error::arg(format!(
            "spectrum length {} does not match n = {}",
            lambda.len(),
            idx.n()
        )));
    }
    if !in_gamma_k(lambda, idx.k()) {
        return Err(violation(lambda, idx.k()));
    }
    let (num, den) = quotient_parts(lambda, idx);
    Ok(num / den)
}

/// Per-direction coefficients `(dominant_i, subordinate_i)` of the cone
/// inequality, with the dominant term still missing its factor `c`:
///
/// `dominant_i = k (k-1)!(n-k)! σ_{k-1}(λ|i)` and
/// `subordinate_i = Σ_m b_m m (m-1)!(n-m)! σ_{m-1}(λ|i)`.
pub fn cone_components(lambda: &[f64], idx: &FlowIndices) -> Result<Vec<(f64, f64)>> {
    let n = lambda.len();
    if n != idx.n() {
        return Err(Error::arg(format!(
            "spectrum length {n} does not match n = {}",
            idx.n()
        )));
    }
    let k = idx.k();
    if !in_gamma_k(lambda, k) {
        return Err(violation(lambda, k));
    }
    Ok((0..n)
        .map(|i| {
            let e = sigma_all_minor(lambda, i);
            let dominant = k as f64 * factorial(k - 1) * factorial(n - k) * e[k - 1];
            let subordinate = idx
                .terms()
                .filter(|(m, _)| *m >= 1)
                .map(|(m, b)| b * m as f64 * factorial(m - 1) * factorial(n - m) * e[m - 1])
                .sum::<f64>();
            (dominant, subordinate)
        })
        .collect())
}

/// Cone margin for general indices: `min_i (c·dominant_i - subordinate_i)`.
pub fn cone_margin_indices(lambda: &[f64], c: f64, idx: &FlowIndices) -> Result<f64> {
    let n = lambda.len();
    if n != idx.n() {
        return Err(Error::arg(format!(
            "spectrum length {n} does not match n = {}",
            idx.n()
        )));
    }
    let k = idx.k();
    if !in_gamma_k(lambda, k) {
        return Err(violation(lambda, k));
    }
    let dominant_factor = c * k as f64 * factorial(k - 1) * factorial(n - k);
    let mut margin = f64::INFINITY;
    for i in 0..n {
        let e = sigma_all_minor(lambda, i);
        let mut value = dominant_factor * e[k - 1];
        for (m, b) in idx.terms() {
            if m >= 1 {
                value -= b * m as f64 * factorial(m - 1) * factorial(n - m) * e[m - 1];
            }
        }
        margin = margin.min(value);
    }
    Ok(margin)
}

/// Pointwise margin of `c k χ^{k-1}∧ω^{n-k} > l χ^{l-1}∧ω^{n-l}`: the
/// minimum over directions of the (n-1,n-1)-form coefficient difference.
pub fn cone_margin(lambda: &[f64], c: f64, k: usize, l: usize) -> Result<f64> {
    check_k(lambda, k)?;
    let idx = FlowIndices::single(lambda.len(), k, l).map_err(|e| Error::arg(e.to_string()))?;
    cone_margin_indices(lambda, c, &idx)
}

/// `Σ_i ∂(-Q)/∂λ_i`, the trace of [`linearization_coefficients`].
pub fn linearization_trace(lambda: &[f64], idx: &FlowIndices) -> Result<f64> {
    let n = lambda.len();
    let k = idx.k();
    if !in_gamma_k(lambda, k) {
        return Err(violation(lambda, k));
    }
    let (num, den) = quotient_parts(lambda, idx);
    // Σ_i σ_{m-1}(λ|i) = (n-m+1) σ_{m-1}(λ)
    let e = sigma_all(lambda);
    let dnum = idx
        .terms()
        .filter(|(m, _)| *m >= 1)
        .map(|(m, b)| b * wedge_factor(n, m) * (n - m + 1) as f64 * e[m - 1])
        .sum::<f64>();
    let dden = wedge_factor(n, k) * (n - k + 1) as f64 * e[k - 1];
    Ok((num * dden - dnum * den) / (den * den))
}

/// Diagonal coefficients of the linearized flow operator acting on the
/// complex Hessian of a perturbation, `∂(-Q)/∂λ_i`. Non-negative inside Γ_k.
pub fn linearization_coefficients(lambda: &[f64], idx: &FlowIndices) -> Result<Vec<f64>> {
    let n = lambda.len();
    let k = idx.k();
    if !in_gamma_k(lambda, k) {
        return Err(violation(lambda, k));
    }
    let (num, den) = quotient_parts(lambda, idx);
    Ok((0..n)
        .map(|i| {
            let e = sigma_all_minor(lambda, i);
            // d(num)/dλ_i and d(den)/dλ_i via ∂σ_m/∂λ_i = σ_{m-1}(λ|i)
            let dnum = idx
                .terms()
                .filter(|(m, _)| *m >= 1)
                .map(|(m, b)| b * wedge_factor(n, m) * e[m - 1])
                .sum::<f64>();
            let dden = wedge_factor(n, k) * e[k - 1];
            (num * dden - dnum * den) / (den * den)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(0, &[5.0, -3.0]).unwrap(), 1.0);
        assert_eq!(sigma(2, &[1.0, 2.0, 3.0]).unwrap(), 11.0);
        let ones = [1.0; 6];
        let binom = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];
        for (m, b) in binom.iter().enumerate() {
            assert_eq!(sigma(m, &ones).unwrap(), *b);
        }
        assert!(sigma(3, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sigma_minor_examples() {
        assert_eq!(sigma_minor(1, &[1.0, 2.0], 0).unwrap(), 2.0);
        assert_eq!(sigma_minor(2, &[1.0, 2.0, 3.0], 1).unwrap(), 3.0);
        assert!(sigma_minor(0, &[1.0, 2.0], 2).is_err());
        assert!(sigma_minor(2, &[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn gamma_k_examples() {
        assert!(in_gamma_k(&[1.0, 1.0], 2));
        assert!(in_gamma_k(&[3.0, -1.0], 1));
        assert!(!in_gamma_k(&[3.0, -1.0], 2));
        assert!(!in_gamma_k(&[-1.0, -2.0, -0.5], 1));
        // boundary is excluded
        assert!(!in_gamma_k(&[1.0, 0.0], 2));
    }

    #[test]
    fn quotient_examples() {
        let idx = FlowIndices::single(2, 2, 1).unwrap();
        assert!(close(quotient_rhs(&[1.0, 2.0], &idx).unwrap(), 0.75, 1e-15));
        for n in 2..=5 {
            for k in 2..=n {
                for l in 1..k {
                    let idx = FlowIndices::single(n, k, l).unwrap();
                    for a in [0.3, 1.0, 2.5] {
                        let q = quotient_rhs(&vec![a; n], &idx).unwrap();
                        assert!(
                            close(q, a.powi(l as i32 - k as i32), 1e-13),
                            "{n} {k} {l} {a}"
                        );
                    }
                }
            }
        }
        assert!(matches!(
            quotient_rhs(&[1.0, -1.0], &idx),
            Err(Error::ConeViolation { .. })
        ));
    }

    #[test]
    fn cone_margin_worked_case() {
        let m = cone_margin(&[1.0, 2.0], 0.75, 2, 1).unwrap();
        assert!(close(m, 0.5, 1e-15));
        assert!(cone_margin(&[1.0, -2.0], 0.75, 2, 1).is_err());
        assert!(cone_margin(&[1.0, 2.0], 0.75, 2, 2).is_err());
    }

    #[test]
    fn cone_margin_scaling() {
        // dominant term has degree k-1 and subordinate degree l-1, so
        // margin(tλ, c t^{l-k}) = t^{l-1} margin(λ, c)
        let lambda = [0.7, 1.3, 2.2];
        for (k, l) in [(2, 1), (3, 1), (3, 2)] {
            let c = 0.9;
            let base = cone_margin(&lambda, c, k, l).unwrap();
            for t in [0.5, 2.0, 3.0] {
                let scaled: Vec<f64> = lambda.iter().map(|x| x * t).collect();
                let m = cone_margin(&scaled, c * t.powi(l as i32 - k as i32), k, l).unwrap();
                assert!(close(m, t.powi(l as i32 - 1) * base, 1e-13));
            }
        }
    }

    #[test]
    fn flow_indices_validation() {
        assert!(FlowIndices::single(2, 2, 2).is_err());
        assert!(FlowIndices::single(2, 3, 1).is_err());
        assert!(FlowIndices::single(3, 2, 0).is_err());
        assert!(FlowIndices::weighted(2, 2, vec![0.0, 0.0]).is_err());
        assert!(FlowIndices::weighted(2, 2, vec![-1.0, 2.0]).is_err());
        assert!(FlowIndices::weighted(2, 2, vec![1.0]).is_err());
        let w = FlowIndices::weighted(2, 2, vec![0.5, 1.0]).unwrap();
        assert_eq!(w.l(), None);
        let s = FlowIndices::single(3, 3, 1).unwrap();
        assert_eq!(s.weights(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn linearization_is_nonnegative_in_cone() {
        let idx = FlowIndices::single(3, 2, 1).unwrap();
        let a = linearization_coefficients(&[2.0, 1.0, -0.3], &idx).unwrap();
        assert!(a.iter().all(|&x| x >= 0.0), "{a:?}");
        // matches a centered difference of -Q
        let lam = [2.0, 1.0, -0.3];
        for i in 0..3 {
            let h = 1e-6;
            let mut p = lam;
            let mut m = lam;
            p[i] += h;
            m[i] -= h;
            let fd =
                -(quotient_rhs(&p, &idx).unwrap() - quotient_rhs(&m, &idx).unwrap()) / (2.0 * h);
            assert!(close(fd, a[i], 1e-7), "{fd} {}", a[i]);
        }
    }

    #[test]
    fn linearization_trace_matches_sum() {
        for (n, k, l) in [(2, 2, 1), (3, 3, 1), (4, 3, 2)] {
            let idx = FlowIndices::single(n, k, l).unwrap();
            let lam: Vec<f64> = (0..n).map(|i| 0.5 + i as f64 * 0.7).collect();
            let sum: f64 = linearization_coefficients(&lam, &idx).unwrap().iter().sum();
            assert!(close(linearization_trace(&lam, &idx).unwrap(), sum, 1e-14));
        }
    }

    #[test]
    fn margin_matches_components() {
        let idx = FlowIndices::weighted(3, 3, vec![0.2, 0.5, 1.0]).unwrap();
        let lam = [0.4, 1.1, 2.0];
        let from_parts = cone_components(&lam, &idx)
            .unwrap()
            .into_iter()
            .map(|(d, s)| 0.8 * d - s)
            .fold(f64::INFINITY, f64::min);
        assert!(close(
            cone_margin_indices(&lam, 0.8, &idx).unwrap(),
            from_parts,
            1e-15
        ));
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::new(vec![1.0]).is_err());
        assert!(Spectrum::new(vec![1.0, f64::NAN]).is_err());
        let s = Spectrum::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sigma(2, &s).unwrap(), 11.0);
    }
}
