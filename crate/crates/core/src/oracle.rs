//! Brute-force references for the symmetric-function and wedge algebra.
//!
//! Nothing here is called by the simulation path. The routines enumerate
//! subsets and index sequences directly so that the normalizations used in
//! [`crate::symfunc`] can be checked against the definition of the wedge
//! product of diagonal (1,1)-forms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::j_functional;
use crate::geometry::{chi_u, integrate, symmetric_eigenvalues, BaseForm, ScalarField};
use crate::symfunc::{FlowIndices, MAX_DIM};

/// Largest dimension accepted by the sequence-enumerating oracles.
pub const MAX_WEDGE_DIM: usize = 4;
/// Largest dimension accepted by [`sigma_bruteforce`].
pub const MAX_SUBSET_DIM: usize = 12;

/// A diagonal real (1,1)-form `Σ λ_i √-1 dz_i∧dz̄_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalForm {
    lambda: Vec<f64>,
}

impl DiagonalForm {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() || lambda.len() > MAX_WEDGE_DIM {
            return Err(Error::arg(format!(
                "diagonal oracle supports 1..={MAX_WEDGE_DIM} dimensions, got {}",
                lambda.len()
            )));
        }
        Ok(DiagonalForm { lambda })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.lambda
    }

    /// Top coefficient of `self^m ∧ ω^{n-m}`.
    pub fn wedge_top(&self, m: usize) -> f64 {
        wedge_top_coeff(m, &self.lambda)
    }
}

/// Sum over all m-subsets of the product of their entries.
pub fn sigma_bruteforce(m: usize, lambda: &[f64]) -> f64 {
    let n = lambda.len();
    assert!(
        n <= MAX_SUBSET_DIM,
        "subset oracle limited to n <= {MAX_SUBSET_DIM}"
    );
    (0u32..(1 << n))
        .filter(|mask| mask.count_ones() as usize == m)
        .map(|mask| {
            (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| lambda[i])
                .product::<f64>()
        })
        .sum()
}

/// Calls `visit` with every sequence of `len` pairwise distinct indices drawn
/// from `allowed`, generated by filtering all `|allowed|^len` tuples.
fn for_each_distinct_sequence(allowed: &[usize], len: usize, mut visit: impl FnMut(&[usize])) {
    let base = allowed.len();
    let total = base.pow(len as u32);
    let mut seq = vec![0usize; len];
    for code in 0..total {
        let mut c = code;
        for slot in seq.iter_mut() {
            *slot = allowed[c % base];
            c /= base;
        }
        let distinct = (0..len).all(|a| (a + 1..len).all(|b| seq[a] != seq[b]));
        if distinct {
            visit(&seq);
        }
    }
}

/// Coefficient of `(Σ λ_i e_i)^m ∧ (Σ e_i)^{n-m}` against `e_1∧…∧e_n`, where
/// `e_i = √-1 dz_i∧dz̄_i`. The `e_i` are even, commute and square to zero, so
/// the product expands over index sequences with no repeats.
pub fn wedge_top_coeff(m: usize, lambda: &[f64]) -> f64 {
    let n = lambda.len();
    assert!(
        n <= MAX_WEDGE_DIM && m <= n,
        "wedge oracle needs n <= {MAX_WEDGE_DIM}, m <= n"
    );
    let all: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for_each_distinct_sequence(&all, n, |seq| {
        total += seq[..m].iter().map(|&i| lambda[i]).product::<f64>();
    });
    total
}

/// Coefficient of `χ^p ∧ ω^{n-1-p}` on the (n-1,n-1) basis element that
/// omits direction `skip`.
pub fn wedge_n1_coeff(p: usize, lambda: &[f64], skip: usize) -> f64 {
    let n = lambda.len();
    assert!(n <= MAX_WEDGE_DIM && p < n && skip < n);
    let allowed: Vec<usize> = (0..n).filter(|&i| i != skip).collect();
    let mut total = 0.0;
    for_each_distinct_sequence(&allowed, n - 1, |seq| {
        total += seq[..p].iter().map(|&i| lambda[i]).product::<f64>();
    });
    total
}

/// Per-direction coefficients of the (n-1,n-1)-form
/// `c k χ^{k-1}∧ω^{n-k} - Σ_m b_m m χ^{m-1}∧ω^{n-m}`.
pub fn cone_form_coefficients(lambda: &[f64], c: f64, idx: &FlowIndices) -> Vec<f64> {
    let n = lambda.len();
    let k = idx.k();
    (0..n)
        .map(|i| {
            let dominant = c * k as f64 * wedge_n1_coeff(k - 1, lambda, i);
            let subordinate: f64 = idx
                .weights()
                .iter()
                .enumerate()
                .filter(|(m, b)| *m >= 1 && **b != 0.0)
                .map(|(m, b)| b * m as f64 * wedge_n1_coeff(m - 1, lambda, i))
                .sum();
            dominant - subordinate
        })
        .collect()
}

/// Strict positivity of the cone-condition (n-1,n-1)-form at a diagonal point.
pub fn form_positivity_n1(lambda: &[f64], c: f64, idx: &FlowIndices) -> bool {
    cone_form_coefficients(lambda, c, idx)
        .iter()
        .all(|&x| x > 0.0)
}

/// `(J_m(u + εw) - J_m(u - εw)) / 2ε`.
pub fn fd_functional_derivative(
    u: &ScalarField,
    w: &ScalarField,
    base: &BaseForm,
    m: usize,
    eps: f64,
) -> Result<f64> {
    let plus = j_functional(&u.axpy(eps, w)?, base, m)?;
    let minus = j_functional(&u.axpy(-eps, w)?, base, m)?;
    Ok((plus - minus) / (2.0 * eps))
}

/// `∫ w χ_u^m∧ω^{n-m}` with the density taken from [`wedge_top_coeff`] on
/// the pointwise eigenvalues.
pub fn defining_integrand(
    u: &ScalarField,
    w: &ScalarField,
    base: &BaseForm,
    m: usize,
) -> Result<f64> {
    let n = base.grid().dim();
    if n > MAX_WEDGE_DIM {
        return Err(Error::arg("defining integrand oracle limited to n <= 4"));
    }
    let field = chi_u(base, u)?;
    let mut values = Vec::with_capacity(w.values().len());
    for (p, wp) in w.values().iter().enumerate() {
        let mut lam = [0.0; MAX_DIM];
        symmetric_eigenvalues(field.at(p), n, &mut lam[..n])
            .map_err(|message| Error::Numerical { point: p, message })?;
        values.push(wp * wedge_top_coeff(m, &lam[..n]));
    }
    Ok(integrate(&ScalarField::new(*base.grid(), values)?))
}

/// One row of the verification table.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckOutcome {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Runs the symmetric-function and wedge cross-checks used by the
/// verification executable.
pub fn verification_suite(seed: u64) -> Vec<CheckOutcome> {
    use crate::symfunc::{cone_margin_indices, in_gamma_k, sigma, sigma_minor, wedge_factor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    let mut worst_minor = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=6);
        let lam: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        for m in 0..=n {
            let a = sigma(m, &lam).unwrap();
            let b = sigma_bruteforce(m, &lam);
            worst = worst.max(rel_err(a, b, &lam, m));
            if m >= 1 && m < n {
                for i in 0..n {
                    let rebuilt = sigma_minor(m, &lam, i).unwrap()
                        + lam[i] * sigma_minor(m - 1, &lam, i).unwrap();
                    worst_minor = worst_minor.max(rel_err(a, rebuilt, &lam, m));
                }
            }
        }
    }
    out.push(CheckOutcome::new(
        "sigma vs subset-sum oracle",
        worst <= 1e-12,
        format!("max scaled error {worst:.3e} (tol 1e-12)"),
    ));
    out.push(CheckOutcome::new(
        "minor identity σ_m = σ_m(λ|i) + λ_i σ_(m-1)(λ|i)",
        worst_minor <= 1e-12,
        format!("max scaled error {worst_minor:.3e} (tol 1e-12)"),
    ));

    let mut worst = 0.0f64;
    for _ in 0..200 {
        for n in 1..=MAX_WEDGE_DIM {
            let lam: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            for m in 0..=n {
                let oracle = wedge_top_coeff(m, &lam);
                let formula = wedge_factor(n, m) * sigma_bruteforce(m, &lam);
                worst = worst.max(rel_err(oracle, formula, &lam, m));
            }
        }
    }
    out.push(CheckOutcome::new(
        "wedge expansion = m!(n-m)! σ_m",
        worst <= 1e-12,
        format!("max scaled error {worst:.3e} (tol 1e-12)"),
    ));

    let mut disagreements = 0;
    let mut trials = 0;
    while trials < 1000 {
        let n = rng.gen_range(2..=MAX_WEDGE_DIM);
        let k = rng.gen_range(2..=n);
        let l = rng.gen_range(1..k);
        let lam: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..5.0)).collect();
        if !in_gamma_k(&lam, k) {
            continue;
        }
        trials += 1;
        let idx = FlowIndices::single(n, k, l).unwrap();
        let c = rng.gen_range(0.0..3.0);
        let margin = cone_margin_indices(&lam, c, &idx).unwrap();
        if (margin > 0.0) != form_positivity_n1(&lam, c, &idx) {
            disagreements += 1;
        }
    }
    out.push(CheckOutcome::new(
        "cone margin sign vs (n-1,n-1)-form positivity",
        disagreements == 0,
        format!("{disagreements} disagreements in 1000 samples"),
    ));

    let worked =
        cone_margin_indices(&[1.0, 2.0], 0.75, &FlowIndices::single(2, 2, 1).unwrap()).unwrap();
    out.push(CheckOutcome::new(
        "worked cone margin n=2 k=2 l=1 λ=(1,2) c=0.75",
        (worked - 0.5).abs() <= 1e-15,
        format!("margin {worked}"),
    ));
    out
}

/// Error scaled by the natural magnitude `σ_m(|λ|)` of the terms summed.
fn rel_err(a: f64, b: f64, lambda: &[f64], m: usize) -> f64 {
    let abs: Vec<f64> = lambda.iter().map(|x| x.abs()).collect();
    let scale = crate::symfunc::sigma_all(&abs)[m].max(f64::MIN_POSITIVE);
    (a - b).abs() / scale
}
