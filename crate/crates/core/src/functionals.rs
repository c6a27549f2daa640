//! The normalization constant `c` and the J_m functionals.
//!
//! `J_m` is defined by its derivative along paths of potentials,
//! `dJ_m/ds = ∫ (∂v/∂s) χ_v^m∧ω^{n-m}`, normalized by `J_m(0) = 0`. The
//! straight path `v(s) = s u` makes the s-integrand a degree-m polynomial,
//! which Gauss–Legendre integrates exactly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::geometry::{chi_spectra, integrate_values, BaseForm, ScalarField, SpectrumField};
use crate::quadrature::gauss_legendre_unit;
use crate::symfunc::{in_gamma_k, sigma_all, wedge_factor, FlowIndices, MAX_DIM};

/// Functional values and their rates at one time of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub t: f64,
    /// `J_0..J_k`.
    pub j: Vec<f64>,
    pub c: f64,
    #[serde(rename = "dJk_dt")]
    pub dj_k_dt: f64,
    /// Rate of the dissipated energy: `J_l`, or `Σ b_m J_m` in weighted mode.
    #[serde(rename = "dJl_dt")]
    pub dj_l_dt: f64,
}

/// Pointwise density of `χ^m∧ω^{n-m}` against the volume element.
pub fn wedge_density(spectra: &SpectrumField, m: usize) -> Vec<f64> {
    let n = spectra.dim();
    let factor = wedge_factor(n, m);
    spectra
        .iter()
        .map(|lam| factor * sigma_all(lam)[m])
        .collect()
}

/// Pointwise numerator density `Σ b_m χ^m∧ω^{n-m}` of the flow quotient.
pub fn numerator_density(spectra: &SpectrumField, idx: &FlowIndices) -> Vec<f64> {
    let n = spectra.dim();
    spectra
        .iter()
        .map(|lam| {
            let e = sigma_all(lam);
            idx.terms()
                .map(|(m, b)| b * wedge_factor(n, m) * e[m])
                .sum()
        })
        .collect()
}

fn check_degree(base: &BaseForm, m: usize) -> Result<()> {
    let n = base.grid().dim();
    if m > n {
        return Err(Error::arg(format!("degree m = {m} exceeds n = {n}")));
    }
    Ok(())
}

/// `∫ χ_u^m∧ω^{n-m}`.
pub fn wedge_integral(base: &BaseForm, u: &ScalarField, m: usize) -> Result<f64> {
    check_degree(base, m)?;
    let spectra = chi_spectra(Exec::default(), base, u)?;
    Ok(integrate_values(
        Exec::default(),
        base.grid(),
        &wedge_density(&spectra, m),
    ))
}

/// `c = ∫ Σ b_m χ^m∧ω^{n-m} / ∫ χ^k∧ω^{n-k}` for the base form.
pub fn normalization_c(base: &BaseForm, idx: &FlowIndices) -> Result<f64> {
    if base.grid().dim() != idx.n() {
        return Err(Error::arg("flow indices and grid disagree on n"));
    }
    let zero = ScalarField::zeros(*base.grid());
    let spectra = chi_spectra(Exec::default(), base, &zero)?;
    let num = integrate_values(
        Exec::default(),
        base.grid(),
        &numerator_density(&spectra, idx),
    );
    let den = integrate_values(
        Exec::default(),
        base.grid(),
        &wedge_density(&spectra, idx.k()),
    );
    if !(den > 0.0) {
        return Err(Error::Config(format!(
            "∫ χ^k∧ω^(n-k) = {den} is not positive; base form is not in Γ_k on average"
        )));
    }
    Ok(num / den)
}

/// Node count used for `J_m`: `⌈(m+1)/2⌉ + 1`.
pub fn default_nodes(m: usize) -> usize {
    (m + 2) / 2 + 1
}

/// `∫₀¹ ∫ (b - a) χ_{a + s(b-a)}^m∧ω^{n-m} ds`.
fn segment_integral(
    base: &BaseForm,
    from: &ScalarField,
    to: &ScalarField,
    m: usize,
    nodes: usize,
) -> Result<f64> {
    let delta = to.axpy(-1.0, from)?;
    let grid = *base.grid();
    let mut total = 0.0;
    for (s, w) in gauss_legendre_unit(nodes) {
        let v = from.axpy(s, &delta)?;
        let spectra = chi_spectra(Exec::default(), base, &v)?;
        let density = wedge_density(&spectra, m);
        let integrand: Vec<f64> = density
            .iter()
            .zip(delta.values())
            .map(|(d, x)| d * x)
            .collect();
        total += w * integrate_values(Exec::default(), &grid, &integrand);
    }
    Ok(total)
}

/// `J_m(u)` along the straight path from 0.
pub fn j_functional(u: &ScalarField, base: &BaseForm, m: usize) -> Result<f64> {
    j_functional_with_nodes(u, base, m, default_nodes(m))
}

pub fn j_functional_with_nodes(
    u: &ScalarField,
    base: &BaseForm,
    m: usize,
    nodes: usize,
) -> Result<f64> {
    check_degree(base, m)?;
    if u.grid() != base.grid() {
        return Err(Error::arg(
            "potential and base form live on different grids",
        ));
    }
    segment_integral(base, &ScalarField::zeros(*u.grid()), u, m, nodes)
}

/// `J_m` accumulated along the piecewise-linear path `0 → waypoints[0] → … → last`.
pub fn j_functional_along(waypoints: &[ScalarField], base: &BaseForm, m: usize) -> Result<f64> {
    check_degree(base, m)?;
    let mut prev = ScalarField::zeros(*base.grid());
    let mut total = 0.0;
    for w in waypoints {
        total += segment_integral(base, &prev, w, m, default_nodes(m))?;
        prev = w.clone();
    }
    Ok(total)
}

/// Whether `χ_{su}` stays in Γ_k at the endpoints and every quadrature node of
/// the straight path used by [`j_functional`].
pub fn straight_path_in_cone(u: &ScalarField, base: &BaseForm, k: usize) -> Result<bool> {
    let mut samples = vec![0.0, 1.0];
    samples.extend(
        gauss_legendre_unit(default_nodes(k))
            .into_iter()
            .map(|(s, _)| s),
    );
    for s in samples {
        let spectra = chi_spectra(Exec::default(), base, &u.scaled(s))?;
        if spectra.first_outside(k).is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `(1/(k+1)) Σ_{i=0}^k ∫ u χ_u^i∧χ^{k-i}∧ω^{n-k}`, the closed form of `J_k`
/// along the straight path.
///
/// The mixed densities come from the pencil `g(s) = (χ + s χ_u)^k∧ω^{n-k}
/// = Σ_i C(k,i) s^i χ_u^i∧χ^{k-i}∧ω^{n-k}`, sampled at `s = 0..k` and
/// interpolated back to its monomial coefficients.
pub fn j_polarization(u: &ScalarField, base: &BaseForm, k: usize) -> Result<f64> {
    check_degree(base, k)?;
    let grid = *base.grid();
    let n = grid.dim();
    let chi = base.field();
    let chi_u = crate::geometry::chi_u(base, u)?;
    let factor = wedge_factor(n, k);
    let binom: Vec<f64> = (0..=k)
        .map(|i| {
            crate::symfunc::factorial(k)
                / (crate::symfunc::factorial(i) * crate::symfunc::factorial(k - i))
        })
        .collect();
    let nodes: Vec<f64> = (0..=k).map(|s| s as f64).collect();
    let vandermonde_inv = invert_vandermonde(&nodes);
    let integrand = exec::try_map_points(Exec::default(), grid.len(), |p| {
        let (a, b) = (chi_u.at(p), chi.at(p));
        let mut samples = [0.0; MAX_DIM + 1];
        for (j, &s) in nodes.iter().enumerate() {
            let mut m = [0.0; MAX_DIM * MAX_DIM];
            for (slot, (x, y)) in m.iter_mut().zip(b.iter().zip(a)) {
                *slot = y + s * x;
            }
            let mut lam = [0.0; MAX_DIM];
            crate::geometry::symmetric_eigenvalues(&m[..n * n], n, &mut lam[..n])
                .map_err(|message| Error::Numerical { point: p, message })?;
            samples[j] = factor * sigma_all(&lam[..n])[k];
        }
        let mut mixed_sum = 0.0;
        for i in 0..=k {
            let coeff: f64 = (0..=k).map(|j| vandermonde_inv[i][j] * samples[j]).sum();
            mixed_sum += coeff / binom[i];
        }
        Ok::<f64, Error>(u.values()[p] * mixed_sum)
    })?;
    Ok(integrate_values(Exec::default(), &grid, &integrand) / (k as f64 + 1.0))
}

/// Inverse of the Vandermonde matrix `V[j][i] = x_j^i`, so that monomial
/// coefficients are `inv · samples`.
fn invert_vandermonde(x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut row: Vec<f64> = (0..n).map(|i| x[j].powi(i as i32)).collect();
            row.extend((0..n).map(|c| if c == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("non-empty");
        a.swap(col, pivot);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    a.into_iter().map(|row| row[n..].to_vec()).collect()
}

/// `∫ u_t χ_u^m∧ω^{n-m}`.
pub fn dj_dt(u: &ScalarField, u_t: &ScalarField, base: &BaseForm, m: usize) -> Result<f64> {
    check_degree(base, m)?;
    u.check_grid(u_t)?;
    let spectra = chi_spectra(Exec::default(), base, u)?;
    Ok(dj_dt_from_spectra(&spectra, u_t, m))
}

pub(crate) fn dj_dt_from_spectra(spectra: &SpectrumField, u_t: &ScalarField, m: usize) -> f64 {
    let density = wedge_density(spectra, m);
    let integrand: Vec<f64> = density
        .iter()
        .zip(u_t.values())
        .map(|(d, x)| d * x)
        .collect();
    integrate_values(Exec::default(), u_t.grid(), &integrand)
}

/// Rate of the dissipated energy `Σ b_m J_m` (just `J_l` in single mode).
pub(crate) fn energy_rate_from_spectra(
    spectra: &SpectrumField,
    u_t: &ScalarField,
    idx: &FlowIndices,
) -> f64 {
    let density = numerator_density(spectra, idx);
    let integrand: Vec<f64> = density
        .iter()
        .zip(u_t.values())
        .map(|(d, x)| d * x)
        .collect();
    integrate_values(Exec::default(), u_t.grid(), &integrand)
}

/// Full report at potential `u` with rate field `u_t`.
pub fn functional_report(
    t: f64,
    u: &ScalarField,
    u_t: &ScalarField,
    base: &BaseForm,
    idx: &FlowIndices,
    c: f64,
) -> Result<FunctionalReport> {
    let spectra = chi_spectra(Exec::default(), base, u)?;
    let j = (0..=idx.k())
        .map(|m| j_functional(u, base, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(FunctionalReport {
        t,
        j,
        c,
        dj_k_dt: dj_dt_from_spectra(&spectra, u_t, idx.k()),
        dj_l_dt: energy_rate_from_spectra(&spectra, u_t, idx),
    })
}

/// Whether all points of `spectra` lie in Γ_k.
pub fn all_in_cone(spectra: &SpectrumField, k: usize) -> bool {
    spectra.iter().all(|lam| in_gamma_k(lam, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FourierTerm, TorusGrid};
    use std::f64::consts::PI;

    fn grid(pts: usize) -> TorusGrid {
        TorusGrid::new(2, pts).unwrap()
    }

    fn sample_u(g: TorusGrid) -> ScalarField {
        ScalarField::from_fourier(
            g,
            &[
                FourierTerm::cos(0.3, vec![1, 0]),
                FourierTerm::sin(0.2, vec![1, 1]),
                FourierTerm::cos(0.1, vec![0, 2]),
                FourierTerm::cos(0.05, vec![0, 0]),
            ],
        )
        .unwrap()
    }

    fn bumpy_base(g: TorusGrid) -> BaseForm {
        let rho = ScalarField::from_fourier(g, &[FourierTerm::cos(0.2, vec![1, 1])]).unwrap();
        BaseForm::new(g, vec![1.0, 0.1, 0.1, 2.0], Some(rho), 2).unwrap()
    }

    #[test]
    fn c_examples() {
        let g = grid(16);
        let idx = FlowIndices::single(2, 2, 1).unwrap();
        let base = BaseForm::scalar(g, 1.7, 2).unwrap();
        assert!((normalization_c(&base, &idx).unwrap() - 1.0 / 1.7).abs() < 1e-14);
        let base = BaseForm::new(g, vec![1.0, 0.0, 0.0, 2.0], None, 2).unwrap();
        assert!((normalization_c(&base, &idx).unwrap() - 0.75).abs() < 1e-14);
        let g3 = TorusGrid::new(3, 8).unwrap();
        let idx = FlowIndices::single(3, 3, 1).unwrap();
        let base = BaseForm::scalar(g3, 2.0, 3).unwrap();
        assert!((normalization_c(&base, &idx).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn c_moves_continuously_with_potential_amplitude() {
        let g = grid(32);
        let idx = FlowIndices::single(2, 2, 1).unwrap();
        let c_of = |amp: f64| {
            let rho = ScalarField::from_fourier(g, &[FourierTerm::cos(amp, vec![1, 1])]).unwrap();
            let base = BaseForm::new(g, vec![1.0, 0.0, 0.0, 2.0], Some(rho), 2).unwrap();
            normalization_c(&base, &idx).unwrap()
        };
        let c0 = c_of(0.0);
        assert!((c_of(1e-3) - c0).abs() < 1e-5);
        assert!((c_of(1e-2) - c0).abs() < 1e-3);
    }

    #[test]
    fn j_at_zero_and_degree_zero() {
        let g = grid(16);
        let base = bumpy_base(g);
        for m in 0..=2 {
            assert_eq!(j_functional(&ScalarField::zeros(g), &base, m).unwrap(), 0.0);
        }
        let u = sample_u(g);
        let j0 = j_functional(&u, &base, 0).unwrap();
        let expected = crate::geometry::integrate(&u) * 2.0;
        assert!((j0 - expected).abs() < 1e-12);
        assert!((expected - 0.05 * 2.0 * (2.0 * PI).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn polarization_matches_path_quadrature() {
        let g = grid(16);
        let base = bumpy_base(g);
        let u = sample_u(g);
        for k in 1..=2 {
            let a = j_functional(&u, &base, k).unwrap();
            let b = j_polarization(&u, &base, k).unwrap();
            assert!(
                (a - b).abs() <= 1e-10 * (1.0 + a.abs()),
                "k={k}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn path_dependence_vanishes_with_refinement() {
        let gap = |pts: usize, m: usize| {
            let g = grid(pts);
            let base = bumpy_base(g);
            let u = sample_u(g);
            let detour =
                ScalarField::from_fourier(g, &[FourierTerm::sin(0.15, vec![2, 1])]).unwrap();
            let mid = u.axpy(1.0, &detour).unwrap();
            let straight = j_functional(&u, &base, m).unwrap();
            let bent = j_functional_along(&[mid, u.clone()], &base, m).unwrap();
            (straight - bent).abs()
        };
        assert!(gap(16, 1) < 1e-10);
        let coarse = gap(32, 2);
        let fine = gap(64, 2);
        let order = (coarse / fine).log2();
        assert!(
            order > 1.8 && coarse > 1e-8,
            "gaps {coarse:e} {fine:e}, order {order}"
        );
    }

    #[test]
    fn extra_nodes_do_not_change_j() {
        let g = grid(16);
        let base = bumpy_base(g);
        let u = sample_u(g);
        for m in 0..=2 {
            let a = j_functional(&u, &base, m).unwrap();
            let b = j_functional_with_nodes(&u, &base, m, default_nodes(m) + 3).unwrap();
            assert!(
                (a - b).abs() <= 1e-13 * a.abs().max(1e-300),
                "m={m}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn dj_dt_basics() {
        let g = grid(16);
        let base = bumpy_base(g);
        let u = sample_u(g);
        assert_eq!(dj_dt(&u, &ScalarField::zeros(g), &base, 2).unwrap(), 0.0);
        let one = ScalarField::constant(g, 1.0);
        let rate = dj_dt(&u, &one, &base, 1).unwrap();
        assert!((rate - wedge_integral(&base, &u, 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn straight_path_cone_flag() {
        let g = grid(16);
        let base = BaseForm::scalar(g, 1.0, 2).unwrap();
        assert!(straight_path_in_cone(&sample_u(g), &base, 2).unwrap());
        let big = ScalarField::from_fourier(g, &[FourierTerm::cos(20.0, vec![1, 0])]).unwrap();
        assert!(!straight_path_in_cone(&big, &base, 2).unwrap());
    }

    #[test]
    fn vandermonde_inverse() {
        let inv = invert_vandermonde(&[0.0, 1.0, 2.0]);
        // p(s) = 1 + 2 s + 3 s^2 sampled at 0, 1, 2
        let samples = [1.0, 6.0, 17.0];
        let coeffs: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| inv[i][j] * samples[j]).sum())
            .collect();
        for (c, e) in coeffs.iter().zip([1.0, 2.0, 3.0]) {
            assert!((c - e).abs() < 1e-13);
        }
    }
}
