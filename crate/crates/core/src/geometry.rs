//! Periodic grids on the symmetry-reduced flat torus.
//!
//! Potentials depend only on the real parts `x_1..x_n` of the complex
//! coordinates, so the complex Hessian is `u_{i j̄} = ¼ ∂²u/∂x_i∂x_j` and every
//! (1,1)-form is a real symmetric matrix per grid point. ω is the identity.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::symfunc::{in_gamma_k, MAX_DIM};

/// Minimum number of grid points per dimension.
pub const MIN_POINTS: usize = 8;

/// `N^n` uniform grid on `[0, 2π)^n`, indexed row-major (last axis fastest).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    n: usize,
    points: usize,
}

impl TorusGrid {
    pub fn new(n: usize, points_per_dim: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::arg(format!("dimension {n} outside 2..={MAX_DIM}")));
        }
        if points_per_dim < MIN_POINTS {
            return Err(Error::arg(format!(
                "need at least {MIN_POINTS} points per dimension, got {points_per_dim}"
            )));
        }
        points_per_dim
            .checked_pow(n as u32)
            .ok_or_else(|| Error::arg("grid too large"))?;
        Ok(TorusGrid {
            n,
            points: points_per_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn points_per_dim(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(2π)^n`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.n as i32)
    }

    /// Stride of axis `axis` in the flat index.
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.n - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        for slot in idx.iter_mut().rev() {
            *slot = p % self.points;
            p /= self.points;
        }
        idx
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(p)
            .into_iter()
            .map(|i| i as f64 * h)
            .collect()
    }

    /// Index of `p` moved by `delta` cells along `axis`, wrapping periodically.
    #[inline]
    pub fn shift(&self, p: usize, axis: usize, delta: isize) -> usize {
        let stride = self.stride(axis);
        let i = (p / stride) % self.points;
        let np = self.points as isize;
        let j = ((i as isize + delta) % np + np) % np;
        p - i * stride + j as usize * stride
    }
}

/// Real-valued periodic function on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::arg(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                point: p,
                message: "non-finite field value".into(),
            });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|p| f(&grid.coords(p))).collect();
        ScalarField { grid, values }
    }

    pub fn from_fourier(grid: TorusGrid, terms: &[FourierTerm]) -> Result<Self> {
        for t in terms {
            if t.freq.len() != grid.dim() {
                return Err(Error::arg(format!(
                    "Fourier term has {} frequencies, grid dimension is {}",
                    t.freq.len(),
                    grid.dim()
                )));
            }
        }
        Ok(ScalarField::from_fn(grid, |x| {
            terms.iter().map(|t| t.eval(x)).sum()
        }))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        exec::sum(Exec::default(), &self.values) / self.values.len() as f64
    }

    pub fn min(&self) -> (usize, f64) {
        exec::min_with_index(&self.values).expect("grid is non-empty")
    }

    pub fn max(&self) -> (usize, f64) {
        exec::max_with_index(&self.values).expect("grid is non-empty")
    }

    /// `max - min`.
    pub fn oscillation(&self) -> f64 {
        self.max().1 - self.min().1
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &ScalarField) -> Result<ScalarField> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        Ok(ScalarField {
            grid: self.grid,
            values,
        })
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|x| a * x).collect(),
        }
    }

    pub(crate) fn check_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::arg("fields live on different grids"));
        }
        Ok(())
    }
}

/// Which trigonometric function a [`FourierTerm`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Cos,
    Sin,
}

/// `amplitude * cos(freq · x)` or `amplitude * sin(freq · x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub amplitude: f64,
    pub freq: Vec<i32>,
    #[serde(default = "default_trig")]
    pub kind: Trig,
}

fn default_trig() -> Trig {
    Trig::Cos
}

impl FourierTerm {
    pub fn cos(amplitude: f64, freq: Vec<i32>) -> Self {
        FourierTerm {
            amplitude,
            freq,
            kind: Trig::Cos,
        }
    }

    pub fn sin(amplitude: f64, freq: Vec<i32>) -> Self {
        FourierTerm {
            amplitude,
            freq,
            kind: Trig::Sin,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let phase: f64 = self.freq.iter().zip(x).map(|(&q, &xi)| q as f64 * xi).sum();
        match self.kind {
            Trig::Cos => self.amplitude * phase.cos(),
            Trig::Sin => self.amplitude * phase.sin(),
        }
    }
}

/// One real symmetric `n×n` matrix per grid point, row-major per point.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPointField {
    grid: TorusGrid,
    data: Vec<f64>,
}

impl HermitianPointField {
    pub fn constant(grid: TorusGrid, matrix: &[f64]) -> Result<Self> {
        let n = grid.dim();
        check_symmetric(matrix, n)?;
        let data = matrix
            .iter()
            .copied()
            .cycle()
            .take(n * n * grid.len())
            .collect();
        Ok(HermitianPointField { grid, data })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Matrix at point `p`, row-major.
    pub fn at(&self, p: usize) -> &[f64] {
        let nn = self.grid.dim() * self.grid.dim();
        &self.data[p * nn..(p + 1) * nn]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn zip_with(&self, other: &HermitianPointField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::arg("point fields live on different grids"));
        }
        Ok(HermitianPointField {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn add(&self, other: &HermitianPointField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &HermitianPointField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &HermitianPointField) -> Result<Self> {
        self.zip_with(other, |x, y| x + a * y)
    }
}

fn check_symmetric(matrix: &[f64], n: usize) -> Result<()> {
    if matrix.len() != n * n {
        return Err(Error::arg(format!(
            "expected {} matrix entries, got {}",
            n * n,
            matrix.len()
        )));
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (matrix[i * n + j], matrix[j * n + i]);
            if (a - b).abs() > 1e-14 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::arg(format!("matrix not symmetric at ({i},{j})")));
            }
        }
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::arg("matrix has non-finite entries"));
    }
    Ok(())
}

/// Writes `¼ Hess(u)` at point `p` into `out` (row-major `n×n`), adding to
/// whatever `out` already holds.
#[inline]
pub(crate) fn add_complex_hessian_at(u: &ScalarField, p: usize, out: &mut [f64]) {
    let g = &u.grid;
    let n = g.dim();
    let big = g.points;
    let h = g.spacing();
    let v = &u.values;
    let diag = 0.25 / (h * h);
    let cross = 0.25 / (4.0 * h * h);
    // signed offsets of the +1 / -1 neighbours along each axis, with wrap
    let mut fwd = [0isize; MAX_DIM];
    let mut bwd = [0isize; MAX_DIM];
    let (mut rest, mut stride) = (p, 1usize);
    for axis in (0..n).rev() {
        let i = rest % big;
        rest /= big;
        let s = stride as isize;
        let span = (big * stride) as isize;
        fwd[axis] = if i + 1 == big { s - span } else { s };
        bwd[axis] = if i == 0 { span - s } else { -s };
        stride *= big;
    }
    let at = |off: isize| v[(p as isize + off) as usize];
    let c = v[p];
    for i in 0..n {
        out[i * n + i] += diag * (at(fwd[i]) - 2.0 * c + at(bwd[i]));
        for j in (i + 1)..n {
            let d = cross
                * (at(fwd[i] + fwd[j]) - at(fwd[i] + bwd[j]) - at(bwd[i] + fwd[j])
                    + at(bwd[i] + bwd[j]));
            out[i * n + j] += d;
            out[j * n + i] += d;
        }
    }
}

/// `¼` times the central-difference Hessian of `u`.
pub fn complex_hessian(u: &ScalarField) -> HermitianPointField {
    complex_hessian_with(Exec::default(), u)
}

pub fn complex_hessian_with(exec: Exec, u: &ScalarField) -> HermitianPointField {
    let n = u.grid.dim();
    let mut data = vec![0.0; n * n * u.grid.len()];
    exec::fill_strided(exec, &mut data, n * n, |p, out| {
        add_complex_hessian_at(u, p, out)
    });
    HermitianPointField { grid: u.grid, data }
}

/// The closed background form `χ = H0 + i∂∂̄ρ`.
#[derive(Debug, Clone)]
pub struct BaseForm {
    constant: Vec<f64>,
    potential: Option<ScalarField>,
    field: HermitianPointField,
}

impl BaseForm {
    /// Builds the form and checks that its spectrum lies in Γ_k everywhere.
    pub fn new(
        grid: TorusGrid,
        constant: Vec<f64>,
        potential: Option<ScalarField>,
        k: usize,
    ) -> Result<Self> {
        let n = grid.dim();
        check_symmetric(&constant, n)?;
        let mut field = HermitianPointField::constant(grid, &constant)?;
        if let Some(rho) = &potential {
            if *rho.grid() != grid {
                return Err(Error::arg("potential lives on a different grid"));
            }
            field = field.add(&complex_hessian(rho))?;
        }
        let base = BaseForm {
            constant,
            potential,
            field,
        };
        let spectra = spectrum_field(&base.field)?;
        if let Some(p) = spectra.first_outside(k) {
            return Err(Error::ConeViolation {
                point: Some(p),
                spectrum: spectra.at(p).to_vec(),
                k,
            });
        }
        Ok(base)
    }

    /// `a · identity` with no potential.
    pub fn scalar(grid: TorusGrid, a: f64, k: usize) -> Result<Self> {
        let n = grid.dim();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = a;
        }
        BaseForm::new(grid, m, None, k)
    }

    pub fn grid(&self) -> &TorusGrid {
        self.field.grid()
    }

    pub fn constant_part(&self) -> &[f64] {
        &self.constant
    }

    pub fn potential(&self) -> Option<&ScalarField> {
        self.potential.as_ref()
    }

    /// Pointwise matrices of χ.
    pub fn field(&self) -> &HermitianPointField {
        &self.field
    }
}

/// `χ_u = χ + i∂∂̄u` pointwise.
pub fn chi_u(base: &BaseForm, u: &ScalarField) -> Result<HermitianPointField> {
    if base.grid() != u.grid() {
        return Err(Error::arg(
            "potential and base form live on different grids",
        ));
    }
    base.field.add(&complex_hessian(u))
}

/// Ascending eigenvalues per grid point, stride `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumField {
    n: usize,
    data: Vec<f64>,
}

impl SpectrumField {
    fn from_points(n: usize, points: &[[f64; MAX_DIM]]) -> Self {
        let mut data = Vec::with_capacity(n * points.len());
        for v in points {
            data.extend_from_slice(&v[..n]);
        }
        SpectrumField { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.data[p * self.n..(p + 1) * self.n]
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.n)
    }

    /// First point (in index order) whose spectrum is outside Γ_k.
    pub fn first_outside(&self, k: usize) -> Option<usize> {
        self.iter().position(|lam| !in_gamma_k(lam, k))
    }
}

/// Eigenvalues of a symmetric `n×n` matrix, sorted ascending, into `out`.
pub fn symmetric_eigenvalues(
    matrix: &[f64],
    n: usize,
    out: &mut [f64],
) -> std::result::Result<(), String> {
    if n == 2 {
        let (a, b, d) = (matrix[0], 0.5 * (matrix[1] + matrix[2]), matrix[3]);
        let mean = 0.5 * (a + d);
        let r = (0.5 * (a - d)).hypot(b);
        let det = a * d - b * b;
        // recover the smaller-magnitude root from the determinant to avoid cancellation
        let (lo, hi) = if mean >= 0.0 {
            let hi = mean + r;
            (if hi != 0.0 { det / hi } else { mean - r }, hi)
        } else {
            let lo = mean - r;
            (lo, if lo != 0.0 { det / lo } else { mean + r })
        };
        out[0] = lo.min(hi);
        out[1] = lo.max(hi);
        return Ok(());
    }
    let m = DMatrix::from_row_slice(n, n, matrix);
    let m = (&m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| "symmetric eigensolver did not converge".to_string())?;
    out.copy_from_slice(eig.eigenvalues.as_slice());
    out.sort_by(|x, y| x.total_cmp(y));
    Ok(())
}

/// Eigenvalues of every pointwise matrix.
pub fn spectrum_field(field: &HermitianPointField) -> Result<SpectrumField> {
    spectrum_field_with(Exec::default(), field)
}

pub fn spectrum_field_with(exec: Exec, field: &HermitianPointField) -> Result<SpectrumField> {
    let n = field.grid.dim();
    let vals = exec::try_map_points(exec, field.grid.len(), |p| {
        let mut out = [0.0; MAX_DIM];
        symmetric_eigenvalues(field.at(p), n, &mut out[..n])
            .map(|_| out)
            .map_err(|message| Error::Numerical { point: p, message })
    })?;
    Ok(SpectrumField::from_points(n, &vals))
}

/// Spectra of `χ_u` computed point by point without materializing χ_u.
pub fn chi_spectra(exec: Exec, base: &BaseForm, u: &ScalarField) -> Result<SpectrumField> {
    if base.grid() != u.grid() {
        return Err(Error::arg(
            "potential and base form live on different grids",
        ));
    }
    let n = u.grid.dim();
    let nn = n * n;
    let vals = exec::try_map_points(exec, u.grid.len(), |p| {
        let mut m = [0.0; MAX_DIM * MAX_DIM];
        let m = &mut m[..nn];
        m.copy_from_slice(base.field.at(p));
        add_complex_hessian_at(u, p, m);
        let mut out = [0.0; MAX_DIM];
        symmetric_eigenvalues(m, n, &mut out[..n])
            .map(|_| out)
            .map_err(|message| Error::Numerical { point: p, message })
    })?;
    Ok(SpectrumField::from_points(n, &vals))
}

/// `∫ f` over the torus: mean value times `(2π)^n`.
pub fn integrate(f: &ScalarField) -> f64 {
    integrate_with(Exec::default(), f)
}

pub fn integrate_with(exec: Exec, f: &ScalarField) -> f64 {
    integrate_values(exec, &f.grid, &f.values)
}

pub(crate) fn integrate_values(exec: Exec, grid: &TorusGrid, values: &[f64]) -> f64 {
    exec::sum(exec, values) / values.len() as f64 * grid.volume()
}

/// Header line identifying the snapshot format.
pub const SNAPSHOT_MAGIC: &str = "jflow-snapshot v1";

/// Text snapshot: magic line, `n`, `N`, field name, time, then one value per
/// line in row-major order. Values use shortest round-trip formatting.
pub fn write_snapshot(field: &ScalarField, name: &str, t: f64) -> String {
    let mut s = String::with_capacity(24 * field.values.len() + 64);
    let _ = writeln!(s, "{SNAPSHOT_MAGIC}");
    let _ = writeln!(s, "n {}", field.grid.dim());
    let _ = writeln!(s, "N {}", field.grid.points_per_dim());
    let _ = writeln!(s, "field {name}");
    let _ = writeln!(s, "t {t:?}");
    for v in &field.values {
        let _ = writeln!(s, "{v:?}");
    }
    s
}

/// Parsed snapshot contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub name: String,
    pub t: f64,
    pub field: ScalarField,
}

pub fn read_snapshot(text: &str) -> Result<Snapshot> {
    let mut lines = text.lines();
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Snapshot(format!("missing {what}")))
    };
    if next("magic line")? != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("bad magic line".into()));
    }
    fn keyed<'a>(line: &'a str, key: &str) -> Result<&'a str> {
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| Error::Snapshot(format!("expected `{key} <value>`, got `{line}`")))
    }
    let parse_usize = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| Error::Snapshot(format!("bad integer `{s}`: {e}")))
    };
    let n = parse_usize(keyed(next("n")?, "n")?)?;
    let points = parse_usize(keyed(next("N")?, "N")?)?;
    let name = keyed(next("field")?, "field")?.to_string();
    let t_str = keyed(next("t")?, "t")?;
    let t = t_str
        .parse::<f64>()
        .map_err(|e| Error::Snapshot(format!("bad time `{t_str}`: {e}")))?;
    let grid = TorusGrid::new(n, points)?;
    let values = lines
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Snapshot(format!("bad value `{l}`: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let field = ScalarField::new(grid, values)?;
    Ok(Snapshot { name, t, field })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, pts: usize) -> TorusGrid {
        TorusGrid::new(n, pts).unwrap()
    }

    #[test]
    fn grid_shift_wraps() {
        let g = grid(3, 8);
        assert_eq!(g.len(), 512);
        let p = 0;
        assert_eq!(g.multi_index(g.shift(p, 0, -1)), vec![7, 0, 0]);
        assert_eq!(g.multi_index(g.shift(p, 2, 1)), vec![0, 0, 1]);
        let q = g.shift(g.shift(p, 1, 8), 1, -8);
        assert_eq!(q, p);
        assert!(TorusGrid::new(2, 4).is_err());
        assert!(TorusGrid::new(1, 16).is_err());
    }

    #[test]
    fn hessian_of_zero_is_zero() {
        let g = grid(2, 16);
        let h = complex_hessian(&ScalarField::zeros(g));
        assert!(h.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hessian_of_cosine() {
        let g = grid(2, 32);
        let h = g.spacing();
        let u = ScalarField::from_fn(g, |x| x[0].cos());
        let hess = complex_hessian(&u);
        let expected = -0.25 * (2.0 - 2.0 * h.cos()) / (h * h);
        assert!((hess.at(0)[0] - expected).abs() < 1e-12);
        assert!((hess.at(0)[0] + 0.25).abs() < 0.25 * h * h);

        let w = ScalarField::from_fn(g, |x| (x[0] + x[1]).cos());
        let hw = complex_hessian(&w);
        for p in [0, 5, 77, 300] {
            let x = g.coords(p);
            let exact = -0.25 * (x[0] + x[1]).cos();
            assert!((hw.at(p)[1] - exact).abs() < 0.25 * h * h);
            assert_eq!(hw.at(p)[1], hw.at(p)[2]);
        }
    }

    #[test]
    fn hessian_converges_at_second_order() {
        let err = |pts: usize| {
            let g = grid(2, pts);
            let u = ScalarField::from_fn(g, |x| (x[0] + 2.0 * x[1]).cos());
            let hess = complex_hessian(&u);
            (0..g.len())
                .map(|p| {
                    let x = g.coords(p);
                    let c = (x[0] + 2.0 * x[1]).cos();
                    let exact = [-0.25 * c, -0.5 * c, -0.5 * c, -c];
                    hess.at(p)
                        .iter()
                        .zip(exact)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!((ratio - 4.0).abs() <= 0.3, "ratio {ratio}");
    }

    #[test]
    fn chi_u_is_linear_in_u() {
        let g = grid(2, 16);
        let base = BaseForm::new(g, vec![1.0, 0.1, 0.1, 2.0], None, 2).unwrap();
        let u = ScalarField::from_fn(g, |x| 0.1 * x[0].sin() * x[1].cos());
        let w = ScalarField::from_fn(g, |x| 0.2 * (2.0 * x[1]).cos());
        let diff = chi_u(&base, &u.axpy(1.0, &w).unwrap())
            .unwrap()
            .sub(&chi_u(&base, &u).unwrap())
            .unwrap();
        let hw = complex_hessian(&w);
        for (a, b) in diff.data().iter().zip(hw.data()) {
            assert!((a - b).abs() < 1e-14);
        }
        let zero = chi_u(&base, &ScalarField::zeros(g)).unwrap();
        assert_eq!(zero.at(3), &[1.0, 0.1, 0.1, 2.0]);
    }

    #[test]
    fn small_eigen_examples() {
        let mut out = [0.0; 2];
        symmetric_eigenvalues(&[1.0, 0.0, 0.0, 2.0], 2, &mut out).unwrap();
        assert_eq!(out, [1.0, 2.0]);
        symmetric_eigenvalues(&[0.0, 1.0, 1.0, 0.0], 2, &mut out).unwrap();
        assert_eq!(out, [-1.0, 1.0]);
        symmetric_eigenvalues(&[2.0, 0.0, 0.0, 1.0], 2, &mut out).unwrap();
        assert_eq!(out, [1.0, 2.0]);
        let mut out3 = [0.0; 3];
        symmetric_eigenvalues(&[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0], 3, &mut out3)
            .unwrap();
        assert!(out3
            .iter()
            .zip([1.0, 2.0, 3.0])
            .all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn scalar_base_has_constant_spectrum() {
        let g = grid(3, 8);
        let base = BaseForm::scalar(g, 1.5, 3).unwrap();
        let s = spectrum_field(base.field()).unwrap();
        assert!(s.iter().all(|lam| lam.iter().all(|&x| x == 1.5)));
        assert!(BaseForm::scalar(g, -1.0, 1).is_err());
    }

    #[test]
    fn base_outside_cone_is_rejected() {
        let g = grid(2, 16);
        // χ_11 = 1 - 1.2 cos(x_1) goes negative
        let rho = ScalarField::from_fn(g, |x| {
            1.2 * x[0].cos() * (g.spacing() * g.spacing()) / (2.0 - 2.0 * g.spacing().cos()) * 4.0
        });
        let err = BaseForm::new(g, vec![1.0, 0.0, 0.0, 1.0], Some(rho), 2).unwrap_err();
        assert!(
            matches!(err, Error::ConeViolation { point: Some(0), .. }),
            "{err}"
        );
    }

    #[test]
    fn integration_examples() {
        let g = grid(2, 32);
        let tau2 = (2.0 * PI).powi(2);
        assert!((integrate(&ScalarField::constant(g, 1.0)) - tau2).abs() < 1e-12);
        assert!(integrate(&ScalarField::from_fn(g, |x| x[0].cos())).abs() < 1e-13);
        let c2 = integrate(&ScalarField::from_fn(g, |x| x[0].cos().powi(2)));
        assert!((c2 - 0.5 * tau2).abs() < 1e-12);
        for freq in [[1, 0], [0, 3], [2, -5], [7, 7]] {
            let f = ScalarField::from_fourier(
                g,
                &[
                    FourierTerm::sin(1.0, freq.to_vec()),
                    FourierTerm::cos(2.0, freq.to_vec()),
                ],
            )
            .unwrap();
            assert!(integrate(&f).abs() < 1e-13);
        }
    }

    #[test]
    fn shifting_by_a_period_changes_nothing() {
        let g = grid(2, 16);
        let f = |x: &[f64]| (x[0] + 2.0 * x[1]).sin() + 0.3 * x[1].cos();
        let u = ScalarField::from_fn(g, f);
        let shifted = ScalarField::from_fn(g, |x| f(&[x[0] + 2.0 * PI, x[1] - 2.0 * PI]));
        let a = complex_hessian(&u);
        let b = complex_hessian(&shifted);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let g = grid(2, 8);
        let u = ScalarField::from_fn(g, |x| (x[0] * 1.37).sin() / 3.0 + 1e-300 * x[1]);
        let text = write_snapshot(&u, "u", 0.1 + 0.2);
        let snap = read_snapshot(&text).unwrap();
        assert_eq!(snap.name, "u");
        assert_eq!(snap.t.to_bits(), (0.1f64 + 0.2).to_bits());
        for (a, b) in snap.field.values().iter().zip(u.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(read_snapshot("nope").is_err());
        let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(read_snapshot(&truncated).is_err());
    }

    #[test]
    fn stencil_wraps_like_shift() {
        let g = grid(3, 8);
        let u = ScalarField::from_fn(g, |x| {
            (x[0] + 2.0 * x[1]).sin() + (x[2] - x[0]).cos() * x[1].cos()
        });
        let h = g.spacing();
        let field = complex_hessian_with(Exec::Sequential, &u);
        let v = u.values();
        for p in 0..g.len() {
            for i in 0..3 {
                let (ip, im) = (g.shift(p, i, 1), g.shift(p, i, -1));
                let d = 0.25 * (v[ip] - 2.0 * v[p] + v[im]) / (h * h);
                assert!((field.at(p)[i * 3 + i] - d).abs() < 1e-12);
                for j in (i + 1)..3 {
                    let x = v[g.shift(ip, j, 1)] - v[g.shift(ip, j, -1)] - v[g.shift(im, j, 1)]
                        + v[g.shift(im, j, -1)];
                    let x = 0.25 * x / (4.0 * h * h);
                    assert!((field.at(p)[i * 3 + j] - x).abs() < 1e-12);
                    assert_eq!(field.at(p)[i * 3 + j], field.at(p)[j * 3 + i]);
                }
            }
        }
    }
}
