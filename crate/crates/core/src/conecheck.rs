//! Cone-condition certificates for representatives `χ_v = χ + i∂∂̄v`.
//!
//! A report is positive evidence only: failing to find a certifying `v` in a
//! truncated Fourier space says nothing about the full class `[χ]`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::geometry::{
    complex_hessian, symmetric_eigenvalues, BaseForm, FourierTerm, HermitianPointField,
    ScalarField, Trig,
};
use crate::symfunc::{cone_components, in_gamma_k, FlowIndices, MAX_DIM};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    /// `min_x min_i (c·dominant_i - subordinate_i)`; `None` when χ_v leaves Γ_k.
    pub min_margin: Option<f64>,
    /// Largest ε with `(c - 2ε)` still certifying at every point; `None` when
    /// χ_v leaves Γ_k. Non-positive values mean no slack.
    pub epsilon_slack: Option<f64>,
    pub gamma_k_ok: bool,
    /// Coordinates of the worst point (smallest margin, or first cone exit).
    pub argmin_point: Vec<f64>,
    /// Fourier expansion of the candidate when it came from a search.
    pub fourier_coeffs: Vec<FourierTerm>,
}

impl ConeReport {
    /// Strictly positive margin inside Γ_k.
    pub fn certified(&self) -> bool {
        self.gamma_k_ok && self.min_margin.is_some_and(|m| m > 0.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy)]
enum PointVerdict {
    Outside,
    Inside { margin: f64, slack: f64 },
}

fn point_verdict(
    matrix: &[f64],
    n: usize,
    c: f64,
    idx: &FlowIndices,
    p: usize,
) -> Result<PointVerdict> {
    let mut lam = [0.0; MAX_DIM];
    symmetric_eigenvalues(matrix, n, &mut lam[..n])
        .map_err(|message| Error::Numerical { point: p, message })?;
    let lam = &lam[..n];
    if !in_gamma_k(lam, idx.k()) {
        return Ok(PointVerdict::Outside);
    }
    let mut margin = f64::INFINITY;
    let mut slack = f64::INFINITY;
    for (dominant, subordinate) in cone_components(lam, idx)? {
        margin = margin.min(c * dominant - subordinate);
        // (c - 2ε) dominant > subordinate  ⇔  ε < (c dominant - subordinate) / (2 dominant)
        slack = slack.min((c * dominant - subordinate) / (2.0 * dominant));
    }
    Ok(PointVerdict::Inside { margin, slack })
}

fn report_from_field(field: &HermitianPointField, c: f64, idx: &FlowIndices) -> Result<ConeReport> {
    let grid = *field.grid();
    let n = grid.dim();
    let verdicts = exec::try_map_points(Exec::default(), grid.len(), |p| {
        point_verdict(field.at(p), n, c, idx, p)
    })?;
    if let Some(p) = verdicts
        .iter()
        .position(|v| matches!(v, PointVerdict::Outside))
    {
        return Ok(ConeReport {
            min_margin: None,
            epsilon_slack: None,
            gamma_k_ok: false,
            argmin_point: grid.coords(p),
            fourier_coeffs: Vec::new(),
        });
    }
    let (margins, slacks): (Vec<f64>, Vec<f64>) = verdicts
        .iter()
        .map(|v| match v {
            PointVerdict::Inside { margin, slack } => (*margin, *slack),
            PointVerdict::Outside => unreachable!(),
        })
        .unzip();
    let (p, margin) = exec::min_with_index(&margins).expect("grid is non-empty");
    let slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConeReport {
        min_margin: Some(margin),
        epsilon_slack: Some(slack),
        gamma_k_ok: true,
        argmin_point: grid.coords(p),
        fourier_coeffs: Vec::new(),
    })
}

/// Checks the cone condition for `χ_v = χ + i∂∂̄v` at every grid point.
pub fn check_cone(
    v: &ScalarField,
    base: &BaseForm,
    idx: &FlowIndices,
    c: f64,
) -> Result<ConeReport> {
    if v.grid() != base.grid() {
        return Err(Error::arg(
            "candidate and base form live on different grids",
        ));
    }
    if idx.n() != base.grid().dim() {
        return Err(Error::arg("flow indices and grid disagree on n"));
    }
    report_from_field(&base.field().add(&complex_hessian(v))?, c, idx)
}

/// Search controls for [`search_cone`].
#[derive(Debug, Clone, Serialize)]
pub struct SearchOptions {
    /// Largest frequency per axis in the candidate basis.
    pub max_freq: i32,
    /// Objective evaluations allowed.
    pub budget: usize,
    pub seed: u64,
    pub initial_step: f64,
    /// Stop once the probe step falls below this.
    pub min_step: f64,
    /// Search over orbit sums under axis permutations, so the candidate is
    /// permutation symmetric.
    pub symmetric: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_freq: 1,
            budget: 400,
            seed: 0,
            initial_step: 0.1,
            min_step: 1e-4,
            symmetric: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    /// Report for `v ≡ 0`.
    pub initial: ConeReport,
    pub best: ConeReport,
    pub evaluations: usize,
}

impl SearchResult {
    pub fn certified(&self) -> bool {
        self.best.certified()
    }
}

/// `q` with its first nonzero entry made positive, and the sign flip applied.
fn canonical(q: &[i32]) -> (Vec<i32>, f64) {
    match q.iter().find(|&&x| x != 0) {
        Some(&x) if x < 0 => (q.iter().map(|v| -v).collect(), -1.0),
        _ => (q.to_vec(), 1.0),
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Search directions: each is a list of unit Fourier terms with signs.
fn basis_directions(n: usize, max_freq: i32, symmetric: bool) -> Vec<Vec<FourierTerm>> {
    let side = (2 * max_freq + 1) as usize;
    let mut freqs = Vec::new();
    for code in 0..side.pow(n as u32) {
        let mut c = code;
        let q: Vec<i32> = (0..n)
            .map(|_| {
                let v = (c % side) as i32 - max_freq;
                c /= side;
                v
            })
            .collect();
        let (canon, _) = canonical(&q);
        if q.iter().any(|&x| x != 0) && canon == q {
            freqs.push(q);
        }
    }
    freqs.sort();
    let mut dirs: Vec<Vec<FourierTerm>> = Vec::new();
    let mut seen: Vec<(Vec<i32>, Trig)> = Vec::new();
    let perms = if symmetric {
        permutations(n)
    } else {
        vec![(0..n).collect()]
    };
    for q in &freqs {
        for kind in [Trig::Cos, Trig::Sin] {
            if seen.contains(&(q.clone(), kind)) {
                continue;
            }
            let mut terms: Vec<FourierTerm> = Vec::new();
            for perm in &perms {
                let pq: Vec<i32> = perm.iter().map(|&a| q[a]).collect();
                let (cq, sign) = canonical(&pq);
                let amp = match kind {
                    Trig::Cos => 1.0,
                    Trig::Sin => sign,
                };
                seen.push((cq.clone(), kind));
                match terms.iter_mut().find(|t| t.freq == cq) {
                    Some(t) => t.amplitude += amp,
                    None => terms.push(FourierTerm {
                        amplitude: amp,
                        freq: cq,
                        kind,
                    }),
                }
            }
            terms.retain(|t| t.amplitude != 0.0);
            if !terms.is_empty() {
                dirs.push(terms);
            }
        }
    }
    dirs
}

/// Coordinate ascent on `min_margin` over a truncated Fourier space,
/// starting from `v ≡ 0`. Deterministic for a fixed seed.
pub fn search_cone(
    base: &BaseForm,
    idx: &FlowIndices,
    c: f64,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    let grid = *base.grid();
    let dirs = basis_directions(grid.dim(), opts.max_freq, opts.symmetric);
    let hessians = dirs
        .iter()
        .map(|terms| ScalarField::from_fourier(grid, terms).map(|f| complex_hessian(&f)))
        .collect::<Result<Vec<_>>>()?;

    let field_for = |coeffs: &[f64]| -> Result<HermitianPointField> {
        let mut field = base.field().clone();
        for (a, h) in coeffs.iter().zip(&hessians) {
            if *a != 0.0 {
                field = field.axpy(*a, h)?;
            }
        }
        Ok(field)
    };
    let objective = |report: &ConeReport| {
        report
            .min_margin
            .filter(|_| report.gamma_k_ok)
            .unwrap_or(f64::NEG_INFINITY)
    };

    let mut coeffs = vec![0.0; dirs.len()];
    let initial = report_from_field(base.field(), c, idx)?;
    let mut best_value = objective(&initial);
    let mut evaluations = 1;
    let mut step = opts.initial_step;
    let mut order: Vec<usize> = (0..dirs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    'outer: while step >= opts.min_step && !dirs.is_empty() {
        if !opts.symmetric {
            order.shuffle(&mut rng);
        }
        let mut improved = false;
        for &j in &order {
            for sign in [1.0, -1.0] {
                if evaluations >= opts.budget {
                    break 'outer;
                }
                let mut trial = coeffs.clone();
                trial[j] += sign * step;
                let report = report_from_field(&field_for(&trial)?, c, idx)?;
                evaluations += 1;
                let value = objective(&report);
                if value > best_value {
                    best_value = value;
                    coeffs = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let terms = expand_terms(&dirs, &coeffs);
    let mut best = report_from_field(&field_for(&coeffs)?, c, idx)?;
    best.fourier_coeffs = terms;
    Ok(SearchResult {
        initial,
        best,
        evaluations,
    })
}

fn expand_terms(dirs: &[Vec<FourierTerm>], coeffs: &[f64]) -> Vec<FourierTerm> {
    let mut out: Vec<FourierTerm> = Vec::new();
    for (terms, a) in dirs.iter().zip(coeffs) {
        if *a == 0.0 {
            continue;
        }
        for t in terms {
            match out
                .iter_mut()
                .find(|o| o.freq == t.freq && o.kind == t.kind)
            {
                Some(o) => o.amplitude += a * t.amplitude,
                None => out.push(FourierTerm {
                    amplitude: a * t.amplitude,
                    freq: t.freq.clone(),
                    kind: t.kind,
                }),
            }
        }
    }
    out.retain(|t| t.amplitude != 0.0);
    out
}

/// Field of a search result's candidate on the base grid.
pub fn candidate_field(base: &BaseForm, report: &ConeReport) -> Result<ScalarField> {
    ScalarField::from_fourier(*base.grid(), &report.fourier_coeffs)
}
