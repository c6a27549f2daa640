//! Run orchestration: TOML configs, presets, and artifact emission.
//!
//! A config document looks like
//!
//! ```toml
//! scenario = "classical-jflow"
//! n = 2
//! points = 32
//! k = 2
//! l = 1            # or `weights = [b_0, .., b_{k-1}]`
//!
//! [base]
//! diagonal = [1.0, 2.0]          # or `matrix = [[..], ..]`
//! potential = [{ amplitude = 0.05, freq = [1, 1] }]
//!
//! [flow]
//! dt_initial = 0.01
//! integrator = "euler"
//! ```
//!
//! Everything except `n`, `k` and one of `l`/`weights` has a default, and
//! every default applied is listed in `metadata.json`.

use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::conecheck::{check_cone, search_cone, ConeReport, SearchOptions};
use crate::error::{Error, Result};
use crate::flow::{write_csv, FlowConfig, FlowProblem, Integrator, RunOutcome, RunStatus};
use crate::functionals::{normalization_c, FunctionalReport};
use crate::geometry::{write_snapshot, BaseForm, FourierTerm, ScalarField, TorusGrid};
use crate::symfunc::{FlowIndices, MAX_DIM};

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &[
    "classical-jflow",
    "stationary",
    "weighted",
    "general",
    "adversarial",
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<String>,
    seed: Option<u64>,
    n: Option<Spanned<usize>>,
    points: Option<Spanned<usize>>,
    k: Option<Spanned<usize>>,
    l: Option<Spanned<usize>>,
    weights: Option<Spanned<Vec<f64>>>,
    base: Option<RawBase>,
    initial: Option<RawInitial>,
    flow: Option<RawFlow>,
    search: Option<RawSearch>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBase {
    matrix: Option<Spanned<Vec<Vec<f64>>>>,
    diagonal: Option<Spanned<Vec<f64>>>,
    potential: Option<Spanned<Vec<FourierTerm>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    potential: Option<Spanned<Vec<FourierTerm>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    dt_initial: Option<Spanned<f64>>,
    dt_min: Option<Spanned<f64>>,
    safety: Option<Spanned<f64>>,
    t_max: Option<Spanned<f64>>,
    residual_tol: Option<Spanned<f64>>,
    integrator: Option<Integrator>,
    max_steps: Option<usize>,
    report_every: Option<Spanned<usize>>,
    backtrack_warn: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    enabled: Option<bool>,
    max_freq: Option<Spanned<i32>>,
    budget: Option<usize>,
    initial_step: Option<Spanned<f64>>,
    min_step: Option<Spanned<f64>>,
    symmetric: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    snapshot_every: Option<usize>,
}

/// Base form `H0 + i∂∂̄ρ`: constant matrix and Fourier potential.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseSpec {
    pub matrix: Vec<Vec<f64>>,
    pub potential: Vec<FourierTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSettings {
    pub dt_initial: f64,
    pub dt_min: f64,
    pub safety: f64,
    pub t_max: f64,
    pub residual_tol: f64,
    pub integrator: Integrator,
    pub max_steps: usize,
    pub report_every: usize,
    pub backtrack_warn: usize,
}

/// Cone-certificate search run before the flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSettings {
    /// Search only when `v ≡ 0` does not already certify.
    pub enabled: bool,
    pub max_freq: i32,
    pub budget: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSettings {
    /// Write `snapshots/u_<step>.txt` every this many steps; 0 writes only the
    /// initial and final states.
    pub snapshot_every: usize,
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: String,
    pub seed: u64,
    pub n: usize,
    pub points: usize,
    pub k: usize,
    /// Single-index mode.
    pub l: Option<usize>,
    /// Weighted mode, `b_0 .. b_{k-1}`.
    pub weights: Option<Vec<f64>>,
    pub base: BaseSpec,
    pub initial: Vec<FourierTerm>,
    pub flow: FlowSettings,
    pub search: SearchSettings,
    pub output: OutputSettings,
    /// Dotted keys that were filled from defaults.
    #[serde(skip)]
    pub defaults_applied: Vec<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    text: &'a str,
    defaults: Vec<String>,
}

impl Ctx<'_> {
    fn err<T>(
        &self,
        span: Option<std::ops::Range<usize>>,
        message: impl Into<String>,
    ) -> Result<T> {
        Err(Error::Parse {
            line: span.map_or(0, |s| line_of(self.text, s.start)),
            message: message.into(),
        })
    }

    fn or_default<T>(&mut self, key: &str, value: Option<T>, default: T) -> T {
        value.unwrap_or_else(|| {
            self.defaults.push(key.to_string());
            default
        })
    }

    fn spanned_or_default<T>(
        &mut self,
        key: &str,
        value: Option<Spanned<T>>,
        default: T,
    ) -> (T, Option<std::ops::Range<usize>>) {
        match value {
            Some(s) => {
                let span = s.span();
                (s.into_inner(), Some(span))
            }
            None => {
                self.defaults.push(key.to_string());
                (default, None)
            }
        }
    }
}

/// Parses and validates a TOML config. Constraint violations are reported
/// with the line of the offending key (line 0 when the key was defaulted).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let mut cx = Ctx {
        text,
        defaults: Vec::new(),
    };

    let scenario = cx.or_default("scenario", raw.scenario, "custom".to_string());
    let seed = cx.or_default("seed", raw.seed, 0);
    let Some(n) = raw.n else {
        return cx.err(None, "missing required key `n`");
    };
    let Some(k) = raw.k else {
        return cx.err(None, "missing required key `k`");
    };
    let (n_span, n) = (n.span(), n.into_inner());
    let (k_span, k) = (k.span(), k.into_inner());
    if !(2..=MAX_DIM).contains(&n) {
        return cx.err(Some(n_span), format!("n = {n} outside 2..={MAX_DIM}"));
    }
    if !(1..=n).contains(&k) {
        return cx.err(
            Some(k_span),
            format!("need n ≥ k ≥ 1, got n = {n}, k = {k}"),
        );
    }
    let (l, weights) = match (raw.l, raw.weights) {
        (Some(_), Some(w)) => {
            return cx.err(Some(w.span()), "give either `l` or `weights`, not both")
        }
        (None, None) => {
            return cx.err(
                None,
                "missing `l` (single mode) or `weights` (weighted mode)",
            )
        }
        (Some(l), None) => {
            let (span, l) = (l.span(), l.into_inner());
            if !(l >= 1 && l < k) {
                return cx.err(
                    Some(span),
                    format!("indices must satisfy n ≥ k > l ≥ 1, got n = {n}, k = {k}, l = {l}"),
                );
            }
            (Some(l), None)
        }
        (None, Some(w)) => {
            let (span, w) = (w.span(), w.into_inner());
            if w.len() != k {
                return cx.err(
                    Some(span),
                    format!(
                        "weights must list b_0 .. b_{{k-1}}: expected {k}, got {}",
                        w.len()
                    ),
                );
            }
            if w.iter().any(|b| !b.is_finite() || *b < 0.0) {
                return cx.err(
                    Some(span),
                    "weights must be finite and non-negative (b_m ≥ 0)",
                );
            }
            if !(w.iter().sum::<f64>() > 0.0) {
                return cx.err(Some(span), "weights must not all vanish (Σ b_m > 0)");
            }
            (None, Some(w))
        }
    };

    let (points, points_span) = cx.spanned_or_default("points", raw.points, 32);
    if points < 8 {
        return cx.err(
            points_span,
            format!("points = {points} below the minimum of 8"),
        );
    }
    let cells = (points as f64).powi(n as i32);
    if cells > 1.0e8 {
        return cx.err(
            points_span,
            format!("grid of {points}^{n} points is too large"),
        );
    }

    let base_raw = raw.base.unwrap_or(RawBase {
        matrix: None,
        diagonal: None,
        potential: None,
    });
    let identity: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    let matrix = match (base_raw.matrix, base_raw.diagonal) {
        (Some(m), Some(_)) => {
            return cx.err(
                Some(m.span()),
                "give either `base.matrix` or `base.diagonal`, not both",
            )
        }
        (Some(m), None) => {
            let span = m.span();
            let m = m.into_inner();
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return cx.err(Some(span), format!("base.matrix must be {n}×{n}"));
            }
            for i in 0..n {
                for j in 0..i {
                    if m[i][j] != m[j][i] {
                        return cx.err(
                            Some(span),
                            format!("base.matrix is not symmetric at ({i}, {j})"),
                        );
                    }
                }
            }
            m
        }
        (None, Some(d)) => {
            let span = d.span();
            let d = d.into_inner();
            if d.len() != n {
                return cx.err(Some(span), format!("base.diagonal must have {n} entries"));
            }
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { d[i] } else { 0.0 }).collect())
                .collect()
        }
        (None, None) => {
            cx.defaults.push("base.matrix".into());
            identity
        }
    };
    if matrix.iter().flatten().any(|x| !x.is_finite()) {
        return cx.err(None, "base.matrix has non-finite entries");
    }
    let potential = check_terms(&mut cx, "base.potential", base_raw.potential, n)?;
    let initial = check_terms(
        &mut cx,
        "initial.potential",
        raw.initial.and_then(|i| i.potential),
        n,
    )?;

    let f = raw.flow.unwrap_or(RawFlow {
        dt_initial: None,
        dt_min: None,
        safety: None,
        t_max: None,
        residual_tol: None,
        integrator: None,
        max_steps: None,
        report_every: None,
        backtrack_warn: None,
    });
    let (dt_initial, dt_span) = cx.spanned_or_default("flow.dt_initial", f.dt_initial, 1e-2);
    let (dt_min, dt_min_span) = cx.spanned_or_default("flow.dt_min", f.dt_min, 1e-8);
    let (safety, safety_span) = cx.spanned_or_default("flow.safety", f.safety, 0.5);
    let (t_max, t_max_span) = cx.spanned_or_default("flow.t_max", f.t_max, 200.0);
    let (residual_tol, tol_span) = cx.spanned_or_default("flow.residual_tol", f.residual_tol, 1e-6);
    let integrator = cx.or_default("flow.integrator", f.integrator, Integrator::Euler);
    let max_steps = cx.or_default("flow.max_steps", f.max_steps, 1_000_000);
    let (report_every, report_span) =
        cx.spanned_or_default("flow.report_every", f.report_every, 100);
    let backtrack_warn = cx.or_default("flow.backtrack_warn", f.backtrack_warn, 20);
    if !(dt_initial > 0.0 && dt_initial.is_finite()) {
        return cx.err(dt_span, "flow.dt_initial must be positive");
    }
    if !(dt_min > 0.0 && dt_min < dt_initial) {
        return cx.err(
            dt_min_span.or(dt_span),
            "need 0 < flow.dt_min < flow.dt_initial",
        );
    }
    if !(safety > 0.0 && safety <= 1.0) {
        return cx.err(safety_span, "flow.safety must lie in (0, 1]");
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return cx.err(t_max_span, "flow.t_max must be finite and non-negative");
    }
    if !(residual_tol > 0.0) {
        return cx.err(tol_span, "flow.residual_tol must be positive");
    }
    if report_every == 0 {
        return cx.err(report_span, "flow.report_every must be positive");
    }

    let s = raw.search.unwrap_or(RawSearch {
        enabled: None,
        max_freq: None,
        budget: None,
        initial_step: None,
        min_step: None,
        symmetric: None,
    });
    let d = SearchOptions::default();
    let enabled = cx.or_default("search.enabled", s.enabled, true);
    let (max_freq, freq_span) = cx.spanned_or_default("search.max_freq", s.max_freq, d.max_freq);
    let budget = cx.or_default("search.budget", s.budget, d.budget);
    let (initial_step, step_span) =
        cx.spanned_or_default("search.initial_step", s.initial_step, d.initial_step);
    let (min_step, min_step_span) =
        cx.spanned_or_default("search.min_step", s.min_step, d.min_step);
    let symmetric = cx.or_default("search.symmetric", s.symmetric, d.symmetric);
    if !(1..=8).contains(&max_freq) {
        return cx.err(freq_span, "search.max_freq must lie in 1..=8");
    }
    if !(initial_step > 0.0) {
        return cx.err(step_span, "search.initial_step must be positive");
    }
    if !(min_step > 0.0) {
        return cx.err(min_step_span, "search.min_step must be positive");
    }

    let snapshot_every = cx.or_default(
        "output.snapshot_every",
        raw.output.and_then(|o| o.snapshot_every),
        0,
    );

    Ok(RunConfig {
        scenario,
        seed,
        n,
        points,
        k,
        l,
        weights,
        base: BaseSpec { matrix, potential },
        initial,
        flow: FlowSettings {
            dt_initial,
            dt_min,
            safety,
            t_max,
            residual_tol,
            integrator,
            max_steps,
            report_every,
            backtrack_warn,
        },
        search: SearchSettings {
            enabled,
            max_freq,
            budget,
            initial_step,
            min_step,
            symmetric,
        },
        output: OutputSettings { snapshot_every },
        defaults_applied: cx.defaults,
    })
}

fn check_terms(
    cx: &mut Ctx<'_>,
    key: &str,
    terms: Option<Spanned<Vec<FourierTerm>>>,
    n: usize,
) -> Result<Vec<FourierTerm>> {
    let Some(terms) = terms else {
        cx.defaults.push(key.to_string());
        return Ok(Vec::new());
    };
    let span = terms.span();
    let terms = terms.into_inner();
    for t in &terms {
        if t.freq.len() != n {
            return cx.err(
                Some(span.clone()),
                format!("{key}: frequency {:?} must have {n} entries", t.freq),
            );
        }
        if !t.amplitude.is_finite() {
            return cx.err(Some(span.clone()), format!("{key}: non-finite amplitude"));
        }
    }
    Ok(terms)
}

/// Applies `key.path=value` overrides to a TOML document. Values are parsed as
/// TOML and fall back to plain strings.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String> {
    if overrides.is_empty() {
        return Ok(text.to_string());
    }
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    for item in overrides {
        let (path, raw) = item.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "override `{item}` is not of the form key.path=value"
            ))
        })?;
        let value = parse_value(raw.trim());
        let keys: Vec<&str> = path.trim().split('.').collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(Error::Config(format!("override `{item}` has an empty key")));
        }
        let mut table = &mut doc;
        for key in &keys[..keys.len() - 1] {
            let entry = table
                .entry(key.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry.as_table_mut().ok_or_else(|| {
                Error::Config(format!("override `{item}`: `{key}` is not a table"))
            })?;
        }
        table.insert(keys[keys.len() - 1].to_string(), value);
    }
    toml::to_string(&doc).map_err(|e| Error::Config(format!("cannot re-serialize config: {e}")))
}

fn parse_value(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrapper {
        v: toml::Value,
    }
    toml::from_str::<Wrapper>(&format!("v = {raw}"))
        .map(|w| w.v)
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()))
}

/// TOML text of a named preset.
pub fn preset(name: &str) -> Result<String> {
    let text = match name {
        // k = n, l = n - 1 on a cone-certified base
        "classical-jflow" => {
            r#"scenario = "classical-jflow"
n = 2
points = 64
k = 2
l = 1

[base]
diagonal = [1.0, 2.0]
potential = [{ amplitude = 0.05, freq = [1, 1] }]

[flow]
dt_initial = 0.01
t_max = 200.0
residual_tol = 1e-6
report_every = 50
"#
        }
        "stationary" => {
            r#"scenario = "stationary"
n = 2
points = 16
k = 2
l = 1

[base]
diagonal = [1.0, 2.0]
"#
        }
        // b_0 χ^0 + b_1 χ^1 against χ^2
        "weighted" => {
            r#"scenario = "weighted"
n = 2
points = 64
k = 2
weights = [0.5, 1.0]

[base]
diagonal = [1.0, 2.0]
potential = [{ amplitude = 0.05, freq = [1, 1] }]

[flow]
dt_initial = 0.01
t_max = 200.0
report_every = 50
"#
        }
        "general" => {
            r#"scenario = "general"
n = 3
points = 12
k = 2
l = 1

[base]
diagonal = [1.0, 1.5, 2.0]
potential = [{ amplitude = 0.1, freq = [1, 1, 0] }, { amplitude = 0.05, freq = [0, 1, -1], kind = "sin" }]

[flow]
dt_initial = 0.01
t_max = 200.0
# the semi-discrete equilibrium drifts at a constant O(h²) rate, about 5e-6 here
residual_tol = 1e-5
report_every = 50
"#
        }
        // χ_11 = 1 - 0.97 cos 2x_1 drops to 0.03 while c = 1 needs λ > 1/2;
        // no frequency-1 candidate can lift both x_1 = 0 and x_1 = π. The
        // explicit step needed near λ = 0.03 is below dt_min, so the run stops
        // with a cone exit instead of crawling.
        "adversarial" => {
            r#"scenario = "adversarial"
n = 2
points = 32
k = 2
l = 1

[base]
diagonal = [1.0, 1.0]
potential = [{ amplitude = 0.97, freq = [2, 0] }]

[flow]
dt_initial = 0.01
dt_min = 1e-3
t_max = 20.0
report_every = 50

[search]
max_freq = 1
budget = 400
"#
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}`; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(text.to_string())
}

impl RunConfig {
    pub fn indices(&self) -> Result<FlowIndices> {
        match (&self.l, &self.weights) {
            (Some(l), None) => FlowIndices::single(self.n, self.k, *l),
            (None, Some(w)) => FlowIndices::weighted(self.n, self.k, w.clone()),
            _ => Err(Error::Config(
                "exactly one of `l` and `weights` must be set".into(),
            )),
        }
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.n, self.points)
    }

    pub fn base_form(&self) -> Result<BaseForm> {
        let grid = self.grid()?;
        let matrix: Vec<f64> = self.base.matrix.iter().flatten().copied().collect();
        let rho = if self.base.potential.is_empty() {
            None
        } else {
            Some(ScalarField::from_fourier(grid, &self.base.potential)?)
        };
        BaseForm::new(grid, matrix, rho, self.k).map_err(|e| match e {
            Error::ConeViolation { point, spectrum, k } => Error::Config(format!(
                "base form leaves Γ_{k} at grid point {point:?} (spectrum {spectrum:?})"
            )),
            other => other,
        })
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let base = self.base_form()?;
        let initial = if self.initial.is_empty() {
            None
        } else {
            Some(ScalarField::from_fourier(*base.grid(), &self.initial)?)
        };
        let f = &self.flow;
        Ok(FlowConfig {
            dt_initial: f.dt_initial,
            dt_min: f.dt_min,
            safety: f.safety,
            t_max: f.t_max,
            residual_tol: f.residual_tol,
            integrator: f.integrator,
            initial,
            max_steps: f.max_steps,
            report_every: f.report_every,
            backtrack_warn: f.backtrack_warn,
            ..FlowConfig::new(self.indices()?, base)
        })
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            max_freq: self.search.max_freq,
            budget: self.search.budget,
            seed: self.seed,
            initial_step: self.search.initial_step,
            min_step: self.search.min_step,
            symmetric: self.search.symmetric,
        }
    }
}

/// `cone_report.json`: the best certificate found plus search bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct ConeSummary {
    #[serde(flatten)]
    pub best: ConeReport,
    pub certified: bool,
    pub c: f64,
    /// Report for `v ≡ 0`.
    pub initial: ConeReport,
    pub search_evaluations: usize,
}

#[derive(Debug, Clone, Serialize)]
struct FunctionalSummary<'a> {
    status: RunStatus,
    #[serde(flatten)]
    final_report: &'a FunctionalReport,
    steps: usize,
    monitors: &'a crate::flow::Monitors,
    failure: &'a Option<String>,
    diagnostic_dump: &'a Option<crate::flow::DiagnosticDump>,
    history: Vec<&'a FunctionalReport>,
}

#[derive(Debug, Clone, Serialize)]
struct Metadata<'a> {
    jflow_version: &'static str,
    config: &'a RunConfig,
    defaults_applied: &'a [String],
    status: RunStatus,
    exit_code: i32,
    c: f64,
    steps: usize,
    t: f64,
    snapshots: &'a [String],
}

/// Results of [`run_scenario`].
#[derive(Debug)]
pub struct ScenarioOutcome {
    pub status: RunStatus,
    pub cone: ConeSummary,
    pub run: RunOutcome,
    pub out_dir: PathBuf,
}

/// Certifies the base, runs the flow and writes `run.csv`,
/// `cone_report.json`, `functional_report.json`, `snapshots/*.txt` and
/// `metadata.json` into `out_dir`.
pub fn run_scenario(config: &RunConfig, out_dir: &Path) -> Result<ScenarioOutcome> {
    run_scenario_with(config, out_dir, crate::exec::Exec::default())
}

pub fn run_scenario_with(
    config: &RunConfig,
    out_dir: &Path,
    exec: crate::exec::Exec,
) -> Result<ScenarioOutcome> {
    let flow_config = config.flow_config()?;
    let idx = flow_config.idx.clone();
    let base = flow_config.base.clone();
    let c = normalization_c(&base, &idx)?;
    info!(
        "scenario `{}`: n = {}, N = {}, c = {c:?}",
        config.scenario, config.n, config.points
    );

    let zero = ScalarField::zeros(*base.grid());
    let initial = check_cone(&zero, &base, &idx, c)?;
    let (best, evaluations) = if initial.certified() || !config.search.enabled {
        (initial.clone(), 1)
    } else {
        info!(
            "v = 0 does not certify the cone condition; searching up to frequency {}",
            config.search.max_freq
        );
        let found = search_cone(&base, &idx, c, &config.search_options())?;
        (found.best, found.evaluations)
    };
    let cone = ConeSummary {
        certified: best.certified(),
        best,
        c,
        initial,
        search_evaluations: evaluations,
    };
    if cone.certified {
        info!(
            "cone condition certified, min margin {:?}",
            cone.best.min_margin
        );
    } else {
        warn!("no cone certificate found in the search space");
    }

    fs::create_dir_all(out_dir.join("snapshots"))?;
    fs::write(
        out_dir.join("cone_report.json"),
        serde_json::to_string_pretty(&cone)?,
    )?;

    let problem = FlowProblem::new(flow_config)?.with_exec(exec);
    let every = config.output.snapshot_every;
    let mut snapshots = Vec::new();
    let write_snap =
        |u: &ScalarField, step: usize, t: f64, snapshots: &mut Vec<String>| -> Result<()> {
            let name = format!("u_{step:08}.txt");
            fs::write(
                out_dir.join("snapshots").join(&name),
                write_snapshot(u, "u", t),
            )?;
            snapshots.push(format!("snapshots/{name}"));
            Ok(())
        };
    let run = problem.run_observed(|state| {
        if state.steps == 0 || (every > 0 && state.steps % every == 0) {
            debug!(
                "t = {:?}, residual = {:e}",
                state.t, state.diagnostics.residual
            );
            write_snap(&state.u, state.steps, state.t, &mut snapshots)?;
        }
        Ok(())
    })?;
    let last = &run.final_state;
    if snapshots.last() != Some(&format!("snapshots/u_{:08}.txt", last.steps)) {
        write_snap(&last.u, last.steps, last.t, &mut snapshots)?;
    }

    let mut csv = Vec::new();
    write_csv(&mut csv, config.k, &run.history)?;
    fs::write(out_dir.join("run.csv"), csv)?;

    let final_record = run.history.last().expect("history holds the final state");
    let summary = FunctionalSummary {
        status: run.status,
        final_report: &final_record.report,
        steps: run.steps,
        monitors: &run.monitors,
        failure: &run.failure,
        diagnostic_dump: &run.dump,
        history: run.history.iter().map(|r| &r.report).collect(),
    };
    fs::write(
        out_dir.join("functional_report.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;

    let meta = Metadata {
        jflow_version: env!("CARGO_PKG_VERSION"),
        config,
        defaults_applied: &config.defaults_applied,
        status: run.status,
        exit_code: run.status.exit_code(),
        c,
        steps: run.steps,
        t: run.t,
        snapshots: &snapshots,
    };
    fs::write(
        out_dir.join("metadata.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    match run.status {
        RunStatus::Converged => info!("converged after {} steps at t = {:?}", run.steps, run.t),
        RunStatus::BudgetExhausted => warn!(
            "budget exhausted at t = {:?} after {} steps",
            run.t, run.steps
        ),
        RunStatus::ConeExit => warn!("cone exit: {}", run.failure.as_deref().unwrap_or("unknown")),
    }
    Ok(ScenarioOutcome {
        status: run.status,
        cone,
        run,
        out_dir: out_dir.to_path_buf(),
    })
}
