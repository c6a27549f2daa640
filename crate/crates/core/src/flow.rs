//! Explicit time integration of the general J-flow.
//!
//! Every accepted state has its χ_u spectrum strictly inside Γ_k at every grid
//! point: a tentative step that leaves the cone (at a stage or at the new
//! state) is rejected and retried with half the step. The step is also capped
//! by `safety · h² / D`, where `D` bounds the frozen-coefficient symbol of the
//! linearized operator.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::functionals::{
    dj_dt_from_spectra, energy_rate_from_spectra, j_functional, normalization_c, FunctionalReport,
};
use crate::geometry::{chi_spectra, BaseForm, ScalarField, SpectrumField};
use crate::symfunc::{
    cone_margin_indices, in_gamma_k, linearization_trace, quotient_parts, FlowIndices,
};

/// Time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk4,
}

impl Integrator {
    pub fn order(self) -> u32 {
        match self {
            Integrator::Euler => 1,
            Integrator::Rk4 => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub idx: FlowIndices,
    pub base: BaseForm,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub safety: f64,
    pub t_max: f64,
    pub residual_tol: f64,
    pub integrator: Integrator,
    /// Starting potential; zero when absent.
    pub initial: Option<ScalarField>,
    /// Hard cap on accepted steps, on top of `t_max`.
    pub max_steps: usize,
    /// Record a full row (with J functionals) every this many steps.
    pub report_every: usize,
    /// Backtracks beyond this count are flagged in the run summary.
    pub backtrack_warn: usize,
}

impl FlowConfig {
    /// Config with the documented defaults for everything but the flow data.
    pub fn new(idx: FlowIndices, base: BaseForm) -> Self {
        FlowConfig {
            idx,
            base,
            dt_initial: 1e-2,
            dt_min: 1e-8,
            safety: 0.5,
            t_max: 200.0,
            residual_tol: 1e-6,
            integrator: Integrator::Euler,
            initial: None,
            max_steps: 1_000_000,
            report_every: 100,
            backtrack_warn: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.idx.n() != self.base.grid().dim() {
            return bad("flow indices and grid disagree on n");
        }
        if !(self.dt_initial > 0.0 && self.dt_min > 0.0 && self.dt_min < self.dt_initial) {
            return bad("need 0 < dt_min < dt_initial");
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad("safety must lie in (0, 1]");
        }
        if !(self.residual_tol > 0.0) {
            return bad("residual_tol must be positive");
        }
        if !(self.t_max >= 0.0) {
            return bad("t_max must be non-negative");
        }
        if self.report_every == 0 {
            return bad("report_every must be positive");
        }
        if let Some(u0) = &self.initial {
            if u0.grid() != self.base.grid() {
                return bad("initial potential lives on a different grid");
            }
        }
        Ok(())
    }
}

/// χ_u spectra and the flow right-hand side at one potential.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub spectra: SpectrumField,
    pub rhs: ScalarField,
}

fn cone_error(spectra: &SpectrumField, p: usize, k: usize) -> Error {
    Error::ConeViolation {
        point: Some(p),
        spectrum: spectra.at(p).to_vec(),
        k,
    }
}

/// Spectra of χ_u and `c - quotient` at every point.
pub fn evaluate(
    exec: Exec,
    u: &ScalarField,
    base: &BaseForm,
    idx: &FlowIndices,
    c: f64,
) -> Result<Evaluation> {
    let spectra = chi_spectra(exec, base, u)?;
    if let Some(p) = spectra.first_outside(idx.k()) {
        return Err(cone_error(&spectra, p, idx.k()));
    }
    let values = exec::map_points(exec, spectra.len(), |p| {
        let (num, den) = quotient_parts(spectra.at(p), idx);
        c - num / den
    });
    let rhs = ScalarField::new(*u.grid(), values)?;
    Ok(Evaluation { spectra, rhs })
}

/// `c - Σ b_m χ_u^m∧ω^{n-m} / χ_u^k∧ω^{n-k}` pointwise.
pub fn rhs(u: &ScalarField, base: &BaseForm, idx: &FlowIndices, c: f64) -> Result<ScalarField> {
    evaluate(Exec::default(), u, base, idx, c).map(|e| e.rhs)
}

/// `sup |c - quotient|`, the critical-equation residual.
pub fn residual(u: &ScalarField, base: &BaseForm, idx: &FlowIndices, c: f64) -> Result<f64> {
    Ok(sup_abs(&rhs(u, base, idx, c)?))
}

fn sup_abs(f: &ScalarField) -> f64 {
    f.values().iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Stability scale `D = (n+3)/8 · max_x Σ_i a_i(x)`, with `a_i` the
/// linearization coefficients. Explicit Euler is stable for the frozen-
/// coefficient linearization when `dt ≤ h²/D`.
pub fn stability_scale(spectra: &SpectrumField, idx: &FlowIndices) -> Result<f64> {
    let n = spectra.dim() as f64;
    let traces = exec::try_map_points(Exec::default(), spectra.len(), |p| {
        linearization_trace(spectra.at(p), idx)
    })?;
    let max_trace = traces.iter().fold(0.0f64, |m, &x| m.max(x));
    Ok((n + 3.0) / 8.0 * max_trace)
}

/// Minimum cone margin of χ_u over the grid and its first location.
pub fn min_cone_margin(spectra: &SpectrumField, c: f64, idx: &FlowIndices) -> Result<(usize, f64)> {
    let margins = exec::try_map_points(Exec::default(), spectra.len(), |p| {
        cone_margin_indices(spectra.at(p), c, idx)
    })?;
    Ok(exec::min_with_index(&margins).expect("grid is non-empty"))
}

/// Cheap per-step diagnostics of an accepted state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub residual: f64,
    pub ut_min: f64,
    pub ut_max: f64,
    #[serde(rename = "dJk_dt")]
    pub dj_k_dt: f64,
    #[serde(rename = "dJl_dt")]
    pub dj_l_dt: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_cone_margin: f64,
    /// Smallest `σ_j(λ(x))`, `j ≤ k`, over the grid.
    pub min_sigma: f64,
}

impl StepDiagnostics {
    pub fn osc_u(&self) -> f64 {
        self.max_u - self.min_u
    }
}

fn diagnose(
    u: &ScalarField,
    eval: &Evaluation,
    idx: &FlowIndices,
    c: f64,
) -> Result<StepDiagnostics> {
    let (_, ut_min) = eval.rhs.min();
    let (_, ut_max) = eval.rhs.max();
    let (_, min_u) = u.min();
    let (_, max_u) = u.max();
    let (_, margin) = min_cone_margin(&eval.spectra, c, idx)?;
    let min_sigma = eval
        .spectra
        .iter()
        .map(|lam| {
            let e = crate::symfunc::sigma_all(lam);
            e[1..=idx.k()].iter().copied().fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(StepDiagnostics {
        residual: sup_abs(&eval.rhs),
        ut_min,
        ut_max,
        dj_k_dt: dj_dt_from_spectra(&eval.spectra, &eval.rhs, idx.k()),
        dj_l_dt: energy_rate_from_spectra(&eval.spectra, &eval.rhs, idx),
        min_u,
        max_u,
        min_cone_margin: margin,
        min_sigma,
    })
}

/// Solution state at one accepted time.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub u: ScalarField,
    pub t: f64,
    /// Step size the next attempt starts from.
    pub dt: f64,
    pub steps: usize,
    pub backtracks: usize,
    pub last_rhs: ScalarField,
    pub spectra: SpectrumField,
    pub diagnostics: StepDiagnostics,
    /// Step size actually used for the last accepted step.
    pub last_dt: f64,
}

/// Immutable data shared by every step of a run.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub config: FlowConfig,
    pub c: f64,
    exec: Exec,
}

impl FlowProblem {
    pub fn new(config: FlowConfig) -> Result<Self> {
        config.validate()?;
        let c = normalization_c(&config.base, &config.idx)?;
        Ok(FlowProblem {
            config,
            c,
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    fn eval(&self, u: &ScalarField) -> Result<Evaluation> {
        evaluate(self.exec, u, &self.config.base, &self.config.idx, self.c)
    }

    /// State at `t = 0`; fails if the initial χ_u leaves Γ_k.
    pub fn initial_state(&self) -> Result<FlowState> {
        let u = self
            .config
            .initial
            .clone()
            .unwrap_or_else(|| ScalarField::zeros(*self.config.base.grid()));
        let eval = self.eval(&u)?;
        let diagnostics = diagnose(&u, &eval, &self.config.idx, self.c)?;
        Ok(FlowState {
            u,
            t: 0.0,
            dt: self.config.dt_initial,
            steps: 0,
            backtracks: 0,
            last_rhs: eval.rhs,
            spectra: eval.spectra,
            diagnostics,
            last_dt: 0.0,
        })
    }

    /// Largest step allowed by the stability cap at `state`.
    pub fn stability_cap(&self, state: &FlowState) -> Result<f64> {
        let h = self.config.base.grid().spacing();
        let d = stability_scale(&state.spectra, &self.config.idx)?;
        Ok(if d > 0.0 {
            self.config.safety * h * h / d
        } else {
            f64::INFINITY
        })
    }

    /// Tentative update; errors if a stage leaves the cone.
    fn advance(&self, state: &FlowState, dt: f64) -> Result<(ScalarField, Evaluation)> {
        let u = &state.u;
        let u_new = match self.config.integrator {
            Integrator::Euler => u.axpy(dt, &state.last_rhs)?,
            Integrator::Rk4 => {
                let k1 = &state.last_rhs;
                let k2 = self.eval(&u.axpy(0.5 * dt, k1)?)?.rhs;
                let k3 = self.eval(&u.axpy(0.5 * dt, &k2)?)?.rhs;
                let k4 = self.eval(&u.axpy(dt, &k3)?)?.rhs;
                let values = (0..u.values().len())
                    .map(|p| {
                        u.values()[p]
                            + dt / 6.0
                                * (k1.values()[p]
                                    + 2.0 * k2.values()[p]
                                    + 2.0 * k3.values()[p]
                                    + k4.values()[p])
                    })
                    .collect();
                ScalarField::new(*u.grid(), values)?
            }
        };
        let eval = self.eval(&u_new)?;
        Ok((u_new, eval))
    }

    /// One accepted step, with backtracking on cone exit.
    pub fn step(&self, state: &FlowState) -> Result<FlowState> {
        let cap = self.stability_cap(state)?;
        let mut dt = state.dt.min(cap);
        let mut backtracks = 0;
        loop {
            if dt < self.config.dt_min {
                let reason = if cap < self.config.dt_min {
                    format!("stability cap {cap:e} below dt_min")
                } else {
                    format!("{backtracks} consecutive cone-exit backtracks")
                };
                return Err(Error::StepCollapse {
                    t: state.t,
                    dt,
                    dt_min: self.config.dt_min,
                    reason,
                });
            }
            match self.advance(state, dt) {
                Ok((u, eval)) => {
                    let diagnostics = diagnose(&u, &eval, &self.config.idx, self.c)?;
                    return Ok(FlowState {
                        u,
                        t: state.t + dt,
                        dt: if backtracks == 0 {
                            (2.0 * state.dt).min(self.config.dt_initial)
                        } else {
                            (2.0 * dt).min(self.config.dt_initial)
                        },
                        steps: state.steps + 1,
                        backtracks: state.backtracks + backtracks,
                        last_rhs: eval.rhs,
                        spectra: eval.spectra,
                        diagnostics,
                        last_dt: dt,
                    });
                }
                Err(Error::ConeViolation { .. }) => {
                    backtracks += 1;
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Full report (including J functionals) at `state`.
    pub fn report(&self, state: &FlowState) -> Result<FunctionalReport> {
        let j = (0..=self.config.idx.k())
            .map(|m| j_functional(&state.u, &self.config.base, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(FunctionalReport {
            t: state.t,
            j,
            c: self.c,
            dj_k_dt: state.diagnostics.dj_k_dt,
            dj_l_dt: state.diagnostics.dj_l_dt,
        })
    }

    fn record(&self, state: &FlowState) -> Result<RunRecord> {
        Ok(RunRecord {
            report: self.report(state)?,
            step: state.steps,
            dt: state.last_dt,
            diagnostics: state.diagnostics,
        })
    }

    /// Iterates [`FlowProblem::step`] until convergence, budget or failure.
    pub fn run(&self) -> Result<RunOutcome> {
        self.run_observed(|_| Ok(()))
    }

    /// Like [`FlowProblem::run`], calling `observe` on the initial state and
    /// after every accepted step.
    pub fn run_observed(
        &self,
        mut observe: impl FnMut(&FlowState) -> Result<()>,
    ) -> Result<RunOutcome> {
        let mut state = self.initial_state()?;
        observe(&state)?;
        let init = state.diagnostics;
        let mut monitors = Monitors::new(&init);
        let mut history = vec![self.record(&state)?];
        let status;
        let mut failure = None;
        loop {
            if state.diagnostics.residual < self.config.residual_tol {
                status = RunStatus::Converged;
                break;
            }
            if state.t >= self.config.t_max || state.steps >= self.config.max_steps {
                status = RunStatus::BudgetExhausted;
                break;
            }
            match self.step(&state) {
                Ok(next) => {
                    monitors.observe(&next.diagnostics, next.t, &init);
                    state = next;
                    observe(&state)?;
                    if state.steps % self.config.report_every == 0 {
                        history.push(self.record(&state)?);
                    }
                }
                Err(e @ (Error::StepCollapse { .. } | Error::ConeViolation { .. })) => {
                    status = RunStatus::ConeExit;
                    failure = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if history.last().map(|r| r.step) != Some(state.steps) {
            history.push(self.record(&state)?);
        }
        monitors.backtracks = state.backtracks;
        monitors.backtrack_flag = state.backtracks > self.config.backtrack_warn;
        let dump = (status != RunStatus::Converged).then(|| self.dump(&state, failure.clone()));
        Ok(RunOutcome {
            status,
            c: self.c,
            steps: state.steps,
            t: state.t,
            history,
            monitors,
            failure,
            dump,
            final_state: state,
        })
    }

    fn dump(&self, state: &FlowState, failure: Option<String>) -> DiagnosticDump {
        let grid = self.config.base.grid();
        let margins = min_cone_margin(&state.spectra, self.c, &self.config.idx).ok();
        let weakest = state
            .spectra
            .iter()
            .enumerate()
            .map(|(p, lam)| (p, crate::symfunc::sigma_all(lam)[self.config.idx.k()]))
            .fold(
                (0, f64::INFINITY),
                |best, (p, s)| if s < best.1 { (p, s) } else { best },
            );
        DiagnosticDump {
            failure,
            t: state.t,
            steps: state.steps,
            next_dt: state.dt,
            last_dt: state.last_dt,
            backtracks: state.backtracks,
            stability_cap: self.stability_cap(state).ok(),
            residual: state.diagnostics.residual,
            min_cone_margin: margins.map(|m| m.1),
            min_cone_margin_point: margins.map(|m| grid.coords(m.0)),
            weakest_sigma_k: weakest.1,
            weakest_point: grid.coords(weakest.0),
            weakest_spectrum: state.spectra.at(weakest.0).to_vec(),
            all_in_cone: state
                .spectra
                .iter()
                .all(|lam| in_gamma_k(lam, self.config.idx.k())),
            diagnostics: state.diagnostics,
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    ConeExit,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Converged => 0,
            RunStatus::BudgetExhausted => 2,
            RunStatus::ConeExit => 3,
        }
    }
}

/// One row of the run time series.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub report: FunctionalReport,
    pub step: usize,
    pub dt: f64,
    pub diagnostics: StepDiagnostics,
}

/// Extremes of the structural monitors over every accepted step.
#[derive(Debug, Clone, Serialize)]
pub struct Monitors {
    pub ut_min_initial: f64,
    pub ut_max_initial: f64,
    /// `max_t (max_x u_t - max_x u_t(·,0))`; ≤ 0 when the maximum principle holds.
    pub max_principle_upper_excess: f64,
    /// `max_t (min_x u_t(·,0) - min_x u_t)`.
    pub max_principle_lower_excess: f64,
    pub sup_osc_u: f64,
    pub max_dj_l_dt: f64,
    pub max_abs_dj_k_dt: f64,
    pub min_cone_margin: f64,
    /// Smallest `σ_j`, `j ≤ k`, seen at any accepted state; positive means every
    /// accepted state stayed strictly inside Γ_k.
    pub min_sigma: f64,
    pub backtracks: usize,
    pub backtrack_flag: bool,
    /// `(t, max_x u_t, min_x u_t)` after every accepted step.
    #[serde(skip)]
    pub ut_extrema: Vec<(f64, f64, f64)>,
    /// `(t, dJl/dt)` after every accepted step.
    #[serde(skip)]
    pub energy_rates: Vec<(f64, f64)>,
}

impl Monitors {
    fn new(init: &StepDiagnostics) -> Self {
        Monitors {
            ut_min_initial: init.ut_min,
            ut_max_initial: init.ut_max,
            max_principle_upper_excess: f64::NEG_INFINITY,
            max_principle_lower_excess: f64::NEG_INFINITY,
            sup_osc_u: init.osc_u(),
            max_dj_l_dt: init.dj_l_dt,
            max_abs_dj_k_dt: init.dj_k_dt.abs(),
            min_cone_margin: init.min_cone_margin,
            min_sigma: init.min_sigma,
            backtracks: 0,
            backtrack_flag: false,
            ut_extrema: vec![(0.0, init.ut_max, init.ut_min)],
            energy_rates: vec![(0.0, init.dj_l_dt)],
        }
    }

    fn observe(&mut self, d: &StepDiagnostics, t: f64, init: &StepDiagnostics) {
        self.max_principle_upper_excess =
            self.max_principle_upper_excess.max(d.ut_max - init.ut_max);
        self.max_principle_lower_excess =
            self.max_principle_lower_excess.max(init.ut_min - d.ut_min);
        self.sup_osc_u = self.sup_osc_u.max(d.osc_u());
        self.max_dj_l_dt = self.max_dj_l_dt.max(d.dj_l_dt);
        self.max_abs_dj_k_dt = self.max_abs_dj_k_dt.max(d.dj_k_dt.abs());
        self.min_cone_margin = self.min_cone_margin.min(d.min_cone_margin);
        self.min_sigma = self.min_sigma.min(d.min_sigma);
        self.ut_extrema.push((t, d.ut_max, d.ut_min));
        self.energy_rates.push((t, d.dj_l_dt));
    }
}

/// State snapshot written when a run does not converge.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticDump {
    pub failure: Option<String>,
    pub t: f64,
    pub steps: usize,
    pub next_dt: f64,
    pub last_dt: f64,
    pub backtracks: usize,
    pub stability_cap: Option<f64>,
    pub residual: f64,
    pub min_cone_margin: Option<f64>,
    pub min_cone_margin_point: Option<Vec<f64>>,
    pub weakest_sigma_k: f64,
    pub weakest_point: Vec<f64>,
    pub weakest_spectrum: Vec<f64>,
    pub all_in_cone: bool,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub c: f64,
    pub steps: usize,
    pub t: f64,
    pub history: Vec<RunRecord>,
    pub monitors: Monitors,
    pub failure: Option<String>,
    pub dump: Option<DiagnosticDump>,
    pub final_state: FlowState,
}

/// Convenience wrapper: builds the problem and runs it.
pub fn run(config: FlowConfig) -> Result<RunOutcome> {
    FlowProblem::new(config)?.run()
}

/// Writes the CSV time series: `t, J_0..J_k, residual, dJk_dt, dJl_dt, min_u,
/// max_u, osc_u, min_cone_margin`.
pub fn write_csv(mut out: impl Write, k: usize, history: &[RunRecord]) -> std::io::Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((0..=k).map(|m| format!("J_{m}")));
    header.extend(
        [
            "residual",
            "dJk_dt",
            "dJl_dt",
            "min_u",
            "max_u",
            "osc_u",
            "min_cone_margin",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    writeln!(out, "{}", header.join(","))?;
    for r in history {
        let d = &r.diagnostics;
        let mut row = vec![format!("{:?}", r.report.t)];
        row.extend(r.report.j.iter().map(|j| format!("{j:?}")));
        for v in [
            d.residual,
            d.dj_k_dt,
            d.dj_l_dt,
            d.min_u,
            d.max_u,
            d.osc_u(),
            d.min_cone_margin,
        ] {
            row.push(format!("{v:?}"));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
