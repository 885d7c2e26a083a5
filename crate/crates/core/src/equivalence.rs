//! Executable equivalence checks between DeePC and SPC over seeded
//! scenario batches.
//!
//! Each check returns an [`EquivalenceReport`] holding the measured
//! deviations next to the tolerances; pass or fail is computed from those
//! two alone. Scenarios are independent, run in parallel on seeds derived
//! from the report seed, and are merged by index.

use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::bench::{run_closed_loop, ClosedLoopSpec, Controller, ControllerSpec};
use crate::data::{check_assumptions, collect_sequences, DataMatrices, DataShape, ExcitationSpec};
use crate::error::{Error, Result};
use crate::linalg::{null_space, numeric_rank, vstack};
use crate::lti::{simulate_with, NoiseSpec, StateSpaceModel};
use crate::ocp::{
    explicit_deepc_unconstrained, explicit_spc_unconstrained, BoxConstraints, Formulation, InitialWindow,
    RegWeights, RegulationObjective,
};
use crate::predictor::identify;
use crate::qp::QpOptions;
use crate::rng::{tag, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Theorem1,
    Theorem2,
    Lemma2,
    KernelInclusion,
}

impl ReportKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Theorem1 => "theorem1",
            Self::Theorem2 => "theorem2",
            Self::Lemma2 => "lemma2",
            Self::KernelInclusion => "kernel",
        }
    }
}

/// Measured infinity-norm deviations of one scenario; `None` when not
/// measured. The same struct carries the tolerances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Deviations {
    pub u: Option<f64>,
    pub y: Option<f64>,
    pub v: Option<f64>,
    pub objective: Option<f64>,
    pub closed_loop_u: Option<f64>,
    pub closed_loop_cost: Option<f64>,
    pub prediction: Option<f64>,
}

impl Deviations {
    pub fn entries(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("u", self.u),
            ("y", self.y),
            ("v", self.v),
            ("objective", self.objective),
            ("closed_loop_u", self.closed_loop_u),
            ("closed_loop_cost", self.closed_loop_cost),
            ("prediction", self.prediction),
        ]
    }

    /// Every toleranced entry was measured and is within tolerance; NaN
    /// never passes.
    pub fn within(&self, tol: &Deviations) -> bool {
        self.entries().iter().zip(tol.entries()).all(|((_, d), (_, t))| match t {
            None => true,
            Some(t) => d.is_some_and(|d| d <= t),
        })
    }

    fn max(&self, other: &Deviations) -> Deviations {
        let m = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => Some(if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) }),
            (a, None) => a,
            (None, b) => b,
        };
        Deviations {
            u: m(self.u, other.u),
            y: m(self.y, other.y),
            v: m(self.v, other.v),
            objective: m(self.objective, other.objective),
            closed_loop_u: m(self.closed_loop_u, other.closed_loop_u),
            closed_loop_cost: m(self.closed_loop_cost, other.closed_loop_cost),
            prediction: m(self.prediction, other.prediction),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub index: usize,
    pub seed: u64,
    pub deviations: Deviations,
    /// Set when the scenario could not be evaluated as intended.
    pub skipped: Option<String>,
    pub diagnostics: Vec<String>,
}

impl ScenarioResult {
    fn new(index: usize, seed: u64) -> Self {
        Self {
            index,
            seed,
            deviations: Deviations::default(),
            skipped: None,
            diagnostics: Vec::new(),
        }
    }

    /// Failure of a solve: every toleranced metric becomes NaN.
    fn failed(index: usize, seed: u64, err: &Error, tol: &Deviations) -> Self {
        let nan = |t: Option<f64>| t.map(|_| f64::NAN);
        let mut s = Self::new(index, seed);
        s.deviations = Deviations {
            u: nan(tol.u),
            y: nan(tol.y),
            v: nan(tol.v),
            objective: nan(tol.objective),
            closed_loop_u: nan(tol.closed_loop_u),
            closed_loop_cost: nan(tol.closed_loop_cost),
            prediction: nan(tol.prediction),
        };
        s.diagnostics.push(format!("error: {err}"));
        s
    }
}

/// A scalar check on the dataset as a whole.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl MetricCheck {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Descriptor {
    pub seed: u64,
    pub n_x: usize,
    pub t: usize,
    pub t_ini: usize,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub lambda_g: Option<f64>,
    pub lambda_sigma: Option<f64>,
    pub sigma_w: f64,
}

impl Descriptor {
    fn new(seed: u64, n_x: usize, shape: &DataShape, sigma_w: f64) -> Self {
        Self {
            seed,
            n_x,
            t: shape.t,
            t_ini: shape.t_ini,
            n: shape.n,
            m: shape.m,
            p: shape.p,
            lambda_g: None,
            lambda_sigma: None,
            sigma_w,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub kind: ReportKind,
    pub descriptor: Descriptor,
    pub tolerances: Deviations,
    /// Deviations are measured but not expected to meet the tolerances.
    pub informational: bool,
    pub scenarios: Vec<ScenarioResult>,
    pub checks: Vec<MetricCheck>,
    pub rank: Option<usize>,
    pub nullspace_dim: Option<usize>,
    pub notes: Vec<String>,
}

impl EquivalenceReport {
    fn new(kind: ReportKind, descriptor: Descriptor, tolerances: Deviations) -> Self {
        Self {
            kind,
            descriptor,
            tolerances,
            informational: false,
            scenarios: Vec::new(),
            checks: Vec::new(),
            rank: None,
            nullspace_dim: None,
            notes: Vec::new(),
        }
    }

    pub fn evaluated(&self) -> impl Iterator<Item = &ScenarioResult> {
        self.scenarios.iter().filter(|s| s.skipped.is_none())
    }

    pub fn scenario_passed(&self, s: &ScenarioResult) -> bool {
        s.skipped.is_none() && s.deviations.within(&self.tolerances)
    }

    /// At least one scenario or check evaluated, and all within tolerance.
    pub fn passed(&self) -> bool {
        let any = self.evaluated().next().is_some() || !self.checks.is_empty();
        any && self.evaluated().all(|s| s.deviations.within(&self.tolerances)) && self.checks.iter().all(MetricCheck::passed)
    }

    pub fn n_skipped(&self) -> usize {
        self.scenarios.iter().filter(|s| s.skipped.is_some()).count()
    }

    /// Largest deviation of each metric over the evaluated scenarios.
    pub fn max_deviations(&self) -> Deviations {
        self.evaluated().fold(Deviations::default(), |acc, s| acc.max(&s.deviations))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per scenario with the toleranced metrics, then the checks.
    pub fn render(&self) -> String {
        let cols: Vec<&'static str> = self
            .tolerances
            .entries()
            .iter()
            .filter(|(_, t)| t.is_some())
            .map(|(n, _)| *n)
            .collect();
        let d = &self.descriptor;
        let mut out = format!(
            "{} (T={}, T_ini={}, N={}, sigma_w={:e}){}\n",
            self.kind.label(),
            d.t,
            d.t_ini,
            d.n,
            d.sigma_w,
            if self.informational { " [informational]" } else { "" }
        );
        if !self.scenarios.is_empty() {
            let _ = write!(out, "{:>4} {:>20}", "#", "seed");
            for c in &cols {
                let _ = write!(out, " {:>16}", c);
            }
            out.push_str("  status\n");
            for s in &self.scenarios {
                let _ = write!(out, "{:>4} {:>20}", s.index, s.seed);
                for (name, v) in s.deviations.entries() {
                    if cols.contains(&name) {
                        let _ = write!(out, " {:>16}", v.map_or("-".into(), |v| format!("{v:.3e}")));
                    }
                }
                let status = match &s.skipped {
                    Some(_) => "skip",
                    None if s.deviations.within(&self.tolerances) => "ok",
                    None => "FAIL",
                };
                let _ = writeln!(out, "  {status}");
            }
            let _ = write!(out, "{:>4} {:>20}", "tol", "");
            for (name, t) in self.tolerances.entries() {
                if cols.contains(&name) {
                    let _ = write!(out, " {:>16}", format!("{:.1e}", t.unwrap_or(f64::NAN)));
                }
            }
            out.push('\n');
        }
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{}: {:.3e} (tol {:.1e}) {}",
                c.name,
                c.value,
                c.tolerance,
                if c.passed() { "ok" } else { "FAIL" }
            );
        }
        if let (Some(r), Some(k)) = (self.rank, self.nullspace_dim) {
            let _ = writeln!(out, "rank(M) = {r}, nullspace dimension = {k}");
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        let _ = writeln!(out, "result: {}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

fn inf(v: &DVector<f64>) -> f64 {
    crate::linalg::inf_norm(v)
}

/// Seed of scenario `index` within a report seeded with `seed`.
pub fn scenario_seed(seed: u64, index: usize) -> u64 {
    SeededRng::derive(seed, tag::SCENARIO, index as u64).next_seed()
}

/// The last `t_ini` samples of a genuine plant trajectory: state drawn
/// `N(0, I)`, inputs uniform on `[-0.7, 0.7]`, outputs with optional
/// measurement noise. Also returns the state after the window.
pub fn scenario_window(model: &StateSpaceModel, t_ini: usize, seed: u64, sigma_w: f64) -> Result<(InitialWindow, DVector<f64>)> {
    let mut rng = SeededRng::derive(seed, tag::SCENARIO, 0);
    let mut noise = SeededRng::derive(seed, tag::NOISE, 0);
    let x0 = rng.normal_vector(model.n(), 1.0);
    let exc = ExcitationSpec::default();
    let u: Vec<DVector<f64>> = (0..t_ini).map(|_| exc.draw_input(model.m(), &mut rng)).collect();
    let tr = simulate_with(model, &x0, &u, sigma_w, Some(&mut noise))?;
    let x_end = tr.x.as_ref().and_then(|x| x.last().cloned()).unwrap_or_else(|| DVector::zeros(model.n()));
    Ok((InitialWindow::new(tr.stacked_y(0..t_ini), tr.stacked_u(0..t_ini))?, x_end))
}

fn scenario_seeds(seed: u64, n: usize) -> Vec<(usize, u64)> {
    (0..n).map(|i| (i, scenario_seed(seed, i))).collect()
}

// ---------------------------------------------------------------------------
// Deterministic DeePC and SPC

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem1Options {
    /// Symmetric input bound of both problems.
    pub u_bound: f64,
    /// Also compare a noiseless closed loop seeded by each scenario.
    pub closed_loop: bool,
    pub n_excite: usize,
    pub n_control: usize,
    pub q_scale: f64,
    pub r_scale: f64,
}

impl Default for Theorem1Options {
    fn default() -> Self {
        Self {
            u_bound: 0.7,
            closed_loop: false,
            n_excite: 20,
            n_control: 60,
            q_scale: 1.0,
            r_scale: 0.1,
        }
    }
}

/// Deterministic DeePC against deterministic SPC on windows cut from
/// true plant trajectories, with the input box active where the window
/// demands it. Data are collected noiselessly with `seed`.
pub fn verify_theorem1(model: &StateSpaceModel, shape: DataShape, n_scenarios: usize, seed: u64) -> Result<EquivalenceReport> {
    verify_theorem1_with(model, shape, n_scenarios, seed, &Theorem1Options::default())
}

pub fn verify_theorem1_with(
    model: &StateSpaceModel,
    shape: DataShape,
    n_scenarios: usize,
    seed: u64,
    options: &Theorem1Options,
) -> Result<EquivalenceReport> {
    let data = collect_sequences(model, shape, &ExcitationSpec::default(), None, seed)?;
    verify_theorem1_on(model, &data, n_scenarios, seed, options)
}

/// [`verify_theorem1_with`] on given data.
pub fn verify_theorem1_on(
    model: &StateSpaceModel,
    data: &DataMatrices,
    n_scenarios: usize,
    seed: u64,
    options: &Theorem1Options,
) -> Result<EquivalenceReport> {
    let report = check_assumptions(data, Some(model), None);
    if !report.all_pass() {
        return Err(Error::AssumptionsViolated(Box::new(report)));
    }
    let shape = data.shape();
    let obj = RegulationObjective::scaled_identity(shape.p, shape.m, options.q_scale, options.r_scale)?;
    let bounds = BoxConstraints::input_box(shape.m, shape.p, options.u_bound);
    let weights = RegWeights::default();
    let deepc = ControllerSpec::new(Formulation::Deepc, obj.clone(), bounds.clone(), weights).build(data)?;
    let spc = ControllerSpec::new(Formulation::Spc, obj, bounds, weights).build(data)?;

    let tol = Deviations {
        u: Some(1e-6),
        y: Some(1e-6),
        objective: Some(1e-8),
        closed_loop_u: options.closed_loop.then_some(1e-6),
        closed_loop_cost: options.closed_loop.then_some(1e-8),
        ..Deviations::default()
    };
    let mut out = EquivalenceReport::new(ReportKind::Theorem1, Descriptor::new(seed, model.n(), &shape, 0.0), tol);
    out.scenarios = scenario_seeds(seed, n_scenarios)
        .into_par_iter()
        .map(|(i, s)| {
            theorem1_scenario(model, &deepc, &spc, i, s, options).unwrap_or_else(|e| ScenarioResult::failed(i, s, &e, &tol))
        })
        .collect();
    Ok(out)
}

fn theorem1_scenario(
    model: &StateSpaceModel,
    deepc: &Controller,
    spc: &Controller,
    index: usize,
    seed: u64,
    options: &Theorem1Options,
) -> Result<ScenarioResult> {
    let shape = deepc.shape();
    let (win, _) = scenario_window(model, shape.t_ini, seed, 0.0)?;
    let q = QpOptions::default();
    let d = deepc.solve(&win, &q)?;
    let s = spc.solve(&win, &q)?;
    let mut r = ScenarioResult::new(index, seed);
    r.deviations.u = Some(inf(&(&d.u - &s.u)));
    r.deviations.y = Some(inf(&(&d.y - &s.y)));
    r.deviations.objective = Some((d.objective - s.objective).abs());
    let active = d.u.iter().filter(|u| u.abs() >= options.u_bound - 1e-9).count();
    r.diagnostics.push(format!("active input bounds: {active}"));
    r.diagnostics.push(format!(
        "kkt deepc {:.1e}/{:.1e}, spc {:.1e}/{:.1e}",
        d.kkt.stationarity, d.kkt.primal, s.kkt.stationarity, s.kkt.primal
    ));
    if options.closed_loop {
        let spec = ClosedLoopSpec::new(options.n_excite.max(shape.t_ini), options.n_control, 0.0, seed);
        let a = run_closed_loop(model, deepc, &spec)?;
        let b = run_closed_loop(model, spc, &spec)?;
        let du = a.u.iter().zip(&b.u).map(|(x, y)| inf(&(x - y))).fold(0.0, f64::max);
        r.deviations.closed_loop_u = Some(du);
        r.deviations.closed_loop_cost = Some((a.cost - b.cost).abs());
        r.diagnostics.push(format!("closed-loop cost deepc {:.12e}, spc {:.12e}", a.cost, b.cost));
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Explicit regularized solutions on square data

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem2Options {
    pub n_scenarios: usize,
    pub sigma_w: f64,
    pub lambda_g: f64,
    pub lambda_sigma: f64,
    pub q_scale: f64,
    pub r_scale: f64,
}

impl Default for Theorem2Options {
    fn default() -> Self {
        Self {
            n_scenarios: 25,
            sigma_w: 1e-2,
            lambda_g: 0.0,
            lambda_sigma: 1e4,
            q_scale: 1.0,
            r_scale: 0.1,
        }
    }
}

/// Unconstrained regularized DeePC against regularized SPC with
/// `T = L m + T_ini p` columns. Every scenario draws a fresh noisy
/// dataset and window; datasets whose `M~` or `Y~_N` lose rank are
/// skipped. With `lambda_g > 0` the report is informational.
pub fn verify_theorem2(model: &StateSpaceModel, t_ini: usize, horizon: usize, seed: u64) -> Result<EquivalenceReport> {
    verify_theorem2_with(model, t_ini, horizon, seed, &Theorem2Options::default())
}

pub fn verify_theorem2_with(
    model: &StateSpaceModel,
    t_ini: usize,
    horizon: usize,
    seed: u64,
    options: &Theorem2Options,
) -> Result<EquivalenceReport> {
    let shape = DataShape::for_model(model, 1, t_ini, horizon)?;
    let shape = shape.with_t(shape.square_t());
    let obj = RegulationObjective::scaled_identity(shape.p, shape.m, options.q_scale, options.r_scale)?;
    let weights = RegWeights::new(options.lambda_g, options.lambda_sigma, options.lambda_sigma)?;
    let tol = Deviations {
        u: Some(1e-8),
        y: Some(1e-8),
        v: Some(1e-8),
        objective: Some(1e-9),
        ..Deviations::default()
    };
    let mut desc = Descriptor::new(seed, model.n(), &shape, options.sigma_w);
    desc.lambda_g = Some(options.lambda_g);
    desc.lambda_sigma = Some(options.lambda_sigma);
    let mut out = EquivalenceReport::new(ReportKind::Theorem2, desc, tol);
    out.informational = options.lambda_g != 0.0;
    if out.informational {
        out.notes.push("lambda_g > 0: the formulations are not expected to coincide".into());
    }
    out.scenarios = scenario_seeds(seed, options.n_scenarios)
        .into_par_iter()
        .map(|(i, s)| {
            theorem2_scenario(model, shape, &obj, &weights, options.sigma_w, i, s)
                .unwrap_or_else(|e| ScenarioResult::failed(i, s, &e, &tol))
        })
        .collect();
    Ok(out)
}

fn theorem2_scenario(
    model: &StateSpaceModel,
    shape: DataShape,
    obj: &RegulationObjective,
    weights: &RegWeights,
    sigma_w: f64,
    index: usize,
    seed: u64,
) -> Result<ScenarioResult> {
    let noise = (sigma_w > 0.0).then(|| NoiseSpec::new(sigma_w, seed ^ 0x5a5a)).transpose()?;
    let data = collect_sequences(model, shape, &ExcitationSpec::default(), noise.as_ref(), seed)?;
    let mut r = ScenarioResult::new(index, seed);
    let (rank_m, rank_y) = (numeric_rank(data.m()), numeric_rank(data.y_n()));
    let full_y = shape.t.min(shape.n * shape.p);
    r.diagnostics.push(format!("rank M = {rank_m}/{}, rank Y_N = {rank_y}/{full_y}", shape.t));
    if rank_m < shape.t || rank_y < full_y {
        r.skipped = Some("rank deficient data".into());
        return Ok(r);
    }
    let (win, _) = scenario_window(model, shape.t_ini, seed, sigma_w)?;
    let d = explicit_deepc_unconstrained(&data, &win, obj, weights)?;
    let s = explicit_spc_unconstrained(&identify(&data)?, &win, obj, weights)?;
    r.deviations.v = Some(inf(&(&d.v - &s.v)));
    r.deviations.u = Some(inf(&(d.u() - s.u())));
    r.deviations.y = Some(inf(&(&d.y - &s.y)));
    r.deviations.objective = Some((d.objective - s.objective).abs());
    r.diagnostics.push(format!("objective deepc {:.12e}, spc {:.12e}", d.objective, s.objective));
    Ok(r)
}

// ---------------------------------------------------------------------------
// Predictor exactness

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lemma2Options {
    /// Noise on the training data; windows are always noiseless.
    pub sigma_w: f64,
}

/// Identified predictor against fresh simulated trajectories of length
/// `L`, and against its own training columns.
pub fn verify_lemma2(model: &StateSpaceModel, shape: DataShape, n_windows: usize, seed: u64) -> Result<EquivalenceReport> {
    verify_lemma2_with(model, shape, n_windows, seed, &Lemma2Options::default())
}

pub fn verify_lemma2_with(
    model: &StateSpaceModel,
    shape: DataShape,
    n_windows: usize,
    seed: u64,
    options: &Lemma2Options,
) -> Result<EquivalenceReport> {
    let noise = (options.sigma_w > 0.0).then(|| NoiseSpec::new(options.sigma_w, seed ^ 0x5a5a)).transpose()?;
    let data = collect_sequences(model, shape, &ExcitationSpec::default(), noise.as_ref(), seed)?;
    let pred = identify(&data)?;
    let tol = Deviations {
        prediction: Some(1e-8),
        ..Deviations::default()
    };
    let mut out = EquivalenceReport::new(ReportKind::Lemma2, Descriptor::new(seed, model.n(), &shape, options.sigma_w), tol);
    out.informational = options.sigma_w > 0.0;
    if out.informational {
        out.notes.push("noisy training data: prediction errors are measured, not expected to meet the tolerance".into());
    }
    out.rank = Some(pred.effective_rank());
    let in_sample = (pred.matrix() * data.m() - data.y_n()).amax();
    out.checks.push(MetricCheck {
        name: "in_sample_error".into(),
        value: in_sample,
        tolerance: if out.informational { f64::INFINITY } else { 1e-10 },
    });
    let l = shape.l();
    out.scenarios = scenario_seeds(seed, n_windows)
        .into_par_iter()
        .map(|(i, s)| {
            let run = || -> Result<ScenarioResult> {
                let mut rng = SeededRng::derive(s, tag::SCENARIO, 0);
                let x0 = rng.normal_vector(model.n(), 1.0);
                let exc = ExcitationSpec::default();
                let u: Vec<DVector<f64>> = (0..l).map(|_| exc.draw_input(model.m(), &mut rng)).collect();
                let tr = simulate_with(model, &x0, &u, 0.0, None)?;
                let t0 = shape.t_ini;
                let y_hat = pred.predict(&tr.stacked_y(0..t0), &tr.stacked_u(0..t0), &tr.stacked_u(t0..l))?;
                let mut r = ScenarioResult::new(i, s);
                r.deviations.prediction = Some(inf(&(y_hat - tr.stacked_y(t0..l))));
                Ok(r)
            };
            run().unwrap_or_else(|e| ScenarioResult::failed(i, s, &e, &tol))
        })
        .collect();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Kernel inclusion

/// `||Y_N K||_F <= 1e-8 ||Y_N||_F` for an orthonormal basis `K` of the
/// nullspace of `M`. Informational on noisy data.
pub fn verify_kernel_inclusion(data: &DataMatrices) -> Result<EquivalenceReport> {
    let shape = data.shape();
    let (k, info) = null_space(data.m());
    let n_x = data.x1().map_or(0, |x| x.nrows());
    let mut out = EquivalenceReport::new(
        ReportKind::KernelInclusion,
        Descriptor::new(data.seed(), n_x, &shape, data.sigma_w()),
        Deviations::default(),
    );
    out.informational = data.sigma_w() > 0.0;
    let y_norm = data.y_n().norm();
    let ratio = if k.ncols() == 0 || y_norm == 0.0 {
        0.0
    } else {
        (data.y_n() * &k).norm() / y_norm
    };
    out.checks.push(MetricCheck {
        name: "kernel_ratio".into(),
        value: ratio,
        tolerance: 1e-8,
    });
    out.rank = Some(info.rank);
    out.nullspace_dim = Some(k.ncols());
    if k.ncols() == 0 {
        out.notes.push("empty nullspace: inclusion holds trivially".into());
    }
    if out.informational {
        out.notes.push("noisy data: inclusion is not expected".into());
    }
    // Rank of [M; Y_N] exceeding rank(M) is the same failure seen from rows.
    let stacked = numeric_rank(&vstack(&[data.m(), data.y_n()]));
    out.notes.push(format!("rank [M; Y_N] = {stacked}"));
    Ok(out)
}
