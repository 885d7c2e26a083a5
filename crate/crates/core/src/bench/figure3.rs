use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::{ClosedLoopSpec, Controller, ControllerSpec, Excitation, RunConfig};
use crate::data::{collect_sequences, DataMatrices, ExcitationSpec};
use crate::error::{Error, Result};
use crate::lti::{simulate, NoiseSpec, StateSpaceModel};
use crate::ocp::{Formulation, InitialWindow, RegWeights, SingularityPolicy};
use crate::qp::QpOptions;

/// One open-loop prediction of the comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Figure3Case {
    pub id: char,
    pub controller: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub lambda_g: Option<f64>,
    /// Horizon-major, `N x m`.
    pub u: Vec<Vec<f64>>,
    pub y_pred: Vec<Vec<f64>>,
    /// Noiseless plant response to `u` from the true state.
    pub y_true: Vec<Vec<f64>>,
    pub objective: Option<f64>,
    /// `sum y'Q y + u'R u` of the predicted trajectory.
    pub open_loop_cost: Option<f64>,
    /// `max |y_pred - y_true|`.
    pub prediction_gap: Option<f64>,
    pub annotation: Option<String>,
    pub error: Option<String>,
}

impl Figure3Case {
    /// `k,u_1..,y_pred_1..,y_true_1..`.
    pub fn to_csv(&self) -> String {
        let m = self.u.first().map_or(0, Vec::len);
        let p = self.y_pred.first().map_or(0, Vec::len);
        let mut out = String::from("k");
        for i in 1..=m {
            let _ = write!(out, ",u{i}");
        }
        for i in 1..=p {
            let _ = write!(out, ",y_pred{i}");
        }
        for i in 1..=p {
            let _ = write!(out, ",y_true{i}");
        }
        out.push('\n');
        for k in 0..self.u.len() {
            let _ = write!(out, "{k}");
            for v in self.u[k].iter().chain(&self.y_pred[k]).chain(&self.y_true[k]) {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Figure3Output {
    pub seed: u64,
    pub y_ini: Vec<f64>,
    pub u_ini: Vec<f64>,
    pub cases: Vec<Figure3Case>,
}

impl Figure3Output {
    pub fn case(&self, id: char) -> Option<&Figure3Case> {
        self.cases.iter().find(|c| c.id == id)
    }

    /// Writes `figure3_<id>.csv` per case; returns the file names.
    pub fn save(&self, dir: &Path) -> Result<Vec<String>> {
        let mut names = Vec::new();
        for c in &self.cases {
            let name = format!("figure3_{}.csv", c.id);
            std::fs::write(dir.join(&name), c.to_csv())?;
            names.push(name);
        }
        Ok(names)
    }
}

/// The six cases: regularized DeePC with `lambda_g` 0 and the configured
/// value, and regularized SPC, each at `T = 100` and `T = 150`.
fn case_table(config: &RunConfig) -> [(char, Formulation, usize, Option<f64>); 6] {
    let lg = config.lambda_g;
    [
        ('a', Formulation::DeepcRegularized, 100, Some(0.0)),
        ('b', Formulation::DeepcRegularized, 100, Some(lg)),
        ('c', Formulation::SpcRegularized, 100, None),
        ('d', Formulation::DeepcRegularized, 150, Some(0.0)),
        ('e', Formulation::DeepcRegularized, 150, Some(lg)),
        ('f', Formulation::SpcRegularized, 150, None),
    ]
}

/// Open-loop comparison on one noisy window shared by all cases.
///
/// The window ends a noisy excitation from rest with the configured seed;
/// the datasets for `T = 100` and `T = 150` share their first columns.
pub fn run_figure3(config: &RunConfig) -> Result<Figure3Output> {
    config.validate()?;
    let model = config.model()?;
    let shape = config.shape(&model, 150)?;
    let noise = NoiseSpec::new(config.sigma_w, config.seed)?;
    let data = collect_sequences(&model, shape, &ExcitationSpec::default(), Some(&noise), config.seed)?;
    let exc = Excitation::run(&model, &ClosedLoopSpec::new(config.n_excite, 0, config.sigma_w, config.seed));
    let win = exc.window(config.t_ini)?;
    figure3_from_window(config, &model, &data, &win, &exc.x)
}

/// The cases for a given window and true state; `data` must have at
/// least 150 columns.
pub fn figure3_from_window(
    config: &RunConfig,
    model: &StateSpaceModel,
    data: &DataMatrices,
    win: &InitialWindow,
    x_true: &DVector<f64>,
) -> Result<Figure3Output> {
    let d100 = data.truncated(100)?;
    let d150 = data.truncated(150)?;
    let cases = case_table(config)
        .into_par_iter()
        .map(|(id, f, t, lg)| {
            let data = if t == 100 { &d100 } else { &d150 };
            run_case(config, model, data, win, x_true, id, f, lg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Figure3Output {
        seed: config.seed,
        y_ini: win.y_ini.as_slice().to_vec(),
        u_ini: win.u_ini.as_slice().to_vec(),
        cases,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_case(
    config: &RunConfig,
    model: &StateSpaceModel,
    data: &DataMatrices,
    win: &InitialWindow,
    x_true: &DVector<f64>,
    id: char,
    f: Formulation,
    lambda_g: Option<f64>,
) -> Result<Figure3Case> {
    let weights = RegWeights::new(lambda_g.unwrap_or(config.lambda_g), config.lambda_sigma, config.lambda_sigma)?;
    let obj = config.objective(model)?;
    let mut spec = ControllerSpec::new(f, obj.clone(), config.bounds(model), weights);
    let mut case = Figure3Case {
        id,
        controller: f.label().to_string(),
        t: data.shape().t,
        lambda_g,
        u: Vec::new(),
        y_pred: Vec::new(),
        y_true: Vec::new(),
        objective: None,
        open_loop_cost: None,
        prediction_gap: None,
        annotation: None,
        error: None,
    };
    let controller = match spec.build(data) {
        Ok(c) => c,
        Err(e @ Error::SingularInnerMatrix { .. }) => {
            case.annotation = Some(format!("degenerate: {e}; solved without the singularity check"));
            spec.policy = SingularityPolicy::Allow;
            spec.build(data)?
        }
        Err(e) => return Err(e),
    };
    match solve_case(&controller, win) {
        Ok(sol) => {
            let (m, p, n) = (model.m(), model.p(), data.shape().n);
            let inputs: Vec<DVector<f64>> = (0..n).map(|k| sol.u.rows(k * m, m).into_owned()).collect();
            let truth = simulate(model, x_true, &inputs, None)?;
            let chunks = |v: &DVector<f64>, w: usize| (0..n).map(|k| v.rows(k * w, w).iter().copied().collect()).collect();
            let gap = (0..n).map(|k| (sol.y.rows(k * p, p) - &truth.y[k]).amax()).fold(0.0, f64::max);
            case.open_loop_cost = Some(
                sol.y.dot(&(obj.q_tilde(n) * &sol.y)) + sol.u.dot(&(obj.r_tilde(n) * &sol.u)),
            );
            case.u = chunks(&sol.u, m);
            case.y_pred = chunks(&sol.y, p);
            case.y_true = truth.y.iter().map(|y| y.iter().copied().collect()).collect();
            case.objective = Some(sol.objective);
            case.prediction_gap = Some(gap);
        }
        Err(e) => case.error = Some(e.to_string()),
    }
    Ok(case)
}

fn solve_case(controller: &Controller, win: &InitialWindow) -> Result<crate::ocp::OcpSolution> {
    controller.solve(win, &QpOptions::default())
}
