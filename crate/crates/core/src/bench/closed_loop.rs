use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::Controller;
use crate::data::ExcitationSpec;
use crate::error::{Error, Result};
use crate::lti::StateSpaceModel;
use crate::ocp::InitialWindow;
use crate::qp::QpOptions;
use crate::rng::{tag, SeededRng};

/// Noise stream index of the closed loop, disjoint from the per-column
/// streams used for data collection.
const LOOP_NOISE_STREAM: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosedLoopSpec {
    pub n_excite: usize,
    pub n_control: usize,
    /// Measurement noise standard deviation; zero for a noiseless loop.
    pub sigma_w: f64,
    pub seed: u64,
    pub excitation: ExcitationSpec,
    /// Run each solve on the shared timing lane.
    pub serialize_timing: bool,
}

impl ClosedLoopSpec {
    pub fn new(n_excite: usize, n_control: usize, sigma_w: f64, seed: u64) -> Self {
        Self {
            n_excite,
            n_control,
            sigma_w,
            seed,
            excitation: ExcitationSpec::default(),
            serialize_timing: false,
        }
    }
}

/// Applied inputs and measured outputs of one closed-loop run.
///
/// Samples `0..n_excite` are the excitation phase; the cost and the
/// step times cover the control phase only.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopRecord {
    pub label: String,
    pub spec: ClosedLoopSpec,
    pub u: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub step_time_seconds: Vec<f64>,
    pub cost: f64,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl ClosedLoopRecord {
    /// `sum_k y_k'Q y_k + u_k'R u_k` over the control phase.
    pub fn recompute_cost(&self) -> f64 {
        let n0 = self.spec.n_excite;
        (n0..self.u.len())
            .map(|k| self.y[k].dot(&(&self.q * &self.y[k])) + self.u[k].dot(&(&self.r * &self.u[k])))
            .sum()
    }

    pub fn mean_step_time_seconds(&self) -> f64 {
        if self.step_time_seconds.is_empty() {
            return 0.0;
        }
        self.step_time_seconds.iter().sum::<f64>() / self.step_time_seconds.len() as f64
    }

    /// Control-phase inputs.
    pub fn control_inputs(&self) -> &[DVector<f64>] {
        &self.u[self.spec.n_excite..]
    }

    /// `k,u_1..u_m,y_1..y_p,step_time_ms`; step time is empty during
    /// excitation.
    pub fn to_csv(&self) -> String {
        let m = self.u.first().map_or(0, |v| v.len());
        let p = self.y.first().map_or(0, |v| v.len());
        let mut out = String::from("k");
        for i in 1..=m {
            let _ = write!(out, ",u{i}");
        }
        for i in 1..=p {
            let _ = write!(out, ",y{i}");
        }
        out.push_str(",step_time_ms\n");
        for k in 0..self.u.len() {
            let _ = write!(out, "{k}");
            for v in self.u[k].iter().chain(self.y[k].iter()) {
                let _ = write!(out, ",{v:.16e}");
            }
            match k.checked_sub(self.spec.n_excite) {
                Some(j) => {
                    let _ = writeln!(out, ",{:.6}", self.step_time_seconds[j] * 1e3);
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn window(u: &[DVector<f64>], y: &[DVector<f64>], t_ini: usize) -> Result<InitialWindow> {
    let k = u.len();
    InitialWindow::new(
        crate::lti::stack(&y[k - t_ini..]),
        crate::lti::stack(&u[k - t_ini..]),
    )
}

/// Excitation phase from rest: inputs, measured outputs, the true state
/// after the last sample and the noise generator to continue with.
pub struct Excitation {
    pub u: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub x: DVector<f64>,
    noise: SeededRng,
}

impl Excitation {
    /// Inputs come from the stream `(seed, EXCITATION, 0)`, identical for
    /// every controller; measurement noise from a stream of the same seed.
    pub fn run(model: &StateSpaceModel, spec: &ClosedLoopSpec) -> Self {
        let mut exc = SeededRng::derive(spec.seed, tag::EXCITATION, 0);
        let mut out = Self {
            u: Vec::with_capacity(spec.n_excite + spec.n_control),
            y: Vec::with_capacity(spec.n_excite + spec.n_control),
            x: DVector::zeros(model.n()),
            noise: SeededRng::derive(spec.seed, tag::NOISE, LOOP_NOISE_STREAM),
        };
        for _ in 0..spec.n_excite {
            let u = spec.excitation.draw_input(model.m(), &mut exc);
            out.apply(model, u, spec.sigma_w);
        }
        out
    }

    fn apply(&mut self, model: &StateSpaceModel, u: DVector<f64>, sigma_w: f64) {
        let mut y = model.c() * &self.x + model.d() * &u;
        if sigma_w > 0.0 {
            y += self.noise.normal_vector(model.p(), sigma_w);
        }
        self.x = model.a() * &self.x + model.b() * &u;
        self.u.push(u);
        self.y.push(y);
    }

    /// The last `t_ini` samples.
    pub fn window(&self, t_ini: usize) -> Result<InitialWindow> {
        if self.u.len() < t_ini {
            return Err(Error::InvalidParameter(format!("{} samples, window needs {t_ini}", self.u.len())));
        }
        window(&self.u, &self.y, t_ini)
    }
}

/// Regulation after an initial excitation from rest. Each control step
/// solves for the current window, applies the first optimal input and
/// shifts the window.
pub fn run_closed_loop(model: &StateSpaceModel, controller: &Controller, spec: &ClosedLoopSpec) -> Result<ClosedLoopRecord> {
    let shape = controller.shape();
    if spec.n_excite < shape.t_ini {
        return Err(Error::InvalidParameter(format!(
            "n_excite = {} is shorter than T_ini = {}",
            spec.n_excite, shape.t_ini
        )));
    }
    if !(spec.sigma_w.is_finite() && spec.sigma_w >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma_w must be >= 0, got {}", spec.sigma_w)));
    }
    let (q, r) = controller_weights(controller);
    let options = QpOptions::default();
    let mut run = Excitation::run(model, spec);
    let mut times = Vec::with_capacity(spec.n_control);
    for step in 0..spec.n_control {
        let win = window(&run.u, &run.y, shape.t_ini)?;
        let sol = if spec.serialize_timing {
            controller.solve_timed(&win, &options)
        } else {
            controller.solve(&win, &options)
        }
        .map_err(|e| Error::ClosedLoopStep {
            step,
            source: Box::new(e),
        })?;
        times.push(sol.solve_time_seconds);
        run.apply(model, sol.first_input(model.m()), spec.sigma_w);
    }
    let mut record = ClosedLoopRecord {
        label: controller.formulation().label().to_string(),
        spec: spec.clone(),
        u: run.u,
        y: run.y,
        step_time_seconds: times,
        cost: 0.0,
        q,
        r,
    };
    record.cost = record.recompute_cost();
    Ok(record)
}

fn controller_weights(controller: &Controller) -> (DMatrix<f64>, DMatrix<f64>) {
    match controller {
        Controller::Deepc(p) => (p.objective().q().clone(), p.objective().r().clone()),
        Controller::Spc(p) => (p.objective().q().clone(), p.objective().r().clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{ControllerSpec, RunConfig};
    use crate::data::{collect_sequences, DataShape};
    use crate::lti::NoiseSpec;
    use crate::ocp::Formulation;

    fn setup(sigma: Option<f64>, t: usize) -> (StateSpaceModel, crate::data::DataMatrices, RunConfig) {
        let cfg = RunConfig::default();
        let model = cfg.model().unwrap();
        let shape = DataShape::for_model(&model, t, 4, 40).unwrap();
        let noise = sigma.map(|s| NoiseSpec::new(s, 11).unwrap());
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), noise.as_ref(), 11).unwrap();
        (model, data, cfg)
    }

    fn controller(cfg: &RunConfig, model: &StateSpaceModel, data: &crate::data::DataMatrices, f: Formulation) -> Controller {
        ControllerSpec::new(f, cfg.objective(model).unwrap(), cfg.bounds(model), cfg.weights().unwrap())
            .build(data)
            .unwrap()
    }

    #[test]
    fn deterministic_deepc_and_spc_loops_coincide() {
        let (model, data, cfg) = setup(None, 150);
        let spec = ClosedLoopSpec::new(20, 60, 0.0, 5);
        let d = run_closed_loop(&model, &controller(&cfg, &model, &data, Formulation::Deepc), &spec).unwrap();
        let s = run_closed_loop(&model, &controller(&cfg, &model, &data, Formulation::Spc), &spec).unwrap();
        let du = d.u.iter().zip(&s.u).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        assert!(du <= 1e-6, "{du}");
        assert!((d.cost - s.cost).abs() <= 1e-8, "{} {}", d.cost, s.cost);
        assert!((d.recompute_cost() - d.cost).abs() <= 1e-10 * d.cost);
        assert_eq!(d.step_time_seconds.len(), 60);
        assert!(d.step_time_seconds.iter().all(|&t| t > 0.0));
        // Regulation actually happens.
        assert!(d.y.last().unwrap().amax() < 0.1 * d.y[19].amax().max(1e-3));
        let csv = d.to_csv();
        assert!(csv.starts_with("k,u1,u2,y1,y2,y3,step_time_ms\n"));
        assert_eq!(csv.lines().count(), 81);
        eprintln!("deepc step {:.3} ms, spc step {:.3} ms", d.mean_step_time_seconds() * 1e3, s.mean_step_time_seconds() * 1e3);
    }

    #[test]
    fn zero_excitation_gives_zero_cost() {
        let (model, data, cfg) = setup(None, 120);
        let mut spec = ClosedLoopSpec::new(20, 10, 0.0, 5);
        spec.excitation = ExcitationSpec::zero();
        let r = run_closed_loop(&model, &controller(&cfg, &model, &data, Formulation::Spc), &spec).unwrap();
        assert_eq!(r.cost, 0.0);
        assert!(r.u.iter().all(|u| u.amax() == 0.0));
    }

    #[test]
    fn noisy_regularized_loops_run_to_completion() {
        let (model, data, cfg) = setup(Some(1e-2), 150);
        let spec = ClosedLoopSpec::new(20, 60, 1e-2, 5);
        for f in [Formulation::SpcRegularized, Formulation::DeepcRegularized] {
            let c = controller(&cfg, &model, &data, f);
            let r = run_closed_loop(&model, &c, &spec).unwrap();
            assert!(r.cost.is_finite());
            assert!(r.control_inputs().iter().all(|u| u.amax() <= 0.7 + 1e-9));
            eprintln!("{} cost {:.4} step {:.3} ms", r.label, r.cost, r.mean_step_time_seconds() * 1e3);
        }
        // Same seed, same record apart from timing.
        let c = controller(&cfg, &model, &data, Formulation::SpcRegularized);
        let a = run_closed_loop(&model, &c, &spec).unwrap();
        let b = run_closed_loop(&model, &c, &spec).unwrap();
        assert_eq!((a.u.clone(), a.y.clone(), a.cost), (b.u, b.y, b.cost));
    }

    #[test]
    fn short_excitation_rejected() {
        let (model, data, cfg) = setup(None, 120);
        let c = controller(&cfg, &model, &data, Formulation::Spc);
        assert!(run_closed_loop(&model, &c, &ClosedLoopSpec::new(2, 5, 0.0, 0)).is_err());
    }
}
