use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::{horizon_bounds, slack_bounds, BoxConstraints, Duals, Formulation, InitialWindow, OcpSolution, RegWeights, RegulationObjective};
use crate::data::DataShape;
use crate::error::{dim_err, Result};
use crate::predictor::Predictor;
use crate::qp::{CachedQp, QpOptions, QpProblem};

/// SPC over a fixed predictor, objective and bounds.
///
/// Variables are `z = [u; y]`, or `z = [sigma_y; sigma_u; u; y]` when
/// regularized, with the single equality block `y = P (b + v)`.
#[derive(Clone, Debug)]
pub struct SpcProblem {
    shape: DataShape,
    objective: RegulationObjective,
    weights: Option<RegWeights>,
    p_ini: DMatrix<f64>,
    problem: CachedQp,
}

impl SpcProblem {
    pub fn new(
        pred: &Predictor,
        obj: &RegulationObjective,
        bounds: &BoxConstraints,
        weights: Option<RegWeights>,
    ) -> Result<Self> {
        let shape = pred.shape();
        bounds.validate(shape.m, shape.p)?;
        if obj.q().nrows() != shape.p || obj.r().nrows() != shape.m {
            return Err(dim_err("objective", format!("p={}, m={}", shape.p, shape.m), format!("p={}, m={}", obj.q().nrows(), obj.r().nrows())));
        }
        if let Some(w) = &weights {
            w.validate()?;
        }
        let nt = shape.t_ini * (shape.m + shape.p);
        let ny_ini = shape.t_ini * shape.p;
        let nu = shape.n * shape.m;
        let ny = shape.n * shape.p;
        let ns = if weights.is_some() { nt } else { 0 };
        let nvar = ns + nu + ny;
        let (u0, y0) = (ns, ns + nu);

        let mut h = DMatrix::zeros(nvar, nvar);
        h.view_mut((u0, u0), (nu, nu)).copy_from(&(obj.r_tilde(shape.n) * 2.0));
        h.view_mut((y0, y0), (ny, ny)).copy_from(&(obj.q_tilde(shape.n) * 2.0));
        if let Some(w) = &weights {
            for i in 0..ny_ini {
                h[(i, i)] = 2.0 * w.lambda_sigma_y;
            }
            for i in ny_ini..nt {
                h[(i, i)] = 2.0 * w.lambda_sigma_u;
            }
        }

        let p = pred.matrix();
        let mut a = DMatrix::zeros(ny, nvar);
        if ns > 0 {
            a.view_mut((0, 0), (ny, nt)).copy_from(&(-p.columns(0, nt)));
        }
        a.view_mut((0, u0), (ny, nu)).copy_from(&(-p.columns(nt, nu)));
        for i in 0..ny {
            a[(i, y0 + i)] = 1.0;
        }

        let mut lo = DVector::from_element(nvar, f64::NEG_INFINITY);
        let mut hi = DVector::from_element(nvar, f64::INFINITY);
        let (h_lo, h_hi) = horizon_bounds(bounds, shape.n);
        lo.rows_mut(u0, nu + ny).copy_from(&h_lo);
        hi.rows_mut(u0, nu + ny).copy_from(&h_hi);
        if ns > 0 {
            let (s_lo, s_hi) = slack_bounds(bounds, &shape)?;
            lo.rows_mut(0, ns).copy_from(&s_lo);
            hi.rows_mut(0, ns).copy_from(&s_hi);
        }
        let problem = QpProblem::new(h, DVector::zeros(nvar))
            .with_equalities(a, DVector::zeros(ny))
            .with_bounds(lo, hi);
        Ok(Self {
            shape,
            objective: obj.clone(),
            weights,
            p_ini: p.columns(0, nt).into_owned(),
            problem: CachedQp::new(problem),
        })
    }

    pub fn shape(&self) -> DataShape {
        self.shape
    }

    pub fn objective(&self) -> &RegulationObjective {
        &self.objective
    }

    pub fn weights(&self) -> Option<RegWeights> {
        self.weights
    }

    pub fn formulation(&self) -> Formulation {
        if self.weights.is_some() {
            Formulation::SpcRegularized
        } else {
            Formulation::Spc
        }
    }

    pub fn qp_problem(&self, win: &InitialWindow) -> Result<QpProblem> {
        win.check(&self.shape)?;
        let mut p = self.problem.problem().clone();
        let b_ini = crate::linalg::vcat(&[&win.y_ini, &win.u_ini]);
        p.b_eq = &self.p_ini * b_ini;
        Ok(p)
    }

    /// Solves for one window; the first call also factors the kernel,
    /// which is not part of the reported time.
    pub fn solve(&self, win: &InitialWindow, options: &QpOptions) -> Result<OcpSolution> {
        win.check(&self.shape)?;
        let kernel = self.problem.kernel(options)?;
        let start = Instant::now();
        let b_ini = crate::linalg::vcat(&[&win.y_ini, &win.u_ini]);
        let sol = kernel.solve(&self.problem.problem().f, &(&self.p_ini * b_ini))?;
        let elapsed = start.elapsed().as_secs_f64();

        let s = self.shape;
        let nt = s.t_ini * (s.m + s.p);
        let ny_ini = s.t_ini * s.p;
        let ns = if self.weights.is_some() { nt } else { 0 };
        let nu = s.n * s.m;
        let ny = s.n * s.p;
        let z = &sol.z;
        let (sigma_y, sigma_u) = if ns > 0 {
            (Some(z.rows(0, ny_ini).into_owned()), Some(z.rows(ny_ini, nt - ny_ini).into_owned()))
        } else {
            (None, None)
        };
        Ok(OcpSolution {
            formulation: self.formulation(),
            u: z.rows(ns, nu).into_owned(),
            y: z.rows(ns + nu, ny).into_owned(),
            g: None,
            sigma_y,
            sigma_u,
            duals: Duals {
                mu: Some(&sol.nu * -0.5),
                mu1: None,
                mu2: None,
                nu: sol.nu.clone(),
                lambda_lo: sol.lambda_lo.clone(),
                lambda_hi: sol.lambda_hi.clone(),
            },
            objective: sol.objective,
            kkt: sol.residuals,
            iterations: sol.iterations,
            solve_time_seconds: elapsed,
        })
    }
}

/// Deterministic SPC: minimize the regulation cost over `(u, y)` subject
/// to `y = P_yini y_ini + P_uini u_ini + P_uN u`.
pub fn solve_spc(
    pred: &Predictor,
    win: &InitialWindow,
    obj: &RegulationObjective,
    bounds: &BoxConstraints,
) -> Result<OcpSolution> {
    SpcProblem::new(pred, obj, bounds, None)?.solve(win, &QpOptions::default())
}

/// SPC with penalized slacks on the window.
pub fn solve_spc_regularized(
    pred: &Predictor,
    win: &InitialWindow,
    obj: &RegulationObjective,
    weights: &RegWeights,
    bounds: &BoxConstraints,
) -> Result<OcpSolution> {
    SpcProblem::new(pred, obj, bounds, Some(*weights))?.solve(win, &QpOptions::default())
}
