use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::{horizon_bounds, slack_bounds, BoxConstraints, Duals, Formulation, InitialWindow, OcpSolution, RegWeights, RegulationObjective, SingularityPolicy};
use crate::data::{DataMatrices, DataShape};
use crate::error::{Error, Result};
use crate::linalg::{column_space, vcat, vstack};
use crate::qp::{CachedQp, QpOptions, QpProblem};

/// DeePC over fixed data, objective and bounds; only the window changes
/// between solves.
///
/// Variables are `z = [g; u; y]` for the deterministic problem and
/// `z = [g; sigma_y; sigma_u; u; y]` for the regularized one.
#[derive(Clone, Debug)]
pub struct DeepcProblem {
    shape: DataShape,
    objective: RegulationObjective,
    weights: Option<RegWeights>,
    /// Uncompressed problem with `b_eq` for a zero window.
    full: QpProblem,
    /// Orthonormal basis of the range of `[Y_Tini; U_Tini]` used to drop
    /// redundant window rows in the deterministic problem.
    window_basis: Option<DMatrix<f64>>,
    /// Problem handed to the kernel, factored on first solve.
    reduced: CachedQp,
}

impl DeepcProblem {
    pub fn new(
        data: &DataMatrices,
        obj: &RegulationObjective,
        bounds: &BoxConstraints,
        weights: Option<RegWeights>,
        policy: SingularityPolicy,
    ) -> Result<Self> {
        let shape = data.shape();
        bounds.validate(shape.m, shape.p)?;
        if obj.q().nrows() != shape.p || obj.r().nrows() != shape.m {
            return Err(crate::error::dim_err("objective", format!("p={}, m={}", shape.p, shape.m), format!("p={}, m={}", obj.q().nrows(), obj.r().nrows())));
        }
        let t = shape.t;
        let ny_ini = shape.t_ini * shape.p;
        let nu_ini = shape.t_ini * shape.m;
        let nt = ny_ini + nu_ini;
        let nu = shape.n * shape.m;
        let ny = shape.n * shape.p;
        let ns = if weights.is_some() { nt } else { 0 };
        let nvar = t + ns + nu + ny;
        let (g0, s0, u0, y0) = (0, t, t + ns, t + ns + nu);

        if let Some(w) = &weights {
            w.validate()?;
            if policy == SingularityPolicy::Reject {
                if let Some(bound) = super::explicit::structural_singularity(&shape, w.lambda_g) {
                    let rcond = super::explicit::inner_rcond(data, obj, w);
                    return Err(Error::SingularInnerMatrix {
                        columns: t,
                        lambda_g: w.lambda_g,
                        bound,
                        rcond,
                    });
                }
            }
        }

        let mut h = DMatrix::zeros(nvar, nvar);
        h.view_mut((u0, u0), (nu, nu)).copy_from(&(obj.r_tilde(shape.n) * 2.0));
        h.view_mut((y0, y0), (ny, ny)).copy_from(&(obj.q_tilde(shape.n) * 2.0));
        if let Some(w) = &weights {
            for i in 0..t {
                h[(g0 + i, g0 + i)] = 2.0 * w.lambda_g;
            }
            for i in 0..ny_ini {
                h[(s0 + i, s0 + i)] = 2.0 * w.lambda_sigma_y;
            }
            for i in ny_ini..nt {
                h[(s0 + i, s0 + i)] = 2.0 * w.lambda_sigma_u;
            }
        }

        let window_block = vstack(&[data.y_ini(), data.u_ini()]);
        let rows = nt + nu + ny;
        let mut a = DMatrix::zeros(rows, nvar);
        a.view_mut((0, g0), (nt, t)).copy_from(&window_block);
        a.view_mut((nt, g0), (nu, t)).copy_from(data.u_n());
        a.view_mut((nt + nu, g0), (ny, t)).copy_from(data.y_n());
        for i in 0..ns {
            a[(i, s0 + i)] = -1.0;
        }
        for i in 0..nu {
            a[(nt + i, u0 + i)] = -1.0;
        }
        for i in 0..ny {
            a[(nt + nu + i, y0 + i)] = -1.0;
        }

        let mut lo = DVector::from_element(nvar, f64::NEG_INFINITY);
        let mut hi = DVector::from_element(nvar, f64::INFINITY);
        let (h_lo, h_hi) = horizon_bounds(bounds, shape.n);
        lo.rows_mut(u0, nu + ny).copy_from(&h_lo);
        hi.rows_mut(u0, nu + ny).copy_from(&h_hi);
        if weights.is_some() {
            let (s_lo, s_hi) = slack_bounds(bounds, &shape)?;
            lo.rows_mut(s0, ns).copy_from(&s_lo);
            hi.rows_mut(s0, ns).copy_from(&s_hi);
        }

        let full = QpProblem::new(h, DVector::zeros(nvar))
            .with_equalities(a, DVector::zeros(rows))
            .with_bounds(lo, hi);

        let (window_basis, reduced) = if weights.is_none() {
            let basis = column_space(&window_block);
            let r = basis.ncols();
            let mut a_red = DMatrix::zeros(r + nu + ny, nvar);
            a_red.view_mut((0, 0), (r, t)).copy_from(&(basis.transpose() * &window_block));
            a_red.view_mut((r, 0), (nu + ny, nvar)).copy_from(&full.a_eq.view((nt, 0), (nu + ny, nvar)));
            let reduced = full.clone().with_equalities(a_red, DVector::zeros(r + nu + ny));
            (Some(basis), CachedQp::new(reduced))
        } else {
            (None, CachedQp::new(full.clone()))
        };

        Ok(Self {
            shape,
            objective: obj.clone(),
            weights,
            full,
            window_basis,
            reduced,
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
            Formulation::DeepcRegularized
        } else {
            Formulation::Deepc
        }
    }

    /// The uncompressed kernel problem for `win`.
    pub fn qp_problem(&self, win: &InitialWindow) -> Result<QpProblem> {
        win.check(&self.shape)?;
        let mut p = self.full.clone();
        p.b_eq.rows_mut(0, self.window_len()).copy_from(&vcat(&[&win.y_ini, &win.u_ini]));
        Ok(p)
    }

    fn window_len(&self) -> usize {
        self.shape.t_ini * (self.shape.m + self.shape.p)
    }

    /// Solves for one window. The reported time excludes the one-off
    /// factorization done on the first call.
    pub fn solve(&self, win: &InitialWindow, options: &QpOptions) -> Result<OcpSolution> {
        win.check(&self.shape)?;
        let kernel = self.reduced.kernel(options)?;
        let start = Instant::now();
        let nt = self.window_len();
        let b_ini = vcat(&[&win.y_ini, &win.u_ini]);
        let template = self.reduced.problem();
        let mut b_eq = template.b_eq.clone();
        let (sol, nu_full) = match &self.window_basis {
            Some(basis) => {
                let coeff = basis.transpose() * &b_ini;
                let residual = (&b_ini - basis * &coeff).norm();
                if residual > 1e-8 * (1.0 + b_ini.norm()) {
                    return Err(Error::InfeasibleWindow { residual });
                }
                b_eq.rows_mut(0, coeff.len()).copy_from(&coeff);
                let sol = kernel.solve(&template.f, &b_eq)?;
                let r = basis.ncols();
                let rest = sol.nu.rows(r, sol.nu.len() - r).into_owned();
                let nu = vcat(&[&(basis * sol.nu.rows(0, r)), &rest]);
                (sol, nu)
            }
            None => {
                b_eq.rows_mut(0, nt).copy_from(&b_ini);
                let sol = kernel.solve(&template.f, &b_eq)?;
                let nu = sol.nu.clone();
                (sol, nu)
            }
        };
        self.finish(win, sol, nu_full, start)
    }

    fn finish(&self, win: &InitialWindow, sol: crate::qp::QpSolution, nu_full: DVector<f64>, start: Instant) -> Result<OcpSolution> {
        let elapsed = start.elapsed().as_secs_f64();
        let s = self.shape;
        let t = s.t;
        let nt = self.window_len();
        let ns = if self.weights.is_some() { nt } else { 0 };
        let nu = s.n * s.m;
        let ny = s.n * s.p;
        let z = &sol.z;
        let kkt = crate::qp::residuals(&self.qp_problem(win)?, z, &nu_full, &sol.lambda_lo, &sol.lambda_hi);
        let (sigma_y, sigma_u) = if ns > 0 {
            let ny_ini = s.t_ini * s.p;
            (
                Some(z.rows(t, ny_ini).into_owned()),
                Some(z.rows(t + ny_ini, nt - ny_ini).into_owned()),
            )
        } else {
            (None, None)
        };
        let duals = Duals {
            mu: None,
            mu1: Some(nu_full.rows(nt + nu, ny) * 0.5),
            mu2: Some(nu_full.rows(0, nt + nu) * -0.5),
            nu: nu_full,
            lambda_lo: sol.lambda_lo,
            lambda_hi: sol.lambda_hi,
        };
        Ok(OcpSolution {
            formulation: self.formulation(),
            g: Some(z.rows(0, t).into_owned()),
            sigma_y,
            sigma_u,
            u: z.rows(t + ns, nu).into_owned(),
            y: z.rows(t + ns + nu, ny).into_owned(),
            duals,
            objective: sol.objective,
            kkt,
            iterations: sol.iterations,
            solve_time_seconds: elapsed,
        })
    }
}

/// Deterministic DeePC: minimize the regulation cost over `(g, u, y)`
/// subject to `[Y_Tini; U_Tini; U_N; Y_N] g = [y_ini; u_ini; u; y]`.
pub fn solve_deepc(
    data: &DataMatrices,
    win: &InitialWindow,
    obj: &RegulationObjective,
    bounds: &BoxConstraints,
) -> Result<OcpSolution> {
    DeepcProblem::new(data, obj, bounds, None, SingularityPolicy::Reject)?.solve(win, &QpOptions::default())
}

/// DeePC with slacks on the window and a penalty on `g`.
pub fn solve_deepc_regularized(
    data: &DataMatrices,
    win: &InitialWindow,
    obj: &RegulationObjective,
    weights: &RegWeights,
    bounds: &BoxConstraints,
) -> Result<OcpSolution> {
    DeepcProblem::new(data, obj, bounds, Some(*weights), SingularityPolicy::Reject)?.solve(win, &QpOptions::default())
}
