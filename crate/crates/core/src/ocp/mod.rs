//! Regulation problems for data-driven predictive control.
//!
//! Four formulations share the dense QP kernel in [`crate::qp`]:
//! deterministic and regularized DeePC over the data matrices, and
//! deterministic and regularized SPC over an identified predictor. The
//! reported objective is the stage cost summed over the horizon,
//! `y'Q~y + u'R~u`, plus the regularization terms where present.
//!
//! Multipliers in [`OcpSolution::duals`] use the half-cost Lagrangians
//!
//! ```text
//! DeePC: J/2 - mu1'(y - Y_N g) - mu2'(M~ g - b - v)
//! SPC:   J/2 - mu'(y - P~ (b + v))
//! ```
//!
//! so that at an unconstrained optimum `mu1 = Q~ y`, `mu2 = -V v`,
//! `mu = Q~ y`. Bound multipliers and the raw kernel multipliers refer to
//! the full cost `J`.

mod deepc;
mod explicit;
mod spc;

pub use deepc::{solve_deepc, solve_deepc_regularized, DeepcProblem};
pub use explicit::{explicit_deepc_unconstrained, explicit_spc_unconstrained, ExplicitSolution, ExplicitKkt};
pub use spc::{solve_spc, solve_spc_regularized, SpcProblem};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::data::DataShape;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{block_diag_repeat, vcat};
use crate::qp::{QpProblem, QpResiduals};

fn check_spd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidParameter(format!("{name} must be a nonempty square matrix")));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
    }
    if (m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
        return Err(Error::InvalidParameter(format!("{name} is not symmetric")));
    }
    let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if min_eig <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} is not positive definite (minimum eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Stage weights of `sum_k y_k'Q y_k + u_k'R u_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegulationObjective {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl RegulationObjective {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        check_spd("Q", &q)?;
        check_spd("R", &r)?;
        Ok(Self { q, r })
    }

    /// `Q = q_scale I_p`, `R = r_scale I_m`.
    pub fn scaled_identity(p: usize, m: usize, q_scale: f64, r_scale: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(p, p) * q_scale,
            DMatrix::identity(m, m) * r_scale,
        )
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn q_tilde(&self, horizon: usize) -> DMatrix<f64> {
        block_diag_repeat(&self.q, horizon)
    }
    pub fn r_tilde(&self, horizon: usize) -> DMatrix<f64> {
        block_diag_repeat(&self.r, horizon)
    }

    pub fn stage_cost(&self, y: &DVector<f64>, u: &DVector<f64>) -> f64 {
        y.dot(&(&self.q * y)) + u.dot(&(&self.r * u))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegWeights {
    pub lambda_g: f64,
    pub lambda_sigma_y: f64,
    pub lambda_sigma_u: f64,
}

impl Default for RegWeights {
    fn default() -> Self {
        Self {
            lambda_g: 1.0,
            lambda_sigma_y: 1e4,
            lambda_sigma_u: 1e4,
        }
    }
}

impl RegWeights {
    pub fn new(lambda_g: f64, lambda_sigma_y: f64, lambda_sigma_u: f64) -> Result<Self> {
        let w = Self {
            lambda_g,
            lambda_sigma_y,
            lambda_sigma_u,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_g.is_finite() && self.lambda_g >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda_g must be >= 0, got {}", self.lambda_g)));
        }
        for (name, v) in [("lambda_sigma_y", self.lambda_sigma_y), ("lambda_sigma_u", self.lambda_sigma_u)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `V = blkdiag(lambda_sigma_y I, lambda_sigma_u I, R~)`.
    pub fn v_matrix(&self, shape: &DataShape, obj: &RegulationObjective) -> DMatrix<f64> {
        let ny = shape.t_ini * shape.p;
        let nu = shape.t_ini * shape.m;
        let nn = shape.n * shape.m;
        let mut v = DMatrix::zeros(ny + nu + nn, ny + nu + nn);
        for i in 0..ny {
            v[(i, i)] = self.lambda_sigma_y;
        }
        for i in ny..ny + nu {
            v[(i, i)] = self.lambda_sigma_u;
        }
        v.view_mut((ny + nu, ny + nu), (nn, nn)).copy_from(&obj.r_tilde(shape.n));
        v
    }
}

/// What to do when regularized DeePC has `lambda_g = 0` with more data
/// columns than the inner matrix can have rank.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SingularityPolicy {
    #[default]
    Reject,
    /// Solve anyway; the QP kernel decides whether the problem is usable.
    Allow,
}

/// Per-step box bounds, repeated over the horizon. Entries may be infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxConstraints {
    pub u_lo: DVector<f64>,
    pub u_hi: DVector<f64>,
    pub y_lo: DVector<f64>,
    pub y_hi: DVector<f64>,
    /// Optional bounds on the input-window slack of the regularized
    /// problems, per window entry.
    pub sigma_u: Option<(DVector<f64>, DVector<f64>)>,
}

impl BoxConstraints {
    pub fn unbounded(m: usize, p: usize) -> Self {
        Self {
            u_lo: DVector::from_element(m, f64::NEG_INFINITY),
            u_hi: DVector::from_element(m, f64::INFINITY),
            y_lo: DVector::from_element(p, f64::NEG_INFINITY),
            y_hi: DVector::from_element(p, f64::INFINITY),
            sigma_u: None,
        }
    }

    /// `|u_i| <= bound` on every input, outputs free.
    pub fn input_box(m: usize, p: usize, bound: f64) -> Self {
        Self {
            u_lo: DVector::from_element(m, -bound),
            u_hi: DVector::from_element(m, bound),
            ..Self::unbounded(m, p)
        }
    }

    pub fn validate(&self, m: usize, p: usize) -> Result<()> {
        for (name, v, len) in [
            ("u_lo", &self.u_lo, m),
            ("u_hi", &self.u_hi, m),
            ("y_lo", &self.y_lo, p),
            ("y_hi", &self.y_hi, p),
        ] {
            if v.len() != len {
                return Err(dim_err(name, len, v.len()));
            }
        }
        let pairs = [(&self.u_lo, &self.u_hi), (&self.y_lo, &self.y_hi)];
        for (lo, hi) in pairs.into_iter().chain(self.sigma_u.as_ref().map(|(a, b)| (a, b))) {
            if lo.len() != hi.len() || lo.iter().zip(hi.iter()).any(|(l, h)| l.is_nan() || h.is_nan() || l > h) {
                return Err(Error::InvalidParameter("box bounds must satisfy lo <= hi".into()));
            }
        }
        Ok(())
    }

    pub fn is_unbounded(&self) -> bool {
        let free = |v: &DVector<f64>| v.iter().all(|x| x.is_infinite());
        free(&self.u_lo) && free(&self.u_hi) && free(&self.y_lo) && free(&self.y_hi) && self.sigma_u.is_none()
    }

    fn repeat(v: &DVector<f64>, times: usize) -> DVector<f64> {
        DVector::from_fn(v.len() * times, |i, _| v[i % v.len()])
    }
}

/// The most recent `T_ini` outputs and inputs, stacked time-major.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialWindow {
    pub y_ini: DVector<f64>,
    pub u_ini: DVector<f64>,
}

impl InitialWindow {
    pub fn new(y_ini: DVector<f64>, u_ini: DVector<f64>) -> Result<Self> {
        if !y_ini.iter().chain(u_ini.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("initial window"));
        }
        Ok(Self { y_ini, u_ini })
    }

    pub fn zeros(shape: &DataShape) -> Self {
        Self {
            y_ini: DVector::zeros(shape.t_ini * shape.p),
            u_ini: DVector::zeros(shape.t_ini * shape.m),
        }
    }

    pub fn check(&self, shape: &DataShape) -> Result<()> {
        if self.y_ini.len() != shape.t_ini * shape.p {
            return Err(dim_err("y_ini", shape.t_ini * shape.p, self.y_ini.len()));
        }
        if self.u_ini.len() != shape.t_ini * shape.m {
            return Err(dim_err("u_ini", shape.t_ini * shape.m, self.u_ini.len()));
        }
        Ok(())
    }

    /// `b = [y_ini; u_ini; 0]` in the row order of `M`.
    pub fn b(&self, shape: &DataShape) -> DVector<f64> {
        vcat(&[&self.y_ini, &self.u_ini, &DVector::zeros(shape.n * shape.m)])
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            y_ini: &self.y_ini * alpha,
            u_ini: &self.u_ini * alpha,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Deepc,
    Spc,
    DeepcRegularized,
    SpcRegularized,
}

impl Formulation {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Deepc => "deepc",
            Self::Spc => "spc",
            Self::DeepcRegularized => "deepc_regularized",
            Self::SpcRegularized => "spc_regularized",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Duals {
    /// SPC prediction constraint.
    pub mu: Option<DVector<f64>>,
    /// DeePC `y = Y_N g` constraint.
    pub mu1: Option<DVector<f64>>,
    /// DeePC `M~ g = b + v` constraint.
    pub mu2: Option<DVector<f64>>,
    /// Kernel multipliers of the equality rows, full-cost convention.
    pub nu: DVector<f64>,
    pub lambda_lo: DVector<f64>,
    pub lambda_hi: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OcpSolution {
    pub formulation: Formulation,
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    pub g: Option<DVector<f64>>,
    pub sigma_y: Option<DVector<f64>>,
    pub sigma_u: Option<DVector<f64>>,
    pub duals: Duals,
    pub objective: f64,
    /// Residuals of the full (uncompressed) kernel problem.
    pub kkt: QpResiduals,
    pub iterations: usize,
    pub solve_time_seconds: f64,
}

impl OcpSolution {
    /// `v = [sigma_y; sigma_u; u]` for the regularized problems.
    pub fn v(&self) -> Option<DVector<f64>> {
        match (&self.sigma_y, &self.sigma_u) {
            (Some(sy), Some(su)) => Some(vcat(&[sy, su, &self.u])),
            _ => None,
        }
    }

    /// The kernel variable vector in the layout of the formulation.
    pub fn stacked(&self) -> DVector<f64> {
        let mut parts: Vec<&DVector<f64>> = Vec::new();
        if let Some(g) = &self.g {
            parts.push(g);
        }
        if let Some(sy) = &self.sigma_y {
            parts.push(sy);
        }
        if let Some(su) = &self.sigma_u {
            parts.push(su);
        }
        parts.push(&self.u);
        parts.push(&self.y);
        vcat(&parts)
    }

    /// First input of the optimal sequence.
    pub fn first_input(&self, m: usize) -> DVector<f64> {
        self.u.rows(0, m).into_owned()
    }

    /// Recomputes the residuals on `problem` from the stored values.
    pub fn recompute_kkt(&self, problem: &QpProblem) -> QpResiduals {
        crate::qp::residuals(problem, &self.stacked(), &self.duals.nu, &self.duals.lambda_lo, &self.duals.lambda_hi)
    }

    pub fn to_json(&self) -> Result<String> {
        let v = |x: &DVector<f64>| x.as_slice().to_vec();
        let ov = |x: &Option<DVector<f64>>| x.as_ref().map(|x| x.as_slice().to_vec());
        let dump = SolutionFile {
            formulation: self.formulation,
            u: v(&self.u),
            y: v(&self.y),
            g: ov(&self.g),
            sigma_y: ov(&self.sigma_y),
            sigma_u: ov(&self.sigma_u),
            v: self.v().map(|x| x.as_slice().to_vec()),
            mu: ov(&self.duals.mu),
            mu1: ov(&self.duals.mu1),
            mu2: ov(&self.duals.mu2),
            nu: v(&self.duals.nu),
            lambda_lo: v(&self.duals.lambda_lo),
            lambda_hi: v(&self.duals.lambda_hi),
            objective: self.objective,
            kkt: self.kkt,
            iterations: self.iterations,
            solve_time_seconds: self.solve_time_seconds,
        };
        Ok(serde_json::to_string_pretty(&dump)?)
    }
}

#[derive(Serialize)]
struct SolutionFile {
    formulation: Formulation,
    u: Vec<f64>,
    y: Vec<f64>,
    g: Option<Vec<f64>>,
    sigma_y: Option<Vec<f64>>,
    sigma_u: Option<Vec<f64>>,
    v: Option<Vec<f64>>,
    mu: Option<Vec<f64>>,
    mu1: Option<Vec<f64>>,
    mu2: Option<Vec<f64>>,
    nu: Vec<f64>,
    lambda_lo: Vec<f64>,
    lambda_hi: Vec<f64>,
    objective: f64,
    kkt: QpResiduals,
    iterations: usize,
    solve_time_seconds: f64,
}

/// Bounds for `[u; y]` over the horizon.
fn horizon_bounds(bounds: &BoxConstraints, horizon: usize) -> (DVector<f64>, DVector<f64>) {
    (
        vcat(&[&BoxConstraints::repeat(&bounds.u_lo, horizon), &BoxConstraints::repeat(&bounds.y_lo, horizon)]),
        vcat(&[&BoxConstraints::repeat(&bounds.u_hi, horizon), &BoxConstraints::repeat(&bounds.y_hi, horizon)]),
    )
}

/// Bounds for `[sigma_y; sigma_u]`.
fn slack_bounds(bounds: &BoxConstraints, shape: &DataShape) -> Result<(DVector<f64>, DVector<f64>)> {
    let ny = shape.t_ini * shape.p;
    let nu = shape.t_ini * shape.m;
    let free_y = DVector::from_element(ny, f64::INFINITY);
    let (su_lo, su_hi) = match &bounds.sigma_u {
        Some((lo, hi)) => {
            if lo.len() != nu {
                return Err(dim_err("sigma_u bounds", nu, lo.len()));
            }
            (lo.clone(), hi.clone())
        }
        None => (DVector::from_element(nu, f64::NEG_INFINITY), DVector::from_element(nu, f64::INFINITY)),
    };
    Ok((vcat(&[&(-&free_y), &su_lo]), vcat(&[&free_y, &su_hi])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_validation() {
        assert!(RegulationObjective::scaled_identity(3, 2, 1.0, 0.1).is_ok());
        assert!(RegulationObjective::scaled_identity(3, 2, 1.0, 0.0).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(RegulationObjective::new(asym, DMatrix::identity(1, 1)).is_err());
    }

    #[test]
    fn weights_and_v_layout() {
        assert!(RegWeights::new(0.0, 1.0, 1.0).is_ok());
        assert!(RegWeights::new(-1.0, 1.0, 1.0).is_err());
        assert!(RegWeights::new(0.0, 0.0, 1.0).is_err());
        let shape = DataShape::new(10, 1, 2, 1, 1).unwrap();
        let obj = RegulationObjective::scaled_identity(1, 1, 1.0, 0.1).unwrap();
        let v = RegWeights::default().v_matrix(&shape, &obj);
        assert_eq!(v, DMatrix::from_diagonal(&DVector::from_vec(vec![1e4, 1e4, 0.1, 0.1])));
    }

    #[test]
    fn window_b_layout() {
        let shape = DataShape::new(10, 2, 3, 1, 1).unwrap();
        let win = InitialWindow::new(DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_eq!(win.b(&shape).as_slice(), &[1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0]);
        assert!(InitialWindow::new(DVector::from_vec(vec![f64::NAN]), DVector::zeros(1)).is_err());
    }

    #[test]
    fn box_validation() {
        let mut b = BoxConstraints::input_box(2, 3, 0.7);
        assert!(b.validate(2, 3).is_ok());
        assert!(b.validate(1, 3).is_err());
        b.u_lo[0] = 1.0;
        assert!(b.validate(2, 3).is_err());
        assert!(BoxConstraints::unbounded(2, 3).is_unbounded());
    }
}
