//! Closed-form minimizers of the unconstrained regularized problems,
//! written in terms of `v = [sigma_y; sigma_u; u]` and
//! `b = [y_ini; u_ini; 0]`:
//!
//! ```text
//! DeePC: g  = (lambda_g I + M~'V M~ + Y_N'Q~ Y_N)^{-1} M~'V b,  v = M~ g - b
//! SPC:   v  = -(V + P~'Q~ P~)^{-1} P~'Q~ P~ b
//! ```

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{InitialWindow, RegWeights, RegulationObjective};
use crate::data::{DataMatrices, DataShape};
use crate::error::{dim_err, Error, Result};
use crate::linalg::rank_info;
use crate::predictor::Predictor;

/// Infinity norms of the first-order conditions evaluated at the
/// returned primal and dual values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ExplicitKkt {
    pub stationarity: f64,
    pub primal: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitSolution {
    pub v: DVector<f64>,
    pub g: Option<DVector<f64>>,
    pub y: DVector<f64>,
    pub mu: Option<DVector<f64>>,
    pub mu1: Option<DVector<f64>>,
    pub mu2: Option<DVector<f64>>,
    pub objective: f64,
    pub kkt: ExplicitKkt,
    shape: DataShape,
}

impl ExplicitSolution {
    pub fn sigma_y(&self) -> DVector<f64> {
        self.v.rows(0, self.shape.t_ini * self.shape.p).into_owned()
    }

    pub fn sigma_u(&self) -> DVector<f64> {
        self.v.rows(self.shape.t_ini * self.shape.p, self.shape.t_ini * self.shape.m).into_owned()
    }

    pub fn u(&self) -> DVector<f64> {
        let nt = self.shape.t_ini * (self.shape.m + self.shape.p);
        self.v.rows(nt, self.shape.n * self.shape.m).into_owned()
    }
}

/// `Some(bound)` when `lambda_g = 0` and the data has more columns than
/// `bound = max(L m + T_ini p, N p)`.
pub fn structural_singularity(shape: &DataShape, lambda_g: f64) -> Option<usize> {
    let bound = shape.square_t().max(shape.n * shape.p);
    (lambda_g == 0.0 && shape.t > bound).then_some(bound)
}

/// `lambda_g I + M~'V M~ + Y_N'Q~ Y_N`.
pub fn inner_matrix(data: &DataMatrices, obj: &RegulationObjective, weights: &RegWeights) -> DMatrix<f64> {
    let shape = data.shape();
    let m = data.m();
    let v = weights.v_matrix(&shape, obj);
    let q = obj.q_tilde(shape.n);
    let mut inner = m.transpose() * v * m + data.y_n().transpose() * q * data.y_n();
    for i in 0..shape.t {
        inner[(i, i)] += weights.lambda_g;
    }
    (&inner + inner.transpose()) * 0.5
}

pub(crate) fn inner_rcond(data: &DataMatrices, obj: &RegulationObjective, weights: &RegWeights) -> f64 {
    let info = rank_info(&inner_matrix(data, obj, weights));
    let smax = info.sigma_max();
    if smax == 0.0 {
        0.0
    } else {
        info.singular_values.last().copied().unwrap_or(0.0) / smax
    }
}

fn amax(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.amax()
    }
}

pub fn explicit_deepc_unconstrained(
    data: &DataMatrices,
    win: &InitialWindow,
    obj: &RegulationObjective,
    weights: &RegWeights,
) -> Result<ExplicitSolution> {
    weights.validate()?;
    let shape = data.shape();
    win.check(&shape)?;
    let singular = |rcond: f64, bound: usize| Error::SingularInnerMatrix {
        columns: shape.t,
        lambda_g: weights.lambda_g,
        bound,
        rcond,
    };
    let bound = shape.square_t().max(shape.n * shape.p);
    if structural_singularity(&shape, weights.lambda_g).is_some() {
        return Err(singular(inner_rcond(data, obj, weights), bound));
    }
    let inner = inner_matrix(data, obj, weights);
    let info = rank_info(&inner);
    if info.rank < shape.t {
        let rcond = info.singular_values.last().copied().unwrap_or(0.0) / info.sigma_max().max(f64::MIN_POSITIVE);
        return Err(singular(rcond, bound));
    }
    let chol = inner.cholesky().ok_or_else(|| singular(0.0, bound))?;

    let m = data.m();
    let vmat = weights.v_matrix(&shape, obj);
    let q = obj.q_tilde(shape.n);
    let b = win.b(&shape);
    let g = chol.solve(&(m.transpose() * (&vmat * &b)));
    let v = m * &g - &b;
    let y = data.y_n() * &g;
    let mu1 = &q * &y;
    let mu2 = -(&vmat * &v);

    let station = [
        amax(&(&q * &y - &mu1)),
        amax(&(&vmat * &v + &mu2)),
        amax(&(&g * weights.lambda_g + data.y_n().transpose() * &mu1 - m.transpose() * &mu2)),
    ];
    let primal = [amax(&(data.y_n() * &g - &y)), amax(&(m * &g - &b - &v))];
    let objective = y.dot(&(&q * &y)) + v.dot(&(&vmat * &v)) + weights.lambda_g * g.norm_squared();
    Ok(ExplicitSolution {
        v,
        g: Some(g),
        y,
        mu: None,
        mu1: Some(mu1),
        mu2: Some(mu2),
        objective,
        kkt: ExplicitKkt {
            stationarity: station.into_iter().fold(0.0, f64::max),
            primal: primal.into_iter().fold(0.0, f64::max),
        },
        shape,
    })
}

pub fn explicit_spc_unconstrained(
    pred: &Predictor,
    win: &InitialWindow,
    obj: &RegulationObjective,
    weights: &RegWeights,
) -> Result<ExplicitSolution> {
    weights.validate()?;
    let shape = pred.shape();
    win.check(&shape)?;
    if obj.q().nrows() != shape.p || obj.r().nrows() != shape.m {
        return Err(dim_err("objective", format!("p={}, m={}", shape.p, shape.m), format!("p={}, m={}", obj.q().nrows(), obj.r().nrows())));
    }
    let p = pred.matrix();
    let vmat = weights.v_matrix(&shape, obj);
    let q = obj.q_tilde(shape.n);
    let b = win.b(&shape);
    let ptq = p.transpose() * &q;
    let k = &vmat + &ptq * p;
    let k = (&k + k.transpose()) * 0.5;
    let chol = k
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("V + P'Q P is not positive definite".into()))?;
    let v = -chol.solve(&(&ptq * (p * &b)));
    let bv = &b + &v;
    let y = p * &bv;
    let mu = &q * &y;
    let station = [amax(&(&q * &y - &mu)), amax(&(&vmat * &v + p.transpose() * &mu))];
    let primal = amax(&(&y - p * &bv));
    let objective = y.dot(&(&q * &y)) + v.dot(&(&vmat * &v));
    Ok(ExplicitSolution {
        v,
        g: None,
        y,
        mu: Some(mu),
        mu1: None,
        mu2: None,
        objective,
        kkt: ExplicitKkt {
            stationarity: station.into_iter().fold(0.0, f64::max),
            primal,
        },
        shape,
    })
}
