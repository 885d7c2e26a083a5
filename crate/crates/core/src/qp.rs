//! Dense convex quadratic programming.
//!
//! Solves
//!
//! ```text
//! minimize    1/2 z'Hz + f'z
//! subject to  A_eq z = b_eq,   lo <= z <= hi
//! ```
//!
//! with `H` symmetric positive semidefinite. Variables with `lo == hi` are
//! fixed and removed, the equalities are eliminated with a pivoted QR
//! null-space basis, and the remaining bound-constrained problem is solved
//! by the Goldfarb–Idnani dual active-set method. A reduced Hessian that
//! is only semidefinite is accepted when its null space is orthogonal to
//! the gradient and to every bound; the solver then returns the solution
//! with no component along that null space.
//!
//! Multipliers satisfy `Hz + f + A_eq' nu - lambda_lo + lambda_hi = 0`
//! with `lambda_lo, lambda_hi >= 0`.

use std::borrow::Cow;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::QpError;
use crate::linalg::PivotedQr;

type QpResult<T> = std::result::Result<T, QpError>;

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    /// Lower bounds, `-inf` where absent.
    pub lo: DVector<f64>,
    /// Upper bounds, `+inf` where absent.
    pub hi: DVector<f64>,
}

impl QpProblem {
    /// Unbounded problem with no equalities.
    pub fn new(h: DMatrix<f64>, f: DVector<f64>) -> Self {
        let n = f.len();
        Self {
            h,
            f,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            lo: DVector::from_element(n, f64::NEG_INFINITY),
            hi: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn with_equalities(mut self, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Self {
        self.a_eq = a_eq;
        self.b_eq = b_eq;
        self
    }

    pub fn with_bounds(mut self, lo: DVector<f64>, hi: DVector<f64>) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.f.dot(z)
    }

    fn validate(&self) -> QpResult<()> {
        let n = self.n();
        let bad = |msg: String| Err(QpError::InvalidProblem(msg));
        if self.h.shape() != (n, n) {
            return bad(format!("H is {:?}, expected ({n}, {n})", self.h.shape()));
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return bad(format!(
                "A_eq is {:?} with {} right-hand sides, expected {n} columns",
                self.a_eq.shape(),
                self.b_eq.len()
            ));
        }
        if self.lo.len() != n || self.hi.len() != n {
            return bad(format!("bounds have lengths {} and {}, expected {n}", self.lo.len(), self.hi.len()));
        }
        let finite = |m: &[f64]| m.iter().all(|v| v.is_finite());
        if !finite(self.h.as_slice()) || !finite(self.f.as_slice()) || !finite(self.a_eq.as_slice()) || !finite(self.b_eq.as_slice()) {
            return bad("non-finite problem data".into());
        }
        if self.lo.iter().chain(self.hi.iter()).any(|v| v.is_nan()) {
            return bad("NaN bound".into());
        }
        let scale = self.h.amax();
        if (&self.h - self.h.transpose()).amax() > 1e-9 * (1.0 + scale) {
            return bad("H is not symmetric".into());
        }
        for i in 0..n {
            if self.lo[i] > self.hi[i] || self.lo[i] == f64::INFINITY || self.hi[i] == f64::NEG_INFINITY {
                return Err(QpError::InfeasibleBox {
                    index: i,
                    lo: self.lo[i],
                    hi: self.hi[i],
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpOptions {
    /// Allowed bound violation, relative to `1 + |bound|`.
    pub feasibility_tol: f64,
    /// Eigenvalues of the reduced Hessian below this fraction of the
    /// largest are treated as zero curvature.
    pub curvature_tol: f64,
    /// Active-set changes before giving up; `None` picks `10 (n + m_i) + 100`.
    pub max_iterations: Option<usize>,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            curvature_tol: 1e-10,
            max_iterations: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct QpResiduals {
    /// `|Hz + f + A'nu - lambda_lo + lambda_hi|_inf`.
    pub stationarity: f64,
    /// Largest equality residual or bound violation.
    pub primal: f64,
    /// Largest `lambda * |slack|` over finite bounds.
    pub complementarity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub objective: f64,
    pub nu: DVector<f64>,
    pub lambda_lo: DVector<f64>,
    pub lambda_hi: DVector<f64>,
    pub iterations: usize,
    /// Dimension of the zero-curvature subspace that was factored out.
    pub null_curvature_dim: usize,
    pub residuals: QpResiduals,
}

impl QpSolution {
    pub fn active_lower(&self) -> Vec<usize> {
        (0..self.z.len()).filter(|&i| self.lambda_lo[i] > 0.0).collect()
    }

    pub fn active_upper(&self) -> Vec<usize> {
        (0..self.z.len()).filter(|&i| self.lambda_hi[i] > 0.0).collect()
    }
}

pub fn solve_qp(problem: &QpProblem, options: &QpOptions) -> QpResult<QpSolution> {
    PreparedQp::new(problem, options)?.solve(&problem.f, &problem.b_eq)
}

/// Everything about a problem that does not depend on `f` and `b_eq`:
/// scaling, variable elimination, the null-space basis and the factored
/// reduced Hessian. Repeated solves with new linear terms or right-hand
/// sides only pay for the active-set iterations.
#[derive(Clone, Debug)]
pub struct PreparedQp {
    original: QpProblem,
    options: QpOptions,
    /// Scaling `z = D s` with `D = diag(H)^{-1/2}` where the diagonal is
    /// positive, so that curvature tests see unit scale per variable.
    d: DVector<f64>,
    /// Scaled problem data.
    h: DMatrix<f64>,
    a_eq: DMatrix<f64>,
    lo: DVector<f64>,
    free: Vec<usize>,
    fixed: Vec<usize>,
    h_ff: DMatrix<f64>,
    /// `H s_fixed` and `A s_fixed` for the fixed values alone.
    h_fixed: DVector<f64>,
    a_fixed: DVector<f64>,
    qr: Option<PivotedQr>,
    basis: DMatrix<f64>,
    rows: Vec<BoundRow>,
    /// Free variables whose value does not depend on `w`, with bounds.
    pinned: Vec<BoundRow>,
    reduced: Reduced,
    c_rows: Vec<DVector<f64>>,
    tols: Vec<f64>,
}

impl PreparedQp {
    pub fn new(problem: &QpProblem, options: &QpOptions) -> QpResult<Self> {
        problem.validate()?;
        let n = problem.n();
        let e = problem.b_eq.len();
        let d = DVector::from_fn(n, |i, _| {
            let hii = problem.h[(i, i)];
            if hii > 0.0 {
                1.0 / hii.sqrt()
            } else {
                1.0
            }
        });
        let dm = DMatrix::from_diagonal(&d);
        let h = &dm * &problem.h * &dm;
        let a_eq = &problem.a_eq * &dm;
        let lo = problem.lo.component_div(&d);
        let hi = problem.hi.component_div(&d);

        let free: Vec<usize> = (0..n).filter(|&i| lo[i] < hi[i]).collect();
        let fixed: Vec<usize> = (0..n).filter(|&i| lo[i] == hi[i]).collect();
        let nf = free.len();
        let mut s_fixed = DVector::zeros(n);
        for &i in &fixed {
            s_fixed[i] = lo[i];
        }
        let h_ff = h.select_rows(&free).select_columns(&free);
        let a_f = a_eq.select_columns(&free);
        let h_fixed = &h * &s_fixed;
        let a_fixed = &a_eq * &s_fixed;

        let (basis, qr) = if e == 0 {
            (DMatrix::identity(nf, nf), None)
        } else {
            let qr = PivotedQr::new(a_f.transpose());
            if qr.rank() < e {
                return Err(QpError::RankDeficientEquality {
                    rank: qr.rank(),
                    rows: e,
                });
            }
            (qr.complement_basis(), Some(qr))
        };

        // Bound rows in w-space: sign * basis_i w >= rhs.
        let mut rows = Vec::new();
        let mut pinned = Vec::new();
        for (k, &i) in free.iter().enumerate() {
            let scale = basis.row(k).norm();
            for (upper, bound) in [(false, lo[i]), (true, hi[i])] {
                if !bound.is_finite() {
                    continue;
                }
                let row = BoundRow { free_index: k, upper, bound };
                if scale <= 1e-12 {
                    pinned.push(row);
                } else {
                    rows.push(row);
                }
            }
        }

        let g = basis.transpose() * &h_ff * &basis;
        let g = (&g + g.transpose()) * 0.5;
        let h_scale = if nf == 0 { 0.0 } else { h_ff.diagonal().amax() };
        let reduced = reduce_curvature(&g, &basis, &rows, options.curvature_tol, h_scale)?;
        let c_rows: Vec<DVector<f64>> = rows
            .iter()
            .map(|r| {
                let c = (basis.row(r.free_index) * &reduced.map).transpose();
                if r.upper {
                    -c
                } else {
                    c
                }
            })
            .collect();
        let tol_of = |b: f64, i: usize| options.feasibility_tol * (1.0 + (b * d[i]).abs()) / d[i];
        let tols = rows.iter().map(|r| tol_of(r.bound, free[r.free_index])).collect();
        Ok(Self {
            original: problem.clone(),
            options: *options,
            d,
            h,
            a_eq,
            lo,
            free,
            fixed,
            h_ff,
            h_fixed,
            a_fixed,
            qr,
            basis,
            rows,
            pinned,
            reduced,
            c_rows,
            tols,
        })
    }

    pub fn n(&self) -> usize {
        self.original.n()
    }

    pub fn n_eq(&self) -> usize {
        self.original.b_eq.len()
    }

    fn tol_of(&self, b: f64, i: usize) -> f64 {
        self.options.feasibility_tol * (1.0 + (b * self.d[i]).abs()) / self.d[i]
    }

    /// Solves with linear term `f` and right-hand side `b_eq`; residuals
    /// refer to the unscaled problem with these data.
    pub fn solve(&self, f: &DVector<f64>, b_eq: &DVector<f64>) -> QpResult<QpSolution> {
        let n = self.n();
        let e = self.n_eq();
        if f.len() != n || b_eq.len() != e {
            return Err(QpError::InvalidProblem(format!(
                "f has length {}, b_eq {}; expected {n} and {e}",
                f.len(),
                b_eq.len()
            )));
        }
        if !f.iter().chain(b_eq.iter()).all(|v| v.is_finite()) {
            return Err(QpError::InvalidProblem("non-finite problem data".into()));
        }
        let d = &self.d;
        let f_s = f.component_mul(d);
        let free = &self.free;
        let nf = free.len();

        let f_hat = DVector::from_fn(nf, |k, _| f_s[free[k]] + self.h_fixed[free[k]]);
        let b_hat = b_eq - &self.a_fixed;
        let x_p = match &self.qr {
            None => DVector::zeros(nf),
            Some(qr) => {
                let b_perm: Vec<f64> = qr.perm().iter().map(|&r| b_hat[r]).collect();
                let mut xp = qr.solve_rt(&b_perm);
                xp.resize(nf, 0.0);
                qr.apply_q(&mut xp);
                DVector::from_vec(xp)
            }
        };
        for r in &self.pinned {
            let (k, t) = (r.free_index, self.tol_of(r.bound, free[r.free_index]));
            let ok = if r.upper { x_p[k] <= r.bound + t } else { x_p[k] >= r.bound - t };
            if !ok {
                return Err(QpError::Infeasible);
            }
        }

        let a_w = self.basis.transpose() * (&self.h_ff * &x_p + &f_hat);
        let red = &self.reduced;
        if red.null.ncols() > 0 {
            let a_null = red.null.transpose() * &a_w;
            if a_null.amax() > 1e-8 * (1.0 + a_w.amax()) {
                return Err(QpError::SingularReducedKkt);
            }
        }
        let a_y = red.map.transpose() * &a_w;
        let k = red.map.ncols();
        let rhs: Vec<f64> = self
            .rows
            .iter()
            .map(|r| if r.upper { x_p[r.free_index] - r.bound } else { r.bound - x_p[r.free_index] })
            .collect();
        let limit = self.options.max_iterations.unwrap_or(10 * (k + self.rows.len()) + 100);

        let dual = if k == 0 {
            // No freedom left: every row must hold at y = 0.
            if rhs.iter().zip(&self.tols).any(|(di, ti)| *di > *ti) {
                return Err(QpError::Infeasible);
            }
            DualResult {
                y: DVector::zeros(0),
                active: Vec::new(),
                u: Vec::new(),
                iterations: 0,
            }
        } else {
            goldfarb_idnani(&red.l_inv_t, &a_y, &self.c_rows, &rhs, &self.tols, limit)?
        };

        let w = &red.map * &dual.y;
        let x_free = &x_p + &self.basis * &w;
        let mut s = DVector::zeros(n);
        for &i in &self.fixed {
            s[i] = self.lo[i];
        }
        for (kk, &i) in free.iter().enumerate() {
            s[i] = x_free[kk];
        }

        let mut lambda_lo = DVector::zeros(n);
        let mut lambda_hi = DVector::zeros(n);
        for (&ri, &ui) in dual.active.iter().zip(&dual.u) {
            let r = &self.rows[ri];
            let i = free[r.free_index];
            if r.upper {
                lambda_hi[i] = ui;
            } else {
                lambda_lo[i] = ui;
            }
        }

        // Equality multipliers from the free-variable stationarity rows.
        let grad = &self.h * &s + &f_s;
        let mut nu = DVector::zeros(e);
        if let Some(qr) = &self.qr {
            let mut rhs: Vec<f64> = free.iter().map(|&i| -(grad[i] - lambda_lo[i] + lambda_hi[i])).collect();
            qr.apply_qt(&mut rhs);
            let sol = qr.solve_r(&rhs[..e]);
            for (j, &row) in qr.perm().iter().enumerate() {
                nu[row] = sol[j];
            }
        }
        // Fixed variables take whatever bound multiplier closes stationarity.
        let atnu = self.a_eq.transpose() * &nu;
        for &i in &self.fixed {
            let r = grad[i] + atnu[i];
            if r > 0.0 {
                lambda_lo[i] = r;
            } else {
                lambda_hi[i] = -r;
            }
        }

        // Back to the original variables; fixed ones keep their bounds exactly.
        let mut z = s.component_mul(d);
        lambda_lo.component_div_assign(d);
        lambda_hi.component_div_assign(d);
        for &i in &self.fixed {
            z[i] = self.original.lo[i];
        }
        let p = &self.original;
        let residuals = residuals_of(&p.h, f, &p.a_eq, b_eq, &p.lo, &p.hi, &z, &nu, &lambda_lo, &lambda_hi);
        Ok(QpSolution {
            objective: 0.5 * z.dot(&(&p.h * &z)) + f.dot(&z),
            z,
            nu,
            lambda_lo,
            lambda_hi,
            iterations: dual.iterations,
            null_curvature_dim: self.basis.ncols() - k,
            residuals,
        })
    }
}

/// A problem whose kernel is prepared on first use and reused as long as
/// the options stay the same.
#[derive(Clone, Debug)]
pub struct CachedQp {
    problem: QpProblem,
    prepared: OnceLock<(QpOptions, QpResult<PreparedQp>)>,
}

impl CachedQp {
    pub fn new(problem: QpProblem) -> Self {
        Self {
            problem,
            prepared: OnceLock::new(),
        }
    }

    /// Template problem; `f` and `b_eq` are placeholders.
    pub fn problem(&self) -> &QpProblem {
        &self.problem
    }

    pub fn kernel(&self, options: &QpOptions) -> QpResult<Cow<'_, PreparedQp>> {
        let (opts, prepared) = self
            .prepared
            .get_or_init(|| (*options, PreparedQp::new(&self.problem, options)));
        if opts == options {
            prepared.as_ref().map(Cow::Borrowed).map_err(Clone::clone)
        } else {
            PreparedQp::new(&self.problem, options).map(Cow::Owned)
        }
    }
}

pub fn residuals(
    problem: &QpProblem,
    z: &DVector<f64>,
    nu: &DVector<f64>,
    lambda_lo: &DVector<f64>,
    lambda_hi: &DVector<f64>,
) -> QpResiduals {
    residuals_of(&problem.h, &problem.f, &problem.a_eq, &problem.b_eq, &problem.lo, &problem.hi, z, nu, lambda_lo, lambda_hi)
}

#[allow(clippy::too_many_arguments)]
fn residuals_of(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    z: &DVector<f64>,
    nu: &DVector<f64>,
    lambda_lo: &DVector<f64>,
    lambda_hi: &DVector<f64>,
) -> QpResiduals {
    let station = h * z + f + a_eq.transpose() * nu - lambda_lo + lambda_hi;
    let mut primal = if b_eq.is_empty() { 0.0 } else { (a_eq * z - b_eq).amax() };
    let mut comp: f64 = 0.0;
    for i in 0..z.len() {
        primal = primal.max(lo[i] - z[i]).max(z[i] - hi[i]);
        if lo[i].is_finite() {
            comp = comp.max(lambda_lo[i] * (z[i] - lo[i]).abs());
        }
        if hi[i].is_finite() {
            comp = comp.max(lambda_hi[i] * (hi[i] - z[i]).abs());
        }
    }
    QpResiduals {
        stationarity: if z.is_empty() { 0.0 } else { station.amax() },
        primal: primal.max(0.0),
        complementarity: comp,
    }
}

#[derive(Clone, Copy, Debug)]
struct BoundRow {
    free_index: usize,
    upper: bool,
    bound: f64,
}

/// Positive definite problem in `y`, with `w = map y`.
#[derive(Clone, Debug)]
struct Reduced {
    map: DMatrix<f64>,
    /// `L^{-T}` for the Cholesky factor of the reduced Hessian.
    l_inv_t: DMatrix<f64>,
    /// Zero-curvature directions; the gradient must not see them.
    null: DMatrix<f64>,
}

fn reduce_curvature(
    g: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    rows: &[BoundRow],
    curvature_tol: f64,
    h_scale: f64,
) -> QpResult<Reduced> {
    let nw = g.nrows();
    if nw == 0 {
        return Ok(Reduced {
            map: DMatrix::zeros(0, 0),
            l_inv_t: DMatrix::zeros(0, 0),
            null: DMatrix::zeros(0, 0),
        });
    }
    // Curvature is judged against the Hessian itself, so a reduced
    // Hessian that is numerically zero is recognized as such.
    let diag_max = g.diagonal().amax().max(h_scale);
    if diag_max > 0.0 {
        if let Some(chol) = g.clone().cholesky() {
            let l = chol.l();
            let min_pivot = l.diagonal().iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
            if min_pivot > curvature_tol * diag_max {
                let l_inv = l
                    .solve_lower_triangular(&DMatrix::identity(nw, nw))
                    .ok_or(QpError::SingularReducedKkt)?;
                return Ok(Reduced {
                    map: DMatrix::identity(nw, nw),
                    l_inv_t: l_inv.transpose(),
                    null: DMatrix::zeros(nw, 0),
                });
            }
        }
    }

    let eig = SymmetricEigen::new(g.clone());
    let lambda_max = eig.eigenvalues.max().max(h_scale);
    let keep: Vec<usize> = (0..nw).filter(|&i| eig.eigenvalues[i] > curvature_tol * lambda_max).collect();
    let drop: Vec<usize> = (0..nw).filter(|&i| eig.eigenvalues[i] <= curvature_tol * lambda_max).collect();
    let null = eig.eigenvectors.select_columns(&drop);
    // The bounds must not see the flat directions, otherwise the
    // minimizer is not well defined.
    for r in rows {
        let zi = basis.row(r.free_index);
        let proj = zi * &null;
        if proj.amax() > 1e-8 * zi.norm() {
            return Err(QpError::SingularReducedKkt);
        }
    }
    let map = eig.eigenvectors.select_columns(&keep);
    let l_inv_t = DMatrix::from_diagonal(&DVector::from_iterator(
        keep.len(),
        keep.iter().map(|&i| 1.0 / eig.eigenvalues[i].sqrt()),
    ));
    Ok(Reduced { map, l_inv_t, null })
}

struct DualResult {
    y: DVector<f64>,
    /// Indices of active rows and their multipliers.
    active: Vec<usize>,
    u: Vec<f64>,
    iterations: usize,
}

/// Goldfarb–Idnani dual active-set method for
/// `min 1/2 y'Gy + a'y  s.t.  c_i'y >= d_i`, given `J = L^{-T}` with
/// `G = L L'`.
fn goldfarb_idnani(
    j0: &DMatrix<f64>,
    a: &DVector<f64>,
    c: &[DVector<f64>],
    d: &[f64],
    tols: &[f64],
    limit: usize,
) -> QpResult<DualResult> {
    let n = a.len();
    let mut j = j0.clone();
    let mut r = DMatrix::<f64>::zeros(n, n);
    let mut r_norm: f64 = 1.0;
    // Unconstrained minimizer y = -G^{-1} a = -J J' a.
    let mut y = -(&j * (j.transpose() * a));
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active = vec![false; c.len()];
    let mut iterations = 0;

    loop {
        // Most violated inactive row, scaled by its tolerance.
        let mut p = None;
        let mut worst = 0.0;
        for i in 0..c.len() {
            if is_active[i] {
                continue;
            }
            let s = c[i].dot(&y) - d[i];
            if s < -tols[i] && s / tols[i] < worst {
                worst = s / tols[i];
                p = Some(i);
            }
        }
        let Some(p) = p else {
            return Ok(DualResult { y, active, u, iterations });
        };
        let np = &c[p];
        let mut u_plus = 0.0;

        loop {
            iterations += 1;
            if iterations > limit {
                return Err(QpError::IterationLimit { limit });
            }
            let q = active.len();
            let dv = j.transpose() * np;
            let d2 = dv.rows(q, n - q);
            let step = j.columns(q, n - q) * d2;
            let rv = if q > 0 { solve_upper(&r, &dv, q) } else { Vec::new() };

            // Partial step: largest dual step keeping multipliers >= 0.
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (k, &rk) in rv.iter().enumerate() {
                if rk > 0.0 {
                    let tk = u[k] / rk;
                    if tk < t1 {
                        t1 = tk;
                        drop_at = Some(k);
                    }
                }
            }
            // Full step: makes row p active.
            let zz = d2.norm_squared();
            let s_p = np.dot(&y) - d[p];
            let t2 = if zz > 1e-14 * dv.norm_squared() { -s_p / zz } else { f64::INFINITY };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(QpError::Infeasible);
            }
            if t2.is_finite() {
                y += &step * t;
            }
            for (uk, rk) in u.iter_mut().zip(&rv) {
                *uk -= t * rk;
            }
            u_plus += t;

            if t2 <= t1 {
                let mut dvec = dv.clone();
                if !add_constraint(&mut r, &mut j, &mut dvec, q, &mut r_norm) {
                    return Err(QpError::Infeasible);
                }
                active.push(p);
                u.push(u_plus);
                is_active[p] = true;
                break;
            }
            let k = drop_at.expect("partial step has a blocking multiplier");
            is_active[active[k]] = false;
            active.remove(k);
            u.remove(k);
            delete_constraint(&mut r, &mut j, k, q);
        }
    }
}

/// Solves `R[..q, ..q] x = rhs[..q]`.
fn solve_upper(r: &DMatrix<f64>, rhs: &DVector<f64>, q: usize) -> Vec<f64> {
    let mut x = vec![0.0; q];
    for i in (0..q).rev() {
        let mut s = rhs[i];
        for k in i + 1..q {
            s -= r[(i, k)] * x[k];
        }
        x[i] = s / r[(i, i)];
    }
    x
}

/// Zeroes `d[q+1..]` with Givens rotations applied to the columns of `J`
/// and appends `d[..=q]` as column `q` of `R`.
fn add_constraint(r: &mut DMatrix<f64>, j: &mut DMatrix<f64>, d: &mut DVector<f64>, q: usize, r_norm: &mut f64) -> bool {
    let n = d.len();
    for col in (q + 1..n).rev() {
        let (cc, ss) = (d[col - 1], d[col]);
        let h = cc.hypot(ss);
        if h == 0.0 {
            continue;
        }
        d[col] = 0.0;
        let (mut cc, mut ss) = (cc / h, ss / h);
        if cc < 0.0 {
            cc = -cc;
            ss = -ss;
            d[col - 1] = -h;
        } else {
            d[col - 1] = h;
        }
        let xny = ss / (1.0 + cc);
        for k in 0..n {
            let t1 = j[(k, col - 1)];
            let t2 = j[(k, col)];
            let new = t1 * cc + t2 * ss;
            j[(k, col - 1)] = new;
            j[(k, col)] = xny * (t1 + new) - t2;
        }
    }
    for i in 0..=q {
        r[(i, q)] = d[i];
    }
    if d[q].abs() <= f64::EPSILON * *r_norm {
        return false;
    }
    *r_norm = r_norm.max(d[q].abs());
    true
}

/// Removes column `k` of the `q x q` triangle `R` and restores its
/// triangular form, rotating the matching columns of `J`.
fn delete_constraint(r: &mut DMatrix<f64>, j: &mut DMatrix<f64>, k: usize, q: usize) {
    let n = j.nrows();
    for col in k..q - 1 {
        for i in 0..q {
            r[(i, col)] = r[(i, col + 1)];
        }
    }
    for i in 0..q {
        r[(i, q - 1)] = 0.0;
    }
    let q = q - 1;
    for row in k..q {
        let (cc, ss) = (r[(row, row)], r[(row + 1, row)]);
        let h = cc.hypot(ss);
        if h == 0.0 {
            continue;
        }
        let (mut cc, mut ss) = (cc / h, ss / h);
        r[(row + 1, row)] = 0.0;
        if cc < 0.0 {
            r[(row, row)] = -h;
            cc = -cc;
            ss = -ss;
        } else {
            r[(row, row)] = h;
        }
        let xny = ss / (1.0 + cc);
        for col in row + 1..q {
            let t1 = r[(row, col)];
            let t2 = r[(row + 1, col)];
            let new = t1 * cc + t2 * ss;
            r[(row, col)] = new;
            r[(row + 1, col)] = xny * (t1 + new) - t2;
        }
        for kk in 0..n {
            let t1 = j[(kk, row)];
            let t2 = j[(kk, row + 1)];
            let new = t1 * cc + t2 * ss;
            j[(kk, row)] = new;
            j[(kk, row + 1)] = xny * (new + t1) - t2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecf(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn kkt_ok(sol: &QpSolution) {
        assert!(sol.residuals.stationarity < 1e-9, "{:?}", sol.residuals);
        assert!(sol.residuals.primal < 1e-9, "{:?}", sol.residuals);
        assert!(sol.residuals.complementarity < 1e-9, "{:?}", sol.residuals);
    }

    #[test]
    fn scalar_upper_bound_multiplier() {
        // (z - 2)^2 with z <= 1.
        let p = QpProblem::new(DMatrix::from_element(1, 1, 2.0), vecf(&[-4.0]))
            .with_bounds(vecf(&[f64::NEG_INFINITY]), vecf(&[1.0]));
        let sol = solve_qp(&p, &QpOptions::default()).unwrap();
        assert!((sol.z[0] - 1.0).abs() < 1e-12);
        assert!((sol.lambda_hi[0] - 2.0).abs() < 1e-12);
        assert_eq!(sol.lambda_lo[0], 0.0);
        assert_eq!(sol.active_upper(), vec![0]);
        kkt_ok(&sol);
    }

    #[test]
    fn unconstrained_matches_linear_solve() {
        let h = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let f = vecf(&[1.0, 2.0]);
        let sol = solve_qp(&QpProblem::new(h.clone(), f.clone()), &QpOptions::default()).unwrap();
        let expected = -h.lu().solve(&f).unwrap();
        assert!((sol.z - expected).amax() < 1e-12);
    }

    #[test]
    fn equality_constrained() {
        // min x^2 + y^2 s.t. x + y = 1.
        let p = QpProblem::new(DMatrix::identity(2, 2) * 2.0, vecf(&[0.0, 0.0]))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), vecf(&[1.0]));
        let sol = solve_qp(&p, &QpOptions::default()).unwrap();
        assert!((&sol.z - vecf(&[0.5, 0.5])).amax() < 1e-12);
        assert!((sol.nu[0] + 1.0).abs() < 1e-12);
        kkt_ok(&sol);
    }

    #[test]
    fn fixed_variable_and_lower_bound() {
        // min (x-1)^2 + (y+1)^2 + xy, x fixed at 2, y >= 0.
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let f = vecf(&[-2.0, 2.0]);
        let p = QpProblem::new(h, f).with_bounds(vecf(&[2.0, 0.0]), vecf(&[2.0, f64::INFINITY]));
        let sol = solve_qp(&p, &QpOptions::default()).unwrap();
        assert!((&sol.z - vecf(&[2.0, 0.0])).amax() < 1e-12);
        assert!((sol.lambda_lo[1] - 4.0).abs() < 1e-12);
        kkt_ok(&sol);
    }

    #[test]
    fn semidefinite_with_flat_direction() {
        // z = [a, b], objective (a + b - 1)^2 has a flat direction a - b.
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]);
        let f = vecf(&[-2.0, -2.0]);
        let sol = solve_qp(&QpProblem::new(h, f), &QpOptions::default()).unwrap();
        assert_eq!(sol.null_curvature_dim, 1);
        assert!((sol.z[0] + sol.z[1] - 1.0).abs() < 1e-12);
        assert!((sol.z[0] - sol.z[1]).abs() < 1e-12);
    }

    #[test]
    fn unbounded_semidefinite_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let f = vecf(&[0.0, 1.0]);
        assert_eq!(solve_qp(&QpProblem::new(h, f), &QpOptions::default()).unwrap_err(), QpError::SingularReducedKkt);
    }

    #[test]
    fn infeasible_cases() {
        let h = DMatrix::identity(2, 2);
        let f = vecf(&[0.0, 0.0]);
        let crossed = QpProblem::new(h.clone(), f.clone()).with_bounds(vecf(&[1.0, 0.0]), vecf(&[0.0, 1.0]));
        assert!(matches!(solve_qp(&crossed, &QpOptions::default()), Err(QpError::InfeasibleBox { index: 0, .. })));

        // x + y = 3 with both in [0, 1].
        let p = QpProblem::new(h.clone(), f.clone())
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), vecf(&[3.0]))
            .with_bounds(vecf(&[0.0, 0.0]), vecf(&[1.0, 1.0]));
        assert_eq!(solve_qp(&p, &QpOptions::default()).unwrap_err(), QpError::Infeasible);

        let dup = QpProblem::new(h, f).with_equalities(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]), vecf(&[1.0, 2.0]));
        assert!(matches!(solve_qp(&dup, &QpOptions::default()), Err(QpError::RankDeficientEquality { rank: 1, rows: 2 })));
    }

    #[test]
    fn invalid_input_rejected() {
        let p = QpProblem::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]), vecf(&[0.0, 0.0]));
        assert!(matches!(solve_qp(&p, &QpOptions::default()), Err(QpError::InvalidProblem(_))));
        let p = QpProblem::new(DMatrix::identity(2, 2), vecf(&[f64::NAN, 0.0]));
        assert!(matches!(solve_qp(&p, &QpOptions::default()), Err(QpError::InvalidProblem(_))));
    }

    #[test]
    fn many_active_bounds() {
        // Pull toward (3, -3, 3, -3) inside the unit box with a coupling term.
        let n = 4;
        let mut h = DMatrix::identity(n, n) * 2.0;
        for i in 0..n - 1 {
            h[(i, i + 1)] = 0.5;
            h[(i + 1, i)] = 0.5;
        }
        let target = vecf(&[3.0, -3.0, 3.0, -3.0]);
        let f = -(&h * &target);
        let p = QpProblem::new(h, f).with_bounds(DVector::from_element(n, -1.0), DVector::from_element(n, 1.0));
        let sol = solve_qp(&p, &QpOptions::default()).unwrap();
        assert!((&sol.z - vecf(&[1.0, -1.0, 1.0, -1.0])).amax() < 1e-12);
        kkt_ok(&sol);
    }
}
