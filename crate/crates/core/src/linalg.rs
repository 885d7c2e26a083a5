//! Dense linear-algebra helpers shared by every module.
//!
//! All rank decisions use one rule: singular values at or below
//! `max(rows, cols) * eps * sigma_max` count as zero.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Scale-aware tolerance applied to singular values.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Singular values (descending) together with the rank they imply.
#[derive(Clone, Debug)]
pub struct RankInfo {
    pub rank: usize,
    pub tolerance: f64,
    pub singular_values: Vec<f64>,
}

impl RankInfo {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Smallest singular value that was kept, or zero for a zero matrix.
    pub fn sigma_min_kept(&self) -> f64 {
        if self.rank == 0 {
            0.0
        } else {
            self.singular_values[self.rank - 1]
        }
    }
}

/// Thin SVD `m = u diag(s) v_t` with singular values in descending order.
///
/// One-sided Jacobi on the triangular factor of a QR of the tall
/// orientation. Both nalgebra's bidiagonal SVD and the system LAPACK
/// `gesdd` reachable through nalgebra-lapack returned factors that do not
/// reproduce exactly rank-deficient data matrices; Jacobi rotations are
/// slower but accurate to working precision on such inputs.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> Svd {
    let (r, c) = m.shape();
    if r < c {
        let t = svd(&m.transpose());
        return Svd {
            u: t.v_t.transpose(),
            s: t.s,
            v_t: t.u.transpose(),
        };
    }
    if c == 0 {
        return Svd {
            u: DMatrix::zeros(r, 0),
            s: DVector::zeros(0),
            v_t: DMatrix::zeros(0, 0),
        };
    }
    let qr = m.clone().qr();
    let (q, mut w) = (qr.q(), qr.r());
    let mut v = DMatrix::<f64>::identity(c, c);
    jacobi_orthogonalize(&mut w, &mut v);

    let norms: Vec<f64> = (0..c).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let s = DVector::from_iterator(c, order.iter().map(|&j| norms[j]));
    let floor = f64::EPSILON * f64::EPSILON * s[0].max(f64::MIN_POSITIVE);
    let mut u_r = DMatrix::zeros(c, c);
    let mut filled = 0;
    for (k, &j) in order.iter().enumerate() {
        if s[k] <= floor {
            break;
        }
        u_r.set_column(k, &(w.column(j) / s[k]));
        filled += 1;
    }
    // Zero singular values: complete U to an orthonormal set.
    let mut e = 0;
    while filled < c {
        let mut x = DVector::zeros(c);
        x[e % c] = 1.0;
        e += 1;
        for _ in 0..2 {
            let proj = u_r.columns(0, filled).transpose() * &x;
            x -= u_r.columns(0, filled) * proj;
        }
        let nx = x.norm();
        if nx > 0.5 {
            u_r.set_column(filled, &(x / nx));
            filled += 1;
        }
    }
    Svd {
        u: q * u_r,
        s,
        v_t: v.select_columns(&order).transpose(),
    }
}

/// Rotates column pairs of `w` until they are mutually orthogonal,
/// accumulating the rotations in `v`.
fn jacobi_orthogonalize(w: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    let c = w.ncols();
    let tol = f64::EPSILON * c as f64;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut *w, &mut *v] {
                    for i in 0..mat.nrows() {
                        let (a, b) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = cs * a - sn * b;
                        mat[(i, q)] = sn * a + cs * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

fn sorted_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    svd(m).s.iter().copied().collect()
}

pub fn rank_info(m: &DMatrix<f64>) -> RankInfo {
    let s = sorted_singular_values(m);
    let tol = rank_tolerance(m.nrows(), m.ncols(), s.first().copied().unwrap_or(0.0));
    let rank = s.iter().filter(|&&v| v > tol).count();
    RankInfo {
        rank,
        tolerance: tol,
        singular_values: s,
    }
}

pub fn numeric_rank(m: &DMatrix<f64>) -> usize {
    rank_info(m).rank
}

pub fn ensure_finite(m: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

/// Moore–Penrose pseudoinverse via SVD with the standard truncation rule.
pub fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(m, "pseudoinverse input")?;
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(DMatrix::zeros(c, r));
    }
    let Svd { u, s: sv, v_t } = svd(m);
    let tol = rank_tolerance(r, c, sv.max());
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in sv.iter().enumerate() {
        if s > tol {
            // out += v_k u_k^T / s
            let vk = v_t.row(k).transpose() / s;
            out.ger(1.0, &vk, &u.column(k), 1.0);
        }
    }
    Ok(out)
}

/// Orthonormal basis of the null space of `m` (columns), computed from a
/// full SVD. Returns a `cols x 0` matrix when the null space is trivial.
pub fn null_space(m: &DMatrix<f64>) -> (DMatrix<f64>, RankInfo) {
    let (r, c) = m.shape();
    // Pad with zero rows so the SVD is square and V is complete.
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let Svd { s: sv, v_t, .. } = svd(&padded);
    let s: Vec<f64> = sv.iter().copied().collect();
    let tol = rank_tolerance(r, c, s.first().copied().unwrap_or(0.0));
    let rank = s.iter().filter(|&&v| v > tol).count();
    let basis = DMatrix::from_fn(c, c - rank, |i, j| v_t[(rank + j, i)]);
    let info = RankInfo {
        rank,
        tolerance: tol,
        singular_values: s[..r.min(c)].to_vec(),
    };
    (basis, info)
}

/// Orthonormal basis of the column space of `m`.
pub fn column_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(r, 0);
    }
    let Svd { u, s, .. } = svd(m);
    let rank = s.iter().filter(|&&v| v > rank_tolerance(r, c, s.max())).count();
    u.columns(0, rank).into_owned()
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
///
/// The argument is scaled so that its 1-norm is at most 1/2; the series is
/// cut once the remainder bound drops below machine precision relative to
/// the partial sum, well inside the 1e-12 truncation budget.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(crate::error::dim_err("expm", "square matrix", format!("{:?}", a.shape())));
    }
    ensure_finite(a, "expm input")?;
    let n = a.nrows();
    let nrm = norm1(a);
    let squarings = if nrm > 0.5 {
        (nrm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let x = a / 2f64.powi(squarings);
    let xn = norm1(&x);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=40 {
        term = &term * &x / k as f64;
        sum += &term;
        let ratio = xn / (k as f64 + 1.0);
        let remainder = norm1(&term) * ratio / (1.0 - ratio);
        if remainder <= f64::EPSILON * norm1(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// `times` copies of `block` along the diagonal.
pub fn block_diag_repeat(block: &DMatrix<f64>, times: usize) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(r * times, c * times);
    for k in 0..times {
        out.view_mut((k * r, k * c), (r, c)).copy_from(block);
    }
    out
}

pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r0, 0), b.shape()).copy_from(*b);
        r0 += b.nrows();
    }
    out
}

pub fn vcat(parts: &[&DVector<f64>]) -> DVector<f64> {
    let len: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut i0 = 0;
    for p in parts {
        out.rows_mut(i0, p.len()).copy_from(*p);
        i0 += p.len();
    }
    out
}

/// Infinity norm of a vector; zero for empty vectors.
pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Householder QR with column pivoting, `A P = Q R`.
///
/// Householder vectors are stored below the diagonal of `qr` with an
/// implicit leading one; `tau` holds the reflector coefficients.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    qr: DMatrix<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn new(mut a: DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let k = rows.min(cols);
        let mut tau = vec![0.0; k];
        let mut perm: Vec<usize> = (0..cols).collect();
        let data = a.as_mut_slice();
        for j in 0..k {
            // Pivot on the largest remaining column norm.
            let mut best = j;
            let mut best_norm = -1.0;
            for l in j..cols {
                let col = &data[l * rows + j..(l + 1) * rows];
                let nrm: f64 = col.iter().map(|v| v * v).sum();
                if nrm > best_norm {
                    best_norm = nrm;
                    best = l;
                }
            }
            if best != j {
                for i in 0..rows {
                    data.swap(j * rows + i, best * rows + i);
                }
                perm.swap(j, best);
            }
            let (head, tail) = data.split_at_mut((j + 1) * rows);
            let col = &mut head[j * rows + j..];
            let x0 = col[0];
            let sigma: f64 = col[1..].iter().map(|v| v * v).sum();
            if sigma == 0.0 {
                tau[j] = 0.0;
                continue;
            }
            let norm = (x0 * x0 + sigma).sqrt();
            let beta = if x0 > 0.0 { -norm } else { norm };
            tau[j] = (beta - x0) / beta;
            let scale = 1.0 / (x0 - beta);
            for v in col[1..].iter_mut() {
                *v *= scale;
            }
            col[0] = beta;
            let v = &col[1..];
            let t = tau[j];
            for l in 0..cols - j - 1 {
                let target = &mut tail[l * rows + j..(l + 1) * rows];
                let mut w = target[0];
                for (ti, vi) in target[1..].iter().zip(v) {
                    w += ti * vi;
                }
                w *= t;
                target[0] -= w;
                for (ti, vi) in target[1..].iter_mut().zip(v) {
                    *ti -= w * vi;
                }
            }
        }
        let r00 = if k > 0 { a[(0, 0)].abs() } else { 0.0 };
        let tol = rank_tolerance(rows, cols, r00);
        let rank = (0..k).take_while(|&j| a[(j, j)].abs() > tol).count();
        Self { qr: a, tau, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Column permutation: column `j` of `A P` is column `perm()[j]` of `A`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn r_diag(&self, j: usize) -> f64 {
        self.qr[(j, j)]
    }

    fn apply_reflector(&self, j: usize, x: &mut [f64]) {
        let rows = self.qr.nrows();
        let v = &self.qr.as_slice()[j * rows + j + 1..(j + 1) * rows];
        let mut w = x[j];
        for (xi, vi) in x[j + 1..].iter().zip(v) {
            w += xi * vi;
        }
        w *= self.tau[j];
        x[j] -= w;
        for (xi, vi) in x[j + 1..].iter_mut().zip(v) {
            *xi -= w * vi;
        }
    }

    /// `x <- Q^T x`.
    pub fn apply_qt(&self, x: &mut [f64]) {
        for j in 0..self.tau.len() {
            self.apply_reflector(j, x);
        }
    }

    /// `x <- Q x`.
    pub fn apply_q(&self, x: &mut [f64]) {
        for j in (0..self.tau.len()).rev() {
            self.apply_reflector(j, x);
        }
    }

    /// Columns `rank..rows` of `Q`: an orthonormal basis of the orthogonal
    /// complement of the column space of `A`.
    pub fn complement_basis(&self) -> DMatrix<f64> {
        let rows = self.qr.nrows();
        let extra = rows - self.rank;
        let mut out = DMatrix::zeros(rows, extra);
        for j in 0..extra {
            out[(self.rank + j, j)] = 1.0;
        }
        for j in 0..extra {
            let col = &mut out.as_mut_slice()[j * rows..(j + 1) * rows];
            self.apply_q(col);
        }
        out
    }

    /// Solve `R[..k, ..k]^T y = rhs` for the leading `k = rhs.len()` block.
    pub fn solve_rt(&self, rhs: &[f64]) -> Vec<f64> {
        let k = rhs.len();
        let mut y = rhs.to_vec();
        for i in 0..k {
            let mut s = y[i];
            for j in 0..i {
                s -= self.qr[(j, i)] * y[j];
            }
            y[i] = s / self.qr[(i, i)];
        }
        y
    }

    /// Solve `R[..k, ..k] y = rhs` for the leading `k = rhs.len()` block.
    pub fn solve_r(&self, rhs: &[f64]) -> Vec<f64> {
        let k = rhs.len();
        let mut y = rhs.to_vec();
        for i in (0..k).rev() {
            let mut s = y[i];
            for j in i + 1..k {
                s -= self.qr[(i, j)] * y[j];
            }
            y[i] = s / self.qr[(i, i)];
        }
        y
    }
}
