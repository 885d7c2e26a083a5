//! Discrete-time LTI systems: representation, simulation and the
//! observability/Toeplitz machinery used as a prediction oracle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::numeric_rank;
use crate::rng::{tag, SeededRng};

/// `x_{k+1} = A x_k + B u_k`, `y_k = C x_k + D u_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    dt: f64,
}

impl StateSpaceModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        dt: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(dim_err("A", "nonempty square", format!("{:?}", a.shape())));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(dim_err("B", format!("{n} x m, m > 0"), format!("{:?}", b.shape())));
        }
        let m = b.ncols();
        if c.ncols() != n || c.nrows() == 0 {
            return Err(dim_err("C", format!("p x {n}, p > 0"), format!("{:?}", c.shape())));
        }
        let p = c.nrows();
        if d.shape() != (p, m) {
            return Err(dim_err("D", format!("({p}, {m})"), format!("{:?}", d.shape())));
        }
        for (name, mat) in [("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
            if !mat.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
            }
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { a, b, c, d, dt })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// `[C; CA; ...; CA^{i-1}]`.
    pub fn observability_matrix(&self, i: usize) -> DMatrix<f64> {
        let (n, p) = (self.n(), self.p());
        let mut out = DMatrix::zeros(i * p, n);
        let mut block = self.c.clone();
        for k in 0..i {
            out.view_mut((k * p, 0), (p, n)).copy_from(&block);
            block = &block * &self.a;
        }
        out
    }

    /// Block lower-triangular impulse-response matrix with `D` on the
    /// diagonal and `C A^{j-k-1} B` in block `(j, k)` for `j > k`.
    pub fn toeplitz_matrix(&self, i: usize) -> DMatrix<f64> {
        let (m, p) = (self.m(), self.p());
        let mut markov = Vec::with_capacity(i);
        markov.push(self.d.clone());
        let mut ab = self.b.clone();
        for _ in 1..i {
            markov.push(&self.c * &ab);
            ab = &self.a * &ab;
        }
        let mut out = DMatrix::zeros(i * p, i * m);
        for row in 0..i {
            for col in 0..=row {
                out.view_mut((row * p, col * m), (p, m))
                    .copy_from(&markov[row - col]);
            }
        }
        out
    }

    /// `[B, AB, ..., A^{i-1} B]`.
    pub fn controllability_matrix(&self, i: usize) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut out = DMatrix::zeros(n, i * m);
        let mut block = self.b.clone();
        for k in 0..i {
            out.view_mut((0, k * m), (n, m)).copy_from(&block);
            block = &self.a * &block;
        }
        out
    }

    /// Smallest `l` with `rank(O_l) = n`.
    pub fn system_lag(&self) -> Result<usize> {
        let n = self.n();
        for l in 1..=n {
            if numeric_rank(&self.observability_matrix(l)) == n {
                return Ok(l);
            }
        }
        Err(Error::Unobservable {
            rank: numeric_rank(&self.observability_matrix(n)),
            n,
            horizon: n,
        })
    }

    pub fn minimality(&self) -> Minimality {
        let n = self.n();
        Minimality {
            observability_rank: numeric_rank(&self.observability_matrix(n)),
            controllability_rank: numeric_rank(&self.controllability_matrix(n)),
            n,
        }
    }

    pub fn is_minimal(&self) -> bool {
        self.minimality().is_minimal()
    }

    pub fn spectral_radius(&self) -> f64 {
        crate::linalg::spectral_radius(&self.a)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Minimality {
    pub observability_rank: usize,
    pub controllability_rank: usize,
    pub n: usize,
}

impl Minimality {
    pub fn is_minimal(&self) -> bool {
        self.observability_rank == self.n && self.controllability_rank == self.n
    }
}

/// On-disk model layout: dimensions plus row-major matrix entries.
#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ModelFile {
    n: usize,
    m: usize,
    p: usize,
    dt: f64,
    A: Vec<f64>,
    B: Vec<f64>,
    C: Vec<f64>,
    D: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl From<&StateSpaceModel> for ModelFile {
    fn from(s: &StateSpaceModel) -> Self {
        Self {
            n: s.n(),
            m: s.m(),
            p: s.p(),
            dt: s.dt,
            A: row_major(&s.a),
            B: row_major(&s.b),
            C: row_major(&s.c),
            D: row_major(&s.d),
        }
    }
}

impl TryFrom<ModelFile> for StateSpaceModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let take = |name: &'static str, data: Vec<f64>, r: usize, c: usize| {
            if data.len() != r * c {
                return Err(dim_err(name, r * c, data.len()));
            }
            Ok(DMatrix::from_row_slice(r, c, &data))
        };
        StateSpaceModel::new(
            take("A", f.A, f.n, f.n)?,
            take("B", f.B, f.n, f.m)?,
            take("C", f.C, f.p, f.n)?,
            take("D", f.D, f.p, f.m)?,
            f.dt,
        )
    }
}

/// Additive output noise `w_k ~ N(0, sigma_w^2 I)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_w: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma_w: f64, seed: u64) -> Result<Self> {
        if !(sigma_w.is_finite() && sigma_w >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma_w must be >= 0, got {sigma_w}")));
        }
        Ok(Self { sigma_w, seed })
    }

    /// The generator used for this spec's draws, in sample-major order.
    pub fn rng(&self) -> SeededRng {
        SeededRng::derive(self.seed, tag::NOISE, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub u: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    /// States `x_0 ..= x_K` when recorded.
    pub x: Option<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Time-major stack of the inputs in `range`.
    pub fn stacked_u(&self, range: std::ops::Range<usize>) -> DVector<f64> {
        stack(&self.u[range])
    }

    pub fn stacked_y(&self, range: std::ops::Range<usize>) -> DVector<f64> {
        stack(&self.y[range])
    }
}

pub(crate) fn stack(samples: &[DVector<f64>]) -> DVector<f64> {
    let parts: Vec<&DVector<f64>> = samples.iter().collect();
    crate::linalg::vcat(&parts)
}

/// Simulates the model from `x0`; with `noise`, each output sample is
/// corrupted by draws from the spec's generator.
pub fn simulate(
    model: &StateSpaceModel,
    x0: &DVector<f64>,
    u_seq: &[DVector<f64>],
    noise: Option<&NoiseSpec>,
) -> Result<Trajectory> {
    match noise {
        Some(spec) => {
            let mut rng = spec.rng();
            simulate_with(model, x0, u_seq, spec.sigma_w, Some(&mut rng))
        }
        None => simulate_with(model, x0, u_seq, 0.0, None),
    }
}

/// Simulation with an explicit noise generator; draws are consumed in
/// sample-major, channel-minor order only when `sigma_w > 0`.
pub fn simulate_with(
    model: &StateSpaceModel,
    x0: &DVector<f64>,
    u_seq: &[DVector<f64>],
    sigma_w: f64,
    mut rng: Option<&mut SeededRng>,
) -> Result<Trajectory> {
    if x0.len() != model.n() {
        return Err(dim_err("x0", model.n(), x0.len()));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("x0"));
    }
    if u_seq.is_empty() {
        return Err(Error::InvalidParameter("input sequence is empty".into()));
    }
    let mut x = x0.clone();
    let mut xs = Vec::with_capacity(u_seq.len() + 1);
    let mut ys = Vec::with_capacity(u_seq.len());
    xs.push(x.clone());
    for u in u_seq {
        if u.len() != model.m() {
            return Err(dim_err("u_k", model.m(), u.len()));
        }
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("u_seq"));
        }
        let mut y = model.c() * &x + model.d() * u;
        if sigma_w > 0.0 {
            if let Some(r) = rng.as_deref_mut() {
                for yi in y.iter_mut() {
                    *yi += sigma_w * r.standard_normal();
                }
            }
        }
        x = model.a() * &x + model.b() * u;
        ys.push(y);
        xs.push(x.clone());
    }
    Ok(Trajectory {
        u: u_seq.to_vec(),
        y: ys,
        x: Some(xs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar() -> StateSpaceModel {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        StateSpaceModel::new(one(0.5), one(1.0), one(1.0), one(0.0), 0.1).unwrap()
    }

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn scalar_two_step_recursion() {
        let tr = simulate(&scalar(), &v(&[0.0]), &[v(&[1.0]), v(&[1.0])], None).unwrap();
        assert_eq!(tr.y, vec![v(&[0.0]), v(&[1.0])]);
        assert_eq!(tr.x.unwrap(), vec![v(&[0.0]), v(&[1.0]), v(&[1.5])]);
    }

    #[test]
    fn zero_input_zero_state_stays_zero() {
        let tr = simulate(&scalar(), &v(&[0.0]), &vec![v(&[0.0]); 5], None).unwrap();
        assert!(tr.y.iter().all(|y| y[0] == 0.0));
    }

    #[test]
    fn observability_and_toeplitz_by_hand() {
        let s = scalar();
        assert_eq!(s.observability_matrix(2), DMatrix::from_column_slice(2, 1, &[1.0, 0.5]));
        assert_eq!(s.observability_matrix(1), *s.c());
        assert_eq!(s.toeplitz_matrix(1), *s.d());
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.5, 1.0, 0.0]);
        assert_eq!(s.toeplitz_matrix(3), expected);
    }

    #[test]
    fn lag_of_simple_models() {
        assert_eq!(scalar().system_lag().unwrap(), 1);
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]);
        let full = StateSpaceModel::new(
            a.clone(),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            1.0,
        )
        .unwrap();
        assert_eq!(full.system_lag().unwrap(), 1);
    }

    #[test]
    fn unobservable_model_is_rejected() {
        let m = StateSpaceModel::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.3]),
            DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
            1.0,
        )
        .unwrap();
        assert!(matches!(m.system_lag(), Err(Error::Unobservable { .. })));
        assert!(!m.is_minimal());
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let s = scalar();
        assert!(matches!(
            simulate(&s, &v(&[0.0, 0.0]), &[v(&[1.0])], None),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            simulate(&s, &v(&[0.0]), &[v(&[f64::INFINITY])], None),
            Err(Error::NonFinite(_))
        ));
        assert!(StateSpaceModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            0.1
        )
        .is_err());
    }

    #[test]
    fn json_round_trip() {
        let model = crate::plant::build_benchmark_model(&Default::default()).unwrap();
        let text = model.to_json().unwrap();
        let back = StateSpaceModel::from_json(&text).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn noise_is_reproducible_and_additive() {
        let model = crate::plant::build_benchmark_model(&Default::default()).unwrap();
        let mut rng = SeededRng::new(99);
        let u: Vec<_> = (0..30)
            .map(|_| DVector::from_fn(2, |_, _| rng.uniform_in(-0.7, 0.7)))
            .collect();
        let x0 = DVector::zeros(8);
        let spec = NoiseSpec::new(1e-2, 5).unwrap();
        let clean = simulate(&model, &x0, &u, None).unwrap();
        let noisy = simulate(&model, &x0, &u, Some(&spec)).unwrap();
        let again = simulate(&model, &x0, &u, Some(&spec)).unwrap();
        assert_eq!(noisy, again);
        let mut draws = spec.rng();
        for (yc, yn) in clean.y.iter().zip(&noisy.y) {
            for i in 0..3 {
                let w = 1e-2 * draws.standard_normal();
                assert_relative_eq!(yn[i] - yc[i], w, epsilon = 1e-15);
            }
        }
        let zero = NoiseSpec::new(0.0, 5).unwrap();
        assert_eq!(simulate(&model, &x0, &u, Some(&zero)).unwrap(), clean);
    }
}
