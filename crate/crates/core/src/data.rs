//! Collection and arrangement of input/output data, the executable
//! assumption checks, and the dataset file format.
//!
//! Column `j` of `U_L` is the time-major stack `[u_1; ...; u_L]` of
//! sequence `j` (each step's `m` inputs contiguous); `Y_L` likewise.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{numeric_rank, vstack};
use crate::lti::{simulate_with, NoiseSpec, StateSpaceModel, Trajectory};
use crate::rng::{tag, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DataShape {
    /// Number of recorded sequences.
    pub t: usize,
    pub t_ini: usize,
    /// Prediction horizon.
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

impl DataShape {
    pub fn new(t: usize, t_ini: usize, n: usize, m: usize, p: usize) -> Result<Self> {
        if t == 0 || t_ini == 0 || n == 0 || m == 0 || p == 0 {
            return Err(Error::InvalidParameter(format!(
                "shape entries must be positive: T={t}, Tini={t_ini}, N={n}, m={m}, p={p}"
            )));
        }
        Ok(Self { t, t_ini, n, m, p })
    }

    pub fn for_model(model: &StateSpaceModel, t: usize, t_ini: usize, n: usize) -> Result<Self> {
        Self::new(t, t_ini, n, model.m(), model.p())
    }

    pub fn l(&self) -> usize {
        self.t_ini + self.n
    }

    /// Rows of `M = [Y_Tini; U_Tini; U_N]`.
    pub fn m_rows(&self) -> usize {
        self.t_ini * (self.m + self.p) + self.n * self.m
    }

    /// `L m + T_ini p`, the column count that makes `M` square.
    pub fn square_t(&self) -> usize {
        self.l() * self.m + self.t_ini * self.p
    }

    pub fn with_t(&self, t: usize) -> Self {
        Self { t, ..*self }
    }
}

/// Random excitation used for data collection: inputs i.i.d. uniform on
/// `[u_lo, u_hi]` per channel, initial states i.i.d. `N(0, x0_scale^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExcitationSpec {
    pub u_lo: f64,
    pub u_hi: f64,
    pub x0_scale: f64,
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        Self {
            u_lo: -0.7,
            u_hi: 0.7,
            x0_scale: 0.1,
        }
    }
}

impl ExcitationSpec {
    pub fn zero() -> Self {
        Self {
            u_lo: 0.0,
            u_hi: 0.0,
            x0_scale: 0.0,
        }
    }

    pub fn draw_input(&self, m: usize, rng: &mut SeededRng) -> DVector<f64> {
        DVector::from_fn(m, |_, _| rng.uniform_in(self.u_lo, self.u_hi))
    }
}

/// Row-block split of the data matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub u_ini: DMatrix<f64>,
    pub u_n: DMatrix<f64>,
    pub y_ini: DMatrix<f64>,
    pub y_n: DMatrix<f64>,
    /// `[Y_Tini; U_Tini; U_N]`.
    pub m: DMatrix<f64>,
}

pub fn partition(
    u_l: &DMatrix<f64>,
    y_l: &DMatrix<f64>,
    t_ini: usize,
    m: usize,
    p: usize,
) -> Result<Partition> {
    if u_l.ncols() != y_l.ncols() {
        return Err(dim_err("Y_L columns", u_l.ncols(), y_l.ncols()));
    }
    if m == 0 || p == 0 || !u_l.nrows().is_multiple_of(m) || !y_l.nrows().is_multiple_of(p) {
        return Err(dim_err(
            "data rows",
            format!("multiples of m={m}, p={p}"),
            format!("{} and {}", u_l.nrows(), y_l.nrows()),
        ));
    }
    let l = u_l.nrows() / m;
    if y_l.nrows() / p != l {
        return Err(dim_err("Y_L rows", l * p, y_l.nrows()));
    }
    if t_ini == 0 || t_ini >= l {
        return Err(Error::InvalidParameter(format!(
            "T_ini = {t_ini} must lie in 1..{l}"
        )));
    }
    let t = u_l.ncols();
    let u_ini = u_l.rows(0, t_ini * m).into_owned();
    let u_n = u_l.rows(t_ini * m, (l - t_ini) * m).into_owned();
    let y_ini = y_l.rows(0, t_ini * p).into_owned();
    let y_n = y_l.rows(t_ini * p, (l - t_ini) * p).into_owned();
    let stacked = if t == 0 {
        DMatrix::zeros(t_ini * (m + p) + (l - t_ini) * m, 0)
    } else {
        vstack(&[&y_ini, &u_ini, &u_n])
    };
    Ok(Partition {
        u_ini,
        u_n,
        y_ini,
        y_n,
        m: stacked,
    })
}

/// Recorded data matrices with their partitions.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrices {
    shape: DataShape,
    u_l: DMatrix<f64>,
    y_l: DMatrix<f64>,
    x1: Option<DMatrix<f64>>,
    parts: Partition,
    seed: u64,
    noise: Option<NoiseSpec>,
}

impl DataMatrices {
    pub fn new(
        shape: DataShape,
        u_l: DMatrix<f64>,
        y_l: DMatrix<f64>,
        x1: Option<DMatrix<f64>>,
        seed: u64,
        noise: Option<NoiseSpec>,
    ) -> Result<Self> {
        let l = shape.l();
        if u_l.shape() != (l * shape.m, shape.t) {
            return Err(dim_err("U_L", format!("({}, {})", l * shape.m, shape.t), format!("{:?}", u_l.shape())));
        }
        if y_l.shape() != (l * shape.p, shape.t) {
            return Err(dim_err("Y_L", format!("({}, {})", l * shape.p, shape.t), format!("{:?}", y_l.shape())));
        }
        if let Some(x) = &x1 {
            if x.ncols() != shape.t {
                return Err(dim_err("X1 columns", shape.t, x.ncols()));
            }
        }
        for (name, mat) in [("U_L", &u_l), ("Y_L", &y_l)] {
            if !mat.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        let parts = partition(&u_l, &y_l, shape.t_ini, shape.m, shape.p)?;
        Ok(Self {
            shape,
            u_l,
            y_l,
            x1,
            parts,
            seed,
            noise,
        })
    }

    pub fn shape(&self) -> DataShape {
        self.shape
    }
    pub fn u_l(&self) -> &DMatrix<f64> {
        &self.u_l
    }
    pub fn y_l(&self) -> &DMatrix<f64> {
        &self.y_l
    }
    pub fn x1(&self) -> Option<&DMatrix<f64>> {
        self.x1.as_ref()
    }
    pub fn u_ini(&self) -> &DMatrix<f64> {
        &self.parts.u_ini
    }
    pub fn u_n(&self) -> &DMatrix<f64> {
        &self.parts.u_n
    }
    pub fn y_ini(&self) -> &DMatrix<f64> {
        &self.parts.y_ini
    }
    pub fn y_n(&self) -> &DMatrix<f64> {
        &self.parts.y_n
    }
    /// `M = [Y_Tini; U_Tini; U_N]`.
    pub fn m(&self) -> &DMatrix<f64> {
        &self.parts.m
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn noise(&self) -> Option<NoiseSpec> {
        self.noise
    }
    pub fn sigma_w(&self) -> f64 {
        self.noise.map_or(0.0, |n| n.sigma_w)
    }

    /// Keeps the first `t` sequences.
    pub fn truncated(&self, t: usize) -> Result<Self> {
        if t == 0 || t > self.shape.t {
            return Err(Error::InvalidParameter(format!("cannot keep {t} of {} columns", self.shape.t)));
        }
        Self::new(
            self.shape.with_t(t),
            self.u_l.columns(0, t).into_owned(),
            self.y_l.columns(0, t).into_owned(),
            self.x1.as_ref().map(|x| x.columns(0, t).into_owned()),
            self.seed,
            self.noise,
        )
    }

    /// Builds Hankel-structured data from one long trajectory: column `j`
    /// is the window starting at sample `j`.
    pub fn from_hankel(traj: &Trajectory, t_ini: usize, horizon: usize) -> Result<Self> {
        let l = t_ini + horizon;
        if traj.len() < l {
            return Err(Error::InvalidParameter(format!(
                "trajectory of {} samples is shorter than L = {l}",
                traj.len()
            )));
        }
        let m = traj.u[0].len();
        let p = traj.y[0].len();
        let t = traj.len() - l + 1;
        let shape = DataShape::new(t, t_ini, horizon, m, p)?;
        let mut u_l = DMatrix::zeros(l * m, t);
        let mut y_l = DMatrix::zeros(l * p, t);
        for j in 0..t {
            u_l.set_column(j, &traj.stacked_u(j..j + l));
            y_l.set_column(j, &traj.stacked_y(j..j + l));
        }
        let x1 = traj.x.as_ref().map(|xs| {
            let n = xs[0].len();
            DMatrix::from_fn(n, t, |i, j| xs[j][i])
        });
        Self::new(shape, u_l, y_l, x1, 0, None)
    }
}

/// `T` independent experiments of length `L` from random initial states.
///
/// Sequence `j` draws its initial state and inputs from the stream
/// `(seed, SEQUENCE, j)` and its output noise from `(noise.seed, NOISE, j)`,
/// so datasets with the same seed share inputs and states regardless of
/// noise, and a larger `T` extends a smaller one column by column.
pub fn collect_sequences(
    model: &StateSpaceModel,
    shape: DataShape,
    excitation: &ExcitationSpec,
    noise: Option<&NoiseSpec>,
    seed: u64,
) -> Result<DataMatrices> {
    if shape.m != model.m() || shape.p != model.p() {
        return Err(dim_err(
            "shape",
            format!("m={}, p={}", model.m(), model.p()),
            format!("m={}, p={}", shape.m, shape.p),
        ));
    }
    let l = shape.l();
    let columns: Vec<Result<(DVector<f64>, DVector<f64>, DVector<f64>)>> = (0..shape.t)
        .into_par_iter()
        .map(|j| {
            let mut rng = SeededRng::derive(seed, tag::SEQUENCE, j as u64);
            let x0 = rng.normal_vector(model.n(), excitation.x0_scale);
            let u: Vec<DVector<f64>> = (0..l).map(|_| excitation.draw_input(model.m(), &mut rng)).collect();
            let tr = match noise {
                Some(spec) => {
                    let mut nrng = SeededRng::derive(spec.seed, tag::NOISE, j as u64);
                    simulate_with(model, &x0, &u, spec.sigma_w, Some(&mut nrng))?
                }
                None => simulate_with(model, &x0, &u, 0.0, None)?,
            };
            Ok((tr.stacked_u(0..l), tr.stacked_y(0..l), x0))
        })
        .collect();
    let mut u_l = DMatrix::zeros(l * shape.m, shape.t);
    let mut y_l = DMatrix::zeros(l * shape.p, shape.t);
    let mut x1 = DMatrix::zeros(model.n(), shape.t);
    for (j, col) in columns.into_iter().enumerate() {
        let (u, y, x) = col?;
        u_l.set_column(j, &u);
        y_l.set_column(j, &y);
        x1.set_column(j, &x);
    }
    DataMatrices::new(shape, u_l, y_l, Some(x1), seed, noise.copied())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Persistency {
    pub full_rank: bool,
    pub rank: usize,
    pub required: usize,
}

/// Persistency of excitation of order `L`: `rank(U_L) = L m`.
pub fn check_persistency(u_l: &DMatrix<f64>, l: usize, m: usize) -> Result<Persistency> {
    let required = l * m;
    if u_l.nrows() != required {
        return Err(dim_err("U_L rows", required, u_l.nrows()));
    }
    if u_l.ncols() < required {
        return Err(Error::InsufficientColumns {
            required,
            available: u_l.ncols(),
        });
    }
    let rank = numeric_rank(u_l);
    Ok(Persistency {
        full_rank: rank == required,
        rank,
        required,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotEvaluable,
}

/// One assumption check. When evaluated it passes iff `measured >= required`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub status: CheckStatus,
    pub measured: Option<usize>,
    pub required: Option<usize>,
}

impl Check {
    fn evaluated(measured: usize, required: usize) -> Self {
        Self {
            status: if measured >= required {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            measured: Some(measured),
            required: Some(required),
        }
    }

    fn not_evaluable() -> Self {
        Self {
            status: CheckStatus::NotEvaluable,
            measured: None,
            required: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `T >= L m + n`.
    pub t_lower_bound: Check,
    /// `rank(U_L) = L m`.
    pub pe_order_l: Check,
    /// `T_ini > lag`, stored as `T_ini >= lag + 1`.
    pub t_ini_exceeds_lag: Check,
    /// `rank(X1) = n`.
    pub x1_full_rank: Check,
    /// `[X1; U_L]` has full rank `min(rows, cols)`.
    pub stacked_x1_ul_full_rank: Check,
    pub state_dim: Option<usize>,
    pub lag: Option<usize>,
}

impl AssumptionReport {
    fn checks(&self) -> [(&'static str, &Check); 5] {
        [
            ("t_lower_bound", &self.t_lower_bound),
            ("pe_order_l", &self.pe_order_l),
            ("t_ini_exceeds_lag", &self.t_ini_exceeds_lag),
            ("x1_full_rank", &self.x1_full_rank),
            ("stacked_x1_ul_full_rank", &self.stacked_x1_ul_full_rank),
        ]
    }

    /// Names of checks that were evaluated and failed.
    pub fn failures(&self) -> Vec<&'static str> {
        self.checks()
            .into_iter()
            .filter(|(_, c)| c.failed())
            .map(|(name, _)| name)
            .collect()
    }

    /// True when every check was evaluated and passed.
    pub fn all_pass(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.passed())
    }
}

/// Evaluates the data assumptions. The state dimension comes from `model`
/// or, failing that, from the rows of `X1`; the lag from `lag` or from the
/// model. Checks lacking their inputs are reported as not evaluable.
pub fn check_assumptions(
    data: &DataMatrices,
    model: Option<&StateSpaceModel>,
    lag: Option<usize>,
) -> AssumptionReport {
    let shape = data.shape();
    let l = shape.l();
    let n = model.map(|m| m.n()).or_else(|| data.x1().map(|x| x.nrows()));
    let lag = lag.or_else(|| model.and_then(|m| m.system_lag().ok()));

    let t_lower_bound = match n {
        Some(n) => Check::evaluated(shape.t, l * shape.m + n),
        None => Check::not_evaluable(),
    };
    let pe_order_l = Check::evaluated(numeric_rank(data.u_l()), l * shape.m);
    let t_ini_exceeds_lag = match lag {
        Some(lag) => Check::evaluated(shape.t_ini, lag + 1),
        None => Check::not_evaluable(),
    };
    let (x1_full_rank, stacked) = match (data.x1(), n) {
        (Some(x1), Some(n)) => {
            let stacked = vstack(&[x1, data.u_l()]);
            let full = stacked.nrows().min(stacked.ncols());
            (
                Check::evaluated(numeric_rank(x1), n),
                Check::evaluated(numeric_rank(&stacked), full),
            )
        }
        _ => (Check::not_evaluable(), Check::not_evaluable()),
    };
    AssumptionReport {
        t_lower_bound,
        pe_order_l,
        t_ini_exceeds_lag,
        x1_full_rank,
        stacked_x1_ul_full_rank: stacked,
        state_dim: n,
        lag,
    }
}

// ---------------------------------------------------------------------------
// Dataset file format

fn write_block(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "#block {name}");
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
}

pub fn dataset_to_csv(data: &DataMatrices) -> String {
    let s = data.shape();
    let mut out = String::new();
    let _ = writeln!(out, "#shape {},{},{},{},{}", s.t, s.t_ini, s.n, s.m, s.p);
    match data.noise() {
        Some(noise) => {
            let _ = writeln!(out, "#seed {},{}", data.seed(), noise.seed);
        }
        None => {
            let _ = writeln!(out, "#seed {}", data.seed());
        }
    }
    let _ = writeln!(out, "#sigma_w {:.16e}", data.sigma_w());
    let _ = writeln!(out, "#layout column-per-sequence,time-major");
    write_block(&mut out, "U_L", data.u_l());
    write_block(&mut out, "Y_L", data.y_l());
    if let Some(x1) = data.x1() {
        write_block(&mut out, "X1", x1);
    }
    out
}

pub fn save_dataset(data: &DataMatrices, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_csv(data))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<DataMatrices> {
    dataset_from_csv(&std::fs::read_to_string(path)?)
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn header_value<'a>(lines: &[&'a str], idx: usize, key: &str) -> Result<&'a str> {
    let line = lines
        .get(idx)
        .ok_or_else(|| parse_err(idx + 1, 1, format!("missing `#{key}` header")))?;
    line.strip_prefix(&format!("#{key} "))
        .map(str::trim)
        .ok_or_else(|| parse_err(idx + 1, 1, format!("expected `#{key}` header")))
}

fn parse_list<T: std::str::FromStr>(text: &str, line: usize) -> Result<Vec<T>> {
    text.split(',')
        .enumerate()
        .map(|(i, s)| {
            s.trim()
                .parse()
                .map_err(|_| parse_err(line, i + 1, format!("invalid value `{}`", s.trim())))
        })
        .collect()
}

/// Parses a matrix block, where `first` is the 0-based index of its first
/// data line. Returns the matrix and the index after it.
fn parse_block(
    lines: &[&str],
    first: usize,
    name: &str,
    rows: Option<usize>,
    cols: usize,
) -> Result<(DMatrix<f64>, usize)> {
    let mut values = Vec::new();
    let mut idx = first;
    while idx < lines.len() && !lines[idx].starts_with('#') {
        let row: Vec<f64> = parse_list(lines[idx], idx + 1)?;
        if row.len() != cols {
            return Err(Error::ShapeMismatch {
                block: name.to_string(),
                expected: format!("{cols} columns"),
                found: format!("{} columns at line {}", row.len(), idx + 1),
            });
        }
        values.extend(row);
        idx += 1;
    }
    let found = idx - first;
    if let Some(rows) = rows {
        if found != rows {
            return Err(Error::ShapeMismatch {
                block: name.to_string(),
                expected: format!("{rows} rows"),
                found: format!("{found} rows"),
            });
        }
    }
    Ok((DMatrix::from_row_slice(found, cols, &values), idx))
}

pub fn dataset_from_csv(text: &str) -> Result<DataMatrices> {
    let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
    let dims: Vec<usize> = parse_list(header_value(&lines, 0, "shape")?, 1)?;
    if dims.len() != 5 {
        return Err(parse_err(1, 1, "`#shape` needs T,Tini,N,m,p"));
    }
    let shape = DataShape::new(dims[0], dims[1], dims[2], dims[3], dims[4])?;
    let seeds: Vec<u64> = parse_list(header_value(&lines, 1, "seed")?, 2)?;
    let sigma: Vec<f64> = parse_list(header_value(&lines, 2, "sigma_w")?, 3)?;
    if seeds.is_empty() || seeds.len() > 2 || sigma.len() != 1 {
        return Err(parse_err(2, 1, "malformed `#seed` or `#sigma_w` header"));
    }
    let layout = header_value(&lines, 3, "layout")?;
    if layout != "column-per-sequence,time-major" {
        return Err(parse_err(4, 1, format!("unsupported layout `{layout}`")));
    }
    let noise = match seeds.get(1) {
        Some(&s) => Some(NoiseSpec::new(sigma[0], s)?),
        None if sigma[0] > 0.0 => Some(NoiseSpec::new(sigma[0], seeds[0])?),
        None => None,
    };

    let l = shape.l();
    let mut idx = 4;
    let mut blocks: Vec<(String, DMatrix<f64>)> = Vec::new();
    while idx < lines.len() {
        let name = lines[idx]
            .strip_prefix("#block ")
            .ok_or_else(|| parse_err(idx + 1, 1, "expected `#block <name>`"))?
            .trim()
            .to_string();
        let rows = match name.as_str() {
            "U_L" => Some(l * shape.m),
            "Y_L" => Some(l * shape.p),
            _ => None,
        };
        let (mat, next) = parse_block(&lines, idx + 1, &name, rows, shape.t)?;
        blocks.push((name, mat));
        idx = next;
    }
    let mut take = |name: &str| {
        blocks
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| blocks.remove(i).1)
    };
    let u_l = take("U_L").ok_or_else(|| Error::MissingBlock("U_L".into()))?;
    let y_l = take("Y_L").ok_or_else(|| Error::MissingBlock("Y_L".into()))?;
    let x1 = take("X1");
    DataMatrices::new(shape, u_l, y_l, x1, seeds[0], noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{build_benchmark_model, BenchmarkParams};

    fn bench() -> StateSpaceModel {
        build_benchmark_model(&BenchmarkParams::default()).unwrap()
    }

    #[test]
    fn benchmark_dimensions() {
        let model = bench();
        let shape = DataShape::for_model(&model, 150, 4, 40).unwrap();
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, 1).unwrap();
        assert_eq!(data.u_l().shape(), (88, 150));
        assert_eq!(data.y_l().shape(), (132, 150));
        assert_eq!(data.m().nrows(), 100);
        assert_eq!(shape.m_rows(), 4 * (2 + 3) + 40 * 2);
        assert_eq!(shape.square_t(), 100);
    }

    #[test]
    fn zero_excitation_gives_zero_outputs() {
        let model = bench();
        let shape = DataShape::for_model(&model, 1, 4, 40).unwrap();
        let data = collect_sequences(&model, shape, &ExcitationSpec::zero(), None, 1).unwrap();
        assert!(data.y_l().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn collection_is_deterministic_and_prefix_stable() {
        let model = bench();
        let shape = DataShape::for_model(&model, 20, 4, 10).unwrap();
        let ex = ExcitationSpec::default();
        let a = collect_sequences(&model, shape, &ex, None, 9).unwrap();
        let b = collect_sequences(&model, shape, &ex, None, 9).unwrap();
        assert_eq!(a, b);
        let longer = collect_sequences(&model, shape.with_t(30), &ex, None, 9).unwrap();
        assert_eq!(longer.truncated(20).unwrap().u_l(), a.u_l());
        assert_eq!(longer.truncated(20).unwrap().y_l(), a.y_l());
    }

    #[test]
    fn noisy_collection_shares_inputs() {
        let model = bench();
        let shape = DataShape::for_model(&model, 10, 4, 10).unwrap();
        let ex = ExcitationSpec::default();
        let clean = collect_sequences(&model, shape, &ex, None, 3).unwrap();
        let noise = NoiseSpec::new(1e-2, 4).unwrap();
        let noisy = collect_sequences(&model, shape, &ex, Some(&noise), 3).unwrap();
        assert_eq!(clean.u_l(), noisy.u_l());
        assert_eq!(clean.x1(), noisy.x1());
        let diff = (noisy.y_l() - clean.y_l()).abs().max();
        assert!(diff > 0.0 && diff < 0.1);
    }

    #[test]
    fn partition_small_by_hand() {
        let u = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let y = DMatrix::from_row_slice(2, 1, &[3.0, 4.0]);
        let parts = partition(&u, &y, 1, 1, 1).unwrap();
        assert_eq!(parts.u_ini[(0, 0)], 1.0);
        assert_eq!(parts.u_n[(0, 0)], 2.0);
        assert_eq!(parts.m, DMatrix::from_row_slice(3, 1, &[3.0, 1.0, 2.0]));
        assert_eq!(vstack(&[&parts.u_ini, &parts.u_n]), u);
        assert!(partition(&u, &y, 2, 1, 1).is_err());
        assert!(partition(&u, &y, 0, 1, 1).is_err());
    }

    #[test]
    fn column_unstacking_reproduces_sequence() {
        let model = bench();
        let shape = DataShape::for_model(&model, 3, 2, 3).unwrap();
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, 12).unwrap();
        let mut rng = SeededRng::derive(12, tag::SEQUENCE, 1);
        let _x0 = rng.normal_vector(8, 0.1);
        for k in 0..shape.l() {
            let u = ExcitationSpec::default().draw_input(2, &mut rng);
            assert_eq!(data.u_l()[(2 * k, 1)], u[0]);
            assert_eq!(data.u_l()[(2 * k + 1, 1)], u[1]);
        }
    }

    #[test]
    fn persistency_cases() {
        let model = bench();
        let shape = DataShape::for_model(&model, 150, 4, 40).unwrap();
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, 2).unwrap();
        let pe = check_persistency(data.u_l(), 44, 2).unwrap();
        assert!(pe.full_rank);
        assert_eq!(pe.rank, 88);

        assert!(!check_persistency(&DMatrix::zeros(88, 150), 44, 2).unwrap().full_rank);

        let mut square = data.u_l().columns(0, 88).into_owned();
        let c0 = square.column(0).into_owned();
        square.set_column(1, &c0);
        assert!(!check_persistency(&square, 44, 2).unwrap().full_rank);

        assert!(matches!(
            check_persistency(&data.u_l().columns(0, 80).into_owned(), 44, 2),
            Err(Error::InsufficientColumns { required: 88, available: 80 })
        ));
    }

    #[test]
    fn assumption_bounds_for_benchmark() {
        let model = bench();
        let ex = ExcitationSpec::default();
        let ok = collect_sequences(&model, DataShape::for_model(&model, 150, 4, 40).unwrap(), &ex, None, 5).unwrap();
        let report = check_assumptions(&ok, Some(&model), None);
        assert_eq!(report.t_lower_bound.required, Some(96));
        assert!(report.all_pass(), "{report:?}");
        assert_eq!(report.lag, Some(3));

        let short = ok.truncated(90).unwrap();
        let report = check_assumptions(&short, Some(&model), None);
        assert_eq!(report.failures(), vec!["t_lower_bound"]);
    }

    #[test]
    fn duplicated_initial_states_lose_rank() {
        let x1 = DMatrix::from_fn(8, 8, |i, j| if j == 1 { (i + 1) as f64 } else { ((i * 7 + j * 3) % 5) as f64 + (i == j) as u8 as f64 });
        let mut dup = x1.clone();
        let c0 = dup.column(0).into_owned();
        dup.set_column(1, &c0);
        assert!(numeric_rank(&dup) < 8);
        let model = bench();
        let shape = DataShape::for_model(&model, 8, 1, 1).unwrap();
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, 1).unwrap();
        let data = DataMatrices::new(shape, data.u_l().clone(), data.y_l().clone(), Some(dup), 0, None).unwrap();
        let report = check_assumptions(&data, Some(&model), None);
        assert!(report.x1_full_rank.failed());
    }

    #[test]
    fn unknown_checks_not_evaluable() {
        let model = bench();
        let shape = DataShape::for_model(&model, 100, 4, 5).unwrap();
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, 1).unwrap();
        let bare = DataMatrices::new(shape, data.u_l().clone(), data.y_l().clone(), None, 0, None).unwrap();
        let report = check_assumptions(&bare, None, None);
        assert_eq!(report.t_lower_bound.status, CheckStatus::NotEvaluable);
        assert_eq!(report.t_ini_exceeds_lag.status, CheckStatus::NotEvaluable);
        assert_eq!(report.x1_full_rank.status, CheckStatus::NotEvaluable);
        assert!(report.pe_order_l.passed());
        assert!(!report.all_pass());
        assert!(report.failures().is_empty());
    }

    #[test]
    fn hankel_windows() {
        let model = bench();
        let mut rng = SeededRng::new(4);
        let u: Vec<_> = (0..60).map(|_| ExcitationSpec::default().draw_input(2, &mut rng)).collect();
        let tr = crate::lti::simulate(&model, &DVector::zeros(8), &u, None).unwrap();
        let data = DataMatrices::from_hankel(&tr, 4, 10).unwrap();
        assert_eq!(data.shape().t, 60 - 14 + 1);
        assert_eq!(data.u_l()[(0, 5)], u[5][0]);
        assert_eq!(data.y_l()[(3, 2)], tr.y[3][0]);
        assert_eq!(data.x1().unwrap().column(7), tr.x.as_ref().unwrap()[7].column(0));
    }

    #[test]
    fn dataset_round_trip_and_errors() {
        let model = bench();
        let shape = DataShape::for_model(&model, 150, 4, 40).unwrap();
        let noise = NoiseSpec::new(1e-2, 77).unwrap();
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), Some(&noise), 76).unwrap();
        let text = dataset_to_csv(&data);
        assert!(text.starts_with("#shape 150,4,40,2,3\n#seed 76,77\n#sigma_w"));
        let back = dataset_from_csv(&text).unwrap();
        assert_eq!(back, data);

        // Truncate inside the header region of Y_L.
        let cut = &text[..text.find("#block Y_L").unwrap()];
        assert!(matches!(dataset_from_csv(cut), Err(Error::MissingBlock(b)) if b == "Y_L"));

        // Drop the last value of one row.
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let row = &mut lines[5];
        let pos = row.rfind(',').unwrap();
        row.truncate(pos);
        let broken = lines.join("\n");
        assert!(matches!(dataset_from_csv(&broken), Err(Error::ShapeMismatch { .. })));

        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[6] = lines[6].replacen(',', ",abc,", 1);
        match dataset_from_csv(&lines.join("\n")) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 7);
                assert_eq!(column, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
