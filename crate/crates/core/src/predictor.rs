//! Least-squares multistep predictor `P = Y_N M^+` used by SPC.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::data::{DataMatrices, DataShape};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{pinv, rank_info, vcat};

/// Column blocks of `P` are ordered `[P_yini | P_uini | P_uN]`, matching
/// the row order of `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictor {
    shape: DataShape,
    p: DMatrix<f64>,
    rank: usize,
    fit_residual: f64,
}

pub fn identify(data: &DataMatrices) -> Result<Predictor> {
    let m = data.m();
    let p = data.y_n() * pinv(m)?;
    let fit_residual = (data.y_n() - &p * m).norm();
    Ok(Predictor {
        shape: data.shape(),
        p,
        rank: rank_info(m).rank,
        fit_residual,
    })
}

impl Predictor {
    pub fn from_matrix(shape: DataShape, p: DMatrix<f64>) -> Result<Self> {
        let expected = (shape.n * shape.p, shape.m_rows());
        if p.shape() != expected {
            return Err(dim_err("predictor", format!("{expected:?}"), format!("{:?}", p.shape())));
        }
        Ok(Self {
            shape,
            p,
            rank: 0,
            fit_residual: f64::NAN,
        })
    }

    pub fn shape(&self) -> DataShape {
        self.shape
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// `(P_yini, P_uini, P_uN)`.
    pub fn blocks(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let s = self.shape;
        let rows = self.p.nrows();
        let ny = s.t_ini * s.p;
        let nu = s.t_ini * s.m;
        (
            self.p.view((0, 0), (rows, ny)).into_owned(),
            self.p.view((0, ny), (rows, nu)).into_owned(),
            self.p.view((0, ny + nu), (rows, s.n * s.m)).into_owned(),
        )
    }

    /// Rank of `M` at identification time, zero when built from a matrix.
    pub fn effective_rank(&self) -> usize {
        self.rank
    }

    /// `||Y_N - P M||_F` on the identification data.
    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    pub fn predict(
        &self,
        y_ini: &DVector<f64>,
        u_ini: &DVector<f64>,
        u_n: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let s = self.shape;
        for (name, v, len) in [
            ("y_ini", y_ini, s.t_ini * s.p),
            ("u_ini", u_ini, s.t_ini * s.m),
            ("u_N", u_n, s.n * s.m),
        ] {
            if v.len() != len {
                return Err(dim_err(name, len, v.len()));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(&self.p * vcat(&[y_ini, u_ini, u_n]))
    }

    /// CSV with a `#shape rows,cols` header and one matrix row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#shape {},{}", self.p.nrows(), self.p.ncols());
        for row in self.p.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{collect_sequences, ExcitationSpec};
    use crate::lti::simulate;
    use crate::plant::{build_benchmark_model, BenchmarkParams};
    use crate::rng::SeededRng;

    fn setup(t: usize) -> (crate::lti::StateSpaceModel, DataMatrices) {
        let model = build_benchmark_model(&BenchmarkParams::default()).unwrap();
        let shape = DataShape::for_model(&model, t, 4, 40).unwrap();
        let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, 21).unwrap();
        (model, data)
    }

    #[test]
    fn block_shapes() {
        let (_, data) = setup(150);
        let pred = identify(&data).unwrap();
        let (py, pu, pn) = pred.blocks();
        assert_eq!(pred.matrix().shape(), (120, 100));
        assert_eq!(py.shape(), (120, 12));
        assert_eq!(pu.shape(), (120, 8));
        assert_eq!(pn.shape(), (120, 80));
        assert_eq!(pred.effective_rank(), 96);
    }

    #[test]
    fn exact_on_noise_free_data() {
        let (model, data) = setup(150);
        let pred = identify(&data).unwrap();
        assert!(pred.fit_residual() < 1e-8 * data.y_n().norm());

        // A fresh trajectory not in the dataset.
        let mut rng = SeededRng::new(99);
        let x0 = rng.normal_vector(8, 0.1);
        let u: Vec<_> = (0..44).map(|_| ExcitationSpec::default().draw_input(2, &mut rng)).collect();
        let tr = simulate(&model, &x0, &u, None).unwrap();
        let y_hat = pred
            .predict(&tr.stacked_y(0..4), &tr.stacked_u(0..4), &tr.stacked_u(4..44))
            .unwrap();
        let y = tr.stacked_y(4..44);
        assert!((y_hat - &y).norm() < 1e-8 * (1.0 + y.norm()));
    }

    #[test]
    fn predict_rejects_bad_lengths() {
        let (_, data) = setup(100);
        let pred = identify(&data).unwrap();
        let r = pred.predict(&DVector::zeros(11), &DVector::zeros(8), &DVector::zeros(80));
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }

    #[test]
    fn csv_header() {
        let (_, data) = setup(100);
        let csv = identify(&data).unwrap().to_csv();
        assert!(csv.starts_with("#shape 120,100\n"));
        assert_eq!(csv.lines().count(), 121);
    }
}
