//! Identifies the multistep predictor from clean data and compares its
//! prediction with a simulation from a random state.

use ddpc::data::{collect_sequences, DataShape, ExcitationSpec};
use ddpc::equivalence::scenario_window;
use ddpc::lti::simulate;
use ddpc::plant::{build_benchmark_model, BenchmarkParams};
use ddpc::predictor::identify;
use nalgebra::DVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_benchmark_model(&BenchmarkParams::default())?;
    let shape = DataShape::for_model(&model, 150, 4, 40)?;
    let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, 1)?;
    let pred = identify(&data)?;
    println!("P is {}x{}, effective rank {}", pred.matrix().nrows(), pred.matrix().ncols(), pred.effective_rank());
    println!("in-sample residual {:.3e}", pred.fit_residual());

    let (win, x) = scenario_window(&model, shape.t_ini, 11, 0.0)?;
    let u: Vec<DVector<f64>> = (0..shape.n).map(|k| DVector::from_element(2, (0.1 * k as f64).sin() * 0.5)).collect();
    let y_hat = pred.predict(&win.y_ini, &win.u_ini, &ddpc::linalg::vcat(&u.iter().collect::<Vec<_>>()))?;
    let truth = simulate(&model, &x, &u, None)?;
    let gap = (0..shape.n).map(|k| (y_hat.rows(3 * k, 3) - &truth.y[k]).amax()).fold(0.0, f64::max);
    println!("max prediction error {gap:.3e}");
    Ok(())
}
