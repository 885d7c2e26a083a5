//! Regularized DeePC and SPC on noisy data. The slacks absorb the
//! mismatch between the measured window and the data.

use ddpc::data::{collect_sequences, DataShape, ExcitationSpec};
use ddpc::equivalence::scenario_window;
use ddpc::lti::NoiseSpec;
use ddpc::ocp::{solve_deepc_regularized, solve_spc_regularized, BoxConstraints, RegWeights, RegulationObjective};
use ddpc::plant::{build_benchmark_model, BenchmarkParams};
use ddpc::predictor::identify;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_benchmark_model(&BenchmarkParams::default())?;
    let shape = DataShape::for_model(&model, 150, 4, 40)?;
    let noise = NoiseSpec::new(1e-2, 2)?;
    let data = collect_sequences(&model, shape, &ExcitationSpec::default(), Some(&noise), 2)?;
    let obj = RegulationObjective::scaled_identity(3, 2, 1.0, 0.1)?;
    let bounds = BoxConstraints::input_box(2, 3, 0.7);
    let weights = RegWeights::new(1.0, 1e4, 1e4)?;
    let (win, _) = scenario_window(&model, shape.t_ini, 9, 1e-2)?;

    let d = solve_deepc_regularized(&data, &win, &obj, &weights, &bounds)?;
    let s = solve_spc_regularized(&identify(&data)?, &win, &obj, &weights, &bounds)?;
    for (name, sol) in [("deepc", &d), ("spc", &s)] {
        let sy = sol.sigma_y.as_ref().map_or(0.0, |v| v.amax());
        println!("{name:<6} objective {:.6}  |sigma_y| {sy:.3e}  iterations {}", sol.objective, sol.iterations);
    }
    Ok(())
}
