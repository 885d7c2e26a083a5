//! Solves deterministic DeePC and SPC on clean data for one window with
//! input bounds. On noiseless data both give the same input sequence.

use ddpc::data::{collect_sequences, DataShape, ExcitationSpec};
use ddpc::equivalence::scenario_window;
use ddpc::ocp::{solve_deepc, solve_spc, BoxConstraints, RegulationObjective};
use ddpc::plant::{build_benchmark_model, BenchmarkParams};
use ddpc::predictor::identify;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_benchmark_model(&BenchmarkParams::default())?;
    let shape = DataShape::for_model(&model, 150, 4, 40)?;
    let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, 0)?;
    let obj = RegulationObjective::scaled_identity(3, 2, 1.0, 0.1)?;
    let bounds = BoxConstraints::input_box(2, 3, 0.7);
    let (win, _) = scenario_window(&model, shape.t_ini, 5, 0.0)?;

    let d = solve_deepc(&data, &win, &obj, &bounds)?;
    let s = solve_spc(&identify(&data)?, &win, &obj, &bounds)?;
    println!("deepc objective {:.10} in {:.2} ms", d.objective, d.solve_time_seconds * 1e3);
    println!("spc   objective {:.10} in {:.2} ms", s.objective, s.solve_time_seconds * 1e3);
    println!("max |u_deepc - u_spc| = {:.3e}", (&d.u - &s.u).amax());
    println!("first input {:?}", d.first_input(2).as_slice());
    println!("deepc KKT {:?}", d.kkt);
    Ok(())
}
