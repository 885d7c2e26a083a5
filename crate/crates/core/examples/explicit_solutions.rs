//! Closed-form unconstrained solutions of regularized DeePC and SPC, and
//! the singular case of tall data without a penalty on `g`.

use ddpc::data::{collect_sequences, DataShape, ExcitationSpec};
use ddpc::equivalence::scenario_window;
use ddpc::error::Error;
use ddpc::lti::NoiseSpec;
use ddpc::ocp::{explicit_deepc_unconstrained, explicit_spc_unconstrained, RegWeights, RegulationObjective};
use ddpc::plant::{build_benchmark_model, BenchmarkParams};
use ddpc::predictor::identify;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_benchmark_model(&BenchmarkParams::default())?;
    let obj = RegulationObjective::scaled_identity(3, 2, 1.0, 0.1)?;
    let square = DataShape::for_model(&model, 100, 4, 40)?;
    let noise = NoiseSpec::new(1e-2, 4)?;
    let data = collect_sequences(&model, square.with_t(square.square_t()), &ExcitationSpec::default(), Some(&noise), 4)?;
    let (win, _) = scenario_window(&model, 4, 3, 1e-2)?;

    let w0 = RegWeights::new(0.0, 1e4, 1e4)?;
    let d = explicit_deepc_unconstrained(&data, &win, &obj, &w0)?;
    let s = explicit_spc_unconstrained(&identify(&data)?, &win, &obj, &w0)?;
    println!("square data: |v_deepc - v_spc| = {:.3e}", (&d.v - &s.v).amax());
    println!("objectives {:.12} {:.12}", d.objective, s.objective);

    // More columns than the bound: rejected unless lambda_g > 0.
    let tall = collect_sequences(&model, square.with_t(150), &ExcitationSpec::default(), Some(&noise), 4)?;
    match explicit_deepc_unconstrained(&tall, &win, &obj, &w0) {
        Err(e @ Error::SingularInnerMatrix { .. }) => println!("T=150, lambda_g=0: {e}"),
        other => println!("unexpected: {:?}", other.map(|s| s.objective)),
    }
    let w1 = RegWeights::new(1.0, 1e4, 1e4)?;
    let reg = explicit_deepc_unconstrained(&tall, &win, &obj, &w1)?;
    println!("T=150, lambda_g=1: objective {:.6}, KKT {:?}", reg.objective, reg.kkt);
    Ok(())
}
