//! Builds the three-disc benchmark plant and prints its structure.

use ddpc::plant::{build_benchmark_model, BenchmarkParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_benchmark_model(&BenchmarkParams::default())?;
    println!("n={} m={} p={} dt={}", model.n(), model.m(), model.p(), model.dt());
    println!("lag {}", model.system_lag()?);
    println!("minimal {}", model.is_minimal());
    println!("spectral radius {:.6}", model.spectral_radius());

    // Round trip through JSON.
    let json = model.to_json()?;
    let back = ddpc::lti::StateSpaceModel::from_json(&json)?;
    assert_eq!(back.a(), model.a());
    Ok(())
}
