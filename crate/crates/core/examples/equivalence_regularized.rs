//! Explicit regularized DeePC against regularized SPC on square noisy
//! data, where the two coincide when `g` is not penalized.

use ddpc::equivalence::{verify_theorem2, verify_theorem2_with, Theorem2Options};
use ddpc::plant::{build_benchmark_model, BenchmarkParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_benchmark_model(&BenchmarkParams::default())?;
    let report = verify_theorem2(&model, 4, 40, 0)?;
    print!("{}", report.render());

    // A penalty on g breaks the equivalence; the report is informational.
    let opts = Theorem2Options { lambda_g: 1.0, n_scenarios: 5, ..Theorem2Options::default() };
    let lg = verify_theorem2_with(&model, 4, 40, 0, &opts)?;
    println!("lambda_g = 1: max |v| gap {:?}", lg.max_deviations().v);
    Ok(())
}
