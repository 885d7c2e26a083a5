//! Deterministic DeePC against SPC over 25 scenarios on the benchmark,
//! including a noiseless closed loop per scenario.

use ddpc::data::DataShape;
use ddpc::equivalence::{verify_theorem1_with, Theorem1Options};
use ddpc::plant::{build_benchmark_model, BenchmarkParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_benchmark_model(&BenchmarkParams::default())?;
    let shape = DataShape::for_model(&model, 150, 4, 40)?;
    let opts = Theorem1Options { closed_loop: true, ..Theorem1Options::default() };
    let report = verify_theorem1_with(&model, shape, 25, 0, &opts)?;
    print!("{}", report.render());
    std::process::exit(if report.passed() { 0 } else { 1 });
}
