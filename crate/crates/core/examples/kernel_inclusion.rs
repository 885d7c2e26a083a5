//! Null space of the stacked data matrix and whether it is contained in
//! the null space of `Y_N`.

use ddpc::data::{collect_sequences, DataShape, ExcitationSpec};
use ddpc::equivalence::verify_kernel_inclusion;
use ddpc::plant::{build_benchmark_model, BenchmarkParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_benchmark_model(&BenchmarkParams::default())?;
    let shape = DataShape::for_model(&model, 150, 4, 40)?;
    let data = collect_sequences(&model, shape, &ExcitationSpec::default(), None, 0)?;
    let report = verify_kernel_inclusion(&data)?;
    print!("{}", report.render());
    println!("rank {:?}, nullspace dimension {:?}", report.rank, report.nullspace_dim);
    Ok(())
}
