//! Collects a noisy dataset, checks the data assumptions and writes it to CSV.
//!
//! Run with an optional output path:
//! `cargo run --example collect_data -- /tmp/dataset.csv`

use ddpc::data::{check_assumptions, collect_sequences, load_dataset, save_dataset, DataShape, ExcitationSpec};
use ddpc::lti::NoiseSpec;
use ddpc::plant::{build_benchmark_model, BenchmarkParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_benchmark_model(&BenchmarkParams::default())?;
    let shape = DataShape::for_model(&model, 150, 4, 40)?;
    let noise = NoiseSpec::new(1e-2, 7)?;
    let data = collect_sequences(&model, shape, &ExcitationSpec::default(), Some(&noise), 7)?;

    let report = check_assumptions(&data, Some(&model), None);
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!("all pass: {}", report.all_pass());

    let path = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("ddpc_dataset.csv").display().to_string());
    save_dataset(&data, path.as_ref())?;
    let back = load_dataset(path.as_ref())?;
    assert_eq!(back.m(), data.m());
    println!("wrote {path}");
    Ok(())
}
