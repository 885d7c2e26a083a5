//! Prediction error of the identified predictor on 100 fresh windows,
//! on clean and on noisy training data.

use ddpc::data::DataShape;
use ddpc::equivalence::{verify_lemma2, verify_lemma2_with, Lemma2Options};
use ddpc::plant::{build_benchmark_model, BenchmarkParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_benchmark_model(&BenchmarkParams::default())?;
    let shape = DataShape::for_model(&model, 150, 4, 40)?;
    print!("{}", verify_lemma2(&model, shape, 100, 0)?.render());

    let noisy = verify_lemma2_with(&model, shape, 100, 0, &Lemma2Options { sigma_w: 1e-2 })?;
    println!("sigma_w = 1e-2: max prediction gap {:?}", noisy.max_deviations().prediction);
    Ok(())
}
