//! Closed-loop cost and step time of regularized DeePC and SPC for
//! `T` in {100, 150, 200} over 10 seeds.
//!
//! Takes a while in debug builds. Pass a TOML config to change the run:
//! `cargo run --release --example benchmark_table -- run.toml`

use ddpc::bench::{run_table1, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => RunConfig::load(path.as_ref())?,
        None => RunConfig::default(),
    };
    let table = run_table1(&cfg)?;
    print!("{}", table.render());
    let trends = table.trends("deepc_regularized", "spc_regularized", &[150, 200]);
    for line in &trends.details {
        println!("  {line}");
    }
    println!(
        "spc cost <= deepc: {}  non-increasing in T: {}  spc faster: {}",
        trends.spc_cost_not_above_deepc, trends.cost_non_increasing_in_t, trends.spc_faster
    );
    Ok(())
}
