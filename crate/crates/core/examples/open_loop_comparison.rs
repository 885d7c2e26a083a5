//! Open-loop predictions of six controllers from one noisy window:
//! regularized DeePC with and without a penalty on `g`, and regularized
//! SPC, for `T = 100` and `T = 150`.

use ddpc::bench::{run_figure3, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = run_figure3(&RunConfig::default())?;
    for c in &out.cases {
        println!(
            "({}) {:<18} T={} lambda_g={:?}: cost {:?}, prediction gap {:?}",
            c.id, c.controller, c.t, c.lambda_g, c.open_loop_cost, c.prediction_gap
        );
        if let Some(note) = &c.annotation {
            println!("    {note}");
        }
    }
    let dir = std::env::temp_dir();
    let files = out.save(&dir)?;
    println!("wrote {} files to {}", files.len(), dir.display());
    Ok(())
}
