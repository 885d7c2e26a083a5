//! Receding-horizon regulation of the benchmark plant by each controller.
//!
//! The plant is excited for 20 steps from rest, then controlled for 60.
//! Trajectories go to `closedloop_<controller>.csv` in the temp directory.

use ddpc::bench::{run_closed_loop, ClosedLoopSpec, ControllerSpec, RunConfig};
use ddpc::data::{collect_sequences, ExcitationSpec};
use ddpc::lti::NoiseSpec;
use ddpc::ocp::Formulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::default();
    let model = cfg.model()?;
    let shape = cfg.shape(&model, cfg.t)?;
    let noise = NoiseSpec::new(cfg.sigma_w, cfg.seed)?;
    let data = collect_sequences(&model, shape, &ExcitationSpec::default(), Some(&noise), cfg.seed)?;
    let spec = ClosedLoopSpec::new(cfg.n_excite, cfg.n_control, cfg.sigma_w, cfg.seed);

    for f in [Formulation::Deepc, Formulation::DeepcRegularized, Formulation::Spc, Formulation::SpcRegularized] {
        let controller = ControllerSpec::new(f, cfg.objective(&model)?, cfg.bounds(&model), cfg.weights()?).build(&data)?;
        let rec = run_closed_loop(&model, &controller, &spec)?;
        let path = std::env::temp_dir().join(format!("closedloop_{}.csv", f.label()));
        rec.save_csv(&path)?;
        println!("{:<18} cost {:.5}  {:.3} ms/step", f.label(), rec.cost, rec.mean_step_time_seconds() * 1e3);
    }
    Ok(())
}
