//! Command-line front end. [`run`] returns the process exit code:
//! 0 on success, 1 when a check or solve fails, 2 on usage, config or
//! input-file errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{run_closed_loop, run_figure3, run_table1, ClosedLoopSpec, ControllerSpec, Excitation, Manifest, RunConfig};
use crate::data::{check_assumptions, collect_sequences, load_dataset, save_dataset, DataMatrices, ExcitationSpec};
use crate::equivalence::{
    verify_kernel_inclusion, verify_lemma2_with, verify_theorem1_with, verify_theorem2_with, EquivalenceReport, Lemma2Options,
    Theorem1Options, Theorem2Options,
};
use crate::error::Error;
use crate::lti::{NoiseSpec, StateSpaceModel};
use crate::ocp::Formulation;
use crate::predictor::identify;
use crate::qp::QpOptions;

#[derive(Debug, Parser)]
#[command(name = "ddpc", version, about = "Data-driven predictive control: DeePC and SPC on a benchmark plant")]
struct Cli {
    /// Run configuration (flat TOML); defaults apply without it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plant model operations.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Collect a dataset of independent experiments.
    Collect(CollectArgs),
    /// Check the data assumptions of a dataset.
    Check(DataArgs),
    /// Identify the multi-step predictor of a dataset.
    Identify(DataArgs),
    /// Solve one regulation problem on an excitation window.
    Solve {
        #[arg(value_enum)]
        controller: ControllerKind,
        #[arg(long)]
        regularized: bool,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Closed-loop regulation after an initial excitation.
    Closedloop {
        #[arg(long, value_enum, default_value = "spc")]
        controller: ControllerKind,
        #[arg(long)]
        regularized: bool,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Equivalence and exactness checks.
    Verify {
        #[arg(value_enum)]
        what: VerifyKind,
        /// Scenario count; defaults to the configured value.
        #[arg(long)]
        scenarios: Option<usize>,
        /// Noise on the data of lemma2 and kernel; the others use the
        /// configured value where noise applies.
        #[arg(long)]
        sigma_w: Option<f64>,
        /// theorem1: also compare closed loops.
        #[arg(long)]
        closed_loop: bool,
    },
    /// Closed-loop table and open-loop comparison.
    Bench {
        #[arg(value_enum)]
        what: BenchKind,
    },
}

#[derive(Debug, Subcommand)]
enum ModelAction {
    /// Write the discrete-time benchmark model as JSON.
    Emit,
}

#[derive(Debug, Args)]
struct CollectArgs {
    /// Column count; defaults to the configured `T`.
    #[arg(long)]
    t: Option<usize>,
    /// Noise level; defaults to the configured `sigma_w`.
    #[arg(long)]
    sigma_w: Option<f64>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset file; without it a dataset is collected from the config.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ControllerKind {
    Deepc,
    Spc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VerifyKind {
    Theorem1,
    Theorem2,
    Lemma2,
    Kernel,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BenchKind {
    Table1,
    Figure3,
}

/// Failure of a command, carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Parse { .. } | Error::MissingBlock(_) | Error::ShapeMismatch { .. } | Error::Io(_) => 2,
            _ => 1,
        };
        let message = match &e {
            Error::AssumptionsViolated(rep) => {
                format!("{e}\n{}", serde_json::to_string_pretty(rep).unwrap_or_default())
            }
            _ => e.to_string(),
        };
        Self { code, message }
    }
}

type CmdResult = std::result::Result<i32, Failure>;

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load_config(cli: &Cli) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> std::result::Result<&Path, Failure> {
    std::fs::create_dir_all(&cli.out).map_err(Error::from)?;
    Ok(&cli.out)
}

fn write(dir: &Path, name: &str, text: &str) -> std::result::Result<String, Failure> {
    std::fs::write(dir.join(name), text).map_err(Error::from)?;
    Ok(name.to_string())
}

fn dataset(cfg: &RunConfig, model: &StateSpaceModel, args: &DataArgs) -> std::result::Result<DataMatrices, Failure> {
    match &args.data {
        Some(p) => Ok(load_dataset(p)?),
        None => Ok(collect(cfg, model, cfg.t, cfg.sigma_w)?),
    }
}

fn collect(cfg: &RunConfig, model: &StateSpaceModel, t: usize, sigma_w: f64) -> crate::Result<DataMatrices> {
    let shape = cfg.shape(model, t)?;
    let noise = (sigma_w > 0.0).then(|| NoiseSpec::new(sigma_w, cfg.seed)).transpose()?;
    collect_sequences(model, shape, &ExcitationSpec::default(), noise.as_ref(), cfg.seed)
}

fn formulation(kind: ControllerKind, regularized: bool) -> Formulation {
    match (kind, regularized) {
        (ControllerKind::Deepc, false) => Formulation::Deepc,
        (ControllerKind::Deepc, true) => Formulation::DeepcRegularized,
        (ControllerKind::Spc, false) => Formulation::Spc,
        (ControllerKind::Spc, true) => Formulation::SpcRegularized,
    }
}

fn execute(cli: &Cli) -> CmdResult {
    let cfg = load_config(cli)?;
    let model = cfg.model()?;
    match &cli.command {
        Command::Model { action: ModelAction::Emit } => {
            let json = model.to_json()?;
            write(out_dir(cli)?, "model.json", &json)?;
            println!("{json}");
            Ok(0)
        }
        Command::Collect(args) => {
            let t = args.t.unwrap_or(cfg.t);
            let sigma = args.sigma_w.unwrap_or(cfg.sigma_w);
            let data = collect(&cfg, &model, t, sigma)?;
            let dir = out_dir(cli)?;
            save_dataset(&data, &dir.join("dataset.csv"))?;
            println!("wrote {} (T={t}, sigma_w={sigma:e}, seed={})", dir.join("dataset.csv").display(), cfg.seed);
            Ok(0)
        }
        Command::Check(args) => {
            let data = dataset(&cfg, &model, args)?;
            let rep = check_assumptions(&data, Some(&model), None);
            let json = serde_json::to_string_pretty(&rep).map_err(Error::from)?;
            write(out_dir(cli)?, "assumptions.json", &json)?;
            println!("{json}");
            if rep.all_pass() {
                Ok(0)
            } else {
                eprintln!("failed checks: {}", rep.failures().join(", "));
                Ok(1)
            }
        }
        Command::Identify(args) => {
            let data = dataset(&cfg, &model, args)?;
            let pred = identify(&data)?;
            let dir = out_dir(cli)?;
            pred.save_csv(&dir.join("predictor.csv"))?;
            println!(
                "predictor {}x{}, rank {}, fit residual {:.3e}",
                pred.matrix().nrows(),
                pred.matrix().ncols(),
                pred.effective_rank(),
                pred.fit_residual()
            );
            Ok(0)
        }
        Command::Solve { controller, regularized, data } => {
            let data = dataset(&cfg, &model, data)?;
            let rep = check_assumptions(&data, Some(&model), None);
            if !rep.all_pass() {
                return Err(Error::AssumptionsViolated(Box::new(rep)).into());
            }
            let f = formulation(*controller, *regularized);
            let spec = ControllerSpec::new(f, cfg.objective(&model)?, cfg.bounds(&model), cfg.weights()?);
            let ctrl = spec.build(&data)?;
            let exc = Excitation::run(&model, &ClosedLoopSpec::new(cfg.n_excite, 0, data.sigma_w(), cfg.seed));
            let sol = ctrl.solve(&exc.window(cfg.t_ini)?, &QpOptions::default())?;
            let name = format!("solution_{}.json", f.label());
            write(out_dir(cli)?, &name, &sol.to_json()?)?;
            println!(
                "{}: objective {:.6e}, first input {:?}, kkt {:.1e}/{:.1e}, {:.3} ms",
                f.label(),
                sol.objective,
                sol.first_input(model.m()).as_slice(),
                sol.kkt.stationarity,
                sol.kkt.primal,
                sol.solve_time_seconds * 1e3
            );
            Ok(0)
        }
        Command::Closedloop { controller, regularized, data } => {
            let data = dataset(&cfg, &model, data)?;
            let f = formulation(*controller, *regularized);
            let spec = ControllerSpec::new(f, cfg.objective(&model)?, cfg.bounds(&model), cfg.weights()?);
            let ctrl = spec.build(&data)?;
            let lspec = ClosedLoopSpec::new(cfg.n_excite, cfg.n_control, data.sigma_w(), cfg.seed);
            let rec = run_closed_loop(&model, &ctrl, &lspec)?;
            let dir = out_dir(cli)?;
            let name = write(dir, &format!("closedloop_{}.csv", rec.label), &rec.to_csv())?;
            Manifest::new("closedloop", &cfg, vec![cfg.seed], vec![name]).save(&dir.join("manifest.json"))?;
            println!(
                "{}: cost {:.6}, mean step {:.3} ms over {} steps",
                rec.label,
                rec.cost,
                rec.mean_step_time_seconds() * 1e3,
                cfg.n_control
            );
            Ok(0)
        }
        Command::Verify { what, scenarios, sigma_w, closed_loop } => {
            let n = scenarios.unwrap_or(cfg.scenarios);
            let report = verify(&cfg, &model, *what, n, *sigma_w, *closed_loop)?;
            let dir = out_dir(cli)?;
            let name = write(dir, &format!("verify_{}.json", report.kind.label()), &report.to_json()?)?;
            Manifest::new(format!("verify {}", report.kind.label()), &cfg, vec![cfg.seed], vec![name])
                .save(&dir.join("manifest.json"))?;
            print!("{}", report.render());
            Ok(if report.passed() || report.informational { 0 } else { 1 })
        }
        Command::Bench { what: BenchKind::Table1 } => {
            let table = run_table1(&cfg)?;
            let dir = out_dir(cli)?;
            let mut outputs = vec![write(dir, "table1.csv", &table.to_csv())?];
            outputs.push(write(dir, "table1.json", &serde_json::to_string_pretty(&table).map_err(Error::from)?)?);
            Manifest::new("bench table1", &cfg, cfg.seeds.clone(), outputs).save(&dir.join("manifest.json"))?;
            print!("{}", table.render());
            for c in table.cells.iter().filter(|c| c.error.is_some()) {
                eprintln!("failed cell {} T={} seed={}: {}", c.controller, c.t, c.seed, c.error.as_deref().unwrap_or(""));
            }
            Ok(0)
        }
        Command::Bench { what: BenchKind::Figure3 } => {
            let fig = run_figure3(&cfg)?;
            let dir = out_dir(cli)?;
            let mut outputs = fig.save(dir)?;
            outputs.push(write(dir, "figure3.json", &serde_json::to_string_pretty(&fig).map_err(Error::from)?)?);
            Manifest::new("bench figure3", &cfg, vec![cfg.seed], outputs).save(&dir.join("manifest.json"))?;
            for c in &fig.cases {
                let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6e}"));
                println!(
                    "{}) {:<18} T={:<4} lambda_g={:<5} objective {} cost {} gap {}{}",
                    c.id,
                    c.controller,
                    c.t,
                    c.lambda_g.map_or("-".into(), |l| l.to_string()),
                    f(c.objective),
                    f(c.open_loop_cost),
                    f(c.prediction_gap),
                    c.annotation.as_ref().map_or(String::new(), |a| format!("  [{a}]"))
                );
            }
            Ok(0)
        }
    }
}

fn verify(
    cfg: &RunConfig,
    model: &StateSpaceModel,
    what: VerifyKind,
    n: usize,
    sigma_w: Option<f64>,
    closed_loop: bool,
) -> crate::Result<EquivalenceReport> {
    match what {
        VerifyKind::Theorem1 => {
            let opts = Theorem1Options {
                u_bound: cfg.u_bound,
                closed_loop,
                n_excite: cfg.n_excite,
                n_control: cfg.n_control,
                q_scale: cfg.q_scale,
                r_scale: cfg.r_scale,
            };
            verify_theorem1_with(model, cfg.shape(model, cfg.t)?, n, cfg.seed, &opts)
        }
        VerifyKind::Theorem2 => {
            let opts = Theorem2Options {
                n_scenarios: n,
                sigma_w: sigma_w.unwrap_or(cfg.sigma_w),
                lambda_g: 0.0,
                lambda_sigma: cfg.lambda_sigma,
                q_scale: cfg.q_scale,
                r_scale: cfg.r_scale,
            };
            verify_theorem2_with(model, cfg.t_ini, cfg.horizon, cfg.seed, &opts)
        }
        VerifyKind::Lemma2 => {
            let opts = Lemma2Options {
                sigma_w: sigma_w.unwrap_or(0.0),
            };
            verify_lemma2_with(model, cfg.shape(model, cfg.t)?, n, cfg.seed, &opts)
        }
        VerifyKind::Kernel => {
            let data = collect(cfg, model, cfg.t, sigma_w.unwrap_or(0.0))?;
            verify_kernel_inclusion(&data)
        }
    }
}
