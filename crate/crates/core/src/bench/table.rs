use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{run_closed_loop, ClosedLoopSpec, ControllerSpec, RunConfig};
use crate::data::{collect_sequences, ExcitationSpec};
use crate::error::Result;
use crate::lti::{NoiseSpec, StateSpaceModel};
use crate::ocp::Formulation;

/// One closed-loop run of the table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchCell {
    pub controller: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub cost: Option<f64>,
    /// Mean online solve time per control step.
    pub time_ms: Option<f64>,
    pub error: Option<String>,
}

/// Averages over the repetitions of one (controller, T) pair. Means are
/// `None` when any repetition failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub controller: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub repetitions: usize,
    pub failures: usize,
    pub mean_cost: Option<f64>,
    pub mean_time_ms: Option<f64>,
    pub costs: Vec<Option<f64>>,
    pub times_ms: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchTable {
    pub controllers: Vec<String>,
    pub t_values: Vec<usize>,
    pub seeds: Vec<u64>,
    pub cells: Vec<BenchCell>,
}

/// Structural comparisons between the rows of a table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trends {
    /// Mean SPC cost at most the mean DeePC cost at every T.
    pub spc_cost_not_above_deepc: bool,
    /// Every controller's mean cost non-increasing in T.
    pub cost_non_increasing_in_t: bool,
    /// Mean SPC step time strictly below DeePC at the requested T values.
    pub spc_faster: bool,
    pub details: Vec<String>,
}

fn mean(values: &[Option<f64>]) -> Option<f64> {
    let vals: Option<Vec<f64>> = values.iter().copied().collect();
    let vals = vals?;
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

impl BenchTable {
    pub fn row(&self, controller: &str, t: usize) -> Option<BenchRow> {
        let cells: Vec<&BenchCell> = self.cells.iter().filter(|c| c.controller == controller && c.t == t).collect();
        if cells.is_empty() {
            return None;
        }
        let costs: Vec<Option<f64>> = cells.iter().map(|c| c.cost).collect();
        let times: Vec<Option<f64>> = cells.iter().map(|c| c.time_ms).collect();
        Some(BenchRow {
            controller: controller.to_string(),
            t,
            repetitions: cells.len(),
            failures: cells.iter().filter(|c| c.error.is_some()).count(),
            mean_cost: mean(&costs),
            mean_time_ms: mean(&times),
            costs,
            times_ms: times,
        })
    }

    pub fn rows(&self) -> Vec<BenchRow> {
        self.controllers
            .iter()
            .flat_map(|c| self.t_values.iter().filter_map(move |&t| self.row(c, t)))
            .collect()
    }

    /// `controller,T,seed,cost,time_ms`; failed cells carry `nan`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("controller,T,seed,cost,time_ms\n");
        let f = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:.12e}"));
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{},{},{}", c.controller, c.t, c.seed, f(c.cost), f(c.time_ms));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Fixed-width summary with one line per row.
    pub fn render(&self) -> String {
        let mut out = format!("{:<20} {:>5} {:>5} {:>12} {:>12} {:>8}\n", "controller", "T", "reps", "mean cost", "time [ms]", "failed");
        let f = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |v| format!("{v:.prec$}"));
        for r in self.rows() {
            let _ = writeln!(
                out,
                "{:<20} {:>5} {:>5} {:>12} {:>12} {:>8}",
                r.controller,
                r.t,
                r.repetitions,
                f(r.mean_cost, 5),
                f(r.mean_time_ms, 3),
                r.failures
            );
        }
        out
    }

    /// Compares `spc` against `deepc` rows; timing only at `timing_t`.
    pub fn trends(&self, deepc: &str, spc: &str, timing_t: &[usize]) -> Trends {
        let mut details = Vec::new();
        let mut t_sorted = self.t_values.clone();
        t_sorted.sort_unstable();
        let get = |c: &str, t: usize| self.row(c, t);

        let mut cost_ok = true;
        for &t in &t_sorted {
            let (d, s) = (get(deepc, t).and_then(|r| r.mean_cost), get(spc, t).and_then(|r| r.mean_cost));
            let ok = matches!((d, s), (Some(d), Some(s)) if s <= d);
            details.push(format!("T={t}: mean cost {spc} {s:?} vs {deepc} {d:?}"));
            cost_ok &= ok;
        }

        let mut mono_ok = true;
        for c in [deepc, spc] {
            let means: Vec<Option<f64>> = t_sorted.iter().map(|&t| get(c, t).and_then(|r| r.mean_cost)).collect();
            let ok = means.iter().all(Option::is_some)
                && means.windows(2).all(|w| w[1].unwrap() <= w[0].unwrap());
            details.push(format!("{c}: mean cost over T {means:?}"));
            mono_ok &= ok;
        }

        let mut time_ok = !timing_t.is_empty();
        for &t in timing_t {
            let (d, s) = (get(deepc, t).and_then(|r| r.mean_time_ms), get(spc, t).and_then(|r| r.mean_time_ms));
            let ok = matches!((d, s), (Some(d), Some(s)) if s < d);
            details.push(format!("T={t}: mean step time [ms] {spc} {s:?} vs {deepc} {d:?}"));
            time_ok &= ok;
        }
        Trends {
            spc_cost_not_above_deepc: cost_ok,
            cost_non_increasing_in_t: mono_ok,
            spc_faster: time_ok,
            details,
        }
    }
}

/// Regularized DeePC and regularized SPC in closed loop for every
/// (T, seed), each seed with its own noisy dataset and loop noise.
///
/// Cells run in parallel; their solves share the timing lane. A failing
/// cell is recorded with its error and the table continues.
pub fn run_table1(config: &RunConfig) -> Result<BenchTable> {
    config.validate()?;
    let model = config.model()?;
    let formulations = [Formulation::DeepcRegularized, Formulation::SpcRegularized];
    let mut jobs = Vec::new();
    for f in formulations {
        for &t in &config.t_values {
            for &seed in &config.seeds {
                jobs.push((f, t, seed));
            }
        }
    }
    let cells = jobs
        .into_par_iter()
        .map(|(f, t, seed)| {
            let outcome = run_cell(&model, config, f, t, seed);
            let (cost, time_ms, error) = match outcome {
                Ok((cost, time)) => (Some(cost), Some(time), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            BenchCell {
                controller: f.label().to_string(),
                t,
                seed,
                cost,
                time_ms,
                error,
            }
        })
        .collect();
    Ok(BenchTable {
        controllers: formulations.iter().map(|f| f.label().to_string()).collect(),
        t_values: config.t_values.clone(),
        seeds: config.seeds.clone(),
        cells,
    })
}

fn run_cell(model: &StateSpaceModel, config: &RunConfig, f: Formulation, t: usize, seed: u64) -> Result<(f64, f64)> {
    let shape = config.shape(model, t)?;
    let noise = NoiseSpec::new(config.sigma_w, seed)?;
    let data = collect_sequences(model, shape, &ExcitationSpec::default(), Some(&noise), seed)?;
    let spec = ControllerSpec::new(f, config.objective(model)?, config.bounds(model), config.weights()?);
    let controller = spec.build(&data)?;
    let mut loop_spec = ClosedLoopSpec::new(config.n_excite, config.n_control, config.sigma_w, seed);
    loop_spec.serialize_timing = true;
    let record = run_closed_loop(model, &controller, &loop_spec)?;
    Ok((record.cost, record.mean_step_time_seconds() * 1e3))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(c: &str, t: usize, seed: u64, cost: Option<f64>, time: Option<f64>) -> BenchCell {
        BenchCell {
            controller: c.into(),
            t,
            seed,
            cost,
            time_ms: time,
            error: cost.is_none().then(|| "boom".to_string()),
        }
    }

    fn table(cells: Vec<BenchCell>) -> BenchTable {
        BenchTable {
            controllers: vec!["d".into(), "s".into()],
            t_values: vec![100, 150],
            seeds: vec![0, 1],
            cells,
        }
    }

    #[test]
    fn means_and_trends_from_raw_cells() {
        let t = table(vec![
            cell("d", 100, 0, Some(6.0), Some(3.0)),
            cell("d", 100, 1, Some(8.0), Some(5.0)),
            cell("d", 150, 0, Some(5.0), Some(6.0)),
            cell("d", 150, 1, Some(5.0), Some(6.0)),
            cell("s", 100, 0, Some(6.0), Some(1.0)),
            cell("s", 100, 1, Some(6.0), Some(1.0)),
            cell("s", 150, 0, Some(4.0), Some(1.0)),
            cell("s", 150, 1, Some(5.0), Some(1.0)),
        ]);
        let r = t.row("d", 100).unwrap();
        assert_eq!((r.mean_cost, r.mean_time_ms, r.repetitions), (Some(7.0), Some(4.0), 2));
        let tr = t.trends("d", "s", &[150]);
        assert!(tr.spc_cost_not_above_deepc && tr.cost_non_increasing_in_t && tr.spc_faster);
        assert_eq!(t.rows().len(), 4);
        let csv = t.to_csv();
        assert!(csv.starts_with("controller,T,seed,cost,time_ms\n"));
        assert_eq!(csv.lines().count(), 9);
    }

    #[test]
    fn failed_cells_poison_means_not_the_table() {
        let t = table(vec![
            cell("d", 100, 0, Some(6.0), Some(3.0)),
            cell("d", 100, 1, None, None),
            cell("s", 100, 0, Some(5.0), Some(1.0)),
            cell("s", 100, 1, Some(5.0), Some(1.0)),
        ]);
        let r = t.row("d", 100).unwrap();
        assert_eq!((r.failures, r.mean_cost), (1, None));
        assert!(!t.trends("d", "s", &[100]).spc_cost_not_above_deepc);
        assert!(t.to_csv().contains("d,100,1,nan,nan"));
        assert!(t.render().contains(" - "));
    }
}
