//! Closed-loop experiments on the benchmark plant: receding-horizon
//! regulation, the cost and timing table over repeated random datasets,
//! and the open-loop comparison of predicted and true trajectories.

mod closed_loop;
mod config;
mod figure3;
mod table;

pub use closed_loop::{run_closed_loop, ClosedLoopRecord, ClosedLoopSpec, Excitation};
pub use config::{config_hash, Manifest, RunConfig};
pub use figure3::{figure3_from_window, run_figure3, Figure3Case, Figure3Output};
pub use table::{run_table1, BenchCell, BenchRow, BenchTable, Trends};

use std::sync::Mutex;

use crate::data::{DataMatrices, DataShape};
use crate::error::Result;
use crate::ocp::{
    BoxConstraints, DeepcProblem, Formulation, InitialWindow, OcpSolution, RegWeights, RegulationObjective,
    SingularityPolicy, SpcProblem,
};
use crate::predictor::identify;
use crate::qp::QpOptions;

/// Solves whose wall-clock time is reported take this lock so concurrent
/// experiments do not skew each other's timings.
static TIMING_LANE: Mutex<()> = Mutex::new(());

/// Everything needed to turn a dataset into a controller.
#[derive(Clone, Debug)]
pub struct ControllerSpec {
    pub formulation: Formulation,
    pub objective: RegulationObjective,
    pub bounds: BoxConstraints,
    /// Used by the regularized formulations only.
    pub weights: RegWeights,
    pub policy: SingularityPolicy,
}

impl ControllerSpec {
    pub fn new(formulation: Formulation, objective: RegulationObjective, bounds: BoxConstraints, weights: RegWeights) -> Self {
        Self {
            formulation,
            objective,
            bounds,
            weights,
            policy: SingularityPolicy::Reject,
        }
    }

    /// Builds the controller; SPC identifies its predictor here, outside
    /// any timed region.
    pub fn build(&self, data: &DataMatrices) -> Result<Controller> {
        let reg = |f| matches!(f, Formulation::DeepcRegularized | Formulation::SpcRegularized);
        let weights = reg(self.formulation).then_some(self.weights);
        Ok(match self.formulation {
            Formulation::Deepc | Formulation::DeepcRegularized => {
                Controller::Deepc(DeepcProblem::new(data, &self.objective, &self.bounds, weights, self.policy)?)
            }
            Formulation::Spc | Formulation::SpcRegularized => {
                let pred = identify(data)?;
                Controller::Spc(SpcProblem::new(&pred, &self.objective, &self.bounds, weights)?)
            }
        })
    }
}

/// A ready-to-solve regulation problem; only the initial window changes
/// between calls.
#[derive(Clone, Debug)]
pub enum Controller {
    Deepc(DeepcProblem),
    Spc(SpcProblem),
}

impl Controller {
    pub fn shape(&self) -> DataShape {
        match self {
            Self::Deepc(p) => p.shape(),
            Self::Spc(p) => p.shape(),
        }
    }

    pub fn formulation(&self) -> Formulation {
        match self {
            Self::Deepc(p) => p.formulation(),
            Self::Spc(p) => p.formulation(),
        }
    }

    pub fn solve(&self, win: &InitialWindow, options: &QpOptions) -> Result<OcpSolution> {
        match self {
            Self::Deepc(p) => p.solve(win, options),
            Self::Spc(p) => p.solve(win, options),
        }
    }

    /// [`Controller::solve`] on the shared timing lane.
    pub fn solve_timed(&self, win: &InitialWindow, options: &QpOptions) -> Result<OcpSolution> {
        let _lane = TIMING_LANE.lock().unwrap_or_else(|e| e.into_inner());
        self.solve(win, options)
    }
}
