//! Plants used by the experiments: the rotating triple-mass-spring
//! benchmark and a generator of random stable minimal systems.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::expm;
use crate::lti::StateSpaceModel;
use crate::rng::{tag, SeededRng};

/// Physical constants of the triple-mass-spring benchmark.
///
/// | constant       | default | unit      |
/// |----------------|---------|-----------|
/// | disc inertia   | 0.01    | kg m^2    |
/// | disc spring    | 0.1     | N m / rad |
/// | motor spring   | 0.2     | N m / rad |
/// | damping        | 0.01    | N m s/rad |
/// | actuator tau   | 0.1     | s         |
/// | sample time    | 0.1     | s         |
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkParams {
    pub inertia: f64,
    pub disc_spring: f64,
    pub motor_spring: f64,
    pub damping: f64,
    pub actuator_tau: f64,
    pub dt: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            inertia: 0.01,
            disc_spring: 0.1,
            motor_spring: 0.2,
            damping: 0.01,
            actuator_tau: 0.1,
            dt: 0.1,
        }
    }
}

/// Discrete-time benchmark with states
/// `[phi_1, phi_2, phi_3, omega_1, omega_2, omega_3, motor_1, motor_2]`,
/// inputs the two motor set-points and outputs the three disc angles.
///
/// Each motor angle follows its set-point through a first-order lag and
/// drives an outer disc through the motor spring.
pub fn build_benchmark_model(params: &BenchmarkParams) -> Result<StateSpaceModel> {
    let checks = [
        ("inertia", params.inertia),
        ("disc_spring", params.disc_spring),
        ("motor_spring", params.motor_spring),
        ("damping", params.damping),
        ("actuator_tau", params.actuator_tau),
        ("dt", params.dt),
    ];
    for (name, value) in checks {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
        }
    }
    let j = params.inertia;
    let c = params.disc_spring;
    let cm = params.motor_spring;
    let d = params.damping;
    let tau = params.actuator_tau;

    let mut ac = DMatrix::zeros(8, 8);
    let mut bc = DMatrix::zeros(8, 2);
    for i in 0..3 {
        ac[(i, i + 3)] = 1.0;
        ac[(i + 3, i + 3)] = -d / j;
    }
    let stiffness = [[-(c + cm), c, 0.0], [c, -2.0 * c, c], [0.0, c, -(c + cm)]];
    for (r, row) in stiffness.iter().enumerate() {
        for (col, k) in row.iter().enumerate() {
            ac[(r + 3, col)] = k / j;
        }
    }
    ac[(3, 6)] = cm / j;
    ac[(5, 7)] = cm / j;
    ac[(6, 6)] = -1.0 / tau;
    ac[(7, 7)] = -1.0 / tau;
    bc[(6, 0)] = 1.0 / tau;
    bc[(7, 1)] = 1.0 / tau;

    let (ad, bd) = zoh(&ac, &bc, params.dt)?;
    let mut cd = DMatrix::zeros(3, 8);
    for i in 0..3 {
        cd[(i, i)] = 1.0;
    }
    StateSpaceModel::new(ad, bd, cd, DMatrix::zeros(3, 2), params.dt)
}

/// Zero-order-hold discretization through the exponential of the
/// augmented matrix `[[A, B], [0, 0]] dt`.
pub fn zoh(ac: &DMatrix<f64>, bc: &DMatrix<f64>, dt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, m) = bc.shape();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(ac * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(bc * dt));
    let e = expm(&aug)?;
    Ok((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned()))
}

/// Random stable minimal system. `A` has its spectrum scaled to a radius
/// drawn from `[0.5, 0.95]`; draws failing the minimality check are
/// rejected and resampled.
pub fn random_stable_minimal(n: usize, m: usize, p: usize, seed: u64) -> Result<StateSpaceModel> {
    for attempt in 0..1000u64 {
        let mut rng = SeededRng::derive(seed, tag::SYSTEM, attempt);
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.standard_normal());
        let rho = crate::linalg::spectral_radius(&a);
        if rho < 1e-6 {
            continue;
        }
        let radius = rng.uniform_in(0.5, 0.95);
        a *= radius / rho;
        let b = DMatrix::from_fn(n, m, |_, _| rng.standard_normal());
        let c = DMatrix::from_fn(p, n, |_, _| rng.standard_normal());
        let d = DMatrix::from_fn(p, m, |_, _| 0.1 * rng.standard_normal());
        let model = StateSpaceModel::new(a, b, c, d, 1.0)?;
        if model.is_minimal() && model.spectral_radius() < 0.951 {
            return Ok(model);
        }
    }
    Err(Error::InvalidParameter(format!(
        "could not draw a minimal ({n}, {m}, {p}) system"
    )))
}
