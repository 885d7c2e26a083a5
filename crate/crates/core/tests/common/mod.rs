//! Shared reference solvers for the integration tests.

use ddpc::qp::QpProblem;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Strictly convex box-constrained QP with `H = A'A + I/2`.
pub fn random_box_qp(rng: &mut ChaCha8Rng, n: usize) -> QpProblem {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = a.transpose() * &a + DMatrix::identity(n, n) * 0.5;
    let f = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let lo = DVector::from_fn(n, |_, _| rng.random_range(-1.0..0.0));
    let hi = DVector::from_fn(n, |i, _| lo[i] + rng.random_range(0.1..1.5));
    QpProblem::new(h, f).with_bounds(lo, hi)
}

/// FISTA with restart on `1/2 z'Hz + f'z` over the box.
pub fn projected_gradient(p: &QpProblem) -> DVector<f64> {
    let step = 1.0 / p.h.symmetric_eigenvalues().max();
    let clip = |z: DVector<f64>| DVector::from_fn(z.len(), |i, _| z[i].clamp(p.lo[i], p.hi[i]));
    let mut z = clip(DVector::zeros(p.n()));
    let mut w = z.clone();
    let mut t = 1.0_f64;
    for _ in 0..200_000 {
        let next = clip(&w - (&p.h * &w + &p.f) * step);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved = (&next - &z).amax();
        if p.objective(&next) > p.objective(&z) {
            w = z.clone();
            t = 1.0;
            continue;
        }
        w = &next + (&next - &z) * ((t - 1.0) / t_next);
        z = next;
        t = t_next;
        if moved < 1e-14 {
            break;
        }
    }
    z
}
