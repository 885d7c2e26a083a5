//! The dense QP kernel on its own: a small problem with one equality and
//! box bounds, then repeated solves with new right-hand sides.

use ddpc::qp::{solve_qp, PreparedQp, QpOptions, QpProblem};
use nalgebra::{dmatrix, dvector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = QpProblem::new(dmatrix![2.0, 0.5, 0.0; 0.5, 1.0, 0.0; 0.0, 0.0, 0.0], dvector![-1.0, -1.0, 0.0])
        .with_equalities(dmatrix![1.0, 1.0, 1.0], dvector![1.0])
        .with_bounds(dvector![0.0, 0.0, 0.0], dvector![0.4, 1.0, f64::INFINITY]);
    let sol = solve_qp(&problem, &QpOptions::default())?;
    println!("z = {:?}", sol.z.as_slice());
    println!("active lower {:?} upper {:?}", sol.active_lower(), sol.active_upper());
    println!("residuals {:?}", sol.residuals);

    let kernel = PreparedQp::new(&problem, &QpOptions::default())?;
    for b in [0.5, 1.0, 2.0] {
        let s = kernel.solve(&problem.f, &dvector![b])?;
        println!("b={b}: objective {:.6}", s.objective);
    }
    Ok(())
}
