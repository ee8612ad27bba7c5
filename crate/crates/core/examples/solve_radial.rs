//! Solves the homogeneous model problem on a sequence of grids and prints the
//! nodal error on the half ball.
//!
//! cargo run --release --example solve_radial

use degenlab::assembly::solve_problem;
use degenlab::geometry::GridSpec;
use degenlab::manufactured::{exact_error, ErrorNorm, ManufacturedCase};

fn main() -> degenlab::Result<()> {
    let a = -1.5;
    let case = ManufacturedCase::by_name("radial_homogeneous", 2, 2, a)?;
    println!("u = |y|^{:.2}, a = {a}", case.critical_exponent());
    println!("{:>6} {:>12} {:>8}", "nodes", "max error", "CG its");
    for nodes in [33, 65, 129] {
        let (problem, res) = solve_problem(case.problem_spec(GridSpec::new(2, 2, nodes))?)?;
        let err = exact_error(&res.u, &case, problem.grid(), &problem.disc.quad, ErrorNorm::LInfHalfBall);
        println!("{nodes:>6} {err:>12.4e} {:>8}", res.iterations);
    }
    Ok(())
}
