//! Fits Hölder exponents of computed solutions from dyadic oscillation
//! profiles and compares them with min(1, 2-a-n).
//!
//! cargo run --release --example holder_rates

use degenlab::assembly::solve_problem;
use degenlab::geometry::GridSpec;
use degenlab::manufactured::ManufacturedCase;
use degenlab::quadrature::Region;
use degenlab::regularity::{gradient_holder_fit, holder_exponent_fit};

fn main() -> degenlab::Result<()> {
    let half = Region::Ball { radius: 0.5 };
    for a in [-0.5, -1.0, -1.5] {
        let case = ManufacturedCase::by_name("radial_homogeneous", 2, 2, a)?;
        let (problem, res) = solve_problem(case.problem_spec(GridSpec::new(2, 2, 257))?)?;
        let fit = holder_exponent_fit(problem.grid(), &res.u, half)?;
        print!(
            "a = {a:>5}: exponent {:.3} (expected {:.3})",
            fit.exponent,
            case.expected_holder_exponent()
        );
        if let Some(g) = case.expected_gradient_exponent() {
            let grad = gradient_holder_fit(problem.grid(), &res.u, half)?;
            print!(", gradient {:.3} (expected {g:.3})", grad.exponent);
        }
        println!();
    }
    Ok(())
}
