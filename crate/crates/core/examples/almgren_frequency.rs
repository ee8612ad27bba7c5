//! Frequency function N(r) = r E / H for the radial and an anisotropic
//! solution, plus the derivative identity dH/dr = 2E/r.
//!
//! cargo run --release --example almgren_frequency

use degenlab::assembly::solve_problem;
use degenlab::frequency::{check_derivative_identity, frequency_profile};
use degenlab::geometry::GridSpec;
use degenlab::manufactured::ManufacturedCase;

fn main() -> degenlab::Result<()> {
    let radii: Vec<f64> = (0..7).map(|i| 0.3 + 0.05 * i as f64).collect();
    for (name, half_width) in [("radial_homogeneous", 1.0), ("anisotropic", 1.5)] {
        let case = ManufacturedCase::by_name(name, 2, 2, -1.5)?;
        let (problem, res) = solve_problem(case.problem_spec(GridSpec::cube(2, 2, 257, half_width))?)?;
        let profile = frequency_profile(&problem.disc.quad, problem.grid(), &res.u, &case.matrix(), &radii)?;
        println!("{name}: expected N = {:.3}", case.critical_exponent());
        for (r, n) in profile.radii.iter().zip(&profile.frequency) {
            println!("  r {r:.2}  N {:.4}", n.unwrap_or(f64::NAN));
        }
        let id = check_derivative_identity(&profile, 0.05)?;
        println!("  max relative error of dH/dr vs 2E/r: {:.3e}", id.max_relative_error);
    }
    Ok(())
}
