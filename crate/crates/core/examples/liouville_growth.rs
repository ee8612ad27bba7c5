//! Growth of H(u, r) for homogeneous solutions against the lower bound
//! H(r0) (r/r0)^(2(2-a-n)), and the degenerate record of the zero field.
//!
//! cargo run --release --example liouville_growth

use degenlab::assembly::ProblemSpec;
use degenlab::frequency::growth_validator;
use degenlab::geometry::GridSpec;
use degenlab::manufactured::ManufacturedCase;

fn main() -> degenlab::Result<()> {
    let radii = [0.2, 0.3, 0.4, 0.5, 0.6];
    for a in [-0.5, -1.0, -1.5] {
        let case = ManufacturedCase::by_name("radial_homogeneous", 2, 2, a)?;
        let rec = growth_validator(&case.problem_spec(GridSpec::new(2, 2, 129))?, &radii, 0.05)?;
        println!(
            "a = {a:>5}: observed growth {:.3}, critical {:.3}, passed {}",
            rec.observed_growth, rec.critical_exponent, rec.passed
        );
    }
    let zero = growth_validator(&ProblemSpec::new(GridSpec::new(2, 2, 65), -1.5)?, &radii, 0.05)?;
    println!("zero data: degenerate {}", zero.degenerate);
    Ok(())
}
