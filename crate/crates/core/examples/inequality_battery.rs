//! Hardy, Poincaré, trace and Sobolev ratios over random admissible fields
//! on two grids.
//!
//! cargo run --release --example inequality_battery

use degenlab::assembly::{Discretization, ProblemSpec};
use degenlab::geometry::GridSpec;
use degenlab::inequality::{compare_refinement, inequality_battery, random_test_fields};
use degenlab::quadrature::Region;

fn main() -> degenlab::Result<()> {
    let region = Region::Ball { radius: 0.75 };
    let mut runs = Vec::new();
    for nodes in [65, 129] {
        let spec = ProblemSpec::new(GridSpec::new(2, 2, nodes), -1.5)?;
        let disc = Discretization::new(&spec)?;
        let fields = random_test_fields(&disc.grid, 0.0, 20, 7);
        runs.push(inequality_battery(&disc.quad, &disc.grid, &disc.mask, &fields, region)?);
    }
    let mut fine = runs.pop().expect("fine run");
    let coarse = runs.pop().expect("coarse run");
    compare_refinement(&coarse, &mut fine);
    for (c, f) in coarse.iter().zip(&fine) {
        println!(
            "{:<15} max ratio {:.4} -> {:.4} (change {:.2}%)",
            c.id.as_str(),
            c.max_ratio,
            f.max_ratio,
            100.0 * f.refinement_delta.unwrap_or(0.0)
        );
    }
    Ok(())
}
