//! Gradient traces on the hole boundary for a tangential flux and for the
//! flux F = (-1,-1), whose solution y_1 + y_2 keeps a unit gradient.
//!
//! cargo run --release --example conormal_counterexample

use degenlab::geometry::GridSpec;
use degenlab::manufactured::ManufacturedCase;
use degenlab::regularity::conormal_decay;

fn main() -> degenlab::Result<()> {
    let schedule = [0.25, 0.125, 0.0625, 0.03125];
    for name in ["radial_homogeneous", "counterexample_F"] {
        let case = ManufacturedCase::by_name(name, 2, 2, -1.5)?;
        let trace = conormal_decay(&case.problem_spec(GridSpec::new(2, 2, 257))?, &schedule)?;
        println!("{name} (tangential flux: {})", trace.compliant);
        for (e, g) in trace.eps.iter().zip(&trace.max_grad) {
            println!("  eps {e:<8} max |grad u| {g:.4}");
        }
        println!("  fitted rate {:.3}", trace.rate);
    }
    Ok(())
}
