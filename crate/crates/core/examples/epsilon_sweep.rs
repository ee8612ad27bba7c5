//! Perforated approximations: solves with holes of radius eps around the
//! Dirichlet set and tracks the weighted H1 distance to the limit.
//!
//! cargo run --release --example epsilon_sweep

use degenlab::geometry::GridSpec;
use degenlab::manufactured::ManufacturedCase;
use degenlab::regularity::epsilon_sweep;

fn main() -> degenlab::Result<()> {
    let case = ManufacturedCase::by_name("radial_homogeneous", 2, 2, -1.5)?;
    let spec = case.problem_spec(GridSpec::new(2, 2, 257))?;
    let report = epsilon_sweep(&spec, &[0.25, 0.125, 0.0625, 0.03125])?;
    println!("{:>9} {:>12} {:>12}", "eps", "|u_e - u_0|", "|u_e|");
    for r in &report.records {
        println!("{:>9.5} {:>12.4e} {:>12.4e}", r.eps, r.h1_diff, r.h1_norm);
    }
    println!("data norm {:.4}, max |u_e| / data {:.3}", report.data_norm, report.bound_constant);
    Ok(())
}
