//! Straightens a problem posed around the curve y_1 = 0.2 sin(x), solves it
//! on the flat grid and pulls the solution back.
//!
//! cargo run --release --example curved_manifold

use degenlab::assembly::{solve_problem, CoefficientField};
use degenlab::curved::{curved_bc_residual, pullback_field, push_problem, CurvedCase, Parametrization};
use degenlab::geometry::{build_grid, GridSpec};

fn main() -> degenlab::Result<()> {
    let param = Parametrization::by_name("sine", &[0.2, 1.0], 3, 2)?;
    let case = CurvedCase::new(param.clone(), -1.5)?;
    let pushed = push_problem(&case.curved_problem(GridSpec::new(3, 2, 33))?)?;
    println!("ellipticity of the straightened problem: [{:.4}, {:.4}]", pushed.lambda, pushed.big_lambda);
    let (problem, res) = solve_problem(pushed.spec)?;
    let curved = build_grid(GridSpec::cube(3, 2, 25, 0.75))?;
    let u = pullback_field(problem.grid(), &res.u, &param, &curved)?;
    let exact = curved.sample(|z| case.exact(z));
    let err: f64 = u.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum();
    let norm: f64 = exact.iter().map(|b| b * b).sum();
    println!("relative L2 error after pullback: {:.3e}", (err / norm).sqrt());
    let bands = [0.5, 0.25, 0.125, 0.0625];
    let prof = curved_bc_residual(&curved, &u, &CoefficientField::identity(3), &|_| [0.0; 3], &|_| 0.0, &param, &bands)?;
    print!("{}", prof.csv());
    Ok(())
}
