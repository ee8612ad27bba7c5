//! Subcommand implementations. Each returns its metrics, checks and CSV
//! tables; file output is left to the caller.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Subcommand};
use super::report::{num, CheckRecord, CsvTable};
use crate::assembly::{solve_problem, CoefficientField, Discretization, Problem, ProblemSpec};
use crate::curved::{
    admissibility_check, curved_bc_residual, pullback_field, push_problem, AdmissibleWeight, CurvedCase,
    Parametrization,
};
use crate::error::{LabError, Result};
use crate::frequency::{check_derivative_identity, frequency_profile, growth_validator};
use crate::geometry::{build_grid, GridSpec};
use crate::inequality::{compare_refinement, inequality_battery, random_test_fields};
use crate::manufactured::{forcing_residual, CaseKind, ManufacturedCase, Regime, CASE_NAMES};
use crate::quadrature::{integrate_field, QuadratureRule, Region};
use crate::regularity::{
    conormal_decay, epsilon_sweep, gradient_holder_fit, holder_exponent_fit, limiting_bc_residual, RateReport,
};
use crate::solver::SolverOptions;

#[derive(Debug, Default)]
pub struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, CheckRecord>,
    pub tables: Vec<CsvTable>,
}

impl Outcome {
    fn metric(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.into(), v);
    }

    fn check(&mut self, name: &str, passed: bool, value: f64, threshold: f64, detail: String) {
        self.checks.insert(
            name.into(),
            CheckRecord {
                passed,
                value,
                threshold,
                detail,
            },
        );
    }
}

/// Catalog of manufactured cases and curved graphs.
pub fn case_catalog() -> String {
    let mut s = format!("{:<20} {:<28} {}\n", "case", "valid for", "role");
    for name in CASE_NAMES {
        let (range, role) = CaseKind::from_name(name).expect("registry").description();
        s += &format!("{name:<20} {range:<28} {role}\n");
    }
    s += "\ncurved graphs (d=3, n=2): zero, sine [amplitude, frequency], polynomial [c1, c2, ...]\n";
    s
}

fn apply_common(spec: &mut ProblemSpec, cfg: &ExperimentConfig) {
    spec.eps = cfg.eps;
    spec.solver = SolverOptions {
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
    };
    spec.quadrature = QuadratureRule {
        gauss_order: cfg.quadrature.gauss_order,
        grading_depth: cfg.quadrature.grading_depth,
    };
}

fn case_spec(cfg: &ExperimentConfig) -> Result<(ManufacturedCase, ProblemSpec)> {
    let case = ManufacturedCase::by_name(&cfg.case, cfg.d, cfg.n, cfg.a)?;
    let mut spec = case.problem_spec(cfg.grid_spec())?;
    apply_common(&mut spec, cfg);
    Ok((case, spec))
}

fn coords(z: &[f64]) -> Vec<String> {
    z.iter().map(|v| num(*v)).collect()
}

fn coordinate_columns(d: usize, n: usize) -> Vec<String> {
    let dx = d - n;
    (0..dx)
        .map(|k| format!("x{}", k + 1))
        .chain((0..n).map(|k| format!("y{}", k + 1)))
        .collect()
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.subcommand {
        Subcommand::Solve => solve(cfg),
        Subcommand::Rates => rates(cfg),
        Subcommand::SweepEps => sweep(cfg),
        Subcommand::Conormal => conormal(cfg),
        Subcommand::Frequency => frequency(cfg),
        Subcommand::Liouville => liouville(cfg),
        Subcommand::Inequalities => inequalities(cfg),
        Subcommand::Curved => curved(cfg),
        Subcommand::ListCases => Ok(Outcome::default()),
    }
}

fn solve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (case, mut spec) = case_spec(cfg)?;
    if let Some(v) = cfg.fault.source_override {
        spec.source = Arc::new(move |_| v);
    }
    let source = spec.source.clone();
    let consistency = forcing_residual(&case, &|z| source(z), 200, cfg.seed);
    let threshold = cfg.tolerances.forcing * consistency.scale;
    out.check(
        "forcing-consistency",
        consistency.max_residual <= threshold,
        consistency.max_residual,
        threshold,
        "strong-form residual of the manufactured forcing".into(),
    );
    let mut problem = Problem::build(spec)?;
    if cfg.fault.negate_matrix {
        problem.system.matrix.values.iter_mut().for_each(|v| *v = -*v);
    }
    let res = problem.solve()?;
    out.check(
        "solver-convergence",
        res.relative_residual <= cfg.solver.tol,
        res.relative_residual,
        cfg.solver.tol,
        format!("{} iterations", res.iterations),
    );
    let grid = problem.grid();
    let d = grid.d();
    let exact = grid.sample(|z| case.eval_u(z));
    let err: Vec<f64> = res.u.iter().zip(&exact).map(|(a, b)| a - b).collect();
    let linf_half = crate::quadrature::linf_norm(grid, &err, Region::Ball { radius: 0.5 }).value;
    out.metric("iterations", res.iterations as f64);
    out.metric("relative_residual", res.relative_residual);
    out.metric("energy", res.energy);
    out.metric("linf_error_half_ball", linf_half);
    let cols = coordinate_columns(d, grid.n());
    let mut columns: Vec<&str> = vec!["node"];
    columns.extend(cols.iter().map(|s| s.as_str()));
    columns.extend(["u_h", "u_exact"]);
    let mut table = CsvTable::new("solution.csv", &columns);
    for i in 0..grid.node_count() {
        let mut cells = vec![i.to_string()];
        cells.extend(coords(&grid.node_coords(i)[..d]));
        cells.push(num(res.u[i]));
        cells.push(num(exact[i]));
        table.row("solution", &cells);
    }
    out.tables.push(table);
    Ok(out)
}

fn profile_rows(table: &mut CsvTable, tag: &str, r: &RateReport) {
    for (s, o) in r.profile.scales.iter().zip(&r.profile.oscillations) {
        table.row(tag, &[num(*s), num(*o)]);
    }
}

fn rates(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (case, spec) = case_spec(cfg)?;
    let (problem, res) = solve_problem(spec)?;
    let grid = problem.grid();
    let half = Region::Ball { radius: 0.5 };
    let mut table = CsvTable::new("rates.csv", &["scale", "oscillation"]);
    let holder = holder_exponent_fit(grid, &res.u, half)?;
    let expected = case.expected_holder_exponent();
    let dev = (holder.exponent - expected).abs();
    out.metric("holder_exponent", holder.exponent);
    out.metric("holder_expected", expected);
    out.check(
        "holder-sharpness",
        dev <= cfg.tolerances.exponent,
        dev,
        cfg.tolerances.exponent,
        format!("fitted {:.4} vs expected {expected:.4}", holder.exponent),
    );
    profile_rows(&mut table, "holder-sharpness", &holder);
    if case.regime() == Regime::C1Alpha {
        if let Some(expected) = case.expected_gradient_exponent() {
            let g = gradient_holder_fit(grid, &res.u, half)?;
            let dev = (g.exponent - expected).abs();
            out.metric("gradient_exponent", g.exponent);
            out.metric("gradient_expected", expected);
            out.check(
                "gradient-sharpness",
                dev <= cfg.tolerances.exponent && !g.non_c1,
                dev,
                cfg.tolerances.exponent,
                format!("fitted {:.4} vs expected {expected:.4}", g.exponent),
            );
            profile_rows(&mut table, "gradient-sharpness", &g);
        }
    }
    out.tables.push(table);
    let bands = cfg.band_radii();
    let profile = limiting_bc_residual(&problem.spec, grid, &res.u, &bands)?;
    let mut bt = CsvTable::new("bands.csv", &["band_radius", "normal_flux", "tangential", "cells"]);
    for i in 0..bands.len() {
        bt.row(
            "limiting-flux-decay",
            &[
                num(bands[i]),
                num(profile.normal_flux[i]),
                num(profile.tangential[i]),
                profile.cells[i].to_string(),
            ],
        );
    }
    out.tables.push(bt);
    let decay = profile.decay_factor().unwrap_or(f64::NAN);
    out.metric("band_decay_factor", decay);
    if let Some(need) = cfg.tolerances.band_decay {
        out.check(
            "limiting-flux-decay",
            decay >= need,
            decay,
            need,
            "normal flux from the widest to the narrowest non-empty band".into(),
        );
    }
    Ok(out)
}

fn sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (_, spec) = case_spec(cfg)?;
    let report = epsilon_sweep(&spec, &cfg.schedule)?;
    let diffs = report.diffs();
    let monotone = diffs.windows(2).all(|w| w[1] < w[0]);
    let ratio = diffs[diffs.len() - 1] / diffs[0];
    out.check(
        "eps-monotone",
        monotone,
        diffs[diffs.len() - 1],
        diffs[0],
        "H1a distance to the eps = 0 solution decreases along the schedule".into(),
    );
    out.check(
        "eps-final-ratio",
        ratio <= cfg.tolerances.sweep_final_ratio,
        ratio,
        cfg.tolerances.sweep_final_ratio,
        "last over first distance".into(),
    );
    out.check(
        "eps-uniform-bound",
        report.bound_constant <= cfg.tolerances.sweep_bound,
        report.bound_constant,
        cfg.tolerances.sweep_bound,
        "max norm of u_eps over the data norm".into(),
    );
    out.metric("data_norm", report.data_norm);
    out.metric("bound_constant", report.bound_constant);
    out.metric("final_ratio", ratio);
    let mut t = CsvTable::new("sweep.csv", &["eps", "h1_diff", "h1_norm", "iterations"]);
    for r in &report.records {
        t.row(
            "eps-final-ratio",
            &[num(r.eps), num(r.h1_diff), num(r.h1_norm), r.result.iterations.to_string()],
        );
    }
    out.tables.push(t);
    Ok(out)
}

fn conormal(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (_, spec) = case_spec(cfg)?;
    let trace = conormal_decay(&spec, &cfg.schedule)?;
    let tag = if trace.compliant {
        out.check(
            "conormal-decay",
            trace.rate >= cfg.tolerances.conormal_rate,
            trace.rate,
            cfg.tolerances.conormal_rate,
            "fitted decay rate of max |grad u_eps| on the hole boundary".into(),
        );
        "conormal-decay"
    } else {
        let floor = trace.max_grad.iter().copied().fold(f64::INFINITY, f64::min);
        out.check(
            "counterexample-persistence",
            floor >= cfg.tolerances.counterexample_floor,
            floor,
            cfg.tolerances.counterexample_floor,
            "flux is not tangential; max |grad u_eps| must stay away from 0".into(),
        );
        "counterexample-persistence"
    };
    out.metric("rate", trace.rate);
    out.metric("compliant", if trace.compliant { 1.0 } else { 0.0 });
    let mut t = CsvTable::new("conormal.csv", &["eps", "max_grad", "max_flux"]);
    for i in 0..trace.eps.len() {
        t.row(tag, &[num(trace.eps[i]), num(trace.max_grad[i]), num(trace.max_flux[i])]);
    }
    out.tables.push(t);
    Ok(out)
}

fn frequency(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (case, spec) = case_spec(cfg)?;
    let (problem, res) = solve_problem(spec)?;
    let mut u = res.u;
    if let Some(amp) = cfg.fault.noise {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        u.iter_mut().for_each(|v| *v += amp * rng.random_range(-1.0..1.0));
    }
    let profile = frequency_profile(&problem.disc.quad, problem.grid(), &u, &case.matrix(), &cfg.radii)?;
    let expected = case.critical_exponent();
    let worst = profile
        .frequency
        .iter()
        .map(|v| v.map_or(f64::INFINITY, |f| (f - expected).abs() / expected))
        .fold(0.0, f64::max);
    out.check(
        "frequency-constant",
        worst <= cfg.tolerances.frequency,
        worst,
        cfg.tolerances.frequency,
        format!("max relative deviation of N(r) from {expected:.4}"),
    );
    let identity = check_derivative_identity(&profile, cfg.tolerances.identity)?;
    out.check(
        "derivative-identity",
        identity.passed,
        identity.max_relative_error,
        cfg.tolerances.identity,
        "dH/dr against 2E/r".into(),
    );
    out.metric("frequency_max_deviation", worst);
    out.metric("identity_max_error", identity.max_relative_error);
    let mut t = CsvTable::new("frequency.csv", &["r", "E", "H", "N"]);
    for i in 0..profile.radii.len() {
        let n = profile.frequency[i].map(num).unwrap_or_else(|| "undefined".into());
        t.row("frequency-constant", &[num(profile.radii[i]), num(profile.e[i]), num(profile.h[i]), n]);
    }
    out.tables.push(t);
    let mut t = CsvTable::new("identity.csv", &["r", "dH_dr", "two_E_over_r"]);
    for (r, dh, e) in &identity.samples {
        t.row("derivative-identity", &[num(*r), num(*dh), num(*e)]);
    }
    out.tables.push(t);
    Ok(out)
}

fn liouville(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (_, spec) = case_spec(cfg)?;
    let rec = growth_validator(&spec, &cfg.radii, cfg.tolerances.growth)?;
    out.check(
        "growth-lower-bound",
        rec.passed,
        rec.observed_growth,
        rec.critical_exponent,
        if rec.degenerate {
            "zero field: degenerate record".into()
        } else {
            "H(r) against H(r0)(r/r0)^(2(2-a-n))".into()
        },
    );
    out.metric("observed_growth", rec.observed_growth);
    out.metric("degenerate", if rec.degenerate { 1.0 } else { 0.0 });
    let mut t = CsvTable::new("growth.csv", &["r", "H", "lower_bound"]);
    for i in 0..rec.radii.len() {
        t.row("growth-lower-bound", &[num(rec.radii[i]), num(rec.h[i]), num(rec.lower_bound[i])]);
    }
    out.tables.push(t);
    Ok(out)
}

/// `|S^{n-1}| / (a + n)`, the weighted volume of the unit ball for `n = d`.
pub fn unit_ball_weight_volume(n: usize, a: f64) -> f64 {
    let sphere = if n == 2 { 2.0 * PI } else { 4.0 * PI };
    sphere / (a + n as f64)
}

fn inequalities(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let region = Region::Ball {
        radius: cfg.region_radius,
    };
    let mut runs = Vec::new();
    let mut coarse_disc = None;
    for nodes in [cfg.nodes, 2 * cfg.nodes - 1] {
        let mut gs = cfg.grid_spec();
        gs.nodes_per_axis = nodes;
        let mut spec = ProblemSpec::new(gs, cfg.a)?;
        apply_common(&mut spec, cfg);
        let disc = Discretization::new(&spec)?;
        let fields = random_test_fields(&disc.grid, cfg.eps, cfg.fields, cfg.seed);
        runs.push(inequality_battery(&disc.quad, &disc.grid, &disc.mask, &fields, region)?);
        coarse_disc.get_or_insert(disc);
    }
    let fine_reports = runs.pop().expect("two runs");
    let coarse = runs.pop().expect("two runs");
    let mut fine = fine_reports;
    compare_refinement(&coarse, &mut fine);
    let finite = coarse.iter().chain(&fine).all(|r| r.all_finite());
    out.check(
        "inequality-finite",
        finite,
        if finite { 1.0 } else { 0.0 },
        1.0,
        format!("{} random fields", cfg.fields),
    );
    let worst = fine.iter().filter_map(|r| r.refinement_delta).fold(0.0, f64::max);
    out.check(
        "refinement-stability",
        worst <= cfg.tolerances.refinement,
        worst,
        cfg.tolerances.refinement,
        "relative change of max ratios under one refinement".into(),
    );
    let mut t = CsvTable::new("inequalities.csv", &["inequality", "max_ratio_coarse", "max_ratio_fine", "delta"]);
    for (c, f) in coarse.iter().zip(&fine) {
        out.metric(&format!("max_ratio_{}", c.id.as_str()), c.max_ratio);
        t.row(
            "refinement-stability",
            &[
                c.id.as_str().into(),
                num(c.max_ratio),
                num(f.max_ratio),
                num(f.refinement_delta.unwrap_or(f64::NAN)),
            ],
        );
    }
    out.tables.push(t);
    let disc = coarse_disc.expect("coarse run");
    if cfg.n == cfg.d && cfg.half_width >= 1.0 {
        let ones = vec![1.0; disc.grid.node_count()];
        let got = integrate_field(&disc.quad, &disc.grid, &ones, Region::Ball { radius: 1.0 }, |_, _, _| 1.0);
        let exact = unit_ball_weight_volume(cfg.n, cfg.a);
        let rel = (got - exact).abs() / exact;
        out.metric("weighted_ball_volume", got);
        out.check(
            "quadrature-oracle",
            rel <= cfg.tolerances.quadrature_oracle,
            rel,
            cfg.tolerances.quadrature_oracle,
            format!("weighted volume of the unit ball, exact {exact:.6}"),
        );
    }
    Ok(out)
}

fn curved(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let param = Parametrization::by_name(&cfg.curved.graph, &cfg.curved.params, cfg.d, cfg.n)?;
    let case = CurvedCase::new(param.clone(), cfg.a)?;
    let mut problem = case.curved_problem(cfg.grid_spec())?;
    apply_common(&mut problem.spec, cfg);
    let vertical = cfg.curved.weight == "vertical";
    if !vertical {
        problem.delta = AdmissibleWeight::Distance;
    }
    let sample = GridSpec::cube(cfg.d, cfg.n, 9, 0.8 * cfg.half_width);
    let adm = admissibility_check(&param, &problem.delta, &sample, cfg.seed)?;
    out.metric("c0", adm.c0);
    out.metric("c1", adm.c1);
    out.metric("holder_quotient", adm.holder_quotient);
    out.check(
        "admissible-weight",
        adm.admissible,
        adm.c0,
        0.0,
        format!("delta/dist in [{:.4}, {:.4}]", adm.c0, adm.c1),
    );
    let pushed = push_problem(&problem)?;
    out.metric("lambda", pushed.lambda);
    out.metric("big_lambda", pushed.big_lambda);
    let (straight, res) = solve_problem(pushed.spec)?;
    out.metric("iterations", res.iterations as f64);
    let h = straight.grid().h;
    let steps = (cfg.curved.half_width / h).round() as usize;
    let cgrid = build_grid(GridSpec::cube(cfg.d, cfg.n, 2 * steps + 1, steps as f64 * h))?;
    let u = pullback_field(straight.grid(), &res.u, &param, &cgrid)?;
    if vertical {
        let exact = cgrid.sample(|z| case.exact(z));
        let num2: f64 = u.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = exact.iter().map(|b| b * b).sum();
        let rel = (num2 / den).sqrt();
        out.metric("relative_l2_error", rel);
        out.check(
            "curved-equivalence",
            rel <= cfg.tolerances.curved_l2,
            rel,
            cfg.tolerances.curved_l2,
            "pulled-back solution against the curved analytic solution".into(),
        );
    }
    let bands = cfg.band_radii();
    let prof = curved_bc_residual(
        &cgrid,
        &u,
        &CoefficientField::identity(cfg.d),
        &|_| [0.0; 3],
        &|_| 0.0,
        &param,
        &bands,
    )?;
    let decay = prof.decay_factor().unwrap_or(f64::NAN);
    out.metric("normal_decay_factor", decay);
    out.check(
        "curved-conormal-decay",
        decay >= cfg.tolerances.curved_decay,
        decay,
        cfg.tolerances.curved_decay,
        "normal residual from the widest to the narrowest non-empty band".into(),
    );
    let mut t = CsvTable::new(
        "curved.csv",
        &["band_radius", "normal_residual", "tangential_residual", "cells"],
    );
    for i in 0..bands.len() {
        t.row(
            "curved-conormal-decay",
            &[
                num(prof.rho[i]),
                num(prof.normal[i]),
                num(prof.tangential[i]),
                prof.cells[i].to_string(),
            ],
        );
    }
    out.tables.push(t);
    Ok(out)
}

/// Exit code of a library error: solver failures map to 3, everything else
/// to 2.
pub fn exit_code(e: &LabError) -> i32 {
    if e.is_solver_failure() {
        3
    } else {
        2
    }
}
