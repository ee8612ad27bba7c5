//! Command-line front end: config loading, subcommand dispatch, manifests
//! and exit codes (0 pass, 1 check failed, 2 config error, 3 solver failure).

pub mod config;
pub mod report;
pub mod run;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser};

use config::{ExperimentConfig, Subcommand};
use report::{compare_manifests, CheckRecord, Manifest, RunInfo};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

pub const DEFAULT_OUT: &str = "degenlab-out";

#[derive(Debug, Parser)]
#[command(name = "degenlab", version, about = "Weighted degenerate elliptic experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the manifest and CSV reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of nodes per axis (odd).
    #[arg(long)]
    pub grid_nodes: Option<usize>,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Run the subcommand named in the config file.
    Run(RunArgs),
    Solve(RunArgs),
    Rates(RunArgs),
    SweepEps(RunArgs),
    Conormal(RunArgs),
    Frequency(RunArgs),
    Liouville(RunArgs),
    Inequalities(RunArgs),
    Curved(RunArgs),
    /// Print the catalog of manufactured cases.
    ListCases,
    /// Per-metric differences between two manifests.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Absolute tolerance; larger deltas are regressions.
        #[arg(long, default_value_t = 0.0)]
        tolerance: f64,
        /// Also write the diff to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let (kind, args) = match cli.command {
        Command::Run(a) => (None, a),
        Command::Solve(a) => (Some(Subcommand::Solve), a),
        Command::Rates(a) => (Some(Subcommand::Rates), a),
        Command::SweepEps(a) => (Some(Subcommand::SweepEps), a),
        Command::Conormal(a) => (Some(Subcommand::Conormal), a),
        Command::Frequency(a) => (Some(Subcommand::Frequency), a),
        Command::Liouville(a) => (Some(Subcommand::Liouville), a),
        Command::Inequalities(a) => (Some(Subcommand::Inequalities), a),
        Command::Curved(a) => (Some(Subcommand::Curved), a),
        Command::ListCases => {
            print!("{}", run::case_catalog());
            return EXIT_PASS;
        }
        Command::Compare { a, b, tolerance, out } => return compare(&a, &b, tolerance, out.as_deref()),
    };
    run_experiment(kind, &args)
}

fn load_config(kind: Option<Subcommand>, args: &RunArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match (&args.config, kind) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(k)) => ExperimentConfig::for_subcommand(k),
        (None, None) => return Err("`run` needs --config".into()),
    };
    if let Some(k) = kind {
        if cfg.subcommand != k {
            return Err(format!(
                "config is for '{}' but '{}' was requested",
                cfg.subcommand.as_str(),
                k.as_str()
            ));
        }
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.grid_nodes {
        cfg.nodes = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_info(cfg: Option<&ExperimentConfig>, subcommand: &str) -> RunInfo {
    let base = cfg.cloned().unwrap_or_else(|| ExperimentConfig::for_subcommand(Subcommand::Solve));
    RunInfo {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        status: String::new(),
        exit_code: 0,
        message: String::new(),
        nodes_per_axis: base.nodes,
        h: 2.0 * base.half_width / (base.nodes.max(2) - 1) as f64,
        gauss_order: base.quadrature.gauss_order,
        grading_depth: base.quadrature.grading_depth,
        solver_tol: base.solver.tol,
        solver_max_iter: base.solver.max_iter,
        seed: base.seed,
        outputs: vec![],
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    fs::write(dir.join("manifest.toml"), manifest.to_toml()).map_err(|e| format!("cannot write manifest: {e}"))
}

fn fail_run(manifest: &mut Manifest, dir: Option<&Path>, status: &str, code: i32, check: &str, message: String) -> i32 {
    eprintln!("FAIL {check}: {message}");
    manifest.run.status = status.into();
    manifest.run.exit_code = code;
    manifest.run.message = message.clone();
    manifest.checks.insert(
        check.into(),
        CheckRecord {
            passed: false,
            value: f64::NAN,
            threshold: f64::NAN,
            detail: message,
        },
    );
    if let Some(d) = dir {
        if let Err(e) = write_manifest(d, manifest) {
            eprintln!("{e}");
        }
    }
    code
}

fn run_experiment(kind: Option<Subcommand>, args: &RunArgs) -> i32 {
    let cfg = match load_config(kind, args) {
        Ok(c) => c,
        Err(msg) => {
            let name = kind.map(|k| k.as_str()).unwrap_or("run");
            let mut m = Manifest {
                config: None,
                run: run_info(None, name),
                metrics: Default::default(),
                checks: Default::default(),
                timing: Default::default(),
            };
            let msg = format!("config error: {msg}");
            return fail_run(&mut m, args.out.as_deref(), "config-error", EXIT_CONFIG, "config-validation", msg);
        }
    };
    if cfg.subcommand == Subcommand::ListCases {
        print!("{}", run::case_catalog());
        return EXIT_PASS;
    }
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut manifest = Manifest {
        config: Some(cfg.clone()),
        run: run_info(Some(&cfg), cfg.subcommand.as_str()),
        metrics: Default::default(),
        checks: Default::default(),
        timing: Default::default(),
    };
    let start = Instant::now();
    let result = run::execute(&cfg);
    manifest.timing.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let code = run::exit_code(&e);
            let (status, check) = if code == EXIT_SOLVER {
                ("solver-failure", "solver-convergence")
            } else {
                ("config-error", "config-validation")
            };
            return fail_run(&mut manifest, Some(&dir), status, code, check, e.to_string());
        }
    };
    if let Err(e) = fs::create_dir_all(&dir) {
        let msg = format!("cannot create {}: {e}", dir.display());
        return fail_run(&mut manifest, None, "config-error", EXIT_CONFIG, "output", msg);
    }
    for t in &outcome.tables {
        if let Err(e) = fs::write(dir.join(&t.file), t.render()) {
            let msg = format!("cannot write {}: {e}", t.file);
            return fail_run(&mut manifest, Some(&dir), "config-error", EXIT_CONFIG, "output", msg);
        }
        manifest.run.outputs.push(t.file.clone());
    }
    manifest.metrics = outcome.metrics;
    manifest.checks = outcome.checks;
    for (name, c) in &manifest.checks {
        let line = format!(
            "{} {name}: value {:.6e}, threshold {:.6e} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.value,
            c.threshold,
            c.detail
        );
        if c.passed {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    let failed = manifest.failed_checks().join(", ");
    let code = if failed.is_empty() { EXIT_PASS } else { EXIT_CHECK_FAILED };
    manifest.run.status = if code == EXIT_PASS { "pass" } else { "check-failed" }.into();
    manifest.run.exit_code = code;
    manifest.run.message = if failed.is_empty() {
        String::new()
    } else {
        format!("failed checks: {failed}")
    };
    if let Err(e) = write_manifest(&dir, &manifest) {
        eprintln!("{e}");
        return EXIT_CONFIG;
    }
    code
}

fn compare(a: &Path, b: &Path, tolerance: f64, out: Option<&Path>) -> i32 {
    let load = |p: &Path| -> Result<Manifest, String> {
        let text = fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
        Manifest::from_toml(&text).map_err(|e| format!("{}: {e}", p.display()))
    };
    let diff = match (load(a), load(b)) {
        (Ok(ma), Ok(mb)) => compare_manifests(&ma, &mb, tolerance),
        (Err(e), _) | (_, Err(e)) => Err(e),
    };
    let diff = match diff {
        Ok(d) => d,
        Err(e) => {
            eprintln!("FAIL config-validation: {e}");
            return EXIT_CONFIG;
        }
    };
    let text = diff.render();
    print!("{text}");
    if let Some(p) = out {
        if let Err(e) = fs::write(p, &text) {
            eprintln!("cannot write {}: {e}", p.display());
            return EXIT_CONFIG;
        }
    }
    if diff.has_regression() {
        eprintln!("FAIL regression: metrics differ beyond tolerance {tolerance}");
        EXIT_CHECK_FAILED
    } else {
        EXIT_PASS
    }
}
