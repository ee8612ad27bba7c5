//! Experiment configuration files (TOML). Every key is checked before any
//! computation starts and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curved::GRAPH_NAMES;
use crate::geometry::GridSpec;
use crate::manufactured::CASE_NAMES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Solve,
    Rates,
    SweepEps,
    Conormal,
    Frequency,
    Liouville,
    Inequalities,
    Curved,
    ListCases,
}

impl Subcommand {
    pub fn as_str(&self) -> &'static str {
        match self {
            Subcommand::Solve => "solve",
            Subcommand::Rates => "rates",
            Subcommand::SweepEps => "sweep-eps",
            Subcommand::Conormal => "conormal",
            Subcommand::Frequency => "frequency",
            Subcommand::Liouville => "liouville",
            Subcommand::Inequalities => "inequalities",
            Subcommand::Curved => "curved",
            Subcommand::ListCases => "list-cases",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    #[serde(default = "default_gauss")]
    pub gauss_order: usize,
    #[serde(default = "default_grading")]
    pub grading_depth: usize,
}

/// Pass/fail thresholds of the configured checks.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed deviation of fitted exponents.
    #[serde(default = "default_exponent_tol")]
    pub exponent: f64,
    /// Required decrease factor of the limiting normal flux across the
    /// configured bands (`rates`); no check when absent.
    #[serde(default)]
    pub band_decay: Option<f64>,
    #[serde(default = "default_final_ratio")]
    pub sweep_final_ratio: f64,
    #[serde(default = "default_bound")]
    pub sweep_bound: f64,
    #[serde(default = "default_conormal_rate")]
    pub conormal_rate: f64,
    #[serde(default = "default_persistence")]
    pub counterexample_floor: f64,
    #[serde(default = "default_relative")]
    pub frequency: f64,
    #[serde(default = "default_relative")]
    pub identity: f64,
    #[serde(default = "default_relative")]
    pub growth: f64,
    #[serde(default = "default_refinement")]
    pub refinement: f64,
    #[serde(default = "default_oracle")]
    pub quadrature_oracle: f64,
    #[serde(default = "default_relative")]
    pub curved_l2: f64,
    #[serde(default = "default_curved_decay")]
    pub curved_decay: f64,
    #[serde(default = "default_forcing")]
    pub forcing: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CurvedSection {
    #[serde(default = "default_graph")]
    pub graph: String,
    #[serde(default = "default_graph_params")]
    pub params: Vec<f64>,
    /// `vertical` (`|y - phi(x)|`) or `distance` (`dist_Gamma`).
    #[serde(default = "default_weight")]
    pub weight: String,
    /// Half width of the curved evaluation cube.
    #[serde(default = "default_curved_half")]
    pub half_width: f64,
}

/// Deliberate defects used to exercise the failure paths.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSection {
    /// Flip the sign of the assembled matrix (`solve`).
    #[serde(default)]
    pub negate_matrix: bool,
    /// Replace the source `f` by this constant (`solve`).
    #[serde(default)]
    pub source_override: Option<f64>,
    /// Add seeded uniform noise of this amplitude to the solution before
    /// post-processing (`frequency`).
    #[serde(default)]
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    #[serde(default = "default_case")]
    pub case: String,
    #[serde(default = "default_dim")]
    pub d: usize,
    #[serde(default = "default_dim")]
    pub n: usize,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<f64>,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    /// Band radii; `rates` defaults to `[0.25, 0.125, 0.0625]`, `curved`
    /// to `[0.5, ..., 0.03125]`.
    #[serde(default)]
    pub bands: Option<Vec<f64>>,
    /// Number of random fields for `inequalities`.
    #[serde(default = "default_fields")]
    pub fields: usize,
    /// Radius of the ball on which the inequalities are evaluated.
    #[serde(default = "default_region")]
    pub region_radius: f64,
    #[serde(default = "default_solver")]
    pub solver: SolverSection,
    #[serde(default = "default_quadrature")]
    pub quadrature: QuadratureSection,
    #[serde(default = "default_tolerances")]
    pub tolerances: Tolerances,
    #[serde(default = "default_curved")]
    pub curved: CurvedSection,
    #[serde(default)]
    pub fault: FaultSection,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    20000
}
fn default_gauss() -> usize {
    3
}
fn default_grading() -> usize {
    4
}
fn default_exponent_tol() -> f64 {
    0.1
}
fn default_final_ratio() -> f64 {
    0.25
}
fn default_bound() -> f64 {
    2.0
}
fn default_conormal_rate() -> f64 {
    0.25
}
fn default_persistence() -> f64 {
    0.5
}
fn default_relative() -> f64 {
    0.05
}
fn default_refinement() -> f64 {
    0.10
}
fn default_oracle() -> f64 {
    0.01
}
fn default_curved_decay() -> f64 {
    3.0
}
fn default_forcing() -> f64 {
    1e-6
}
fn default_graph() -> String {
    "sine".into()
}
fn default_graph_params() -> Vec<f64> {
    vec![0.2, 1.0]
}
fn default_weight() -> String {
    "vertical".into()
}
fn default_curved_half() -> f64 {
    0.75
}
fn default_case() -> String {
    "radial_homogeneous".into()
}
fn default_dim() -> usize {
    2
}
fn default_a() -> f64 {
    -1.5
}
fn default_nodes() -> usize {
    65
}
fn default_half_width() -> f64 {
    1.0
}
fn default_schedule() -> Vec<f64> {
    vec![0.25, 0.125, 0.0625, 0.03125]
}
fn default_radii() -> Vec<f64> {
    (0..7).map(|i| 0.3 + 0.05 * i as f64).collect()
}
fn default_fields() -> usize {
    50
}
fn default_region() -> f64 {
    0.75
}
fn default_solver() -> SolverSection {
    SolverSection {
        tol: default_tol(),
        max_iter: default_max_iter(),
    }
}
fn default_quadrature() -> QuadratureSection {
    QuadratureSection {
        gauss_order: default_gauss(),
        grading_depth: default_grading(),
    }
}
fn default_tolerances() -> Tolerances {
    Tolerances {
        exponent: default_exponent_tol(),
        band_decay: None,
        sweep_final_ratio: default_final_ratio(),
        sweep_bound: default_bound(),
        conormal_rate: default_conormal_rate(),
        counterexample_floor: default_persistence(),
        frequency: default_relative(),
        identity: default_relative(),
        growth: default_relative(),
        refinement: default_refinement(),
        quadrature_oracle: default_oracle(),
        curved_l2: default_relative(),
        curved_decay: default_curved_decay(),
        forcing: default_forcing(),
    }
}
fn default_curved() -> CurvedSection {
    CurvedSection {
        graph: default_graph(),
        params: default_graph_params(),
        weight: default_weight(),
        half_width: default_curved_half(),
    }
}

impl ExperimentConfig {
    /// Minimal configuration for a subcommand; everything else defaulted
    /// (`curved` runs in `d = 3`).
    pub fn for_subcommand(subcommand: Subcommand) -> Self {
        let text = format!("subcommand = \"{}\"", subcommand.as_str());
        let mut cfg: Self = toml::from_str(&text).expect("defaults parse");
        if subcommand == Subcommand::Curved {
            cfg.d = 3;
        }
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn band_radii(&self) -> Vec<f64> {
        match (&self.bands, self.subcommand) {
            (Some(b), _) => b.clone(),
            (None, Subcommand::Curved) => (1..=5).map(|k| 0.5f64.powi(k)).collect(),
            (None, _) => vec![0.25, 0.125, 0.0625],
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::cube(self.d, self.n, self.nodes, self.half_width)
    }

    /// Static checks on every key; the error text names the offending key.
    pub fn validate(&self) -> Result<(), String> {
        if self.subcommand == Subcommand::ListCases {
            return Ok(());
        }
        if !(2..=3).contains(&self.d) || self.n < 2 || self.n > self.d {
            return Err(format!("need 2 <= n <= d <= 3, got d = {}, n = {}", self.d, self.n));
        }
        let an = self.a + self.n as f64;
        if !(self.a.is_finite() && an > 0.0 && an < 2.0) {
            return Err(format!("a+n must lie in (0,2), got a = {}, n = {}", self.a, self.n));
        }
        if self.nodes < 5 || self.nodes % 2 == 0 {
            return Err(format!("nodes must be odd and >= 5, got {}", self.nodes));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err("half_width must be positive".into());
        }
        if !(self.eps >= 0.0 && self.eps < 0.5) {
            return Err(format!("eps must lie in [0, 0.5), got {}", self.eps));
        }
        if self.subcommand != Subcommand::Curved && !CASE_NAMES.contains(&self.case.as_str()) {
            return Err(format!("unknown case '{}', expected one of {CASE_NAMES:?}", self.case));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err("solver.tol and solver.max_iter must be positive".into());
        }
        if self.quadrature.gauss_order == 0 {
            return Err("quadrature.gauss_order must be positive".into());
        }
        let positive = |name: &str, v: &[f64]| -> Result<(), String> {
            if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                Err(format!("{name} must be a non-empty list of positive numbers"))
            } else {
                Ok(())
            }
        };
        match self.subcommand {
            Subcommand::SweepEps | Subcommand::Conormal => positive("schedule", &self.schedule)?,
            Subcommand::Frequency | Subcommand::Liouville => positive("radii", &self.radii)?,
            Subcommand::Rates => positive("bands", &self.band_radii())?,
            Subcommand::Curved => {
                positive("bands", &self.band_radii())?;
                if self.d != 3 || self.n != 2 {
                    return Err("curved mode needs d = 3, n = 2".into());
                }
                if !GRAPH_NAMES.contains(&self.curved.graph.as_str()) {
                    return Err(format!("unknown graph '{}', expected one of {GRAPH_NAMES:?}", self.curved.graph));
                }
                if !["vertical", "distance"].contains(&self.curved.weight.as_str()) {
                    return Err(format!("curved.weight must be 'vertical' or 'distance', got '{}'", self.curved.weight));
                }
                if !(self.curved.half_width > 0.0 && self.curved.half_width < self.half_width) {
                    return Err("curved.half_width must lie in (0, half_width)".into());
                }
            }
            Subcommand::Inequalities => {
                if self.fields == 0 {
                    return Err("fields must be positive".into());
                }
                if !(self.region_radius > 0.0 && self.region_radius <= self.half_width) {
                    return Err("region_radius must lie in (0, half_width]".into());
                }
            }
            _ => {}
        }
        if let Some(v) = self.fault.noise {
            if !(v >= 0.0 && v.is_finite()) {
                return Err("fault.noise must be a non-negative number".into());
            }
        }
        Ok(())
    }
}
