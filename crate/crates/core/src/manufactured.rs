//! Exact solution / forcing pairs used as oracles.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{CoefficientField, ProblemSpec};
use crate::error::{LabError, Result};
use crate::geometry::{Grid, GridSpec};
use crate::jet::{forcing_from_fields, Jet, Real};
use crate::linalg::{self, Mat};
use crate::quadrature::{integrate_field, linf_norm, Quadrature, Region};

#[derive(Debug, Clone, PartialEq)]
pub enum CaseKind {
    /// `|y|^{2-a-n}`.
    RadialHomogeneous,
    /// `|A^{-1/2} y|^{2-a-n}` with constant SPD `A`, n = d.
    Anisotropic { matrix: Mat },
    /// `c . x`, d > n.
    LinearX { c: [f64; 3] },
    /// `|y|^2`, `f = -2(n+a)`.
    QuadraticY,
    /// `x_1^2`, `f = -2`, d > n.
    QuadraticX,
    /// `y_1 + y_2` with `F = (-1,-1)`, d = n = 2, a in (-2,-1).
    CounterexampleF,
    /// `|y|^2 (1 + x_1/2)` with `F = (0, y (1 + z_1/4))`; the flux is
    /// tangential on `{y = 0}` and `f` comes from automatic differentiation.
    CompliantF,
}

pub const CASE_NAMES: [&str; 7] = [
    "radial_homogeneous",
    "anisotropic",
    "linear_x",
    "quadratic_y",
    "quadratic_x",
    "counterexample_F",
    "compliant_F",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `a + n in [1, 2)`: solutions are only Hölder continuous.
    C0Alpha,
    /// `a + n in (0, 1)`: gradients are Hölder continuous.
    C1Alpha,
}

impl Regime {
    pub fn of(a: f64, n: usize) -> Self {
        if a + (n as f64) < 1.0 {
            Regime::C1Alpha
        } else {
            Regime::C0Alpha
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::C0Alpha => "C^{0,alpha}",
            Regime::C1Alpha => "C^{1,alpha}",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub kind: CaseKind,
    pub d: usize,
    pub n: usize,
    pub a: f64,
}

fn sq_norm<T: Real>(z: &[T]) -> T {
    let mut s = T::c(0.0);
    for &v in z {
        s = s + v * v;
    }
    s
}

impl CaseKind {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "radial_homogeneous" => CaseKind::RadialHomogeneous,
            "anisotropic" => CaseKind::Anisotropic {
                matrix: linalg::diag(&[4.0, 1.0, 1.0]),
            },
            "linear_x" => CaseKind::LinearX { c: [2.0, 0.0, 0.0] },
            "quadratic_y" => CaseKind::QuadraticY,
            "quadratic_x" => CaseKind::QuadraticX,
            "counterexample_F" => CaseKind::CounterexampleF,
            "compliant_F" => CaseKind::CompliantF,
            other => {
                return Err(LabError::CaseValidity {
                    case: other.into(),
                    reason: format!("unknown case; known cases: {}", CASE_NAMES.join(", ")),
                })
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CaseKind::RadialHomogeneous => "radial_homogeneous",
            CaseKind::Anisotropic { .. } => "anisotropic",
            CaseKind::LinearX { .. } => "linear_x",
            CaseKind::QuadraticY => "quadratic_y",
            CaseKind::QuadraticX => "quadratic_x",
            CaseKind::CounterexampleF => "counterexample_F",
            CaseKind::CompliantF => "compliant_F",
        }
    }

    /// Validity range and role, for the catalog listing.
    pub fn description(&self) -> (&'static str, &'static str) {
        match self {
            CaseKind::RadialHomogeneous => (
                "2<=n<=d<=3, a+n in (0,2)",
                "homogeneous model solution |y|^(2-a-n); sharp Hölder exponent",
            ),
            CaseKind::Anisotropic { .. } => (
                "n=d, constant SPD A",
                "|A^(-1/2)y|^(2-a-n); equality case of the spectral trace bound",
            ),
            CaseKind::LinearX { .. } => ("d>n", "c.x; x-directions are weight neutral"),
            CaseKind::QuadraticY => ("2<=n<=d<=3", "|y|^2 with f=-2(n+a)"),
            CaseKind::QuadraticX => ("d>n", "x_1^2 with f=-2"),
            CaseKind::CounterexampleF => (
                "d=n=2, a in (-2,-1)",
                "y_1+y_2 with F=(-1,-1); flux not tangential, gradient does not vanish on the hole",
            ),
            CaseKind::CompliantF => (
                "2<=n<=d<=3",
                "|y|^2(1+x_1/2) with tangential F; f from automatic differentiation",
            ),
        }
    }
}

impl ManufacturedCase {
    pub fn new(kind: CaseKind, d: usize, n: usize, a: f64) -> Result<Self> {
        let fail = |reason: String| LabError::CaseValidity {
            case: kind.name().into(),
            reason,
        };
        if !(2..=3).contains(&d) || n < 2 || n > d {
            return Err(fail(format!("need 2 <= n <= d <= 3, got d = {d}, n = {n}")));
        }
        if !(a + (n as f64) > 0.0 && a + (n as f64) < 2.0) {
            return Err(fail(format!("a+n must lie in (0,2), got a = {a}, n = {n}")));
        }
        match &kind {
            CaseKind::Anisotropic { matrix } => {
                if n != d {
                    return Err(fail("requires n = d".into()));
                }
                if !linalg::is_symmetric(matrix, d, 1e-12) || linalg::sym_eigenvalues(matrix, d)[0] <= 0.0 {
                    return Err(fail("matrix must be symmetric positive definite".into()));
                }
            }
            CaseKind::LinearX { .. } | CaseKind::QuadraticX => {
                if d == n {
                    return Err(fail("requires d > n".into()));
                }
            }
            CaseKind::CounterexampleF => {
                if d != 2 || n != 2 || !(a > -2.0 && a < -1.0) {
                    return Err(fail(format!("requires d = n = 2 and a in (-2,-1), got a = {a}")));
                }
            }
            _ => {}
        }
        Ok(Self { kind, d, n, a })
    }

    pub fn by_name(name: &str, d: usize, n: usize, a: f64) -> Result<Self> {
        Self::new(CaseKind::from_name(name)?, d, n, a)
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dx(&self) -> usize {
        self.d - self.n
    }

    /// `2 - a - n`.
    pub fn critical_exponent(&self) -> f64 {
        2.0 - self.a - self.n as f64
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.a, self.n)
    }

    pub fn matrix(&self) -> Mat {
        match &self.kind {
            CaseKind::Anisotropic { matrix } => *matrix,
            _ => linalg::identity(self.d),
        }
    }

    pub fn u<T: Real>(&self, z: &[T]) -> T {
        let dx = self.dx();
        let y = &z[dx..self.d];
        let e = self.critical_exponent();
        match &self.kind {
            CaseKind::RadialHomogeneous => sq_norm(y).powf(0.5 * e),
            CaseKind::Anisotropic { matrix } => {
                let inv = linalg::inverse(matrix, self.d).expect("SPD");
                let mut q = T::c(0.0);
                for i in 0..self.d {
                    for j in 0..self.d {
                        q = q + T::c(inv[i][j]) * y[i] * y[j];
                    }
                }
                q.powf(0.5 * e)
            }
            CaseKind::LinearX { c } => {
                let mut s = T::c(0.0);
                for k in 0..dx {
                    s = s + T::c(c[k]) * z[k];
                }
                s
            }
            CaseKind::QuadraticY => sq_norm(y),
            CaseKind::QuadraticX => z[0] * z[0],
            CaseKind::CounterexampleF => y[0] + y[1],
            CaseKind::CompliantF => {
                let base = sq_norm(y);
                if dx > 0 {
                    base * (T::c(1.0) + T::c(0.5) * z[0])
                } else {
                    base
                }
            }
        }
    }

    pub fn flux<T: Real>(&self, z: &[T]) -> [T; 3] {
        let zero = T::c(0.0);
        let mut out = [zero; 3];
        match self.kind {
            CaseKind::CounterexampleF => {
                out[0] = T::c(-1.0);
                out[1] = T::c(-1.0);
            }
            CaseKind::CompliantF => {
                let s = T::c(1.0) + T::c(0.25) * z[0];
                for k in self.dx()..self.d {
                    out[k] = z[k] * s;
                }
            }
            _ => {}
        }
        out
    }

    pub fn eval_u(&self, z: &[f64]) -> f64 {
        self.u(z)
    }

    pub fn y_norm(&self, z: &[f64]) -> f64 {
        z[self.dx()..self.d].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Exact gradient. On `{y = 0}` the homogeneous cases return 0 when the
    /// gradient extends continuously and NaN when it does not.
    pub fn grad_u(&self, z: &[f64]) -> [f64; 3] {
        let homogeneous = matches!(
            self.kind,
            CaseKind::RadialHomogeneous | CaseKind::Anisotropic { .. }
        );
        if homogeneous && self.y_norm(z) == 0.0 {
            let v = if self.critical_exponent() > 1.0 { 0.0 } else { f64::NAN };
            let mut g = [0.0; 3];
            for item in g.iter_mut().take(self.d).skip(self.dx()) {
                *item = v;
            }
            return g;
        }
        let j = self.u(&Jet::point(&z[..self.d]));
        j.g
    }

    /// Source `f`: closed forms where available, automatic differentiation
    /// for the compliant case.
    pub fn source(&self, z: &[f64]) -> f64 {
        match self.kind {
            CaseKind::QuadraticY => -2.0 * (self.n as f64 + self.a),
            CaseKind::QuadraticX => -2.0,
            CaseKind::CompliantF => self.source_by_ad(z),
            _ => 0.0,
        }
    }

    /// `f = -div(|y|^a (A grad u + F)) / |y|^a` computed on jets.
    pub fn source_by_ad(&self, z: &[f64]) -> f64 {
        let dx = self.dx();
        let a = self.a;
        let m = self.matrix();
        forcing_from_fields(
            self.d,
            z,
            |p| self.u(&p[..self.d]),
            |p| sq_norm(&p[dx..self.d]).powf(0.5 * a),
            |_| {
                let mut out = [[Jet::c(0.0); 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        out[i][j] = Jet::c(m[i][j]);
                    }
                }
                out
            },
            |p| self.flux(&p[..self.d]),
        )
    }

    /// Dirichlet datum on `{y = 0}`: `u(x, 0)`.
    pub fn psi(&self, z: &[f64]) -> f64 {
        let mut p = [0.0; 3];
        p[..self.dx()].copy_from_slice(&z[..self.dx()]);
        self.u(&p[..self.d])
    }

    /// Hölder exponent of `u` near `{y = 0}` (capped at 1).
    pub fn expected_holder_exponent(&self) -> f64 {
        match self.kind {
            CaseKind::RadialHomogeneous | CaseKind::Anisotropic { .. } => self.critical_exponent().min(1.0),
            _ => 1.0,
        }
    }

    /// Hölder exponent of the gradient, or `None` when the gradient is not
    /// continuous on `{y = 0}`.
    pub fn expected_gradient_exponent(&self) -> Option<f64> {
        match self.kind {
            CaseKind::RadialHomogeneous | CaseKind::Anisotropic { .. } => {
                let e = self.critical_exponent();
                if e > 1.0 {
                    Some((e - 1.0).min(1.0))
                } else {
                    None
                }
            }
            _ => Some(1.0),
        }
    }

    /// Problem whose exact solution is this case: outer data `g = u`,
    /// `psi = u(x, 0)`.
    pub fn problem_spec(&self, grid: GridSpec) -> Result<ProblemSpec> {
        if grid.d != self.d || grid.n != self.n {
            return Err(LabError::CaseValidity {
                case: self.name().into(),
                reason: format!("grid has d = {}, n = {}", grid.d, grid.n),
            });
        }
        let mut spec = ProblemSpec::new(grid, self.a)?;
        spec.coefficient = CoefficientField::Constant(self.matrix());
        let c = Arc::new(self.clone());
        let (c1, c2, c3, c4) = (c.clone(), c.clone(), c.clone(), c.clone());
        spec.source = Arc::new(move |z| c1.source(z));
        spec.flux = Arc::new(move |z| c2.flux(z));
        spec.psi = Arc::new(move |z| c3.psi(z));
        spec.outer = Arc::new(move |z| c4.eval_u(z));
        Ok(spec)
    }
}

/// Nodal samples of a case.
#[derive(Debug, Clone)]
pub struct CaseFields {
    pub u: Vec<f64>,
    pub grad_u: Vec<[f64; 3]>,
    pub f: Vec<f64>,
    pub flux: Vec<[f64; 3]>,
    pub psi: Vec<f64>,
}

pub fn case_fields(case: &ManufacturedCase, grid: &Grid) -> Result<CaseFields> {
    if grid.d() != case.d || grid.n() != case.n {
        return Err(LabError::CaseValidity {
            case: case.name().into(),
            reason: "grid dimensions differ from the case".into(),
        });
    }
    let d = grid.d();
    let pts: Vec<_> = (0..grid.node_count()).map(|i| grid.node_coords(i)).collect();
    Ok(CaseFields {
        u: pts.iter().map(|z| case.eval_u(&z[..d])).collect(),
        grad_u: pts.iter().map(|z| case.grad_u(&z[..d])).collect(),
        f: pts
            .iter()
            .map(|z| if case.y_norm(&z[..d]) > 0.0 { case.source(&z[..d]) } else { f64::NAN })
            .collect(),
        flux: pts.iter().map(|z| case.flux(&z[..d])).collect(),
        psi: pts.iter().map(|z| case.psi(&z[..d])).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub max_residual: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Fourth-order central difference of `g` along axis `k`.
fn fd4(g: &dyn Fn(&[f64]) -> f64, z: &[f64], k: usize, h: f64) -> f64 {
    let mut p = [0.0; 3];
    p[..z.len()].copy_from_slice(z);
    let at = |t: f64| {
        let mut q = p;
        q[k] += t;
        g(&q[..z.len()])
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

/// Strong-form residual `|-div(w (A grad u + F)) - w f|` at random points
/// with `|y| >= 0.1`, from finite differences of the analytic fields.
pub fn forcing_residual(
    case: &ManufacturedCase,
    source: &dyn Fn(&[f64]) -> f64,
    sample_count: usize,
    seed: u64,
) -> ConsistencyReport {
    let d = case.d;
    let dx = case.dx();
    let a = case.a;
    let m = case.matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = |z: &[f64]| z[dx..d].iter().map(|v| v * v).sum::<f64>().sqrt().powf(a);
    let h_in = 1e-3;
    let h_out = 1e-3;
    let mut max_res = 0.0f64;
    let mut scale = 0.0f64;
    for _ in 0..sample_count {
        let z: Vec<f64> = loop {
            let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            if case.y_norm(&z) >= 0.1 {
                break z;
            }
        };
        let u = |q: &[f64]| case.eval_u(q);
        let mut div = 0.0;
        for i in 0..d {
            let vi = |q: &[f64]| {
                let mut s = case.flux(q)[i];
                for j in 0..d {
                    s += m[i][j] * fd4(&u, q, j, h_in);
                }
                w(q) * s
            };
            div += fd4(&vi, &z, i, h_out);
        }
        let wf = w(&z) * source(&z);
        max_res = max_res.max((-div - wf).abs());
        scale = scale.max(w(&z) * (1.0 + source(&z).abs()));
    }
    let tolerance = 1e-6 * scale;
    ConsistencyReport {
        max_residual: max_res,
        scale,
        tolerance,
        passed: max_res <= tolerance,
    }
}

pub fn forcing_consistency(case: &ManufacturedCase, sample_count: usize) -> ConsistencyReport {
    forcing_residual(case, &|z| case.source(z), sample_count, 0x5eed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    /// Nodal maximum over `B_{1/2}`.
    LInfHalfBall,
    L2a,
    H1a,
}

/// Error between a nodal field and the exact solution.
pub fn exact_error(u_h: &[f64], case: &ManufacturedCase, grid: &Grid, quad: &Quadrature, norm: ErrorNorm) -> f64 {
    let d = grid.d();
    match norm {
        ErrorNorm::LInfHalfBall => {
            let diff: Vec<f64> = (0..grid.node_count())
                .map(|i| u_h[i] - case.eval_u(&grid.node_coords(i)[..d]))
                .collect();
            linf_norm(grid, &diff, Region::Ball { radius: 0.5 }).value
        }
        ErrorNorm::L2a => integrate_field(quad, grid, u_h, Region::All, |z, u, _| {
            let e = u - case.eval_u(z);
            e * e
        })
        .sqrt(),
        ErrorNorm::H1a => integrate_field(quad, grid, u_h, Region::All, |z, u, g| {
            let e = u - case.eval_u(z);
            let ge = case.grad_u(z);
            e * e + (0..d).map(|k| (g[k] - ge[k]).powi(2)).sum::<f64>()
        })
        .sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use crate::quadrature::{QuadratureRule, WeightSpec};

    fn all_valid_cases() -> Vec<ManufacturedCase> {
        let mut v = Vec::new();
        for &(d, n, a) in &[(2usize, 2usize, -1.5), (2, 2, -0.5), (3, 2, -1.5), (3, 3, -2.5), (3, 2, -0.5)] {
            for name in CASE_NAMES {
                if let Ok(c) = ManufacturedCase::by_name(name, d, n, a) {
                    v.push(c);
                }
            }
        }
        v
    }

    #[test]
    fn radial_example() {
        let c = ManufacturedCase::by_name("radial_homogeneous", 2, 2, -1.5).unwrap();
        assert_eq!(c.critical_exponent(), 1.5);
        assert!((c.eval_u(&[0.3, 0.4]) - 0.5f64.powf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn linear_x_example() {
        let c = ManufacturedCase::by_name("linear_x", 3, 2, -1.5).unwrap();
        assert_eq!(c.eval_u(&[0.25, 0.1, -0.3]), 0.5);
        assert_eq!(c.grad_u(&[0.25, 0.1, -0.3]), [2.0, 0.0, 0.0]);
    }

    #[test]
    fn quadratic_y_example() {
        let c = ManufacturedCase::by_name("quadratic_y", 2, 2, -1.5).unwrap();
        assert_eq!(c.source(&[0.3, 0.2]), -1.0);
        assert!((c.source_by_ad(&[0.3, 0.2]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn validity_violations_rejected() {
        assert!(ManufacturedCase::by_name("counterexample_F", 2, 2, -0.5).is_err());
        assert!(ManufacturedCase::by_name("linear_x", 2, 2, -1.5).is_err());
        assert!(ManufacturedCase::by_name("anisotropic", 3, 2, -1.5).is_err());
        assert!(ManufacturedCase::by_name("nope", 2, 2, -1.5).is_err());
    }

    #[test]
    fn catalog_passes_forcing_consistency() {
        for c in all_valid_cases() {
            let r = forcing_consistency(&c, 50);
            assert!(r.passed, "{} d={} n={} a={}: {r:?}", c.name(), c.d, c.n, c.a);
        }
    }

    #[test]
    fn wrong_forcing_flagged() {
        let c = ManufacturedCase::by_name("quadratic_y", 2, 2, -0.5).unwrap();
        assert_eq!(c.source(&[0.5, 0.5]), -3.0);
        let r = forcing_residual(&c, &|_| -1.0, 50, 1);
        assert!(!r.passed);
        // Residual equals 2 |y|^a at the sampled points; |y| >= 0.1 bounds it.
        assert!(r.max_residual >= 2.0 * 2f64.sqrt().powf(-0.5) * 0.99);
    }

    #[test]
    fn homogeneity_identity() {
        for a in [-0.5, -1.0, -1.5] {
            let c = ManufacturedCase::by_name("radial_homogeneous", 2, 2, a).unwrap();
            for z in [[0.3, -0.2], [0.7, 0.1], [-0.05, 0.4]] {
                let g = c.grad_u(&z);
                let lhs = g[0] * z[0] + g[1] * z[1];
                assert!((lhs - c.critical_exponent() * c.eval_u(&z)).abs() < 1e-12);
            }
        }
        let c = ManufacturedCase::by_name("anisotropic", 2, 2, -1.5).unwrap();
        let z = [0.3, -0.6];
        let g = c.grad_u(&z);
        assert!((g[0] * z[0] + g[1] * z[1] - 1.5 * c.eval_u(&z)).abs() < 1e-12);
    }

    #[test]
    fn gradient_behavior_near_sigma0_matches_regime() {
        let smooth = ManufacturedCase::by_name("radial_homogeneous", 2, 2, -1.5).unwrap();
        let rough = ManufacturedCase::by_name("radial_homogeneous", 2, 2, -0.5).unwrap();
        let mag = |c: &ManufacturedCase, r: f64| {
            let g = c.grad_u(&[r, 0.0]);
            (g[0] * g[0] + g[1] * g[1]).sqrt()
        };
        // |grad u| ~ |y|^{1-a-n}
        let ratio = mag(&smooth, 1e-4) / mag(&smooth, 1e-2);
        assert!((ratio - 0.01f64.powf(0.5)).abs() < 1e-10);
        assert!(mag(&rough, 1e-4) > mag(&rough, 1e-2));
        assert_eq!(smooth.regime(), Regime::C1Alpha);
        assert_eq!(rough.regime(), Regime::C0Alpha);
    }

    #[test]
    fn sampled_gradient_consistent_with_central_differences() {
        let c = ManufacturedCase::by_name("compliant_F", 3, 2, -1.5).unwrap();
        let g = build_grid(GridSpec::new(3, 2, 33)).unwrap();
        let f = case_fields(&c, &g).unwrap();
        let h = g.h;
        for i in 0..g.node_count() {
            if let (Some(l), Some(r)) = (g.neighbor(i, 0, -1), g.neighbor(i, 0, 1)) {
                let cd = (f.u[r] - f.u[l]) / (2.0 * h);
                assert!((cd - f.grad_u[i][0]).abs() < 1e-10 + 4.0 * h * h);
            }
        }
        for i in 0..g.node_count() {
            let z = g.node_coords(i);
            if z[1] == 0.0 && z[2] == 0.0 {
                assert_eq!(f.psi[i], 0.0);
                assert_eq!(f.u[i], f.psi[i]);
            }
            // Flux is tangential on y = 0.
            if z[1] == 0.0 && z[2] == 0.0 {
                assert_eq!(f.flux[i][1], 0.0);
                assert_eq!(f.flux[i][2], 0.0);
            }
        }
    }

    #[test]
    fn exact_error_of_exact_samples_is_roundoff() {
        let c = ManufacturedCase::by_name("quadratic_x", 3, 2, -1.5).unwrap();
        let g = build_grid(GridSpec::new(3, 2, 9)).unwrap();
        let q = Quadrature::new(WeightSpec::new(-1.5, 2, 3).unwrap(), QuadratureRule::default()).unwrap();
        let u = case_fields(&c, &g).unwrap().u;
        assert!(exact_error(&u, &c, &g, &q, ErrorNorm::LInfHalfBall) < 1e-15);
        let noise: Vec<f64> = (0..u.len()).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let h2 = g.h * g.h;
        let pert: Vec<f64> = u.iter().zip(&noise).map(|(u, n)| u + h2 * n).collect();
        let e = exact_error(&pert, &c, &g, &q, ErrorNorm::LInfHalfBall);
        assert!((e - h2).abs() < 1e-14);
    }
}
