//! Weighted quadrature for `|y|^a` (optionally times a composed factor
//! `delta~(z)^a`) on grid cells and their faces, plus weighted norms of Q1
//! fields.
//!
//! Regular cells use a tensor Gauss-Legendre rule. Cells whose y-projection
//! has a corner on `{y = 0}` are graded dyadically toward that corner; the
//! innermost corner cube is integrated with a Duffy pyramid map whose radial
//! direction carries the exact Gauss-Jacobi weight `u^{a+n-1}`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::geometry::{Grid, Point};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum WeightMode {
    Straight,
    /// `delta~(z)^a |y|^a`; the closure returns `delta~(z)`.
    Composed(ScalarFn),
}

impl fmt::Debug for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightMode::Straight => write!(f, "Straight"),
            WeightMode::Composed(_) => write!(f, "Composed(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightSpec {
    pub a: f64,
    pub n: usize,
    pub d: usize,
    pub mode: WeightMode,
}

impl WeightSpec {
    pub fn new(a: f64, n: usize, d: usize) -> Result<Self> {
        Self::with_mode(a, n, d, WeightMode::Straight)
    }

    pub fn with_mode(a: f64, n: usize, d: usize, mode: WeightMode) -> Result<Self> {
        if !a.is_finite() || !(a + (n as f64) > 0.0 && a + (n as f64) < 2.0) {
            return Err(LabError::InvalidWeight(format!(
                "a+n must lie in (0,2), got a = {a}, n = {n}"
            )));
        }
        if n < 2 || n > d || d > 3 {
            return Err(LabError::InvalidWeight(format!(
                "need 2 <= n <= d <= 3, got n = {n}, d = {d}"
            )));
        }
        Ok(Self { a, n, d, mode })
    }

    pub fn dx(&self) -> usize {
        self.d - self.n
    }

    /// Homogeneity degree `2 - a - n` of the model solution.
    pub fn critical_exponent(&self) -> f64 {
        2.0 - self.a - self.n as f64
    }

    pub fn y_norm(&self, z: &[f64]) -> f64 {
        z[self.dx()..self.d].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Extra factor multiplying `|y|^a` (1 in straight mode).
    pub fn composed_factor(&self, z: &[f64]) -> f64 {
        match &self.mode {
            WeightMode::Straight => 1.0,
            WeightMode::Composed(delta) => delta(z).powf(self.a),
        }
    }

    /// The weight at `z`; `|y| = 0` is a hard error.
    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        let r = self.y_norm(z);
        if r == 0.0 {
            return Err(LabError::SingularEvaluation);
        }
        Ok(r.powf(self.a) * self.composed_factor(z))
    }
}

pub fn weight_eval(w: &WeightSpec, z: &[f64]) -> Result<f64> {
    w.eval(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureRule {
    pub gauss_order: usize,
    pub grading_depth: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self {
            gauss_order: 3,
            grading_depth: 4,
        }
    }
}

/// Nodes and weights on `[0, 1]` for the weight `u^alpha`, alpha > -1, via
/// the Golub-Welsch eigenvalue method. Weights sum to `1 / (alpha + 1)`.
pub fn gauss_jacobi_unit(order: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1 && alpha > -1.0);
    // Jacobi weight (1-x)^0 (1+x)^alpha on [-1, 1], mapped by u = (x+1)/2.
    let (aj, bj) = (0.0f64, alpha);
    let s = aj + bj;
    let mut t = DMatrix::<f64>::zeros(order, order);
    for k in 0..order {
        let kf = k as f64;
        t[(k, k)] = if k == 0 {
            (bj - aj) / (s + 2.0)
        } else {
            (bj * bj - aj * aj) / ((2.0 * kf + s) * (2.0 * kf + s + 2.0))
        };
        if k + 1 < order {
            let m = kf + 1.0;
            let num = 4.0 * m * (m + aj) * (m + bj) * (m + s);
            let den = (2.0 * m + s).powi(2) * (2.0 * m + s + 1.0) * (2.0 * m + s - 1.0);
            let b = (num / den).sqrt();
            t[(k, k + 1)] = b;
            t[(k + 1, k)] = b;
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            ((eig.eigenvalues[i] + 1.0) * 0.5, v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mass = 1.0 / (alpha + 1.0);
    let nodes = pairs.iter().map(|p| p.0).collect();
    let weights = pairs.iter().map(|p| p.1 / total * mass).collect();
    (nodes, weights)
}

/// Gauss-Legendre on `[0, 1]`.
pub fn gauss_legendre_unit(order: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi_unit(order, 0.0)
}

/// Reference rule on the unit y-cube `[0,1]^n` with corner at the origin.
/// Weights already include `|t|^a`.
#[derive(Debug, Clone)]
struct CornerRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

fn tensor_points(n: usize, nodes: &[f64], weights: &[f64]) -> Vec<([f64; 3], f64)> {
    let g = nodes.len();
    let total = g.pow(n as u32);
    (0..total)
        .map(|idx| {
            let mut p = [0.0; 3];
            let mut w = 1.0;
            let mut rem = idx;
            for item in p.iter_mut().take(n) {
                let j = rem % g;
                rem /= g;
                *item = nodes[j];
                w *= weights[j];
            }
            (p, w)
        })
        .collect()
}

fn build_corner_rule(a: f64, n: usize, rule: QuadratureRule) -> CornerRule {
    let g = rule.gauss_order;
    let (gl_x, gl_w) = gauss_legendre_unit(g);
    let unit = tensor_points(n, &gl_x, &gl_w);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let norm = |p: &[f64; 3]| p[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut side = 1.0;
    for _ in 0..rule.grading_depth {
        let half = 0.5 * side;
        // 2^n - 1 sub-cubes not containing the corner.
        for sub in 1..(1usize << n) {
            for (q, w) in &unit {
                let mut p = [0.0; 3];
                for k in 0..n {
                    let off = if sub >> k & 1 == 1 { half } else { 0.0 };
                    p[k] = off + half * q[k];
                }
                points.push(p);
                weights.push(w * half.powi(n as i32) * norm(&p).powf(a));
            }
        }
        side = half;
    }
    // Terminal corner cube [0, side]^n: Duffy pyramids, one per axis holding
    // the maximum coordinate. t_k = u, t_j = u v_j; dt = u^{n-1} du dv.
    let (gj_x, gj_w) = gauss_jacobi_unit(g, a + n as f64 - 1.0);
    let vrule = tensor_points(n - 1, &gl_x, &gl_w);
    for k in 0..n {
        for (ui, &u) in gj_x.iter().enumerate() {
            for (v, wv) in &vrule {
                let mut p = [0.0; 3];
                let mut vv = 0.0;
                let mut j = 0;
                for (axis, item) in p.iter_mut().enumerate().take(n) {
                    if axis == k {
                        *item = u;
                    } else {
                        *item = u * v[j];
                        vv += v[j] * v[j];
                        j += 1;
                    }
                }
                // |t|^a u^{n-1} = u^{a+n-1} (1+|v|^2)^{a/2}; the u-power is in gj_w.
                let w = gj_w[ui] * wv * (1.0 + vv).powf(0.5 * a);
                for item in p.iter_mut().take(n) {
                    *item *= side;
                }
                points.push(p);
                weights.push(w * side.powf(a + n as f64));
            }
        }
    }
    CornerRule { points, weights }
}

/// A weighted quadrature plan for one weight and rule.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub weight: WeightSpec,
    pub rule: QuadratureRule,
    gl_x: Vec<f64>,
    gl_w: Vec<f64>,
    corner: CornerRule,
}

impl Quadrature {
    pub fn new(weight: WeightSpec, rule: QuadratureRule) -> Result<Self> {
        if rule.gauss_order == 0 || rule.gauss_order > 20 {
            return Err(LabError::InvalidProblem(format!(
                "gauss order {} outside 1..=20",
                rule.gauss_order
            )));
        }
        if rule.grading_depth > 30 {
            return Err(LabError::InvalidProblem(format!(
                "grading depth {} too large",
                rule.grading_depth
            )));
        }
        let (gl_x, gl_w) = gauss_legendre_unit(rule.gauss_order);
        let corner = build_corner_rule(weight.a, weight.n, rule);
        Ok(Self {
            weight,
            rule,
            gl_x,
            gl_w,
            corner,
        })
    }

    pub fn d(&self) -> usize {
        self.weight.d
    }

    /// Calls `f(z, omega)` for each point of the rule on the axis-aligned box
    /// `lo + [0, ext]`, where `omega` approximates `w(z) dz`. Axes with
    /// `ext = 0` are collapsed (faces); the measure is then the surface
    /// measure of the face.
    pub fn for_each_weighted_point(&self, lo: &[f64], ext: &[f64], mut f: impl FnMut(&Point, f64)) {
        let d = self.d();
        let dx = self.weight.dx();
        let a = self.weight.a;
        let active: Vec<usize> = (0..d).filter(|&k| ext[k] > 0.0).collect();
        let y_all_active = (dx..d).all(|k| ext[k] > 0.0);
        let tol = 1e-12 * ext.iter().fold(0.0f64, |m, &e| m.max(e)).max(1e-300);
        let y_corner = y_all_active
            && (dx..d).all(|k| lo[k].abs() <= tol || (lo[k] + ext[k]).abs() <= tol);
        let g = self.gl_x.len();
        let x_active: Vec<usize> = active.iter().copied().filter(|&k| k < dx).collect();
        let x_count = g.pow(x_active.len() as u32);

        let emit = |z: &Point, omega: f64, f: &mut dyn FnMut(&Point, f64)| {
            let omega = match self.weight.mode {
                WeightMode::Straight => omega,
                WeightMode::Composed(_) => omega * self.weight.composed_factor(&z[..d]),
            };
            f(z, omega);
        };

        if y_corner {
            // y-sub-box is a cube of side s with a corner at y = 0; its
            // orientation per axis is recorded by `sign`.
            let s = ext[dx];
            let mut sign = [1.0; 3];
            for k in dx..d {
                if (lo[k] + ext[k]).abs() <= tol && lo[k].abs() > tol {
                    sign[k] = -1.0;
                }
            }
            let y_scale = s.powf(a + self.weight.n as f64);
            for xi in 0..x_count {
                let mut z = [0.0; 3];
                let mut wx = 1.0;
                let mut rem = xi;
                for k in 0..dx {
                    if ext[k] > 0.0 {
                        let j = rem % g;
                        rem /= g;
                        z[k] = lo[k] + ext[k] * self.gl_x[j];
                        wx *= ext[k] * self.gl_w[j];
                    } else {
                        z[k] = lo[k];
                    }
                }
                for (p, &w) in self.corner.points.iter().zip(&self.corner.weights) {
                    for k in dx..d {
                        z[k] = sign[k] * s * p[k - dx];
                    }
                    emit(&z, wx * w * y_scale, &mut f);
                }
            }
            return;
        }

        let total = g.pow(active.len() as u32);
        for idx in 0..total {
            let mut z = [0.0; 3];
            let mut w = 1.0;
            let mut rem = idx;
            for k in 0..d {
                if ext[k] > 0.0 {
                    let j = rem % g;
                    rem /= g;
                    z[k] = lo[k] + ext[k] * self.gl_x[j];
                    w *= ext[k] * self.gl_w[j];
                } else {
                    z[k] = lo[k];
                }
            }
            let r = self.weight.y_norm(&z[..d]);
            debug_assert!(r > 0.0, "quadrature point on the singular set");
            emit(&z, w * r.powf(a), &mut f);
        }
    }

    /// Visits the quadrature points of grid cell `cell`.
    pub fn for_each_cell_point(&self, grid: &Grid, cell: usize, f: impl FnMut(&Point, f64)) {
        let lo = grid.cell_lo(cell);
        let ext = [grid.h; 3];
        self.for_each_weighted_point(&lo[..grid.d()], &ext[..grid.d()], f);
    }

    /// `int_cell w(z) g(z) dz`.
    pub fn element_weighted_integral(&self, grid: &Grid, cell: usize, integrand: impl Fn(&[f64]) -> f64) -> f64 {
        let d = grid.d();
        let mut acc = 0.0;
        self.for_each_cell_point(grid, cell, |z, w| acc += w * integrand(&z[..d]));
        acc
    }

    /// Sum of cell integrals over all cells, in cell order.
    pub fn grid_weighted_integral(&self, grid: &Grid, integrand: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        let parts: Vec<f64> = (0..grid.cell_count())
            .into_par_iter()
            .map(|c| self.element_weighted_integral(grid, c, &integrand))
            .collect();
        parts.iter().sum()
    }
}

pub fn element_weighted_integral(
    quad: &Quadrature,
    grid: &Grid,
    cell: usize,
    integrand: impl Fn(&[f64]) -> f64,
) -> f64 {
    quad.element_weighted_integral(grid, cell, integrand)
}

/// Q1 value and gradient on a cell of side `h` at local coordinates `xi`.
/// `vals[c]` is the value at corner `c` (bit k = offset along axis k).
pub fn q1_eval(d: usize, vals: &[f64], xi: &[f64], h: f64) -> (f64, [f64; 3]) {
    let mut u = 0.0;
    let mut grad = [0.0; 3];
    for (c, &v) in vals.iter().enumerate().take(1 << d) {
        let mut phi = 1.0;
        let mut dphi = [1.0; 3];
        for k in 0..d {
            let on = c >> k & 1 == 1;
            let fk = if on { xi[k] } else { 1.0 - xi[k] };
            let dk = if on { 1.0 / h } else { -1.0 / h };
            phi *= fk;
            for (m, item) in dphi.iter_mut().enumerate().take(d) {
                *item *= if m == k { dk } else { fk };
            }
        }
        u += v * phi;
        for k in 0..d {
            grad[k] += v * dphi[k];
        }
    }
    (u, grad)
}

/// Local coordinates of `z` in the cell with lower corner `lo`.
pub fn local_coords(z: &[f64], lo: &[f64], h: f64, d: usize) -> [f64; 3] {
    let mut xi = [0.0; 3];
    for k in 0..d {
        xi[k] = (z[k] - lo[k]) / h;
    }
    xi
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    All,
    Ball { radius: f64 },
    Cube { half_width: f64 },
}

impl Region {
    pub fn contains(&self, z: &[f64]) -> bool {
        match *self {
            Region::All => true,
            Region::Ball { radius } => z.iter().map(|v| v * v).sum::<f64>() < radius * radius,
            Region::Cube { half_width } => z.iter().all(|v| v.abs() <= half_width),
        }
    }

    /// False only when the cell certainly misses the region.
    pub fn may_touch_cell(&self, grid: &Grid, cell: usize) -> bool {
        let lo = grid.cell_lo(cell);
        let d = grid.d();
        match *self {
            Region::All => true,
            Region::Ball { radius } => {
                let dist2: f64 = (0..d)
                    .map(|k| {
                        let (a, b) = (lo[k], lo[k] + grid.h);
                        let c = 0.0f64.clamp(a, b);
                        c * c
                    })
                    .sum();
                dist2 < radius * radius
            }
            Region::Cube { half_width } => {
                (0..d).all(|k| lo[k] <= half_width && lo[k] + grid.h >= -half_width)
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Region::All => "grid".into(),
            Region::Ball { radius } => format!("ball(r={radius})"),
            Region::Cube { half_width } => format!("cube(h={half_width})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormId {
    Lp,
    H1,
    LInf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormValue {
    pub value: f64,
    pub norm: NormId,
    pub p: f64,
    pub region: Region,
}

impl NormValue {
    pub fn csv_row(&self) -> String {
        let id = match self.norm {
            NormId::Lp => format!("L{},a", self.p),
            NormId::H1 => "H1,a".into(),
            NormId::LInf => "Linf".into(),
        };
        format!("\"{id}\",{},{}", self.region.describe(), self.value)
    }
}

/// Integrates a functional of the Q1 interpolant `(z, u, grad u) -> value`
/// against the weight over the region, summing cells in index order.
pub fn integrate_field(
    quad: &Quadrature,
    grid: &Grid,
    field: &[f64],
    region: Region,
    integrand: impl Fn(&[f64], f64, &[f64; 3]) -> f64 + Sync,
) -> f64 {
    let d = grid.d();
    let h = grid.h;
    let parts: Vec<f64> = (0..grid.cell_count())
        .into_par_iter()
        .map(|c| {
            if !region.may_touch_cell(grid, c) {
                return 0.0;
            }
            let nodes = grid.cell_nodes(c);
            let mut vals = [0.0; 8];
            for k in 0..(1 << d) {
                vals[k] = field[nodes[k]];
            }
            let lo = grid.cell_lo(c);
            let mut acc = 0.0;
            quad.for_each_cell_point(grid, c, |z, w| {
                if region.contains(&z[..d]) {
                    let xi = local_coords(z, &lo, h, d);
                    let (u, g) = q1_eval(d, &vals, &xi, h);
                    acc += w * integrand(&z[..d], u, &g);
                }
            });
            acc
        })
        .collect();
    parts.iter().sum()
}

pub fn weighted_lp_norm(quad: &Quadrature, grid: &Grid, field: &[f64], p: f64, region: Region) -> Result<NormValue> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(LabError::InvalidProblem(format!("p = {p} must lie in [1, inf)")));
    }
    let s = integrate_field(quad, grid, field, region, |_, u, _| u.abs().powf(p));
    Ok(NormValue {
        value: s.max(0.0).powf(1.0 / p),
        norm: NormId::Lp,
        p,
        region,
    })
}

pub fn weighted_h1_norm(quad: &Quadrature, grid: &Grid, field: &[f64], region: Region) -> NormValue {
    let d = grid.d();
    let s = integrate_field(quad, grid, field, region, |_, u, g| {
        u * u + g[..d].iter().map(|v| v * v).sum::<f64>()
    });
    NormValue {
        value: s.max(0.0).sqrt(),
        norm: NormId::H1,
        p: 2.0,
        region,
    }
}

/// Weighted Dirichlet seminorm `(int w |grad u|^2)^{1/2}`.
pub fn weighted_gradient_seminorm(quad: &Quadrature, grid: &Grid, field: &[f64], region: Region) -> f64 {
    let d = grid.d();
    integrate_field(quad, grid, field, region, |_, _, g| {
        g[..d].iter().map(|v| v * v).sum::<f64>()
    })
    .max(0.0)
    .sqrt()
}

/// Nodal maximum of `|field|` over nodes in the region.
pub fn linf_norm(grid: &Grid, field: &[f64], region: Region) -> NormValue {
    let d = grid.d();
    let value = (0..grid.node_count())
        .filter(|&i| region.contains(&grid.node_coords(i)[..d]))
        .map(|i| field[i].abs())
        .fold(0.0, f64::max);
    NormValue {
        value,
        norm: NormId::LInf,
        p: f64::INFINITY,
        region,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SobolevExponent {
    Finite(f64),
    /// Any `p` in `[1, inf)` is allowed (d = 2).
    AnyP,
}

pub fn sobolev_exponent(d: usize) -> Result<SobolevExponent> {
    match d {
        0 | 1 => Err(LabError::InvalidProblem(format!("d = {d} must be >= 2"))),
        2 => Ok(SobolevExponent::AnyP),
        _ => Ok(SobolevExponent::Finite(2.0 * d as f64 / (d as f64 - 2.0))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, GridSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn quad(a: f64, n: usize, d: usize) -> Quadrature {
        Quadrature::new(WeightSpec::new(a, n, d).unwrap(), QuadratureRule::default()).unwrap()
    }

    #[test]
    fn weight_examples() {
        let w = WeightSpec::new(-1.5, 2, 2).unwrap();
        assert!((w.eval(&[0.5, 0.0]).unwrap() - 2.828427124746190).abs() < 1e-12);
        let w = WeightSpec::new(-0.5, 2, 2).unwrap();
        assert_eq!(w.eval(&[0.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(w.eval(&[0.0, 0.0]), Err(LabError::SingularEvaluation)));
    }

    #[test]
    fn composed_unit_factor_matches_straight() {
        let s = WeightSpec::new(-1.5, 2, 3).unwrap();
        let c = WeightSpec::with_mode(-1.5, 2, 3, WeightMode::Composed(Arc::new(|_| 1.0))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert_eq!(s.eval(&z).unwrap(), c.eval(&z).unwrap());
        }
    }

    #[test]
    fn weight_rejects_out_of_range_exponent() {
        assert!(WeightSpec::new(-2.5, 2, 2).is_err());
        assert!(WeightSpec::new(0.0, 2, 2).is_err());
        assert!(WeightSpec::new(-1.5, 3, 3).is_ok());
    }

    #[test]
    fn gauss_jacobi_integrates_monomials() {
        for &alpha in &[-0.5, 0.0, 0.5, -0.9] {
            let (x, w) = gauss_jacobi_unit(4, alpha);
            for p in 0..8 {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
                let exact = 1.0 / (alpha + p as f64 + 1.0);
                assert!((q - exact).abs() < 1e-12, "alpha {alpha} p {p}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn corner_cell_integrates_weight_exactly() {
        // int_{[0,1]^2} |y|^a dy via polar coordinates in each half triangle.
        let q = quad(-1.5, 2, 2);
        let mut s = 0.0;
        q.for_each_weighted_point(&[0.0, 0.0], &[1.0, 1.0], |_, w| s += w);
        // 2 int_0^{pi/4} int_0^{sec t} r^{a+1} dr dt, a = -1.5
        let n = 20000;
        let mut exact = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64 * PI / 4.0;
            exact += (1.0 / t.cos()).powf(0.5) / 0.5;
        }
        exact *= 2.0 * PI / 4.0 / n as f64;
        assert!((s - exact).abs() < 1e-4 * exact, "{s} vs {exact}");
        let fine = Quadrature::new(
            WeightSpec::new(-1.5, 2, 2).unwrap(),
            QuadratureRule { gauss_order: 10, grading_depth: 12 },
        )
        .unwrap();
        let mut s = 0.0;
        fine.for_each_weighted_point(&[0.0, 0.0], &[1.0, 1.0], |_, w| s += w);
        assert!((s - exact).abs() < 1e-8 * exact, "{s} vs {exact}");
    }

    #[test]
    fn disk_integrals_within_one_percent() {
        let g = build_grid(GridSpec::new(2, 2, 129)).unwrap();
        let ball = Region::Ball { radius: 1.0 };
        let q = quad(-0.5, 2, 2);
        let i1 = q.grid_weighted_integral(&g, |z| if ball.contains(z) { 1.0 } else { 0.0 });
        assert!((i1 / (4.0 * PI / 3.0) - 1.0).abs() < 0.01, "{i1}");
        let q = quad(-1.5, 2, 2);
        let i2 = q.grid_weighted_integral(&g, |z| {
            if ball.contains(z) {
                (z[0] * z[0] + z[1] * z[1]).powf(1.5)
            } else {
                0.0
            }
        });
        assert!((i2 / (4.0 * PI / 7.0) - 1.0).abs() < 0.01, "{i2}");
        assert_eq!(q.grid_weighted_integral(&g, |_| 0.0), 0.0);
    }

    #[test]
    fn lp_norm_examples() {
        let g = build_grid(GridSpec::new(2, 2, 129)).unwrap();
        let q = quad(-1.5, 2, 2);
        let ball = Region::Ball { radius: 1.0 };
        let u = g.sample(|z| (z[0] * z[0] + z[1] * z[1]).powf(0.75));
        let nv = weighted_lp_norm(&q, &g, &u, 2.0, ball).unwrap();
        assert!((nv.value / (4.0 * PI / 7.0).sqrt() - 1.0).abs() < 0.01, "{}", nv.value);
        let zero = vec![0.0; g.node_count()];
        assert_eq!(weighted_lp_norm(&q, &g, &zero, 2.0, ball).unwrap().value, 0.0);
        let c = vec![-3.0; g.node_count()];
        let vol = q.grid_weighted_integral(&g, |z| if ball.contains(z) { 1.0 } else { 0.0 });
        let nc = weighted_lp_norm(&q, &g, &c, 2.0, ball).unwrap().value;
        assert!((nc - 3.0 * vol.sqrt()).abs() < 1e-10 * nc);
    }

    #[test]
    fn x_polynomials_integrated_exactly_in_three_d() {
        let g = build_grid(GridSpec::new(3, 2, 5)).unwrap();
        let q = quad(-1.0, 2, 3);
        let cell = 0;
        let lo = g.cell_lo(cell);
        let with_x4 = q.element_weighted_integral(&g, cell, |z| z[0].powi(4));
        let plain = q.element_weighted_integral(&g, cell, |_| 1.0);
        let (x0, x1) = (lo[0], lo[0] + g.h);
        let mean_x4 = (x1.powi(5) - x0.powi(5)) / 5.0 / g.h;
        assert!((with_x4 - plain * mean_x4).abs() < 1e-12 * plain.abs().max(1.0));
    }

    #[test]
    fn grading_corrections_decay_geometrically() {
        for &a in &[-0.5, -1.5] {
            let values: Vec<f64> = (1..=6)
                .map(|m| {
                    let q = Quadrature::new(
                        WeightSpec::new(a, 2, 2).unwrap(),
                        QuadratureRule { gauss_order: 3, grading_depth: m },
                    )
                    .unwrap();
                    let mut s = 0.0;
                    q.for_each_weighted_point(&[0.0, 0.0], &[0.25, 0.25], |z, w| {
                        s += w * (z[0] * z[0] + z[1] * z[1]).powf(0.25)
                    });
                    s
                })
                .collect();
            let corr: Vec<f64> = values.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
            for c in corr.windows(2) {
                assert!(c[1] < 0.7 * c[0], "a = {a}: corrections {corr:?}");
            }
        }
    }

    #[test]
    fn sobolev_exponents() {
        assert_eq!(sobolev_exponent(3).unwrap(), SobolevExponent::Finite(6.0));
        assert_eq!(sobolev_exponent(4).unwrap(), SobolevExponent::Finite(4.0));
        assert_eq!(sobolev_exponent(2).unwrap(), SobolevExponent::AnyP);
    }

    #[test]
    fn face_measure_is_surface_area() {
        // The face x = -1 of [-1,1]^3 with a = -1, n = 2: int_{[-1,1]^2} |y|^{-1} dy.
        let q = quad(-1.0, 2, 3);
        let mut s = 0.0;
        for (ylo, zlo) in [(-1.0, -1.0), (-1.0, 0.0), (0.0, -1.0), (0.0, 0.0)] {
            q.for_each_weighted_point(&[-1.0, ylo, zlo], &[0.0, 1.0, 1.0], |_, w| s += w);
        }
        // 8 int_0^{pi/4} sec(t) dt = 8 ln(1 + sqrt 2)
        let exact = 8.0 * (1.0 + 2f64.sqrt()).ln();
        assert!((s - exact).abs() < 1e-4 * exact, "{s} vs {exact}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rule_points_avoid_sigma0_and_weights_positive(a in -1.9f64..-0.1, cell in 0usize..64) {
                let g = build_grid(GridSpec::new(2, 2, 9)).unwrap();
                let q = quad(a, 2, 2);
                q.for_each_cell_point(&g, cell, |z, w| {
                    assert!(z[0] != 0.0 || z[1] != 0.0);
                    assert!(w > 0.0);
                });
            }

            #[test]
            fn integral_is_linear(s in -3.0f64..3.0, t in -3.0f64..3.0, cell in 0usize..64) {
                let g = build_grid(GridSpec::new(2, 2, 9)).unwrap();
                let q = quad(-1.2, 2, 2);
                let f1 = |z: &[f64]| z[0].sin() + z[1];
                let f2 = |z: &[f64]| (z[0] * z[1]).exp();
                let lhs = q.element_weighted_integral(&g, cell, |z| s * f1(z) + t * f2(z));
                let rhs = s * q.element_weighted_integral(&g, cell, f1)
                    + t * q.element_weighted_integral(&g, cell, f2);
                prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            }

            #[test]
            fn norms_are_homogeneous(s in -4.0f64..4.0) {
                let g = build_grid(GridSpec::new(2, 2, 9)).unwrap();
                let q = quad(-0.7, 2, 2);
                let u = g.sample(|z| z[0] * z[0] - z[1]);
                let su: Vec<f64> = u.iter().map(|v| s * v).collect();
                let n1 = weighted_h1_norm(&q, &g, &u, Region::All).value;
                let n2 = weighted_h1_norm(&q, &g, &su, Region::All).value;
                prop_assert!(n2 >= 0.0);
                prop_assert!((n2 - s.abs() * n1).abs() <= 1e-10 * (1.0 + n2));
                let l1 = weighted_lp_norm(&q, &g, &u, 3.0, Region::All).unwrap().value;
                let l2 = weighted_lp_norm(&q, &g, &su, 3.0, Region::All).unwrap().value;
                prop_assert!((l2 - s.abs() * l1).abs() <= 1e-10 * (1.0 + l2));
            }
        }
    }
}
