//! Graph manifolds `Gamma = {y = phi(x)}`, the straightening map
//! `Phi(x, y) = (x, y + phi(x))`, admissible weights and the transfer of
//! curved problems to the straight model.
//!
//! With `2 <= n < d <= 3` the only curved configuration is `d = 3, n = 2`, so
//! `Gamma` is a curve parametrized by `x_1`; the registry graphs only move
//! the first `y` component.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{CoefficientField, ProblemSpec};
use crate::error::{LabError, Result};
use crate::geometry::{build_grid, Grid, GridSpec, Point};
use crate::jet::{forcing_from_fields, Jet, Real};
use crate::linalg::{self, Mat};
use crate::quadrature::{local_coords, q1_eval, Region, WeightMode, WeightSpec};
use crate::regularity::cell_center_gradients;

#[derive(Debug, Clone, PartialEq)]
pub enum GraphKind {
    Zero,
    /// `phi_1(x) = amplitude * sin(frequency * x_1)`.
    Sine { amplitude: f64, frequency: f64 },
    /// `phi_1(x) = sum_k coeffs[k] * x_1^{k+1}`.
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HolderClass {
    C1,
    C1Alpha(f64),
}

pub const GRAPH_NAMES: [&str; 3] = ["zero", "sine", "polynomial"];

#[derive(Debug, Clone, PartialEq)]
pub struct Parametrization {
    pub kind: GraphKind,
    pub d: usize,
    pub n: usize,
    pub class: HolderClass,
}

impl Parametrization {
    pub fn new(kind: GraphKind, d: usize, n: usize) -> Result<Self> {
        if !(n >= 2 && n < d && d <= 3) {
            return Err(LabError::InvalidProblem(format!(
                "curved mode needs 2 <= n < d <= 3, got n = {n}, d = {d}"
            )));
        }
        let ok = match &kind {
            GraphKind::Zero => true,
            GraphKind::Sine { amplitude, frequency } => amplitude.is_finite() && frequency.is_finite(),
            GraphKind::Polynomial { coeffs } => coeffs.iter().all(|c| c.is_finite()),
        };
        if !ok {
            return Err(LabError::InvalidProblem("graph parameters must be finite".into()));
        }
        // Smooth registry graphs are C^{1,1}; report them as C^{1,alpha}
        // with alpha = 1.
        Ok(Self {
            kind,
            d,
            n,
            class: HolderClass::C1Alpha(1.0),
        })
    }

    /// Registry lookup: `zero`, `sine [amplitude, frequency]`,
    /// `polynomial [c1, c2, ...]`.
    pub fn by_name(name: &str, params: &[f64], d: usize, n: usize) -> Result<Self> {
        let kind = match name {
            "zero" => GraphKind::Zero,
            "sine" => {
                let amplitude = params.first().copied().unwrap_or(0.2);
                let frequency = params.get(1).copied().unwrap_or(1.0);
                GraphKind::Sine { amplitude, frequency }
            }
            "polynomial" => GraphKind::Polynomial { coeffs: params.to_vec() },
            other => {
                return Err(LabError::InvalidProblem(format!(
                    "unknown graph '{other}', expected one of {GRAPH_NAMES:?}"
                )))
            }
        };
        Self::new(kind, d, n)
    }

    pub fn dx(&self) -> usize {
        self.d - self.n
    }

    /// First component of `phi` as a function of `x_1`.
    pub fn phi1<T: Real>(&self, x: T) -> T {
        match &self.kind {
            GraphKind::Zero => T::c(0.0),
            GraphKind::Sine { amplitude, frequency } => T::c(*amplitude) * (T::c(*frequency) * x).sin(),
            GraphKind::Polynomial { coeffs } => {
                let mut acc = T::c(0.0);
                for c in coeffs.iter().rev() {
                    acc = (acc + T::c(*c)) * x;
                }
                acc
            }
        }
    }

    /// `d phi_1 / d x_1`.
    pub fn dphi1<T: Real>(&self, x: T) -> T {
        match &self.kind {
            GraphKind::Zero => T::c(0.0),
            GraphKind::Sine { amplitude, frequency } => {
                T::c(amplitude * frequency) * (T::c(*frequency) * x).cos()
            }
            GraphKind::Polynomial { coeffs } => {
                let mut acc = T::c(0.0);
                for (k, c) in coeffs.iter().enumerate().rev() {
                    acc = acc * x + T::c((k + 1) as f64 * c);
                }
                acc
            }
        }
    }

    /// `J_phi(x)` as an `n x (d-n)` block stored in a 3x3 matrix.
    pub fn jacobian(&self, x: &[f64]) -> Mat {
        let mut j = linalg::ZERO;
        j[0][0] = self.dphi1(x[0]);
        j
    }
}

/// `Phi(x, y) = (x, y + phi(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Straightening {
    pub param: Parametrization,
}

impl Straightening {
    pub fn new(param: Parametrization) -> Self {
        Self { param }
    }

    pub fn forward(&self, z: &[f64]) -> Point {
        let dx = self.param.dx();
        let mut out = [0.0; 3];
        out[..self.param.d].copy_from_slice(&z[..self.param.d]);
        out[dx] += self.param.phi1(z[0]);
        out
    }

    pub fn inverse(&self, z: &[f64]) -> Point {
        let dx = self.param.dx();
        let mut out = [0.0; 3];
        out[..self.param.d].copy_from_slice(&z[..self.param.d]);
        out[dx] -= self.param.phi1(z[0]);
        out
    }

    /// Block lower-triangular `J_Phi` with identity diagonal blocks.
    pub fn jacobian(&self, z: &[f64]) -> Mat {
        let mut j = linalg::identity(self.param.d);
        j[self.param.dx()][0] = self.param.dphi1(z[0]);
        j
    }

    pub fn inverse_jacobian(&self, z: &[f64]) -> Mat {
        let mut j = linalg::identity(self.param.d);
        j[self.param.dx()][0] = -self.param.dphi1(z[0]);
        j
    }

    /// Determinant of the block-triangular Jacobian: the product of its
    /// (unit) diagonal.
    pub fn det_jacobian(&self, z: &[f64]) -> f64 {
        let j = self.jacobian(z);
        (0..self.param.d).map(|k| j[k][k]).product()
    }
}

/// `J^{-1} A J^{-T}` with `J^{-1} = I - p E_{dx,0}`, generic over scalars so
/// the forcing of curved manufactured cases can be differentiated.
pub fn straight_coefficient<T: Real>(d: usize, dx: usize, a: &[[T; 3]; 3], p: T) -> [[T; 3]; 3] {
    let zero = T::c(0.0);
    let mut jinv = [[zero; 3]; 3];
    for (k, row) in jinv.iter_mut().enumerate().take(d) {
        row[k] = T::c(1.0);
    }
    jinv[dx][0] = -p;
    let mut tmp = [[zero; 3]; 3];
    for i in 0..d {
        for j in 0..d {
            let mut s = zero;
            for k in 0..d {
                s = s + jinv[i][k] * a[k][j];
            }
            tmp[i][j] = s;
        }
    }
    let mut out = [[zero; 3]; 3];
    for i in 0..d {
        for j in 0..d {
            let mut s = zero;
            for k in 0..d {
                s = s + tmp[i][k] * jinv[j][k];
            }
            out[i][j] = s;
        }
    }
    out
}

/// Nearest point of `Gamma` to `z` found by sampling the parameter window
/// `[x_1 - R, x_1 + R]` with `R = |y - phi(x)|` and golden-section refinement.
/// Returns `(distance, parameter)`.
pub fn nearest_on_graph(param: &Parametrization, z: &[f64]) -> (f64, f64) {
    let dx = param.dx();
    let d = param.d;
    let dist2 = |t: f64| {
        let mut s = (z[0] - t) * (z[0] - t);
        for k in 1..dx {
            s += z[k] * z[k];
        }
        for k in dx..d {
            let g = if k == dx { param.phi1(t) } else { 0.0 };
            s += (z[k] - g) * (z[k] - g);
        }
        s
    };
    let r = dist2(z[0]).sqrt();
    if r == 0.0 {
        return (0.0, z[0]);
    }
    let m = 32;
    let (lo, hi) = (z[0] - r, z[0] + r);
    let step = (hi - lo) / m as f64;
    let mut best = (dist2(z[0]), z[0]);
    for i in 0..=m {
        let t = lo + i as f64 * step;
        let v = dist2(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    for _ in 0..80 {
        if dist2(c) < dist2(e) {
            b = e;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        e = a + g * (b - a);
    }
    let t = 0.5 * (a + b);
    let v = dist2(t);
    if v < best.0 {
        best = (v, t);
    }
    (best.0.sqrt(), best.1)
}

pub const BRUTE_FORCE_SAMPLES: usize = 10_000;

/// Oracle distance to `Gamma`: exhaustive sampling of parameters in
/// `[t_lo, t_hi]`, then bisection of the derivative inside the bracket
/// around the best sample.
pub fn distance_brute_force(param: &Parametrization, z: &[f64], t_lo: f64, t_hi: f64) -> f64 {
    let dx = param.dx();
    let dist2 = |t: f64| {
        let mut s = (z[0] - t) * (z[0] - t);
        for k in 1..dx {
            s += z[k] * z[k];
        }
        for k in dx..param.d {
            let g = if k == dx { param.phi1(t) } else { 0.0 };
            s += (z[k] - g) * (z[k] - g);
        }
        s
    };
    let step = (t_hi - t_lo) / (BRUTE_FORCE_SAMPLES - 1) as f64;
    let (mut best, mut tb) = (f64::INFINITY, t_lo);
    for i in 0..BRUTE_FORCE_SAMPLES {
        let t = t_lo + i as f64 * step;
        let v = dist2(t);
        if v < best {
            (best, tb) = (v, t);
        }
    }
    let slope = |t: f64| dist2(t + 1e-3 * step) - dist2(t - 1e-3 * step);
    let (mut a, mut b) = (tb - step, tb + step);
    if slope(a) < 0.0 && slope(b) > 0.0 {
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if slope(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        best = best.min(dist2(0.5 * (a + b)));
    }
    best.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdmissibleWeight {
    /// `|y - phi(x)|`, for which `delta~ = 1`.
    Vertical,
    /// Euclidean distance to `Gamma`.
    Distance,
    Scaled(f64, Box<AdmissibleWeight>),
}

impl AdmissibleWeight {
    pub fn eval(&self, param: &Parametrization, z: &[f64]) -> f64 {
        match self {
            AdmissibleWeight::Vertical => {
                let dx = param.dx();
                let mut s = 0.0;
                for k in dx..param.d {
                    let g = if k == dx { param.phi1(z[0]) } else { 0.0 };
                    s += (z[k] - g) * (z[k] - g);
                }
                s.sqrt()
            }
            AdmissibleWeight::Distance => nearest_on_graph(param, z).0,
            AdmissibleWeight::Scaled(c, inner) => c * inner.eval(param, z),
        }
    }

    /// `delta~(x, y) = delta(Phi(x, y)) / |y|` in straight coordinates.
    pub fn tilde(&self, param: &Parametrization, z: &[f64]) -> f64 {
        match self {
            AdmissibleWeight::Vertical => 1.0,
            AdmissibleWeight::Scaled(c, inner) => c * inner.tilde(param, z),
            AdmissibleWeight::Distance => {
                let r = z[param.dx()..param.d].iter().map(|v| v * v).sum::<f64>().sqrt();
                let p = Straightening::new(param.clone()).forward(z);
                self.eval(param, &p[..param.d]) / r
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub c0: f64,
    pub c1: f64,
    pub alpha: f64,
    /// Largest sampled `|delta~(p) - delta~(q)| / |p - q|^alpha`.
    pub holder_quotient: f64,
    pub samples: usize,
    pub admissible: bool,
}

pub const HOLDER_PAIRS: usize = 2000;

/// Ratio bounds of `delta / dist_Gamma` on the nodes of `sample_grid` with
/// `dist_Gamma > 1e-6`, plus a sampled Hölder quotient of `delta~`.
pub fn admissibility_check(
    param: &Parametrization,
    delta: &AdmissibleWeight,
    sample_grid: &GridSpec,
    seed: u64,
) -> Result<AdmissibilityReport> {
    let grid = build_grid(sample_grid.clone())?;
    let d = param.d;
    if grid.d() != d {
        return Err(LabError::InvalidProblem("sample grid dimension differs".into()));
    }
    let (t_lo, t_hi) = grid.spec.bounds[0];
    let margin = 1.0 + (t_hi - t_lo);
    let ratios: Vec<Option<f64>> = (0..grid.node_count())
        .into_par_iter()
        .map(|i| {
            let z = grid.node_coords(i);
            let dist = distance_brute_force(param, &z[..d], t_lo - margin, t_hi + margin);
            (dist > 1e-6).then(|| delta.eval(param, &z[..d]) / dist)
        })
        .collect();
    let valid: Vec<f64> = ratios.into_iter().flatten().collect();
    let c0 = valid.iter().copied().fold(f64::INFINITY, f64::min);
    let c1 = valid.iter().copied().fold(0.0, f64::max);
    let alpha = match param.class {
        HolderClass::C1 => 1.0,
        HolderClass::C1Alpha(a) => a.min(1.0),
    };
    let pts: Vec<Point> = (0..grid.node_count())
        .map(|i| grid.node_coords(i))
        .filter(|z| z[param.dx()..d].iter().any(|v| v.abs() > 1e-9))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holder = 0.0f64;
    if pts.len() >= 2 {
        for _ in 0..HOLDER_PAIRS {
            let p = &pts[rng.random_range(0..pts.len())];
            let q = &pts[rng.random_range(0..pts.len())];
            let dist: f64 = (0..d).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>().sqrt();
            if dist > 0.0 {
                let diff = (delta.tilde(param, &p[..d]) - delta.tilde(param, &q[..d])).abs();
                holder = holder.max(diff / dist.powf(alpha));
            }
        }
    }
    Ok(AdmissibilityReport {
        c0,
        c1,
        alpha,
        holder_quotient: holder,
        samples: valid.len(),
        admissible: c0 > 0.0 && c0.is_finite() && holder.is_finite(),
    })
}

/// A problem posed around `Gamma` in the original coordinates; the
/// `weight` inside `spec` only supplies `a` (the weight is `delta^a`).
#[derive(Clone, Debug)]
pub struct CurvedProblem {
    pub spec: ProblemSpec,
    pub param: Parametrization,
    pub delta: AdmissibleWeight,
}

#[derive(Clone, Debug)]
pub struct PushedProblem {
    pub spec: ProblemSpec,
    /// Ellipticity bounds of `delta~^a J^{-1} (A o Phi) J^{-T}` at cell centers.
    pub lambda: f64,
    pub big_lambda: f64,
}

/// Straightens a curved problem: composed weight `delta~^a |y|^a`,
/// coefficient `J^{-1} (A o Phi) J^{-T}`, `f o Phi`, `J^{-1} F o Phi`,
/// `psi o Phi(., 0)` and `g o Phi`.
pub fn push_problem(curved: &CurvedProblem) -> Result<PushedProblem> {
    let param = curved.param.clone();
    let d = param.d;
    let src = &curved.spec;
    if src.grid.d != d || src.grid.n != param.n {
        return Err(LabError::InvalidProblem("curved spec dimensions differ from the graph".into()));
    }
    let phi = Arc::new(Straightening::new(param.clone()));
    let delta = Arc::new(curved.delta.clone());
    let mut spec = src.clone();
    let (pp, dd) = (param.clone(), delta.clone());
    spec.weight = WeightSpec::with_mode(
        src.weight.a,
        param.n,
        d,
        WeightMode::Composed(Arc::new(move |z: &[f64]| dd.tilde(&pp, z))),
    )?;
    let coefficient = src.coefficient.clone();
    let grid = build_grid(src.grid.clone())?;
    let (phi_a, grid_a) = (phi.clone(), grid.clone());
    let eval_a = move |z: &[f64]| -> Mat {
        let p = phi_a.forward(z);
        let cell = locate_cell(&grid_a, &p[..d]).unwrap_or(0);
        coefficient.eval_in_cell(&grid_a, cell, &[0.5; 3], &p[..d])
    };
    let dxn = param.dx();
    let p1 = param.clone();
    spec.coefficient = CoefficientField::Callback(Arc::new(move |z: &[f64]| {
        straight_coefficient(d, dxn, &eval_a(z), p1.dphi1(z[0]))
    }));
    let (f, phi_f) = (src.source.clone(), phi.clone());
    spec.source = Arc::new(move |z: &[f64]| f(&phi_f.forward(z)[..d]));
    let (big_f, phi_b) = (src.flux.clone(), phi.clone());
    spec.flux = Arc::new(move |z: &[f64]| {
        let v = big_f(&phi_b.forward(z)[..d]);
        let jinv = phi_b.inverse_jacobian(z);
        let mut out = [0.0; 3];
        linalg::mat_vec(&jinv, &v, d, &mut out);
        out
    });
    let (psi, phi_p) = (src.psi.clone(), phi.clone());
    spec.psi = Arc::new(move |z: &[f64]| {
        let mut base = [0.0; 3];
        base[..dxn].copy_from_slice(&z[..dxn]);
        psi(&phi_p.forward(&base[..d])[..d])
    });
    let (g, phi_g) = (src.outer.clone(), phi.clone());
    spec.outer = Arc::new(move |z: &[f64]| g(&phi_g.forward(z)[..d]));
    let (lo, hi) = spec.coefficient.ellipticity_bounds(&grid)?;
    let a = src.weight.a;
    let factors: Vec<f64> = (0..grid.cell_count())
        .into_par_iter()
        .map(|c| curved.delta.tilde(&param, &grid.cell_center(c)[..d]).powf(a))
        .collect();
    let fmin = factors.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = factors.iter().copied().fold(0.0, f64::max);
    if !(fmin > 0.0 && fmax.is_finite()) {
        return Err(LabError::Ellipticity {
            point: vec![],
            min: fmin * lo,
            max: fmax * hi,
        });
    }
    Ok(PushedProblem {
        spec,
        lambda: fmin * lo,
        big_lambda: fmax * hi,
    })
}

/// Index of a cell containing `p` (points on the upper boundary belong to
/// the last cell), or `None` outside the grid.
pub fn locate_cell(grid: &Grid, p: &[f64]) -> Option<usize> {
    let d = grid.d();
    let np = grid.nodes_per_axis();
    let mut multi = [0usize; 3];
    for k in 0..d {
        let (lo, hi) = grid.spec.bounds[k];
        let tol = 1e-12 * (hi - lo);
        if p[k] < lo - tol || p[k] > hi + tol {
            return None;
        }
        let i = ((p[k] - lo) / grid.h).floor().max(0.0) as usize;
        multi[k] = i.min(np - 2);
    }
    let mut idx = 0;
    for &m in multi.iter().take(d) {
        idx = idx * (np - 1) + m;
    }
    Some(idx)
}

/// Multilinear interpolation of a nodal field at `p`.
pub fn interpolate(grid: &Grid, field: &[f64], p: &[f64]) -> Option<f64> {
    let d = grid.d();
    let cell = locate_cell(grid, p)?;
    let nodes = grid.cell_nodes(cell);
    let mut vals = [0.0; 8];
    for k in 0..grid.corners_per_cell() {
        vals[k] = field[nodes[k]];
    }
    let lo = grid.cell_lo(cell);
    Some(q1_eval(d, &vals, &local_coords(p, &lo, grid.h, d), grid.h).0)
}

/// `u(z) = u~(Phi^{-1}(z))` on the nodes of `curved_grid`.
pub fn pullback_field(straight_grid: &Grid, straight: &[f64], param: &Parametrization, curved_grid: &Grid) -> Result<Vec<f64>> {
    let phi = Straightening::new(param.clone());
    let d = param.d;
    let vals: Vec<std::result::Result<f64, Point>> = (0..curved_grid.node_count())
        .into_par_iter()
        .map(|i| {
            let z = curved_grid.node_coords(i);
            let p = phi.inverse(&z[..d]);
            interpolate(straight_grid, straight, &p[..d]).ok_or(p)
        })
        .collect();
    let mut out = Vec::with_capacity(vals.len());
    let mut missing = Vec::new();
    for v in vals {
        match v {
            Ok(x) => out.push(x),
            Err(p) => missing.extend_from_slice(&p[..d]),
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(LabError::OutOfRange(missing))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvedBandProfile {
    pub rho: Vec<f64>,
    /// `max |(A grad u + F) . nu|` over the frame normals.
    pub normal: Vec<f64>,
    /// `max |(grad u - grad psi) . tau|`.
    pub tangential: Vec<f64>,
    /// Number of cell centers in each band.
    pub cells: Vec<usize>,
}

impl CurvedBandProfile {
    /// Normal residual of the widest band over that of the narrowest
    /// non-empty band.
    pub fn decay_factor(&self) -> Option<f64> {
        crate::regularity::band_decay(&self.normal, &self.cells)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("band_radius,normal_residual,tangential_residual,cells\n");
        for i in 0..self.rho.len() {
            s += &format!(
                "{:.12e},{:.12e},{:.12e},{}\n",
                self.rho[i], self.normal[i], self.tangential[i], self.cells[i]
            );
        }
        s
    }
}

/// Unit tangent of `Gamma` at parameter `t` and a Gram-Schmidt completion of
/// the `e_{y_i}` to an orthonormal normal frame.
pub fn frame(param: &Parametrization, t: f64) -> (Point, Vec<Point>) {
    let d = param.d;
    let dx = param.dx();
    let mut tau = [0.0; 3];
    tau[0] = 1.0;
    tau[dx] = param.dphi1(t);
    let norm = linalg::dot(&tau, &tau, d).sqrt();
    for v in tau.iter_mut() {
        *v /= norm;
    }
    let mut basis: Vec<Point> = vec![tau];
    let mut normals = Vec::new();
    for k in dx..d {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        for b in &basis {
            let c = linalg::dot(&e, b, d);
            for j in 0..d {
                e[j] -= c * b[j];
            }
        }
        let n = linalg::dot(&e, &e, d).sqrt();
        for v in e.iter_mut() {
            *v /= n;
        }
        basis.push(e);
        normals.push(e);
    }
    (tau, normals)
}

/// Band maxima over cell centers of `grid` with `dist_Gamma <= rho` and
/// `|x|_inf <= 1/2`, using Q1 gradients at cell centers.
pub fn curved_bc_residual(
    grid: &Grid,
    u: &[f64],
    coefficient: &CoefficientField,
    flux: &(dyn Fn(&[f64]) -> [f64; 3] + Sync),
    psi: &(dyn Fn(&[f64]) -> f64 + Sync),
    param: &Parametrization,
    bands: &[f64],
) -> Result<CurvedBandProfile> {
    let d = grid.d();
    if d != param.d || grid.n() != param.n {
        return Err(LabError::InvalidProblem("curved residual needs the graph's dimensions".into()));
    }
    let dx = param.dx();
    let grads = cell_center_gradients(grid, u, Region::All);
    let per_cell: Vec<Option<(f64, f64, f64)>> = (0..grid.cell_count())
        .into_par_iter()
        .map(|c| {
            let z = grid.cell_center(c);
            if z[..dx].iter().any(|v| v.abs() > 0.5) {
                return None;
            }
            let (dist, t) = nearest_on_graph(param, &z[..d]);
            if dist > bands.iter().copied().fold(0.0, f64::max) {
                return None;
            }
            let (tau, normals) = frame(param, t);
            let mut g = [0.0; 3];
            for k in 0..d {
                g[k] = grads[k].values[c];
            }
            let a = coefficient.eval_in_cell(grid, c, &[0.5; 3], &z[..d]);
            let f = flux(&z[..d]);
            let mut q = [0.0; 3];
            linalg::mat_vec(&a, &g, d, &mut q);
            for k in 0..d {
                q[k] += f[k];
            }
            let nres = normals.iter().map(|nu| linalg::dot(&q, nu, d).abs()).fold(0.0, f64::max);
            let s = 1e-6;
            let mut zp = z;
            let mut zm = z;
            for k in 0..d {
                zp[k] += s * tau[k];
                zm[k] -= s * tau[k];
            }
            let dpsi = (psi(&zp[..d]) - psi(&zm[..d])) / (2.0 * s);
            let tres = (linalg::dot(&g, &tau, d) - dpsi).abs();
            Some((dist, nres, tres))
        })
        .collect();
    let mut normal = vec![0.0f64; bands.len()];
    let mut tangential = vec![0.0f64; bands.len()];
    let mut cells = vec![0usize; bands.len()];
    for (dist, nres, tres) in per_cell.into_iter().flatten() {
        for (b, &rho) in bands.iter().enumerate() {
            if dist <= rho {
                normal[b] = normal[b].max(nres);
                tangential[b] = tangential[b].max(tres);
                cells[b] += 1;
            }
        }
    }
    Ok(CurvedBandProfile {
        rho: bands.to_vec(),
        normal,
        tangential,
        cells,
    })
}

/// Curved model solution `u(z) = |y - phi(x)|^{2-a-n}` for `A = I`,
/// `delta = |y - phi(x)|`. In straight coordinates it is `|y|^{2-a-n}`
/// under the coefficient `J^{-1} J^{-T}`, with the forcing obtained by
/// automatic differentiation.
#[derive(Debug, Clone)]
pub struct CurvedCase {
    pub param: Parametrization,
    pub a: f64,
}

impl CurvedCase {
    pub fn new(param: Parametrization, a: f64) -> Result<Self> {
        WeightSpec::new(a, param.n, param.d)?;
        Ok(Self { param, a })
    }

    pub fn exponent(&self) -> f64 {
        2.0 - self.a - self.param.n as f64
    }

    pub fn exact(&self, z: &[f64]) -> f64 {
        let dx = self.param.dx();
        let mut s = 0.0;
        for k in dx..self.param.d {
            let g = if k == dx { self.param.phi1(z[0]) } else { 0.0 };
            s += (z[k] - g) * (z[k] - g);
        }
        s.powf(0.5 * self.exponent())
    }

    /// Forcing in straight coordinates.
    pub fn straight_source(&self, z: &[f64]) -> f64 {
        let (d, dx, a, e) = (self.param.d, self.param.dx(), self.a, self.exponent());
        let y2 = |p: &[Jet; 3]| {
            let mut s = Jet::c(0.0);
            for item in p.iter().take(d).skip(dx) {
                s = s + *item * *item;
            }
            s
        };
        forcing_from_fields(
            d,
            z,
            |p| y2(p).powf(0.5 * e),
            |p| y2(p).powf(0.5 * a),
            |p| {
                let mut id = [[Jet::c(0.0); 3]; 3];
                for (k, row) in id.iter_mut().enumerate().take(d) {
                    row[k] = Jet::c(1.0);
                }
                straight_coefficient(d, dx, &id, self.param.dphi1(p[0]))
            },
            |_| [Jet::c(0.0); 3],
        )
    }

    /// The curved problem on `grid`: `A = I`, `F = 0`, `psi = 0`, `g = u`.
    pub fn curved_problem(&self, grid: GridSpec) -> Result<CurvedProblem> {
        let mut spec = ProblemSpec::new(grid, self.a)?;
        let me = Arc::new(self.clone());
        let phi = Straightening::new(self.param.clone());
        let d = self.param.d;
        let m1 = me.clone();
        spec.source = Arc::new(move |z: &[f64]| m1.straight_source(&phi.inverse(z)[..d]));
        let m2 = me.clone();
        spec.outer = Arc::new(move |z: &[f64]| m2.exact(z));
        Ok(CurvedProblem {
            spec,
            param: self.param.clone(),
            delta: AdmissibleWeight::Vertical,
        })
    }
}
