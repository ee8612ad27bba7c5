//! Almgren-type quantities on ellipsoids `Omega_r = {A^{-1} y . y < r^2}`:
//! the scaled energy `E`, the scaled boundary mass `H`, their ratio, the
//! identity `dH/dr = 2E/r`, the spectral trace margin and the growth
//! validator behind the Liouville argument.
//!
//! Boundary integrals use the co-area shell average
//! `(1/D) int_{r - D/2 < rho_A < r + D/2} w u^2 dz` with `D = h`, which is the
//! surface integral against `dsigma / |grad rho_A|`. That is the measure for
//! which the homogeneous solution `|A^{-1/2} y|^{2-a-n}` turns the spectral
//! inequality into an equality.

use rayon::prelude::*;

use crate::assembly::{solve_problem, CoefficientField, Problem, ProblemSpec};
use crate::error::{LabError, Result};
use crate::geometry::{cell_ellipsoid_fraction, DomainMask, EllipsoidRegion, Grid, NodeClass};
use crate::linalg::{self, Mat};
use crate::quadrature::{local_coords, q1_eval, Quadrature};

/// Midpoint sub-samples per axis inside shell cells.
pub fn shell_subsamples(d: usize) -> usize {
    if d == 2 {
        8
    } else {
        4
    }
}

fn require_full_codim(grid: &Grid) -> Result<()> {
    if grid.n() != grid.d() {
        return Err(LabError::InvalidProblem(format!(
            "frequency quantities need n = d, got n = {}, d = {}",
            grid.n(),
            grid.d()
        )));
    }
    Ok(())
}

fn cell_values(grid: &Grid, field: &[f64], cell: usize) -> [f64; 8] {
    let nodes = grid.cell_nodes(cell);
    let mut vals = [0.0; 8];
    for k in 0..grid.corners_per_cell() {
        vals[k] = field[nodes[k]];
    }
    vals
}

/// `int_cell w A grad u . grad u` for every cell.
pub fn cell_energies(quad: &Quadrature, grid: &Grid, u: &[f64], a_mat: &Mat) -> Vec<f64> {
    let d = grid.d();
    let h = grid.h;
    (0..grid.cell_count())
        .into_par_iter()
        .map(|c| {
            let vals = cell_values(grid, u, c);
            let lo = grid.cell_lo(c);
            let mut acc = 0.0;
            quad.for_each_cell_point(grid, c, |z, w| {
                let (_, g) = q1_eval(d, &vals, &local_coords(z, &lo, h, d), h);
                let mut ag = [0.0; 3];
                linalg::mat_vec(a_mat, &g, d, &mut ag);
                acc += w * linalg::dot(&ag, &g, d);
            });
            acc
        })
        .collect()
}

/// `int_{r_lo < rho_A < r_hi} w u^2 dz` by midpoint sub-sampling of the
/// cells that can meet the shell.
pub fn shell_integral(
    quad: &Quadrature,
    grid: &Grid,
    u: &[f64],
    region: &EllipsoidRegion,
    r_lo: f64,
    r_hi: f64,
) -> Result<f64> {
    let d = grid.d();
    let h = grid.h;
    let m = shell_subsamples(d);
    let lip = linalg::sym_eigenvalues(&region.inverse, d)[d - 1].sqrt();
    let half_diag = 0.5 * h * (d as f64).sqrt();
    let sub_vol = (h / m as f64).powi(d as i32);
    let parts: Vec<Result<f64>> = (0..grid.cell_count())
        .into_par_iter()
        .map(|c| {
            let center = grid.cell_center(c);
            let rc = region.rho(&center[..d]);
            if rc + lip * half_diag < r_lo || rc - lip * half_diag > r_hi {
                return Ok(0.0);
            }
            let vals = cell_values(grid, u, c);
            let lo = grid.cell_lo(c);
            let mut acc = 0.0;
            for s in 0..m.pow(d as u32) {
                let mut z = [0.0; 3];
                let mut rem = s;
                for k in 0..d {
                    z[k] = lo[k] + ((rem % m) as f64 + 0.5) * h / m as f64;
                    rem /= m;
                }
                let rho = region.rho(&z[..d]);
                if rho < r_lo || rho >= r_hi {
                    continue;
                }
                let (v, _) = q1_eval(d, &vals, &local_coords(&z, &lo, h, d), h);
                acc += quad.weight.eval(&z[..d])? * v * v;
            }
            Ok(acc * sub_vol)
        })
        .collect();
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyProfile {
    pub matrix: Mat,
    pub a: f64,
    pub n: usize,
    pub shell: f64,
    pub radii: Vec<f64>,
    /// `int_{Omega_r} w A grad u . grad u`.
    pub e_raw: Vec<f64>,
    /// Shell average of `w u^2` around `partial Omega_r`.
    pub h_raw: Vec<f64>,
    pub e: Vec<f64>,
    pub h: Vec<f64>,
    /// `E / H` where `H > 0`.
    pub frequency: Vec<Option<f64>>,
}

impl FrequencyProfile {
    pub fn critical_exponent(&self) -> f64 {
        2.0 - self.a - self.n as f64
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("r,E,H,N\n");
        for i in 0..self.radii.len() {
            let n = self.frequency[i].map_or("nan".to_string(), |v| format!("{v:.12e}"));
            s += &format!("{:.12e},{:.12e},{:.12e},{}\n", self.radii[i], self.e[i], self.h[i], n);
        }
        s
    }
}

fn check_radii(grid: &Grid, region: &EllipsoidRegion, radii: &[f64], shell: f64) -> Result<()> {
    let extent = grid.spec.bounds[..grid.d()]
        .iter()
        .map(|&(lo, hi)| (-lo).min(hi))
        .fold(f64::INFINITY, f64::min);
    for &r in radii {
        if !(r - 0.5 * shell > 0.0) {
            return Err(LabError::InvalidProblem(format!(
                "radius {r} leaves an empty shell of thickness {shell}"
            )));
        }
        if region.with_radius(r + 0.5 * shell).euclidean_extent() > extent {
            return Err(LabError::InvalidProblem(format!(
                "ellipsoid of radius {r} leaves the grid"
            )));
        }
    }
    Ok(())
}

/// `E(r)` and `H(r)` for each radius (concurrently, one reduction per
/// radius).
pub fn frequency_profile(quad: &Quadrature, grid: &Grid, u: &[f64], a_mat: &Mat, radii: &[f64]) -> Result<FrequencyProfile> {
    require_full_codim(grid)?;
    let d = grid.d();
    let region = EllipsoidRegion::new(*a_mat, d, 1.0)?;
    let shell = grid.h;
    check_radii(grid, &region, radii, shell)?;
    let energies = cell_energies(quad, grid, u, a_mat);
    let per_radius: Vec<Result<(f64, f64)>> = radii
        .par_iter()
        .map(|&r| {
            let reg = region.with_radius(r);
            let e_raw: f64 = energies
                .iter()
                .enumerate()
                .filter(|(_, e)| **e != 0.0)
                .map(|(c, e)| cell_ellipsoid_fraction(grid, c, &reg) * e)
                .sum();
            let h_raw = shell_integral(quad, grid, u, &region, r - 0.5 * shell, r + 0.5 * shell)? / shell;
            Ok((e_raw, h_raw))
        })
        .collect();
    let (a, n) = (quad.weight.a, quad.weight.n);
    let mut prof = FrequencyProfile {
        matrix: *a_mat,
        a,
        n,
        shell,
        radii: radii.to_vec(),
        e_raw: Vec::new(),
        h_raw: Vec::new(),
        e: Vec::new(),
        h: Vec::new(),
        frequency: Vec::new(),
    };
    let an = a + n as f64;
    for (res, &r) in per_radius.into_iter().zip(radii) {
        let (er, hr) = res?;
        let e = er / r.powf(an - 2.0);
        let h = hr / r.powf(an - 1.0);
        prof.e_raw.push(er);
        prof.h_raw.push(hr);
        prof.e.push(e);
        prof.h.push(h);
        prof.frequency.push(if h > 0.0 { Some(e / h) } else { None });
    }
    Ok(prof)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    /// `(r, dH/dr, 2E/r)` at interior radii.
    pub samples: Vec<(f64, f64, f64)>,
    pub max_relative_error: f64,
    pub passed: bool,
}

/// Compares the central difference of `H` with `2E/r`. Errors are relative
/// to the largest of `|dH/dr|`, `2E/r` and `H/r`, so that two vanishing
/// sides (constant fields) compare equal.
pub fn check_derivative_identity(profile: &FrequencyProfile, tol: f64) -> Result<IdentityCheck> {
    let r = &profile.radii;
    if r.len() < 5 {
        return Err(LabError::InvalidProblem("derivative identity needs >= 5 radii".into()));
    }
    let step = r[1] - r[0];
    if !(step > 0.0) || r.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(1.0)) {
        return Err(LabError::InvalidProblem("radii must be uniformly increasing".into()));
    }
    let mut samples = Vec::new();
    let mut worst = 0.0f64;
    for i in 1..r.len() - 1 {
        let dh = (profile.h[i + 1] - profile.h[i - 1]) / (2.0 * step);
        let rhs = 2.0 * profile.e[i] / r[i];
        let denom = dh.abs().max(rhs.abs()).max(profile.h[i] / r[i]);
        let err = if denom > 0.0 { (dh - rhs).abs() / denom } else { 0.0 };
        worst = worst.max(err);
        samples.push((r[i], dh, rhs));
    }
    Ok(IdentityCheck {
        samples,
        max_relative_error: worst,
        passed: worst <= tol,
    })
}

/// `ubar(y) = |A^{-1/2} y|^{2-a-n}`.
pub fn ubar(a_mat: &Mat, dim: usize, a: f64, y: &[f64]) -> f64 {
    let inv = linalg::inverse(a_mat, dim).expect("SPD matrix");
    let mut iy = [0.0; 3];
    linalg::mat_vec(&inv, y, dim, &mut iy);
    linalg::dot(&iy, y, dim).max(0.0).powf(0.5 * (2.0 - a - dim as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMargin {
    pub e_raw: f64,
    pub h_raw: f64,
    /// `E_raw - (2-a-n)/r * H_raw`.
    pub margin: f64,
    /// `E_raw + (2-a-n)/r * H_raw`.
    pub scale: f64,
}

impl SpectralMargin {
    /// Margin relative to the boundary term.
    pub fn relative(&self) -> f64 {
        let b = self.scale - self.e_raw;
        if b > 0.0 {
            self.margin / b
        } else {
            0.0
        }
    }
}

/// Checks the admissibility of a test field: zero on every constrained
/// interior node (the singular set and the hole).
pub fn require_vanishing(mask: &DomainMask, v: &[f64]) -> Result<()> {
    for (i, c) in mask.classes.iter().enumerate() {
        if matches!(c, NodeClass::Sigma0 | NodeClass::HoleConstrained) && v[i] != 0.0 {
            return Err(LabError::NotAdmissible(format!(
                "test field is {} at {} node {i}",
                v[i],
                c.as_str()
            )));
        }
    }
    Ok(())
}

pub fn spectral_trace_check(
    quad: &Quadrature,
    grid: &Grid,
    mask: &DomainMask,
    v: &[f64],
    a_mat: &Mat,
    r: f64,
) -> Result<SpectralMargin> {
    require_vanishing(mask, v)?;
    let prof = frequency_profile(quad, grid, v, a_mat, &[r])?;
    let gamma = prof.critical_exponent();
    let (e_raw, h_raw) = (prof.e_raw[0], prof.h_raw[0]);
    Ok(SpectralMargin {
        e_raw,
        h_raw,
        margin: e_raw - gamma / r * h_raw,
        scale: e_raw + gamma / r * h_raw,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRecord {
    /// `2 - a - n`.
    pub critical_exponent: f64,
    pub r0: f64,
    pub radii: Vec<f64>,
    pub h: Vec<f64>,
    /// `H(r0) (r/r0)^{2(2-a-n)}`.
    pub lower_bound: Vec<f64>,
    /// Half the log-log slope of `H`, comparable to the growth exponent.
    pub observed_growth: f64,
    pub tol: f64,
    pub degenerate: bool,
    pub passed: bool,
}

/// Checks `H(u,r) >= H(u,r0) (r/r0)^{2(2-a-n)} (1 - tol)` on a computed
/// field; `radii[0]` is `r0`.
pub fn growth_from_field(quad: &Quadrature, grid: &Grid, u: &[f64], a_mat: &Mat, radii: &[f64], tol: f64) -> Result<GrowthRecord> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::InvalidProblem("growth radii must increase, at least two".into()));
    }
    let prof = frequency_profile(quad, grid, u, a_mat, radii)?;
    let gamma = prof.critical_exponent();
    let r0 = radii[0];
    let h0 = prof.h[0];
    let peak = prof.h.iter().fold(0.0f64, |m, v| m.max(*v));
    let degenerate = !(h0 > 1e-300) || peak == 0.0;
    let lower_bound: Vec<f64> = radii.iter().map(|r| h0 * (r / r0).powf(2.0 * gamma)).collect();
    let observed_growth = if degenerate {
        0.0
    } else {
        let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let ly: Vec<f64> = prof.h.iter().map(|v| v.max(1e-300).ln()).collect();
        0.5 * crate::regularity::linear_fit(&lx, &ly).0
    };
    let passed = !degenerate && prof.h.iter().zip(&lower_bound).all(|(h, b)| *h >= b * (1.0 - tol));
    Ok(GrowthRecord {
        critical_exponent: gamma,
        r0,
        radii: radii.to_vec(),
        h: prof.h,
        lower_bound,
        observed_growth,
        tol,
        degenerate,
        passed,
    })
}

fn require_homogeneous(spec: &ProblemSpec) -> Result<Mat> {
    let a_mat = match &spec.coefficient {
        CoefficientField::Constant(m) => *m,
        _ => return Err(LabError::InvalidProblem("growth validator needs a constant matrix".into())),
    };
    let d = spec.grid.d;
    let probes = [[0.31, -0.17, 0.05], [-0.6, 0.42, -0.3], [0.05, 0.77, 0.5]];
    for z in &probes {
        let f = (spec.source)(&z[..d]);
        let big_f = (spec.flux)(&z[..d]);
        if f != 0.0 || big_f[..d].iter().any(|v| *v != 0.0) {
            return Err(LabError::InvalidProblem("growth validator needs f = 0 and F = 0".into()));
        }
    }
    Ok(a_mat)
}

/// Solves the homogeneous problem with the spec's outer data and checks the
/// growth lower bound on the solution.
pub fn growth_validator(spec: &ProblemSpec, radii: &[f64], tol: f64) -> Result<GrowthRecord> {
    if spec.grid.n != spec.grid.d {
        return Err(LabError::InvalidProblem("growth validator needs n = d".into()));
    }
    let a_mat = require_homogeneous(spec)?;
    let (p, r) = solve_problem(spec.clone())?;
    growth_from_field(&p.disc.quad, p.grid(), &r.u, &a_mat, radii, tol)
}

/// Discrete residual of the x-difference quotient `(u(x + s e_k) - u(x)) / (s h)`
/// of a solved homogeneous problem, on free rows whose stencils and shifts
/// stay free. Returns `max |K Du| / (max |K| max |Du|)`.
pub fn x_quotient_residual(problem: &Problem, u: &[f64], axis: usize, shift: usize) -> Result<f64> {
    let grid = problem.grid();
    if axis >= grid.dx() || shift == 0 {
        return Err(LabError::InvalidProblem("difference quotient needs an x-axis and a shift".into()));
    }
    let np = grid.nodes_per_axis();
    let step = |i: usize| -> Option<usize> {
        let m = grid.node_multi(i);
        if m[axis] + shift < np {
            let mut mm = m;
            mm[axis] += shift;
            Some(grid.node_index(&mm[..grid.d()]))
        } else {
            None
        }
    };
    let sh = shift as f64 * grid.h;
    let du: Vec<f64> = (0..u.len())
        .map(|i| step(i).map_or(0.0, |j| (u[j] - u[i]) / sh))
        .collect();
    let k = &problem.system.matrix;
    let free = |i: usize| problem.system.constraints[i].is_none();
    let mut worst = 0.0f64;
    for i in 0..u.len() {
        let Some(j) = step(i) else { continue };
        if !free(i) || !free(j) || k.row(i).any(|(c, _)| step(c).is_none()) {
            continue;
        }
        let s: f64 = k.row(i).map(|(c, v)| v * du[c]).sum();
        worst = worst.max(s.abs());
    }
    let kmax = k.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dmax = du.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(if kmax * dmax > 0.0 { worst / (kmax * dmax) } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, classify_nodes, GridSpec, Shape};
    use crate::linalg::{diag, identity};
    use crate::manufactured::ManufacturedCase;
    use crate::quadrature::{QuadratureRule, WeightSpec};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup(np: usize, half_width: f64, a: f64) -> (Grid, Quadrature) {
        let grid = build_grid(GridSpec::cube(2, 2, np, half_width)).unwrap();
        let quad = Quadrature::new(WeightSpec::new(a, 2, 2).unwrap(), QuadratureRule::default()).unwrap();
        (grid, quad)
    }

    fn radii(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let k = ((hi - lo) / step).round() as usize;
        (0..=k).map(|i| lo + i as f64 * step).collect()
    }

    #[test]
    fn radial_frequency_is_homogeneity_degree() {
        let (g, q) = setup(129, 1.0, -1.5);
        let u = g.sample(|z| (z[0] * z[0] + z[1] * z[1]).powf(0.75));
        let p = frequency_profile(&q, &g, &u, &identity(2), &[0.3, 0.45, 0.6]).unwrap();
        for n in &p.frequency {
            assert!((n.unwrap() - 1.5).abs() < 0.075, "{p:?}");
        }
        // Closed form of H: the circle carries |y|^a u^2 = r^{a+3}, so
        // H = 2 pi r^{a+4} / r^{a+1} = 2 pi r^3.
        for (h, r) in p.h.iter().zip(&p.radii) {
            assert!((h / (2.0 * PI * r.powi(3)) - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn constant_field_has_zero_frequency() {
        let (g, q) = setup(65, 1.0, -1.5);
        let u = vec![2.0; g.node_count()];
        let p = frequency_profile(&q, &g, &u, &identity(2), &radii(0.3, 0.5, 1.0 / 32.0)).unwrap();
        assert!(p.frequency.iter().all(|n| n.unwrap().abs() < 1e-12), "{p:?}");
        assert!(check_derivative_identity(&p, 0.05).unwrap().passed);
    }

    #[test]
    fn anisotropic_frequency() {
        let a = diag(&[4.0, 1.0, 1.0]);
        let (g, q) = setup(193, 1.5, -1.5);
        let u = g.sample(|z| ubar(&a, 2, -1.5, z));
        let p = frequency_profile(&q, &g, &u, &a, &[0.3, 0.6]).unwrap();
        for n in &p.frequency {
            assert!((n.unwrap() - 1.5).abs() < 0.075, "{p:?}");
        }
    }

    #[test]
    fn profile_invariances() {
        let (g, q) = setup(65, 1.0, -0.5);
        let u = g.sample(|z| (z[0] * z[0] + z[1] * z[1]).powf(0.25) + 0.3 * z[0]);
        let r = [0.3, 0.5];
        let p = frequency_profile(&q, &g, &u, &identity(2), &r).unwrap();
        let neg: Vec<f64> = u.iter().map(|v| -3.0 * v).collect();
        let pn = frequency_profile(&q, &g, &neg, &identity(2), &r).unwrap();
        for i in 0..2 {
            assert!((pn.e[i] - 9.0 * p.e[i]).abs() <= 1e-12 * p.e[i]);
            assert!((pn.h[i] - 9.0 * p.h[i]).abs() <= 1e-12 * p.h[i]);
            assert!((pn.frequency[i].unwrap() - p.frequency[i].unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn shells_tile_the_annulus() {
        let (g, q) = setup(129, 1.0, -1.5);
        let u = g.sample(|z| 1.0 + z[0] * z[1]);
        let reg = EllipsoidRegion::new(identity(2), 2, 1.0).unwrap();
        let rs = radii(0.3, 0.6, g.h);
        let p = frequency_profile(&q, &g, &u, &identity(2), &rs).unwrap();
        let sum: f64 = p.h_raw.iter().sum::<f64>() * g.h;
        let whole = shell_integral(&q, &g, &u, &reg, 0.3 - 0.5 * g.h, 0.6 + 0.5 * g.h).unwrap();
        assert!((sum / whole - 1.0).abs() < 0.02, "{sum} vs {whole}");
    }

    #[test]
    fn noise_breaks_the_identity() {
        let (g, q) = setup(129, 1.0, -1.5);
        let rs = radii(0.3, 0.45, g.h);
        let u = g.sample(|z| (z[0] * z[0] + z[1] * z[1]).powf(0.75));
        let p = frequency_profile(&q, &g, &u, &identity(2), &rs).unwrap();
        assert!(check_derivative_identity(&p, 0.05).unwrap().passed);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noisy: Vec<f64> = u.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
        let pn = frequency_profile(&q, &g, &noisy, &identity(2), &rs).unwrap();
        assert!(!check_derivative_identity(&pn, 0.05).unwrap().passed);
    }

    #[test]
    fn empty_shell_and_short_radii_rejected() {
        let (g, q) = setup(33, 1.0, -1.5);
        let u = vec![0.0; g.node_count()];
        assert!(frequency_profile(&q, &g, &u, &identity(2), &[0.01]).is_err());
        assert!(frequency_profile(&q, &g, &u, &identity(2), &[0.99]).is_err());
        let p = frequency_profile(&q, &g, &u, &identity(2), &[0.3, 0.4]).unwrap();
        assert!(check_derivative_identity(&p, 0.05).is_err());
    }

    #[test]
    fn spectral_margin_examples() {
        let (g, q) = setup(129, 1.0, -1.5);
        let eps = g.h;
        let mask = classify_nodes(&g, Shape::Box, eps).unwrap();
        let zero = vec![0.0; g.node_count()];
        let m0 = spectral_trace_check(&q, &g, &mask, &zero, &identity(2), 0.5).unwrap();
        assert_eq!(m0.margin, 0.0);
        let ramp = |r: f64| ((r - eps) / eps).clamp(0.0, 1.0);
        let v = g.sample(|z| {
            let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
            ubar(&identity(2), 2, -1.5, z) * ramp(r)
        });
        let m = spectral_trace_check(&q, &g, &mask, &v, &identity(2), 0.5).unwrap();
        assert!(m.relative().abs() <= 0.05, "{m:?}");
        let bad = g.sample(|_| 1.0);
        assert!(matches!(
            spectral_trace_check(&q, &g, &mask, &bad, &identity(2), 0.5),
            Err(LabError::NotAdmissible(_))
        ));
    }

    #[test]
    fn growth_examples() {
        let c = ManufacturedCase::by_name("radial_homogeneous", 2, 2, -1.5).unwrap();
        let spec = c.problem_spec(GridSpec::new(2, 2, 129)).unwrap();
        let rec = growth_validator(&spec, &[0.2, 0.3, 0.4, 0.5, 0.6], 0.05).unwrap();
        assert!(rec.passed && !rec.degenerate, "{rec:?}");
        for (h, b) in rec.h.iter().zip(&rec.lower_bound) {
            assert!((h / b - 1.0).abs() < 0.05);
        }
        let zero = ProblemSpec::new(GridSpec::new(2, 2, 65), -1.5).unwrap();
        let rec0 = growth_validator(&zero, &[0.2, 0.4], 0.05).unwrap();
        assert!(rec0.degenerate && !rec0.passed && rec0.h.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn slow_growth_data_still_grows_fast() {
        let mut spec = ProblemSpec::new(GridSpec::new(2, 2, 129), -1.5).unwrap();
        spec.outer = Arc::new(|z: &[f64]| (z[0] * z[0] + z[1] * z[1]).powf(0.25));
        let rec = growth_validator(&spec, &[0.2, 0.3, 0.4, 0.5, 0.6], 0.05).unwrap();
        assert!(rec.passed, "{rec:?}");
        assert!(rec.observed_growth >= 1.5 * 0.95);
    }

    #[test]
    fn growth_rejects_forcing() {
        let c = ManufacturedCase::by_name("quadratic_y", 2, 2, -1.5).unwrap();
        let spec = c.problem_spec(GridSpec::new(2, 2, 33)).unwrap();
        assert!(growth_validator(&spec, &[0.2, 0.4], 0.05).is_err());
    }

    #[test]
    fn x_quotients_solve_the_homogeneous_problem() {
        let mut spec = ProblemSpec::new(GridSpec::new(3, 2, 17), -1.5).unwrap();
        spec.outer = Arc::new(|z: &[f64]| (2.0 * z[0]).sin() * (1.0 + z[1] * z[1] + z[2]));
        spec.psi = Arc::new(|z: &[f64]| (2.0 * z[0]).sin());
        spec.solver.tol = 1e-13;
        let (p, r) = solve_problem(spec).unwrap();
        let res = x_quotient_residual(&p, &r.u, 0, 1).unwrap();
        assert!(res < 1e-9, "{res}");
    }
}
