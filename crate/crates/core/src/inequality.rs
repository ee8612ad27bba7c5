//! Functional inequalities on admissible test fields (Hardy, Poincaré,
//! boundary trace, Sobolev) and the Caccioppoli and local boundedness ratios
//! of computed solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::ProblemSpec;
use crate::error::{LabError, Result};
use crate::frequency::{require_vanishing, shell_integral};
use crate::geometry::{DomainMask, EllipsoidRegion, Grid};
use crate::linalg::identity;
use crate::quadrature::{
    integrate_field, linf_norm, local_coords, q1_eval, sobolev_exponent, Quadrature, Region, SobolevExponent,
};

/// Exponent used for the Sobolev ratio when `d = 2`, where any finite `p`
/// is allowed.
pub const SOBOLEV_P_2D: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InequalityId {
    Hardy,
    Poincare,
    TracePoincare,
    Sobolev,
    Caccioppoli,
    Moser,
    SpectralTrace,
}

impl InequalityId {
    pub fn as_str(&self) -> &'static str {
        match self {
            InequalityId::Hardy => "hardy",
            InequalityId::Poincare => "poincare",
            InequalityId::TracePoincare => "trace_poincare",
            InequalityId::Sobolev => "sobolev",
            InequalityId::Caccioppoli => "caccioppoli",
            InequalityId::Moser => "moser",
            InequalityId::SpectralTrace => "spectral_trace",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestField {
    pub id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub id: InequalityId,
    /// `(field id, LHS / RHS)`; `None` when the field was skipped.
    pub ratios: Vec<(String, Option<f64>)>,
    pub max_ratio: f64,
    /// Relative change of `max_ratio` under one refinement, once compared.
    pub refinement_delta: Option<f64>,
}

impl InequalityReport {
    pub fn all_finite(&self) -> bool {
        self.ratios
            .iter()
            .all(|(_, r)| r.is_none_or(|v| v.is_finite() && v > 0.0))
    }
}

pub fn sobolev_p(d: usize) -> Result<f64> {
    Ok(match sobolev_exponent(d)? {
        SobolevExponent::Finite(p) => p,
        SobolevExponent::AnyP => SOBOLEV_P_2D,
    })
}

/// `int_{boundary of region} w u^2 dsigma`. Boxes use face quadrature; balls
/// use a shell average of thickness `h`.
pub fn boundary_integral(quad: &Quadrature, grid: &Grid, u: &[f64], region: Region) -> Result<f64> {
    let d = grid.d();
    let h = grid.h;
    let half = match region {
        Region::Ball { radius } => {
            let ball = EllipsoidRegion::new(identity(d), d, 1.0)?;
            return Ok(shell_integral(quad, grid, u, &ball, radius - 0.5 * h, radius + 0.5 * h)? / h);
        }
        Region::All => grid.spec.bounds[0].1,
        Region::Cube { half_width } => half_width,
    };
    let steps = half / h;
    let lo_axis = grid.coord(0, 0);
    if (steps - steps.round()).abs() > 1e-9 || half > -lo_axis + 1e-12 {
        return Err(LabError::InvalidProblem(format!("cube half width {half} not on the grid")));
    }
    let mut total = 0.0;
    for c in 0..grid.cell_count() {
        let lo = grid.cell_lo(c);
        if (0..d).any(|k| lo[k] < -half - 1e-12 || lo[k] + h > half + 1e-12) {
            continue;
        }
        let nodes = grid.cell_nodes(c);
        let mut vals = [0.0; 8];
        for k in 0..grid.corners_per_cell() {
            vals[k] = u[nodes[k]];
        }
        for axis in 0..d {
            for (side, pos) in [(0.0, -half), (1.0, half)] {
                if (lo[axis] + side * h - pos).abs() > 1e-9 * h {
                    continue;
                }
                let mut flo = lo;
                flo[axis] = pos;
                let mut ext = [h; 3];
                ext[axis] = 0.0;
                quad.for_each_weighted_point(&flo[..d], &ext[..d], |z, w| {
                    let (v, _) = q1_eval(d, &vals, &local_coords(z, &lo, h, d), h);
                    total += w * v * v;
                });
            }
        }
    }
    Ok(total)
}

fn dirichlet(quad: &Quadrature, grid: &Grid, u: &[f64], region: Region) -> f64 {
    let d = grid.d();
    integrate_field(quad, grid, u, region, |_, _, g| g[..d].iter().map(|v| v * v).sum())
}

/// Hardy, Poincaré, trace-Poincaré and Sobolev ratios (LHS / Dirichlet
/// energy) over `region` for each admissible field. Zero fields are skipped.
pub fn inequality_battery(
    quad: &Quadrature,
    grid: &Grid,
    mask: &DomainMask,
    fields: &[TestField],
    region: Region,
) -> Result<Vec<InequalityReport>> {
    let d = grid.d();
    let dx = grid.dx();
    let p = sobolev_p(d)?;
    let ids = [
        InequalityId::Hardy,
        InequalityId::Poincare,
        InequalityId::TracePoincare,
        InequalityId::Sobolev,
    ];
    let mut reports: Vec<InequalityReport> = ids
        .iter()
        .map(|&id| InequalityReport {
            id,
            ratios: Vec::new(),
            max_ratio: 0.0,
            refinement_delta: None,
        })
        .collect();
    for f in fields {
        require_vanishing(mask, &f.values)?;
        let energy = dirichlet(quad, grid, &f.values, region);
        let lhs = if f.values.iter().all(|&v| v == 0.0) || !(energy > 0.0) {
            [None; 4]
        } else {
            let hardy = integrate_field(quad, grid, &f.values, region, |z, u, _| {
                let r2: f64 = z[dx..d].iter().map(|v| v * v).sum();
                u * u / r2
            });
            let l2 = integrate_field(quad, grid, &f.values, region, |_, u, _| u * u);
            let trace = boundary_integral(quad, grid, &f.values, region)?;
            let sob = integrate_field(quad, grid, &f.values, region, |_, u, _| u.abs().powf(p)).powf(2.0 / p);
            [Some(hardy), Some(l2), Some(trace), Some(sob)]
        };
        for (rep, l) in reports.iter_mut().zip(lhs) {
            let ratio = l.map(|v| v / energy);
            if let Some(r) = ratio {
                rep.max_ratio = rep.max_ratio.max(r);
            }
            rep.ratios.push((f.id.clone(), ratio));
        }
    }
    Ok(reports)
}

/// Fills `refinement_delta` on the fine reports from matching coarse ones.
pub fn compare_refinement(coarse: &[InequalityReport], fine: &mut [InequalityReport]) {
    for f in fine.iter_mut() {
        if let Some(c) = coarse.iter().find(|c| c.id == f.id) {
            f.refinement_delta = Some(if c.max_ratio > 0.0 {
                (f.max_ratio - c.max_ratio).abs() / c.max_ratio
            } else {
                0.0
            });
        }
    }
}

/// Random admissible fields `ramp(|y|) * (c_0 + sum_m c_m sin(k_m . z + phi_m))`
/// where the ramp vanishes for `|y| <= eps` and reaches 1 at `eps + 1/8`.
/// The same seed gives the same analytic fields on every grid.
pub fn random_test_fields(grid: &Grid, eps: f64, count: usize, seed: u64) -> Vec<TestField> {
    let d = grid.d();
    let dx = grid.dx();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let c0: f64 = rng.random_range(-1.0..1.0);
            let modes: Vec<([f64; 3], f64, f64)> = (0..4)
                .map(|_| {
                    let mut k = [0.0; 3];
                    for kk in k.iter_mut().take(d) {
                        *kk = rng.random_range(-3.0..3.0);
                    }
                    (k, rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(-1.0..1.0))
                })
                .collect();
            let values = grid.sample(|z| {
                let r = z[dx..d].iter().map(|v| v * v).sum::<f64>().sqrt();
                let ramp = ((r - eps) / 0.125).clamp(0.0, 1.0);
                let mut s = c0;
                for (k, phase, amp) in &modes {
                    let arg: f64 = (0..d).map(|j| k[j] * z[j]).sum::<f64>() + phase;
                    s += amp * arg.sin();
                }
                ramp * s
            });
            TestField {
                id: format!("random_{i}"),
                values,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaccioppoliRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `int_{B_R1} w |grad u|^2` over
/// `(R2-R1)^{-2} int_{B_R2} w u^2 + ||f||_{L^{2,a}} ||u||_{L^{2,a}} + int_{B_R2} w |F|^2 1_{u != 0}`.
/// `0 / 0` is reported as 0.
pub fn caccioppoli_ratio(quad: &Quadrature, grid: &Grid, u: &[f64], spec: &ProblemSpec, r1: f64, r2: f64) -> Result<CaccioppoliRatio> {
    if !(0.0 < r1 && r1 < r2) {
        return Err(LabError::InvalidProblem(format!("need 0 < R1 < R2, got {r1}, {r2}")));
    }
    let d = grid.d();
    let inner = Region::Ball { radius: r1 };
    let outer = Region::Ball { radius: r2 };
    let lhs = dirichlet(quad, grid, u, inner);
    let l2u = integrate_field(quad, grid, u, outer, |_, v, _| v * v);
    let (src, flux) = (spec.source.clone(), spec.flux.clone());
    let l2f = integrate_field(quad, grid, u, outer, |z, _, _| src(z).powi(2));
    let big_f = integrate_field(quad, grid, u, outer, |z, v, _| {
        if v != 0.0 {
            flux(z)[..d].iter().map(|c| c * c).sum()
        } else {
            0.0
        }
    });
    let rhs = l2u / (r2 - r1).powi(2) + l2f.sqrt() * l2u.sqrt() + big_f;
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(CaccioppoliRatio { lhs, rhs, ratio })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoserBound {
    pub linf: f64,
    pub data: f64,
    pub ratio: f64,
    pub p: f64,
    pub q: f64,
}

/// `||u||_{L^inf(B_r)}` over
/// `||u||_{L^{2,a}(B_R)} + ||f||_{L^{p,a}(B_R)} + ||F||_{L^{q,a}(B_R)}` with
/// `p = d > d/2` and `q = 2d > d`.
pub fn moser_ratio(quad: &Quadrature, grid: &Grid, u: &[f64], spec: &ProblemSpec, r: f64, big_r: f64) -> Result<MoserBound> {
    if !(0.0 < r && r < big_r) {
        return Err(LabError::InvalidProblem(format!("need 0 < r < R, got {r}, {big_r}")));
    }
    let d = grid.d();
    let (p, q) = (d as f64, 2.0 * d as f64);
    let outer = Region::Ball { radius: big_r };
    let linf = linf_norm(grid, u, Region::Ball { radius: r }).value;
    let (src, flux) = (spec.source.clone(), spec.flux.clone());
    let l2u = integrate_field(quad, grid, u, outer, |_, v, _| v * v).sqrt();
    let lpf = integrate_field(quad, grid, u, outer, |z, _, _| src(z).abs().powf(p)).powf(1.0 / p);
    let lqf = integrate_field(quad, grid, u, outer, |z, _, _| {
        flux(z)[..d].iter().map(|c| c * c).sum::<f64>().sqrt().powf(q)
    })
    .powf(1.0 / q);
    let data = l2u + lpf + lqf;
    let ratio = if data > 0.0 { linf / data } else { 0.0 };
    Ok(MoserBound { linf, data, ratio, p, q })
}
