//! Hölder and gradient-Hölder exponent estimation from dyadic oscillation
//! profiles, the perforation sweep, conormal decay on the hole boundary and
//! the limiting boundary condition on `{y = 0}`.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::assembly::{solve_problem, ProblemSpec, SolveResult};
use crate::error::{LabError, Result};
use crate::geometry::{Grid, NodeClass};
use crate::quadrature::{integrate_field, weighted_h1_norm, Region};

/// Values on a regular lattice (grid nodes or cell centers). Oscillations
/// are taken over the cubes that meet `region`.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub dims: Vec<usize>,
    pub spacing: f64,
    pub origin: [f64; 3],
    pub values: Vec<f64>,
    pub region: Region,
}

impl Lattice {
    pub fn from_nodes(grid: &Grid, field: &[f64], region: Region) -> Self {
        let d = grid.d();
        let mut origin = [0.0; 3];
        for (k, o) in origin.iter_mut().enumerate().take(d) {
            *o = grid.coord(k, 0);
        }
        Self {
            dims: vec![grid.nodes_per_axis(); d],
            spacing: grid.h,
            origin,
            values: field.to_vec(),
            region,
        }
    }
}

/// Whether the box `[lo, lo + side]^d` intersects `region`.
pub fn box_meets_region(region: Region, lo: &[f64], side: f64) -> bool {
    match region {
        Region::All => true,
        Region::Ball { radius } => {
            let dist2: f64 = lo
                .iter()
                .map(|&l| {
                    let c = 0.0f64.clamp(l, l + side);
                    c * c
                })
                .sum();
            dist2 <= radius * radius * (1.0 + 1e-12)
        }
        Region::Cube { half_width } => lo.iter().all(|&l| l <= half_width && l + side >= -half_width),
    }
}

fn sliding_extreme(line: &[f64], window: usize, is_max: bool) -> Vec<f64> {
    let better = |a: f64, b: f64| if is_max { a >= b } else { a <= b };
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut out = Vec::with_capacity(line.len() + 1 - window);
    for i in 0..line.len() {
        while let Some(&j) = dq.back() {
            if better(line[i], line[j]) {
                dq.pop_back();
            } else {
                break;
            }
        }
        dq.push_back(i);
        if dq[0] + window <= i {
            dq.pop_front();
        }
        if i + 1 >= window {
            out.push(line[dq[0]]);
        }
    }
    out
}

/// Separable sliding extreme over windows of `window` points per axis.
fn sliding_extreme_nd(dims: &[usize], values: &[f64], window: usize, is_max: bool) -> (Vec<usize>, Vec<f64>) {
    let mut dims = dims.to_vec();
    let mut cur = values.to_vec();
    for axis in 0..dims.len() {
        let len = dims[axis];
        let new_len = len + 1 - window;
        let stride: usize = dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        let mut next = vec![0.0; outer * new_len * stride];
        let mut line = vec![0.0; len];
        for o in 0..outer {
            for s in 0..stride {
                for (i, item) in line.iter_mut().enumerate() {
                    *item = cur[(o * len + i) * stride + s];
                }
                for (i, v) in sliding_extreme(&line, window, is_max).into_iter().enumerate() {
                    next[(o * new_len + i) * stride + s] = v;
                }
            }
        }
        dims[axis] = new_len;
        cur = next;
    }
    (dims, cur)
}

/// Maximum oscillation over the axis-aligned cubes of `steps` lattice
/// spacings that meet the lattice region.
pub fn max_oscillation(lat: &Lattice, steps: usize) -> f64 {
    let window = steps + 1;
    if lat.dims.iter().any(|&n| n < window) {
        return 0.0;
    }
    let (dims, mx) = sliding_extreme_nd(&lat.dims, &lat.values, window, true);
    let (_, mn) = sliding_extreme_nd(&lat.dims, &lat.values, window, false);
    let side = steps as f64 * lat.spacing;
    let d = dims.len();
    let mut best = 0.0f64;
    let mut lo = [0.0; 3];
    for (pos, (a, b)) in mx.iter().zip(&mn).enumerate() {
        let mut rem = pos;
        for k in (0..d).rev() {
            lo[k] = lat.origin[k] + (rem % dims[k]) as f64 * lat.spacing;
            rem /= dims[k];
        }
        if box_meets_region(lat.region, &lo[..d], side) {
            best = best.max(a - b);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationProfile {
    pub scales: Vec<f64>,
    pub oscillations: Vec<f64>,
}

pub const MIN_SCALES: usize = 4;
pub const MAX_SCALE: f64 = 0.25;
pub const FLOOR_STEPS: usize = 4;

/// Dyadic scales `0.25 * 2^{-k}` that are whole multiples of the spacing
/// and at least 4 spacings.
pub fn dyadic_scales(spacing: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = MAX_SCALE;
    while r >= FLOOR_STEPS as f64 * spacing * (1.0 - 1e-9) {
        let steps = r / spacing;
        if (steps - steps.round()).abs() < 1e-9 {
            out.push(r);
        }
        r *= 0.5;
    }
    out
}

pub fn oscillation_profile(lat: &Lattice) -> OscillationProfile {
    let scales = dyadic_scales(lat.spacing);
    let oscillations = scales
        .iter()
        .map(|&r| max_oscillation(lat, (r / lat.spacing).round() as usize))
        .collect();
    OscillationProfile { scales, oscillations }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub exponent: f64,
    pub raw_slope: f64,
    pub window: (f64, f64),
    pub fit_residual: f64,
    pub capped: bool,
    pub profile: OscillationProfile,
    /// Set by the gradient estimator when gradients are not continuous.
    pub non_c1: bool,
}

/// Least-squares slope and RMS residual of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, icept, rms)
}

pub fn fit_profile(profile: OscillationProfile) -> Result<RateReport> {
    let k = profile.scales.len();
    if k < MIN_SCALES {
        return Err(LabError::TooFewScales {
            found: k,
            required: MIN_SCALES,
        });
    }
    let window = (profile.scales[k - 1], profile.scales[0]);
    let peak = profile.oscillations.iter().fold(0.0f64, |m, v| m.max(*v));
    if peak == 0.0 {
        return Ok(RateReport {
            exponent: 1.0,
            raw_slope: f64::INFINITY,
            window,
            fit_residual: 0.0,
            capped: true,
            profile,
            non_c1: false,
        });
    }
    let floor = peak * 1e-300;
    let lx: Vec<f64> = profile.scales.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = profile.oscillations.iter().map(|o| o.max(floor).ln()).collect();
    let (slope, _, rms) = linear_fit(&lx, &ly);
    Ok(RateReport {
        exponent: slope.clamp(0.0, 1.0),
        raw_slope: slope,
        window,
        fit_residual: rms,
        capped: slope >= 1.0,
        profile,
        non_c1: false,
    })
}

/// Hölder exponent of a nodal field over `region`.
pub fn holder_exponent_fit(grid: &Grid, field: &[f64], region: Region) -> Result<RateReport> {
    fit_profile(oscillation_profile(&Lattice::from_nodes(grid, field, region)))
}

/// Q1 gradient at every cell center; returns one lattice per component.
pub fn cell_center_gradients(grid: &Grid, field: &[f64], region: Region) -> Vec<Lattice> {
    let d = grid.d();
    let nc = grid.corners_per_cell();
    let cells = grid.cell_count();
    let mut comps = vec![vec![0.0; cells]; d];
    for c in 0..cells {
        let nodes = grid.cell_nodes(c);
        for (k, comp) in comps.iter_mut().enumerate() {
            let mut s = 0.0;
            for (corner, &node) in nodes.iter().enumerate().take(nc) {
                let sign = if corner >> k & 1 == 1 { 1.0 } else { -1.0 };
                s += sign * field[node];
            }
            comp[c] = s / (grid.h * (nc / 2) as f64);
        }
    }
    let mut origin = [0.0; 3];
    for (k, o) in origin.iter_mut().enumerate().take(d) {
        *o = grid.coord(k, 0) + 0.5 * grid.h;
    }
    comps
        .into_iter()
        .map(|values| Lattice {
            dims: vec![grid.nodes_per_axis() - 1; d],
            spacing: grid.h,
            origin,
            values,
            region,
        })
        .collect()
}

pub const NON_C1_SLOPE: f64 = 0.1;

/// Minimum Hölder exponent over gradient components. Flags `non_c1` when the
/// smallest raw slope is at most 0.1 (oscillation does not shrink with scale).
pub fn gradient_holder_fit(grid: &Grid, field: &[f64], region: Region) -> Result<RateReport> {
    let mut best: Option<RateReport> = None;
    for lat in cell_center_gradients(grid, field, region) {
        let r = fit_profile(oscillation_profile(&lat))?;
        let replace = match &best {
            None => true,
            Some(b) => r.raw_slope < b.raw_slope,
        };
        if replace {
            best = Some(r);
        }
    }
    let mut r = best.expect("at least two components");
    r.non_c1 = r.raw_slope <= NON_C1_SLOPE;
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub eps: f64,
    pub result: SolveResult,
    pub h1_diff: f64,
    pub h1_norm: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub baseline: SolveResult,
    pub records: Vec<SweepRecord>,
    /// `||u_0||_{H1a} + ||f||_{L2a} + ||F||_{L2a}`.
    pub data_norm: f64,
    /// `max_eps ||u_eps||_{H1a} / data_norm`.
    pub bound_constant: f64,
}

impl SweepReport {
    pub fn diffs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.h1_diff).collect()
    }
}

fn check_schedule(schedule: &[f64], h: f64) -> Result<()> {
    if schedule.is_empty() {
        return Err(LabError::InvalidProblem("empty eps schedule".into()));
    }
    for w in schedule.windows(2) {
        if !(w[1] < w[0]) {
            return Err(LabError::InvalidProblem("eps schedule must strictly decrease".into()));
        }
    }
    if schedule.iter().any(|&e| !(e > h * (1.0 - 1e-9) && e < 0.5)) {
        return Err(LabError::InvalidProblem(format!(
            "eps schedule must lie in [h, 0.5) with h = {h}"
        )));
    }
    Ok(())
}

/// Solves at `eps = 0` and along the schedule, comparing in `H^{1,a}` with
/// the perforated solutions extended by their hole values.
pub fn epsilon_sweep(spec: &ProblemSpec, schedule: &[f64]) -> Result<SweepReport> {
    check_schedule(schedule, spec.grid.h())?;
    let mut base_spec = spec.clone();
    base_spec.eps = 0.0;
    let (p0, r0) = solve_problem(base_spec)?;
    let grid = p0.grid().clone();
    let quad = p0.disc.quad.clone();
    let d = grid.d();
    let u0_norm = weighted_h1_norm(&quad, &grid, &r0.u, Region::All).value;
    let zero = vec![0.0; grid.node_count()];
    let (sf, ff) = (spec.source.clone(), spec.flux.clone());
    let f_norm = integrate_field(&quad, &grid, &zero, Region::All, |z, _, _| sf(z).powi(2)).sqrt();
    let big_f_norm = integrate_field(&quad, &grid, &zero, Region::All, |z, _, _| {
        ff(z)[..d].iter().map(|v| v * v).sum::<f64>()
    })
    .sqrt();
    let data_norm = u0_norm + f_norm + big_f_norm;
    let records = schedule
        .par_iter()
        .map(|&eps| {
            let mut s = spec.clone();
            s.eps = eps;
            let (_, r) = solve_problem(s)?;
            let diff: Vec<f64> = r.u.iter().zip(&r0.u).map(|(a, b)| a - b).collect();
            Ok(SweepRecord {
                eps,
                h1_diff: weighted_h1_norm(&quad, &grid, &diff, Region::All).value,
                h1_norm: weighted_h1_norm(&quad, &grid, &r.u, Region::All).value,
                result: r,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_norm = records.iter().map(|r| r.h1_norm).fold(0.0, f64::max);
    let bound_constant = if data_norm > 0.0 { max_norm / data_norm } else { 0.0 };
    Ok(SweepReport {
        baseline: r0,
        records,
        data_norm,
        bound_constant,
    })
}

/// Gradient at a node from one-sided differences toward free neighbors
/// (central when both sides are free).
pub fn one_sided_gradient(grid: &Grid, classes: &[NodeClass], u: &[f64], node: usize) -> [f64; 3] {
    let mut g = [0.0; 3];
    let free = |j: usize| matches!(classes[j], NodeClass::Interior | NodeClass::OuterBoundary);
    for (k, gk) in g.iter_mut().enumerate().take(grid.d()) {
        let fwd = grid.neighbor(node, k, 1).filter(|&j| free(j));
        let bwd = grid.neighbor(node, k, -1).filter(|&j| free(j));
        *gk = match (fwd, bwd) {
            (Some(f), Some(b)) => (u[f] - u[b]) / (2.0 * grid.h),
            (Some(f), None) => (u[f] - u[node]) / grid.h,
            (None, Some(b)) => (u[node] - u[b]) / grid.h,
            (None, None) => 0.0,
        };
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConormalTrace {
    pub eps: Vec<f64>,
    pub max_grad: Vec<f64>,
    pub max_flux: Vec<f64>,
    /// Slope of `log max_grad` against `log eps`.
    pub rate: f64,
    /// Whether `F(x, 0) . e_{y_i} = 0` held on sampled points of `{y = 0}`.
    pub compliant: bool,
}

/// Samples `F . e_{y_i}` on `{y = 0} cap B_{1/2}`.
pub fn flux_is_compliant(spec: &ProblemSpec) -> bool {
    let d = spec.grid.d;
    let dx = d - spec.grid.n;
    let steps: usize = if dx == 0 { 1 } else { 11 };
    let mut z = [0.0; 3];
    (0..steps.pow(dx as u32)).all(|mut idx| {
        for zk in z.iter_mut().take(dx) {
            *zk = -0.5 + (idx % steps) as f64 / (steps - 1) as f64;
            idx /= steps;
        }
        let f = (spec.flux)(&z[..d]);
        (dx..d).all(|k| f[k].abs() <= 1e-12)
    })
}

/// Max of `|grad u|` and `|(A grad u + F) . e_y|` over free nodes adjacent
/// to the hole inside `B_{1/2}`.
pub fn hole_boundary_maxima(spec: &ProblemSpec, grid: &Grid, classes: &[NodeClass], u: &[f64]) -> (f64, f64) {
    let d = grid.d();
    let dx = d - spec.grid.n;
    let mut max_g = 0.0f64;
    let mut max_f = 0.0f64;
    let half = Region::Ball { radius: 0.5 };
    for i in 0..grid.node_count() {
        if classes[i] != NodeClass::Interior {
            continue;
        }
        let adjacent = (0..d).any(|k| {
            [-1isize, 1]
                .iter()
                .any(|&s| grid.neighbor(i, k, s).is_some_and(|j| classes[j] == NodeClass::HoleConstrained))
        });
        let z = grid.node_coords(i);
        if !adjacent || !half.contains(&z[..d]) {
            continue;
        }
        let g = one_sided_gradient(grid, classes, u, i);
        max_g = max_g.max(g[..d].iter().map(|v| v * v).sum::<f64>().sqrt());
        let r = grid.y_norm(&z[..d]);
        let a = spec.coefficient.eval_in_cell(grid, grid.node_cells(i)[0], &[0.5; 3], &z[..d]);
        let flux = (spec.flux)(&z[..d]);
        let mut ag = [0.0; 3];
        crate::linalg::mat_vec(&a, &g, d, &mut ag);
        let normal: f64 = (dx..d).map(|k| (ag[k] + flux[k]) * z[k] / r).sum();
        max_f = max_f.max(normal.abs());
    }
    (max_g, max_f)
}

/// Conormal decay along a schedule; requires `a + n < 1`. A flux that is
/// not tangential on `{y = 0}` is accepted and flagged in the trace.
pub fn conormal_decay(spec: &ProblemSpec, schedule: &[f64]) -> Result<ConormalTrace> {
    let an = spec.weight.a + spec.weight.n as f64;
    if an >= 1.0 {
        return Err(LabError::InvalidProblem(format!(
            "conormal decay needs a+n in (0,1), got {an}"
        )));
    }
    check_schedule(schedule, spec.grid.h())?;
    let maxima = schedule
        .par_iter()
        .map(|&eps| {
            let mut s = spec.clone();
            s.eps = eps;
            let (p, r) = solve_problem(s)?;
            Ok(hole_boundary_maxima(spec, p.grid(), &p.disc.mask.classes, &r.u))
        })
        .collect::<Result<Vec<_>>>()?;
    let (max_grad, max_flux): (Vec<f64>, Vec<f64>) = maxima.into_iter().unzip();
    let lx: Vec<f64> = schedule.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = max_grad.iter().map(|g| g.max(1e-300).ln()).collect();
    let rate = if schedule.len() >= 2 { linear_fit(&lx, &ly).0 } else { 0.0 };
    Ok(ConormalTrace {
        eps: schedule.to_vec(),
        max_grad,
        max_flux,
        rate,
        compliant: flux_is_compliant(spec),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandProfile {
    pub rho: Vec<f64>,
    /// `max |(A grad u + F) . e_{y_i}|` over the band.
    pub normal_flux: Vec<f64>,
    /// `max |grad_x u - grad_x psi|` over the band (0 when d = n).
    pub tangential: Vec<f64>,
    /// Number of cell centers in each band.
    pub cells: Vec<usize>,
}

impl BandProfile {
    /// Normal flux of the widest band over that of the narrowest non-empty
    /// band; `None` with fewer than two non-empty bands.
    pub fn decay_factor(&self) -> Option<f64> {
        band_decay(&self.normal_flux, &self.cells)
    }
}

pub(crate) fn band_decay(values: &[f64], cells: &[usize]) -> Option<f64> {
    let filled: Vec<usize> = (0..values.len()).filter(|&i| cells[i] > 0).collect();
    if filled.len() < 2 {
        return None;
    }
    let (first, last) = (values[filled[0]], values[filled[filled.len() - 1]]);
    Some(if last > 0.0 { first / last } else { f64::INFINITY })
}

/// Band maxima over cell centers with `|y| <= rho` and `|x|_inf <= 1/2`,
/// from the Q1 gradient at cell centers.
pub fn limiting_bc_residual(spec: &ProblemSpec, grid: &Grid, u: &[f64], bands: &[f64]) -> Result<BandProfile> {
    if spec.eps != 0.0 {
        return Err(LabError::InvalidProblem("limiting residual needs eps = 0".into()));
    }
    let d = grid.d();
    let dx = d - spec.grid.n;
    let grads = cell_center_gradients(grid, u, Region::All);
    let hpsi = 1e-6;
    let mut normal_flux = vec![0.0f64; bands.len()];
    let mut tangential = vec![0.0f64; bands.len()];
    let mut cells = vec![0usize; bands.len()];
    for c in 0..grid.cell_count() {
        let z = grid.cell_center(c);
        let zs = &z[..d];
        if zs[..dx].iter().any(|v| v.abs() > 0.5) {
            continue;
        }
        let r = grid.y_norm(zs);
        let g: Vec<f64> = (0..d).map(|k| grads[k].values[c]).collect();
        let a = spec.coefficient.eval_in_cell(grid, c, &[0.5; 3], zs);
        let flux = (spec.flux)(zs);
        let mut ag = [0.0; 3];
        crate::linalg::mat_vec(&a, &g, d, &mut ag);
        let nf = (dx..d).map(|k| (ag[k] + flux[k]).abs()).fold(0.0, f64::max);
        let mut tg = 0.0f64;
        for k in 0..dx {
            let mut zp = [0.0; 3];
            zp[..d].copy_from_slice(zs);
            let mut zm = zp;
            zp[k] += hpsi;
            zm[k] -= hpsi;
            let dpsi = (spec.psi_at(&zp[..d]) - spec.psi_at(&zm[..d])) / (2.0 * hpsi);
            tg = tg.max((g[k] - dpsi).abs());
        }
        for (b, &rho) in bands.iter().enumerate() {
            if r <= rho {
                normal_flux[b] = normal_flux[b].max(nf);
                tangential[b] = tangential[b].max(tg);
                cells[b] += 1;
            }
        }
    }
    Ok(BandProfile {
        rho: bands.to_vec(),
        normal_flux,
        tangential,
        cells,
    })
}
