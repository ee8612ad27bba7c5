//! Weighted Galerkin assembly with multilinear (Q1) elements, symmetric
//! elimination of Dirichlet constraints and the discrete energy.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::geometry::{build_grid, classify_nodes, DomainMask, Grid, GridSpec, NodeClass, Shape};
use crate::linalg::{self, Mat};
use crate::quadrature::{local_coords, Quadrature, QuadratureRule, ScalarFn, WeightSpec};
use crate::solver::{conjugate_gradient, det_dot, CsrMatrix, SolverOptions};

pub type VectorFn = Arc<dyn Fn(&[f64]) -> [f64; 3] + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>;

#[derive(Clone)]
pub enum CoefficientField {
    Constant(Mat),
    Callback(MatrixFn),
    /// Per-node samples, interpolated multilinearly inside each cell.
    Nodal(Arc<Vec<Mat>>),
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientField::Constant(m) => write!(f, "Constant({m:?})"),
            CoefficientField::Callback(_) => write!(f, "Callback(..)"),
            CoefficientField::Nodal(v) => write!(f, "Nodal({} samples)", v.len()),
        }
    }
}

impl CoefficientField {
    pub fn identity(d: usize) -> Self {
        CoefficientField::Constant(linalg::identity(d))
    }

    /// Coefficient at a point of cell `cell` with local coordinates `xi`.
    pub fn eval_in_cell(&self, grid: &Grid, cell: usize, xi: &[f64], z: &[f64]) -> Mat {
        match self {
            CoefficientField::Constant(m) => *m,
            CoefficientField::Callback(f) => f(z),
            CoefficientField::Nodal(samples) => {
                let d = grid.d();
                let nodes = grid.cell_nodes(cell);
                let mut out = linalg::ZERO;
                for (c, &node) in nodes.iter().enumerate().take(1 << d) {
                    let mut phi = 1.0;
                    for k in 0..d {
                        phi *= if c >> k & 1 == 1 { xi[k] } else { 1.0 - xi[k] };
                    }
                    for i in 0..d {
                        for j in 0..d {
                            out[i][j] += phi * samples[node][i][j];
                        }
                    }
                }
                out
            }
        }
    }

    /// Samples eigenvalues at every cell center (once for a constant field)
    /// and returns `(lambda, Lambda)`; fails on asymmetry or non-positivity.
    pub fn ellipticity_bounds(&self, grid: &Grid) -> Result<(f64, f64)> {
        let d = grid.d();
        let check = |m: &Mat, z: &[f64]| -> Result<(f64, f64)> {
            let ev = linalg::sym_eigenvalues(m, d);
            let (lo, hi) = (ev[0], ev[d - 1]);
            if !linalg::is_symmetric(m, d, 1e-10) || !(lo > 0.0) || !hi.is_finite() {
                return Err(LabError::Ellipticity {
                    point: z.to_vec(),
                    min: lo,
                    max: hi,
                });
            }
            Ok((lo, hi))
        };
        match self {
            CoefficientField::Constant(m) => check(m, &[0.0; 3][..d]),
            _ => {
                let half = [0.5; 3];
                let per_cell: Vec<Result<(f64, f64)>> = (0..grid.cell_count())
                    .into_par_iter()
                    .map(|c| {
                        let z = grid.cell_center(c);
                        check(&self.eval_in_cell(grid, c, &half, &z), &z[..d])
                    })
                    .collect();
                let mut lo = f64::INFINITY;
                let mut hi = 0.0f64;
                for r in per_cell {
                    let (a, b) = r?;
                    lo = lo.min(a);
                    hi = hi.max(b);
                }
                Ok((lo, hi))
            }
        }
    }
}

/// Full problem instance.
#[derive(Clone)]
pub struct ProblemSpec {
    pub grid: GridSpec,
    pub shape: Shape,
    pub eps: f64,
    pub weight: WeightSpec,
    pub quadrature: QuadratureRule,
    pub coefficient: CoefficientField,
    /// Scalar source `f`.
    pub source: ScalarFn,
    /// Vector field `F` (entries beyond `d` ignored).
    pub flux: VectorFn,
    /// Dirichlet data on `{y = 0}` and the hole, evaluated at `(x, 0)`.
    pub psi: ScalarFn,
    /// Outer Dirichlet data `g`.
    pub outer: ScalarFn,
    pub solver: SolverOptions,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("grid", &self.grid)
            .field("shape", &self.shape)
            .field("eps", &self.eps)
            .field("weight", &self.weight)
            .field("quadrature", &self.quadrature)
            .field("coefficient", &self.coefficient)
            .field("solver", &self.solver)
            .finish_non_exhaustive()
    }
}

pub fn zero_scalar() -> ScalarFn {
    Arc::new(|_| 0.0)
}

pub fn zero_vector() -> VectorFn {
    Arc::new(|_| [0.0; 3])
}

impl ProblemSpec {
    /// Homogeneous problem with `A = I` and zero data everywhere.
    pub fn new(grid: GridSpec, a: f64) -> Result<Self> {
        let weight = WeightSpec::new(a, grid.n, grid.d)?;
        Ok(Self {
            coefficient: CoefficientField::identity(grid.d),
            grid,
            shape: Shape::Box,
            eps: 0.0,
            weight,
            quadrature: QuadratureRule::default(),
            source: zero_scalar(),
            flux: zero_vector(),
            psi: zero_scalar(),
            outer: zero_scalar(),
            solver: SolverOptions::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.weight.d != self.grid.d || self.weight.n != self.grid.n {
            return Err(LabError::InvalidProblem(
                "weight dimensions differ from the grid".into(),
            ));
        }
        if self.grid.n == self.grid.d {
            let v = (self.psi)(&[0.0; 3][..self.grid.d]);
            if v != 0.0 {
                return Err(LabError::InvalidProblem(format!(
                    "for n = d the Dirichlet datum on the origin must be 0, got {v}"
                )));
            }
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(LabError::InvalidProblem("solver tolerances must be positive".into()));
        }
        Ok(())
    }

    /// `psi` evaluated at the projection `(x, 0)` of `z`.
    pub fn psi_at(&self, z: &[f64]) -> f64 {
        let mut p = [0.0; 3];
        let dx = self.grid.d - self.grid.n;
        p[..dx].copy_from_slice(&z[..dx]);
        (self.psi)(&p[..self.grid.d])
    }
}

/// Assembled (unconstrained) system together with the discretization it
/// came from.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Load before constraint elimination.
    pub load: Vec<f64>,
    /// `Some(value)` for constrained DOFs once constraints are applied.
    pub constraints: Vec<Option<f64>>,
    pub lambda: f64,
    pub big_lambda: f64,
}

impl LinearSystem {
    pub fn free_mask(&self) -> Vec<bool> {
        self.constraints.iter().map(|c| c.is_none()).collect()
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.constraints.len())
            .filter(|&i| self.constraints[i].is_none())
            .collect()
    }

    pub fn constrained_count(&self) -> usize {
        self.constraints.iter().filter(|c| c.is_some()).count()
    }
}

fn stencil_pattern(grid: &Grid) -> Vec<Vec<usize>> {
    let d = grid.d();
    let np = grid.nodes_per_axis() as isize;
    let offsets: Vec<[isize; 3]> = (0..3usize.pow(d as u32))
        .map(|o| {
            let mut off = [0isize; 3];
            let mut rem = o;
            for k in (0..d).rev() {
                off[k] = (rem % 3) as isize - 1;
                rem /= 3;
            }
            off
        })
        .collect();
    (0..grid.node_count())
        .into_par_iter()
        .map(|i| {
            let m = grid.node_multi(i);
            let mut row = Vec::with_capacity(offsets.len());
            for off in &offsets {
                let mut ok = true;
                let mut mm = [0usize; 3];
                for k in 0..d {
                    let v = m[k] as isize + off[k];
                    if v < 0 || v >= np {
                        ok = false;
                        break;
                    }
                    mm[k] = v as usize;
                }
                if ok {
                    row.push(grid.node_index(&mm[..d]));
                }
            }
            row
        })
        .collect()
}

struct ElementContribution {
    k: [[f64; 8]; 8],
    b: [f64; 8],
}

fn element_contribution(spec: &ProblemSpec, grid: &Grid, quad: &Quadrature, cell: usize) -> ElementContribution {
    let d = grid.d();
    let nc = 1usize << d;
    let h = grid.h;
    let lo = grid.cell_lo(cell);
    let mut k = [[0.0; 8]; 8];
    let mut b = [0.0; 8];
    quad.for_each_cell_point(grid, cell, |z, w| {
        let zs = &z[..d];
        let xi = local_coords(zs, &lo, h, d);
        let mut phi = [0.0; 8];
        let mut grad = [[0.0; 3]; 8];
        for c in 0..nc {
            let mut p = 1.0;
            let mut g = [1.0; 3];
            for ax in 0..d {
                let on = c >> ax & 1 == 1;
                let f = if on { xi[ax] } else { 1.0 - xi[ax] };
                let df = if on { 1.0 / h } else { -1.0 / h };
                p *= f;
                for (m, gm) in g.iter_mut().enumerate().take(d) {
                    *gm *= if m == ax { df } else { f };
                }
            }
            phi[c] = p;
            grad[c] = g;
        }
        let a = spec.coefficient.eval_in_cell(grid, cell, &xi, zs);
        let f = (spec.source)(zs);
        let flux = (spec.flux)(zs);
        for i in 0..nc {
            let mut agi = [0.0; 3];
            linalg::mat_vec(&a, &grad[i], d, &mut agi);
            for j in i..nc {
                let v = w * linalg::dot(&agi, &grad[j], d);
                k[i][j] += v;
            }
            b[i] += w * (f * phi[i] - linalg::dot(&flux, &grad[i], d));
        }
    });
    // The coefficient is symmetric; use A grad phi_i . grad phi_j = A grad phi_j . grad phi_i.
    for i in 0..nc {
        for j in 0..i {
            k[i][j] = k[j][i];
        }
    }
    ElementContribution { k, b }
}

const ASSEMBLY_CHUNK: usize = 8192;

/// Everything derived from a [`ProblemSpec`] that downstream estimators need.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: Grid,
    pub mask: DomainMask,
    pub quad: Quadrature,
}

impl Discretization {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let grid = build_grid(spec.grid.clone())?;
        let mask = classify_nodes(&grid, spec.shape, spec.eps)?;
        let quad = Quadrature::new(spec.weight.clone(), spec.quadrature)?;
        Ok(Self { grid, mask, quad })
    }
}

/// Assembles stiffness and load; cells are computed in parallel and merged
/// in cell order.
pub fn assemble(spec: &ProblemSpec, disc: &Discretization) -> Result<LinearSystem> {
    let grid = &disc.grid;
    let (lambda, big_lambda) = spec.coefficient.ellipticity_bounds(grid)?;
    let mut matrix = CsrMatrix::from_pattern(stencil_pattern(grid));
    let mut rhs = vec![0.0; grid.node_count()];
    let nc = grid.corners_per_cell();
    let cells: Vec<usize> = (0..grid.cell_count())
        .filter(|&c| disc.mask.active_cells[c])
        .collect();
    for chunk in cells.chunks(ASSEMBLY_CHUNK) {
        let contributions: Vec<ElementContribution> = chunk
            .par_iter()
            .map(|&c| element_contribution(spec, grid, &disc.quad, c))
            .collect();
        for (&cell, ec) in chunk.iter().zip(&contributions) {
            let nodes = grid.cell_nodes(cell);
            for i in 0..nc {
                rhs[nodes[i]] += ec.b[i];
                for j in 0..nc {
                    matrix.add(nodes[i], nodes[j], ec.k[i][j]);
                }
            }
        }
    }
    Ok(LinearSystem {
        matrix,
        load: rhs.clone(),
        rhs,
        constraints: vec![None; grid.node_count()],
        lambda,
        big_lambda,
    })
}

/// Prescribed values per node: `psi(x)` on Sigma0 and on the hole, `g` on
/// the outer boundary, and 0 on excluded nodes.
pub fn constraint_values(spec: &ProblemSpec, grid: &Grid, mask: &DomainMask) -> Result<Vec<Option<f64>>> {
    let d = grid.d();
    let tol = 1e-9;
    (0..grid.node_count())
        .map(|i| {
            let z = grid.node_coords(i);
            let zs = &z[..d];
            match mask.classes[i] {
                NodeClass::Interior => Ok(None),
                NodeClass::Excluded => Ok(Some(0.0)),
                NodeClass::OuterBoundary => Ok(Some((spec.outer)(zs))),
                NodeClass::HoleConstrained => Ok(Some(spec.psi_at(zs))),
                NodeClass::Sigma0 => {
                    let v = spec.psi_at(zs);
                    if mask.on_outer[i] {
                        let g = (spec.outer)(zs);
                        if (g - v).abs() > tol * (1.0 + v.abs()) {
                            return Err(LabError::ConflictingConstraint {
                                node: i,
                                first: v,
                                second: g,
                            });
                        }
                    }
                    Ok(Some(v))
                }
            }
        })
        .collect()
}

/// Eliminates constrained DOFs symmetrically: their columns move to the
/// right-hand side, and CG works on the free block only.
pub fn apply_dirichlet(mut system: LinearSystem, values: Vec<Option<f64>>) -> Result<LinearSystem> {
    if values.len() != system.rhs.len() {
        return Err(LabError::InvalidProblem("constraint vector has wrong length".into()));
    }
    let uc: Vec<f64> = values.iter().map(|v| v.unwrap_or(0.0)).collect();
    let kuc = system.matrix.mul_vec(&uc);
    for (i, v) in values.iter().enumerate() {
        match v {
            None => system.rhs[i] -= kuc[i],
            Some(val) => system.rhs[i] = *val,
        }
    }
    system.constraints = values;
    Ok(system)
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Vec<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
    pub energy: f64,
    pub wall_time: f64,
    pub residual_history: Vec<f64>,
}

/// Runs CG on a constrained system.
pub fn solve_cg(system: &LinearSystem, opts: SolverOptions) -> Result<SolveResult> {
    let start = Instant::now();
    let free = system.free_mask();
    let x0: Vec<f64> = system.constraints.iter().map(|c| c.unwrap_or(0.0)).collect();
    let out = conjugate_gradient(&system.matrix, &system.rhs, &free, &x0, opts)?;
    let energy = energy_from(&system.matrix, &system.load, &out.x);
    Ok(SolveResult {
        u: out.x,
        relative_residual: out.relative_residual,
        iterations: out.iterations,
        energy,
        wall_time: start.elapsed().as_secs_f64(),
        residual_history: out.history,
    })
}

/// `J(v) = v.Kv/2 - b.v` with the load before elimination, which
/// equals `int w (A grad v . grad v / 2 - f v + F . grad v)` on Q1 fields.
pub fn energy_from(matrix: &CsrMatrix, load: &[f64], v: &[f64]) -> f64 {
    let kv = matrix.mul_vec(v);
    0.5 * det_dot(v, &kv) - det_dot(load, v)
}

/// A solved (or solvable) problem holding its discretization and raw load.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub disc: Discretization,
    pub system: LinearSystem,
}

impl Problem {
    pub fn build(spec: ProblemSpec) -> Result<Self> {
        let disc = Discretization::new(&spec)?;
        let raw = assemble(&spec, &disc)?;
        let values = constraint_values(&spec, &disc.grid, &disc.mask)?;
        let system = apply_dirichlet(raw, values)?;
        Ok(Self {
            spec,
            disc,
            system,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.disc.grid
    }

    pub fn energy(&self, v: &[f64]) -> f64 {
        energy_from(&self.system.matrix, &self.system.load, v)
    }

    pub fn solve(&self) -> Result<SolveResult> {
        solve_cg(&self.system, self.spec.solver)
    }

    /// Weak residual `K u - b` restricted to free rows.
    pub fn galerkin_residual(&self, u: &[f64]) -> Vec<f64> {
        let ku = self.system.matrix.mul_vec(u);
        (0..u.len())
            .map(|i| {
                if self.system.constraints[i].is_none() {
                    ku[i] - self.system.load[i]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Builds, assembles, constrains and solves.
pub fn solve_problem(spec: ProblemSpec) -> Result<(Problem, SolveResult)> {
    let p = Problem::build(spec)?;
    let r = p.solve()?;
    Ok((p, r))
}

/// `J(field)` for a spec, assembling on the fly.
pub fn energy(field: &[f64], spec: &ProblemSpec) -> Result<f64> {
    let p = Problem::build(spec.clone())?;
    Ok(p.energy(field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec2(nodes: usize, a: f64) -> ProblemSpec {
        ProblemSpec::new(GridSpec::new(2, 2, nodes), a).unwrap()
    }

    fn radial(a: f64, n: f64) -> ScalarFn {
        let e = 2.0 - a - n;
        Arc::new(move |z: &[f64]| (z[0] * z[0] + z[1] * z[1]).powf(0.5 * e))
    }

    #[test]
    fn stiffness_symmetric_and_kills_constants() {
        let spec = spec2(9, -1.5);
        let disc = Discretization::new(&spec).unwrap();
        let sys = assemble(&spec, &disc).unwrap();
        assert!(sys.matrix.is_symmetric(1e-12));
        assert!(sys.matrix.diagonal().iter().all(|&v| v > 0.0));
        let k1 = sys.matrix.mul_vec(&vec![1.0; 81]);
        let scale = sys.matrix.diagonal().iter().fold(0.0f64, |m, v| m.max(*v));
        assert!(k1.iter().all(|v| v.abs() < 1e-12 * scale));
    }

    #[test]
    fn flux_load_sign() {
        let mut spec = spec2(9, -1.5);
        spec.flux = Arc::new(|_| [-1.0, -1.0, 0.0]);
        let disc = Discretization::new(&spec).unwrap();
        let sys = assemble(&spec, &disc).unwrap();
        // Oracle: + int w (1,1) . grad phi_i, via the stiffness of A = I
        // applied to the field y1 + y2 (grad = (1,1) exactly on Q1).
        let lin: Vec<f64> = disc.grid.sample(|z| z[0] + z[1]);
        let plain = assemble(&spec2(9, -1.5), &disc).unwrap();
        let oracle = plain.matrix.mul_vec(&lin);
        for (b, o) in sys.rhs.iter().zip(&oracle) {
            assert!((b - o).abs() < 1e-12 * (1.0 + o.abs()));
        }
    }

    #[test]
    fn random_spd_gives_positive_free_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2usize, 3] {
            let b: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut a = linalg::ZERO;
            for i in 0..d {
                for j in 0..d {
                    a[i][j] = (0..d).map(|k| b[i * d + k] * b[j * d + k]).sum::<f64>();
                }
                a[i][i] += 0.5;
            }
            let mut spec = ProblemSpec::new(GridSpec::new(d, 2, 5), -1.2).unwrap();
            spec.coefficient = CoefficientField::Constant(a);
            spec.source = Arc::new(|z| z[0].cos());
            let p = Problem::build(spec).unwrap();
            let free = p.system.free_dofs();
            let dense = p.system.matrix.dense_submatrix(&free);
            let m = DMatrix::from_fn(free.len(), free.len(), |i, j| dense[i][j]);
            let ev = SymmetricEigen::new(m).eigenvalues;
            assert!(ev.iter().all(|&l| l > 0.0), "min eig {}", ev.min());
            let r = p.solve().unwrap();
            assert!(r.relative_residual <= 1e-10);
        }
    }

    #[test]
    fn constraint_bookkeeping() {
        let mut spec = spec2(17, -1.5);
        spec.outer = radial(-1.5, 2.0);
        let p = Problem::build(spec).unwrap();
        let m = &p.disc.mask;
        assert_eq!(
            p.system.constrained_count(),
            m.count(NodeClass::OuterBoundary) + m.count(NodeClass::Sigma0)
        );
    }

    #[test]
    fn hole_with_zero_data_gives_zero() {
        let mut spec = spec2(9, -1.5);
        spec.eps = 0.25;
        let p = Problem::build(spec).unwrap();
        let r = p.solve().unwrap();
        assert!(r.u.iter().all(|&v| v == 0.0));
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn sigma0_values_follow_psi_in_three_d() {
        let mut spec = ProblemSpec::new(GridSpec::new(3, 2, 5), -1.5).unwrap();
        spec.psi = Arc::new(|z| z[0]);
        spec.outer = Arc::new(|z| z[0]);
        let p = Problem::build(spec).unwrap();
        for i in p.disc.mask.nodes_of(NodeClass::Sigma0) {
            assert_eq!(p.system.constraints[i], Some(p.grid().node_coords(i)[0]));
        }
    }

    #[test]
    fn conflicting_constraint_rejected() {
        let mut spec = ProblemSpec::new(GridSpec::new(3, 2, 5), -1.5).unwrap();
        spec.psi = Arc::new(|z| z[0]);
        spec.outer = Arc::new(|_| 7.0);
        assert!(matches!(
            Problem::build(spec),
            Err(LabError::ConflictingConstraint { .. })
        ));
    }

    #[test]
    fn nonzero_point_datum_rejected_when_n_equals_d() {
        let mut spec = spec2(9, -1.5);
        spec.psi = Arc::new(|_| 1.0);
        assert!(Problem::build(spec).is_err());
    }

    #[test]
    fn loss_of_ellipticity_aborts() {
        let mut spec = spec2(9, -1.5);
        spec.coefficient = CoefficientField::Callback(Arc::new(|z| {
            diag(&[1.0, if z[0] > 0.5 { -1.0 } else { 1.0 }])
        }));
        assert!(matches!(Problem::build(spec), Err(LabError::Ellipticity { .. })));
    }

    #[test]
    fn solution_is_energy_minimizer_and_galerkin_orthogonal() {
        let mut spec = spec2(17, -1.5);
        spec.outer = radial(-1.5, 2.0);
        spec.source = Arc::new(|z| 1.0 + z[0]);
        let (p, r) = solve_problem(spec).unwrap();
        let j0 = p.energy(&r.u);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let w: Vec<f64> = (0..r.u.len())
                .map(|i| if p.system.constraints[i].is_none() { rng.random_range(-1.0..1.0) } else { 0.0 })
                .collect();
            for t in [0.1, -0.1, 0.01, -0.01] {
                let v: Vec<f64> = r.u.iter().zip(&w).map(|(u, w)| u + t * w).collect();
                assert!(p.energy(&v) >= j0);
            }
        }
        let res = p.galerkin_residual(&r.u);
        let scale = p.system.load.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        assert!(res.iter().all(|v| v.abs() < 1e-8 * scale));
    }

    #[test]
    fn zero_field_zero_energy() {
        let spec = spec2(9, -1.5);
        assert_eq!(energy(&vec![0.0; 81], &spec).unwrap(), 0.0);
    }

    #[test]
    fn counterexample_energy_identity() {
        let mut spec = spec2(33, -1.5);
        spec.flux = Arc::new(|_| [-1.0, -1.0, 0.0]);
        let p = Problem::build(spec).unwrap();
        let u = p.grid().sample(|z| z[0] + z[1]);
        let ku = p.system.matrix.mul_vec(&u);
        let lhs = det_dot(&u, &ku);
        // -int w F . grad u = load . u for f = 0.
        let rhs = det_dot(&p.system.load, &u);
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs());
    }

    #[test]
    fn discrete_maximum_principle_shadow() {
        let mut spec = spec2(33, -0.5);
        spec.outer = Arc::new(|z| (3.0 * z[0]).sin() + z[1]);
        let (p, r) = solve_problem(spec).unwrap();
        let g: Vec<f64> = p.system.constraints.iter().flatten().copied().collect();
        let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(r.u.iter().all(|&v| v >= lo - 1e-8 && v <= hi + 1e-8));
    }

    #[test]
    fn linear_x_reproduced_exactly() {
        let mut spec = ProblemSpec::new(GridSpec::new(3, 2, 9), -1.5).unwrap();
        spec.psi = Arc::new(|z| 2.0 * z[0]);
        spec.outer = Arc::new(|z| 2.0 * z[0]);
        let (p, r) = solve_problem(spec).unwrap();
        for i in 0..r.u.len() {
            let z = p.grid().node_coords(i);
            assert!((r.u[i] - 2.0 * z[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn nodal_coefficient_matches_constant() {
        let spec_c = {
            let mut s = spec2(9, -1.2);
            s.coefficient = CoefficientField::Constant(diag(&[2.0, 0.5]));
            s
        };
        let spec_n = {
            let mut s = spec2(9, -1.2);
            s.coefficient = CoefficientField::Nodal(Arc::new(vec![diag(&[2.0, 0.5]); 81]));
            s
        };
        let a = Problem::build(spec_c).unwrap();
        let b = Problem::build(spec_n).unwrap();
        for (x, y) in a.system.matrix.values.iter().zip(&b.system.matrix.values) {
            assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }
}
