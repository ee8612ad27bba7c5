//! Tensor grids on boxes in R^d = R^{d-n} x R^n and node classification
//! relative to the singular set {|y| = 0}, the tube {|y| <= eps} and the
//! outer boundary.
//!
//! Coordinates are split by position: the first `d - n` axes are `x`, the
//! last `n` axes are `y`. Nodes and cells are indexed lexicographically with
//! the first axis slowest.

use std::io::Write;

use crate::error::{LabError, Result};
use crate::linalg::{self, Mat};

pub type Point = [f64; 3];

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub bounds: Vec<(f64, f64)>,
    pub nodes_per_axis: usize,
}

impl GridSpec {
    /// Grid on `[-1, 1]^d`.
    pub fn new(d: usize, n: usize, nodes_per_axis: usize) -> Self {
        Self::cube(d, n, nodes_per_axis, 1.0)
    }

    /// Grid on `[-half_width, half_width]^d`.
    pub fn cube(d: usize, n: usize, nodes_per_axis: usize, half_width: f64) -> Self {
        Self {
            d,
            n,
            bounds: vec![(-half_width, half_width); d],
            nodes_per_axis,
        }
    }

    pub fn h(&self) -> f64 {
        let (lo, hi) = self.bounds[0];
        (hi - lo) / (self.nodes_per_axis - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_DIM).contains(&self.d) {
            return Err(LabError::InvalidGrid(format!(
                "d = {} outside 2..={MAX_DIM}",
                self.d
            )));
        }
        if self.n < 2 || self.n > self.d {
            return Err(LabError::InvalidGrid(format!(
                "codimension n = {} must satisfy 2 <= n <= d = {}",
                self.n, self.d
            )));
        }
        if self.nodes_per_axis < 5 || self.nodes_per_axis % 2 == 0 {
            return Err(LabError::InvalidGrid(format!(
                "nodes_per_axis = {} must be odd and >= 5",
                self.nodes_per_axis
            )));
        }
        if self.bounds.len() != self.d {
            return Err(LabError::InvalidGrid(format!(
                "{} bounds given for d = {}",
                self.bounds.len(),
                self.d
            )));
        }
        let len0 = self.bounds[0].1 - self.bounds[0].0;
        for (axis, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(hi > lo) {
                return Err(LabError::InvalidGrid(format!("axis {axis}: empty interval")));
            }
            if ((hi - lo) - len0).abs() > 1e-12 * len0 {
                return Err(LabError::InvalidGrid(
                    "all axes must have the same length so h is uniform".into(),
                ));
            }
        }
        let h = self.h();
        for axis in self.d - self.n..self.d {
            let (lo, hi) = self.bounds[axis];
            let k = -lo / h;
            if !(lo < 0.0 && hi > 0.0) || (k - k.round()).abs() > 1e-9 {
                return Err(LabError::InvalidGrid(format!(
                    "y-axis {axis} must contain 0 as an interior node"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: GridSpec,
    pub h: f64,
    stride: [usize; MAX_DIM],
    cell_stride: [usize; MAX_DIM],
}

/// Builds the grid, rejecting invalid specs.
pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    spec.validate()?;
    let d = spec.d;
    let np = spec.nodes_per_axis;
    let mut stride = [0; MAX_DIM];
    let mut cell_stride = [0; MAX_DIM];
    let mut s = 1;
    let mut cs = 1;
    for axis in (0..d).rev() {
        stride[axis] = s;
        cell_stride[axis] = cs;
        s *= np;
        cs *= np - 1;
    }
    Ok(Grid {
        h: spec.h(),
        spec,
        stride,
        cell_stride,
    })
}

impl Grid {
    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    /// Number of x-axes, `d - n`.
    pub fn dx(&self) -> usize {
        self.spec.d - self.spec.n
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.spec.nodes_per_axis
    }

    pub fn node_count(&self) -> usize {
        self.spec.nodes_per_axis.pow(self.spec.d as u32)
    }

    pub fn cell_count(&self) -> usize {
        (self.spec.nodes_per_axis - 1).pow(self.spec.d as u32)
    }

    pub fn corners_per_cell(&self) -> usize {
        1 << self.spec.d
    }

    pub fn node_multi(&self, idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        let np = self.spec.nodes_per_axis;
        for (axis, item) in m.iter_mut().enumerate().take(self.d()) {
            *item = (idx / self.stride[axis]) % np;
        }
        m
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        (0..self.d()).map(|k| multi[k] * self.stride[k]).sum()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.spec.bounds[axis].0 + i as f64 * self.h
    }

    pub fn node_coords(&self, idx: usize) -> Point {
        let m = self.node_multi(idx);
        let mut p = [0.0; MAX_DIM];
        for (axis, item) in p.iter_mut().enumerate().take(self.d()) {
            *item = self.coord(axis, m[axis]);
        }
        p
    }

    /// Euclidean norm of the y-part of a point.
    pub fn y_norm(&self, p: &[f64]) -> f64 {
        p[self.dx()..self.d()].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn z_norm(&self, p: &[f64]) -> f64 {
        p[..self.d()].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Neighbor along `axis` in direction `dir` (+1 / -1).
    pub fn neighbor(&self, idx: usize, axis: usize, dir: isize) -> Option<usize> {
        let i = self.node_multi(idx)[axis] as isize + dir;
        if i < 0 || i >= self.spec.nodes_per_axis as isize {
            None
        } else {
            Some((idx as isize + dir * self.stride[axis] as isize) as usize)
        }
    }

    pub fn is_boundary_node(&self, idx: usize) -> bool {
        let m = self.node_multi(idx);
        let last = self.spec.nodes_per_axis - 1;
        (0..self.d()).any(|k| m[k] == 0 || m[k] == last)
    }

    pub fn cell_multi(&self, cell: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        let nc = self.spec.nodes_per_axis - 1;
        for (axis, item) in m.iter_mut().enumerate().take(self.d()) {
            *item = (cell / self.cell_stride[axis]) % nc;
        }
        m
    }

    /// Lower corner of a cell.
    pub fn cell_lo(&self, cell: usize) -> Point {
        let m = self.cell_multi(cell);
        let mut p = [0.0; MAX_DIM];
        for (axis, item) in p.iter_mut().enumerate().take(self.d()) {
            *item = self.coord(axis, m[axis]);
        }
        p
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        let mut p = self.cell_lo(cell);
        for v in p.iter_mut().take(self.d()) {
            *v += 0.5 * self.h;
        }
        p
    }

    /// Node indices of a cell's corners; corner `c` is offset by one along
    /// axis `k` iff bit `k` of `c` is set.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 8] {
        let m = self.cell_multi(cell);
        let base = self.node_index(&m);
        let mut out = [0; 8];
        for (c, item) in out.iter_mut().enumerate().take(self.corners_per_cell()) {
            let mut idx = base;
            for k in 0..self.d() {
                if c >> k & 1 == 1 {
                    idx += self.stride[k];
                }
            }
            *item = idx;
        }
        out
    }

    /// Cells sharing node `idx`.
    pub fn node_cells(&self, idx: usize) -> Vec<usize> {
        let m = self.node_multi(idx);
        let nc = self.spec.nodes_per_axis - 1;
        let mut out = Vec::new();
        for c in 0..self.corners_per_cell() {
            let mut cell = 0;
            let mut ok = true;
            for k in 0..self.d() {
                let i = m[k] as isize - (c >> k & 1) as isize;
                if i < 0 || i >= nc as isize {
                    ok = false;
                    break;
                }
                cell += i as usize * self.cell_stride[k];
            }
            if ok {
                out.push(cell);
            }
        }
        out.sort_unstable();
        out
    }

    /// True when the cell's closure meets {y = 0}.
    pub fn cell_touches_sigma0(&self, cell: usize) -> bool {
        let lo = self.cell_lo(cell);
        (self.dx()..self.d()).all(|k| lo[k] <= 1e-12 * self.h && lo[k] + self.h >= -1e-12 * self.h)
    }

    /// Nodal samples of `f`.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.node_count())
            .map(|i| f(&self.node_coords(i)[..self.d()]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Sigma0,
    HoleConstrained,
    OuterBoundary,
    Excluded,
}

impl NodeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::Sigma0 => "sigma0",
            NodeClass::HoleConstrained => "hole_constrained",
            NodeClass::OuterBoundary => "outer_boundary",
            NodeClass::Excluded => "excluded",
        }
    }

    pub fn is_constrained(&self) -> bool {
        !matches!(self, NodeClass::Interior)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Box,
    Ball { radius: f64 },
}

#[derive(Debug, Clone)]
pub struct DomainMask {
    pub classes: Vec<NodeClass>,
    pub eps: f64,
    pub shape: Shape,
    /// Geometric outer-boundary membership, kept even when a node is classed
    /// on the singular set so constraint conflicts can be detected.
    pub on_outer: Vec<bool>,
    /// Cells taking part in assembly.
    pub active_cells: Vec<bool>,
}

impl DomainMask {
    pub fn count(&self, class: NodeClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    pub fn nodes_of(&self, class: NodeClass) -> Vec<usize> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_free(&self, node: usize) -> bool {
        self.classes[node] == NodeClass::Interior
    }
}

fn within_eps(r: f64, eps: f64) -> bool {
    r <= eps * (1.0 + 1e-12) + 1e-14
}

/// Classifies every node. Sigma0 and hole classes take priority over the
/// outer boundary.
pub fn classify_nodes(grid: &Grid, shape: Shape, eps: f64) -> Result<DomainMask> {
    if !(eps >= 0.0) {
        return Err(LabError::InvalidGrid(format!("eps = {eps} must be >= 0")));
    }
    let d = grid.d();
    let shape_radius = match shape {
        Shape::Box => grid.spec.bounds[grid.dx()..]
            .iter()
            .map(|&(lo, hi)| (-lo).min(hi))
            .fold(f64::INFINITY, f64::min),
        Shape::Ball { radius } => radius,
    };
    if eps >= shape_radius {
        return Err(LabError::InvalidGrid(format!(
            "eps = {eps} must be below the shape radius {shape_radius}"
        )));
    }
    let nn = grid.node_count();
    let (active_cells, on_outer, excluded) = match shape {
        Shape::Box => {
            let on_outer: Vec<bool> = (0..nn).map(|i| grid.is_boundary_node(i)).collect();
            (vec![true; grid.cell_count()], on_outer, vec![false; nn])
        }
        Shape::Ball { radius } => {
            let inside: Vec<bool> = (0..nn)
                .map(|i| grid.z_norm(&grid.node_coords(i)) < radius)
                .collect();
            let active: Vec<bool> = (0..grid.cell_count())
                .map(|c| {
                    grid.cell_nodes(c)[..grid.corners_per_cell()]
                        .iter()
                        .any(|&i| inside[i])
                })
                .collect();
            let mut touched = vec![false; nn];
            for (c, _) in active.iter().enumerate().filter(|(_, &a)| a) {
                for &i in &grid.cell_nodes(c)[..grid.corners_per_cell()] {
                    touched[i] = true;
                }
            }
            let on_outer: Vec<bool> = (0..nn).map(|i| touched[i] && !inside[i]).collect();
            let excluded: Vec<bool> = (0..nn).map(|i| !touched[i]).collect();
            (active, on_outer, excluded)
        }
    };
    let classes = (0..nn)
        .map(|i| {
            let p = grid.node_coords(i);
            let r = grid.y_norm(&p[..d]);
            if eps == 0.0 && r == 0.0 {
                NodeClass::Sigma0
            } else if eps > 0.0 && within_eps(r, eps) {
                NodeClass::HoleConstrained
            } else if excluded[i] {
                NodeClass::Excluded
            } else if on_outer[i] {
                NodeClass::OuterBoundary
            } else {
                NodeClass::Interior
            }
        })
        .collect();
    Ok(DomainMask {
        classes,
        eps,
        shape,
        on_outer,
        active_cells,
    })
}

/// The ellipsoid `{A^{-1} y . y < r^2}` in R^n (only meaningful when n = d).
#[derive(Debug, Clone)]
pub struct EllipsoidRegion {
    pub matrix: Mat,
    pub inverse: Mat,
    pub dim: usize,
    pub radius: f64,
}

impl EllipsoidRegion {
    pub fn new(matrix: Mat, dim: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(LabError::InvalidProblem(format!("radius {radius} must be > 0")));
        }
        if !linalg::is_symmetric(&matrix, dim, 1e-12)
            || linalg::sym_eigenvalues(&matrix, dim)[0] <= 0.0
        {
            return Err(LabError::InvalidProblem(
                "ellipsoid matrix must be symmetric positive definite".into(),
            ));
        }
        let inverse = linalg::inverse(&matrix, dim).expect("SPD matrix is invertible");
        Ok(Self {
            matrix,
            inverse,
            dim,
            radius,
        })
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        Self {
            radius,
            ..self.clone()
        }
    }

    /// Ellipsoidal radius `sqrt(A^{-1} y . y)`.
    pub fn rho(&self, y: &[f64]) -> f64 {
        let mut ay = [0.0; 3];
        linalg::mat_vec(&self.inverse, y, self.dim, &mut ay);
        linalg::dot(&ay, y, self.dim).max(0.0).sqrt()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.rho(y) < self.radius
    }

    /// Largest Euclidean extent of the ellipsoid.
    pub fn euclidean_extent(&self) -> f64 {
        let lmax = *linalg::sym_eigenvalues(&self.matrix, self.dim).last().unwrap();
        self.radius * lmax.sqrt()
    }
}

/// Sub-samples per axis used for partial-cell ellipsoid fractions.
pub const FRACTION_SUBSAMPLES: usize = 4;

/// Per-cell fraction of the cell lying in the ellipsoid, estimated from
/// `4^n` midpoint sub-samples; cells whose corners are all on one side are
/// classified exactly.
pub fn ellipsoid_membership(grid: &Grid, region: &EllipsoidRegion) -> Result<Vec<f64>> {
    if grid.n() != grid.d() {
        return Err(LabError::InvalidProblem(
            "ellipsoid membership requires n = d".into(),
        ));
    }
    Ok((0..grid.cell_count())
        .map(|c| cell_ellipsoid_fraction(grid, c, region))
        .collect())
}

pub(crate) fn cell_ellipsoid_fraction(grid: &Grid, cell: usize, region: &EllipsoidRegion) -> f64 {
    let d = grid.d();
    let lo = grid.cell_lo(cell);
    let h = grid.h;
    // The ellipsoid is convex, so corners inside imply the whole cell inside.
    let corners = 1usize << d;
    let mut inside = 0;
    let mut rho_min = f64::INFINITY;
    for c in 0..corners {
        let mut p = [0.0; 3];
        for k in 0..d {
            p[k] = lo[k] + if c >> k & 1 == 1 { h } else { 0.0 };
        }
        if region.contains(&p[..d]) {
            inside += 1;
        }
        rho_min = rho_min.min(region.rho(&p[..d]));
    }
    if inside == corners {
        return 1.0;
    }
    // Cell far outside: the nearest point of the cell is farther than the
    // corner-to-corner diameter allows.
    let mut center = lo;
    for v in center.iter_mut().take(d) {
        *v += 0.5 * h;
    }
    let lmin_inv = linalg::sym_eigenvalues(&region.inverse, d)[d - 1].sqrt();
    let half_diag = 0.5 * h * (d as f64).sqrt();
    if region.rho(&center[..d]) - lmin_inv * half_diag >= region.radius {
        return 0.0;
    }
    let s = FRACTION_SUBSAMPLES;
    let total = s.pow(d as u32);
    let mut hits = 0;
    for idx in 0..total {
        let mut p = [0.0; 3];
        let mut rem = idx;
        for k in 0..d {
            let j = rem % s;
            rem /= s;
            p[k] = lo[k] + (j as f64 + 0.5) * h / s as f64;
        }
        if region.contains(&p[..d]) {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Values of `field` at the Sigma0 nodes in lexicographic order.
pub fn restrict_to_sigma0(field: &[f64], mask: &DomainMask) -> Result<Vec<f64>> {
    if mask.eps > 0.0 {
        return Err(LabError::InvalidProblem(
            "trace on Sigma0 requires eps = 0".into(),
        ));
    }
    Ok(mask
        .classes
        .iter()
        .zip(field)
        .filter(|(&c, _)| c == NodeClass::Sigma0)
        .map(|(_, &v)| v)
        .collect())
}

/// CSV dump: `node,z0,..,class`.
pub fn write_mask_csv(grid: &Grid, mask: &DomainMask, mut out: impl Write) -> Result<()> {
    let d = grid.d();
    let coords: Vec<String> = (0..d).map(|k| format!("z{k}")).collect();
    writeln!(out, "node,{},class", coords.join(","))?;
    for i in 0..grid.node_count() {
        let p = grid.node_coords(i);
        let c: Vec<String> = p[..d].iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{i},{},{}", c.join(","), mask.classes[i].as_str())?;
    }
    Ok(())
}
