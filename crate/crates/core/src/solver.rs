//! Compressed-row sparse matrices and Jacobi-preconditioned conjugate
//! gradients with a fixed reduction order.

use rayon::prelude::*;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an all-zero matrix with the given sorted column pattern per row.
    pub fn from_pattern(pattern: Vec<Vec<usize>>) -> Self {
        let n = pattern.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in pattern {
            col_idx.extend(row);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(m: &[Vec<f64>]) -> Self {
        let pattern = m
            .iter()
            .map(|row| (0..row.len()).filter(|&j| row[j] != 0.0).collect())
            .collect();
        let mut csr = Self::from_pattern(pattern);
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    csr.add(i, j, v);
                }
            }
        }
        csr
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside the sparsity pattern"));
        self.values[p] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *yi = s;
        });
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol * scale))
    }

    /// Dense copy of the principal submatrix on `keep` indices.
    pub fn dense_submatrix(&self, keep: &[usize]) -> Vec<Vec<f64>> {
        keep.iter()
            .map(|&i| keep.iter().map(|&j| self.get(i, j)).collect())
            .collect()
    }
}

const DOT_CHUNK: usize = 4096;

/// Dot product whose rounding does not depend on the thread count: fixed
/// chunks are summed in parallel, then partials are added in order.
pub fn det_dot(a: &[f64], b: &[f64]) -> f64 {
    let partials: Vec<f64> = a
        .par_chunks(DOT_CHUNK)
        .zip(b.par_chunks(DOT_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partials.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub history: Vec<f64>,
}

/// Solves `K x = b` on the DOFs with `free[i] = true`, keeping the other
/// entries of `x0` fixed. Constrained columns must already be moved to `b`
/// (see `assembly::apply_dirichlet`); constrained rows are ignored.
pub fn conjugate_gradient(
    k: &CsrMatrix,
    b: &[f64],
    free: &[bool],
    x0: &[f64],
    opts: SolverOptions,
) -> Result<CgOutcome> {
    let n = k.n;
    let mut x = x0.to_vec();
    let diag = k.diagonal();
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            if free[i] && diag[i] > 0.0 {
                1.0 / diag[i]
            } else {
                0.0
            }
        })
        .collect();
    let mask = |v: &mut [f64]| {
        v.par_iter_mut()
            .zip(free.par_iter())
            .for_each(|(vi, &f)| {
                if !f {
                    *vi = 0.0
                }
            })
    };
    // Residual relative to the free part of b.
    let mut bf = b.to_vec();
    mask(&mut bf);
    let bnorm = det_dot(&bf, &bf).sqrt();
    // Search directions live on free DOFs; constrained entries of x stay put
    // and their influence was eliminated into b, so apply K to the free part.
    let mut xf = x.clone();
    mask(&mut xf);
    let mut r = k.mul_vec(&xf);
    r.par_iter_mut().zip(&bf).for_each(|(ri, bi)| *ri = bi - *ri);
    mask(&mut r);
    if bnorm == 0.0 {
        let rn = det_dot(&r, &r).sqrt();
        if rn == 0.0 {
            return Ok(CgOutcome {
                x,
                iterations: 0,
                relative_residual: 0.0,
                history: vec![0.0],
            });
        }
    }
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut history = vec![det_dot(&r, &r).sqrt() / scale];
    if history[0] <= opts.tol {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: history[0],
            history,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = det_dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=opts.max_iter {
        k.mul_vec_into(&p, &mut ap);
        mask(&mut ap);
        let pap = det_dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LabError::NegativeCurvature {
                iteration: it,
                curvature: pap,
            });
        }
        let alpha = rz / pap;
        x.par_iter_mut()
            .zip(p.par_iter())
            .for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut()
            .zip(ap.par_iter())
            .for_each(|(ri, ai)| *ri -= alpha * ai);
        let rel = det_dot(&r, &r).sqrt() / scale;
        history.push(rel);
        if rel <= opts.tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                relative_residual: rel,
                history,
            });
        }
        z.par_iter_mut()
            .zip(r.par_iter().zip(inv_diag.par_iter()))
            .for_each(|(zi, (ri, di))| *zi = ri * di);
        let rz_new = det_dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut()
            .zip(z.par_iter())
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(LabError::NotConverged {
        iterations: opts.max_iter,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match i.abs_diff(j) {
                        0 => 2.0,
                        1 => -1.0,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        CsrMatrix::from_dense(&dense)
    }

    #[test]
    fn zero_rhs_gives_zero_in_zero_iterations() {
        let k = laplace_1d(10);
        let out = conjugate_gradient(&k, &[0.0; 10], &[true; 10], &[0.0; 10], SolverOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn solves_tridiagonal_system() {
        let n = 50;
        let k = laplace_1d(n);
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = k.mul_vec(&exact);
        let out = conjugate_gradient(&k, &b, &vec![true; n], &vec![0.0; n], SolverOptions::default()).unwrap();
        assert!(out.relative_residual <= 1e-10);
        for (x, e) in out.x.iter().zip(&exact) {
            assert!((x - e).abs() < 1e-8);
        }
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let dense = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
        let k = CsrMatrix::from_dense(&dense);
        let err = conjugate_gradient(&k, &[1.0, 1.0], &[true, true], &[0.0, 0.0], SolverOptions::default())
            .unwrap_err();
        assert!(matches!(err, LabError::NegativeCurvature { .. }));
    }

    #[test]
    fn iteration_cap_reports_history() {
        let k = laplace_1d(100);
        let b = vec![1.0; 100];
        let err = conjugate_gradient(
            &k,
            &b,
            &vec![true; 100],
            &vec![0.0; 100],
            SolverOptions { tol: 1e-14, max_iter: 3 },
        )
        .unwrap_err();
        match err {
            LabError::NotConverged { iterations, history } => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 4);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn det_dot_matches_sequential_sum_for_small_vectors() {
        let a: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let s: f64 = a.iter().map(|v| v * v).sum();
        assert_eq!(det_dot(&a, &a), s);
    }
}
