//! Small fixed-size dense helpers. Matrices are stored padded to 3x3 and only
//! the leading `dim x dim` block is meaningful.

use nalgebra::{DMatrix, SymmetricEigen};

pub type Mat = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

pub const ZERO: Mat = [[0.0; 3]; 3];

pub fn identity(dim: usize) -> Mat {
    let mut m = ZERO;
    for (i, row) in m.iter_mut().enumerate().take(dim) {
        row[i] = 1.0;
    }
    m
}

pub fn diag(entries: &[f64]) -> Mat {
    let mut m = ZERO;
    for (i, &v) in entries.iter().enumerate() {
        m[i][i] = v;
    }
    m
}

pub fn mat_vec(m: &Mat, v: &[f64], dim: usize, out: &mut [f64]) {
    for i in 0..dim {
        out[i] = (0..dim).map(|j| m[i][j] * v[j]).sum();
    }
}

pub fn dot(a: &[f64], b: &[f64], dim: usize) -> f64 {
    (0..dim).map(|i| a[i] * b[i]).sum()
}

pub fn mat_mul(a: &Mat, b: &Mat, dim: usize) -> Mat {
    let mut c = ZERO;
    for i in 0..dim {
        for j in 0..dim {
            c[i][j] = (0..dim).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn transpose(a: &Mat, dim: usize) -> Mat {
    let mut t = ZERO;
    for i in 0..dim {
        for j in 0..dim {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn to_dmatrix(m: &Mat, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| m[i][j])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Mat {
    let mut out = ZERO;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(m: &Mat, dim: usize) -> Vec<f64> {
    let dm = to_dmatrix(m, dim);
    let sym = (&dm + dm.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn is_symmetric(m: &Mat, dim: usize, tol: f64) -> bool {
    let scale = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .map(|(i, j)| m[i][j].abs())
        .fold(0.0, f64::max)
        .max(1.0);
    (0..dim).all(|i| (0..dim).all(|j| (m[i][j] - m[j][i]).abs() <= tol * scale))
}

pub fn inverse(m: &Mat, dim: usize) -> Option<Mat> {
    to_dmatrix(m, dim).try_inverse().map(|inv| from_dmatrix(&inv))
}

/// `m^p` for a symmetric positive definite matrix through its eigen-decomposition.
pub fn spd_power(m: &Mat, dim: usize, p: f64) -> Option<Mat> {
    let eig = SymmetricEigen::new(to_dmatrix(m, dim));
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return None;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(p)));
    let r = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    Some(from_dmatrix(&r))
}
