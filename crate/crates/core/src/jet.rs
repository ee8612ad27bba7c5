//! Second-order forward-mode automatic differentiation in up to three
//! variables, and a scalar abstraction so analytic fields can be written once
//! and evaluated either as plain `f64` or as a [`Jet`].

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::linalg::{Mat, ZERO};

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn c(v: f64) -> Self;
    fn value(&self) -> f64;
    fn powf(self, p: f64) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
}

impl Real for f64 {
    fn c(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

/// Value, gradient and Hessian of a scalar function of `z in R^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 3],
    pub h: Mat,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            g: [0.0; 3],
            h: ZERO,
        }
    }

    /// The coordinate function `z_k` evaluated at `value`.
    pub fn variable(value: f64, k: usize) -> Self {
        let mut g = [0.0; 3];
        g[k] = 1.0;
        Self { v: value, g, h: ZERO }
    }

    /// Seeds all coordinates of a point.
    pub fn point(z: &[f64]) -> [Jet; 3] {
        let mut out = [Jet::constant(0.0); 3];
        for (k, &v) in z.iter().enumerate().take(3) {
            out[k] = Jet::variable(v, k);
        }
        out
    }

    /// `g(self)` given `g`, `g'` and `g''` at `self.v`.
    fn chain(self, g0: f64, g1: f64, g2: f64) -> Self {
        let mut out = Jet::constant(g0);
        for i in 0..3 {
            out.g[i] = g1 * self.g[i];
            for j in 0..3 {
                out.h[i][j] = g1 * self.h[i][j] + g2 * self.g[i] * self.g[j];
            }
        }
        out
    }

    pub fn recip(self) -> Self {
        let x = self.v;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn laplacian(&self, dim: usize) -> f64 {
        (0..dim).map(|i| self.h[i][i]).sum()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut r = self;
        r.v += o.v;
        for i in 0..3 {
            r.g[i] += o.g[i];
            for j in 0..3 {
                r.h[i][j] += o.h[i][j];
            }
        }
        r
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        let mut r = self;
        r.v = -r.v;
        for i in 0..3 {
            r.g[i] = -r.g[i];
            for j in 0..3 {
                r.h[i][j] = -r.h[i][j];
            }
        }
        r
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut r = Jet::constant(self.v * o.v);
        for i in 0..3 {
            r.g[i] = self.v * o.g[i] + o.v * self.g[i];
            for j in 0..3 {
                r.h[i][j] = self.v * o.h[i][j]
                    + o.v * self.h[i][j]
                    + self.g[i] * o.g[j]
                    + o.g[i] * self.g[j];
            }
        }
        r
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Real for Jet {
    fn c(v: f64) -> Self {
        Jet::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn powf(self, p: f64) -> Self {
        let x = self.v;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }
    fn sqrt(self) -> Self {
        self.powf(0.5)
    }
    fn sin(self) -> Self {
        let x = self.v;
        self.chain(x.sin(), x.cos(), -x.sin())
    }
    fn cos(self) -> Self {
        let x = self.v;
        self.chain(x.cos(), -x.sin(), -x.cos())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
}

/// First-order part of `J` (gradient only; Hessian dropped).
fn first_order(v: f64, g: [f64; 3]) -> Jet {
    Jet { v, g, h: ZERO }
}

/// Evaluates `div V` where `V_i = w * (sum_j M_ij du_j + F_i)`, given
/// jets for `u`, `w`, `M` and `F`. Only values and gradients of `w`, `M`
/// and `F` are used; `u` needs its Hessian.
pub fn divergence_of_flux(dim: usize, u: &Jet, w: &Jet, m: &[[Jet; 3]; 3], f: &[Jet; 3]) -> f64 {
    let du: Vec<Jet> = (0..dim).map(|j| first_order(u.g[j], u.h[j])).collect();
    let w1 = first_order(w.v, w.g);
    let mut div = 0.0;
    for i in 0..dim {
        let mut flux = first_order(f[i].v, f[i].g);
        for j in 0..dim {
            flux = flux + first_order(m[i][j].v, m[i][j].g) * du[j];
        }
        div += (w1 * flux).g[i];
    }
    div
}

/// The forcing `f = -div(w (M grad u + F)) / w` at `z`, with all fields given
/// as generic functions evaluated on jets.
pub fn forcing_from_fields(
    dim: usize,
    z: &[f64],
    u: impl Fn(&[Jet; 3]) -> Jet,
    w: impl Fn(&[Jet; 3]) -> Jet,
    m: impl Fn(&[Jet; 3]) -> [[Jet; 3]; 3],
    flux: impl Fn(&[Jet; 3]) -> [Jet; 3],
) -> f64 {
    let p = Jet::point(&z[..dim]);
    let wj = w(&p);
    -divergence_of_flux(dim, &u(&p), &wj, &m(&p), &flux(&p)) / wj.v
}
