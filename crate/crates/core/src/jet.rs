//! Truncated multivariate Taylor jets in the variables `(x_0, .., x_{n-1}, t)`.
//!
//! A jet stores the Taylor coefficients of a smooth function at a base point,
//! truncated to spatial total degree `xdeg` and time degree `tdeg`. The set of
//! kept monomials is closed under division, so the truncated product is exact
//! on the kept coefficients and every derivative of the base value up to the
//! truncation is reproduced to roundoff. Closed-form geometries evaluate their
//! metric on jets, which gives curvature quantities and their derivatives
//! without finite differences.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Maximum number of variables (spatial plus time).
pub const MAX_VARS: usize = 8;

type Mono = [u8; MAX_VARS];

/// Monomial layout shared by all jets of the same truncation.
pub struct Shape {
    nx: usize,
    xdeg: usize,
    tdeg: usize,
    monos: Vec<Mono>,
    index: HashMap<Mono, u32>,
    mul: Vec<(u32, u32, u32)>,
    projections: Mutex<HashMap<(usize, usize), Arc<Vec<u32>>>>,
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Shape(nx={}, xdeg={}, tdeg={}, len={})", self.nx, self.xdeg, self.tdeg, self.monos.len())
    }
}

fn registry() -> &'static Mutex<HashMap<(usize, usize, usize), Arc<Shape>>> {
    static REG: OnceLock<Mutex<HashMap<(usize, usize, usize), Arc<Shape>>>> = OnceLock::new();
    REG.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Shape {
    /// Returns the shared shape for `nx` spatial variables truncated at the given degrees.
    pub fn get(nx: usize, xdeg: usize, tdeg: usize) -> Arc<Shape> {
        assert!(nx + 1 <= MAX_VARS, "too many jet variables");
        let key = (nx, xdeg, tdeg);
        if let Some(s) = registry().lock().unwrap().get(&key) {
            return s.clone();
        }
        let shape = Arc::new(Shape::build(nx, xdeg, tdeg));
        registry().lock().unwrap().entry(key).or_insert(shape).clone()
    }

    fn build(nx: usize, xdeg: usize, tdeg: usize) -> Shape {
        let mut spatial: Vec<Mono> = Vec::new();
        let mut cur = [0u8; MAX_VARS];
        fn rec(v: usize, nx: usize, left: usize, cur: &mut Mono, out: &mut Vec<Mono>) {
            if v == nx {
                out.push(*cur);
                return;
            }
            for e in 0..=left {
                cur[v] = e as u8;
                rec(v + 1, nx, left - e, cur, out);
            }
            cur[v] = 0;
        }
        rec(0, nx, xdeg, &mut cur, &mut spatial);
        let mut monos = Vec::new();
        for te in 0..=tdeg {
            for m in &spatial {
                let mut mm = *m;
                mm[nx] = te as u8;
                monos.push(mm);
            }
        }
        let sdeg = |m: &Mono| m[..nx].iter().map(|&e| e as usize).sum::<usize>();
        monos.sort_by_key(|m| (sdeg(m) + m[nx] as usize, m[nx], std::cmp::Reverse(*m)));
        let index: HashMap<Mono, u32> = monos.iter().enumerate().map(|(i, m)| (*m, i as u32)).collect();
        let mut mul = Vec::new();
        for (i, a) in monos.iter().enumerate() {
            for (j, b) in monos.iter().enumerate() {
                let mut s = [0u8; MAX_VARS];
                for v in 0..=nx {
                    s[v] = a[v] + b[v];
                }
                if let Some(&k) = index.get(&s) {
                    mul.push((i as u32, j as u32, k));
                }
            }
        }
        Shape { nx, xdeg, tdeg, monos, index, mul, projections: Mutex::new(HashMap::new()) }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn xdeg(&self) -> usize {
        self.xdeg
    }

    pub fn tdeg(&self) -> usize {
        self.tdeg
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    fn projection_to(&self, xdeg: usize, tdeg: usize) -> Arc<Vec<u32>> {
        if let Some(p) = self.projections.lock().unwrap().get(&(xdeg, tdeg)) {
            return p.clone();
        }
        let target = Shape::get(self.nx, xdeg, tdeg);
        let map: Vec<u32> = target.monos.iter().map(|m| self.index[m]).collect();
        let map = Arc::new(map);
        self.projections.lock().unwrap().insert((xdeg, tdeg), map.clone());
        map
    }
}

/// Truncated Taylor expansion of a scalar field.
#[derive(Clone)]
pub struct Jet {
    shape: Arc<Shape>,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet({:?}, value={})", self.shape, self.c[0])
    }
}

impl Jet {
    pub fn constant(shape: &Arc<Shape>, value: f64) -> Jet {
        let mut c = vec![0.0; shape.len()];
        c[0] = value;
        Jet { shape: shape.clone(), c }
    }

    pub fn zero(shape: &Arc<Shape>) -> Jet {
        Jet::constant(shape, 0.0)
    }

    /// The coordinate function `var` expanded at `value`; `var == nx` is time.
    pub fn variable(shape: &Arc<Shape>, var: usize, value: f64) -> Jet {
        assert!(var <= shape.nx);
        let mut j = Jet::constant(shape, value);
        let mut m = [0u8; MAX_VARS];
        m[var] = 1;
        if let Some(&k) = shape.index.get(&m) {
            j.c[k as usize] = 1.0;
        }
        j
    }

    /// Builds a jet in the variables `(x_var, t)` from the partial derivatives
    /// `derivs[k][m] = d^k/dx^k d^m/dt^m f` at the base point.
    pub fn from_partials(shape: &Arc<Shape>, var: usize, derivs: &[Vec<f64>]) -> Jet {
        let mut j = Jet::zero(shape);
        for (k, row) in derivs.iter().enumerate() {
            for (m, &d) in row.iter().enumerate() {
                let mut mono = [0u8; MAX_VARS];
                mono[var] += k as u8;
                mono[shape.nx] += m as u8;
                if let Some(&idx) = shape.index.get(&mono) {
                    j.c[idx as usize] = d / (factorial(k) * factorial(m));
                }
            }
        }
        j
    }

    pub fn shape(&self) -> &Arc<Shape> {
        &self.shape
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0.0)
    }

    /// Partial derivative of the base value for the multi-index `exps` (time last).
    pub fn partial(&self, exps: &[usize]) -> f64 {
        let mut m = [0u8; MAX_VARS];
        let mut fac = 1.0;
        for (v, &e) in exps.iter().enumerate() {
            m[v] = e as u8;
            fac *= factorial(e);
        }
        match self.shape.index.get(&m) {
            Some(&k) => self.c[k as usize] * fac,
            None => panic!("partial {:?} outside jet truncation {:?}", exps, self.shape),
        }
    }

    pub fn project(&self, xdeg: usize, tdeg: usize) -> Jet {
        if xdeg == self.shape.xdeg && tdeg == self.shape.tdeg {
            return self.clone();
        }
        assert!(xdeg <= self.shape.xdeg && tdeg <= self.shape.tdeg, "cannot raise jet degree");
        let map = self.shape.projection_to(xdeg, tdeg);
        Jet { shape: Shape::get(self.shape.nx, xdeg, tdeg), c: map.iter().map(|&i| self.c[i as usize]).collect() }
    }

    pub fn project_like(&self, other: &Arc<Shape>) -> Jet {
        self.project(other.xdeg, other.tdeg)
    }

    /// Partial derivative along `var`; the result loses one degree in that direction.
    pub fn deriv(&self, var: usize) -> Jet {
        let nx = self.shape.nx;
        let (xd, td) = if var < nx {
            assert!(self.shape.xdeg > 0, "spatial derivative of a degree-0 jet");
            (self.shape.xdeg - 1, self.shape.tdeg)
        } else {
            assert!(self.shape.tdeg > 0, "time derivative of a jet without time degree");
            (self.shape.xdeg, self.shape.tdeg - 1)
        };
        let target = Shape::get(nx, xd, td);
        let c = target
            .monos
            .iter()
            .map(|m| {
                let mut up = *m;
                up[var] += 1;
                let k = self.shape.index[&up];
                (m[var] as f64 + 1.0) * self.c[k as usize]
            })
            .collect();
        Jet { shape: target, c }
    }

    fn aligned(a: &Jet, b: &Jet) -> (Jet, Jet) {
        let xd = a.shape.xdeg.min(b.shape.xdeg);
        let td = a.shape.tdeg.min(b.shape.tdeg);
        (a.project(xd, td), b.project(xd, td))
    }

    fn same(a: &Jet, b: &Jet) -> bool {
        Arc::ptr_eq(&a.shape, &b.shape)
    }

    fn mul_same(&self, b: &Jet) -> Jet {
        let mut c = vec![0.0; self.c.len()];
        for &(i, j, k) in &self.shape.mul {
            c[k as usize] += self.c[i as usize] * b.c[j as usize];
        }
        Jet { shape: self.shape.clone(), c }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { shape: self.shape.clone(), c: self.c.iter().map(|x| x * s).collect() }
    }

    pub fn add_scaled(&mut self, other: &Jet, s: f64) {
        if Jet::same(self, other) {
            for (a, b) in self.c.iter_mut().zip(&other.c) {
                *a += s * b;
            }
        } else {
            let (a, b) = Jet::aligned(self, other);
            *self = a;
            for (x, y) in self.c.iter_mut().zip(&b.c) {
                *x += s * y;
            }
        }
    }

    /// Accumulates `s * a * b` into `self`.
    pub fn add_product(&mut self, a: &Jet, b: &Jet, s: f64) {
        let p = a * b;
        self.add_scaled(&p, s);
    }

    fn degree_bound(&self) -> usize {
        self.shape.xdeg + self.shape.tdeg
    }

    /// Evaluates `sum_k coeffs[k] (f - f0)^k`, the composition with a univariate
    /// function whose Taylor coefficients at `f0` are `coeffs`.
    pub fn compose(&self, coeffs: &[f64]) -> Jet {
        let mut dev = self.clone();
        dev.c[0] = 0.0;
        let kmax = self.degree_bound().min(coeffs.len() - 1);
        let mut out = Jet::constant(&self.shape, coeffs[kmax]);
        for k in (0..kmax).rev() {
            out = out.mul_same(&dev);
            out.c[0] += coeffs[k];
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let a0 = self.c[0];
        let k = self.degree_bound();
        let coeffs: Vec<f64> = (0..=k).map(|i| (-1.0f64).powi(i as i32) / a0.powi(i as i32 + 1)).collect();
        self.compose(&coeffs)
    }

    pub fn powf(&self, p: f64) -> Jet {
        let a0 = self.c[0];
        let k = self.degree_bound();
        let mut coeffs = Vec::with_capacity(k + 1);
        let mut binom = 1.0;
        for i in 0..=k {
            coeffs.push(binom * a0.powf(p - i as f64));
            binom *= (p - i as f64) / (i as f64 + 1.0);
        }
        self.compose(&coeffs)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn exp(&self) -> Jet {
        let e = self.c[0].exp();
        let coeffs: Vec<f64> = (0..=self.degree_bound()).map(|i| e / factorial(i)).collect();
        self.compose(&coeffs)
    }

    pub fn ln(&self) -> Jet {
        let a0 = self.c[0];
        let mut coeffs = vec![a0.ln()];
        for i in 1..=self.degree_bound() {
            coeffs.push((-1.0f64).powi(i as i32 + 1) / (i as f64 * a0.powi(i as i32)));
        }
        self.compose(&coeffs)
    }

    fn trig(&self, phase: usize) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        let cycle = [s, c, -s, -c];
        let coeffs: Vec<f64> = (0..=self.degree_bound()).map(|i| cycle[(i + phase) % 4] / factorial(i)).collect();
        self.compose(&coeffs)
    }

    pub fn sin(&self) -> Jet {
        self.trig(0)
    }

    pub fn cos(&self) -> Jet {
        self.trig(1)
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n < 0 {
            return self.recip().powi(-n);
        }
        let mut out = Jet::constant(&self.shape, 1.0);
        for _ in 0..n {
            out = out.mul_same(self);
        }
        out
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

macro_rules! jet_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                if Jet::same(self, rhs) {
                    f(self, rhs)
                } else {
                    let (a, b) = Jet::aligned(self, rhs);
                    f(&a, &b)
                }
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, |a, b| Jet { shape: a.shape.clone(), c: a.c.iter().zip(&b.c).map(|(x, y)| x + y).collect() });
jet_binop!(Sub, sub, |a, b| Jet { shape: a.shape.clone(), c: a.c.iter().zip(&b.c).map(|(x, y)| x - y).collect() });
jet_binop!(Mul, mul, |a, b| a.mul_same(b));
jet_binop!(Div, div, |a, b| a.mul_same(&b.recip()));

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

/// Number type on which closed-form metrics are written, implemented for
/// plain `f64` and for [`Jet`].
pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    /// A constant living in the same algebra as `self`.
    fn cst(&self, c: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn recip(&self) -> Self;
}

impl Scalar for f64 {
    fn cst(&self, c: f64) -> f64 {
        c
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn recip(&self) -> f64 {
        1.0 / *self
    }
}

impl Scalar for Jet {
    fn cst(&self, c: f64) -> Jet {
        Jet::constant(&self.shape, c)
    }
    fn sin(&self) -> Jet {
        Jet::sin(self)
    }
    fn cos(&self) -> Jet {
        Jet::cos(self)
    }
    fn exp(&self) -> Jet {
        Jet::exp(self)
    }
    fn ln(&self) -> Jet {
        Jet::ln(self)
    }
    fn sqrt(&self) -> Jet {
        Jet::sqrt(self)
    }
    fn recip(&self) -> Jet {
        Jet::recip(self)
    }
}

/// Inverse of a small dense matrix of jets (row-major), by Gauss-Jordan
/// elimination without pivoting. Intended for positive-definite metrics.
pub fn invert(m: &[Jet], n: usize) -> Vec<Jet> {
    let shape = m[0].shape().clone();
    let mut a: Vec<Jet> = m.to_vec();
    let mut inv: Vec<Jet> = (0..n * n).map(|k| Jet::constant(&shape, if k / n == k % n { 1.0 } else { 0.0 })).collect();
    for col in 0..n {
        let pr = a[col * n + col].recip();
        for j in 0..n {
            a[col * n + j] = &a[col * n + j] * &pr;
            inv[col * n + j] = &inv[col * n + j] * &pr;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col].clone();
            for j in 0..n {
                let aj = &a[col * n + j] * &f;
                a[row * n + j] = &a[row * n + j] - &aj;
                let ij = &inv[col * n + j] * &f;
                inv[row * n + j] = &inv[row * n + j] - &ij;
            }
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn product_matches_leibniz() {
        let s = Shape::get(2, 4, 1);
        let x = Jet::variable(&s, 0, 0.3);
        let y = Jet::variable(&s, 1, -0.7);
        let t = Jet::variable(&s, 2, 0.5);
        // f = x^2 y t + sin(x y)
        let f = &(&(&x * &x) * &y) * &t + (&x * &y).sin();
        // d^2/dx dy of x^2 y t = 2 x t
        // d^2/dx dy of sin(xy) = cos(xy) - xy sin(xy)
        let (x0, y0, t0) = (0.3f64, -0.7f64, 0.5f64);
        let exact = 2.0 * x0 * t0 + (x0 * y0).cos() - x0 * y0 * (x0 * y0).sin();
        assert!(close(f.partial(&[1, 1, 0]), exact, 1e-13));
        // d/dt d/dx: 2 x y
        assert!(close(f.partial(&[1, 0, 1]), 2.0 * x0 * y0, 1e-13));
    }

    #[test]
    fn elementary_functions_high_order() {
        let s = Shape::get(1, 6, 0);
        let x = Jet::variable(&s, 0, 0.4);
        let e = x.exp();
        for k in 0..=6 {
            assert!(close(e.partial(&[k, 0]), 0.4f64.exp(), 1e-13));
        }
        let l = (x.clone() + 1.0).ln();
        // d^3/dx^3 ln(1+x) = 2/(1+x)^3
        assert!(close(l.partial(&[3, 0]), 2.0 / 1.4f64.powi(3), 1e-12));
        let r = (x.clone() + 1.0).recip();
        // d^4 (1+x)^-1 = 24 (1+x)^-5
        assert!(close(r.partial(&[4, 0]), 24.0 / 1.4f64.powi(5), 1e-12));
        let q = (x.clone() + 1.0).sqrt();
        // d^2 sqrt(1+x) = -1/4 (1+x)^-3/2
        assert!(close(q.partial(&[2, 0]), -0.25 * 1.4f64.powf(-1.5), 1e-12));
        let c = x.cos();
        assert!(close(c.partial(&[5, 0]), 0.4f64.sin() * -1.0, 1e-12));
    }

    #[test]
    fn derivative_lowers_degree_and_projection_agrees() {
        let s = Shape::get(2, 3, 1);
        let x = Jet::variable(&s, 0, 1.0);
        let t = Jet::variable(&s, 2, 2.0);
        let f = &(&x * &x) * &(&x * &t);
        let dx = f.deriv(0);
        assert_eq!(dx.shape().xdeg(), 2);
        assert!(close(dx.partial(&[1, 0, 1]), 6.0, 1e-14));
        let p = f.project(2, 0);
        assert!(close(p.partial(&[2, 0, 0]), 6.0 * 1.0 * 2.0, 1e-14));
        // mixed-shape arithmetic truncates to the common shape
        let sum = &dx + &f;
        assert_eq!(sum.shape().xdeg(), 2);
    }

    #[test]
    fn matrix_inverse() {
        let s = Shape::get(1, 3, 0);
        let x = Jet::variable(&s, 0, 0.2);
        let one = Jet::constant(&s, 1.0);
        let m = vec![&one + &(&x * &x), x.clone(), x.clone(), one.clone() + 2.0];
        let inv = invert(&m, 2);
        // check m * inv = I at all orders
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Jet::zero(&s);
                for k in 0..2 {
                    acc.add_product(&m[i * 2 + k], &inv[k * 2 + j], 1.0);
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(close(acc.value(), want, 1e-14));
                for d in 1..=3 {
                    assert!(acc.partial(&[d, 0]).abs() < 1e-12);
                }
            }
        }
    }
}
