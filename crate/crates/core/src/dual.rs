//! Forward-mode perturbation carriers.
//!
//! [`Dual<T>`] carries a value together with its partial derivatives along the
//! chart coordinates. Nesting (`Dual<Dual<f64>>`) yields second derivatives,
//! and every level of nesting adds one more order. All field, tensor and
//! solver code in this crate is generic over [`Scalar`], so the same routine
//! produces plain values (`f64`) or derivatives of any order.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic carrier: `f64` or a (possibly nested) [`Dual`].
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant (all derivatives zero).
    fn cst(c: f64) -> Self;
    /// Plain value at the innermost level.
    fn value(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn tanh(&self) -> Self;
    fn powi(&self, n: i32) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn scale(&self, c: f64) -> Self {
        self.clone() * Self::cst(c)
    }

    fn is_finite(&self) -> bool;
}

impl Scalar for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

/// First-order perturbation over the inner carrier `T`.
///
/// `du` is either empty (a constant) or has one entry per chart coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub du: Vec<T>,
}

impl<T: Scalar> Dual<T> {
    pub fn constant(re: T) -> Self {
        Dual { re, du: Vec::new() }
    }

    /// The `i`-th of `n` coordinates, seeded with a unit perturbation.
    pub fn variable(re: T, i: usize, n: usize) -> Self {
        let du = (0..n).map(|j| T::cst(if i == j { 1.0 } else { 0.0 })).collect();
        Dual { re, du }
    }

    /// Partial derivative along coordinate `i` (zero for constants).
    pub fn d(&self, i: usize) -> T {
        self.du.get(i).cloned().unwrap_or_else(T::zero)
    }

    /// Chain rule: `f(re)` with `f'(re) = slope`.
    fn chain(&self, re: T, slope: T) -> Self {
        let du = self.du.iter().map(|d| d.clone() * slope.clone()).collect();
        Dual { re, du }
    }
}

/// Lift a point one perturbation level up, seeding every coordinate.
pub fn lift<T: Scalar>(x: &[T]) -> Vec<Dual<T>> {
    let n = x.len();
    x.iter()
        .enumerate()
        .map(|(i, xi)| Dual::variable(xi.clone(), i, n))
        .collect()
}

/// Seed a plain point at the given carrier type with coordinate perturbations
/// at every level.
pub trait Seed: Scalar {
    fn seed(x: &[f64]) -> Vec<Self>;
}

impl Seed for f64 {
    fn seed(x: &[f64]) -> Vec<Self> {
        x.to_vec()
    }
}

impl<T: Seed> Seed for Dual<T> {
    fn seed(x: &[f64]) -> Vec<Self> {
        lift(&T::seed(x))
    }
}

fn zip_du<T: Scalar>(a: &[T], b: &[T], f: impl Fn(T, T) -> T) -> Vec<T> {
    let n = a.len().max(b.len());
    if n == 0 {
        return Vec::new();
    }
    (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(T::zero);
            let y = b.get(i).cloned().unwrap_or_else(T::zero);
            f(x, y)
        })
        .collect()
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let du = if rhs.du.is_empty() {
            self.du
        } else if self.du.is_empty() {
            rhs.du
        } else {
            zip_du(&self.du, &rhs.du, |x, y| x + y)
        };
        Dual {
            re: self.re + rhs.re,
            du,
        }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let du = if rhs.du.is_empty() {
            self.du
        } else {
            zip_du(&self.du, &rhs.du, |x, y| x - y)
        };
        Dual {
            re: self.re - rhs.re,
            du,
        }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            du: self.du.into_iter().map(|d| -d).collect(),
        }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let du = match (self.du.is_empty(), rhs.du.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => self.du.iter().map(|d| d.clone() * rhs.re.clone()).collect(),
            (true, false) => rhs.du.iter().map(|d| self.re.clone() * d.clone()).collect(),
            (false, false) => zip_du(&self.du, &rhs.du, |x, y| x * rhs.re.clone() + self.re.clone() * y),
        };
        Dual {
            re: self.re * rhs.re,
            du,
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let re = self.re.clone() / rhs.re.clone();
        if rhs.du.is_empty() {
            let du = self.du.into_iter().map(|d| d / rhs.re.clone()).collect();
            return Dual { re, du };
        }
        // (a/b)' = (a' - (a/b) b') / b
        let du = zip_du(&self.du, &rhs.du, |x, y| (x - re.clone() * y) / rhs.re.clone());
        Dual { re, du }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn cst(c: f64) -> Self {
        Dual::constant(T::cst(c))
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn sin(&self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn tan(&self) -> Self {
        let t = self.re.tan();
        let slope = T::cst(1.0) + t.clone() * t.clone();
        self.chain(t, slope)
    }
    fn exp(&self) -> Self {
        let e = self.re.exp();
        self.chain(e.clone(), e)
    }
    fn ln(&self) -> Self {
        self.chain(self.re.ln(), T::cst(1.0) / self.re.clone())
    }
    fn sqrt(&self) -> Self {
        let s = self.re.sqrt();
        let slope = T::cst(0.5) / s.clone();
        self.chain(s, slope)
    }
    fn tanh(&self) -> Self {
        let t = self.re.tanh();
        let slope = T::cst(1.0) - t.clone() * t.clone();
        self.chain(t, slope)
    }
    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Self::cst(1.0);
        }
        let slope = self.re.powi(n - 1).scale(n as f64);
        self.chain(self.re.powi(n), slope)
    }
    fn scale(&self, c: f64) -> Self {
        Dual {
            re: self.re.scale(c),
            du: self.du.iter().map(|d| d.scale(c)).collect(),
        }
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.du.iter().all(|d| d.is_finite())
    }
}

/// Split a vector of lifted results into values and per-coordinate
/// derivatives: `out[i][j] = d(v[j])/dx_i`.
pub fn split<T: Scalar>(v: Vec<Dual<T>>, n: usize) -> (Vec<T>, Vec<Vec<T>>) {
    let mut grads = vec![Vec::with_capacity(v.len()); n];
    let mut vals = Vec::with_capacity(v.len());
    for d in v {
        for (i, g) in grads.iter_mut().enumerate() {
            g.push(d.d(i));
        }
        vals.push(d.re);
    }
    (vals, grads)
}
