//! Real scalars and forward-mode dual numbers.
//!
//! Every field, Lyapunov candidate and law component in this crate is written
//! once against [`Scalar`] and evaluated either on plain `f64` or on
//! [`Dual`] numbers. Nesting (`Dual<Dual<f64>>`) gives exact second
//! directional derivatives, which is what the bracket of a state-dependent
//! gain needs.
//!
//! Two conventions matter at non-smooth points:
//!
//! - `sign(0) = 0`, and `sign` has zero derivative everywhere.
//! - A power `a^r` whose argument carries no tangent has no tangent either, so
//!   `|x|^r` with `0 < r < 1` does not produce `0 * inf` at `x = 0`.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Numeric type the evaluators are generic over.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn from_f64(v: f64) -> Self;
    /// Real (primal) part.
    fn re(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    /// Sign with `sign(0) = 0`.
    fn sign(self) -> Self;
    fn powf(self, r: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn is_finite(self) -> bool;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn scale(self, c: f64) -> Self {
        self * Self::from_f64(c)
    }
}

/// `sign` on `f64` with `sign(0) = 0` (and NaN propagated).
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else if v == 0.0 {
        0.0
    } else {
        f64::NAN
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn re(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sign(self) -> Self {
        sign(self)
    }
    fn powf(self, r: f64) -> Self {
        if r == 0.0 {
            1.0
        } else {
            f64::powf(self, r)
        }
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
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// Dual number `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

/// First-order dual over `f64`.
pub type D1 = Dual<f64>;
/// Second-order (nested) dual.
pub type D2 = Dual<D1>;

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    pub fn constant(re: T) -> Self {
        Dual { re, eps: T::zero() }
    }

    pub fn variable(re: T) -> Self {
        Dual { re, eps: T::one() }
    }

    fn has_tangent(&self) -> bool {
        self.eps != T::zero()
    }
}

/// Seeds `x` with the unit tangent along coordinate `dir`.
pub fn seed<T: Scalar>(x: &[T], dir: usize) -> Vec<Dual<T>> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if i == dir {
                Dual::variable(v)
            } else {
                Dual::constant(v)
            }
        })
        .collect()
}

/// Lifts `x` to duals with zero tangent.
pub fn lift<T: Scalar>(x: &[T]) -> Vec<Dual<T>> {
    x.iter().map(|&v| Dual::constant(v)).collect()
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Scalar> AddAssign for Dual<T> {
    fn add_assign(&mut self, o: Self) {
        self.re += o.re;
        self.eps += o.eps;
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.eps * o.re + self.re * o.eps)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Dual::new(q, (self.eps - q * o.eps) / o.re)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(v: f64) -> Self {
        Dual::constant(T::from_f64(v))
    }

    fn re(self) -> f64 {
        self.re.re()
    }

    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        if !self.has_tangent() {
            return Dual::constant(s);
        }
        Dual::new(s, self.eps / (s + s))
    }

    fn abs(self) -> Self {
        Dual::new(self.re.abs(), self.eps * self.re.sign())
    }

    fn sign(self) -> Self {
        Dual::constant(self.re.sign())
    }

    fn powf(self, r: f64) -> Self {
        if r == 0.0 {
            return Dual::one();
        }
        let value = self.re.powf(r);
        if !self.has_tangent() {
            return Dual::constant(value);
        }
        if r == 1.0 {
            return self;
        }
        Dual::new(value, self.eps * self.re.powf(r - 1.0).scale(r))
    }

    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.eps * self.re.cos())
    }

    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -(self.eps * self.re.sin()))
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.eps * e)
    }

    fn is_finite(self) -> bool {
        self.re.is_finite() && self.eps.is_finite()
    }
}

/// Dense Jacobian `∂f_r/∂x_c` of `f` at `x`, row-major `rows × x.len()`,
/// by one forward sweep per input coordinate.
pub fn forward_jacobian<S, F>(f: F, x: &[S]) -> Vec<S>
where
    S: Scalar,
    F: Fn(&[Dual<S>]) -> Vec<Dual<S>>,
{
    let n = x.len();
    let mut columns = Vec::with_capacity(n);
    for c in 0..n {
        columns.push(f(&seed(x, c)));
    }
    let rows = columns.first().map_or(0, Vec::len);
    let mut jac = vec![S::zero(); rows * n];
    for (c, col) in columns.iter().enumerate() {
        for (r, d) in col.iter().enumerate() {
            jac[r * n + c] = d.eps;
        }
    }
    jac
}

/// Gradient of a scalar function by forward sweeps.
pub fn forward_gradient<S, F>(f: F, x: &[S]) -> Vec<S>
where
    S: Scalar,
    F: Fn(&[Dual<S>]) -> Dual<S>,
{
    (0..x.len()).map(|c| f(&seed(x, c)).eps).collect()
}
