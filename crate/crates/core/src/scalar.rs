//! Scalar abstraction shared by the value and derivative code paths.
//!
//! Every formula in [`crate::rdiou`] and [`crate::losses`] is written once,
//! generic over [`Scalar`]. Instantiating it with `f64` evaluates the value;
//! instantiating it with [`Dual<N>`] carries `N` forward-mode tangents
//! alongside, which is how [`crate::grad`] gets exact partial derivatives.
//!
//! `min`/`max` ties resolve to the first argument. The formulas always pass
//! the prediction-side term first, so at a tie the derivative follows the
//! prediction's branch.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use twofloat::TwoFloat;

pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Lift a plain number; its tangent is zero.
    fn cst(v: f64) -> Self;
    /// The primal value.
    fn re(&self) -> f64;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn atan(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn abs(self) -> Self;
    fn powf(self, p: f64) -> Self;

    #[inline]
    fn min_first(self, other: Self) -> Self {
        if self.re() <= other.re() {
            self
        } else {
            other
        }
    }

    #[inline]
    fn max_first(self, other: Self) -> Self {
        if self.re() >= other.re() {
            self
        } else {
            other
        }
    }

    #[inline]
    fn powi2(self) -> Self {
        self * self
    }

    /// Same value, tangent dropped.
    #[inline]
    fn detach(self) -> Self {
        Self::cst(self.re())
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn atan(self) -> Self {
        f64::atan(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
}

/// Double-double evaluation, used as the finite-difference reference so
/// that the difference quotient is not dominated by `f64` rounding.
impl Scalar for TwoFloat {
    #[inline]
    fn cst(v: f64) -> Self {
        TwoFloat::from(v)
    }
    #[inline]
    fn re(&self) -> f64 {
        f64::from(*self)
    }
    fn sin(self) -> Self {
        TwoFloat::sin(self)
    }
    fn cos(self) -> Self {
        TwoFloat::cos(self)
    }
    fn atan(self) -> Self {
        TwoFloat::atan(self)
    }
    fn ln(self) -> Self {
        TwoFloat::ln(self)
    }
    fn exp(self) -> Self {
        TwoFloat::exp(self)
    }
    fn abs(self) -> Self {
        TwoFloat::abs(&self)
    }
    fn powf(self, p: f64) -> Self {
        if p == 2.0 {
            self * self
        } else {
            TwoFloat::powf(self, TwoFloat::from(p))
        }
    }
    #[inline]
    fn min_first(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
    #[inline]
    fn max_first(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

/// A forward-mode dual number with `N` independent tangent directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub eps: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(re: f64) -> Self {
        Self { re, eps: [0.0; N] }
    }

    /// The `i`-th seed variable: value `re`, unit tangent in direction `i`.
    pub fn variable(re: f64, i: usize) -> Self {
        let mut eps = [0.0; N];
        eps[i] = 1.0;
        Self { re, eps }
    }

    /// Apply the chain rule for a unary function with value `f` and derivative `df`.
    #[inline]
    fn chain(self, f: f64, df: f64) -> Self {
        let mut eps = self.eps;
        for e in &mut eps {
            *e *= df;
        }
        Self { re: f, eps }
    }
}

impl<const N: usize> PartialOrd for Dual<N> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.re.partial_cmp(&other.re)
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.re += rhs.re;
        for (a, b) in self.eps.iter_mut().zip(rhs.eps) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.re -= rhs.re;
        for (a, b) in self.eps.iter_mut().zip(rhs.eps) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut eps = [0.0; N];
        for (i, e) in eps.iter_mut().enumerate() {
            *e = self.eps[i] * rhs.re + self.re * rhs.eps[i];
        }
        Self {
            re: self.re * rhs.re,
            eps,
        }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.re;
        let re = self.re * inv;
        let mut eps = [0.0; N];
        for (i, e) in eps.iter_mut().enumerate() {
            *e = (self.eps[i] - re * rhs.eps[i]) * inv;
        }
        Self { re, eps }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.chain(-self.re, -1.0)
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.re += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.re -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.chain(self.re * rhs, rhs)
    }
}

impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self.chain(self.re / rhs, 1.0 / rhs)
    }
}

impl<const N: usize> Scalar for Dual<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    #[inline]
    fn re(&self) -> f64 {
        self.re
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn atan(self) -> Self {
        self.chain(self.re.atan(), 1.0 / (1.0 + self.re * self.re))
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), 1.0 / self.re)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn abs(self) -> Self {
        // Subgradient +1 at zero, matching the first-argument tie rule of max(x, -x).
        let s = if self.re >= 0.0 { 1.0 } else { -1.0 };
        self.chain(self.re.abs(), s)
    }
    fn powf(self, p: f64) -> Self {
        let f = self.re.powf(p);
        let df = if p == 0.0 {
            0.0
        } else if self.re == 0.0 {
            if p > 1.0 {
                0.0
            } else if p == 1.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            p * self.re.powf(p - 1.0)
        };
        self.chain(f, df)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type D2 = Dual<2>;

    #[test]
    fn product_and_quotient_rules() {
        let x = D2::variable(3.0, 0);
        let y = D2::variable(2.0, 1);
        let p = x * y;
        assert_eq!(p.re, 6.0);
        assert_eq!(p.eps, [2.0, 3.0]);
        let q = x / y;
        assert_relative_eq!(q.re, 1.5);
        assert_relative_eq!(q.eps[0], 0.5);
        assert_relative_eq!(q.eps[1], -0.75);
    }

    #[test]
    fn transcendental_derivatives() {
        let x = D2::variable(0.7, 0);
        assert_relative_eq!(x.sin().eps[0], 0.7f64.cos());
        assert_relative_eq!(x.cos().eps[0], -0.7f64.sin());
        assert_relative_eq!(x.atan().eps[0], 1.0 / (1.0 + 0.49));
        assert_relative_eq!(x.ln().eps[0], 1.0 / 0.7);
        assert_relative_eq!(x.exp().eps[0], 0.7f64.exp());
        assert_relative_eq!(x.powf(2.0).eps[0], 1.4);
        assert_relative_eq!(x.powf(2.5).eps[0], 2.5 * 0.7f64.powf(1.5));
    }

    #[test]
    fn ties_follow_first_argument() {
        let a = D2::variable(1.0, 0);
        let b = D2::variable(1.0, 1);
        assert_eq!(a.min_first(b).eps, [1.0, 0.0]);
        assert_eq!(a.max_first(b).eps, [1.0, 0.0]);
        assert_eq!(b.min_first(a).eps, [0.0, 1.0]);
    }

    #[test]
    fn detach_drops_tangent() {
        let x = D2::variable(4.0, 1);
        let d = (x * x).detach();
        assert_eq!(d.re, 16.0);
        assert_eq!(d.eps, [0.0, 0.0]);
    }

    #[test]
    fn f64_instance_is_plain_arithmetic() {
        assert_eq!(<f64 as Scalar>::min_first(2.0, 3.0), 2.0);
        assert_eq!(<f64 as Scalar>::max_first(2.0, 3.0), 3.0);
        assert_eq!(<f64 as Scalar>::cst(1.25).re(), 1.25);
    }
}
