//! Truncated Taylor series ("jets") for exact derivatives of composite
//! expressions.
//!
//! Every analytic field in this crate (prepotentials, eigenfunctions, the
//! `b1`/`b2` functions, Lax-matrix entries) is assembled from jet arithmetic,
//! so derivatives up to [`JET_ORDER`] are exact to rounding — no finite
//! differences in any construction path. Finite differences appear only in
//! tests, as independent cross-checks, and in the time direction of the
//! zero-curvature residual where they are the point of the exercise.
//!
//! A jet stores Taylor coefficients `c[k] = f^(k)(x0)/k!` about an expansion
//! point. Arithmetic follows the usual truncated power-series recurrences.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Highest derivative order carried by a jet.
pub const JET_ORDER: usize = 6;
/// Number of Taylor coefficients (order + 1).
pub const JET_LEN: usize = JET_ORDER + 1;

const FACTORIAL: [f64; JET_LEN] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0];

/// Scalar types jets can be built over: `f64` and `Complex64`.
pub trait JetScalar:
    Copy
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    /// Real part (identity for `f64`).
    fn re(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, p: f64) -> Self;
}

impl JetScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
}

impl JetScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn ln(self) -> Self {
        Complex64::ln(self)
    }
    fn sin(self) -> Self {
        Complex64::sin(self)
    }
    fn cos(self) -> Self {
        Complex64::cos(self)
    }
    fn sinh(self) -> Self {
        Complex64::sinh(self)
    }
    fn cosh(self) -> Self {
        Complex64::cosh(self)
    }
    fn sqrt(self) -> Self {
        Complex64::sqrt(self)
    }
    fn powf(self, p: f64) -> Self {
        Complex64::powf(self, p)
    }
}

/// Taylor coefficients of a function about an expansion point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T: JetScalar> {
    pub c: [T; JET_LEN],
}

/// Jet over `f64`, the common case.
pub type RJet = Jet<f64>;
/// Jet over `Complex64`, used for Lax-matrix entries.
pub type CJet = Jet<Complex64>;

impl<T: JetScalar> Jet<T> {
    pub fn constant(v: T) -> Self {
        let mut c = [T::zero(); JET_LEN];
        c[0] = v;
        Jet { c }
    }

    /// The identity function expanded at `x0`.
    pub fn variable(x0: T) -> Self {
        let mut c = [T::zero(); JET_LEN];
        c[0] = x0;
        c[1] = T::one();
        Jet { c }
    }

    pub fn value(&self) -> T {
        self.c[0]
    }

    /// `k`-th derivative, `k <= JET_ORDER`.
    pub fn deriv(&self, k: usize) -> T {
        assert!(k < JET_LEN, "jet derivative order {k} exceeds {JET_ORDER}");
        self.c[k] * T::from_f64(FACTORIAL[k])
    }

    /// Jet of the derivative f'. The top coefficient is lost to truncation,
    /// so the result is trustworthy only through order `JET_ORDER - 1`.
    pub fn differentiate(&self) -> Self {
        let mut c = [T::zero(); JET_LEN];
        for k in 0..JET_ORDER {
            c[k] = self.c[k + 1] * T::from_f64((k + 1) as f64);
        }
        Jet { c }
    }

    pub fn scale(&self, s: T) -> Self {
        let mut c = self.c;
        for ck in &mut c {
            *ck = *ck * s;
        }
        Jet { c }
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut acc = Jet::constant(T::one());
        for _ in 0..n {
            acc = acc * *self;
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let u = self.c;
        let mut e = [T::zero(); JET_LEN];
        e[0] = u[0].exp();
        for k in 1..JET_LEN {
            let mut s = T::zero();
            for j in 1..=k {
                s = s + T::from_f64(j as f64) * u[j] * e[k - j];
            }
            e[k] = s / T::from_f64(k as f64);
        }
        Jet { c: e }
    }

    pub fn ln(&self) -> Self {
        let u = self.c;
        let mut l = [T::zero(); JET_LEN];
        l[0] = u[0].ln();
        for k in 1..JET_LEN {
            let mut s = T::zero();
            for j in 1..k {
                s = s + T::from_f64(j as f64) * l[j] * u[k - j];
            }
            l[k] = (T::from_f64(k as f64) * u[k] - s) / (T::from_f64(k as f64) * u[0]);
        }
        Jet { c: l }
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let u = self.c;
        let mut s = [T::zero(); JET_LEN];
        let mut c = [T::zero(); JET_LEN];
        s[0] = u[0].sin();
        c[0] = u[0].cos();
        for k in 1..JET_LEN {
            let mut sk = T::zero();
            let mut ck = T::zero();
            for j in 1..=k {
                let ju = T::from_f64(j as f64) * u[j];
                sk = sk + ju * c[k - j];
                ck = ck - ju * s[k - j];
            }
            s[k] = sk / T::from_f64(k as f64);
            c[k] = ck / T::from_f64(k as f64);
        }
        (Jet { c: s }, Jet { c })
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    pub fn sinh_cosh(&self) -> (Self, Self) {
        let u = self.c;
        let mut s = [T::zero(); JET_LEN];
        let mut c = [T::zero(); JET_LEN];
        s[0] = u[0].sinh();
        c[0] = u[0].cosh();
        for k in 1..JET_LEN {
            let mut sk = T::zero();
            let mut ck = T::zero();
            for j in 1..=k {
                let ju = T::from_f64(j as f64) * u[j];
                sk = sk + ju * c[k - j];
                ck = ck + ju * s[k - j];
            }
            s[k] = sk / T::from_f64(k as f64);
            c[k] = ck / T::from_f64(k as f64);
        }
        (Jet { c: s }, Jet { c })
    }

    pub fn sinh(&self) -> Self {
        self.sinh_cosh().0
    }

    pub fn cosh(&self) -> Self {
        self.sinh_cosh().1
    }

    /// `u^p` via `u w' = p u' w`; requires `u(x0) != 0`.
    pub fn powf(&self, p: f64) -> Self {
        let u = self.c;
        let mut w = [T::zero(); JET_LEN];
        w[0] = u[0].powf(p);
        for k in 1..JET_LEN {
            let mut s = T::zero();
            for j in 1..=k {
                s = s + T::from_f64(p * j as f64) * u[j] * w[k - j];
            }
            for j in 1..k {
                s = s - T::from_f64((k - j) as f64) * u[j] * w[k - j];
            }
            w[k] = s / (T::from_f64(k as f64) * u[0]);
        }
        Jet { c: w }
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Self {
        Jet::constant(T::one()) / *self
    }

    /// Compose an outer univariate function (given its derivatives at the
    /// inner value) with this jet: returns the jet of `f(self)`.
    ///
    /// `outer_derivs[m]` must be `f^(m)(self.value())`.
    pub fn compose(&self, outer_derivs: &[T; JET_LEN]) -> Self {
        // Horner evaluation of sum_m f^(m)/m! * (u - u0)^m; (u - u0) has no
        // constant term so the truncation is exact.
        let mut du = *self;
        du.c[0] = T::zero();
        let mut acc = Jet::constant(outer_derivs[JET_ORDER] / T::from_f64(FACTORIAL[JET_ORDER]));
        for m in (0..JET_ORDER).rev() {
            acc = acc * du + Jet::constant(outer_derivs[m] / T::from_f64(FACTORIAL[m]));
        }
        acc
    }
}

impl RJet {
    /// Lift a real jet into a complex one.
    pub fn complexify(&self) -> CJet {
        let mut c = [Complex64::new(0.0, 0.0); JET_LEN];
        for (k, ck) in self.c.iter().enumerate() {
            c[k] = Complex64::new(*ck, 0.0);
        }
        Jet { c }
    }
}

impl<T: JetScalar> Add for Jet<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut c = self.c;
        for k in 0..JET_LEN {
            c[k] = c[k] + rhs.c[k];
        }
        Jet { c }
    }
}

impl<T: JetScalar> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut c = self.c;
        for k in 0..JET_LEN {
            c[k] = c[k] - rhs.c[k];
        }
        Jet { c }
    }
}

impl<T: JetScalar> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut c = self.c;
        for ck in &mut c {
            *ck = -*ck;
        }
        Jet { c }
    }
}

impl<T: JetScalar> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut c = [T::zero(); JET_LEN];
        for k in 0..JET_LEN {
            let mut s = T::zero();
            for j in 0..=k {
                s = s + self.c[j] * rhs.c[k - j];
            }
            c[k] = s;
        }
        Jet { c }
    }
}

impl<T: JetScalar> Div for Jet<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let mut c = [T::zero(); JET_LEN];
        c[0] = self.c[0] / rhs.c[0];
        for k in 1..JET_LEN {
            let mut s = self.c[k];
            for j in 1..=k {
                s = s - rhs.c[j] * c[k - j];
            }
            c[k] = s / rhs.c[0];
        }
        Jet { c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn variable_and_polynomial() {
        let x = RJet::variable(2.0);
        let p = x * x * x - x.scale(4.0) + RJet::constant(1.0); // x^3 - 4x + 1
        assert_relative_eq!(p.value(), 1.0);
        assert_relative_eq!(p.deriv(1), 8.0); // 3x^2 - 4
        assert_relative_eq!(p.deriv(2), 12.0); // 6x
        assert_relative_eq!(p.deriv(3), 6.0);
        assert_relative_eq!(p.deriv(4), 0.0);
    }

    #[test]
    fn exp_ln_roundtrip() {
        let x = RJet::variable(1.3);
        let y = x.exp().ln();
        for k in 0..JET_LEN {
            assert_relative_eq!(y.c[k], x.c[k], epsilon = 1e-13);
        }
    }

    #[test]
    fn composite_derivatives_match_finite_differences() {
        let f = |x: f64| (x.sin() * (0.5 * x * x).exp() / (1.0 + x * x)).ln();
        let jet_of = |x0: f64| {
            let x = RJet::variable(x0);
            let one = RJet::constant(1.0);
            (x.sin() * (x * x).scale(0.5).exp() / (one + x * x)).ln()
        };
        let j = jet_of(0.8);
        assert_relative_eq!(j.value(), f(0.8), epsilon = 1e-14);
        assert_relative_eq!(j.deriv(1), central_diff(f, 0.8, 1e-6), epsilon = 1e-8);
        let d2 = (f(0.8 + 1e-4) - 2.0 * f(0.8) + f(0.8 - 1e-4)) / 1e-8;
        assert_relative_eq!(j.deriv(2), d2, epsilon = 1e-6);
    }

    #[test]
    fn powf_matches_exp_ln() {
        let x = RJet::variable(1.7);
        let a = x.powf(2.5);
        let b = (x.ln().scale(2.5)).exp();
        for k in 0..JET_LEN {
            assert_relative_eq!(a.c[k], b.c[k], epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn trig_and_hyperbolic() {
        let x = RJet::variable(0.6);
        let (s, c) = x.sin_cos();
        let unit = s * s + c * c;
        assert_relative_eq!(unit.value(), 1.0, epsilon = 1e-14);
        for k in 1..JET_LEN {
            assert_relative_eq!(unit.c[k], 0.0, epsilon = 1e-13);
        }
        let (sh, ch) = x.sinh_cosh();
        let unit_h = ch * ch - sh * sh;
        assert_relative_eq!(unit_h.value(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn compose_against_direct() {
        // outer f = sin, inner u = x^2 at x0 = 0.9
        let x = RJet::variable(0.9);
        let inner = x * x;
        let u0: f64 = inner.value();
        let outer = [
            u0.sin(),
            u0.cos(),
            -u0.sin(),
            -u0.cos(),
            u0.sin(),
            u0.cos(),
            -u0.sin(),
        ];
        let composed = inner.compose(&outer);
        let direct = inner.sin();
        for k in 0..JET_LEN {
            assert_relative_eq!(composed.c[k], direct.c[k], epsilon = 1e-13, max_relative = 1e-12);
        }
    }

    #[test]
    fn differentiate_shifts_coefficients() {
        let x = RJet::variable(1.1);
        let f = x.exp() * x.sin();
        let fp = f.differentiate();
        for k in 0..JET_ORDER {
            assert_relative_eq!(fp.deriv(k), f.deriv(k + 1), epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn complex_jets() {
        use num_complex::Complex64 as C;
        let z = CJet::variable(C::new(0.4, 0.3));
        let w = z.exp() * z.exp() - (z.scale(C::new(2.0, 0.0))).exp();
        for k in 0..JET_LEN {
            assert!(w.c[k].norm() < 1e-13, "coefficient {k} = {}", w.c[k]);
        }
    }
}
