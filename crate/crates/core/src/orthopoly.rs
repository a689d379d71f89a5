//! Classical and exceptional Laguerre and Jacobi polynomials.
//!
//! Evaluation is by ascending three-term recurrence, stable for the moderate
//! degrees used here. Negative degrees evaluate to exactly zero; the
//! exceptional families reference indices `N-1`, `N-2`, `n-1`, and the zero
//! convention is what makes their small-index cases reduce to the classical
//! polynomials.
//!
//! Derivatives come from the lowering identities
//! `d/dx L_n^a = -L_{n-1}^{a+1}` and
//! `d/dx P_n^{a,b} = (n+a+b+1)/2 * P_{n-1}^{a+1,b+1}`,
//! applied recursively; the same identities drive the jet lifts used by the
//! field constructors elsewhere in the crate.

use crate::jet::{Jet, JetScalar, JET_LEN};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("non-finite {0}")]
    NonFiniteInput(&'static str),
    #[error("derivative order {0} outside 1..=4")]
    InvalidOrder(usize),
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),
    #[error("index {name} = {value} must be >= {min}")]
    IndexOutOfRange {
        name: &'static str,
        value: i64,
        min: i64,
    },
}

pub type Result<T> = std::result::Result<T, PolyError>;

/// Generalized binomial coefficient `binom(a, k)` for integer `k`, evaluated
/// as the finite product `prod_{j=1..k} (a - j + 1)/j`. Finite for every real
/// `a`, including the negative integers where the Gamma-ratio form has poles.
pub fn binom(a: f64, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let mut acc = 1.0;
    for j in 1..=k {
        acc *= (a - (j - 1) as f64) / j as f64;
    }
    acc
}

fn check_finite(x: f64, name: &'static str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(PolyError::NonFiniteInput(name))
    }
}

fn laguerre_rec(n: i64, alpha: f64, x: f64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    let mut prev = 0.0; // L_{-1}
    let mut cur = 1.0; // L_0
    for k in 0..n {
        let kf = k as f64;
        let next = ((2.0 * kf + alpha + 1.0 - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Generalized Laguerre polynomial `L_n^alpha(x)`; zero for `n < 0`.
pub fn laguerre(n: i64, alpha: f64, x: f64) -> Result<f64> {
    check_finite(alpha, "alpha")?;
    check_finite(x, "x")?;
    Ok(laguerre_rec(n, alpha, x))
}

fn laguerre_deriv_any(n: i64, alpha: f64, x: f64, order: usize) -> f64 {
    // d^m/dx^m L_n^a = (-1)^m L_{n-m}^{a+m}
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    sign * laguerre_rec(n - order as i64, alpha + order as f64, x)
}

/// `order`-th derivative of `L_n^alpha` at `x`, `order` in `1..=4`.
pub fn laguerre_deriv(n: i64, alpha: f64, x: f64, order: usize) -> Result<f64> {
    if !(1..=4).contains(&order) {
        return Err(PolyError::InvalidOrder(order));
    }
    check_finite(alpha, "alpha")?;
    check_finite(x, "x")?;
    Ok(laguerre_deriv_any(n, alpha, x, order))
}

/// Jacobi polynomial by the explicit two-binomial finite sum, valid for all
/// real parameters. Kept as the fallback for recurrence-degenerate parameters
/// and reused as an independent oracle in tests.
fn jacobi_sum(n: i64, alpha: f64, beta: f64, x: f64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    let half_minus = 0.5 * (x - 1.0);
    let half_plus = 0.5 * (x + 1.0);
    let mut total = 0.0;
    for s in 0..=n {
        total += binom(n as f64 + alpha, n - s)
            * binom(n as f64 + beta, s)
            * half_minus.powi(s as i32)
            * half_plus.powi((n - s) as i32);
    }
    total
}

fn jacobi_eval(n: i64, alpha: f64, beta: f64, x: f64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    if n == 0 {
        return 1.0;
    }
    let p1 = (alpha + 1.0) + (alpha + beta + 2.0) * 0.5 * (x - 1.0);
    if n == 1 {
        return p1;
    }
    let mut prev = 1.0;
    let mut cur = p1;
    for k in 2..=n {
        let kf = k as f64;
        let two_kab = 2.0 * kf + alpha + beta;
        let denom = 2.0 * kf * (kf + alpha + beta) * (two_kab - 2.0);
        if denom.abs() < 1e-9 {
            // ascending recurrence breaks at this parameter combination;
            // the explicit sum is exact for all parameters
            return jacobi_sum(n, alpha, beta, x);
        }
        let a_coef = (two_kab - 1.0) * ((two_kab) * (two_kab - 2.0) * x + alpha * alpha - beta * beta);
        let c_coef = 2.0 * (kf + alpha - 1.0) * (kf + beta - 1.0) * two_kab;
        let next = (a_coef * cur - c_coef * prev) / denom;
        prev = cur;
        cur = next;
    }
    cur
}

/// Jacobi polynomial `P_n^{alpha,beta}(x)`; zero for `n < 0`.
pub fn jacobi(n: i64, alpha: f64, beta: f64, x: f64) -> Result<f64> {
    check_finite(alpha, "alpha")?;
    check_finite(beta, "beta")?;
    check_finite(x, "x")?;
    Ok(jacobi_eval(n, alpha, beta, x))
}

fn jacobi_deriv_any(n: i64, alpha: f64, beta: f64, x: f64, order: usize) -> f64 {
    let mut coef = 1.0;
    for j in 1..=order {
        coef *= 0.5 * (n as f64 + alpha + beta + j as f64);
    }
    coef * jacobi_eval(n - order as i64, alpha + order as f64, beta + order as f64, x)
}

/// `order`-th derivative of `P_n^{alpha,beta}` at `x`, `order` in `1..=4`.
pub fn jacobi_deriv(n: i64, alpha: f64, beta: f64, x: f64, order: usize) -> Result<f64> {
    if !(1..=4).contains(&order) {
        return Err(PolyError::InvalidOrder(order));
    }
    check_finite(alpha, "alpha")?;
    check_finite(beta, "beta")?;
    check_finite(x, "x")?;
    Ok(jacobi_deriv_any(n, alpha, beta, x, order))
}

/// Exceptional Laguerre combination
/// `L_N^{l+1/2}(-y) L_n^{l+1/2}(y) - L_{N-1}^{l+1/2}(-y) L_{n-1}^{l+1/2}(y)`.
pub fn exc_laguerre(big_n: i64, n: i64, l: f64, y: f64) -> Result<f64> {
    if big_n < 0 {
        return Err(PolyError::IndexOutOfRange {
            name: "N",
            value: big_n,
            min: 0,
        });
    }
    if n < 0 {
        return Err(PolyError::IndexOutOfRange {
            name: "n",
            value: n,
            min: 0,
        });
    }
    check_finite(l, "l")?;
    check_finite(y, "y")?;
    let a = l + 0.5;
    Ok(laguerre_rec(big_n, a, -y) * laguerre_rec(n, a, y)
        - laguerre_rec(big_n - 1, a, -y) * laguerre_rec(n - 1, a, y))
}

const DEGENERACY_TOL: f64 = 1e-12;

/// Coefficient polynomials of the exceptional Jacobi combination, evaluated
/// at `x`: returns `(a, b)` such that `Pe = a P_n + b P_{n-1}` with the
/// shifted parameters `(g+N-1/2, h+N-1/2)`.
pub fn exc_jacobi_coeffs(n: i64, big_n: i64, g: f64, h: f64, x: f64) -> Result<(f64, f64)> {
    let nf = n as f64;
    let big_nf = big_n as f64;
    let d1 = h + 2.0 * big_nf - 2.0 - g;
    let d2 = g + h + 2.0 * nf + 2.0 * big_nf - 1.0;
    let d3 = 2.0 * g + 2.0 * nf + 1.0;
    for (name, d) in [("h+2N-2-g", d1), ("g+h+2n+2N-1", d2), ("2g+2n+1", d3)] {
        if d.abs() < DEGENERACY_TOL {
            return Err(PolyError::DegenerateParameters(format!(
                "denominator {name} vanishes for n={n}, N={big_n}, g={g}, h={h}"
            )));
        }
    }
    let a = jacobi_eval(big_n, -g - big_nf - 1.5, h + big_nf - 0.5, x)
        + 2.0 * nf * (h + big_nf - g - 1.0)
            * jacobi_eval(big_n - 1, -g - big_nf + 0.5, h + big_nf - 0.5, x)
            / (d1 * d2)
        - nf * (2.0 * h + 4.0 * big_nf - 3.0)
            * jacobi_eval(big_n - 2, -g - big_nf + 0.5, h + big_nf - 0.5, x)
            / (d3 * d1);
    let b = (h + big_nf - g - 1.0) * (2.0 * g + 2.0 * nf + 2.0 * big_nf - 1.0) / (d3 * d2)
        * jacobi_eval(big_n - 1, -g - big_nf + 0.5, h + big_nf - 0.5, x);
    Ok((a, b))
}

/// Exceptional Jacobi polynomial `Pe_{n,N}^{g,h}(x)`, `n >= 1`, `N >= 1`.
pub fn exc_jacobi(n: i64, big_n: i64, g: f64, h: f64, x: f64) -> Result<f64> {
    if n < 1 {
        return Err(PolyError::IndexOutOfRange {
            name: "n",
            value: n,
            min: 1,
        });
    }
    if big_n < 1 {
        return Err(PolyError::IndexOutOfRange {
            name: "N",
            value: big_n,
            min: 1,
        });
    }
    check_finite(g, "g")?;
    check_finite(h, "h")?;
    check_finite(x, "x")?;
    let (a, b) = exc_jacobi_coeffs(n, big_n, g, h, x)?;
    let ab = (g + big_n as f64 - 0.5, h + big_n as f64 - 0.5);
    Ok(a * jacobi_eval(n, ab.0, ab.1, x) + b * jacobi_eval(n - 1, ab.0, ab.1, x))
}

/// Jet of `L_n^alpha(u)` for a jet-valued argument `u`. The polynomial
/// arguments in this crate are real even when embedded in complex jets.
pub fn laguerre_jet<T: JetScalar>(n: i64, alpha: f64, u: &Jet<T>) -> Jet<T> {
    let x0 = u.value().re();
    let mut outer = [T::zero(); JET_LEN];
    for (m, slot) in outer.iter_mut().enumerate() {
        *slot = T::from_f64(laguerre_deriv_any(n, alpha, x0, m));
    }
    u.compose(&outer)
}

/// Jet of `P_n^{alpha,beta}(u)` for a jet-valued argument `u`.
pub fn jacobi_jet<T: JetScalar>(n: i64, alpha: f64, beta: f64, u: &Jet<T>) -> Jet<T> {
    let x0 = u.value().re();
    let mut outer = [T::zero(); JET_LEN];
    for (m, slot) in outer.iter_mut().enumerate() {
        *slot = T::from_f64(jacobi_deriv_any(n, alpha, beta, x0, m));
    }
    u.compose(&outer)
}
