//! Analytic scalar fields of one real variable, with sampled counterparts.

use crate::jet::{RJet, JET_ORDER};
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

/// Open interval on which a field is defined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub const REAL_LINE: Domain = Domain {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const POSITIVE: Domain = Domain {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Domain { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("evaluation point x = {x} outside domain {domain}")]
    DomainError { x: f64, domain: Domain },
    #[error("derivative order {order} exceeds the field's valid order {valid}")]
    OrderTooHigh { order: usize, valid: usize },
}

type JetFn = dyn Fn(f64) -> RJet + Send + Sync;

/// A real-valued field with analytic derivatives, backed by a jet evaluator.
///
/// Immutable after construction; cloning shares the evaluator.
#[derive(Clone)]
pub struct ScalarField {
    eval: Arc<JetFn>,
    domain: Domain,
    /// Highest derivative order the evaluator produces exactly.
    valid_order: usize,
}

impl ScalarField {
    pub fn new(
        domain: Domain,
        valid_order: usize,
        eval: impl Fn(f64) -> RJet + Send + Sync + 'static,
    ) -> Self {
        assert!(valid_order <= JET_ORDER);
        ScalarField {
            eval: Arc::new(eval),
            domain,
            valid_order,
        }
    }

    /// Field from a plain closure; derivatives are built by lifting the
    /// closure over the identity jet, so `f` must itself be written in jet
    /// arithmetic for them to be exact. Use [`ScalarField::new`] otherwise.
    pub fn from_jet_expr(
        domain: Domain,
        f: impl Fn(RJet) -> RJet + Send + Sync + 'static,
    ) -> Self {
        ScalarField::new(domain, JET_ORDER, move |x| f(RJet::variable(x)))
    }

    pub fn constant(v: f64) -> Self {
        ScalarField::new(Domain::REAL_LINE, JET_ORDER, move |_| RJet::constant(v))
    }

    pub fn zero() -> Self {
        ScalarField::constant(0.0)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn valid_order(&self) -> usize {
        self.valid_order
    }

    /// Full jet at `x` without a domain check (callers on hot paths check
    /// once per grid).
    pub fn jet(&self, x: f64) -> RJet {
        (self.eval)(x)
    }

    pub fn try_jet(&self, x: f64) -> Result<RJet, FieldError> {
        if !self.domain.contains(x) {
            return Err(FieldError::DomainError {
                x,
                domain: self.domain,
            });
        }
        Ok((self.eval)(x))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x).value()
    }

    pub fn deriv(&self, x: f64, order: usize) -> f64 {
        debug_assert!(order <= self.valid_order);
        self.jet(x).deriv(order)
    }

    /// Restrict the declared domain (intersection).
    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = Domain::new(self.domain.lo.max(domain.lo), self.domain.hi.min(domain.hi));
        self
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("domain", &self.domain)
            .field("valid_order", &self.valid_order)
            .finish()
    }
}

/// Complex samples of a function on a strictly increasing 1-D grid, with an
/// optional analytic evaluator for derivatives.
#[derive(Clone)]
pub struct GridFunction {
    pub grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub analytic: Option<ScalarField>,
}

impl GridFunction {
    pub fn sample_real(field: &ScalarField, grid: &[f64]) -> Self {
        let values = grid
            .iter()
            .map(|&x| Complex64::new(field.value(x), 0.0))
            .collect();
        GridFunction {
            grid: grid.to_vec(),
            values,
            analytic: Some(field.clone()),
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Uniform grid helper: `n` points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|k| a + h * k as f64).collect()
}

/// Composite trapezoid weight-sum of `f` over a uniform grid.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    dx * (0.5 * (values[0] + values[values.len() - 1]) + interior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jet_expr_field_has_exact_derivatives() {
        let f = ScalarField::from_jet_expr(Domain::POSITIVE, |x| (x * x).scale(0.5).exp() * x.ln());
        let g = |x: f64| (0.5 * x * x).exp() * x.ln();
        assert_relative_eq!(f.value(1.4), g(1.4), epsilon = 1e-14);
        let h = 1e-5;
        let fd = (g(1.4 + h) - g(1.4 - h)) / (2.0 * h);
        assert_relative_eq!(f.deriv(1.4, 1), fd, epsilon = 1e-8);
    }

    #[test]
    fn domain_checks() {
        let f = ScalarField::from_jet_expr(Domain::new(0.0, 1.0), |x| x);
        assert!(f.try_jet(0.5).is_ok());
        assert!(matches!(
            f.try_jet(1.5),
            Err(FieldError::DomainError { .. })
        ));
    }

    #[test]
    fn trapezoid_quadratic() {
        let xs = linspace(0.0, 1.0, 2001);
        let vals: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert_relative_eq!(trapezoid(&vals, xs[1] - xs[0]), 1.0 / 3.0, epsilon = 1e-7);
    }
}
