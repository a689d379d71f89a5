//! Shape-invariant potential factory.
//!
//! Builds prepotentials W, the ladder operators `a = -d/dx + W_x` and
//! `a† = d/dx + W_x`, the catalog eigenfunctions, and the constructive chain
//! `psi = a phi`, `b1 = e^W psi`. Everything is assembled in jet arithmetic,
//! so fourth derivatives of `b1` (needed by the downstream residuals) are
//! exact.
//!
//! Operator conventions: `a† a = -d² + (W_x² + W_xx)` and
//! `a a† = -d² + (W_x² - W_xx)`, so that `a e^W = 0` identically.
//!
//! The prepotential's polynomial factor can be negative inside the physical
//! domain (the trigonometric Poschl-Teller W-polynomial is), so `rho = e^W`
//! is built as the signed product and `W` itself exposes `ln|rho|`; nothing
//! downstream consumes `e^{W.value}` directly.

use crate::field::{Domain, ScalarField};
use crate::jet::{RJet, JET_ORDER};
use crate::orthopoly::{jacobi_jet, laguerre_jet};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SusyError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),
    #[error("k1 = {0} must be nonnegative")]
    NegativeK1(f64),
    #[error("probe function vanishes on the evaluation grid near x = {0}")]
    ProbeVanishes(f64),
    #[error("epsilon must be +1 or -1, got {0}")]
    BadEpsilon(i32),
}

pub type Result<T> = std::result::Result<T, SusyError>;

/// Parameter record selecting one of the three shape-invariant prepotential
/// families, with its SUSY quantum numbers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PrepotentialSpec {
    /// W = omega/2 x^2 + l ln x + ln L_N^{l-1/2}(-omega x^2), x in (0, inf)
    HarmonicOscillator { omega: f64, l: f64, big_n: i64, n: i64 },
    /// W = -(g+N) ln sin x + (h+N-1) ln cos x
    ///     + ln P_N^{-g-N-1/2, h+N-3/2}(cos 2x), x in (0, pi/2)
    PoschlTeller { g: f64, h: f64, big_n: i64, n: i64 },
    /// W = -mu x / (2(N-l)) - l ln x + ln L_N^{-2l-1}(mu x/(N-l)), x in (0, inf)
    Hydrogen { mu: f64, l: f64, big_n: i64, n: i64 },
}

impl PrepotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PrepotentialSpec::HarmonicOscillator { omega, big_n, n, .. } => {
                if omega <= 0.0 {
                    return Err(SusyError::InvalidSpec(format!("omega = {omega} must be > 0")));
                }
                check_indices(big_n, n)
            }
            PrepotentialSpec::PoschlTeller { big_n, n, .. } => check_indices(big_n, n),
            PrepotentialSpec::Hydrogen { mu, l, big_n, n } => {
                if mu <= 0.0 {
                    return Err(SusyError::InvalidSpec(format!("mu = {mu} must be > 0")));
                }
                if l <= 0.0 {
                    return Err(SusyError::InvalidSpec(format!("l = {l} must be > 0")));
                }
                if (big_n as f64 - l).abs() < 1e-12 {
                    return Err(SusyError::DegenerateParameters(format!(
                        "hydrogen requires N != l (N = {big_n}, l = {l})"
                    )));
                }
                check_indices(big_n, n)
            }
        }
    }

    /// Domain of validity of the family.
    pub fn domain(&self) -> Domain {
        match self {
            PrepotentialSpec::PoschlTeller { .. } => Domain::new(0.0, FRAC_PI_2),
            _ => Domain::POSITIVE,
        }
    }

    /// Sign epsilon in `W_x² + W_xx = 2 V_q - eps sqrt(2 k1)`: the displayed
    /// potentials of all three families use `2 V_q + sqrt(2 k1)`.
    pub fn epsilon(&self) -> f64 {
        -1.0
    }

    /// Eigenvalue of `a† a` on the catalog eigenfunction.
    pub fn ada_eigenvalue(&self) -> f64 {
        match *self {
            PrepotentialSpec::HarmonicOscillator { omega, l, big_n, n } => {
                omega * (4.0 * l + 2.0 + 4.0 * big_n as f64 + 4.0 * n as f64)
            }
            PrepotentialSpec::PoschlTeller { g, h, big_n, n } => {
                let nf = n as f64;
                (2.0 * nf + 1.0 + 2.0 * g) * (4.0 * big_n as f64 + 2.0 * nf + 2.0 * h - 1.0)
            }
            // no printed eigenvalue; fixed by the intertwining relation
            PrepotentialSpec::Hydrogen { .. } => 2.0 * (2.0 * self.k1()).sqrt(),
        }
    }

    /// The family's `k1` as a function of its parameters.
    pub fn k1(&self) -> f64 {
        match *self {
            PrepotentialSpec::HarmonicOscillator { omega, l, big_n, n } => {
                let s = 2.0 * l + 1.0 + 2.0 * big_n as f64 + 2.0 * n as f64;
                0.5 * omega * omega * s * s
            }
            PrepotentialSpec::PoschlTeller { g, h, big_n, n } => {
                let nf = n as f64;
                let p = 2.0 * nf + 1.0 + 2.0 * g;
                let q = 2.0 * nf + 2.0 * h + 4.0 * big_n as f64 - 1.0;
                0.125 * p * p * q * q
            }
            PrepotentialSpec::Hydrogen { mu, l, big_n, n } => {
                let nf = n as f64;
                let big_nf = big_n as f64;
                let num = big_nf * big_nf - (nf + 1.0) * (nf + 1.0) - 2.0 * l * (big_nf + nf + 1.0);
                2.0 * mu.powi(4) * num * num / (256.0 * (l - big_nf).powi(4) * (l + nf + 1.0).powi(4))
            }
        }
    }

    /// Signed `rho = e^W` at `x` as a jet (exact to order 6).
    fn rho_jet(&self, x: f64) -> RJet {
        let xj = RJet::variable(x);
        match *self {
            PrepotentialSpec::HarmonicOscillator { omega, l, big_n, .. } => {
                let gauss = (xj * xj).scale(0.5 * omega).exp();
                let weight = xj.powf(l);
                let poly = laguerre_jet(big_n, l - 0.5, &(xj * xj).scale(-omega));
                gauss * weight * poly
            }
            PrepotentialSpec::PoschlTeller { g, h, big_n, .. } => {
                let (s, c) = xj.sin_cos();
                let big_nf = big_n as f64;
                let poly = jacobi_jet(
                    big_n,
                    -g - big_nf - 0.5,
                    h + big_nf - 1.5,
                    &(c * c - s * s), // cos 2x
                );
                s.powf(-(g + big_nf)) * c.powf(h + big_nf - 1.0) * poly
            }
            PrepotentialSpec::Hydrogen { mu, l, big_n, .. } => {
                let denom = big_n as f64 - l;
                let expo = xj.scale(-mu / (2.0 * denom)).exp();
                let weight = xj.powf(-l);
                let poly = laguerre_jet(big_n, -2.0 * l - 1.0, &xj.scale(mu / denom));
                expo * weight * poly
            }
        }
    }

    /// Catalog eigenfunction of `a† a` at `x` as a jet (exact to order 6).
    ///
    /// The hydrogen entry carries a -1 normalization so that the constructed
    /// `b1` reproduces the printed n = N = 0 closed form.
    fn phi_jet(&self, x: f64) -> RJet {
        let xj = RJet::variable(x);
        match *self {
            PrepotentialSpec::HarmonicOscillator { omega, l, n, .. } => {
                let gauss = (xj * xj).scale(-0.5 * omega).exp();
                let weight = xj.powf(l);
                let poly = laguerre_jet(n, l - 0.5, &(xj * xj).scale(omega));
                gauss * weight * poly
            }
            PrepotentialSpec::PoschlTeller { g, h, big_n, n } => {
                let (s, c) = xj.sin_cos();
                let big_nf = big_n as f64;
                let poly = jacobi_jet(
                    n,
                    g + big_nf + 0.5,
                    h + big_nf - 1.5,
                    &(c * c - s * s),
                );
                s.powf(g + big_nf + 1.0) * c.powf(h + big_nf - 1.0) * poly
            }
            PrepotentialSpec::Hydrogen { mu, l, n, .. } => {
                let scale = l + n as f64 + 1.0;
                let expo = xj.scale(-mu / (2.0 * scale)).exp();
                let weight = xj.powf(l + 1.0);
                let poly = laguerre_jet(n, 2.0 * l + 1.0, &xj.scale(mu / scale));
                (expo * weight * poly).scale(-1.0)
            }
        }
    }

    fn wx_jet(&self, x: f64) -> RJet {
        let rho = self.rho_jet(x);
        rho.differentiate() / rho
    }
}

fn check_indices(big_n: i64, n: i64) -> Result<()> {
    if big_n < 0 || n < 0 {
        return Err(SusyError::InvalidSpec(format!(
            "quantum numbers must be nonnegative (N = {big_n}, n = {n})"
        )));
    }
    Ok(())
}

/// Prepotential W with analytic derivatives. The value channel is `ln|rho|`;
/// all derivative channels are exact derivatives of W.
pub fn prepotential(spec: &PrepotentialSpec) -> Result<ScalarField> {
    spec.validate()?;
    let spec = *spec;
    Ok(ScalarField::new(spec.domain(), JET_ORDER, move |x| {
        let rho = spec.rho_jet(x);
        let wx = rho.differentiate() / rho;
        let mut c = [0.0; crate::jet::JET_LEN];
        c[0] = rho.value().abs().ln();
        for j in 0..JET_ORDER {
            c[j + 1] = wx.c[j] / (j + 1) as f64;
        }
        RJet { c }
    }))
}

/// Signed `rho = e^W` as a field (exact derivatives to order 6).
pub fn rho_field(spec: &PrepotentialSpec) -> Result<ScalarField> {
    spec.validate()?;
    let spec = *spec;
    Ok(ScalarField::new(spec.domain(), JET_ORDER, move |x| {
        spec.rho_jet(x)
    }))
}

/// Quantum potential from a prepotential:
/// `V_q = (W_x² + W_xx + eps sqrt(2 k1)) / 2`.
pub fn vq_from_prepotential(w: &ScalarField, k1: f64, epsilon: i32) -> Result<ScalarField> {
    if k1 < 0.0 {
        return Err(SusyError::NegativeK1(k1));
    }
    if epsilon != 1 && epsilon != -1 {
        return Err(SusyError::BadEpsilon(epsilon));
    }
    let shift = 0.5 * epsilon as f64 * (2.0 * k1).sqrt();
    let w = w.clone();
    let order = w.valid_order().saturating_sub(2);
    Ok(ScalarField::new(w.domain(), order, move |x| {
        let wx = w.jet(x).differentiate();
        let wxx = wx.differentiate();
        (wx * wx + wxx).scale(0.5) + RJet::constant(shift)
    }))
}

/// The family quantum potential with the catalog `k1` and epsilon.
pub fn vq(spec: &PrepotentialSpec) -> Result<ScalarField> {
    vq_from_prepotential(&prepotential(spec)?, spec.k1(), spec.epsilon() as i32)
}

/// The family `k1` value.
pub fn k1_value(spec: &PrepotentialSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.k1())
}

/// Catalog eigenfunction of `a† a` with analytic derivatives.
pub fn eigenfunction(spec: &PrepotentialSpec) -> Result<ScalarField> {
    spec.validate()?;
    let spec = *spec;
    Ok(ScalarField::new(spec.domain(), JET_ORDER, move |x| {
        spec.phi_jet(x)
    }))
}

/// `psi = a phi`, satisfying `(a a† - 2 eps_bar sqrt(2 k1)) psi = 0` with the
/// family epsilon.
pub fn build_psi(spec: &PrepotentialSpec) -> Result<ScalarField> {
    spec.validate()?;
    let spec = *spec;
    Ok(ScalarField::new(spec.domain(), JET_ORDER - 1, move |x| {
        let phi = spec.phi_jet(x);
        let wx = spec.wx_jet(x);
        wx * phi - phi.differentiate()
    }))
}

/// `b1 = e^W psi` with analytic derivatives through order 4.
pub fn build_b1(spec: &PrepotentialSpec) -> Result<ScalarField> {
    spec.validate()?;
    let spec = *spec;
    Ok(ScalarField::new(spec.domain(), JET_ORDER - 1, move |x| {
        let rho = spec.rho_jet(x);
        let phi = spec.phi_jet(x);
        let wx = rho.differentiate() / rho;
        rho * (wx * phi - phi.differentiate())
    }))
}

/// Annihilation/creation pair bound to a `W_x` field.
#[derive(Clone)]
pub struct LadderPair {
    wx: ScalarField,
}

impl LadderPair {
    pub fn new(wx: ScalarField) -> Self {
        LadderPair { wx }
    }

    pub fn for_spec(spec: &PrepotentialSpec) -> Result<Self> {
        spec.validate()?;
        let spec = *spec;
        Ok(LadderPair {
            wx: ScalarField::new(spec.domain(), JET_ORDER - 1, move |x| spec.wx_jet(x)),
        })
    }

    pub fn wx(&self) -> &ScalarField {
        &self.wx
    }

    /// `a f = -f' + W_x f`
    pub fn annihilate(&self, f: &ScalarField) -> ScalarField {
        self.apply(f, false)
    }

    /// `a† f = f' + W_x f`
    pub fn create(&self, f: &ScalarField) -> ScalarField {
        self.apply(f, true)
    }

    fn apply(&self, f: &ScalarField, creation: bool) -> ScalarField {
        let wx = self.wx.clone();
        let f = f.clone();
        let order = f.valid_order().min(wx.valid_order() + 1).saturating_sub(1);
        let domain = f.domain();
        ScalarField::new(domain, order, move |x| {
            let fj = f.jet(x);
            let d = fj.differentiate();
            let prod = wx.jet(x) * fj;
            if creation {
                d + prod
            } else {
                prod - d
            }
        })
    }
}

/// Ladder catalogs with an explicit parameter shift (the shape-invariance
/// data): `W_x` for the oscillator-with-barrier and the hyperbolic
/// Poschl-Teller ladders.
#[derive(Clone, Copy, Debug)]
pub enum LadderCatalog {
    /// `W_x = -omega x + l / x` on x > 0
    HarmonicOscillator { omega: f64, l: f64 },
    /// `W_x = g coth x + l tanh x` on x > 0
    HyperbolicPoschlTeller { g: f64, l: f64 },
}

/// Parameter shift `lambda -> lambda + delta`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LadderShift {
    pub dl: f64,
    pub dg: f64,
}

impl LadderCatalog {
    pub fn shifted(&self, delta: LadderShift) -> Self {
        match *self {
            LadderCatalog::HarmonicOscillator { omega, l } => LadderCatalog::HarmonicOscillator {
                omega,
                l: l + delta.dl,
            },
            LadderCatalog::HyperbolicPoschlTeller { g, l } => {
                LadderCatalog::HyperbolicPoschlTeller {
                    g: g + delta.dg,
                    l: l + delta.dl,
                }
            }
        }
    }

    pub fn ladder(&self) -> LadderPair {
        let cat = *self;
        LadderPair::new(ScalarField::new(Domain::POSITIVE, JET_ORDER - 1, move |x| {
            let xj = RJet::variable(x);
            match cat {
                LadderCatalog::HarmonicOscillator { omega, l } => {
                    xj.scale(-omega) + xj.recip().scale(l)
                }
                LadderCatalog::HyperbolicPoschlTeller { g, l } => {
                    let (s, c) = xj.sinh_cosh();
                    (c / s).scale(g) + (s / c).scale(l)
                }
            }
        }))
    }
}

/// Shape-invariance defect estimate: the pointwise ratio
/// `[(a_λ a†_λ - a†_{λ+δ} a_{λ+δ}) f] / f` averaged over grid and probes,
/// with its maximum deviation from constancy.
#[derive(Clone, Copy, Debug)]
pub struct DefectEstimate {
    pub constant: f64,
    pub max_deviation: f64,
}

pub fn shape_invariance_defect(
    catalog: &LadderCatalog,
    delta: LadderShift,
    probes: &[ScalarField],
    grid: &[f64],
) -> Result<DefectEstimate> {
    let base = catalog.ladder();
    let shifted = catalog.shifted(delta).ladder();
    let mut ratios = Vec::with_capacity(probes.len() * grid.len());
    for f in probes {
        let lhs = base.annihilate(&base.create(f));
        let rhs = shifted.create(&shifted.annihilate(f));
        for &x in grid {
            let fv = f.value(x);
            if fv.abs() < 1e-150 {
                return Err(SusyError::ProbeVanishes(x));
            }
            ratios.push((lhs.value(x) - rhs.value(x)) / fv);
        }
    }
    let constant = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max_deviation = ratios
        .iter()
        .map(|r| (r - constant).abs())
        .fold(0.0, f64::max);
    Ok(DefectEstimate {
        constant,
        max_deviation,
    })
}

/// Smooth localized probe `exp(-((x - center)/width)^2)` for operator tests.
pub fn gaussian_probe(center: f64, width: f64) -> ScalarField {
    ScalarField::from_jet_expr(Domain::REAL_LINE, move |x| {
        let z = (x - RJet::constant(center)).scale(1.0 / width);
        (-(z * z)).exp()
    })
}
