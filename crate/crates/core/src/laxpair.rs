//! 2x2 Lax pairs: catalog matrices, gauge reduction, assembly from a split
//! `b(x, u(t))`, classical Newton integrators, and zero-curvature residuals.
//!
//! Matrix entries are complex throughout (the assembly formulas carry an
//! explicit `i` even for real-entry families). Analytic x-derivatives come
//! from complex jets; the time derivative of `U` in the zero-curvature
//! residual is a centered finite difference by construction — an analytic
//! `d/dt` would substitute the Newton equation, which is exactly what the
//! residual is meant to verify.

use crate::correspondence::BSplit;
use crate::field::ScalarField;
use crate::jet::CJet;
use num_complex::Complex64;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LaxError {
    #[error("zero denominator: |{name}| = {value:.3e} below margin {margin:.3e} at (x={x}, t={t})")]
    ZeroDenominator {
        name: &'static str,
        value: f64,
        margin: f64,
        x: f64,
        t: f64,
    },
    #[error("trajectory family {found} does not match requested family {requested}")]
    FamilyMismatch { requested: String, found: String },
    #[error("trajectory blew up at t = {t} (|u| = {u:.3e}, |udot| = {udot:.3e})")]
    TrajectoryBlowup { t: f64, u: f64, udot: f64 },
    #[error("trajectory left the domain at t = {t} (u = {u:.3e} <= 0)")]
    DomainExit { t: f64, u: f64 },
    #[error("requested time {t} outside trajectory support [{lo}, {hi}]")]
    WindowOutsideTrajectory { t: f64, lo: f64, hi: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("family {0} has no entry in this catalog")]
    UnsupportedFamily(String),
}

pub type Result<T> = std::result::Result<T, LaxError>;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

// ---------------------------------------------------------------------------
// 2x2 complex matrices
// ---------------------------------------------------------------------------

/// Dense 2x2 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub m: [[Complex64; 2]; 2],
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 {
        m: [[Complex64::new(0.0, 0.0); 2]; 2],
    };

    pub fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Mat2 {
            m: [[a11, a12], [a21, a22]],
        }
    }

    /// Traceless matrix from the three independent entries.
    pub fn traceless(a11: Complex64, a12: Complex64, a21: Complex64) -> Self {
        Mat2::new(a11, a12, a21, -a11)
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        let mut r = Mat2::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                r.m[i][j] = self.m[i][j] + o.m[i][j];
            }
        }
        r
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        let mut r = Mat2::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                r.m[i][j] = self.m[i][j] - o.m[i][j];
            }
        }
        r
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let mut r = Mat2::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                r.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        r
    }

    pub fn scale(&self, s: Complex64) -> Mat2 {
        let mut r = *self;
        for row in &mut r.m {
            for e in row {
                *e = *e * s;
            }
        }
        r
    }

    pub fn commutator(&self, o: &Mat2) -> Mat2 {
        self.mul(o).sub(&o.mul(self))
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|e| e.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn mul_vec(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }
}

// ---------------------------------------------------------------------------
// Classical potential families
// ---------------------------------------------------------------------------

/// Tagged parameter record for the classical families handled by this module.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialFamily {
    /// `V_c = omega^2 u^2 / 2 + l^2 / (2 u^2)`
    HarmonicOscillator { omega: f64, l: f64 },
    /// `V_c = -u^6/8 - t u^4/2 - (t^2 - alpha) u^2 / 2 + beta/(4 u^2)`
    PainleveIV { alpha: f64, beta: f64 },
    /// `V_c = 2 zeta^2/cosh^2 u - 2 (xi+sigma)^2/sinh^2 u
    ///        - e^{4t} cosh 4u / 16 + (sigma - 1/2) e^{2t} cosh 2u`
    PainleveV { sigma: f64, xi: f64, zeta: f64 },
}

impl PotentialFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialFamily::HarmonicOscillator { .. } => "harmonic-oscillator",
            PotentialFamily::PainleveIV { .. } => "painleve-iv",
            PotentialFamily::PainleveV { .. } => "painleve-v",
        }
    }

    /// Classical potential `V_c(u, t)` (no energy offset).
    pub fn vc(&self, u: f64, t: f64) -> f64 {
        match *self {
            PotentialFamily::HarmonicOscillator { omega, l } => {
                0.5 * omega * omega * u * u + 0.5 * l * l / (u * u)
            }
            PotentialFamily::PainleveIV { alpha, beta } => {
                -u.powi(6) / 8.0 - t * u.powi(4) / 2.0 - 0.5 * (t * t - alpha) * u * u
                    + beta / (4.0 * u * u)
            }
            PotentialFamily::PainleveV { sigma, xi, zeta } => {
                2.0 * zeta * zeta / u.cosh().powi(2)
                    - 2.0 * (xi + sigma).powi(2) / u.sinh().powi(2)
                    - (4.0 * t).exp() * (4.0 * u).cosh() / 16.0
                    + (sigma - 0.5) * (2.0 * t).exp() * (2.0 * u).cosh()
            }
        }
    }

    /// `dV_c/du` at fixed `t`.
    pub fn dvc_du(&self, u: f64, t: f64) -> f64 {
        match *self {
            PotentialFamily::HarmonicOscillator { omega, l } => {
                omega * omega * u - l * l / u.powi(3)
            }
            PotentialFamily::PainleveIV { alpha, beta } => {
                -0.75 * u.powi(5) - 2.0 * t * u.powi(3) - (t * t - alpha) * u
                    - beta / (2.0 * u.powi(3))
            }
            PotentialFamily::PainleveV { sigma, xi, zeta } => {
                -4.0 * zeta * zeta * u.sinh() / u.cosh().powi(3)
                    + 4.0 * (xi + sigma).powi(2) * u.cosh() / u.sinh().powi(3)
                    - (4.0 * t).exp() * (4.0 * u).sinh() / 4.0
                    + 2.0 * (sigma - 0.5) * (2.0 * t).exp() * (2.0 * u).sinh()
            }
        }
    }

    /// Whether `V_c` depends on `t` explicitly.
    pub fn time_dependent(&self) -> bool {
        !matches!(self, PotentialFamily::HarmonicOscillator { .. })
    }

    /// Positive-`u` domain restriction (centrifugal/hyperbolic barrier).
    pub fn requires_positive_u(&self) -> bool {
        match *self {
            PotentialFamily::HarmonicOscillator { l, .. } => l != 0.0,
            PotentialFamily::PainleveIV { beta, .. } => beta != 0.0,
            PotentialFamily::PainleveV { .. } => true,
        }
    }
}

/// How the stored energy enters `V_c`: absorbed (`u̇²/2 + V_c = 0` along the
/// trajectory, i.e. `V_c` includes `-E`) or explicit (`u̇²/2 + V_c = E`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyConvention {
    Absorbed,
    Explicit,
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

type ExactFn = dyn Fn(f64) -> (f64, f64) + Send + Sync;

/// Sampled classical solution `(t_k, u_k, u̇_k)` on a uniform time grid, with
/// an optional closed-form evaluator.
#[derive(Clone)]
pub struct Trajectory {
    pub family: PotentialFamily,
    pub t0: f64,
    pub dt: f64,
    pub u: Vec<f64>,
    pub udot: Vec<f64>,
    /// Physical energy for time-independent families.
    pub energy: Option<f64>,
    pub convention: EnergyConvention,
    exact: Option<Arc<ExactFn>>,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.u.len() - 1) as f64
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t0, self.t_end())
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.u.len()).map(move |k| self.t0 + self.dt * k as f64)
    }

    /// `(u, u̇)` at arbitrary `t` within the support: exact closure when
    /// available, cubic Hermite interpolation between samples otherwise.
    pub fn state_at(&self, t: f64) -> Result<(f64, f64)> {
        if let Some(exact) = &self.exact {
            return Ok(exact(t));
        }
        let (lo, hi) = self.span();
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(LaxError::WindowOutsideTrajectory { t, lo, hi });
        }
        let n = self.u.len();
        let mut k = ((t - self.t0) / self.dt).floor() as isize;
        k = k.clamp(0, n as isize - 2);
        let k = k as usize;
        let s = ((t - self.t0) - k as f64 * self.dt) / self.dt;
        let (u0, u1) = (self.u[k], self.u[k + 1]);
        let (m0, m1) = (self.udot[k] * self.dt, self.udot[k + 1] * self.dt);
        let s2 = s * s;
        let s3 = s2 * s;
        let u = (2.0 * s3 - 3.0 * s2 + 1.0) * u0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * u1
            + (s3 - s2) * m1;
        let du_ds = (6.0 * s2 - 6.0 * s) * u0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * u1
            + (3.0 * s2 - 2.0 * s) * m1;
        Ok((u, du_ds / self.dt))
    }

    /// Max Newton residual `|ü + dV_c/du|` at sample midpoints, with `ü` from
    /// the finite difference of the stored velocities.
    pub fn newton_residual_max(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.u.len() - 1 {
            let t_mid = self.t0 + (k as f64 + 0.5) * self.dt;
            let udd = (self.udot[k + 1] - self.udot[k]) / self.dt;
            let (u_mid, _) = self.state_at(t_mid).expect("midpoint inside support");
            worst = worst.max((udd + self.family.dvc_du(u_mid, t_mid)).abs());
        }
        worst
    }

    /// Max energy drift `|u̇²/2 + V_c(u) - E|` across samples
    /// (time-independent families only; `E = 0` under the absorbed
    /// convention).
    pub fn energy_drift_max(&self) -> Option<f64> {
        if self.family.time_dependent() {
            return None;
        }
        let e_ref = match self.convention {
            EnergyConvention::Absorbed => 0.0,
            EnergyConvention::Explicit => self.energy?,
        };
        let mut worst: f64 = 0.0;
        for (k, t) in self.times().enumerate() {
            let mut h = 0.5 * self.udot[k] * self.udot[k] + self.family.vc(self.u[k], t);
            if self.convention == EnergyConvention::Absorbed {
                h -= self.energy.unwrap_or(0.0);
            }
            worst = worst.max((h - e_ref).abs());
        }
        Some(worst)
    }

    /// Copy with `u` and `u̇` scaled by `1 + relative` (negative control for
    /// the zero-curvature tests).
    pub fn perturbed(&self, relative: f64) -> Trajectory {
        let f = 1.0 + relative;
        let mut out = self.clone();
        out.u.iter_mut().for_each(|u| *u *= f);
        out.udot.iter_mut().for_each(|v| *v *= f);
        out.exact = self.exact.clone().map(|exact| {
            Arc::new(move |t: f64| {
                let (u, v) = exact(t);
                (u * f, v * f)
            }) as Arc<ExactFn>
        });
        out
    }
}

impl std::fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trajectory")
            .field("family", &self.family)
            .field("span", &self.span())
            .field("samples", &self.u.len())
            .field("energy", &self.energy)
            .field("convention", &self.convention)
            .finish()
    }
}

/// Classic fixed-step RK4 integration of `ü = -dV_c/du`.
pub fn integrate_newton(
    family: PotentialFamily,
    u0: f64,
    v0: f64,
    t_span: (f64, f64),
    step: f64,
) -> Result<Trajectory> {
    if step <= 0.0 || t_span.1 <= t_span.0 {
        return Err(LaxError::InvalidParameters(format!(
            "need step > 0 and t1 > t0 (step = {step}, span = {t_span:?})"
        )));
    }
    if family.requires_positive_u() && u0 <= 0.0 {
        return Err(LaxError::InvalidParameters(format!(
            "u0 = {u0} must be positive for {}",
            family.name()
        )));
    }
    let n_steps = ((t_span.1 - t_span.0) / step).round() as usize;
    let force = |u: f64, t: f64| -family.dvc_du(u, t);
    let mut u = u0;
    let mut v = v0;
    let mut us = Vec::with_capacity(n_steps + 1);
    let mut vs = Vec::with_capacity(n_steps + 1);
    us.push(u);
    vs.push(v);
    for k in 0..n_steps {
        let t = t_span.0 + k as f64 * step;
        let h = step;
        let (k1u, k1v) = (v, force(u, t));
        let (k2u, k2v) = (v + 0.5 * h * k1v, force(u + 0.5 * h * k1u, t + 0.5 * h));
        let (k3u, k3v) = (v + 0.5 * h * k2v, force(u + 0.5 * h * k2u, t + 0.5 * h));
        let (k4u, k4v) = (v + h * k3v, force(u + h * k3u, t + h));
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        let t_next = t + h;
        if !u.is_finite() || !v.is_finite() || u.abs() > 50.0 || v.abs() > 1e6 {
            return Err(LaxError::TrajectoryBlowup {
                t: t_next,
                u: u.abs(),
                udot: v.abs(),
            });
        }
        if family.requires_positive_u() && u <= 0.0 {
            return Err(LaxError::DomainExit { t: t_next, u });
        }
        us.push(u);
        vs.push(v);
    }
    let energy = if family.time_dependent() {
        None
    } else {
        Some(0.5 * v0 * v0 + family.vc(u0, t_span.0))
    };
    Ok(Trajectory {
        family,
        t0: t_span.0,
        dt: step,
        u: us,
        udot: vs,
        energy,
        convention: EnergyConvention::Explicit,
        exact: None,
    })
}

/// Closed-form oscillator-with-barrier trajectory
/// `u(t) = sqrt(E/omega^2 - sqrt(E^2 - l^2 omega^2)/omega^2 sin 2 omega t)`.
pub fn ho_trajectory_exact(e: f64, l: f64, omega: f64, t_grid: &[f64]) -> Result<Trajectory> {
    if omega <= 0.0 {
        return Err(LaxError::InvalidParameters(format!("omega = {omega} must be > 0")));
    }
    if e < l.abs() * omega {
        return Err(LaxError::InvalidParameters(format!(
            "need E >= |l| omega (E = {e}, l omega = {})",
            l.abs() * omega
        )));
    }
    if t_grid.len() < 2 {
        return Err(LaxError::InvalidParameters("t_grid needs at least 2 points".into()));
    }
    let s = (e * e - l * l * omega * omega).sqrt();
    let w2 = omega * omega;
    let closure = move |t: f64| {
        let u = ((e - s * (2.0 * omega * t).sin()) / w2).sqrt();
        let udot = -s * (2.0 * omega * t).cos() / (omega * u);
        (u, udot)
    };
    let dt = t_grid[1] - t_grid[0];
    let mut us = Vec::with_capacity(t_grid.len());
    let mut vs = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let (u, v) = closure(t);
        us.push(u);
        vs.push(v);
    }
    Ok(Trajectory {
        family: PotentialFamily::HarmonicOscillator { omega, l },
        t0: t_grid[0],
        dt,
        u: us,
        udot: vs,
        energy: Some(e),
        convention: EnergyConvention::Explicit,
        exact: Some(Arc::new(closure)),
    })
}

// ---------------------------------------------------------------------------
// Matrix fields and pair bundles
// ---------------------------------------------------------------------------

type MatFn = dyn Fn(f64, f64) -> Mat2 + Send + Sync;

/// `(x, t) -> 2x2` complex matrix, with an optional analytic d/dx.
#[derive(Clone)]
pub struct MatrixField {
    eval: Arc<MatFn>,
    dx: Option<Arc<MatFn>>,
}

impl MatrixField {
    pub fn new(eval: impl Fn(f64, f64) -> Mat2 + Send + Sync + 'static) -> Self {
        MatrixField {
            eval: Arc::new(eval),
            dx: None,
        }
    }

    pub fn with_dx(mut self, dx: impl Fn(f64, f64) -> Mat2 + Send + Sync + 'static) -> Self {
        self.dx = Some(Arc::new(dx));
        self
    }

    /// Build both the value and d/dx channel from a complex-jet evaluator.
    pub fn from_jets(jets: impl Fn(f64, f64) -> [[CJet; 2]; 2] + Send + Sync + 'static) -> Self {
        let jets = Arc::new(jets);
        let j2 = jets.clone();
        MatrixField {
            eval: Arc::new(move |x, t| {
                let j = jets(x, t);
                Mat2::new(j[0][0].value(), j[0][1].value(), j[1][0].value(), j[1][1].value())
            }),
            dx: Some(Arc::new(move |x, t| {
                let j = j2(x, t);
                Mat2::new(j[0][0].deriv(1), j[0][1].deriv(1), j[1][0].deriv(1), j[1][1].deriv(1))
            })),
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> Mat2 {
        (self.eval)(x, t)
    }

    pub fn has_analytic_dx(&self) -> bool {
        self.dx.is_some()
    }

    /// d/dx: analytic when available, else Richardson-extrapolated centered
    /// difference.
    pub fn eval_dx(&self, x: f64, t: f64) -> Mat2 {
        if let Some(dx) = &self.dx {
            return dx(x, t);
        }
        let h = 1e-4 * x.abs().max(1.0);
        let d = |hh: f64| self.eval(x + hh, t).sub(&self.eval(x - hh, t)).scale(c(0.5 / hh));
        let d1 = d(h);
        let d2 = d(0.5 * h);
        d2.scale(c(4.0 / 3.0)).sub(&d1.scale(c(1.0 / 3.0)))
    }
}

/// How a pair was produced; `Assembled` keeps the locus guard `|b|`.
#[derive(Clone)]
pub enum PairKind {
    Catalog(PotentialFamily),
    Assembled,
}

/// A Lax pair bound to a classical trajectory.
#[derive(Clone)]
pub struct LaxPairBundle {
    pub u_field: MatrixField,
    pub v_field: MatrixField,
    pub trajectory: Trajectory,
    pub kind: PairKind,
    /// `|b(x, t)|` where the pair divides by `b`; `None` when no division
    /// occurs (the Painleve catalogs).
    locus: Option<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>>,
}

impl LaxPairBundle {
    pub fn new(
        u_field: MatrixField,
        v_field: MatrixField,
        trajectory: Trajectory,
        kind: PairKind,
    ) -> Self {
        LaxPairBundle {
            u_field,
            v_field,
            trajectory,
            kind,
            locus: None,
        }
    }

    pub fn with_locus(mut self, locus: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.locus = Some(Arc::new(locus));
        self
    }

    /// Fails with `ZeroDenominator` when `(x, t)` is within `margin` of the
    /// `b = 0` locus.
    pub fn check_off_locus(&self, x: f64, t: f64, margin: f64) -> Result<()> {
        if let Some(locus) = &self.locus {
            let value = locus(x, t);
            if value < margin {
                return Err(LaxError::ZeroDenominator {
                    name: "b",
                    value,
                    margin,
                    x,
                    t,
                });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Catalog pairs
// ---------------------------------------------------------------------------

/// Direct transcription of the printed pair for the requested family, bound
/// to the trajectory.
pub fn catalog_pair(family: PotentialFamily, trajectory: &Trajectory) -> Result<LaxPairBundle> {
    if trajectory.family != family {
        return Err(LaxError::FamilyMismatch {
            requested: family.name().into(),
            found: trajectory.family.name().into(),
        });
    }
    let traj = trajectory.clone();
    let bundle = match family {
        PotentialFamily::HarmonicOscillator { omega, l } => {
            let tu = traj.clone();
            let tv = traj.clone();
            let tl = traj.clone();
            let u_field = MatrixField::from_jets(move |x, t| {
                let (u, udot) = tu.state_at(t).expect("time inside trajectory support");
                ho_u_jets(x, u, udot, omega, l)
            });
            let v_field = MatrixField::from_jets(move |x, t| {
                let (u, udot) = tv.state_at(t).expect("time inside trajectory support");
                ho_v_jets(x, u, udot, omega, l)
            });
            let locus = move |x: f64, t: f64| {
                let (u, _) = tl.state_at(t).expect("time inside trajectory support");
                (x * x - u * u).abs()
            };
            LaxPairBundle {
                u_field,
                v_field,
                trajectory: traj,
                kind: PairKind::Catalog(family),
                locus: Some(Arc::new(locus)),
            }
        }
        PotentialFamily::PainleveIV { alpha, beta } => {
            let tu = traj.clone();
            let tv = traj.clone();
            let u_field = MatrixField::from_jets(move |x, t| {
                let (u, udot) = tu.state_at(t).expect("time inside trajectory support");
                piv_u_jets(x, t, u, udot, alpha, beta)
            });
            let v_field = MatrixField::from_jets(move |x, t| {
                let (u, udot) = tv.state_at(t).expect("time inside trajectory support");
                piv_v_jets(x, t, u, udot, alpha)
            });
            LaxPairBundle {
                u_field,
                v_field,
                trajectory: traj,
                kind: PairKind::Catalog(family),
                locus: None,
            }
        }
        PotentialFamily::PainleveV { sigma, xi, zeta } => {
            let tu = traj.clone();
            let tv = traj.clone();
            let u_field = MatrixField::from_jets(move |x, t| {
                let (u, udot) = tu.state_at(t).expect("time inside trajectory support");
                pv_u_jets(x, t, u, udot, sigma, xi, zeta)
            });
            let v_field = MatrixField::from_jets(move |x, t| {
                let (u, udot) = tv.state_at(t).expect("time inside trajectory support");
                pv_v_jets(x, t, u, udot, sigma, xi, zeta)
            });
            LaxPairBundle {
                u_field,
                v_field,
                trajectory: traj,
                kind: PairKind::Catalog(family),
                locus: None,
            }
        }
    };
    Ok(bundle)
}

fn ho_u_jets(x: f64, u: f64, udot: f64, omega: f64, l: f64) -> [[CJet; 2]; 2] {
    let xj = CJet::variable(c(x));
    let x2 = xj * xj;
    let u2 = c(u * u);
    let w2 = c(omega * omega);
    let l2 = c(l * l);
    let b = x2 - CJet::constant(u2);
    let zero = CJet::constant(c(0.0));
    let num = (CJet::constant(l2 - c(0.25)) / x2)
        + x2.scale(w2)
        + CJet::constant(-l2 / u2 - w2 * u2 - c(udot * udot))
        - CJet::constant(c(1.0) - I * c(2.0 * u * udot)) / b;
    let alpha = num / b;
    [[zero, b], [alpha, zero]]
}

fn ho_v_jets(x: f64, u: f64, udot: f64, omega: f64, l: f64) -> [[CJet; 2]; 2] {
    let xj = CJet::variable(c(x));
    let x2 = xj * xj;
    let u2 = c(u * u);
    let w2 = omega * omega;
    let l2 = l * l;
    let b = x2 - CJet::constant(u2);
    let a11 = CJet::constant(-I - c(2.0 * u * udot)) / b.scale(c(2.0));
    let a12 = xj.scale(I);
    let x4 = x2 * x2;
    let num = x2.scale(c(4.0 * l2))
        + (CJet::constant(c(1.0 - 4.0 * l2)) - x4.scale(c(4.0 * w2))
            + x2.scale(c(4.0 * (w2 * u * u + udot * udot))))
        .scale(u2);
    let den = xj.scale(I * c(4.0) * u2) * b * b;
    let a21 = num / den;
    [[a11, a12], [a21, -a11]]
}

fn piv_u_jets(x: f64, t: f64, u: f64, udot: f64, alpha: f64, beta: f64) -> [[CJet; 2]; 2] {
    let xj = CJet::variable(c(x));
    let x2 = xj * xj;
    let q = u * udot - u.powi(4) / 2.0 - t * u * u;
    let a11 = x2 * xj.scale(c(0.5)) + xj.scale(c(t)) + CJet::constant(c(q + 0.5)) / xj;
    let a12 = x2 - CJet::constant(c(u * u));
    let a21 = CJet::constant(c((q * q + beta / 2.0) / (u * u))) / x2
        + CJet::constant(c(-q - alpha - 1.0));
    [[a11, a12], [a21, -a11]]
}

fn piv_v_jets(x: f64, t: f64, u: f64, _udot: f64, alpha: f64) -> [[CJet; 2]; 2] {
    let xj = CJet::variable(c(x));
    let x2 = xj * xj;
    let q = u * _udot - u.powi(4) / 2.0 - t * u * u;
    let a11 = (x2 + CJet::constant(c(u * u))).scale(c(0.5)) + CJet::constant(c(t));
    let a12 = xj;
    let a21 = -CJet::constant(c(q + alpha + 1.0)) / xj;
    [[a11, a12], [a21, -a11]]
}

fn pv_u_jets(x: f64, t: f64, u: f64, udot: f64, sigma: f64, xi: f64, zeta: f64) -> [[CJet; 2]; 2] {
    let xj = CJet::variable(c(x));
    let (shx, chx) = xj.sinh_cosh();
    let sh2x = shx.scale(c(2.0)) * chx;
    let ch2x = chx * chx + shx * shx;
    let ch4x = ch2x * ch2x * CJet::constant(c(2.0)) - CJet::constant(c(1.0));
    let sh2x2 = sh2x * sh2x;
    let (shu, chu) = (u.sinh(), u.cosh());
    let sh2u = 2.0 * shu * chu;
    let ch2u = chu * chu + shu * shu;
    let ch4u = 2.0 * ch2u * ch2u - 1.0;
    let et = t.exp();
    let emt = (-t).exp();
    let e2t = (2.0 * t).exp();
    let e3t = (3.0 * t).exp();

    let a11 = (CJet::constant(c(udot * sh2u)) - (ch2x - CJet::constant(c(ch2u))).scale(c(2.0 * sigma))
        + (ch4x - CJet::constant(c(ch4u))).scale(c(e2t / 4.0)))
        / sh2x
        + ch2x / sh2x;
    let a12 = (ch2x - CJet::constant(c(ch2u))).scale(c(et));
    let a21 = ((ch2x + CJet::constant(c(ch2u))).scale(c(udot * udot * emt))
        + (CJet::constant(c(4.0 * sigma * emt)) - (ch2x + CJet::constant(c(ch2u))).scale(c(et)))
            .scale(c(udot * sh2u))
        + (CJet::constant(c(shu * shu)) - chx * chx)
            .scale(c(8.0 * sigma * sigma * emt * (chu / shu).powi(2)))
        - CJet::constant(c(2.0 * sigma * et * sh2u * sh2u))
        + (ch2x + CJet::constant(c(ch2u))).scale(c(e3t * sh2u * sh2u / 4.0)))
        / sh2x2
        - (CJet::constant(c(2.0 * emt * (xi * xi + 2.0 * xi * sigma) / (shu * shu))) / (shx * shx))
        + (CJet::constant(c(2.0 * emt * zeta * zeta / (chu * chu))) / (chx * chx));
    [[a11, a12], [a21, -a11]]
}

fn pv_v_jets(x: f64, t: f64, u: f64, udot: f64, sigma: f64, xi: f64, zeta: f64) -> [[CJet; 2]; 2] {
    let xj = CJet::variable(c(x));
    let (shx, chx) = xj.sinh_cosh();
    let sh2x = shx.scale(c(2.0)) * chx;
    let ch2x = chx * chx + shx * shx;
    let (shu, chu) = (u.sinh(), u.cosh());
    let sh2u = 2.0 * shu * chu;
    let ch2u = chu * chu + shu * shu;
    let et = t.exp();
    let emt = (-t).exp();
    let e2t = (2.0 * t).exp();

    let a11 = (ch2x + CJet::constant(c(ch2u))).scale(c(0.5 * e2t))
        + CJet::constant(c(-2.0 * sigma + 0.5));
    let a12 = sh2x.scale(c(et));
    let w = udot - e2t * sh2u / 2.0;
    let a21 = CJet::constant(c(emt
        * (w * w + 4.0 * zeta * zeta / (chu * chu)
            - (4.0 * xi * xi + 8.0 * xi * sigma) / (shu * shu)
            - 4.0 * sigma * sigma * (chu / shu).powi(2))))
        / sh2x;
    [[a11, a12], [a21, -a11]]
}

// ---------------------------------------------------------------------------
// Gauge reduction
// ---------------------------------------------------------------------------

/// Canonical reduction of a general traceless pair by the lower-triangular
/// gauge `T = ((1,0),(-a/b,1))`:
/// `A = Ã - aB/b`,
/// `alpha = (-det Ũ + a_x)/b - a b_x / b²`,
/// `beta = a²B/b² + (bC + a_t)/b + a(2Ab - b_t)/b²`.
///
/// Entry derivatives use the analytic d/dx channel when present and centered
/// differences in `t`.
pub fn gauge_reduce(utilde: &MatrixField, vtilde: &MatrixField) -> (MatrixField, MatrixField) {
    let ut = utilde.clone();
    let reduced_u = MatrixField::new(move |x, t| {
        let m = ut.eval(x, t);
        let mx = ut.eval_dx(x, t);
        let (a, b) = (m.m[0][0], m.m[0][1]);
        let (a_x, b_x) = (mx.m[0][0], mx.m[0][1]);
        let alpha = (-m.det() + a_x) / b - a * b_x / (b * b);
        Mat2::traceless(c(0.0), b, alpha)
    });
    let ut = utilde.clone();
    let vt = vtilde.clone();
    let reduced_v = MatrixField::new(move |x, t| {
        let m = ut.eval(x, t);
        let v = vt.eval(x, t);
        let (a, b) = (m.m[0][0], m.m[0][1]);
        let (big_b, big_c) = (v.m[0][1], v.m[1][0]);
        let a_cap = v.m[0][0] - a * big_b / b;
        // Richardson-extrapolated centered time differences for a_t, b_t
        let h = 1e-3 * t.abs().max(1.0);
        let diff = |hh: f64| {
            let mp = ut.eval(x, t + hh);
            let mm = ut.eval(x, t - hh);
            (
                (mp.m[0][0] - mm.m[0][0]) / c(2.0 * hh),
                (mp.m[0][1] - mm.m[0][1]) / c(2.0 * hh),
            )
        };
        let (a_t1, b_t1) = diff(h);
        let (a_t2, b_t2) = diff(0.5 * h);
        let a_t = (c(4.0) * a_t2 - a_t1) / c(3.0);
        let b_t = (c(4.0) * b_t2 - b_t1) / c(3.0);
        let beta = a * a * big_b / (b * b)
            + (b * big_c + a_t) / b
            + a * (c(2.0) * a_cap * b - b_t) / (b * b);
        Mat2::traceless(a_cap, big_b, beta)
    });
    (reduced_u, reduced_v)
}

/// `|Ũ_12|` guard for gauge reduction at specific points.
pub fn gauge_denominator_check(
    utilde: &MatrixField,
    points: &[(f64, f64)],
    margin: f64,
) -> Result<()> {
    for &(x, t) in points {
        let b = utilde.eval(x, t).m[0][1].norm();
        if b < margin {
            return Err(LaxError::ZeroDenominator {
                name: "Utilde_12",
                value: b,
                margin,
                x,
                t,
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Assembly from a split b
// ---------------------------------------------------------------------------

/// Assemble the canonical pair from `b(x, u(t)) = b1(x) - b2(u(t))` and the
/// quantum potential:
/// `U = ((0, b), (alpha, 0))`, `V = ((A, B), (beta, -A))` with
/// `B = i b_x / 2`, `A = (b_t - i/2 b_xx)/(2b)`, `alpha = 2 (V_q - i A)/b`,
/// `beta = (A_x + i/2 alpha b_x)/b`, and `b_t = -b2_u(u) u̇`.
pub fn assemble_lax(b: &BSplit, vq: &ScalarField, trajectory: &Trajectory) -> LaxPairBundle {
    let b1 = b.b1.clone();
    let b2 = b.b2.clone();
    let vq = vq.clone();
    let traj = trajectory.clone();
    let tl = trajectory.clone();
    let b1_locus = b.b1.clone();
    let b2_locus = b.b2.clone();

    let jets = move |x: f64, t: f64| -> ([[CJet; 2]; 2], [[CJet; 2]; 2]) {
        let (u, udot) = traj.state_at(t).expect("time inside trajectory support");
        let b2j = b2.jet(u);
        let bj = b1.jet(x).complexify() - CJet::constant(c(b2j.value()));
        let b_t = CJet::constant(c(-b2j.deriv(1) * udot));
        let vqj = vq.jet(x).complexify();
        let bx = bj.differentiate();
        let bxx = bx.differentiate();
        let big_b = bx.scale(I * c(0.5));
        let a_cap = (b_t - bxx.scale(I * c(0.5))) / bj.scale(c(2.0));
        let alpha = (vqj - a_cap.scale(I)).scale(c(2.0)) / bj;
        let beta = (a_cap.differentiate() + alpha.scale(I * c(0.5)) * bx) / bj;
        let zero = CJet::constant(c(0.0));
        ([[zero, bj], [alpha, zero]], [[a_cap, big_b], [beta, -a_cap]])
    };
    let jets = Arc::new(jets);
    let ju = jets.clone();
    let jv = jets.clone();
    let u_field = MatrixField::from_jets(move |x, t| ju(x, t).0);
    let v_field = MatrixField::from_jets(move |x, t| jv(x, t).1);
    let locus = move |x: f64, t: f64| {
        let (u, _) = tl.state_at(t).expect("time inside trajectory support");
        (b1_locus.value(x) - b2_locus.value(u)).abs()
    };
    LaxPairBundle {
        u_field,
        v_field,
        trajectory: trajectory.clone(),
        kind: PairKind::Assembled,
        locus: Some(Arc::new(locus)),
    }
}

// ---------------------------------------------------------------------------
// Zero-curvature residual
// ---------------------------------------------------------------------------

/// Zero-curvature residual report over a point set.
#[derive(Clone, Debug)]
pub struct ZccReport {
    /// `(x, t, frobenius norm of the residual)` per point.
    pub samples: Vec<(f64, f64, f64)>,
    pub max_abs: f64,
    /// Residual norm relative to the largest of the three term norms.
    pub max_rel: f64,
}

/// Options for the time finite difference.
#[derive(Clone, Copy, Debug)]
pub struct ZccOptions {
    pub dt_fd: f64,
    /// Apply one Richardson extrapolation step (halved step, ratio 2).
    pub richardson: bool,
    /// Skip points within this margin of the pair's `b = 0` locus.
    pub locus_margin: Option<f64>,
}

impl ZccOptions {
    pub fn new(dt_fd: f64) -> Self {
        ZccOptions {
            dt_fd,
            richardson: false,
            locus_margin: None,
        }
    }

    pub fn richardson(mut self) -> Self {
        self.richardson = true;
        self
    }

    pub fn with_locus_margin(mut self, margin: f64) -> Self {
        self.locus_margin = Some(margin);
        self
    }
}

/// `ZCC = dU/dt - dV/dx + [U, V]` with `dU/dt` by centered difference.
pub fn zcc_residual(
    pair: &LaxPairBundle,
    x_grid: &[f64],
    t_grid: &[f64],
    opts: ZccOptions,
) -> Result<ZccReport> {
    let (lo, hi) = pair.trajectory.span();
    let margin = opts.dt_fd;
    let mut samples = Vec::with_capacity(x_grid.len() * t_grid.len());
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for &t in t_grid {
        if pair.trajectory.exact.is_none() && (t - margin < lo || t + margin > hi) {
            return Err(LaxError::WindowOutsideTrajectory { t, lo, hi });
        }
        for &x in x_grid {
            if let Some(m) = opts.locus_margin {
                if pair.check_off_locus(x, t, m).is_err() {
                    continue;
                }
            }
            let u = pair.u_field.eval(x, t);
            let v = pair.v_field.eval(x, t);
            let du_dt = time_derivative(&pair.u_field, x, t, opts);
            let dv_dx = pair.v_field.eval_dx(x, t);
            let comm = u.commutator(&v);
            let residual = du_dt.sub(&dv_dx).add(&comm);
            let norm = residual.frobenius_norm();
            let scale = du_dt
                .frobenius_norm()
                .max(dv_dx.frobenius_norm())
                .max(comm.frobenius_norm())
                .max(1e-300);
            samples.push((x, t, norm));
            max_abs = max_abs.max(norm);
            max_rel = max_rel.max(norm / scale);
        }
    }
    Ok(ZccReport {
        samples,
        max_abs,
        max_rel,
    })
}

fn time_derivative(field: &MatrixField, x: f64, t: f64, opts: ZccOptions) -> Mat2 {
    let d = |h: f64| {
        field
            .eval(x, t + h)
            .sub(&field.eval(x, t - h))
            .scale(c(0.5 / h))
    };
    if opts.richardson {
        let d1 = d(opts.dt_fd);
        let d2 = d(0.5 * opts.dt_fd);
        d2.scale(c(4.0 / 3.0)).sub(&d1.scale(c(1.0 / 3.0)))
    } else {
        d(opts.dt_fd)
    }
}

// ---------------------------------------------------------------------------
// Quantum parameter shift
// ---------------------------------------------------------------------------

/// The classical and quantum potentials of a family, the latter with the
/// parameter shift that the Schrödinger reduction introduces.
#[derive(Clone)]
pub struct QuantumShift {
    pub family: PotentialFamily,
    pub classical: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub quantum: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub description: &'static str,
}

/// Parameter map `V_c -> V_q` for the catalog families.
pub fn quantum_shift(family: PotentialFamily) -> Result<QuantumShift> {
    let classical = {
        let fam = family;
        Arc::new(move |x: f64, t: f64| fam.vc(x, t)) as Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>
    };
    let (quantum, description): (Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>, _) = match family {
        PotentialFamily::HarmonicOscillator { omega, l } => (
            Arc::new(move |x: f64, _t: f64| {
                0.5 * omega * omega * x * x + 0.5 * (l * l - 0.25) / (x * x)
            }),
            "l^2 -> l^2 - 1/4",
        ),
        PotentialFamily::PainleveIV { alpha, beta } => (
            Arc::new(move |x: f64, t: f64| {
                -x.powi(6) / 8.0 - t * x.powi(4) / 2.0 - 0.5 * (t * t - alpha) * x * x
                    + (beta + 0.5) / (4.0 * x * x)
            }),
            "beta -> beta + 1/2",
        ),
        PotentialFamily::PainleveV { sigma, xi, zeta } => (
            Arc::new(move |x: f64, t: f64| {
                (4.0 * zeta * zeta - 0.25) / (2.0 * x.cosh().powi(2))
                    - (4.0 * (xi + sigma).powi(2) - 0.25) / (2.0 * x.sinh().powi(2))
                    - (4.0 * t).exp() * (4.0 * x).cosh() / 16.0
                    + (sigma - 0.5) * (2.0 * t).exp() * (2.0 * x).cosh()
            }),
            "4 zeta^2 -> 4 zeta^2 - 1/4, 4 (xi+sigma)^2 -> 4 (xi+sigma)^2 - 1/4",
        ),
    };
    Ok(QuantumShift {
        family,
        classical,
        quantum,
        description,
    })
}

// ---------------------------------------------------------------------------
// Trajectory CSV exchange format
// ---------------------------------------------------------------------------

/// Serialize a trajectory as CSV with `# key=value` metadata header lines.
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str(&format!("# family={}\n", traj.family.name()));
    match traj.family {
        PotentialFamily::HarmonicOscillator { omega, l } => {
            out.push_str(&format!("# omega={omega}, l={l}\n"));
        }
        PotentialFamily::PainleveIV { alpha, beta } => {
            out.push_str(&format!("# alpha={alpha}, beta={beta}\n"));
        }
        PotentialFamily::PainleveV { sigma, xi, zeta } => {
            out.push_str(&format!("# sigma={sigma}, xi={xi}, zeta={zeta}\n"));
        }
    }
    if let Some(e) = traj.energy {
        out.push_str(&format!("# E={e}\n"));
    }
    out.push_str("t,u,udot\n");
    for (k, t) in traj.times().enumerate() {
        out.push_str(&format!("{t:.17e},{:.17e},{:.17e}\n", traj.u[k], traj.udot[k]));
    }
    out
}

/// Parse the CSV trajectory exchange format produced by
/// [`trajectory_to_csv`].
pub fn trajectory_from_csv(text: &str, family: PotentialFamily) -> Result<Trajectory> {
    let mut ts = Vec::new();
    let mut us = Vec::new();
    let mut vs = Vec::new();
    let mut energy = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for kv in meta.split(',') {
                if let Some((k, v)) = kv.split_once('=') {
                    if k.trim() == "E" {
                        energy = v.trim().parse().ok();
                    }
                }
            }
            continue;
        }
        if line.starts_with("t,") {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |p: Option<&str>| -> Result<f64> {
            p.and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| LaxError::InvalidParameters(format!("bad CSV line: {line}")))
        };
        ts.push(parse(parts.next())?);
        us.push(parse(parts.next())?);
        vs.push(parse(parts.next())?);
    }
    if ts.len() < 2 {
        return Err(LaxError::InvalidParameters(
            "trajectory CSV needs at least two samples".into(),
        ));
    }
    Ok(Trajectory {
        family,
        t0: ts[0],
        dt: ts[1] - ts[0],
        u: us,
        udot: vs,
        energy,
        convention: EnergyConvention::Explicit,
        exact: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::linspace;
    use approx::assert_relative_eq;

    fn ho_family() -> PotentialFamily {
        PotentialFamily::HarmonicOscillator { omega: 1.0, l: 1.0 }
    }

    #[test]
    fn exact_ho_trajectory_properties() {
        // fine sampling keeps the finite-difference u'' error below the
        // invariant tolerance near the inner turning point
        let ts = linspace(0.0, 1.6, 80_001);
        let traj = ho_trajectory_exact(4.0, 1.0, 1.0, &ts).unwrap();
        // Newton residual of u'' - l^2/u^3 + omega^2 u = 0, from the closed form
        for &t in &[0.1, 0.7, 1.5] {
            let h = 1e-5;
            let (um, _) = traj.state_at(t - h).unwrap();
            let (u0, _) = traj.state_at(t).unwrap();
            let (up, _) = traj.state_at(t + h).unwrap();
            let udd = (up - 2.0 * u0 + um) / (h * h);
            assert!((udd - 1.0 / u0.powi(3) + u0).abs() < 1e-5);
        }
        assert!(traj.newton_residual_max() < 1e-6);
        assert!(traj.energy_drift_max().unwrap() < 1e-12);
        // period of u^2 is pi/omega (checked at omega = 2 as well)
        let long = linspace(0.0, 4.0, 4001);
        let traj_pi = ho_trajectory_exact(4.0, 1.0, 1.0, &long).unwrap();
        let (u_a, _) = traj_pi.state_at(0.3).unwrap();
        let (u_b, _) = traj_pi.state_at(0.3 + std::f64::consts::PI).unwrap();
        assert_relative_eq!(u_a, u_b, epsilon = 1e-12);
        let traj2 = ho_trajectory_exact(5.0, 1.0, 2.0, &linspace(0.0, 1.5, 30_001)).unwrap();
        assert!(traj2.newton_residual_max() < 1e-5);
        assert!(traj2.energy_drift_max().unwrap() < 1e-12);
    }

    #[test]
    fn exact_ho_stationary_case() {
        let ts = linspace(0.0, 1.0, 11);
        let traj = ho_trajectory_exact(2.0, 2.0, 1.0, &ts).unwrap();
        for k in 0..traj.len() {
            assert_relative_eq!(traj.u[k], 2.0_f64.sqrt(), epsilon = 1e-14);
            assert!(traj.udot[k].abs() < 1e-14);
        }
        assert!(ho_trajectory_exact(0.5, 1.0, 1.0, &ts).is_err());
    }

    #[test]
    fn rk4_matches_exact_ho() {
        let e = 4.0;
        let (omega, l) = (1.0, 1.0);
        // start at t = 0: u0 = sqrt(E), v0 from the closed form
        let ts = linspace(0.0, 1.0, 2);
        let exact = ho_trajectory_exact(e, l, omega, &ts).unwrap();
        let (u0, v0) = exact.state_at(0.0).unwrap();
        let traj = integrate_newton(ho_family(), u0, v0, (0.0, 1.0), 1e-3).unwrap();
        for &t in &[0.25, 0.5, 1.0] {
            let (u_num, v_num) = traj.state_at(t).unwrap();
            let (u_ref, v_ref) = exact.state_at(t).unwrap();
            assert_relative_eq!(u_num, u_ref, epsilon = 1e-8);
            assert_relative_eq!(v_num, v_ref, epsilon = 1e-7);
        }
        assert!(traj.energy_drift_max().unwrap() < 1e-9);
    }

    #[test]
    fn plain_oscillator_is_cosine() {
        let traj = integrate_newton(
            PotentialFamily::HarmonicOscillator { omega: 1.0, l: 0.0 },
            1.0,
            0.0,
            (0.0, 6.0),
            1e-3,
        )
        .unwrap();
        for &t in &[0.5, 2.0, 5.5] {
            let (u, _) = traj.state_at(t).unwrap();
            assert_relative_eq!(u, t.cos(), epsilon = 1e-9);
        }
    }

    #[test]
    fn integrator_guards() {
        // PIV with beta < 0 crashes into the origin from suitable data
        let fam = PotentialFamily::PainleveIV { alpha: 1.0, beta: -0.5 };
        let err = integrate_newton(fam, 0.7, 0.0, (0.5, 3.0), 1e-3).unwrap_err();
        assert!(
            matches!(err, LaxError::DomainExit { .. } | LaxError::TrajectoryBlowup { .. }),
            "{err:?}"
        );
        assert!(integrate_newton(fam, -1.0, 0.0, (0.0, 1.0), 1e-3).is_err());
        assert!(integrate_newton(fam, 1.0, 0.0, (0.0, 1.0), -1e-3).is_err());
    }

    #[test]
    fn catalog_matrices_traceless() {
        let ts = linspace(0.0, 1.0, 1001);
        let traj = ho_trajectory_exact(4.0, 1.0, 1.0, &ts).unwrap();
        let pair = catalog_pair(ho_family(), &traj).unwrap();
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let x = 0.5 + 3.0 * next();
            let t = 0.05 + 0.9 * next();
            let u = pair.u_field.eval(x, t);
            let v = pair.v_field.eval(x, t);
            assert_eq!(u.trace(), Complex64::new(0.0, 0.0));
            assert_eq!(v.trace(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn ho_zcc_converges_and_perturbation_is_detected() {
        let ts = linspace(0.0, 1.2, 1201);
        let traj = ho_trajectory_exact(4.0, 1.0, 1.0, &ts).unwrap();
        let pair = catalog_pair(ho_family(), &traj).unwrap();
        let xs = linspace(0.5, 4.0, 9);
        let t_grid = linspace(0.1, 1.0, 7);
        let opts = |dt: f64| ZccOptions::new(dt).with_locus_margin(0.1);
        let raw = |dt| zcc_residual(&pair, &xs, &t_grid, opts(dt)).unwrap().max_abs;
        let r1 = raw(2e-3);
        let r2 = raw(1e-3);
        let order = (r1 / r2).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
        // the O(dt^4) constant is large near the locus; a small extrapolation
        // step is needed for the 1e-6 absolute target
        let extr = zcc_residual(&pair, &xs, &t_grid, opts(1.25e-4).richardson()).unwrap();
        assert!(!extr.samples.is_empty());
        assert!(extr.max_abs < 1e-6, "extrapolated {}", extr.max_abs);

        let perturbed = catalog_pair(ho_family(), &traj.perturbed(0.01)).unwrap();
        let bad = zcc_residual(&perturbed, &xs, &t_grid, opts(1.25e-4).richardson()).unwrap();
        assert!(bad.max_abs >= 1e-2, "perturbed {}", bad.max_abs);
        assert!(bad.max_abs / extr.max_abs >= 1e3);
    }

    #[test]
    fn constant_commuting_pair_has_zero_zcc() {
        let u = MatrixField::new(|_, _| Mat2::traceless(c(1.0), c(0.0), c(0.0)))
            .with_dx(|_, _| Mat2::ZERO);
        let v = MatrixField::new(|_, _| Mat2::traceless(c(2.0), c(0.0), c(0.0)))
            .with_dx(|_, _| Mat2::ZERO);
        let ts = linspace(0.0, 1.0, 11);
        let traj = ho_trajectory_exact(4.0, 1.0, 1.0, &ts).unwrap();
        let pair = LaxPairBundle {
            u_field: u,
            v_field: v,
            trajectory: traj,
            kind: PairKind::Assembled,
            locus: None,
        };
        let rep = zcc_residual(&pair, &[0.5, 1.0], &[0.3, 0.6], ZccOptions::new(1e-3)).unwrap();
        assert_eq!(rep.max_abs, 0.0);
    }

    #[test]
    fn gauge_reduce_identity_when_already_canonical() {
        // a = 0 means T = identity; output must equal input exactly
        let ut = MatrixField::new(|x, t| {
            Mat2::traceless(c(0.0), c(1.0 + x * x + t), c(x - t))
        });
        let vt = MatrixField::new(|x, t| Mat2::traceless(c(x * t), c(x), c(t)));
        let (ru, rv) = gauge_reduce(&ut, &vt);
        let (x, t) = (0.7, 0.4);
        let got_u = ru.eval(x, t);
        let want_u = ut.eval(x, t);
        for i in 0..2 {
            for j in 0..2 {
                assert!((got_u.m[i][j] - want_u.m[i][j]).norm() < 1e-9);
            }
        }
        let got_v = rv.eval(x, t);
        let want_v = vt.eval(x, t);
        for i in 0..2 {
            for j in 0..2 {
                assert!((got_v.m[i][j] - want_v.m[i][j]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn gauge_reduce_structure_and_direct_transform() {
        // smooth non-canonical pair; compare against T^{-1} Ũ T - T^{-1} T_x
        let ut = MatrixField::from_jets(|x, t| {
            let xj = CJet::variable(c(x));
            let a = xj.sin().scale(c(1.0 + 0.3 * t));
            let b = xj.cosh() + CJet::constant(c(1.5 + t * t));
            let cc = xj.scale(c(0.5)) * xj + CJet::constant(c(0.2 * t));
            [[a, b], [cc, -a]]
        });
        let vt = MatrixField::from_jets(|x, t| {
            let xj = CJet::variable(c(x));
            let a = xj.cos().scale(c(0.7 + t));
            let b = xj.exp().scale(c(0.4));
            let cc = xj.sinh() + CJet::constant(c(t));
            [[a, b], [cc, -a]]
        });
        gauge_denominator_check(&ut, &[(0.8, 0.5)], 1e-6).unwrap();
        let (ru, _rv) = gauge_reduce(&ut, &vt);
        let (x, t) = (0.8, 0.5);
        let got = ru.eval(x, t);
        // structural postconditions
        assert_eq!(got.m[0][0], Complex64::new(0.0, 0.0));
        assert_eq!(got.m[1][1], Complex64::new(0.0, 0.0));
        assert_eq!(got.m[0][1], ut.eval(x, t).m[0][1]);
        // direct transform with numerically differentiated T
        let m = ut.eval(x, t);
        let (a, b) = (m.m[0][0], m.m[0][1]);
        let tmat = Mat2::new(c(1.0), c(0.0), -a / b, c(1.0));
        let tinv = Mat2::new(c(1.0), c(0.0), a / b, c(1.0));
        let h = 1e-6;
        let mp = ut.eval(x + h, t);
        let mm = ut.eval(x - h, t);
        let ab_p = mp.m[0][0] / mp.m[0][1];
        let ab_m = mm.m[0][0] / mm.m[0][1];
        let t_x = Mat2::new(c(0.0), c(0.0), -(ab_p - ab_m) / c(2.0 * h), c(0.0));
        let direct = tinv.mul(&m).mul(&tmat).sub(&tinv.mul(&t_x));
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (got.m[i][j] - direct.m[i][j]).norm() < 1e-7,
                    "entry ({i},{j}): {} vs {}",
                    got.m[i][j],
                    direct.m[i][j]
                );
            }
        }
    }

    #[test]
    fn gauge_covariance_of_zcc() {
        // residual of the reduced PIV pair matches the similarity-transformed
        // residual of the original to 1e-7
        let fam = PotentialFamily::PainleveIV { alpha: 1.0, beta: -0.5 };
        // fine step: the reduced entries are re-differenced in time, so the
        // dense-output interpolant must be far below the comparison tolerance
        let traj = integrate_newton(fam, 0.9, -0.3, (0.45, 1.6), 1e-5).unwrap();
        let pair = catalog_pair(fam, &traj).unwrap();
        let (ru, rv) = gauge_reduce(&pair.u_field, &pair.v_field);
        let reduced = LaxPairBundle {
            u_field: ru,
            v_field: rv,
            trajectory: traj.clone(),
            kind: PairKind::Assembled,
            locus: None,
        };
        let opts = ZccOptions::new(1e-3).richardson();
        // points safely off the x = u(t) locus where the reduction divides by b
        for &(x, t) in &[(1.4, 1.0), (1.7, 0.7), (1.9, 1.3)] {
            // original residual, similarity-transformed by T^{-1} . T
            let m = pair.u_field.eval(x, t);
            let (a, b) = (m.m[0][0], m.m[0][1]);
            let tmat = Mat2::new(c(1.0), c(0.0), -a / b, c(1.0));
            let tinv = Mat2::new(c(1.0), c(0.0), a / b, c(1.0));
            let orig = zcc_residual(&pair, &[x], &[t], opts).unwrap();
            let red = zcc_residual(&reduced, &[x], &[t], opts).unwrap();
            // both should vanish on a true trajectory; covariance means the
            // transformed original equals the reduced at matching precision
            let du = time_derivative(&pair.u_field, x, t, opts);
            let dv = pair.v_field.eval_dx(x, t);
            let r_orig = du
                .sub(&dv)
                .add(&pair.u_field.eval(x, t).commutator(&pair.v_field.eval(x, t)));
            let transformed = tinv.mul(&r_orig).mul(&tmat);
            assert!(
                (transformed.frobenius_norm() - red.samples[0].2).abs() < 1e-7,
                "covariance gap at ({x},{t})"
            );
            assert!(orig.max_abs < 1e-6 && red.max_abs < 1e-6);
        }
    }

    #[test]
    fn assemble_matches_catalog_entrywise() {
        use crate::field::Domain;
        use crate::jet::RJet;
        let (omega, l, e) = (1.0, 1.0, 4.0);
        let square = ScalarField::from_jet_expr(Domain::POSITIVE, |x| x * x);
        let b = BSplit {
            b1: square.clone(),
            b2: square,
        };
        let vq = ScalarField::new(Domain::POSITIVE, 6, move |x| {
            let xj = RJet::variable(x);
            (xj * xj).scale(0.5 * omega * omega)
                + (xj * xj).recip().scale(0.5 * (l * l - 0.25))
                - RJet::constant(e)
        });
        let ts = linspace(0.0, 1.5, 1501);
        let traj = ho_trajectory_exact(e, l, omega, &ts).unwrap();
        let assembled = assemble_lax(&b, &vq, &traj);
        let catalog = catalog_pair(ho_family(), &traj).unwrap();
        // seeded linear congruential sampling of (x, t) off-locus
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut tested = 0;
        while tested < 500 {
            let x = 0.5 + 3.5 * next();
            let t = 0.05 + 1.4 * next();
            if assembled.check_off_locus(x, t, 0.1).is_err() {
                continue;
            }
            let ua = assembled.u_field.eval(x, t);
            let uc = catalog.u_field.eval(x, t);
            let va = assembled.v_field.eval(x, t);
            let vc = catalog.v_field.eval(x, t);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (ua.m[i][j] - uc.m[i][j]).norm() < 1e-8,
                        "U({i},{j}) at ({x},{t}): {} vs {}",
                        ua.m[i][j],
                        uc.m[i][j]
                    );
                    assert!(
                        (va.m[i][j] - vc.m[i][j]).norm() < 1e-8,
                        "V({i},{j}) at ({x},{t}): {} vs {}",
                        va.m[i][j],
                        vc.m[i][j]
                    );
                }
            }
            tested += 1;
        }
    }

    #[test]
    fn assemble_hand_substitution_case() {
        use crate::field::Domain;
        // b2 = 0, V_q = 0, b1 = exp(x): b_t = 0, b_xx = b, so A = -i/4 and
        // B = i b / 2 pointwise
        let b = BSplit {
            b1: ScalarField::from_jet_expr(Domain::REAL_LINE, |x| x.exp()),
            b2: ScalarField::zero(),
        };
        let vq = ScalarField::zero();
        let ts = linspace(0.0, 1.0, 101);
        let traj = ho_trajectory_exact(4.0, 1.0, 1.0, &ts).unwrap();
        let pair = assemble_lax(&b, &vq, &traj);
        for &(x, t) in &[(0.3, 0.2), (1.1, 0.8)] {
            let v = pair.v_field.eval(x, t);
            assert!((v.m[0][0] - Complex64::new(0.0, -0.25)).norm() < 1e-12);
            assert!((v.m[0][1] - Complex64::new(0.0, 0.5 * x.exp())).norm() < 1e-12);
        }
    }

    #[test]
    fn assembled_pair_zcc_vanishes() {
        use crate::field::Domain;
        use crate::jet::RJet;
        // the assembled oscillator pair satisfies the ZCC on the exact
        // trajectory (same data as the catalog comparison)
        let (omega, l, e) = (1.0, 1.0, 4.0);
        let square = ScalarField::from_jet_expr(Domain::POSITIVE, |x| x * x);
        let b = BSplit {
            b1: square.clone(),
            b2: square,
        };
        let vq = ScalarField::new(Domain::POSITIVE, 6, move |x| {
            let xj = RJet::variable(x);
            (xj * xj).scale(0.5 * omega * omega)
                + (xj * xj).recip().scale(0.5 * (l * l - 0.25))
                - RJet::constant(e)
        });
        let ts = linspace(0.0, 1.2, 1201);
        let traj = ho_trajectory_exact(e, l, omega, &ts).unwrap();
        let pair = assemble_lax(&b, &vq, &traj);
        let rep = zcc_residual(
            &pair,
            &linspace(0.5, 4.0, 9),
            &linspace(0.1, 1.0, 7),
            ZccOptions::new(1.25e-4).richardson().with_locus_margin(0.1),
        )
        .unwrap();
        assert!(rep.max_abs < 1e-6, "max_abs {}", rep.max_abs);
    }

    #[test]
    fn quantum_shift_pointwise() {
        let shift = quantum_shift(PotentialFamily::PainleveIV { alpha: 1.0, beta: -0.5 }).unwrap();
        for &x in &[0.5, 1.0, 2.0] {
            let d = (shift.quantum)(x, 0.7) - (shift.classical)(x, 0.7);
            assert_relative_eq!(d, 1.0 / (8.0 * x * x), epsilon = 1e-12);
        }
        let shift = quantum_shift(ho_family()).unwrap();
        for &x in &[0.5, 1.3, 2.7] {
            let d = (shift.quantum)(x, 0.0) - (shift.classical)(x, 0.0);
            assert_relative_eq!(d, -1.0 / (8.0 * x * x), epsilon = 1e-12);
        }
        let shift = quantum_shift(PotentialFamily::PainleveV {
            sigma: 0.25,
            xi: 0.125,
            zeta: 0.125,
        })
        .unwrap();
        for &x in &[0.4, 0.9, 1.5] {
            let d = (shift.quantum)(x, 0.3) - (shift.classical)(x, 0.3);
            let want = -0.25 / (2.0 * x.cosh().powi(2)) + 0.25 / (2.0 * x.sinh().powi(2));
            assert_relative_eq!(d, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let fam = PotentialFamily::HarmonicOscillator { omega: 1.0, l: 1.0 };
        let traj = integrate_newton(fam, 2.0, 0.0, (0.0, 0.5), 1e-2).unwrap();
        let text = trajectory_to_csv(&traj);
        assert!(text.starts_with("# family=harmonic-oscillator"));
        let back = trajectory_from_csv(&text, fam).unwrap();
        assert_eq!(back.len(), traj.len());
        for k in 0..traj.len() {
            assert_eq!(back.u[k], traj.u[k]);
            assert_eq!(back.udot[k], traj.udot[k]);
        }
        assert_eq!(back.energy, traj.energy);
    }
}
