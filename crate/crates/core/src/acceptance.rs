//! The acceptance suite: twelve self-contained criteria covering the
//! polynomial kernels, the shape-invariance catalog, the SUSY construction,
//! the reduced ODE closures, the k3 sign resolution, the hydrogen closed
//! form, zero-curvature verification of all three catalog pairs, the
//! assembly identity, the two-term spectral solution, density observables,
//! Crank-Nicolson convergence, and report determinism.
//!
//! Every tolerance is pinned here as a default; the CLI can override any of
//! them by name. Reports carry no timing, so identical runs are
//! byte-identical.

use crate::correspondence::{
    gambier_residual, linear4_residual, resolve_k3_sign, vq_residual, zero_free_windows, BSplit,
    KCoefficients,
};
use crate::evolve::{
    coefficient_system, constraint_residual, crank_nicolson_evolve, density_observables,
    lsp_residuals, stationary_solution, two_term_solution, WaveField,
};
use crate::field::{linspace, Domain, ScalarField};
use crate::jet::RJet;
use crate::laxpair::{
    assemble_lax, catalog_pair, ho_trajectory_exact, integrate_newton, PotentialFamily,
    ZccOptions,
};
use crate::orthopoly::{binom, exc_laguerre, jacobi, jacobi_deriv, laguerre, laguerre_deriv};
use crate::report::Json;
use crate::susy::{
    build_b1, gaussian_probe, shape_invariance_defect, vq as susy_vq, LadderCatalog, LadderPair,
    LadderShift, PrepotentialSpec,
};
use num_complex::Complex64;

/// Named tolerance overrides; unlisted names fall back to the pinned
/// defaults in each criterion.
#[derive(Clone, Debug, Default)]
pub struct Tolerances {
    entries: Vec<(String, f64)>,
}

impl Tolerances {
    pub fn set(&mut self, name: &str, value: f64) {
        if let Some(e) = self.entries.iter_mut().find(|(k, _)| k == name) {
            e.1 = value;
        } else {
            self.entries.push((name.to_string(), value));
        }
    }

    pub fn get(&self, name: &str, default: f64) -> f64 {
        self.entries
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
            .unwrap_or(default)
    }

    /// Parse a `NAME=VALUE` CLI override.
    pub fn parse_override(&mut self, s: &str) -> Result<(), String> {
        let (name, value) = s
            .split_once('=')
            .ok_or_else(|| format!("expected NAME=VALUE, got '{s}'"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("bad tolerance value in '{s}'"))?;
        if value <= 0.0 {
            return Err(format!("tolerance must be positive in '{s}'"));
        }
        self.set(name.trim(), value);
        Ok(())
    }
}

/// Result of one criterion.
#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub number: u32,
    pub name: &'static str,
    pub pass: bool,
    pub details: Json,
}

impl CriterionReport {
    /// One-line summary for terminal output.
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:02} [{}] {}",
            self.number,
            self.name,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }

    /// Full report as deterministic JSON.
    pub fn to_json(&self) -> Json {
        let mut obj = Json::object();
        obj.push("criterion", Json::Int(self.number as i64));
        obj.push("name", Json::str(self.name));
        obj.push("pass", Json::Bool(self.pass));
        obj.push("details", self.details.clone());
        obj
    }
}

/// Deterministic splitmix64 stream for sampling test points.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
}

fn push_check(details: &mut Json, checks: &mut bool, name: &str, value: f64, tol: f64) {
    let mut entry = Json::object();
    entry.push("value", Json::Num(value));
    entry.push("tolerance", Json::Num(tol));
    entry.push("pass", Json::Bool(value <= tol));
    details.push(name, entry);
    *checks &= value <= tol;
}

fn push_check_min(details: &mut Json, checks: &mut bool, name: &str, value: f64, floor: f64) {
    let mut entry = Json::object();
    entry.push("value", Json::Num(value));
    entry.push("floor", Json::Num(floor));
    entry.push("pass", Json::Bool(value >= floor));
    details.push(name, entry);
    *checks &= value >= floor;
}

// ---------------------------------------------------------------------------
// 1. Orthogonal-polynomial gate
// ---------------------------------------------------------------------------

fn criterion_1(tol: &Tolerances) -> CriterionReport {
    let gate = tol.get("poly_gate", 1e-9);
    let exact = tol.get("poly_exceptional_exact", 1e-12);
    let mut rng = SplitMix64(0xA11CE);
    let mut worst_rec: f64 = 0.0;
    let mut worst_deriv: f64 = 0.0;
    let mut worst_endpoint: f64 = 0.0;
    for _ in 0..200 {
        let n = (rng.next_u64() % 21) as i64;
        let alpha = rng.uniform(-0.9, 3.0);
        let beta = rng.uniform(-0.9, 3.0);
        let x = rng.uniform(-20.0, 20.0);
        let xj = rng.uniform(-1.0, 1.0);

        // three-term recurrence residual, scale-relative
        let lm = laguerre(n - 1, alpha, x).unwrap();
        let l0 = laguerre(n, alpha, x).unwrap();
        let lp = laguerre(n + 1, alpha, x).unwrap();
        let nf = n as f64;
        let rec = ((nf + 1.0) * lp - (2.0 * nf + alpha + 1.0 - x) * l0 + (nf + alpha) * lm).abs()
            / l0.abs().max(1.0);
        worst_rec = worst_rec.max(rec);

        // derivative lowering identities
        let dl = (laguerre_deriv(n.max(1), alpha, x, 1).unwrap()
            + laguerre(n.max(1) - 1, alpha + 1.0, x).unwrap())
        .abs()
            / laguerre(n.max(1), alpha, x).unwrap().abs().max(1.0);
        let dj = (jacobi_deriv(n.max(1), alpha, beta, xj, 1).unwrap()
            - 0.5
                * (n.max(1) as f64 + alpha + beta + 1.0)
                * jacobi(n.max(1) - 1, alpha + 1.0, beta + 1.0, xj).unwrap())
        .abs()
            / jacobi(n.max(1), alpha, beta, xj).unwrap().abs().max(1.0);
        worst_deriv = worst_deriv.max(dl).max(dj);

        // endpoint values against generalized binomials
        let e_l = (laguerre(n, alpha, 0.0).unwrap() - binom(nf + alpha, n)).abs()
            / binom(nf + alpha, n).abs().max(1.0);
        let e_j = (jacobi(n, alpha, beta, 1.0).unwrap() - binom(nf + alpha, n)).abs()
            / binom(nf + alpha, n).abs().max(1.0);
        worst_endpoint = worst_endpoint.max(e_l).max(e_j);
    }
    // exceptional reductions at N = 0 are exact
    let mut worst_exc: f64 = 0.0;
    for _ in 0..50 {
        let n = (rng.next_u64() % 6) as i64;
        let l = rng.uniform(0.0, 3.0);
        let y = rng.uniform(0.0, 5.0);
        let diff =
            (exc_laguerre(0, n, l, y).unwrap() - laguerre(n, l + 0.5, y).unwrap()).abs();
        worst_exc = worst_exc.max(diff / laguerre(n, l + 0.5, y).unwrap().abs().max(1.0));
    }
    let mut pass = true;
    let mut details = Json::object();
    push_check(&mut details, &mut pass, "recurrence_rel", worst_rec, gate);
    push_check(&mut details, &mut pass, "derivative_identity_rel", worst_deriv, gate);
    push_check(&mut details, &mut pass, "endpoint_rel", worst_endpoint, gate);
    push_check(&mut details, &mut pass, "exceptional_reduction_rel", worst_exc, exact);
    CriterionReport {
        number: 1,
        name: "orthogonal-polynomial-gate",
        pass,
        details,
    }
}

// ---------------------------------------------------------------------------
// 2. Shape invariance
// ---------------------------------------------------------------------------

fn criterion_2(tol: &Tolerances) -> CriterionReport {
    let dev_tol = tol.get("defect_deviation", 1e-8);
    let const_tol = tol.get("defect_constant", 1e-8);
    let probes: Vec<ScalarField> = (0..10)
        .map(|k| gaussian_probe(0.8 + 0.22 * k as f64, 0.6))
        .collect();
    let grid = linspace(0.5, 3.2, 40);

    let mut pass = true;
    let mut details = Json::object();

    let omega = 1.0;
    let ho = LadderCatalog::HarmonicOscillator { omega, l: 1.0 };
    let est = shape_invariance_defect(&ho, LadderShift { dl: 1.0, dg: 0.0 }, &probes, &grid)
        .expect("probe support covers the grid");
    let mut ho_obj = Json::object();
    ho_obj.push("constant_estimate", Json::Num(est.constant));
    ho_obj.push("constant_expected", Json::Num(4.0 * omega));
    details.push("oscillator_ladder", ho_obj);
    push_check(&mut details, &mut pass, "oscillator_deviation", est.max_deviation, dev_tol);
    push_check(
        &mut details,
        &mut pass,
        "oscillator_constant_error",
        (est.constant - 4.0 * omega).abs(),
        const_tol,
    );

    let (g, l) = (1.0, 0.5);
    let hyp = LadderCatalog::HyperbolicPoschlTeller { g, l };
    let est = shape_invariance_defect(&hyp, LadderShift { dl: 1.0, dg: 1.0 }, &probes, &grid)
        .expect("probe support covers the grid");
    // symbolic subtraction: a a†(l,g) - a†a(l+1,g+1) = -4 (g + l + 1)
    let expected = -4.0 * (g + l + 1.0);
    let mut pt_obj = Json::object();
    pt_obj.push("constant_estimate", Json::Num(est.constant));
    pt_obj.push("constant_expected", Json::Num(expected));
    details.push("hyperbolic_ladder", pt_obj);
    push_check(&mut details, &mut pass, "hyperbolic_deviation", est.max_deviation, dev_tol);
    push_check(
        &mut details,
        &mut pass,
        "hyperbolic_constant_error",
        (est.constant - expected).abs(),
        const_tol,
    );
    CriterionReport {
        number: 2,
        name: "shape-invariance-defect",
        pass,
        details,
    }
}

// ---------------------------------------------------------------------------
// 3. SUSY eigenrelations
// ---------------------------------------------------------------------------

fn criterion_3(tol: &Tolerances) -> CriterionReport {
    let gate = tol.get("eigenrelation_rel", 1e-8);
    let mut worst: f64 = 0.0;
    let mut cases = 0u32;
    for &(omega, l) in &[(1.0, 1.0), (1.5, 0.5)] {
        for big_n in 0..=2 {
            for n in 0..=2 {
                let spec = PrepotentialSpec::HarmonicOscillator { omega, l, big_n, n };
                worst = worst.max(eigenrelation_rel(&spec, &linspace(0.15, 5.0, 30)));
                cases += 1;
            }
        }
    }
    for &(g, h) in &[(1.0, 2.0), (0.5, 1.5)] {
        for big_n in 0..=2 {
            for n in 0..=2 {
                let spec = PrepotentialSpec::PoschlTeller { g, h, big_n, n };
                worst = worst.max(eigenrelation_rel(
                    &spec,
                    &linspace(0.15, std::f64::consts::FRAC_PI_2 - 0.15, 30),
                ));
                cases += 1;
            }
        }
    }
    let mut pass = true;
    let mut details = Json::object();
    details.push("cases", Json::Int(cases as i64));
    push_check(&mut details, &mut pass, "eigenrelation_rel", worst, gate);
    CriterionReport {
        number: 3,
        name: "susy-eigenrelations",
        pass,
        details,
    }
}

fn eigenrelation_rel(spec: &PrepotentialSpec, grid: &[f64]) -> f64 {
    let ladder = LadderPair::for_spec(spec).expect("catalog spec");
    let phi = crate::susy::eigenfunction(spec).expect("catalog spec");
    let ada_phi = ladder.create(&ladder.annihilate(&phi));
    let ev = spec.ada_eigenvalue();
    let mut worst: f64 = 0.0;
    for &x in grid {
        let lhs = ada_phi.value(x);
        let rhs = ev * phi.value(x);
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1e-10));
    }
    worst
}

// ---------------------------------------------------------------------------
// 4. Quantum ODE closure
// ---------------------------------------------------------------------------

fn criterion_4(tol: &Tolerances) -> CriterionReport {
    let vq_tol = tol.get("vq_closure_rel", 1e-7);
    let ode2_tol = tol.get("gambier_linear4_rel", 1e-6);
    let control_floor = tol.get("closure_negative_control", 1e-2);
    let mut pass = true;
    let mut details = Json::object();

    for (label, spec, grid) in [
        (
            "oscillator",
            PrepotentialSpec::HarmonicOscillator { omega: 1.0, l: 1.0, big_n: 1, n: 1 },
            linspace(0.2, 5.0, 120),
        ),
        (
            "poschl_teller",
            PrepotentialSpec::PoschlTeller { g: 1.0, h: 2.0, big_n: 1, n: 1 },
            linspace(0.15, std::f64::consts::FRAC_PI_2 - 0.15, 120),
        ),
    ] {
        let b1 = build_b1(&spec).expect("catalog spec");
        let vq = susy_vq(&spec).expect("catalog spec");
        let k = KCoefficients::new(spec.k1(), 0.0, 0.0);
        let r = vq_residual(&vq, &b1, &k, &grid);
        push_check(
            &mut details,
            &mut pass,
            &format!("{label}_vq_rel"),
            r.max_rel,
            vq_tol,
        );
        let windows = zero_free_windows(&b1, &grid, 0.05);
        let mut worst_g: f64 = 0.0;
        let mut worst_l4: f64 = 0.0;
        for w in &windows {
            worst_g = worst_g.max(
                gambier_residual(&b1, &vq, spec.k1(), w)
                    .expect("windows exclude zeros")
                    .max_rel,
            );
            worst_l4 = worst_l4.max(linear4_residual(&b1, &vq, spec.k1(), w).max_rel);
        }
        details.push(&format!("{label}_windows"), Json::Int(windows.len() as i64));
        push_check(
            &mut details,
            &mut pass,
            &format!("{label}_gambier_rel"),
            worst_g,
            ode2_tol,
        );
        push_check(
            &mut details,
            &mut pass,
            &format!("{label}_linear4_rel"),
            worst_l4,
            ode2_tol,
        );
    }

    // negative controls: the Gambier form assumes k2 = k3 = 0, and a generic
    // smooth b1 fails the linear form
    let (omega, l, e) = (1.0, 1.0, 4.0);
    let vq_full = ScalarField::new(Domain::POSITIVE, 6, move |x| {
        let xj = RJet::variable(x);
        (xj * xj).scale(0.5 * omega * omega)
            + (xj * xj).recip().scale(0.5 * (l * l - 0.25))
            - RJet::constant(e)
    });
    let square = ScalarField::from_jet_expr(Domain::POSITIVE, |x| x * x);
    let g_bad = gambier_residual(&square, &vq_full, 2.0 * omega * omega, &linspace(0.5, 2.0, 10))
        .expect("no zeros of x^2 on the window")
        .max_rel;
    push_check_min(&mut details, &mut pass, "gambier_negative_control", g_bad, control_floor);
    let smooth = ScalarField::from_jet_expr(Domain::REAL_LINE, |x| x.sin() + x.exp());
    let l4_bad = linear4_residual(&smooth, &vq_full, 2.0, &linspace(0.5, 2.0, 10)).max_rel;
    push_check_min(&mut details, &mut pass, "linear4_negative_control", l4_bad, control_floor);

    CriterionReport {
        number: 4,
        name: "quantum-ode-closure",
        pass,
        details,
    }
}

// ---------------------------------------------------------------------------
// 5. k3 sign resolution
// ---------------------------------------------------------------------------

fn criterion_5(tol: &Tolerances) -> CriterionReport {
    let gate = tol.get("k3_residual", 1e-10);
    let (l, omega, e) = (1.0, 1.0, 4.0);
    let res = resolve_k3_sign(l, omega, e);
    let mut pass = true;
    let mut details = Json::object();
    details.push("resolved_sign", Json::Int(res.sign as i64));
    details.push("k3_resolved", Json::Num(res.k3));
    details.push(
        "k3_resolved_formula",
        Json::str(if res.sign > 0 { "+2*l^2" } else { "-2*l^2" }),
    );
    details.push("stated_text_value", Json::str("-2*l^2 (flagged: fails both residuals)"));
    push_check(&mut details, &mut pass, "vc_residual_resolved", res.vc_residual_plus, gate);
    push_check(&mut details, &mut pass, "vq_residual_resolved", res.vq_residual_plus, gate);
    push_check_min(
        &mut details,
        &mut pass,
        "vc_residual_rejected",
        res.vc_residual_minus,
        1e-2,
    );
    pass &= res.sign == 1;
    details.push("uniquely_resolved", Json::Bool(res.sign == 1));
    CriterionReport {
        number: 5,
        name: "k3-sign-resolution",
        pass,
        details,
    }
}

// ---------------------------------------------------------------------------
// 6. Hydrogen n = N = 0 closed forms
// ---------------------------------------------------------------------------

fn criterion_6(tol: &Tolerances) -> CriterionReport {
    let b1_tol = tol.get("hydrogen_b1_rel", 1e-10);
    let vc_tol = tol.get("hydrogen_vc_rel", 1e-9);
    let (mu, l) = (1.0, 1.0);
    let spec = PrepotentialSpec::Hydrogen { mu, l, big_n: 0, n: 0 };
    let b1 = build_b1(&spec).expect("valid spec");
    let k1 = spec.k1();
    let printed_b1 = |x: f64| {
        (mu * x / (2.0 * l * (l + 1.0))).exp() * (2.0 * l + 1.0) / (2.0 * l)
            * (2.0 * l - x * mu / (l + 1.0))
    };
    let printed_vc = |u: f64| {
        (2.0 * l + 1.0).powi(2) / (8.0 * l * (l + 1.0))
            * (l * (l + 1.0) / (u * u) - mu / u + mu * mu / (4.0 * l * (l + 1.0)))
    };
    let mut worst_b1: f64 = 0.0;
    let mut worst_vc: f64 = 0.0;
    for &u in &linspace(0.3, 5.0, 20) {
        let want = printed_b1(u);
        worst_b1 = worst_b1.max((b1.value(u) - want).abs() / want.abs().max(1e-10));
        // V_c = k1 b^2 / b_u^2 with b2 = b1 (the b|_{x=u} = 0 choice)
        let j = b1.jet(u);
        let vc = k1 * j.value() * j.value() / (j.deriv(1) * j.deriv(1));
        let want_vc = printed_vc(u);
        worst_vc = worst_vc.max((vc - want_vc).abs() / want_vc.abs().max(1e-10));
    }
    let mut pass = true;
    let mut details = Json::object();
    details.push("k1", Json::Num(k1));
    push_check(&mut details, &mut pass, "b1_closed_form_rel", worst_b1, b1_tol);
    push_check(&mut details, &mut pass, "vc_closed_form_rel", worst_vc, vc_tol);
    CriterionReport {
        number: 6,
        name: "hydrogen-closed-form",
        pass,
        details,
    }
}

// ---------------------------------------------------------------------------
// 7. Zero-curvature verification
// ---------------------------------------------------------------------------

fn criterion_7(tol: &Tolerances) -> CriterionReport {
    let mut pass = true;
    let mut details = Json::object();

    // (a) oscillator catalog pair with the exact trajectory
    {
        let ho_extr_tol = tol.get("zcc_ho_extrapolated", 1e-6);
        let (e, l, omega) = (4.0, 1.0, 1.0);
        let ts = linspace(0.0, 1.2, 1201);
        let traj = ho_trajectory_exact(e, l, omega, &ts).expect("E >= l omega");
        let fam = PotentialFamily::HarmonicOscillator { omega, l };
        let pair = catalog_pair(fam, &traj).expect("family match");
        let xs = linspace(0.5, 4.0, 9);
        let t_grid = linspace(0.1, 1.0, 7);
        let opts = |dt: f64| ZccOptions::new(dt).with_locus_margin(0.1);
        let r1 = crate::laxpair::zcc_residual(&pair, &xs, &t_grid, opts(2e-3))
            .expect("window inside support")
            .max_abs;
        let r2 = crate::laxpair::zcc_residual(&pair, &xs, &t_grid, opts(1e-3))
            .expect("window inside support")
            .max_abs;
        let order = (r1 / r2).log2();
        let extr = crate::laxpair::zcc_residual(&pair, &xs, &t_grid, opts(1.25e-4).richardson())
            .expect("window inside support")
            .max_abs;
        let perturbed = catalog_pair(fam, &traj.perturbed(0.01)).expect("family match");
        let bad = crate::laxpair::zcc_residual(&perturbed, &xs, &t_grid, opts(1.25e-4).richardson())
            .expect("window inside support")
            .max_abs;
        let mut obj = Json::object();
        obj.push("order", Json::Num(order));
        obj.push("extrapolated", Json::Num(extr));
        obj.push("perturbed", Json::Num(bad));
        obj.push("separation", Json::Num(bad / extr.max(1e-300)));
        details.push("oscillator", obj);
        let order_ok = (order - 2.0).abs() <= 0.3;
        pass &= order_ok;
        push_check(&mut details, &mut pass, "oscillator_extrapolated", extr, ho_extr_tol);
        push_check_min(
            &mut details,
            &mut pass,
            "oscillator_perturbation_separation",
            bad / extr.max(1e-300),
            1e3,
        );
        details.push("oscillator_order_in_range", Json::Bool(order_ok));
    }

    // (b) Painleve IV pair on an integrated trajectory
    {
        let piv_tol = tol.get("zcc_piv_extrapolated", 1e-5);
        let fam = PotentialFamily::PainleveIV { alpha: 1.0, beta: -0.5 };
        let traj = integrate_newton(fam, 0.9, -0.3, (0.45, 1.55), 1e-4).expect("window is regular");
        let pair = catalog_pair(fam, &traj).expect("family match");
        let report = crate::laxpair::zcc_residual(
            &pair,
            &linspace(0.5, 2.0, 7),
            &linspace(0.5, 1.5, 6),
            ZccOptions::new(1e-3).richardson(),
        )
        .expect("window inside support");
        push_check(&mut details, &mut pass, "piv_extrapolated", report.max_abs, piv_tol);
    }

    // (c) Painleve V pair; a non-converging residual would flag the
    // transcription rather than silently pass
    {
        let pv_tol = tol.get("zcc_pv_extrapolated", 1e-5);
        let fam = PotentialFamily::PainleveV { sigma: 0.25, xi: 0.125, zeta: 0.125 };
        let traj = integrate_newton(fam, 1.0, 0.0, (0.0, 0.24), 1e-5).expect("window before blowup");
        let pair = catalog_pair(fam, &traj).expect("family match");
        let xs = linspace(0.4, 1.2, 5);
        let t_grid = linspace(0.05, 0.22, 5);
        let raw1 = crate::laxpair::zcc_residual(&pair, &xs, &t_grid, ZccOptions::new(2e-3))
            .expect("window inside support")
            .max_abs;
        let raw2 = crate::laxpair::zcc_residual(&pair, &xs, &t_grid, ZccOptions::new(1e-3))
            .expect("window inside support")
            .max_abs;
        let order = (raw1 / raw2).log2();
        let extr = crate::laxpair::zcc_residual(
            &pair,
            &xs,
            &t_grid,
            ZccOptions::new(1e-3).richardson(),
        )
        .expect("window inside support")
        .max_abs;
        let converges = (order - 2.0).abs() <= 0.5;
        let mut obj = Json::object();
        obj.push("order", Json::Num(order));
        obj.push("extrapolated", Json::Num(extr));
        obj.push(
            "transcription_flag",
            Json::Bool(!(converges && extr <= pv_tol)),
        );
        details.push("pv", obj);
        push_check(&mut details, &mut pass, "pv_extrapolated", extr, pv_tol);
        pass &= converges;
    }

    CriterionReport {
        number: 7,
        name: "zero-curvature-verification",
        pass,
        details,
    }
}

// ---------------------------------------------------------------------------
// 8. Assembly reproduces the printed oscillator pair
// ---------------------------------------------------------------------------

fn criterion_8(tol: &Tolerances) -> CriterionReport {
    let gate = tol.get("assemble_entrywise", 1e-8);
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
    let traj = ho_trajectory_exact(e, l, omega, &ts).expect("E >= l omega");
    let assembled = assemble_lax(&b, &vq, &traj);
    let catalog = catalog_pair(PotentialFamily::HarmonicOscillator { omega, l }, &traj)
        .expect("family match");
    let mut rng = SplitMix64(0x5EED);
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    while tested < 500 {
        let x = rng.uniform(0.5, 4.0);
        let t = rng.uniform(0.05, 1.45);
        if assembled.check_off_locus(x, t, 0.1).is_err() {
            continue;
        }
        let ua = assembled.u_field.eval(x, t);
        let uc = catalog.u_field.eval(x, t);
        let va = assembled.v_field.eval(x, t);
        let vc = catalog.v_field.eval(x, t);
        for i in 0..2 {
            for j in 0..2 {
                worst = worst
                    .max((ua.m[i][j] - uc.m[i][j]).norm())
                    .max((va.m[i][j] - vc.m[i][j]).norm());
            }
        }
        tested += 1;
    }
    let mut pass = true;
    let mut details = Json::object();
    details.push("samples", Json::Int(500));
    push_check(&mut details, &mut pass, "entrywise_max", worst, gate);
    CriterionReport {
        number: 8,
        name: "assembly-matches-catalog",
        pass,
        details,
    }
}

// ---------------------------------------------------------------------------
// 9. Two-term spectral solution
// ---------------------------------------------------------------------------

fn criterion_9(tol: &Tolerances) -> CriterionReport {
    let coeff_tol = tol.get("coefficient_residual", 1e-12);
    let constraint_tol = tol.get("constraint_rel", 1e-8);
    let lsp_tol = tol.get("lsp_rel", 1e-7);
    let stationary_tol = tol.get("stationary_constraint", 1e-10);
    let density_tol = tol.get("stationary_density_drift", 1e-10);
    let omega = 1.0;
    let mut pass = true;
    let mut details = Json::object();

    let mut worst_coeff: f64 = 0.0;
    let mut worst_constraint: f64 = 0.0;
    let mut worst_lsp_x: f64 = 0.0;
    let mut worst_lsp_t: f64 = 0.0;
    let mut sandwich_exact = true;
    for n in 0..=2i64 {
        for l_int in 0..=2i64 {
            let l = l_int as f64;
            let e = omega * (2.0 * n as f64 + l + 2.0);
            // coefficient-system residuals at the two-term coefficients
            let mut c = vec![Complex64::new(0.0, 0.0); (n + 3) as usize];
            c[n as usize] = Complex64::new(1.0, 0.0);
            c[(n + 1) as usize] = Complex64::new(0.0, -1.0) * ((n + 1) as f64).sqrt()
                / (n as f64 + l + 1.0).sqrt();
            let rows = coefficient_system(&c, e, n + 2, l, omega).expect("E above threshold");
            for row in rows {
                worst_coeff = worst_coeff
                    .max(row.alpha.norm())
                    .max(row.beta.norm())
                    .max(row.gamma.norm());
            }
            // energy sandwich, exact integer arithmetic on the quantum numbers
            sandwich_exact &= 2 * n + l_int + 1 < 2 * n + l_int + 2
                && 2 * n + l_int + 2 < 2 * n + l_int + 3;

            let (sol, eval) = two_term_solution(n, l, omega).expect("valid quantum numbers");
            let ratio = sol.c_n_plus_1 / sol.c_n;
            let want = Complex64::new(0.0, -1.0) * ((n + 1) as f64).sqrt()
                / (n as f64 + l + 1.0).sqrt();
            worst_coeff = worst_coeff.max((ratio - want).norm());

            let ts = linspace(0.0, 3.2, 3201);
            let traj = ho_trajectory_exact(sol.energy, l, omega, &ts).expect("two-term energy");
            let rep = constraint_residual(
                &eval,
                &traj,
                &linspace(0.3, 4.0, 21),
                &linspace(0.0, 3.0, 9),
            )
            .expect("matching trajectory");
            worst_constraint = worst_constraint.max(rep.max_rel);

            let pair = catalog_pair(PotentialFamily::HarmonicOscillator { omega, l }, &traj)
                .expect("family match");
            let lsp = lsp_residuals(
                &eval,
                &pair,
                &linspace(0.3, 4.0, 15),
                &linspace(0.1, 3.0, 7),
                0.1,
            )
            .expect("matching trajectory");
            worst_lsp_x = worst_lsp_x.max(lsp.max_rel_x);
            worst_lsp_t = worst_lsp_t.max(lsp.max_rel_t);
        }
    }
    details.push("cases", Json::Int(9));
    details.push("energy_sandwich_exact", Json::Bool(sandwich_exact));
    pass &= sandwich_exact;
    push_check(&mut details, &mut pass, "coefficient_residual", worst_coeff, coeff_tol);
    push_check(&mut details, &mut pass, "constraint_rel", worst_constraint, constraint_tol);
    push_check(&mut details, &mut pass, "lsp_x_rel", worst_lsp_x, lsp_tol);
    push_check(&mut details, &mut pass, "lsp_t_rel", worst_lsp_t, lsp_tol);

    // stationary case E = omega l
    let l = 1.0;
    let eval = stationary_solution(l, omega).expect("valid");
    let ts = linspace(0.0, 2.0, 201);
    let traj = ho_trajectory_exact(omega * l, l, omega, &ts).expect("stationary energy");
    let rep = constraint_residual(
        &eval,
        &traj,
        &linspace(0.3, 4.0, 21),
        &linspace(0.0, 2.0, 9),
    )
    .expect("matching trajectory");
    push_check(&mut details, &mut pass, "stationary_constraint_rel", rep.max_rel, stationary_tol);
    let dens = density_observables(
        &eval,
        &linspace(1e-3, 10.0, 4001),
        &linspace(0.0, 4.0, 101),
        &[1.0],
    )
    .expect("grids valid");
    push_check(&mut details, &mut pass, "stationary_density_drift", dens.norm_drift, density_tol);
    let stationary_period_infinite = dens.probe_periods[0].1.is_infinite();
    details.push(
        "stationary_density_time_independent",
        Json::Bool(stationary_period_infinite),
    );
    pass &= stationary_period_infinite;

    CriterionReport {
        number: 9,
        name: "two-term-lsp-solution",
        pass,
        details,
    }
}

// ---------------------------------------------------------------------------
// 10. Density observables
// ---------------------------------------------------------------------------

fn criterion_10(tol: &Tolerances) -> CriterionReport {
    let period_tol = tol.get("density_period", 1e-6);
    let drift_tol = tol.get("norm_drift", 1e-8);
    let (n, l, omega) = (0i64, 1.0, 1.0);
    let (_, eval) = two_term_solution(n, l, omega).expect("valid quantum numbers");
    let period_expected = std::f64::consts::PI / omega;
    // norm drift over two periods on a fine spatial grid
    let drift = density_observables(
        &eval,
        &linspace(1e-3, 10.0, 4001),
        &linspace(0.0, 2.0 * period_expected, 511),
        &[],
    )
    .expect("grids valid")
    .norm_drift;
    // probe periods on a fine time grid
    let rep = density_observables(
        &eval,
        &linspace(1e-3, 10.0, 2),
        &linspace(0.0, 2.0 * period_expected, 8001),
        &[0.7, 1.2, 2.0],
    )
    .expect("grids valid");
    let mut pass = true;
    let mut details = Json::object();
    details.push("period_expected", Json::Num(period_expected));
    let mut worst_period: f64 = 0.0;
    let mut probes = Json::object();
    for &(xs, p) in &rep.probe_periods {
        worst_period = worst_period.max((p - period_expected).abs());
        probes.push(&format!("x_{xs}"), Json::Num(p));
    }
    details.push("probe_periods", probes);
    push_check(&mut details, &mut pass, "period_error", worst_period, period_tol);
    push_check(&mut details, &mut pass, "norm_drift", drift, drift_tol);
    details.push(
        "note",
        Json::str(
            "pointwise density oscillates at angular frequency 2*omega (period pi/omega); \
             the integrated norm is time-independent by orthogonality",
        ),
    );
    CriterionReport {
        number: 10,
        name: "density-observables",
        pass,
        details,
    }
}

// ---------------------------------------------------------------------------
// 11. Crank-Nicolson
// ---------------------------------------------------------------------------

fn criterion_11(tol: &Tolerances) -> CriterionReport {
    let ratio_lo = tol.get("cn_ratio_lo", 3.5);
    let ratio_hi = tol.get("cn_ratio_hi", 4.5);
    let drift_tol = tol.get("cn_step_drift", 1e-10);
    let packet_tol = tol.get("cn_packet_rel", 1e-4);
    let mut pass = true;
    let mut details = Json::object();

    // eigenphase error ratio under dt halving, measured against the
    // discrete Rayleigh-quotient energy so only the temporal error remains
    let (n, l, omega) = (0i64, 6.0, 1.0);
    let f = crate::evolve::chi_field(n, l, omega).expect("valid");
    let (x0, x1) = (0.05, 8.0);
    let dx = 2e-3_f64;
    let npts = ((x1 - x0) / dx).round() as usize + 1;
    let psi0 = WaveField::from_fn(x0, dx, npts, 0.0, |x| Complex64::new(f.value(x), 0.0));
    let vq = ScalarField::new(Domain::POSITIVE, 6, move |x| {
        let xj = RJet::variable(x);
        (xj * xj).scale(0.5 * omega * omega) + (xj * xj).recip().scale(0.5 * (l * l - 0.25))
    });
    // discrete energy of the initial state under the same stencil
    let e_disc = {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 1..npts - 1 {
            let x = psi0.x(j);
            let lap = (psi0.psi[j + 1].re - 2.0 * psi0.psi[j].re + psi0.psi[j - 1].re) / (dx * dx);
            let h_psi = -0.5 * lap + vq.value(x) * psi0.psi[j].re;
            num += psi0.psi[j].re * h_psi;
            den += psi0.psi[j].re * psi0.psi[j].re;
        }
        num / den
    };
    let t_final = 0.3;
    let mut drift_worst: f64 = 0.0;
    let phase_err = |dt: f64| {
        let steps = (t_final / dt).round() as usize;
        let rep = crank_nicolson_evolve(&vq, &psi0, dt, steps).expect("regular system");
        let proj = psi0.inner(&rep.field) / psi0.inner(&psi0);
        let measured = proj.arg();
        let expected = -e_disc * (dt * steps as f64);
        // compare phases on the circle
        let diff = (Complex64::from_polar(1.0, measured)
            - Complex64::from_polar(1.0, expected))
        .norm();
        (diff, rep.max_step_drift)
    };
    let (err_coarse, drift1) = phase_err(2e-3);
    let (err_fine, drift2) = phase_err(1e-3);
    drift_worst = drift_worst.max(drift1).max(drift2);
    let ratio = err_coarse / err_fine;
    let mut obj = Json::object();
    obj.push("e_discrete", Json::Num(e_disc));
    obj.push("phase_error_coarse", Json::Num(err_coarse));
    obj.push("phase_error_fine", Json::Num(err_fine));
    obj.push("ratio", Json::Num(ratio));
    details.push("eigenphase", obj);
    let ratio_ok = ratio >= ratio_lo && ratio <= ratio_hi;
    details.push("ratio_in_range", Json::Bool(ratio_ok));
    pass &= ratio_ok;
    push_check(&mut details, &mut pass, "norm_drift_per_step", drift_worst, drift_tol);

    // free-packet variance growth
    let s0sq = 0.25;
    let (fx0, fx1) = (-8.0, 8.0);
    let fdx = 4e-3_f64;
    let fn_pts = ((fx1 - fx0) / fdx).round() as usize + 1;
    let packet = WaveField::from_fn(fx0, fdx, fn_pts, 0.0, |x| {
        Complex64::new((-x * x / (4.0 * s0sq)).exp(), 0.0)
    });
    let rep = crank_nicolson_evolve(&ScalarField::zero(), &packet, 5e-4, 2000)
        .expect("regular system");
    let want = s0sq + 1.0 / (4.0 * s0sq);
    let got = rep.field.variance();
    push_check(
        &mut details,
        &mut pass,
        "free_packet_variance_rel",
        (got - want).abs() / want,
        packet_tol,
    );
    CriterionReport {
        number: 11,
        name: "crank-nicolson",
        pass,
        details,
    }
}

// ---------------------------------------------------------------------------
// 12. Determinism
// ---------------------------------------------------------------------------

fn criterion_12(tol: &Tolerances) -> CriterionReport {
    // re-run the float-heavy cheap criteria and byte-compare their reports
    let subset = [1u32, 3, 5, 6, 9, 10];
    let mut pass = true;
    let mut details = Json::object();
    let mut identical = Json::object();
    for &k in &subset {
        let a = run_criterion(k, tol).to_json().to_string_pretty();
        let b = run_criterion(k, tol).to_json().to_string_pretty();
        let same = a == b;
        identical.push(&format!("criterion_{k:02}"), Json::Bool(same));
        pass &= same;
    }
    details.push("byte_identical", identical);
    details.push(
        "note",
        Json::str("reports exclude wall-clock timing; floats serialize at 17 significant digits"),
    );
    CriterionReport {
        number: 12,
        name: "report-determinism",
        pass,
        details,
    }
}

/// Run a single criterion by number (1..=12).
pub fn run_criterion(number: u32, tol: &Tolerances) -> CriterionReport {
    match number {
        1 => criterion_1(tol),
        2 => criterion_2(tol),
        3 => criterion_3(tol),
        4 => criterion_4(tol),
        5 => criterion_5(tol),
        6 => criterion_6(tol),
        7 => criterion_7(tol),
        8 => criterion_8(tol),
        9 => criterion_9(tol),
        10 => criterion_10(tol),
        11 => criterion_11(tol),
        12 => criterion_12(tol),
        other => CriterionReport {
            number: other,
            name: "unknown-criterion",
            pass: false,
            details: {
                let mut d = Json::object();
                d.push("error", Json::str(format!("no criterion {other}")));
                d
            },
        },
    }
}

/// Run the full suite in order.
pub fn run_all(tol: &Tolerances) -> Vec<CriterionReport> {
    (1..=12).map(|k| run_criterion(k, tol)).collect()
}
