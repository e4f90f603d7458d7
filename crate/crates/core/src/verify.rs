//! Built-in scenario battery and the named invariants run against it.
//!
//! Every invariant reports its worst margin (`≥ 0` passes, tolerance already
//! folded in) and how many cases were checked or skipped for unmet
//! preconditions. An invariant that checks nothing fails.

use serde::Serialize;

use crate::conditions::{
    check_concavity, check_mlrp, check_prop1, check_prop2, check_prop3, check_quantity_lemma, psi, DEFAULT_GRID,
};
use crate::contract::{
    foc_residual, optimal_price, profit_curvature, revealed_prices, solve_concealed, solve_revealed, welfare,
    Equilibrium, Prices, Scenario,
};
use crate::distributions::{make_garbled_pair, make_mixture, CostModel};
use crate::error::Result;
use crate::garbling::{
    check_garbling_zerocost, price_derivatives, solve_garbled, sweep_garbling, v_garb_prime_fd, w_garb_prime_fd,
    GarblingPoint, EPS_STEP,
};
use crate::numerics::{finite_difference, find_root, integrate, linspace, maximize_scalar, Bracket, Tolerance};
use crate::restriction::{check_drc, check_quasiconvexity, sweep_restriction, RestrictionPoint};
use crate::welfare::{build_trajectories, grid_revelation_preference, TRAJECTORY_SLACK};

/// Utility comparisons and pairwise monotonicity.
pub const UTILITY_TOL: f64 = 1e-9;
/// Finite-difference slope comparisons in `ε`.
pub const SLOPE_TOL: f64 = 1e-6;
/// Relative agreement of analytic and finite-difference price derivatives.
pub const PRICE_DERIVATIVE_RTOL: f64 = 1e-4;
/// `Π″` must be below `−CURVATURE_FLOOR` for the price-derivative check.
pub const CURVATURE_FLOOR: f64 = 1e-6;
/// `|F′ − f|` bound.
pub const CDF_DERIVATIVE_TOL: f64 = 1e-5;
/// `|V′ − F|` bound.
pub const VALUE_DERIVATIVE_TOL: f64 = 1e-6;
/// FOC residual at an interior optimum.
pub const FOC_TOL: f64 = 1e-6;
/// Sum-vs-integral welfare agreement.
pub const WELFARE_FORM_TOL: f64 = 1e-8;
/// Grid-symmetry tolerance of the revelation preference.
pub const SWAP_TOL: f64 = 1e-8;

pub const GARBLING_SWEEP_N: usize = 101;
pub const RESTRICTION_SWEEP_N: usize = 101;
const SLOPE_GRID_N: usize = 11;

#[derive(Debug, Clone)]
pub struct BatteryScenario {
    pub id: String,
    pub scenario: Scenario,
}

fn entry(id: &str, b: f64, theta: f64, f0: Result<CostModel>, f1: Result<CostModel>) -> Result<BatteryScenario> {
    Ok(BatteryScenario {
        id: id.to_string(),
        scenario: Scenario::new(b, theta, f0?, f1?)?,
    })
}

/// The fixed battery: uniform counterexample, the two-exponential
/// scenario, anchored exponentials, Weibull pairs and degenerate cases.
pub fn battery() -> Result<Vec<BatteryScenario>> {
    let exp = CostModel::exponential;
    let wb = CostModel::weibull;
    let zero = || CostModel::point_mass(0.0);
    let mut out = vec![
        entry("uniform-counterexample", 1.0, 0.5, CostModel::uniform(0.5, 1.5), CostModel::uniform(0.0, 1.0))?,
        entry("exp-0.5-0.01", 1.0, 0.5, exp(0.5), exp(0.01))?,
    ];
    for lam in [0.1, 0.2, 0.5, 0.8] {
        out.push(entry(&format!("anchored-exp-{lam}"), 1.0, 0.5, exp(lam), zero())?);
    }
    for k in [0.4, 1.0, 2.0] {
        out.push(entry(&format!("weibull-k{k}"), 1.0, 0.5, wb(0.5, k), wb(0.2, k))?);
    }
    out.push(entry("exp-0.9-0.1", 1.0, 0.5, exp(0.9), exp(0.1))?);
    out.push(entry("identical-exp-0.3", 1.0, 0.5, exp(0.3), exp(0.3))?);
    out.push(entry("weibull-concealment", 1.0, 0.5, wb(0.5, 3.0), wb(0.2, 0.5))?);
    out.push(entry("weibull-revelation", 1.0, 0.5, wb(0.8, 2.0), wb(0.3, 2.0))?);
    out.push(entry("anchored-weibull-k0.4", 1.0, 0.5, wb(0.3, 0.4), zero())?);
    // Exponential mixtures satisfying every precondition of the two
    // restriction-based sufficiency conditions, one each.
    let mix = |w: f64, a: f64, b: f64| make_mixture(vec![(w, exp(a)?), (1.0 - w, exp(b)?)]);
    out.push(entry("mixture-concealment", 1.0, 0.5, mix(0.2, 0.8, 0.4), mix(0.5, 0.4, 0.02))?);
    out.push(entry("mixture-revelation", 1.0, 0.5, mix(0.2, 0.8, 0.05), exp(0.05))?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantOutcome {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub skipped: usize,
    /// Smallest margin seen; negative means violated.
    pub worst_margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub scenarios: Vec<String>,
    pub invariants: Vec<InvariantOutcome>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.invariants.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantOutcome> {
        self.invariants.iter().filter(|i| !i.passed)
    }
}

struct Audit {
    name: &'static str,
    checked: usize,
    skipped: usize,
    worst: f64,
    worst_at: String,
    failure: Option<String>,
}

impl Audit {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checked: 0,
            skipped: 0,
            worst: f64::INFINITY,
            worst_at: String::new(),
            failure: None,
        }
    }

    fn check(&mut self, at: impl AsRef<str>, margin: f64) {
        self.checked += 1;
        if margin.is_nan() {
            self.fail(at, "margin is NaN");
            return;
        }
        if margin < self.worst {
            self.worst = margin;
            self.worst_at = at.as_ref().to_string();
        }
        if margin < 0.0 && self.failure.is_none() {
            self.failure = Some(format!("{}: margin {margin:e}", at.as_ref()));
        }
    }

    fn skip(&mut self) {
        self.skipped += 1;
    }

    fn fail(&mut self, at: impl AsRef<str>, why: impl std::fmt::Display) {
        self.checked += 1;
        self.worst = f64::NEG_INFINITY;
        if self.failure.is_none() {
            self.failure = Some(format!("{}: {why}", at.as_ref()));
        }
    }

    /// Runs `f`, turning an error into a failure at `at`.
    fn guard(&mut self, at: &str, f: impl FnOnce(&mut Self) -> Result<()>) {
        if let Err(e) = f(self) {
            self.fail(at, e);
        }
    }

    fn finish(self) -> InvariantOutcome {
        let passed = self.failure.is_none() && self.checked > 0;
        let detail = match (&self.failure, self.checked) {
            (Some(f), _) => f.clone(),
            (None, 0) => "vacuous: no case met the preconditions".to_string(),
            (None, _) => format!("worst at {}", self.worst_at),
        };
        InvariantOutcome {
            name: self.name.to_string(),
            passed,
            checked: self.checked,
            skipped: self.skipped,
            worst_margin: self.worst,
            detail,
        }
    }
}

/// Deterministic equidistributed points in `[lo, hi]` (golden-ratio Weyl sequence).
pub fn weyl_points(lo: f64, hi: f64, n: usize, offset: usize) -> Vec<f64> {
    const ALPHA: f64 = 0.618_033_988_749_894_9;
    (1..=n)
        .map(|i| lo + (hi - lo) * (((i + offset) as f64 * ALPHA).fract()))
        .collect()
}

/// Solved state shared by the per-scenario invariants.
struct Prepared {
    id: String,
    s: Scenario,
    con: Equilibrium,
    rev: Equilibrium,
    mlrp: bool,
    concave: bool,
    drc: bool,
    anchored: bool,
    garb: Vec<GarblingPoint>,
    restr: Vec<RestrictionPoint>,
}

impl Prepared {
    fn new(b: &BatteryScenario) -> Result<Self> {
        let s = b.scenario.clone();
        let mlrp = check_mlrp(&s.f0, &s.f1, DEFAULT_GRID).is_ok_and(|r| r.holds);
        let concave = check_concavity(&s.f0, s.b, DEFAULT_GRID).holds && check_concavity(&s.f1, s.b, DEFAULT_GRID).holds;
        let drc = check_drc(&s, None).verdict();
        Ok(Self {
            id: b.id.clone(),
            con: solve_concealed(&s)?,
            rev: solve_revealed(&s)?,
            mlrp,
            concave,
            drc,
            anchored: s.f1.is_zero_point_mass(),
            garb: sweep_garbling(&s, s.theta, &linspace(0.0, 1.0, GARBLING_SWEEP_N))?,
            restr: sweep_restriction(&s, RESTRICTION_SWEEP_N)?,
            s,
        })
    }

    /// Environments ordered with a concave profit (the anchored case counts
    /// as ordered when `Π_0` is concave).
    fn ordered(&self) -> bool {
        if self.anchored {
            check_concavity(&self.s.f0, self.s.b, DEFAULT_GRID).holds
        } else {
            self.mlrp && self.concave
        }
    }
}

fn pairwise_min(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn test_families() -> Result<Vec<(&'static str, CostModel)>> {
    Ok(vec![
        ("exp-0.5", CostModel::exponential(0.5)?),
        ("weibull-0.5-0.4", CostModel::weibull(0.5, 0.4)?),
        ("weibull-0.5-2", CostModel::weibull(0.5, 2.0)?),
        ("uniform-0.5-1.5", CostModel::uniform(0.5, 1.5)?),
        (
            "mix-exp",
            make_mixture(vec![(0.3, CostModel::exponential(0.8)?), (0.7, CostModel::exponential(0.1)?)])?,
        ),
    ])
}

/// Sample interval of a family, away from the origin and the far tail.
fn sample_range(m: &CostModel) -> (f64, f64) {
    let (lo, _) = m.support();
    (lo.max(0.05), m.quantile(0.999))
}

fn near_breakpoint(m: &CostModel, c: f64) -> bool {
    m.breakpoints().iter().any(|k| (c - k).abs() < 1e-3)
}

fn numerics_invariants(out: &mut Vec<InvariantOutcome>) {
    let tol = Tolerance::default();

    let mut a = Audit::new("numerics.integrate_exact_on_cubics");
    for (i, (lo, hi)) in [(0.0, 1.0), (-2.0, 3.5), (0.25, 0.3), (10.0, 40.0)].into_iter().enumerate() {
        let f = |x: f64| 2.0 * x * x * x - x * x + 3.0 * x - 5.0;
        let exact = |x: f64| 0.5 * x.powi(4) - x.powi(3) / 3.0 + 1.5 * x * x - 5.0 * x;
        a.guard(&format!("interval {i}"), |a| {
            let got = integrate(f, lo, hi, tol)?;
            let want = exact(hi) - exact(lo);
            a.check(format!("[{lo},{hi}]"), 10.0 * tol.abs_tol.max(tol.rel_tol * want.abs()) - (got - want).abs());
            Ok(())
        });
    }
    out.push(a.finish());

    let mut a = Audit::new("numerics.find_root_residual");
    for (i, shift) in [0.1, 0.5, 1.7, 3.0].into_iter().enumerate() {
        let g = move |x: f64| x.exp() - 1.0 - shift * x.max(0.0) - shift;
        a.guard(&format!("case {i}"), |a| {
            let r = find_root(g, Bracket::new(0.0, 5.0)?, tol)?;
            let slope = finite_difference(g, r, 1e-6).abs().max(1.0);
            a.check(format!("shift {shift}"), 10.0 * tol.abs_tol * slope - g(r).abs());
            Ok(())
        });
    }
    out.push(a.finish());

    let mut a = Audit::new("numerics.maximize_matches_stationary_point");
    for (i, c) in [0.2, 0.9, 2.3].into_iter().enumerate() {
        let f = move |x: f64| (x + 1.0).ln() - c * x * x;
        a.guard(&format!("case {i}"), |a| {
            let m = maximize_scalar(f, Bracket::new(0.0, 3.0)?, 64, tol)?;
            let r = find_root(|x| finite_difference(f, x, 1e-5), Bracket::new(0.0, 3.0)?, tol)?;
            a.check(format!("c {c}"), tol.abs_tol.max(1e-8) - (m.argmax - r).abs());
            Ok(())
        });
    }
    out.push(a.finish());

    let mut a = Audit::new("numerics.deterministic_kernels");
    a.guard("exp-0.5-0.01 sweep", |a| {
        let s = Scenario::new(1.0, 0.5, CostModel::exponential(0.5)?, CostModel::exponential(0.01)?)?;
        let grid = linspace(0.0, 1.0, 9);
        let x = sweep_garbling(&s, 0.5, &grid)?;
        let y = sweep_garbling(&s, 0.5, &grid)?;
        let same = x.iter().zip(&y).all(|(p, q)| p.v_garb.to_bits() == q.v_garb.to_bits() && p.p0.to_bits() == q.p0.to_bits());
        a.check("repeat", if same { 0.0 } else { -1.0 });
        let i1 = integrate(|c| (c * 3.0).sin(), 0.0, 2.0, tol)?;
        let i2 = integrate(|c| (c * 3.0).sin(), 0.0, 2.0, tol)?;
        a.check("integrate", if i1.to_bits() == i2.to_bits() { 0.0 } else { -1.0 });
        Ok(())
    });
    out.push(a.finish());
}

fn distribution_invariants(out: &mut Vec<InvariantOutcome>) {
    let families = match test_families() {
        Ok(f) => f,
        Err(e) => {
            let mut a = Audit::new("distributions.families_construct");
            a.fail("families", e);
            out.push(a.finish());
            return;
        }
    };

    let mut a = Audit::new("distributions.cdf_derivative_is_pdf");
    for (k, (name, m)) in families.iter().enumerate() {
        let (lo, hi) = sample_range(m);
        for c in weyl_points(lo, hi, 1000, 17 * k) {
            if near_breakpoint(m, c) {
                a.skip();
                continue;
            }
            match m.pdf(c) {
                Ok(f) => a.check(
                    format!("{name} at {c}"),
                    CDF_DERIVATIVE_TOL - (finite_difference(|x| m.cdf(x), c, 1e-6) - f).abs(),
                ),
                Err(e) => a.fail(format!("{name} at {c}"), e),
            }
        }
    }
    out.push(a.finish());

    let mut a = Audit::new("distributions.value_derivative_is_cdf");
    for (k, (name, m)) in families.iter().enumerate() {
        let (lo, hi) = sample_range(m);
        for p in weyl_points(lo, hi, 100, 31 * k) {
            if near_breakpoint(m, p) {
                a.skip();
                continue;
            }
            let fd = finite_difference(|x| m.agent_partial_value(x), p, 1e-4);
            a.check(format!("{name} at {p}"), VALUE_DERIVATIVE_TOL - (fd - m.cdf(p)).abs());
        }
    }
    out.push(a.finish());

    let mut a = Audit::new("distributions.restricted_mean_monotone_bounded");
    for (name, m) in &families {
        let (_, hi) = sample_range(m);
        let g: Vec<f64> = linspace(0.0, 1.5 * hi, 200).into_iter().map(|p| m.restricted_mean(p)).collect();
        a.check(format!("{name} monotone"), pairwise_min(g.iter().copied()) + 1e-12);
        let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        a.check(format!("{name} bounded"), m.mean() + 1e-9 - top);
    }
    out.push(a.finish());

    let mut a = Audit::new("distributions.mixture_linearity");
    a.guard("mixture", |a| {
        let parts = [(0.2, families[0].1.clone()), (0.5, families[2].1.clone()), (0.3, families[3].1.clone())];
        let mix = make_mixture(parts.to_vec())?;
        for c in weyl_points(0.0, 2.0, 200, 3) {
            let direct: f64 = parts.iter().map(|(w, m)| w * m.cdf(c)).sum();
            a.check(format!("c {c}"), 1e-12 - (mix.cdf(c) - direct).abs());
        }
        Ok(())
    });
    out.push(a.finish());

    let mut a = Audit::new("distributions.garbled_total_law");
    a.guard("garbled pair", |a| {
        let f0 = CostModel::exponential(0.5)?;
        let f1 = CostModel::weibull(0.2, 2.0)?;
        for theta in [0.2, 0.5, 0.8] {
            for gamma in [0.1, 0.5, 0.9] {
                for eps in [0.0, 0.3, 0.7, 1.0] {
                    let pair = make_garbled_pair(&f0, &f1, theta, gamma, eps)?;
                    for c in [0.05, 0.2, 0.6, 1.3] {
                        let lhs = pair.prob_y0() * pair.g0.cdf(c) + pair.prob_y1 * pair.g1.cdf(c);
                        let rhs = (1.0 - theta) * f0.cdf(c) + theta * f1.cdf(c);
                        a.check(format!("θ={theta} γ={gamma} ε={eps} c={c}"), 1e-12 - (lhs - rhs).abs());
                    }
                }
            }
        }
        Ok(())
    });
    out.push(a.finish());

    let mut a = Audit::new("distributions.mlrp_exponential_ratio_increasing");
    a.guard("exp pair", |a| {
        let (f0, f1) = (CostModel::exponential(0.5)?, CostModel::exponential(0.1)?);
        let ratio: Vec<f64> = linspace(0.001, 1.0, 1000)
            .into_iter()
            .map(|c| Ok(f0.pdf(c)? / f1.pdf(c)?))
            .collect::<Result<_>>()?;
        a.check("λ0=0.5 λ1=0.1", pairwise_min(ratio.into_iter()));
        Ok(())
    });
    out.push(a.finish());
}

fn contract_invariants(prepared: &[Prepared], out: &mut Vec<InvariantOutcome>) {
    let mut a = Audit::new("contract.principal_not_worse");
    for p in prepared {
        a.check(&p.id, p.rev.principal_utility - p.con.principal_utility + UTILITY_TOL);
    }
    out.push(a.finish());

    let mut a = Audit::new("contract.principal_strict_under_mlrp");
    for p in prepared {
        if !p.mlrp {
            a.skip();
            continue;
        }
        a.check(&p.id, p.rev.principal_utility - p.con.principal_utility - UTILITY_TOL);
        a.check(format!("{} prices differ", p.id), (p.rev.p0 - p.rev.p1).abs() - UTILITY_TOL);
    }
    out.push(a.finish());

    let mut a = Audit::new("contract.quantity_lemma_contrapositive");
    for p in prepared {
        a.guard(&p.id, |a| {
            let r = check_quantity_lemma(&p.s)?;
            a.check(&p.id, if r.holds { 0.0 } else { -1.0 });
            if p.rev.welfare > p.con.welfare + UTILITY_TOL {
                a.check(format!("{} quantity", p.id), p.rev.quantity - p.con.quantity + 1e-12);
            }
            Ok(())
        });
    }
    out.push(a.finish());

    let mut a = Audit::new("contract.revealed_prices_separable_in_theta");
    for p in prepared {
        a.guard(&p.id, |a| {
            let (b0, b1) = (p.rev.p0, p.rev.p1);
            for theta in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let s = Scenario::new(p.s.b, theta, p.s.f0.clone(), p.s.f1.clone())?;
                let (q0, q1) = revealed_prices(&s)?;
                a.check(format!("{} θ={theta}", p.id), 1e-12 - (q0 - b0).abs().max((q1 - b1).abs()));
            }
            Ok(())
        });
    }
    out.push(a.finish());

    let mut a = Audit::new("contract.foc_at_interior_optimum");
    for p in prepared {
        for (x, m) in [(0u8, &p.s.f0), (1, &p.s.f1)] {
            if m.has_atoms() || !check_concavity(m, p.s.b, DEFAULT_GRID).holds {
                a.skip();
                continue;
            }
            a.guard(&p.id, |a| {
                let price = optimal_price(m, p.s.b, &p.s.solver)?.argmax;
                if price <= 0.0 || price >= p.s.b {
                    a.skip();
                    return Ok(());
                }
                a.check(format!("{} x={x}", p.id), FOC_TOL - foc_residual(m, p.s.b, price)?.abs());
                Ok(())
            });
        }
    }
    out.push(a.finish());

    let mut a = Audit::new("contract.welfare_sum_matches_integral");
    for p in prepared {
        a.guard(&p.id, |a| {
            let con = welfare(&p.s, Prices::Single(p.con.price()))?;
            let rev = welfare(&p.s, Prices::Pair(p.rev.p0, p.rev.p1))?;
            a.check(format!("{} con", p.id), WELFARE_FORM_TOL - con.discrepancy());
            a.check(format!("{} rev", p.id), WELFARE_FORM_TOL - rev.discrepancy());
            Ok(())
        });
    }
    out.push(a.finish());
}

fn garbling_invariants(prepared: &[Prepared], out: &mut Vec<InvariantOutcome>) {
    let mut a = Audit::new("garbling.principal_interpolates");
    for p in prepared {
        for g in &p.garb {
            let at = format!("{} ε={}", p.id, g.eps);
            a.check(&at, g.pi_garb - p.con.principal_utility + UTILITY_TOL);
            a.check(&at, p.rev.principal_utility - g.pi_garb + UTILITY_TOL);
        }
    }
    out.push(a.finish());

    let mut a = Audit::new("garbling.principal_monotone_in_eps");
    for p in prepared {
        if !p.ordered() {
            a.skip();
            continue;
        }
        a.check(&p.id, pairwise_min(p.garb.iter().map(|g| g.pi_garb)) + UTILITY_TOL);
    }
    out.push(a.finish());

    let mut a = Audit::new("garbling.prices_monotone_in_eps");
    for p in prepared {
        if !p.ordered() {
            a.skip();
            continue;
        }
        a.check(format!("{} p0 up", p.id), pairwise_min(p.garb.iter().map(|g| g.p0)) + UTILITY_TOL);
        a.check(format!("{} p1 down", p.id), pairwise_min(p.garb.iter().map(|g| -g.p1)) + UTILITY_TOL);
    }
    out.push(a.finish());

    let mut a = Audit::new("garbling.price_derivatives_match_fd");
    for p in prepared {
        for eps in [0.25, 0.5, 0.75] {
            a.guard(&p.id, |a| {
                let pair = make_garbled_pair(&p.s.f0, &p.s.f1, p.s.theta, p.s.theta, eps)?;
                let eq = solve_garbled(&p.s, p.s.theta, eps)?;
                let curved = |m: &CostModel, x: f64| profit_curvature(m, p.s.b, x).is_ok_and(|c| c < -CURVATURE_FLOOR);
                if !(curved(&pair.g0, eq.p0) && curved(&pair.g1, eq.p1)) {
                    a.skip();
                    return Ok(());
                }
                let (d0, d1) = price_derivatives(&p.s, p.s.theta, eps)?;
                let price = |e: f64, y: u8| solve_garbled(&p.s, p.s.theta, e).map_or(f64::NAN, |q| if y == 0 { q.p0 } else { q.p1 });
                for (y, d) in [(0u8, d0), (1, d1)] {
                    let fd = finite_difference(|e| price(e, y), eps, EPS_STEP);
                    let scale = fd.abs().max(d.abs()).max(1e-2);
                    a.check(format!("{} ε={eps} y={y}", p.id), PRICE_DERIVATIVE_RTOL * scale - (d - fd).abs());
                }
                Ok(())
            });
        }
    }
    out.push(a.finish());

    let mut a = Audit::new("garbling.endpoints_match_regimes");
    for p in prepared {
        let (first, last) = (&p.garb[0], &p.garb[p.garb.len() - 1]);
        let gap = |g: &GarblingPoint, e: &Equilibrium| {
            (g.pi_garb - e.principal_utility)
                .abs()
                .max((g.v_garb - e.agent_utility).abs())
                .max((g.w_garb - e.welfare).abs())
        };
        a.check(format!("{} ε=0", p.id), UTILITY_TOL - gap(first, &p.con));
        a.check(format!("{} ε=1", p.id), UTILITY_TOL - gap(last, &p.rev));
    }
    out.push(a.finish());

    let mut a = Audit::new("garbling.welfare_slope_at_zero_nonnegative");
    for p in prepared {
        if !p.ordered() {
            a.skip();
            continue;
        }
        a.guard(&p.id, |a| {
            a.check(&p.id, w_garb_prime_fd(&p.s, p.s.theta, 0.0)? + SLOPE_TOL);
            Ok(())
        });
    }
    out.push(a.finish());

    let mut a = Audit::new("garbling.welfare_at_agent_optimum");
    for p in prepared {
        if !p.ordered() {
            a.skip();
            continue;
        }
        let best = p.garb.iter().fold(&p.garb[0], |b, g| if g.v_garb > b.v_garb { g } else { b });
        a.check(format!("{} ε*={}", p.id, best.eps), best.w_garb - p.garb[0].w_garb + UTILITY_TOL);
    }
    out.push(a.finish());

    let mut a = Audit::new("garbling.welfare_slope_dominates_agent_slope");
    for p in prepared {
        if !p.ordered() {
            a.skip();
            continue;
        }
        for eps in linspace(0.0, 1.0, SLOPE_GRID_N) {
            a.guard(&p.id, |a| {
                let w = w_garb_prime_fd(&p.s, p.s.theta, eps)?;
                let v = v_garb_prime_fd(&p.s, p.s.theta, eps)?;
                a.check(format!("{} ε={eps}", p.id), w - v + SLOPE_TOL);
                Ok(())
            });
        }
    }
    out.push(a.finish());
}

fn restriction_invariants(prepared: &[Prepared], out: &mut Vec<InvariantOutcome>) {
    let mut a = Audit::new("restriction.endpoints_match_regimes");
    for p in prepared {
        let (first, last) = (&p.restr[0], &p.restr[p.restr.len() - 1]);
        let gap = |r: &RestrictionPoint, e: &Equilibrium| {
            (r.pi_const - e.principal_utility)
                .abs()
                .max((r.v_const - e.agent_utility).abs())
                .max((r.w_const - e.welfare).abs())
        };
        a.check(format!("{} r=0", p.id), UTILITY_TOL - gap(first, &p.con));
        a.check(format!("{} r=max", p.id), UTILITY_TOL - gap(last, &p.rev));
    }
    out.push(a.finish());

    let mut a = Audit::new("restriction.principal_monotone_in_r");
    for p in prepared {
        if !p.concave && !p.anchored {
            a.skip();
            continue;
        }
        a.check(&p.id, pairwise_min(p.restr.iter().map(|r| r.pi_const)) + UTILITY_TOL);
    }
    out.push(a.finish());

    let mut a = Audit::new("restriction.quasiconvex_under_drc");
    for p in prepared {
        if !(p.drc && p.concave) {
            a.skip();
            continue;
        }
        let r = check_quasiconvexity(&p.restr);
        a.check(&p.id, if r.holds { 0.0 } else { -1.0 });
    }
    out.push(a.finish());

    let mut a = Audit::new("restriction.concealment_condition_sufficient");
    for p in prepared {
        if p.s.f0.has_atoms() || p.s.f1.has_atoms() {
            a.skip();
            continue;
        }
        a.guard(&p.id, |a| {
            if check_prop2(&p.s)?.verdict() {
                a.check(&p.id, p.con.agent_utility - p.rev.agent_utility);
            } else {
                a.skip();
            }
            Ok(())
        });
    }
    out.push(a.finish());

    let mut a = Audit::new("restriction.revelation_condition_sufficient");
    for p in prepared {
        if p.s.f0.has_atoms() || p.s.f1.has_atoms() {
            a.skip();
            continue;
        }
        a.guard(&p.id, |a| {
            if check_prop3(&p.s)?.verdict() {
                a.check(&p.id, p.rev.agent_utility - p.con.agent_utility);
            } else {
                a.skip();
            }
            Ok(())
        });
    }
    out.push(a.finish());
}

fn condition_invariants(prepared: &[Prepared], out: &mut Vec<InvariantOutcome>) {
    let mut a = Audit::new("conditions.anchored_concealment_sufficient");
    for p in prepared.iter().filter(|p| p.anchored) {
        a.guard(&p.id, |a| {
            if check_prop1(&p.s)?.verdict() {
                a.check(&p.id, p.con.agent_utility - p.rev.agent_utility);
            } else {
                a.skip();
            }
            Ok(())
        });
    }
    out.push(a.finish());

    let mut a = Audit::new("conditions.zerocost_garbling_sufficient");
    for p in prepared.iter().filter(|p| p.anchored) {
        a.guard(&p.id, |a| {
            if !check_garbling_zerocost(&p.s)?.verdict() {
                a.skip();
                return Ok(());
            }
            let step = 1.0 / (GARBLING_SWEEP_N - 1) as f64;
            let best = p.garb.iter().fold(&p.garb[0], |b, g| if g.v_garb > b.v_garb { g } else { b });
            a.check(format!("{} ε*={}", p.id, best.eps), 1.0 - step - best.eps + 1e-12);
            Ok(())
        });
    }
    out.push(a.finish());

    let mut a = Audit::new("conditions.psi_decreasing_in_unit_interval");
    let values: Vec<f64> = linspace(0.01, 0.99, 50).into_iter().map(psi).collect();
    a.check("monotone", -pairwise_min(values.iter().copied()));
    for (i, v) in values.iter().enumerate() {
        a.check(format!("range {i}"), v.min(1.0 - v));
    }
    out.push(a.finish());

    let mut a = Audit::new("conditions.mlrp_iff_ordered_means");
    let lams = [0.05, 0.2, 0.5, 1.0];
    for &l0 in &lams {
        for &l1 in &lams {
            a.guard(&format!("{l0},{l1}"), |a| {
                let r = check_mlrp(&CostModel::exponential(l0)?, &CostModel::exponential(l1)?, DEFAULT_GRID)?;
                a.check(format!("λ0={l0} λ1={l1}"), if r.holds == (l0 > l1) { 0.0 } else { -1.0 });
                Ok(())
            });
        }
    }
    out.push(a.finish());
}

fn welfare_invariants(battery: &[BatteryScenario], prepared: &[Prepared], out: &mut Vec<InvariantOutcome>) {
    let mut bounds = Audit::new("welfare.trajectory_bounds");
    let mut monotone = Audit::new("welfare.garbling_trajectory_principal_monotone");
    let mut peak = Audit::new("welfare.restriction_trajectory_no_interior_peak");
    for (b, p) in battery.iter().zip(prepared) {
        let (g, r) = match build_trajectories(&b.scenario, &b.id, 21) {
            Ok(t) => t,
            Err(e) => {
                bounds.fail(&b.id, e);
                continue;
            }
        };
        for t in [&g, &r] {
            bounds.check(format!("{} {:?} W", b.id, t.kind), TRAJECTORY_SLACK - t.welfare_excess());
            bounds.check(format!("{} {:?} Π", b.id, t.kind), TRAJECTORY_SLACK - t.principal_shortfall());
        }
        if p.mlrp {
            monotone.check(&b.id, pairwise_min(g.points.iter().map(|q| q.pi)) + UTILITY_TOL);
        } else {
            monotone.skip();
        }
        if p.drc && p.concave {
            let v: Vec<f64> = r.points.iter().map(|q| q.v).collect();
            let interior_peak = v.windows(3).any(|w| w[1] > w[0] + UTILITY_TOL && w[1] > w[2] + UTILITY_TOL);
            peak.check(&b.id, if interior_peak { -1.0 } else { 0.0 });
        } else {
            peak.skip();
        }
    }
    out.extend([bounds.finish(), monotone.finish(), peak.finish()]);

    let mut a = Audit::new("welfare.revelation_grid_swap_symmetric");
    a.guard("grid", |a| {
        let lams = [0.01, 0.1, 0.35, 0.7, 1.0];
        let rows = grid_revelation_preference(1.0, 0.5, &lams, &lams)?;
        let n = lams.len();
        for (i, row) in rows.iter().enumerate() {
            let swapped = &rows[(i % n) * n + i / n];
            let at = format!("({},{})", row.lambda0, row.lambda1);
            a.check(&at, SWAP_TOL - (row.v_rev_minus_v_con - swapped.v_rev_minus_v_con).abs());
            if i / n == i % n {
                a.check(format!("{at} diagonal"), SWAP_TOL - row.v_rev_minus_v_con.abs());
            }
        }
        Ok(())
    });
    out.push(a.finish());
}

/// Runs every invariant over the battery.
pub fn run_verification() -> VerificationReport {
    let mut out = Vec::new();
    numerics_invariants(&mut out);
    distribution_invariants(&mut out);

    let battery = match battery() {
        Ok(b) => b,
        Err(e) => {
            let mut a = Audit::new("battery.scenarios_solve");
            a.fail("battery", e);
            out.push(a.finish());
            return VerificationReport {
                scenarios: vec![],
                invariants: out,
            };
        }
    };
    let mut solve = Audit::new("battery.scenarios_solve");
    let mut prepared = Vec::new();
    let mut solved = Vec::new();
    for b in &battery {
        match Prepared::new(b) {
            Ok(p) => {
                solve.check(&b.id, 0.0);
                prepared.push(p);
                solved.push(b.clone());
            }
            Err(e) => solve.fail(&b.id, e),
        }
    }
    out.push(solve.finish());

    contract_invariants(&prepared, &mut out);
    garbling_invariants(&prepared, &mut out);
    restriction_invariants(&prepared, &mut out);
    condition_invariants(&prepared, &mut out);
    welfare_invariants(&solved, &prepared, &mut out);

    VerificationReport {
        scenarios: battery.into_iter().map(|b| b.id).collect(),
        invariants: out,
    }
}
