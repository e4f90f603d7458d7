//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero on any failure.

use std::process::ExitCode;

use contract_lab::conditions::{check_concavity, check_prop1, psi, DEFAULT_GRID};
use contract_lab::contract::{revealed_prices, sigma_curvature, solve_concealed, solve_revealed, Scenario};
use contract_lab::distributions::{make_mixture, CostModel};
use contract_lab::garbling::{
    check_garbling_zerocost, eps_derivative, grid_vgarb_prime_at_one, price_derivatives, solve_garbled,
    sweep_garbling, EPS_STEP,
};
use contract_lab::numerics::{finite_difference, linspace, one_sided_difference};
use contract_lab::restriction::{
    binding_range, check_drc, check_quasiconvexity, solve_restricted, sweep_restriction, v_const_derivative,
};
use contract_lab::verify::{battery, run_verification, weyl_points};

const PRICE_TOL: f64 = 1e-6;
const UTILITY_TOL: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-8;
const MONOTONE_SLACK: f64 = 1e-9;
const RESTRICTION_MAX_TOL: f64 = 1e-6;
const DIAGONAL_SLOPE_TOL: f64 = 1e-5;
const VALUE_DERIVATIVE_TOL: f64 = 1e-5;
const PRICE_DERIVATIVE_RTOL: f64 = 1e-4;
const V_CONST_DERIVATIVE_RTOL: f64 = 1e-3;
const QUASICONVEX_SWEEP_N: usize = 101;
const SWEEP_N: usize = 201;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{name} = {got}, expected {want} ± {tol}"))
}

fn exp(mean: f64) -> Result<CostModel, String> {
    CostModel::exponential(mean).map_err(|e| e.to_string())
}

fn scenario(f0: CostModel, f1: CostModel) -> Result<Scenario, String> {
    Scenario::new(1.0, 0.5, f0, f1).map_err(|e| e.to_string())
}

macro_rules! tryq {
    ($e:expr) => {
        $e.map_err(|e| e.to_string())?
    };
}

fn uniform_counterexample() -> Outcome {
    let s = scenario(tryq!(CostModel::uniform(0.5, 1.5)), tryq!(CostModel::uniform(0.0, 1.0)))?;
    let con = tryq!(solve_concealed(&s));
    let rev = tryq!(solve_revealed(&s));
    close("p1*", rev.p1, 0.5, PRICE_TOL)?;
    close("p0*", rev.p0, 0.75, PRICE_TOL)?;
    close("p*", con.price(), 0.625, PRICE_TOL)?;
    close("q_con", con.quantity, 0.375, PRICE_TOL)?;
    close("q_rev", rev.quantity, 0.375, PRICE_TOL)?;
    close("W_rev", rev.welfare, 0.234375, UTILITY_TOL)?;
    close("W_con", con.welfare, 0.2421875, UTILITY_TOL)?;
    ensure(rev.welfare < con.welfare, || "W_rev is not below W_con".into())?;
    Ok(format!("W_rev={:.9} < W_con={:.9}", rev.welfare, con.welfare))
}

fn anchored(lam: f64) -> Result<Scenario, String> {
    scenario(exp(lam)?, tryq!(CostModel::point_mass(0.0)))
}

fn exponential_threshold() -> Outcome {
    close("psi(1/2)", psi(0.5), 1.0 / 3.0, 1e-12)?;
    let mut worst = f64::INFINITY;
    for lam in [0.05, 0.1, 0.2, 0.3] {
        let s = anchored(lam)?;
        let r = tryq!(check_prop1(&s));
        ensure(r.verdict(), || format!("λ0={lam}: checker does not hold ({r:?})"))?;
        let gap = tryq!(solve_concealed(&s)).agent_utility - tryq!(solve_revealed(&s)).agent_utility;
        ensure(gap > UTILITY_TOL, || format!("λ0={lam}: V_con − V_rev = {gap}"))?;
        worst = worst.min(gap);
    }
    for lam in [0.8, 1.0] {
        let r = tryq!(check_prop1(&anchored(lam)?));
        ensure(!r.holds, || format!("λ0={lam}: checker holds but should fail"))?;
    }
    Ok(format!("holds for λ0 ≤ 0.3 (min V_con − V_rev = {worst:.3e}), fails for 0.8 and 1.0"))
}

fn anchored_garbling_universal() -> Outcome {
    let grid = linspace(0.0, 1.0, SWEEP_N);
    let step = grid[1] - grid[0];
    let mut latest = 0.0f64;
    for lam in [0.05, 0.1, 0.5, 1.0, 5.0] {
        let s = anchored(lam)?;
        let r = tryq!(check_garbling_zerocost(&s));
        ensure(r.verdict(), || format!("λ0={lam}: zero-cost garbling check fails ({r:?})"))?;
        let f0 = &s.f0;
        let (p0, _) = tryq!(revealed_prices(&s));
        for p in [p0, 0.1, 0.5, 0.9] {
            let lhs = 2.0 - tryq!(sigma_curvature(f0, p));
            let rhs = 1.0 + (p / lam).exp();
            ensure((lhs - rhs).abs() <= IDENTITY_TOL * rhs.max(1.0), || {
                format!("λ0={lam} p={p}: 2−σ0 = {lhs}, 1+e^(p/λ0) = {rhs}")
            })?;
        }
        let sweep = tryq!(sweep_garbling(&s, 0.5, &grid));
        let best = sweep.iter().fold(&sweep[0], |b, g| if g.v_garb > b.v_garb { g } else { b });
        ensure(best.eps <= 1.0 - step + 1e-12, || format!("λ0={lam}: argmax ε* = {}", best.eps))?;
        latest = latest.max(best.eps);
    }
    Ok(format!("check holds, identity within 1e-8, ε* ≤ {latest:.3} < 1"))
}

fn two_exp() -> Result<Scenario, String> {
    scenario(exp(0.5)?, exp(0.01)?)
}

fn two_exponential_trajectories() -> Outcome {
    let s = two_exp()?;
    let con = tryq!(solve_concealed(&s));
    let rev = tryq!(solve_revealed(&s));
    ensure(rev.agent_utility < con.agent_utility, || "V_rev ≥ V_con".into())?;

    let garb = tryq!(sweep_garbling(&s, 0.5, &linspace(0.0, 1.0, SWEEP_N)));
    let v_max = garb.iter().map(|g| g.v_garb).fold(f64::NEG_INFINITY, f64::max);
    ensure(v_max > con.agent_utility, || format!("max V_garb {v_max} ≤ V_con"))?;
    for w in garb.windows(2) {
        let at = w[1].eps;
        ensure(w[1].pi_garb >= w[0].pi_garb - MONOTONE_SLACK, || format!("Π_garb falls at ε={at}"))?;
        ensure(w[1].p0 >= w[0].p0 - MONOTONE_SLACK, || format!("p0 falls at ε={at}"))?;
        ensure(w[1].p1 <= w[0].p1 + MONOTONE_SLACK, || format!("p1 rises at ε={at}"))?;
    }

    let restr = tryq!(sweep_restriction(&s, SWEEP_N));
    let r_max = restr.iter().map(|r| r.v_const).fold(f64::NEG_INFINITY, f64::max);
    let ends = con.agent_utility.max(rev.agent_utility);
    close("max V_const", r_max, ends, RESTRICTION_MAX_TOL)?;
    Ok(format!(
        "V_garb gain {:.3e}, max V_const − max(V_con,V_rev) = {:.1e}",
        v_max - con.agent_utility,
        r_max - ends
    ))
}

fn garbling_slope_signs() -> Outcome {
    let grid = linspace(0.01, 1.0, 20);
    let rows = tryq!(grid_vgarb_prime_at_one(1.0, 0.5, &grid, &grid));
    let mut low = 0;
    let mut worst_diag = 0.0f64;
    for row in &rows {
        if row.lambda0 == row.lambda1 {
            worst_diag = worst_diag.max(row.vgarb_prime_at_one.abs());
            ensure(row.vgarb_prime_at_one.abs() <= DIAGONAL_SLOPE_TOL, || format!("diagonal {row:?}"))?;
        } else if row.lambda0.min(row.lambda1) <= 0.05 {
            low += 1;
            ensure(row.vgarb_prime_at_one < 0.0, || format!("low-cost cell not negative: {row:?}"))?;
        }
    }
    Ok(format!("{low} low-cost cells negative, max |diagonal| = {worst_diag:.1e}"))
}

fn derivative_battery() -> Outcome {
    let families = [tryq!(CostModel::exponential(0.5)),
        tryq!(CostModel::weibull(0.5, 0.4)),
        tryq!(CostModel::weibull(0.5, 2.0)),
        tryq!(CostModel::uniform(0.5, 1.5)),
        tryq!(make_mixture(vec![(0.3, exp(0.8)?), (0.7, exp(0.1)?)]))];
    let draws = weyl_points(0.0, 1.0, 100, 11);
    let mut worst_v = 0.0f64;
    for (i, u) in draws.iter().enumerate() {
        let m = &families[i % families.len()];
        let (lo, _) = m.support();
        let p = lo.max(0.05) + u * (m.quantile(0.999) - lo.max(0.05));
        if m.breakpoints().iter().any(|k| (p - k).abs() < 1e-3) {
            continue;
        }
        let err = (finite_difference(|x| m.agent_partial_value(x), p, 1e-4) - m.cdf(p)).abs();
        ensure(err <= VALUE_DERIVATIVE_TOL, || format!("V′ ≠ F at p={p} (draw {i}): {err}"))?;
        worst_v = worst_v.max(err);
    }

    let s = two_exp()?;
    let mut worst_p = 0.0f64;
    for eps in [0.25, 0.5, 0.75, 1.0] {
        let (d0, d1) = tryq!(price_derivatives(&s, 0.5, eps));
        let price = |e: f64, y: u8| solve_garbled(&s, 0.5, e).map_or(f64::NAN, |q| if y == 0 { q.p0 } else { q.p1 });
        for (y, d) in [(0u8, d0), (1, d1)] {
            let fd = eps_derivative(|e| price(e, y), eps, EPS_STEP);
            let rel = (d - fd).abs() / d.abs();
            ensure(rel <= PRICE_DERIVATIVE_RTOL, || format!("p{y}′(ε={eps}): {d} vs fd {fd}"))?;
            worst_p = worst_p.max(rel);
        }
    }

    let r_top = tryq!(binding_range(&s));
    let v = |r: f64| solve_restricted(&s, r).map_or(f64::NAN, |q| q.v_const);
    let h = 1e-6;
    let mut worst_r = 0.0f64;
    for r in linspace(0.0, r_top, 21) {
        let fd = if r < 2.0 * h {
            one_sided_difference(v, r, h)
        } else if r > r_top - 2.0 * h {
            one_sided_difference(v, r, -h)
        } else {
            finite_difference(v, r, h)
        };
        let an = tryq!(v_const_derivative(&s, r));
        let scale = an.abs().max(fd.abs());
        ensure((an - fd).abs() <= V_CONST_DERIVATIVE_RTOL * scale + 1e-9, || format!("V_const′({r}): {an} vs {fd}"))?;
        if scale > 0.0 {
            worst_r = worst_r.max((an - fd).abs() / scale);
        }
    }
    Ok(format!(
        "max |V′−F| {worst_v:.1e}, price rel err {worst_p:.1e}, V_const′ rel err {worst_r:.1e}"
    ))
}

fn lemma_audits() -> Outcome {
    let report = run_verification();
    ensure(report.scenarios.len() >= 8, || format!("only {} scenarios", report.scenarios.len()))?;
    ensure(report.invariants.len() >= 25, || format!("only {} invariants", report.invariants.len()))?;
    if let Some(f) = report.failures().next() {
        return Err(format!("{} failed: {}", f.name, f.detail));
    }
    Ok(format!(
        "{} invariants over {} scenarios all pass",
        report.invariants.len(),
        report.scenarios.len()
    ))
}

fn quasiconvexity() -> Outcome {
    let mut checked = Vec::new();
    for b in tryq!(battery()) {
        let s = &b.scenario;
        let concave = check_concavity(&s.f0, s.b, DEFAULT_GRID).holds && check_concavity(&s.f1, s.b, DEFAULT_GRID).holds;
        if !(concave && check_drc(s, None).verdict()) {
            continue;
        }
        let pts = tryq!(sweep_restriction(s, QUASICONVEX_SWEEP_N));
        let r = check_quasiconvexity(&pts);
        ensure(r.holds, || format!("{}: interior peak ({r:?})", b.id))?;
        checked.push(b.id);
    }
    ensure(!checked.is_empty(), || "no battery scenario passes DRC and concavity".into())?;
    Ok(format!("no interior peak on {} scenarios: {}", checked.len(), checked.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("uniform counterexample", uniform_counterexample),
        ("anchored exponential concealment threshold", exponential_threshold),
        ("anchored exponential garbling", anchored_garbling_universal),
        ("two-exponential trajectories", two_exponential_trajectories),
        ("garbling slope signs on the λ grid", garbling_slope_signs),
        ("derivative identities", derivative_battery),
        ("lemma audits over the battery", lemma_audits),
        ("restriction quasi-convexity", quasiconvexity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {} ({name}): {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
