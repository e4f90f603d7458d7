//! Randomized-response garbling of the environment signal.
//!
//! With probability `ε` the agent reports `X`, otherwise a Bernoulli(γ) draw.
//! The principal prices each posterior `G_y` separately.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{ConditionReport, DEFAULT_GRID};
use crate::contract::{
    is_corner, optimal_price, profit_curvature, profit_slope, revealed_prices, search_upper, sigma_curvature,
    two_price_equilibrium, Equilibrium, Regime, Scenario,
};
use crate::distributions::{make_garbled_pair, Channel, CostModel, GarbledPair};
use crate::error::{Error, Result};
use crate::numerics::{finite_difference, maximize_scalar, one_sided_difference, Bracket, Tolerance};

/// Step for finite differences in `ε`.
pub const EPS_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarblingPoint {
    pub eps: f64,
    pub p0: f64,
    pub p1: f64,
    pub pi_garb: f64,
    pub v_garb: f64,
    pub w_garb: f64,
    pub p0_prime: f64,
    pub p1_prime: f64,
    pub v_garb_prime_fd: f64,
}

/// `Δ(p_0, p_1) = (V_1(p_0) − V_1(p_1)) − (V_0(p_0) − V_0(p_1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta {
    pub value: f64,
}

struct GarbledSolution {
    pair: GarbledPair,
    p0: f64,
    p1: f64,
}

fn solve_pair(s: &Scenario, gamma: f64, eps: f64) -> Result<GarbledSolution> {
    let pair = make_garbled_pair(&s.f0, &s.f1, s.theta, gamma, eps)?;
    let p0 = optimal_price(&pair.g0, s.b, &s.solver)?.argmax;
    let p1 = optimal_price(&pair.g1, s.b, &s.solver)?.argmax;
    Ok(GarbledSolution { pair, p0, p1 })
}

fn equilibrium_of(s: &Scenario, eps: f64, sol: &GarbledSolution) -> Equilibrium {
    two_price_equilibrium(
        Regime::Garbled(eps),
        s.b,
        (sol.pair.prob_y0(), &sol.pair.g0, sol.p0),
        (sol.pair.prob_y1, &sol.pair.g1, sol.p1),
    )
}

pub fn solve_garbled(s: &Scenario, gamma: f64, eps: f64) -> Result<Equilibrium> {
    let sol = solve_pair(s, gamma, eps)?;
    Ok(equilibrium_of(s, eps, &sol))
}

/// Agent utility `V_garb(ε)`.
pub fn v_garb(s: &Scenario, gamma: f64, eps: f64) -> Result<f64> {
    solve_garbled(s, gamma, eps).map(|e| e.agent_utility)
}

/// Derivative in `ε` by central difference, switching to the one-sided
/// second-order stencil within one step of the ends of `[0, 1]`.
pub fn eps_derivative<F: Fn(f64) -> f64>(f: F, eps: f64, h: f64) -> f64 {
    if eps - h < 0.0 {
        one_sided_difference(f, eps, h)
    } else if eps + h > 1.0 {
        one_sided_difference(f, eps, -h)
    } else {
        finite_difference(f, eps, h)
    }
}

fn fd_of<F: Fn(f64) -> Result<f64>>(f: F, eps: f64) -> Result<f64> {
    let h = EPS_STEP;
    if eps - h < 0.0 || eps + h > 1.0 {
        let h = if eps - h < 0.0 { h } else { -h };
        let (a, b, c) = (f(eps)?, f(eps + h)?, f(eps + 2.0 * h)?);
        Ok((-3.0 * a + 4.0 * b - c) / (2.0 * h))
    } else {
        Ok((f(eps + h)? - f(eps - h)?) / (2.0 * h))
    }
}

/// `V_garb′(ε)` by finite difference with step [`EPS_STEP`].
pub fn v_garb_prime_fd(s: &Scenario, gamma: f64, eps: f64) -> Result<f64> {
    fd_of(|e| v_garb(s, gamma, e), eps)
}

/// `W_garb′(ε)` by finite difference with step [`EPS_STEP`].
pub fn w_garb_prime_fd(s: &Scenario, gamma: f64, eps: f64) -> Result<f64> {
    fd_of(|e| solve_garbled(s, gamma, e).map(|q| q.welfare), eps)
}

/// Analytic `(p_0′(ε), p_1′(ε))` from the implicit-function theorem on each
/// posterior FOC. At γ = θ = 1/2 this is
/// `p_0′ = (Π_0′(p_0) − Π_1′(p_0)) / (−2Π″_{Y=0}(p_0))` and symmetrically for `p_1`;
/// other (γ, θ) swap the 1/2 for the slope of the posterior weight.
pub fn price_derivatives(s: &Scenario, gamma: f64, eps: f64) -> Result<(f64, f64)> {
    let sol = solve_pair(s, gamma, eps)?;
    let ch = Channel::new(s.theta, gamma, eps)?;
    let d0 = posterior_price_slope(s, &sol.pair.g0, sol.p0, ch.dw00(), 0)?;
    let d1 = posterior_price_slope(s, &sol.pair.g1, sol.p1, ch.dw11(), 1)?;
    Ok((d0, d1))
}

/// `dw·(Π_y′(p) − Π_{1−y}′(p)) / (−Π″_{Y=y}(p))`, or 0 at a corner.
fn posterior_price_slope(s: &Scenario, g: &CostModel, p: f64, dw: f64, y: u8) -> Result<f64> {
    let hi = search_upper(g, s.b);
    if is_corner(|x| profit_slope(g, s.b, x).ok(), p, 0.0, hi) {
        return Ok(0.0);
    }
    let own = profit_slope(s.model(y), s.b, p)?;
    let other = profit_slope(s.model(1 - y), s.b, p)?;
    let numerator = dw * (own - other);
    if numerator == 0.0 {
        return Ok(0.0);
    }
    let curv = profit_curvature(g, s.b, p)?;
    if !(curv < 0.0) {
        return Err(Error::NonConcaveAtOptimum { at: p, value: curv });
    }
    Ok(numerator / (-curv))
}

pub fn sweep_garbling(s: &Scenario, gamma: f64, eps_grid: &[f64]) -> Result<Vec<GarblingPoint>> {
    if eps_grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::InvalidParameter("eps grid values must lie in [0,1]".into()));
    }
    if eps_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("eps grid must be sorted".into()));
    }
    eps_grid
        .par_iter()
        .map(|&eps| {
            let eq = solve_garbled(s, gamma, eps)?;
            let (p0_prime, p1_prime) = price_derivatives(s, gamma, eps).unwrap_or((f64::NAN, f64::NAN));
            Ok(GarblingPoint {
                eps,
                p0: eq.p0,
                p1: eq.p1,
                pi_garb: eq.principal_utility,
                v_garb: eq.agent_utility,
                w_garb: eq.welfare,
                p0_prime,
                p1_prime,
                v_garb_prime_fd: v_garb_prime_fd(s, gamma, eps)?,
            })
        })
        .collect()
}

/// Agent-optimal garbling level on a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentOptimum {
    /// Index of the best grid point.
    pub grid_index: usize,
    pub grid_eps: f64,
    /// Golden-section refinement between the neighbouring grid points.
    pub eps: f64,
    pub v: f64,
}

/// Grid argmax of `V_garb` followed by refinement on the surrounding cell.
pub fn agent_optimal_eps(s: &Scenario, gamma: f64, points: &[GarblingPoint]) -> Result<AgentOptimum> {
    let (i, best) = points
        .iter()
        .enumerate()
        .fold(None::<(usize, &GarblingPoint)>, |acc, (i, p)| match acc {
            Some((_, q)) if q.v_garb >= p.v_garb => acc,
            _ => Some((i, p)),
        })
        .ok_or_else(|| Error::InvalidParameter("empty sweep".into()))?;
    let lo = points[i.saturating_sub(1)].eps;
    let hi = points[(i + 1).min(points.len() - 1)].eps;
    let mut out = AgentOptimum {
        grid_index: i,
        grid_eps: best.eps,
        eps: best.eps,
        v: best.v_garb,
    };
    if hi > lo {
        let tol = Tolerance {
            abs_tol: 1e-9,
            ..Tolerance::default()
        };
        let refined = maximize_scalar(
            |e| v_garb(s, gamma, e).unwrap_or(f64::NAN),
            Bracket::new(lo, hi)?,
            5,
            tol,
        )?;
        if refined.max > out.v {
            out.eps = refined.argmax;
            out.v = refined.max;
        }
    }
    Ok(out)
}

pub fn agent_utility_dominance(s: &Scenario, p0: f64, p1: f64) -> Delta {
    let v = |m: &CostModel, p: f64| m.agent_partial_value(p);
    Delta {
        value: (v(&s.f1, p0) - v(&s.f1, p1)) - (v(&s.f0, p0) - v(&s.f0, p1)),
    }
}

fn half_half_note(s: &Scenario) -> (bool, &'static str) {
    if s.theta == 0.5 {
        (true, "evaluated at gamma=theta=1/2")
    } else {
        (false, "theta != 1/2: sufficiency not claimed")
    }
}

/// Zero-cost anchored check `(b − p_0*)/(2 − σ_0(p_0*)) < g_0(p_0*)`.
pub fn check_garbling_zerocost(s: &Scenario) -> Result<ConditionReport> {
    if !s.f1.is_zero_point_mass() {
        return Err(Error::WrongAnchoring);
    }
    let p0 = optimal_price(&s.f0, s.b, &s.solver)?.argmax;
    let lhs = (s.b - p0) / (2.0 - sigma_curvature(&s.f0, p0)?);
    let rhs = s.f0.restricted_mean(p0);
    let (half, half_note) = half_half_note(s);
    let bounded = s.f0.density_bounded();
    let smooth = s.f0.cdf_is_c1();
    Ok(ConditionReport::less("garbling_zerocost", lhs, rhs)
        .with_grid(DEFAULT_GRID)
        .with_preconditions(half && bounded && smooth)
        .note(half_note)
        .note(format!("f0 bounded: {bounded}; F0 C1: {smooth}; p0*={p0}"))
        .note("sufficient: holds => agent-optimal eps* < 1"))
}

/// General check
/// `−Π_1′(p_0*)(b − p_0*)/(2 − σ_0(p_0*)) − Π_0′(p_1*)(b − p_1*)/(2 − σ_1(p_1*)) < Δ(p_0*, p_1*)`.
///
/// A revealed price pinned at a corner does not move with ε, so its term is dropped;
/// for a zero-cost anchor this reduces to the zero-cost check. The notes carry an
/// independent finite-difference `V_garb′(1)` for auditing.
pub fn check_garbling_general(s: &Scenario) -> Result<ConditionReport> {
    let (p0, p1) = revealed_prices(s)?;
    let term = |x: u8, p: f64| -> Result<f64> {
        let own = s.model(x);
        let other = s.model(1 - x);
        if is_corner(|q| profit_slope(own, s.b, q).ok(), p, 0.0, search_upper(own, s.b)) {
            return Ok(0.0);
        }
        let cross = profit_slope(other, s.b, p)?;
        if cross == 0.0 {
            return Ok(0.0);
        }
        Ok(-cross * (s.b - p) / (2.0 - sigma_curvature(own, p)?))
    };
    let lhs = term(0, p0)? + term(1, p1)?;
    let rhs = agent_utility_dominance(s, p0, p1).value;
    let vprime = v_garb_prime_fd(s, 0.5, 1.0)?;
    let (half, half_note) = half_half_note(s);
    let smooth = s.f0.cdf_is_c1() && (s.f1.cdf_is_c1() || s.f1.is_zero_point_mass());
    Ok(ConditionReport::less("garbling_general", lhs, rhs)
        .with_preconditions(half && smooth)
        .note(half_note)
        .note(format!("p0*={p0} p1*={p1}; fd V_garb'(1)={vprime}"))
        .note("sufficient: holds => V_garb'(1) < 0 (some garbling preferred)"))
}

/// One cell of the `V_garb′(1)` grid over exponential means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarblingSlopeRecord {
    pub lambda0: f64,
    pub lambda1: f64,
    pub vgarb_prime_at_one: f64,
    pub prop5_margin: f64,
}

/// `V_garb′(1)` (one-sided, h = 1e-4) and the general-condition margin for each
/// `(λ_0, λ_1)`, row-major over `lambda0_grid` then `lambda1_grid`, γ = 1/2.
pub fn grid_vgarb_prime_at_one(
    b: f64,
    theta: f64,
    lambda0_grid: &[f64],
    lambda1_grid: &[f64],
) -> Result<Vec<GarblingSlopeRecord>> {
    let cells: Vec<(f64, f64)> = lambda0_grid
        .iter()
        .flat_map(|&l0| lambda1_grid.iter().map(move |&l1| (l0, l1)))
        .collect();
    cells
        .into_par_iter()
        .map(|(l0, l1)| {
            let s = Scenario::new(b, theta, CostModel::exponential(l0)?, CostModel::exponential(l1)?)?;
            Ok(GarblingSlopeRecord {
                lambda0: l0,
                lambda1: l1,
                vgarb_prime_at_one: v_garb_prime_fd(&s, 0.5, 1.0)?,
                prop5_margin: check_garbling_general(&s)?.margin,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::{solve_concealed, solve_revealed};
    use crate::numerics::linspace;
    use approx::assert_abs_diff_eq;

    fn exp(mean: f64) -> CostModel {
        CostModel::exponential(mean).unwrap()
    }

    fn two_exp() -> Scenario {
        Scenario::new(1.0, 0.5, exp(0.5), exp(0.01)).unwrap()
    }

    fn anchored(f0: CostModel) -> Scenario {
        Scenario::new(1.0, 0.5, f0, CostModel::point_mass(0.0).unwrap()).unwrap()
    }

    fn assert_same_utilities(a: &Equilibrium, b: &Equilibrium) {
        assert_abs_diff_eq!(a.principal_utility, b.principal_utility, epsilon = 1e-9);
        assert_abs_diff_eq!(a.agent_utility, b.agent_utility, epsilon = 1e-9);
        assert_abs_diff_eq!(a.welfare, b.welfare, epsilon = 1e-9);
    }

    #[test]
    fn endpoints_reproduce_concealed_and_revealed() {
        for s in [two_exp(), anchored(exp(0.3)), Scenario::new(1.0, 0.5, CostModel::uniform(0.5, 1.5).unwrap(), CostModel::uniform(0.0, 1.0).unwrap()).unwrap()] {
            assert_same_utilities(&solve_garbled(&s, 0.5, 1.0).unwrap(), &solve_revealed(&s).unwrap());
            let g0 = solve_garbled(&s, 0.5, 0.0).unwrap();
            let con = solve_concealed(&s).unwrap();
            assert_same_utilities(&g0, &con);
            assert_abs_diff_eq!(g0.p0, con.price(), epsilon = 1e-9);
            assert_abs_diff_eq!(g0.p1, con.price(), epsilon = 1e-9);
        }
        let s = Scenario::new(1.0, 0.3, exp(0.5), exp(0.1)).unwrap();
        assert_same_utilities(&solve_garbled(&s, 0.8, 1.0).unwrap(), &solve_revealed(&s).unwrap());
        assert_same_utilities(&solve_garbled(&s, 0.3, 0.0).unwrap(), &solve_concealed(&s).unwrap());
    }

    #[test]
    fn two_exponential_some_garbling_beats_concealment() {
        let s = two_exp();
        let pts = sweep_garbling(&s, 0.5, &linspace(0.0, 1.0, 201)).unwrap();
        let con = solve_concealed(&s).unwrap().agent_utility;
        let opt = agent_optimal_eps(&s, 0.5, &pts).unwrap();
        assert!(opt.v > con);
        // scipy oracle on the same grid
        assert_abs_diff_eq!(opt.grid_eps, 0.73, epsilon = 1e-12);
        assert_abs_diff_eq!(pts[opt.grid_index].v_garb, 0.0811436, epsilon = 1e-7);
        assert!(opt.v >= pts[opt.grid_index].v_garb);
    }

    #[test]
    fn two_exponential_sweep_is_monotone() {
        let pts = sweep_garbling(&two_exp(), 0.5, &linspace(0.0, 1.0, 101)).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].pi_garb >= w[0].pi_garb - 1e-9);
            assert!(w[1].p0 >= w[0].p0 - 1e-9);
            assert!(w[1].p1 <= w[0].p1 + 1e-9);
        }
        for p in &pts {
            assert!((p.w_garb - p.pi_garb - p.v_garb).abs() <= 1e-10);
        }
    }

    #[test]
    fn endpoint_grid() {
        let s = two_exp();
        let pts = sweep_garbling(&s, 0.5, &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(pts[0].v_garb, solve_concealed(&s).unwrap().agent_utility, epsilon = 1e-9);
        assert_abs_diff_eq!(pts[1].v_garb, solve_revealed(&s).unwrap().agent_utility, epsilon = 1e-9);
        assert!(sweep_garbling(&s, 0.5, &[0.5, 0.2]).is_err());
    }

    #[test]
    fn price_derivative_examples() {
        let same = Scenario::new(1.0, 0.5, exp(0.3), exp(0.3)).unwrap();
        assert_eq!(price_derivatives(&same, 0.5, 0.4).unwrap(), (0.0, 0.0));
        let (d0, d1) = price_derivatives(&two_exp(), 0.5, 0.5).unwrap();
        assert!(d0 > 0.0 && d1 < 0.0);
    }

    #[test]
    fn price_derivatives_match_fd() {
        let s = two_exp();
        for &eps in &[0.25, 0.5, 0.75, 1.0] {
            let (d0, d1) = price_derivatives(&s, 0.5, eps).unwrap();
            let f0 = eps_derivative(|e| solve_garbled(&s, 0.5, e).unwrap().p0, eps, EPS_STEP);
            let f1 = eps_derivative(|e| solve_garbled(&s, 0.5, e).unwrap().p1, eps, EPS_STEP);
            assert!((d0 - f0).abs() <= 1e-4 * d0.abs(), "eps={eps}: {d0} vs {f0}");
            assert!((d1 - f1).abs() <= 1e-4 * d1.abs(), "eps={eps}: {d1} vs {f1}");
        }
    }

    #[test]
    fn general_gamma_theta_derivatives_match_fd() {
        let s = Scenario::new(1.0, 0.3, exp(0.6), exp(0.1)).unwrap();
        for &eps in &[0.3, 0.8] {
            let (d0, d1) = price_derivatives(&s, 0.7, eps).unwrap();
            let f0 = eps_derivative(|e| solve_garbled(&s, 0.7, e).unwrap().p0, eps, EPS_STEP);
            let f1 = eps_derivative(|e| solve_garbled(&s, 0.7, e).unwrap().p1, eps, EPS_STEP);
            assert!((d0 - f0).abs() <= 1e-4 * d0.abs());
            assert!((d1 - f1).abs() <= 1e-4 * d1.abs());
        }
    }

    #[test]
    fn dominance_examples() {
        let s = two_exp();
        assert_eq!(agent_utility_dominance(&s, 0.3, 0.3).value, 0.0);
        let (p0, p1) = revealed_prices(&s).unwrap();
        assert!(agent_utility_dominance(&s, p0, p1).value > 0.0);
        let a = anchored(exp(0.4));
        let d = agent_utility_dominance(&a, 0.6, 0.1).value;
        let v0 = |p: f64| a.f0.agent_partial_value(p);
        assert_abs_diff_eq!(d, 0.5 - (v0(0.6) - v0(0.1)), epsilon = 1e-15);
        assert!(d >= 0.0);
    }

    #[test]
    fn zerocost_examples() {
        for &lam in &[0.1, 0.5, 1.0] {
            let r = check_garbling_zerocost(&anchored(exp(lam))).unwrap();
            assert!(r.holds, "lambda={lam}");
            let p0 = optimal_price(&exp(lam), 1.0, &Default::default()).unwrap().argmax;
            let f = exp(lam).cdf(p0);
            assert_abs_diff_eq!(r.lhs, lam * f / (2.0 - f), epsilon = 1e-9);
            assert_abs_diff_eq!(r.rhs, lam * f, epsilon = 1e-12);
        }
        let r = check_garbling_zerocost(&anchored(exp(0.5))).unwrap();
        assert_abs_diff_eq!(r.lhs, 0.18827, epsilon = 1e-5);
        assert_abs_diff_eq!(r.rhs, 0.27354, epsilon = 1e-5);
        assert!(check_garbling_zerocost(&anchored(CostModel::weibull(0.5, 2.0).unwrap())).unwrap().holds);
        let w = check_garbling_zerocost(&anchored(CostModel::weibull(0.5, 0.4).unwrap())).unwrap();
        assert!(!w.holds && !w.preconditions_hold);
        assert!(matches!(check_garbling_zerocost(&two_exp()), Err(Error::WrongAnchoring)));
    }

    #[test]
    fn general_examples() {
        let same = Scenario::new(1.0, 0.5, exp(0.3), exp(0.3)).unwrap();
        let r = check_garbling_general(&same).unwrap();
        assert!(!r.holds);
        assert_eq!(r.rhs, 0.0);
        assert!(v_garb_prime_fd(&same, 0.5, 1.0).unwrap().abs() < 1e-9);
        assert!(v_garb_prime_fd(&two_exp(), 0.5, 1.0).unwrap() < 0.0);
        for &lam in &[0.1, 0.5, 2.0] {
            let s = anchored(exp(lam));
            let z = check_garbling_zerocost(&s).unwrap();
            let g = check_garbling_general(&s).unwrap();
            assert_eq!(z.holds, g.holds);
            assert_abs_diff_eq!(z.margin, g.margin, epsilon = 1e-9);
        }
    }

    #[test]
    fn vgarb_prime_grid_examples() {
        let rows = grid_vgarb_prime_at_one(1.0, 0.5, &[0.5, 0.9, 0.3], &[0.3, 0.01, 0.8]).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!((rows[1].lambda0, rows[1].lambda1), (0.5, 0.01));
        assert!(rows[1].vgarb_prime_at_one < 0.0);
        assert!(rows[6].vgarb_prime_at_one.abs() <= 1e-6);
        // (0.9, 0.8): 40-digit FOC oracle, 3-point FD with h = 1e-4: +1.1854367e-5
        assert!(rows[5].vgarb_prime_at_one > 0.0, "{:?}", rows[5]);
        assert!((rows[5].vgarb_prime_at_one - 1.1854367e-5).abs() <= 1e-9, "{:?}", rows[5]);
    }

    #[test]
    fn anchored_agent_optimum_locations() {
        // scipy oracle on a 201-point grid
        for &(lam, want) in &[(0.1, 0.0), (1.0, 0.70), (5.0, 0.89)] {
            let s = anchored(exp(lam));
            let pts = sweep_garbling(&s, 0.5, &linspace(0.0, 1.0, 201)).unwrap();
            let opt = agent_optimal_eps(&s, 0.5, &pts).unwrap();
            assert_abs_diff_eq!(opt.grid_eps, want, epsilon = 1e-12);
            assert!(pts[199].v_garb > pts[200].v_garb);
        }
    }
}
