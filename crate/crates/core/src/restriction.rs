//! Restricted price discrimination: a cap `r` on the price gap `p_0 − p_1`.
//!
//! Over the binding range `r ∈ [0, p_0* − p_1*]` the constraint holds with
//! equality, so the principal solves `max_{p_1} (1−θ)Π_0(p_1 + r) + θΠ_1(p_1)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{default_grid, min_step, ConditionReport, DEFAULT_GRID, STRICTNESS};
use crate::contract::{
    agent_utility, alpha_curvature, is_corner, maximize_price, principal_utility, profit_curvature, profit_slope,
    revealed_prices, sigma_curvature, Scenario,
};
use crate::error::{Error, Result};
use crate::numerics::linspace;

/// Tolerance of the no-interior-peak test.
pub const QUASICONVEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictionPoint {
    pub r: f64,
    pub p0: f64,
    pub p1: f64,
    pub pi_const: f64,
    pub v_const: f64,
    pub w_const: f64,
    pub v_const_prime: f64,
}

/// Upper end of the binding range, `max(p_0* − p_1*, 0)`.
pub fn binding_range(s: &Scenario) -> Result<f64> {
    let (p0, p1) = revealed_prices(s)?;
    Ok((p0 - p1).max(0.0))
}

fn checked_r(r: f64, r_max: f64) -> Result<f64> {
    let slack = 1e-12 * r_max.max(1.0);
    if !(r >= -slack && r <= r_max + slack) {
        return Err(Error::RangeError { r, max: r_max });
    }
    Ok(r.clamp(0.0, r_max))
}

fn joint_objective(s: &Scenario, r: f64, p1: f64) -> f64 {
    (1.0 - s.theta) * principal_utility(&s.f0, s.b, p1 + r) + s.theta * principal_utility(&s.f1, s.b, p1)
}

fn joint_slope(s: &Scenario, r: f64, p1: f64) -> Option<f64> {
    let d0 = profit_slope(&s.f0, s.b, p1 + r).ok()?;
    let d1 = profit_slope(&s.f1, s.b, p1).ok()?;
    Some((1.0 - s.theta) * d0 + s.theta * d1)
}

/// Constrained prices `(p_0(r), p_1(r))` for `r` already inside the range.
fn restricted_prices(s: &Scenario, r: f64) -> Result<(f64, f64)> {
    let best = maximize_price(
        |p1| joint_objective(s, r, p1),
        |p1| joint_slope(s, r, p1),
        0.0,
        s.b,
        &s.solver,
    )?;
    Ok((best.argmax + r, best.argmax))
}

fn point_at(s: &Scenario, r: f64, p0: f64, p1: f64) -> RestrictionPoint {
    let th = s.theta;
    let pi = (1.0 - th) * principal_utility(&s.f0, s.b, p0) + th * principal_utility(&s.f1, s.b, p1);
    let v = (1.0 - th) * agent_utility(&s.f0, p0) + th * agent_utility(&s.f1, p1);
    RestrictionPoint {
        r,
        p0,
        p1,
        pi_const: pi,
        v_const: v,
        w_const: pi + v,
        v_const_prime: derivative_at(s, r, p0, p1).unwrap_or(f64::NAN),
    }
}

pub fn solve_restricted(s: &Scenario, r: f64) -> Result<RestrictionPoint> {
    let r = checked_r(r, binding_range(s)?)?;
    let (p0, p1) = restricted_prices(s, r)?;
    Ok(point_at(s, r, p0, p1))
}

/// `V_const′(r)` from the implicit-function form of the constrained FOC:
/// `θ(1−θ)(F_0Π_1″ − F_1Π_0″)/D` with `D = (1−θ)Π_0″ + θΠ_1″ < 0`.
/// At θ = 1/2 this is a positive multiple of `θw_1 − (1−θ)w_0`, `w_x = F_x/Π_x″`.
pub fn v_const_derivative(s: &Scenario, r: f64) -> Result<f64> {
    let r = checked_r(r, binding_range(s)?)?;
    let (p0, p1) = restricted_prices(s, r)?;
    derivative_at(s, r, p0, p1)
}

fn derivative_at(s: &Scenario, r: f64, p0: f64, p1: f64) -> Result<f64> {
    let th = s.theta;
    let (q0, q1) = (s.f0.cdf(p0), s.f1.cdf(p1));
    // A cornered p_1 stays put, so only p_0 = p_1 + r moves.
    if is_corner(|x| joint_slope(s, r, x), p1, 0.0, s.b) {
        return Ok(if p1 <= 0.0 { (1.0 - th) * q0 } else { 0.0 });
    }
    let c0 = profit_curvature(&s.f0, s.b, p0)?;
    let c1 = profit_curvature(&s.f1, s.b, p1)?;
    let d = (1.0 - th) * c0 + th * c1;
    if !(d < 0.0) {
        return Err(Error::NonConcaveAtOptimum { at: p1, value: d });
    }
    Ok(th * (1.0 - th) * (q0 * c1 - q1 * c0) / d)
}

pub fn sweep_restriction(s: &Scenario, n: usize) -> Result<Vec<RestrictionPoint>> {
    if n < 2 {
        return Err(Error::InvalidParameter("restriction sweep needs n >= 2".into()));
    }
    let r_max = binding_range(s)?;
    linspace(0.0, r_max, n)
        .into_par_iter()
        .map(|r| {
            let (p0, p1) = restricted_prices(s, r)?;
            Ok(point_at(s, r, p0, p1))
        })
        .collect()
}

/// No interior strict local maximum of `v_const` along a sorted sweep.
pub fn check_quasiconvexity(points: &[RestrictionPoint]) -> ConditionReport {
    if points.len() < 5 {
        return ConditionReport::not_applicable("quasiconvexity", "need at least 5 sweep points");
    }
    let v: Vec<f64> = points.iter().map(|p| p.v_const).collect();
    let peak = v
        .windows(3)
        .map(|w| (w[1] - w[0]).min(w[1] - w[2]))
        .fold(f64::NEG_INFINITY, f64::max);
    ConditionReport::less("quasiconvexity", peak, QUASICONVEX_TOL)
        .with_grid(points.len())
        .note("largest interior peak height of V_const must not exceed 1e-9")
}

/// Decreasing-ratio condition: `w_x(p) = F_x(p)/Π_x″(p)` decreasing on the grid for both x.
///
/// Without a grid each `x` uses its default grid. The notes carry the sufficient
/// condition "σ ≤ 1 and α non-decreasing and positive".
pub fn check_drc(s: &Scenario, p_grid: Option<&[f64]>) -> ConditionReport {
    let mut worst = f64::INFINITY;
    let mut notes = Vec::new();
    let mut grid_used = 0;
    let mut sufficient = true;
    for x in 0..2u8 {
        let m = s.model(x);
        let grid = match p_grid {
            Some(g) => g.to_vec(),
            None => default_grid(m, s.b, DEFAULT_GRID),
        };
        grid_used = grid_used.max(grid.len());
        let mut w = Vec::with_capacity(grid.len());
        for &p in &grid {
            match profit_curvature(m, s.b, p) {
                Ok(c) if c < 0.0 => w.push(m.cdf(p) / c),
                Ok(c) => {
                    return ConditionReport::greater("drc", f64::NAN, STRICTNESS)
                        .with_grid(grid.len())
                        .with_preconditions(false)
                        .note(format!("ConcavityFailure: Pi_{x}''({p}) = {c} >= 0"));
                }
                Err(e) => {
                    return ConditionReport::not_applicable("drc", &format!("Pi_{x}'' undefined at {p}: {e}"))
                        .note("ConcavityFailure");
                }
            }
        }
        worst = worst.min(min_step(&w, -1.0));

        let sigma_ok = grid.iter().all(|&p| sigma_curvature(m, p).is_ok_and(|v| v <= 1.0));
        let alpha: Vec<f64> = grid.iter().map(|&p| alpha_curvature(m, p).unwrap_or(f64::NAN)).collect();
        let alpha_ok = alpha.iter().all(|&a| a > 0.0) && min_step(&alpha, 1.0) >= -STRICTNESS;
        sufficient &= sigma_ok && alpha_ok;
        notes.push(format!("x={x}: sigma<=1 {sigma_ok}, alpha nondecreasing&positive {alpha_ok}"));
    }
    let mut report = ConditionReport::greater("drc", worst, STRICTNESS).with_grid(grid_used);
    for n in notes {
        report = report.note(n);
    }
    report.note(format!("sufficient condition holds: {sufficient}"))
}
