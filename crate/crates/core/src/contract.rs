//! Concealed and revealed equilibria, utilities and the curvature primitives.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::{make_mixture, CostModel};
use crate::error::{Error, Result};
use crate::numerics::{maximize_with_slope, Bracket, Maximum, Tolerance};

/// Optimizer settings carried by a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: Tolerance,
    pub grid_n: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: Tolerance::default(),
            grid_n: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub b: f64,
    pub theta: f64,
    pub f0: CostModel,
    pub f1: CostModel,
    pub solver: SolverSettings,
}

impl Scenario {
    pub fn new(b: f64, theta: f64, f0: CostModel, f1: CostModel) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("b must be positive, got {b}")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!("theta must lie in (0,1), got {theta}")));
        }
        if f0.support().0 < 0.0 || f1.support().0 < 0.0 {
            return Err(Error::InvalidParameter("cost support must lie in [0, inf)".into()));
        }
        Ok(Self {
            b,
            theta,
            f0,
            f1,
            solver: SolverSettings::default(),
        })
    }

    pub fn with_solver(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    /// `F = (1−θ)F_0 + θF_1`.
    pub fn marginal(&self) -> CostModel {
        if self.f0 == self.f1 {
            return self.f0.clone();
        }
        make_mixture(vec![(1.0 - self.theta, self.f0.clone()), (self.theta, self.f1.clone())])
            .expect("theta validated in (0,1)")
    }

    pub fn model(&self, x: u8) -> &CostModel {
        if x == 0 {
            &self.f0
        } else {
            &self.f1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Concealed,
    Revealed,
    Garbled(f64),
    Restricted(f64),
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Concealed => "concealed",
            Regime::Revealed => "revealed",
            Regime::Garbled(_) => "garbled",
            Regime::Restricted(_) => "restricted",
        }
    }

    pub fn param(&self) -> Option<f64> {
        match *self {
            Regime::Garbled(e) => Some(e),
            Regime::Restricted(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param() {
            Some(v) => write!(f, "{}({v})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

/// Concealed equilibria carry one price (stored in both slots); the other
/// regimes price each signal value separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "EquilibriumRecord")]
pub struct Equilibrium {
    pub regime: Regime,
    pub p0: f64,
    pub p1: f64,
    pub principal_utility: f64,
    pub agent_utility: f64,
    pub welfare: f64,
    pub quantity: f64,
}

impl Equilibrium {
    /// The single concealed price (or `p0` for two-price regimes).
    pub fn price(&self) -> f64 {
        self.p0
    }

    pub fn record(&self) -> EquilibriumRecord {
        EquilibriumRecord::from(self.clone())
    }
}

/// Flat row form of an [`Equilibrium`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRecord {
    pub regime: String,
    pub regime_param: Option<f64>,
    pub p0: f64,
    pub p1: f64,
    pub principal_utility: f64,
    pub agent_utility: f64,
    pub welfare: f64,
    pub quantity: f64,
}

impl From<Equilibrium> for EquilibriumRecord {
    fn from(e: Equilibrium) -> Self {
        Self {
            regime: e.regime.name().to_string(),
            regime_param: e.regime.param(),
            p0: e.p0,
            p1: e.p1,
            principal_utility: e.principal_utility,
            agent_utility: e.agent_utility,
            welfare: e.welfare,
            quantity: e.quantity,
        }
    }
}

/// `Π(p) = F(p)(b − p)`.
pub fn principal_utility(m: &CostModel, b: f64, p: f64) -> f64 {
    let q = m.cdf(p);
    if q == 0.0 {
        0.0
    } else {
        q * (b - p)
    }
}

/// `V(p) = E[(p − C)⁺]`.
pub fn agent_utility(m: &CostModel, p: f64) -> f64 {
    m.agent_partial_value(p)
}

/// `Π′(p) = f(p)(b − p) − F(p)`.
pub fn profit_slope(m: &CostModel, b: f64, p: f64) -> Result<f64> {
    let f = m.pdf(p)?;
    let slope = if f == 0.0 { 0.0 } else { f * (b - p) } - m.cdf(p);
    Ok(slope)
}

/// `Π″(p) = f′(p)(b − p) − 2f(p)`.
pub fn profit_curvature(m: &CostModel, b: f64, p: f64) -> Result<f64> {
    let d = m.pdf_derivative(p)?;
    let curvature = if d == 0.0 { 0.0 } else { d * (b - p) } - 2.0 * m.pdf(p)?;
    Ok(curvature)
}

/// Upper end of the price search interval, `min(b, support_hi)`.
pub fn search_upper(m: &CostModel, b: f64) -> f64 {
    b.min(m.support().1)
}

/// Maximizes `F(p)(b − p)` over `[0, min(b, support_hi)]`.
pub fn optimal_price(m: &CostModel, b: f64, solver: &SolverSettings) -> Result<Maximum> {
    let hi = search_upper(m, b);
    maximize_price(
        |p| principal_utility(m, b, p),
        |p| profit_slope(m, b, p).ok(),
        0.0,
        hi,
        solver,
    )
}

/// Price maximization over `[lo, hi]`; a degenerate interval is evaluated at `lo`.
pub fn maximize_price<F, D>(f: F, slope: D, lo: f64, hi: f64, solver: &SolverSettings) -> Result<Maximum>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> Option<f64>,
{
    if !(hi > lo) {
        let v = f(lo);
        if !v.is_finite() {
            return Err(Error::InvalidObjective { x: lo });
        }
        return Ok(Maximum { argmax: lo, max: v });
    }
    let finite_slope = |x: f64| slope(x).filter(|s| s.is_finite());
    maximize_with_slope(f, finite_slope, Bracket::new(lo, hi)?, solver.grid_n, solver.tol)
}

/// Whether `p` sits at an end of `[lo, hi]` with the objective pushing outward,
/// so it does not move under small perturbations of an interior FOC.
pub fn is_corner<D: Fn(f64) -> Option<f64>>(slope: D, p: f64, lo: f64, hi: f64) -> bool {
    const EDGE: f64 = 1e-12;
    const PROBE: f64 = 1e-9;
    if p <= lo + EDGE {
        return slope(lo + PROBE).is_none_or(|s| s < 0.0);
    }
    if p >= hi - EDGE {
        return slope(hi - PROBE).is_none_or(|s| s > 0.0);
    }
    false
}

pub fn solve_concealed(s: &Scenario) -> Result<Equilibrium> {
    let m = s.marginal();
    let best = optimal_price(&m, s.b, &s.solver)?;
    let p = best.argmax;
    let principal = principal_utility(&m, s.b, p);
    let agent = agent_utility(&m, p);
    Ok(Equilibrium {
        regime: Regime::Concealed,
        p0: p,
        p1: p,
        principal_utility: principal,
        agent_utility: agent,
        welfare: principal + agent,
        quantity: m.cdf(p),
    })
}

/// Separable revealed-regime prices `(p_0*, p_1*)`.
pub fn revealed_prices(s: &Scenario) -> Result<(f64, f64)> {
    let p0 = optimal_price(&s.f0, s.b, &s.solver)?.argmax;
    let p1 = optimal_price(&s.f1, s.b, &s.solver)?.argmax;
    Ok((p0, p1))
}

pub fn solve_revealed(s: &Scenario) -> Result<Equilibrium> {
    let (p0, p1) = revealed_prices(s)?;
    Ok(two_price_equilibrium(
        Regime::Revealed,
        s.b,
        (1.0 - s.theta, &s.f0, p0),
        (s.theta, &s.f1, p1),
    ))
}

/// Equilibrium record for two priced segments `(weight, cost law, price)`.
pub fn two_price_equilibrium(
    regime: Regime,
    b: f64,
    seg0: (f64, &CostModel, f64),
    seg1: (f64, &CostModel, f64),
) -> Equilibrium {
    let (w0, m0, p0) = seg0;
    let (w1, m1, p1) = seg1;
    let principal = w0 * principal_utility(m0, b, p0) + w1 * principal_utility(m1, b, p1);
    let agent = w0 * agent_utility(m0, p0) + w1 * agent_utility(m1, p1);
    Equilibrium {
        regime,
        p0,
        p1,
        principal_utility: principal,
        agent_utility: agent,
        welfare: principal + agent,
        quantity: w0 * m0.cdf(p0) + w1 * m1.cdf(p1),
    }
}

/// `p + F(p)/f(p) − b`.
pub fn foc_residual(m: &CostModel, b: f64, p: f64) -> Result<f64> {
    let f = m.pdf(p)?;
    if f <= 0.0 {
        return Err(Error::ZeroDensity { at: p });
    }
    Ok(p + m.cdf(p) / f - b)
}

/// `p·f(p)/F(p)`.
pub fn elasticity(m: &CostModel, p: f64) -> Result<f64> {
    let q = m.cdf(p);
    if q <= 0.0 {
        return Err(Error::ZeroQuantity { at: p });
    }
    Ok(p * m.pdf(p)? / q)
}

/// `F(p)f′(p)/f(p)²`.
pub fn sigma_curvature(m: &CostModel, p: f64) -> Result<f64> {
    let f = m.pdf(p)?;
    if f <= 0.0 {
        return Err(Error::ZeroDensity { at: p });
    }
    Ok(m.cdf(p) * m.pdf_derivative(p)? / (f * f))
}

/// `−p f′(p)/f(p)`.
pub fn alpha_curvature(m: &CostModel, p: f64) -> Result<f64> {
    let f = m.pdf(p)?;
    if f <= 0.0 {
        return Err(Error::ZeroDensity { at: p });
    }
    Ok(-p * m.pdf_derivative(p)? / f)
}

/// `(b − p)/p`.
pub fn lerner_index(b: f64, p: f64) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::ZeroPrice);
    }
    Ok((b - p) / p)
}

/// Prices assigned by a regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prices {
    Single(f64),
    Pair(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelfareBreakdown {
    pub principal: f64,
    pub agent: f64,
    /// `Π + V`.
    pub sum_form: f64,
    /// `E[(b − C)·1(C ≤ p_assigned)]`, integrated from the densities.
    pub integral_form: f64,
}

impl WelfareBreakdown {
    pub fn discrepancy(&self) -> f64 {
        (self.sum_form - self.integral_form).abs()
    }
}

/// Total welfare of the concealed (`Single`) or revealed (`Pair`) price schedule.
pub fn welfare(s: &Scenario, prices: Prices) -> Result<WelfareBreakdown> {
    match prices {
        Prices::Single(p) => segment_welfare(s.b, &[(1.0, &s.marginal(), p)]),
        Prices::Pair(p0, p1) => segment_welfare(s.b, &[(1.0 - s.theta, &s.f0, p0), (s.theta, &s.f1, p1)]),
    }
}

/// Welfare of weighted segments `(weight, cost law, price)` in both forms.
pub fn segment_welfare(b: f64, segments: &[(f64, &CostModel, f64)]) -> Result<WelfareBreakdown> {
    let mut out = WelfareBreakdown {
        principal: 0.0,
        agent: 0.0,
        sum_form: 0.0,
        integral_form: 0.0,
    };
    for &(w, m, p) in segments {
        if p < 0.0 {
            return Err(Error::InvalidParameter(format!("price must be >= 0, got {p}")));
        }
        out.principal += w * principal_utility(m, b, p);
        out.agent += w * agent_utility(m, p);
        out.integral_form += w * (b * m.cdf(p) - m.partial_expectation(p)?);
    }
    out.sum_form = out.principal + out.agent;
    Ok(out)
}
