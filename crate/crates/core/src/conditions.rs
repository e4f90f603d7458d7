//! Assumption and proposition checkers producing auditable reports.

use serde::{Deserialize, Serialize};

use crate::contract::{
    alpha_curvature, elasticity, lerner_index, optimal_price, principal_utility, revealed_prices, sigma_curvature,
    solve_concealed, solve_revealed, Scenario,
};
use crate::distributions::CostModel;
use crate::error::{Error, Result};
use crate::numerics::second_difference;
use crate::restriction::check_drc;

pub const DEFAULT_GRID: usize = 512;
/// Per-step tolerance for "strictly increasing/decreasing" on a grid.
pub const STRICTNESS: f64 = 1e-12;
/// Upper quantile capping grids over unbounded supports.
const GRID_QUANTILE: f64 = 0.999;
/// Decades below the top of the range covered by the log-spaced MLRP points.
const MLRP_LOG_DECADES: f64 = 6.0;

/// Outcome of one inequality check; `margin > 0` exactly when `holds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub notes: String,
    pub grid_used: usize,
    /// Whether the assumptions the result leans on were verified too.
    pub preconditions_hold: bool,
}

impl ConditionReport {
    fn decided(name: &str, lhs: f64, rhs: f64, margin: f64) -> Self {
        let scale = 1f64.max(lhs.abs()).max(rhs.abs());
        // Differences at rounding level are ties, and ties fail strict inequalities.
        let margin = if margin.abs() <= STRICTNESS * scale { 0.0 } else { margin };
        let finite = lhs.is_finite() && rhs.is_finite() && margin.is_finite();
        Self {
            name: name.to_string(),
            holds: finite && margin > 0.0,
            lhs,
            rhs,
            margin: if finite { margin } else { f64::NAN },
            notes: if finite { String::new() } else { "undecided: non-finite side".into() },
            grid_used: 0,
            preconditions_hold: true,
        }
    }

    /// Report for `lhs < rhs`.
    pub fn less(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::decided(name, lhs, rhs, rhs - lhs)
    }

    /// Report for `lhs > rhs`.
    pub fn greater(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::decided(name, lhs, rhs, lhs - rhs)
    }

    /// A check that does not apply to the inputs.
    pub fn not_applicable(name: &str, why: &str) -> Self {
        Self {
            name: name.to_string(),
            holds: false,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            notes: format!("not applicable: {why}"),
            grid_used: 0,
            preconditions_hold: false,
        }
    }

    pub fn with_grid(mut self, n: usize) -> Self {
        self.grid_used = n;
        self
    }

    pub fn with_preconditions(mut self, ok: bool) -> Self {
        self.preconditions_hold = ok;
        self
    }

    pub fn note(mut self, text: impl AsRef<str>) -> Self {
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        self.notes.push_str(text.as_ref());
        self
    }

    /// The inequality holds and its preconditions were verified.
    pub fn verdict(&self) -> bool {
        self.holds && self.preconditions_hold
    }
}

/// Cell midpoints of `(0, min(b, q_0.999))` for the given law.
pub fn default_grid(m: &CostModel, b: f64, n: usize) -> Vec<f64> {
    midpoints(0.0, b.min(m.quantile(GRID_QUANTILE)), n)
}

pub fn midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * step).collect()
}

/// Smallest step of a sequence that should be strictly increasing (`+1`) or decreasing (`-1`).
pub(crate) fn min_step(values: &[f64], direction: f64) -> f64 {
    values
        .windows(2)
        .map(|w| direction * (w[1] - w[0]))
        .fold(f64::INFINITY, f64::min)
}

fn monotone_report(name: &str, values: &[f64], direction: f64) -> ConditionReport {
    let step = min_step(values, direction);
    ConditionReport::greater(name, step, STRICTNESS).with_grid(values.len())
}

pub fn check_mlrp(f0: &CostModel, f1: &CostModel, grid_n: usize) -> Result<ConditionReport> {
    if f0.has_atoms() || f1.has_atoms() {
        return Err(Error::AtomPresent);
    }
    let (lo0, hi0) = f0.support();
    let (lo1, hi1) = f1.support();
    let lo = lo0.max(lo1);
    let cap = f0.quantile(GRID_QUANTILE).max(f1.quantile(GRID_QUANTILE));
    let hi = hi0.min(hi1).min(cap);
    if !(hi > lo) {
        return Ok(ConditionReport::not_applicable("mlrp", "supports do not overlap"));
    }
    // Heavy tails stretch the range, so the origin gets log-spaced points too.
    let mut grid = midpoints(lo, hi, grid_n);
    grid.extend((0..grid_n).map(|i| lo + (hi - lo) * 10f64.powf(MLRP_LOG_DECADES * (i as f64 / grid_n as f64 - 1.0))));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut ratios = Vec::with_capacity(grid.len());
    for c in grid.iter().copied() {
        let (a, b) = (f0.pdf(c)?, f1.pdf(c)?);
        if a > 0.0 && b > 0.0 {
            ratios.push(a / b);
        }
    }
    if ratios.len() < 2 {
        return Ok(ConditionReport::not_applicable("mlrp", "density ratio undefined on the overlap"));
    }
    let mut report = monotone_report("mlrp", &ratios, 1.0).with_grid(grid.len());
    if (lo0, hi0) != (lo1, hi1) {
        report = report.note(format!("supports differ; ratio checked on overlap [{lo}, {hi}]"));
    }
    Ok(report.note("f0/f1 strictly increasing"))
}

pub fn check_concavity(m: &CostModel, b: f64, grid_n: usize) -> ConditionReport {
    if m.has_atoms() {
        return ConditionReport::not_applicable("concavity", "distribution has an atom");
    }
    let upper = b.min(m.quantile(GRID_QUANTILE));
    let h = 1e-4 * upper;
    let max_curv = default_grid(m, b, grid_n)
        .into_iter()
        .filter(|&p| p - h > 0.0)
        .map(|p| second_difference(|x| principal_utility(m, b, x), p, h))
        .fold(f64::NEG_INFINITY, f64::max);
    ConditionReport::less("concavity", max_curv, -1e-8)
        .with_grid(grid_n)
        .note("max second difference of F(p)(b-p) must stay below -1e-8")
}

/// `ψ(θ) = θ / ((1/(1−θ))^{1/θ} − (1/(1−θ))^{(1−θ)/θ} − θ)`.
pub fn psi(theta: f64) -> f64 {
    let base = 1.0 / (1.0 - theta);
    theta / (base.powf(1.0 / theta) - base.powf((1.0 - theta) / theta) - theta)
}

/// Whether `F` is concave (`f′ ≤ 0`) and `F/f` strictly increasing on the grid.
fn prop1_preconditions(m: &CostModel, b: f64, grid_n: usize) -> (bool, String) {
    let grid = default_grid(m, b, grid_n);
    let concave = grid.iter().all(|&c| m.pdf_derivative(c).is_ok_and(|d| d <= 0.0));
    let ratio: Vec<f64> = grid
        .iter()
        .map(|&c| m.pdf(c).map_or(f64::NAN, |f| m.cdf(c) / f))
        .collect();
    let increasing = ratio.iter().all(|r| r.is_finite()) && min_step(&ratio, 1.0) > STRICTNESS;
    let smooth = m.cdf_is_c1();
    let ok = concave && increasing && smooth;
    (ok, format!("F0 concave: {concave}; F0/f0 increasing: {increasing}; F0 C1: {smooth}"))
}

pub fn check_prop1(s: &Scenario) -> Result<ConditionReport> {
    if !s.f1.is_zero_point_mass() {
        return Err(Error::WrongAnchoring);
    }
    let th = s.theta;
    let p0 = optimal_price(&s.f0, s.b, &s.solver)?.argmax;
    if p0 <= 0.0 {
        return Err(Error::ZeroPrice);
    }
    let q = (1.0 - th) * p0;
    let eta = q * (1.0 - th) * s.f0.pdf(q)? / ((1.0 - th) * s.f0.cdf(q) + th);
    let eta0 = elasticity(&s.f0, p0)?;
    let rhs = (1.0 - th) / eta - 1.0 / eta0;
    let (ok, pre) = prop1_preconditions(&s.f0, s.b, DEFAULT_GRID);
    Ok(ConditionReport::greater("prop1", th, rhs)
        .with_grid(DEFAULT_GRID)
        .with_preconditions(ok)
        .note(pre)
        .note(format!("p0*={p0}"))
        .note("sufficient: holds => concealment preferred (V_con > V_rev)"))
}

/// MLRP ordering, concavity of both conditional profits and DRC, as `(all hold, summary)`.
pub fn acv_preconditions(s: &Scenario) -> (bool, String) {
    let mlrp = check_mlrp(&s.f0, &s.f1, DEFAULT_GRID).is_ok_and(|r| r.holds);
    let c0 = check_concavity(&s.f0, s.b, DEFAULT_GRID);
    let c1 = check_concavity(&s.f1, s.b, DEFAULT_GRID);
    let drc = check_drc(s, None);
    let ok = mlrp && c0.holds && c1.holds && drc.holds;
    (
        ok,
        format!("MLRP: {mlrp}; concave f0: {}; concave f1: {}; DRC: {}", c0.holds, c1.holds, drc.holds),
    )
}

pub fn check_prop2(s: &Scenario) -> Result<ConditionReport> {
    let (p0, p1) = revealed_prices(s)?;
    let lhs = (1.0 - s.theta) * (s.b - p0) / (2.0 - sigma_curvature(&s.f0, p0)?);
    let rhs = s.theta * (s.b - p1) / (2.0 - sigma_curvature(&s.f1, p1)?);
    let (ok, pre) = acv_preconditions(s);
    Ok(ConditionReport::less("prop2", lhs, rhs)
        .with_grid(DEFAULT_GRID)
        .with_preconditions(ok)
        .note(pre)
        .note("sufficient-for-concealment when preconditions hold: V_con > V_rev"))
}

pub fn check_prop3(s: &Scenario) -> Result<ConditionReport> {
    let p = solve_concealed(s)?.price();
    let l = lerner_index(s.b, p)?;
    let lhs = (2.0 + l * alpha_curvature(&s.f1, p)?) / (2.0 + l * alpha_curvature(&s.f0, p)?);
    let inv_hazard = |m: &CostModel| -> Result<f64> {
        let f = m.pdf(p)?;
        if f <= 0.0 {
            return Err(Error::ZeroDensity { at: p });
        }
        Ok(m.cdf(p) / f)
    };
    let rhs = (s.theta * inv_hazard(&s.f1)?) / ((1.0 - s.theta) * inv_hazard(&s.f0)?);
    let (ok, pre) = acv_preconditions(s);
    Ok(ConditionReport::greater("prop3", lhs, rhs)
        .with_grid(DEFAULT_GRID)
        .with_preconditions(ok)
        .note(pre)
        .note("sufficient-for-revelation when preconditions hold: V_rev > V_con"))
}

/// Audits the contrapositive of "welfare rises under revelation only if quantity rises".
///
/// `lhs`/`rhs` are the concealed and revealed quantities. When quantity did not
/// rise the margin is `W_con − W_rev + 1e-9`; otherwise the lemma is vacuous and
/// the margin is the quantity increase.
pub fn check_quantity_lemma(s: &Scenario) -> Result<ConditionReport> {
    let con = solve_concealed(s)?;
    let rev = solve_revealed(s)?;
    let rose = rev.quantity > con.quantity + 1e-12;
    let margin = if rose {
        rev.quantity - con.quantity
    } else {
        con.welfare - rev.welfare + 1e-9
    };
    let mut r = ConditionReport::decided("quantity_lemma", con.quantity, rev.quantity, margin);
    r = r.note(format!(
        "q_con={} q_rev={} W_con={} W_rev={}",
        con.quantity, rev.quantity, con.welfare, rev.welfare
    ));
    Ok(if rose {
        r.note("quantity increased; welfare may rise")
    } else {
        r.note("quantity did not increase, so W_rev <= W_con is required")
    })
}
