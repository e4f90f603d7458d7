//! Utility trajectories, `(λ_0, λ_1)` grids and surplus reference values.
//!
//! Everything here is plot data: rows are deterministic and ordered, and
//! JSON exports are wrapped in [`Versioned`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contract::{solve_concealed, solve_revealed, Equilibrium, Scenario};
use crate::distributions::CostModel;
use crate::error::{Error, Result};
use crate::garbling::sweep_garbling;
use crate::numerics::linspace;
use crate::restriction::sweep_restriction;

pub const SCHEMA_VERSION: &str = "1";

/// Slack on `W ≤ w_max` and the principal floor.
pub const TRAJECTORY_SLACK: f64 = 1e-9;

/// JSON envelope carrying the export schema version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema_version: String,
    #[serde(flatten)]
    pub data: T,
}

impl<T> Versioned<T> {
    pub fn new(data: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryKind {
    Garbling,
    Restriction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// `ε` or `r`.
    pub param: f64,
    pub v: f64,
    pub pi: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub v: f64,
    pub pi: f64,
}

impl From<&Equilibrium> for Anchor {
    fn from(e: &Equilibrium) -> Self {
        Anchor {
            v: e.agent_utility,
            pi: e.principal_utility,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    /// Concealed regime.
    #[serde(rename = "A")]
    pub concealed: Anchor,
    /// Revealed regime.
    #[serde(rename = "F")]
    pub revealed: Anchor,
    pub w_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scenario_id: String,
    pub kind: TrajectoryKind,
    pub points: Vec<TrajectoryPoint>,
    pub anchors: Anchors,
}

/// Flat CSV row of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub scenario_id: String,
    pub kind: TrajectoryKind,
    pub param: f64,
    pub v: f64,
    pub pi: f64,
    pub w: f64,
}

impl Trajectory {
    pub fn rows(&self) -> Vec<TrajectoryRow> {
        self.points
            .iter()
            .map(|p| TrajectoryRow {
                scenario_id: self.scenario_id.clone(),
                kind: self.kind,
                param: p.param,
                v: p.v,
                pi: p.pi,
                w: p.w,
            })
            .collect()
    }

    /// Point with the largest agent utility (first on ties).
    pub fn max_v(&self) -> Option<&TrajectoryPoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&TrajectoryPoint>, p| match best {
                Some(b) if b.v >= p.v => Some(b),
                _ => Some(p),
            })
    }

    /// Largest `W − w_max` over the points; `≤ TRAJECTORY_SLACK` when consistent.
    pub fn welfare_excess(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.w - self.anchors.w_max)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest shortfall `Π_con − Π` over the points.
    pub fn principal_shortfall(&self) -> f64 {
        self.points
            .iter()
            .map(|p| self.anchors.concealed.pi - p.pi)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `E[(b − C)⁺]`: welfare when every agent with `C ≤ b` works.
pub fn efficient_welfare(s: &Scenario) -> Result<f64> {
    let part = |m: &CostModel| -> Result<f64> { Ok(s.b * m.cdf(s.b) - m.partial_expectation(s.b)?) };
    Ok((1.0 - s.theta) * part(&s.f0)? + s.theta * part(&s.f1)?)
}

/// Garbling (`γ = θ`) and restriction trajectories over `n` evenly spaced
/// parameters, sharing the concealed/revealed anchors.
pub fn build_trajectories(s: &Scenario, scenario_id: &str, n: usize) -> Result<(Trajectory, Trajectory)> {
    if n < 11 {
        return Err(Error::InvalidParameter(format!("trajectories need n >= 11, got {n}")));
    }
    let anchors = Anchors {
        concealed: Anchor::from(&solve_concealed(s)?),
        revealed: Anchor::from(&solve_revealed(s)?),
        w_max: efficient_welfare(s)?,
    };
    let garbling = sweep_garbling(s, s.theta, &linspace(0.0, 1.0, n))?
        .into_iter()
        .map(|g| TrajectoryPoint {
            param: g.eps,
            v: g.v_garb,
            pi: g.pi_garb,
            w: g.w_garb,
        })
        .collect();
    let restriction = sweep_restriction(s, n)?
        .into_iter()
        .map(|r| TrajectoryPoint {
            param: r.r,
            v: r.v_const,
            pi: r.pi_const,
            w: r.w_const,
        })
        .collect();
    let make = |kind, points| Trajectory {
        scenario_id: scenario_id.to_string(),
        kind,
        points,
        anchors,
    };
    Ok((make(TrajectoryKind::Garbling, garbling), make(TrajectoryKind::Restriction, restriction)))
}

/// One cell of the revelation-preference grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevelationRecord {
    pub lambda0: f64,
    pub lambda1: f64,
    pub v_rev_minus_v_con: f64,
    pub w_con: f64,
    pub w_rev: f64,
}

/// `V_rev − V_con` for exponential environments, row-major over
/// `lambda0_grid` then `lambda1_grid`.
pub fn grid_revelation_preference(
    b: f64,
    theta: f64,
    lambda0_grid: &[f64],
    lambda1_grid: &[f64],
) -> Result<Vec<RevelationRecord>> {
    let cells: Vec<(f64, f64)> = lambda0_grid
        .iter()
        .flat_map(|&l0| lambda1_grid.iter().map(move |&l1| (l0, l1)))
        .collect();
    cells
        .into_par_iter()
        .map(|(l0, l1)| {
            let s = Scenario::new(b, theta, CostModel::exponential(l0)?, CostModel::exponential(l1)?)?;
            let con = solve_concealed(&s)?;
            let rev = solve_revealed(&s)?;
            Ok(RevelationRecord {
                lambda0: l0,
                lambda1: l1,
                v_rev_minus_v_con: rev.agent_utility - con.agent_utility,
                w_con: con.welfare,
                w_rev: rev.welfare,
            })
        })
        .collect()
}

/// Number of strict sign changes along a row of values (zeros are skipped).
pub fn sign_changes(values: &[f64]) -> usize {
    let signs: Vec<bool> = values.iter().filter(|v| **v != 0.0).map(|v| *v > 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}
