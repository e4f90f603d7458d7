//! Cost distributions: closed-form families, finite mixtures and the
//! randomized-response posterior pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate, integrate_piecewise, Tolerance};

/// Window around uniform endpoints inside which the density derivative is refused.
const KINK_WINDOW: f64 = 1e-9;
const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Exponential { mean: f64 },
    Weibull { scale: f64, shape: f64 },
    Uniform { lo: f64, hi: f64 },
    PointMass { atom: f64 },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Self::Exponential { mean } if !(mean > 0.0 && mean.is_finite()) => {
                bad(format!("exponential mean must be positive, got {mean}"))
            }
            Self::Weibull { scale, shape }
                if !(scale > 0.0 && scale.is_finite() && shape > 0.0 && shape.is_finite()) =>
            {
                bad(format!("weibull needs scale > 0 and shape > 0, got ({scale}, {shape})"))
            }
            Self::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) => {
                bad(format!("uniform needs 0 <= lo < hi, got ({lo}, {hi})"))
            }
            Self::PointMass { atom } if !(atom >= 0.0 && atom.is_finite()) => {
                bad(format!("point mass atom must be >= 0, got {atom}"))
            }
            _ => Ok(()),
        }
    }

    fn cdf(&self, c: f64) -> f64 {
        match *self {
            Self::Exponential { mean } => {
                if c <= 0.0 {
                    0.0
                } else {
                    -(-c / mean).exp_m1()
                }
            }
            Self::Weibull { scale, shape } => {
                if c <= 0.0 {
                    0.0
                } else {
                    -(-(c / scale).powf(shape)).exp_m1()
                }
            }
            Self::Uniform { lo, hi } => ((c - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::PointMass { atom } => {
                if c >= atom {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn pdf(&self, c: f64) -> Result<f64> {
        Ok(match *self {
            Self::Exponential { mean } => {
                if c < 0.0 {
                    0.0
                } else {
                    (-c / mean).exp() / mean
                }
            }
            Self::Weibull { scale, shape } => weibull_pdf(scale, shape, c),
            Self::Uniform { lo, hi } => {
                if lo <= c && c < hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Self::PointMass { atom } => {
                if c == atom {
                    return Err(Error::AtomAtPoint { at: c });
                }
                0.0
            }
        })
    }

    fn pdf_derivative(&self, c: f64) -> Result<f64> {
        Ok(match *self {
            Self::Exponential { mean } => {
                if c < 0.0 {
                    0.0
                } else {
                    -(-c / mean).exp() / (mean * mean)
                }
            }
            Self::Weibull { scale, shape } => {
                if c < 0.0 {
                    0.0
                } else if c == 0.0 {
                    if shape < 1.0 {
                        f64::NEG_INFINITY
                    } else if shape == 1.0 {
                        -1.0 / (scale * scale)
                    } else if shape < 2.0 {
                        f64::INFINITY
                    } else if shape == 2.0 {
                        2.0 / (scale * scale)
                    } else {
                        0.0
                    }
                } else {
                    let z = (c / scale).powf(shape);
                    weibull_pdf(scale, shape, c) * ((shape - 1.0) - shape * z) / c
                }
            }
            Self::Uniform { lo, hi } => {
                if (c - lo).abs() < KINK_WINDOW || (c - hi).abs() < KINK_WINDOW {
                    return Err(Error::NotDifferentiable { at: c });
                }
                0.0
            }
            Self::PointMass { atom } => {
                if c == atom {
                    return Err(Error::AtomAtPoint { at: c });
                }
                0.0
            }
        })
    }

    /// Density of the absolutely continuous part (0 for point masses).
    fn ac_density(&self, c: f64) -> f64 {
        match self {
            Self::PointMass { .. } => 0.0,
            _ => self.pdf(c).unwrap_or(0.0),
        }
    }

    fn agent_partial_value(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { mean } => p - mean * self.cdf(p),
            Self::Uniform { lo, hi } => {
                if p <= lo {
                    0.0
                } else if p < hi {
                    (p - lo) * (p - lo) / (2.0 * (hi - lo))
                } else {
                    0.5 * (hi - lo) + (p - hi)
                }
            }
            Self::PointMass { atom } => (p - atom).max(0.0),
            Self::Weibull { .. } => quad_estimate(integrate(|c| self.cdf(c), 0.0, p, Tolerance::fine())),
        }
    }

    fn restricted_mean(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { mean } => mean * self.cdf(p),
            Self::Uniform { .. } | Self::PointMass { .. } => {
                if p.is_infinite() {
                    self.mean()
                } else {
                    p - self.agent_partial_value(p)
                }
            }
            Self::Weibull { .. } => {
                if p.is_infinite() {
                    self.mean()
                } else {
                    quad_estimate(integrate(|c| 1.0 - self.cdf(c), 0.0, p, Tolerance::fine()))
                }
            }
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { mean } => mean,
            Self::Weibull { scale, shape } => scale * statrs::function::gamma::gamma(1.0 + 1.0 / shape),
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::PointMass { atom } => atom,
        }
    }

    fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        match *self {
            Self::Exponential { mean } => -mean * (-q).ln_1p(),
            Self::Weibull { scale, shape } => scale * (-(-q).ln_1p()).powf(1.0 / shape),
            Self::Uniform { lo, hi } => lo + q * (hi - lo),
            Self::PointMass { atom } => atom,
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            Self::Exponential { .. } | Self::Weibull { .. } => (0.0, f64::INFINITY),
            Self::Uniform { lo, hi } => (lo, hi),
            Self::PointMass { atom } => (atom, atom),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Exponential { .. } | Self::Weibull { .. } => vec![0.0],
            Self::Uniform { lo, hi } => vec![lo, hi],
            Self::PointMass { atom } => vec![atom],
        }
    }
}

fn weibull_pdf(scale: f64, shape: f64, c: f64) -> f64 {
    if c < 0.0 {
        0.0
    } else if c == 0.0 {
        if shape < 1.0 {
            f64::INFINITY
        } else if shape == 1.0 {
            1.0 / scale
        } else {
            0.0
        }
    } else {
        let z = (c / scale).powf(shape);
        shape / c * z * (-z).exp()
    }
}

/// Quadrature results used inside infallible functionals keep the best estimate
/// even when the error budget was not met.
fn quad_estimate(r: Result<f64>) -> f64 {
    match r {
        Ok(v) => v,
        Err(Error::NonConvergence { estimate, .. }) => estimate,
        Err(_) => f64::NAN,
    }
}

/// `∫_0^p (1 − F(c)) dc` for a Weibull law via the regularized lower incomplete gamma
/// function; a fast path checked against quadrature.
pub fn weibull_restricted_mean_closed_form(scale: f64, shape: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let a = 1.0 / shape;
    let x = (p / scale).powf(shape);
    scale * statrs::function::gamma::gamma(1.0 + a) * statrs::function::gamma::gamma_lr(a, x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    components: Vec<(f64, CostModel)>,
}

impl Mixture {
    pub fn components(&self) -> &[(f64, CostModel)] {
        &self.components
    }

    fn active(&self) -> impl Iterator<Item = &(f64, CostModel)> {
        self.components.iter().filter(|(w, _)| *w > 0.0)
    }
}

/// Evaluatable cost distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum CostModel {
    Family(DistributionSpec),
    Mixture(Mixture),
}

impl From<DistributionSpec> for CostModel {
    fn from(spec: DistributionSpec) -> Self {
        CostModel::Family(spec)
    }
}

impl CostModel {
    pub fn from_spec(spec: DistributionSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self::Family(spec))
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        Self::from_spec(DistributionSpec::Exponential { mean })
    }

    pub fn weibull(scale: f64, shape: f64) -> Result<Self> {
        Self::from_spec(DistributionSpec::Weibull { scale, shape })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::from_spec(DistributionSpec::Uniform { lo, hi })
    }

    pub fn point_mass(atom: f64) -> Result<Self> {
        Self::from_spec(DistributionSpec::PointMass { atom })
    }

    pub fn spec(&self) -> Option<&DistributionSpec> {
        match self {
            Self::Family(s) => Some(s),
            Self::Mixture(_) => None,
        }
    }

    pub fn cdf(&self, c: f64) -> f64 {
        match self {
            Self::Family(s) => s.cdf(c),
            Self::Mixture(m) => m.active().map(|(w, x)| w * x.cdf(c)).sum::<f64>().min(1.0),
        }
    }

    pub fn pdf(&self, c: f64) -> Result<f64> {
        match self {
            Self::Family(s) => s.pdf(c),
            Self::Mixture(m) => m.active().try_fold(0.0, |acc, (w, x)| Ok(acc + w * x.pdf(c)?)),
        }
    }

    pub fn pdf_derivative(&self, c: f64) -> Result<f64> {
        match self {
            Self::Family(s) => s.pdf_derivative(c),
            Self::Mixture(m) => m
                .active()
                .try_fold(0.0, |acc, (w, x)| Ok(acc + w * x.pdf_derivative(c)?)),
        }
    }

    /// `∫_0^p (1 − F(c)) dc`.
    pub fn restricted_mean(&self, p: f64) -> f64 {
        match self {
            Self::Family(s) => s.restricted_mean(p),
            Self::Mixture(m) => m.active().map(|(w, x)| w * x.restricted_mean(p)).sum(),
        }
    }

    /// `∫_0^p F(c) dc = E[(p − C)⁺]`.
    pub fn agent_partial_value(&self, p: f64) -> f64 {
        match self {
            Self::Family(s) => s.agent_partial_value(p),
            Self::Mixture(m) => m.active().map(|(w, x)| w * x.agent_partial_value(p)).sum(),
        }
    }

    /// `E[C; C ≤ p]`, integrated numerically from the density plus atom contributions.
    pub fn partial_expectation(&self, p: f64) -> Result<f64> {
        if p <= 0.0 {
            return Ok(0.0);
        }
        let atoms: f64 = self
            .atoms()
            .iter()
            .filter(|(loc, _)| *loc <= p)
            .map(|(loc, mass)| loc * mass)
            .sum();
        let lo = self.support().0.min(p);
        let cont = integrate_piecewise(|c| c * self.ac_density(c), lo, p, &self.breakpoints(), Tolerance::fine());
        Ok(atoms + quad_estimate(cont))
    }

    fn ac_density(&self, c: f64) -> f64 {
        match self {
            Self::Family(s) => s.ac_density(c),
            Self::Mixture(m) => m.active().map(|(w, x)| w * x.ac_density(c)).sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Family(s) => s.mean(),
            Self::Mixture(m) => m.active().map(|(w, x)| w * x.mean()).sum(),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Family(s) => s.support(),
            Self::Mixture(m) => m.active().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, x)| {
                let (a, b) = x.support();
                (lo.min(a), hi.max(b))
            }),
        }
    }

    /// Point masses as `(location, mass)`, merged by location.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        self.collect_atoms(1.0, &mut out);
        out
    }

    fn collect_atoms(&self, scale: f64, out: &mut Vec<(f64, f64)>) {
        match self {
            Self::Family(DistributionSpec::PointMass { atom }) => {
                match out.iter_mut().find(|(loc, _)| loc == atom) {
                    Some(entry) => entry.1 += scale,
                    None => out.push((*atom, scale)),
                }
            }
            Self::Family(_) => {}
            Self::Mixture(m) => m.active().for_each(|(w, x)| x.collect_atoms(scale * w, out)),
        }
    }

    pub fn has_atoms(&self) -> bool {
        !self.atoms().is_empty()
    }

    /// True for a family `PointMass(0)`.
    pub fn is_zero_point_mass(&self) -> bool {
        matches!(self, Self::Family(DistributionSpec::PointMass { atom }) if *atom == 0.0)
    }

    /// Support endpoints and atom locations; integrands are smooth between them.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match self {
            Self::Family(s) => s.breakpoints(),
            Self::Mixture(m) => m.active().flat_map(|(_, x)| x.breakpoints()).collect(),
        };
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Smallest `c` with `F(c) ≥ q`.
    pub fn quantile(&self, q: f64) -> f64 {
        match self {
            Self::Family(s) => s.quantile(q),
            Self::Mixture(m) => {
                let mut lo = self.support().0;
                let mut hi = m
                    .active()
                    .map(|(_, x)| x.quantile(q))
                    .fold(lo, f64::max);
                if self.cdf(lo) >= q {
                    return lo;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.cdf(mid) >= q {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }

    /// Whether the density is bounded (Weibull with shape < 1 is not; atoms are not densities).
    pub fn density_bounded(&self) -> bool {
        match self {
            Self::Family(DistributionSpec::Weibull { shape, .. }) => *shape >= 1.0,
            Self::Family(DistributionSpec::PointMass { .. }) => false,
            Self::Family(_) => true,
            Self::Mixture(m) => m.active().all(|(_, x)| x.density_bounded()),
        }
    }

    /// Whether the cdf is continuously differentiable on the open positive half-line.
    pub fn cdf_is_c1(&self) -> bool {
        match self {
            Self::Family(DistributionSpec::Uniform { .. }) | Self::Family(DistributionSpec::PointMass { .. }) => false,
            Self::Family(_) => true,
            Self::Mixture(m) => m.active().all(|(_, x)| x.cdf_is_c1()),
        }
    }
}

pub fn eval_cdf(m: &CostModel, c: f64) -> f64 {
    m.cdf(c)
}

pub fn eval_pdf(m: &CostModel, c: f64) -> Result<f64> {
    m.pdf(c)
}

pub fn eval_pdf_derivative(m: &CostModel, c: f64) -> Result<f64> {
    m.pdf_derivative(c)
}

pub fn restricted_mean(m: &CostModel, p: f64) -> f64 {
    m.restricted_mean(p)
}

pub fn agent_partial_value(m: &CostModel, p: f64) -> f64 {
    m.agent_partial_value(p)
}

pub fn make_mixture(weights_and_models: Vec<(f64, CostModel)>) -> Result<CostModel> {
    if weights_and_models.is_empty() {
        return Err(Error::BadWeights("mixture needs at least one component".into()));
    }
    let mut sum = 0.0;
    for (w, _) in &weights_and_models {
        if !(w.is_finite() && (0.0..=1.0).contains(w)) {
            return Err(Error::BadWeights(format!("weight {w} outside [0, 1]")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::BadWeights(format!("weights sum to {sum}")));
    }
    Ok(CostModel::Mixture(Mixture {
        components: weights_and_models,
    }))
}

/// Two-component mixture that collapses to a component when a weight is exactly 0 or 1.
pub fn two_point_mixture(w0: f64, f0: &CostModel, f1: &CostModel) -> Result<CostModel> {
    if w0 == 1.0 {
        Ok(f0.clone())
    } else if w0 == 0.0 {
        Ok(f1.clone())
    } else {
        make_mixture(vec![(w0, f0.clone()), (1.0 - w0, f1.clone())])
    }
}

/// Posterior cost laws after observing the noisy signal `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GarbledPair {
    pub g0: CostModel,
    pub g1: CostModel,
    pub prob_y1: f64,
    /// `P(X = 0 | Y = 0)`.
    pub w00: f64,
    /// `P(X = 1 | Y = 1)`.
    pub w11: f64,
}

impl GarbledPair {
    pub fn prob_y0(&self) -> f64 {
        1.0 - self.prob_y1
    }
}

/// Channel probabilities of the randomized-response signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub theta: f64,
    pub gamma: f64,
    pub eps: f64,
}

impl Channel {
    pub fn new(theta: f64, gamma: f64, eps: f64) -> Result<Self> {
        for (name, v) in [("theta", theta), ("gamma", gamma), ("eps", eps)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        Ok(Self { theta, gamma, eps })
    }

    /// `P(Y=0 | X=0)`.
    pub fn p00(&self) -> f64 {
        self.eps + (1.0 - self.eps) * (1.0 - self.gamma)
    }

    /// `P(Y=0 | X=1)`.
    pub fn p01(&self) -> f64 {
        (1.0 - self.eps) * (1.0 - self.gamma)
    }

    pub fn prob_y0(&self) -> f64 {
        (1.0 - self.theta) * self.p00() + self.theta * self.p01()
    }

    pub fn prob_y1(&self) -> f64 {
        (1.0 - self.theta) * (1.0 - self.p00()) + self.theta * (1.0 - self.p01())
    }

    /// `P(X=0 | Y=0)`.
    pub fn w00(&self) -> f64 {
        (1.0 - self.theta) * self.p00() / self.prob_y0()
    }

    /// `P(X=1 | Y=1)`.
    pub fn w11(&self) -> f64 {
        self.theta * (1.0 - self.p01()) / self.prob_y1()
    }

    /// `d/dε P(X=0 | Y=0)`.
    pub fn dw00(&self) -> f64 {
        let (u, py0) = (self.p00(), self.prob_y0());
        let du = self.gamma;
        let dpy0 = self.gamma - self.theta;
        (1.0 - self.theta) * (du * py0 - u * dpy0) / (py0 * py0)
    }

    /// `d/dε P(X=1 | Y=1)`.
    pub fn dw11(&self) -> f64 {
        let (v, py1) = (1.0 - self.p01(), self.prob_y1());
        let dv = 1.0 - self.gamma;
        let dpy1 = self.theta - self.gamma;
        self.theta * (dv * py1 - v * dpy1) / (py1 * py1)
    }
}

pub fn make_garbled_pair(f0: &CostModel, f1: &CostModel, theta: f64, gamma: f64, eps: f64) -> Result<GarbledPair> {
    let ch = Channel::new(theta, gamma, eps)?;
    if ch.prob_y0() <= 0.0 {
        return Err(Error::DegeneratePosterior { y: 0 });
    }
    if ch.prob_y1() <= 0.0 {
        return Err(Error::DegeneratePosterior { y: 1 });
    }
    let (w00, w11) = (ch.w00().clamp(0.0, 1.0), ch.w11().clamp(0.0, 1.0));
    Ok(GarbledPair {
        g0: two_point_mixture(w00, f0, f1)?,
        g1: two_point_mixture(1.0 - w11, f0, f1)?,
        prob_y1: ch.prob_y1(),
        w00,
        w11,
    })
}
