//! Quadrature, root finding, scalar maximization and finite differences.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on integrand evaluations inside one `integrate` call.
const MAX_QUADRATURE_EVALS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_iter: 200,
        }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        let tol = Self {
            abs_tol,
            rel_tol,
            max_iter,
        };
        tol.validate()?;
        Ok(tol)
    }

    /// Tighter setting used for integrals that later get differentiated numerically.
    pub fn fine() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_iter: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::InvalidParameter("abs_tol must be positive".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidParameter("rel_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "bracket needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Maximum {
    pub argmax: f64,
    pub max: f64,
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
                .collect()
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fl: f64,
    fm: f64,
    fr: f64,
    fb: f64,
    value: f64,
    err: f64,
    depth: usize,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, depth: usize) -> Self {
        let m = 0.5 * (a + b);
        let fl = f(0.5 * (a + m));
        let fr = f(0.5 * (m + b));
        let w = b - a;
        let coarse = w / 6.0 * (fa + 4.0 * fm + fb);
        let fine = w / 12.0 * (fa + 4.0 * fl + 2.0 * fm + 4.0 * fr + fb);
        let diff = fine - coarse;
        Self {
            a,
            b,
            fa,
            fl,
            fm,
            fr,
            fb,
            value: fine + diff / 15.0,
            err: (diff / 15.0).abs(),
            depth,
        }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    // Largest error first; ties resolved by position so the order is total.
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Adaptive Simpson quadrature over `[a, b]`.
///
/// Panels are refined worst-first against a global error budget
/// `max(abs_tol, rel_tol·|I|)`; `max_iter` caps the halving depth of any panel.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if !(a <= b) {
        return Err(Error::InvalidParameter(format!("integrate needs a <= b, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut heap = BinaryHeap::new();
    let seeds = linspace(a, b, 5);
    let f_seed: Vec<f64> = seeds.iter().map(|&x| f(x)).collect();
    for i in 0..4 {
        let m = 0.5 * (seeds[i] + seeds[i + 1]);
        heap.push(Panel::new(&f, seeds[i], seeds[i + 1], f_seed[i], f(m), f_seed[i + 1], 0));
    }

    let mut evals = 13usize;
    loop {
        let (total, err) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
        if !total.is_finite() {
            return Err(Error::InvalidObjective { x: f64::NAN });
        }
        let budget = tol.abs_tol.max(tol.rel_tol * total.abs());
        if err <= budget {
            let mut panels = heap.into_vec();
            panels.sort_by(|p, q| p.a.total_cmp(&q.a));
            return Ok(panels.iter().map(|p| p.value).sum());
        }
        let worst = heap.pop().expect("heap is never empty");
        if worst.depth >= tol.max_iter || evals > MAX_QUADRATURE_EVALS {
            heap.push(worst);
            let estimate = heap.iter().map(|p| p.value).sum();
            return Err(Error::NonConvergence {
                iterations: evals,
                estimate,
            });
        }
        let m = 0.5 * (worst.a + worst.b);
        let left = Panel::new(&f, worst.a, m, worst.fa, worst.fl, worst.fm, worst.depth + 1);
        let right = Panel::new(&f, m, worst.b, worst.fm, worst.fr, worst.fb, worst.depth + 1);
        evals += 4;
        heap.push(left);
        heap.push(right);
    }
}

/// Integrates piece by piece between sorted breakpoints.
///
/// Each piece evaluates its endpoints as one-sided limits (nudged a few ulps inward)
/// so jump discontinuities at breakpoints do not stall refinement.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    if !(a <= b) {
        return Err(Error::InvalidParameter(format!("integrate needs a <= b, got [{a}, {b}]")));
    }
    let mut knots = vec![a];
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    knots.extend(inner);
    knots.push(b);

    let pieces = (knots.len() - 1).max(1) as f64;
    let piece_tol = Tolerance {
        abs_tol: tol.abs_tol / pieces,
        ..tol
    };
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let nudge = 8.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1e-300);
        let inner_lo = (lo + nudge).min(0.5 * (lo + hi));
        let inner_hi = (hi - nudge).max(0.5 * (lo + hi));
        total += integrate(|x| f(x.clamp(inner_lo, inner_hi)), lo, hi, piece_tol)?;
    }
    Ok(total)
}

/// Root of `g` on a sign-changing bracket (Brent: bisection with secant and
/// inverse-quadratic steps).
pub fn find_root<G: Fn(f64) -> f64>(g: G, bracket: Bracket, tol: Tolerance) -> Result<f64> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (g(a), g(b));
    if !fa.is_finite() {
        return Err(Error::InvalidObjective { x: a });
    }
    if !fb.is_finite() {
        return Err(Error::InvalidObjective { x: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange {
            lo: a,
            hi: b,
            g_lo: fa,
            g_hi: fb,
        });
    }
    let (mut c, mut fc) = (b, fb);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if (fb > 0.0 && fc > 0.0) || (fb < 0.0 && fc < 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.abs_tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = g(b);
        if !fb.is_finite() {
            return Err(Error::InvalidObjective { x: b });
        }
    }
    Err(Error::NonConvergence {
        iterations: tol.max_iter,
        estimate: b,
    })
}

/// Grid scan followed by golden-section refinement around the best grid point.
pub fn maximize_scalar<F: Fn(f64) -> f64>(
    f: F,
    bracket: Bracket,
    grid_n: usize,
    tol: Tolerance,
) -> Result<Maximum> {
    scan_and_refine(&f, bracket, grid_n, tol).map(|(m, _, _)| m)
}

/// `maximize_scalar` plus a first-order polish: when the analytic `slope` changes
/// sign across the winning grid cell, its root replaces the golden-section
/// estimate unless that would lower the objective beyond rounding.
pub fn maximize_with_slope<F, D>(
    f: F,
    slope: D,
    bracket: Bracket,
    grid_n: usize,
    tol: Tolerance,
) -> Result<Maximum>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> Option<f64>,
{
    let (best, lo, hi) = scan_and_refine(&f, bracket, grid_n, tol)?;
    let (Some(s_lo), Some(s_hi)) = (slope(lo), slope(hi)) else {
        return Ok(best);
    };
    if !(s_lo > 0.0 && s_hi < 0.0) {
        return Ok(best);
    }
    let polish_tol = Tolerance {
        abs_tol: 1e-15,
        rel_tol: 1e-15,
        max_iter: 400,
    };
    let root = match find_root(|x| slope(x).unwrap_or(f64::NAN), Bracket { lo, hi }, polish_tol) {
        Ok(r) => r,
        Err(_) => return Ok(best),
    };
    let value = f(root);
    let slack = 4.0 * f64::EPSILON * best.max.abs();
    if value.is_finite() && value >= best.max - slack {
        Ok(Maximum {
            argmax: root,
            max: value,
        })
    } else {
        Ok(best)
    }
}

fn scan_and_refine<F: Fn(f64) -> f64>(
    f: &F,
    bracket: Bracket,
    grid_n: usize,
    tol: Tolerance,
) -> Result<(Maximum, f64, f64)> {
    if grid_n < 3 {
        return Err(Error::InvalidParameter("grid_n must be at least 3".into()));
    }
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidObjective { x })
        }
    };
    let xs = linspace(bracket.lo, bracket.hi, grid_n);
    let mut best_i = 0;
    let mut best_v = eval(xs[0])?;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        let v = eval(x)?;
        if v > best_v {
            best_i = i;
            best_v = v;
        }
    }
    let lo = xs[best_i.saturating_sub(1)];
    let hi = xs[(best_i + 1).min(grid_n - 1)];

    let mut best = Maximum {
        argmax: xs[best_i],
        max: best_v,
    };
    let mut consider = |x: f64, v: f64| {
        if v > best.max || (v == best.max && x < best.argmax) {
            best = Maximum { argmax: x, max: v };
        }
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut c) = (lo, hi);
    let mut x1 = c - inv_phi * (c - a);
    let mut x2 = a + inv_phi * (c - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..tol.max_iter {
        if c - a <= tol.abs_tol {
            break;
        }
        if f1 >= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - inv_phi * (c - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (c - a);
            f2 = eval(x2)?;
        }
    }
    consider(x1, f1);
    consider(x2, f2);
    Ok((best, lo, hi))
}

/// Central difference `(f(x+h) − f(x−h)) / 2h`.
pub fn finite_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Second-order one-sided difference; `h > 0` looks forward, `h < 0` backward.
pub fn one_sided_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h)
}

/// Central second difference `(f(x+h) − 2f(x) + f(x−h)) / h²`.
pub fn second_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}
