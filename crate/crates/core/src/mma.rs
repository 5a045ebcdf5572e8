//! Method of moving asymptotes for box-bounded problems with at most one
//! linear inequality constraint `a . x <= b`.
//!
//! The objective is replaced by the usual separable convex approximation
//! `sum_j p_j / (U_j - x_j) + q_j / (x_j - L_j)`. The linear constraint is
//! kept exact, so the dual of the subproblem is a one-dimensional monotone
//! root find solved by bracketing and bisection on the multiplier.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Asymptote and move-limit parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmaSettings {
    /// Initial asymptote distance as a fraction of the variable range.
    pub asymptote_init: f64,
    /// Expansion factor when the last two steps agree in sign.
    pub asymptote_increase: f64,
    /// Contraction factor when the last two steps oscillate.
    pub asymptote_decrease: f64,
    /// Largest step as a fraction of the variable range.
    pub move_limit: f64,
    /// Closest an asymptote may get to the current iterate, as a fraction
    /// of the variable range.
    pub asymptote_min: f64,
    /// Farthest an asymptote may get from the current iterate.
    pub asymptote_max: f64,
    pub albefa: f64,
    pub raa0: f64,
}

impl Default for MmaSettings {
    fn default() -> Self {
        MmaSettings {
            asymptote_init: 0.5,
            asymptote_increase: 1.2,
            asymptote_decrease: 0.7,
            move_limit: 0.2,
            asymptote_min: 1e-5,
            asymptote_max: 10.0,
            albefa: 0.1,
            raa0: 1e-5,
        }
    }
}

impl MmaSettings {
    pub fn validate(&self, key: &str) -> Result<()> {
        let checks: [(&str, f64, f64, f64); 8] = [
            ("asymptote_init", self.asymptote_init, 0.0, 10.0),
            ("asymptote_increase", self.asymptote_increase, 1.0, 10.0),
            ("asymptote_decrease", self.asymptote_decrease, 0.0, 1.0),
            ("move_limit", self.move_limit, 0.0, 1.0),
            ("asymptote_min", self.asymptote_min, 0.0, self.asymptote_init),
            ("asymptote_max", self.asymptote_max, self.asymptote_init, 100.0),
            ("albefa", self.albefa, 0.0, 1.0),
            ("raa0", self.raa0, 0.0, 1.0),
        ];
        for (name, value, lo, hi) in checks {
            let ok = value.is_finite() && value > lo && value <= hi;
            let ok = ok || (name == "asymptote_increase" && value == 1.0);
            if !ok {
                return Err(Error::config(
                    alloc::format!("{key}.{name}"),
                    alloc::format!("must lie in ({lo}, {hi}], got {value}"),
                ));
            }
        }
        Ok(())
    }
}

/// Linear constraint `coefficients . x <= bound`.
#[derive(Debug, Clone, Copy)]
pub struct LinearConstraint<'a> {
    pub coefficients: &'a [f64],
    pub bound: f64,
}

/// One MMA step's worth of problem data.
#[derive(Debug, Clone, Copy)]
pub struct BoxConstrainedProblem<'a> {
    pub x: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    pub gradient: &'a [f64],
    pub constraint: Option<LinearConstraint<'a>>,
}

/// Iteration history carried between updates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AsymptoteState {
    pub xold1: Vec<f64>,
    pub xold2: Vec<f64>,
    pub low: Vec<f64>,
    pub upp: Vec<f64>,
    pub iteration: usize,
}

impl AsymptoteState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Relative tolerance on `a . x - b` for the dual bisection.
const DUAL_TOLERANCE: f64 = 1e-10;

impl BoxConstrainedProblem<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.x.len();
        for (what, len) in [
            ("lower bounds", self.lower.len()),
            ("upper bounds", self.upper.len()),
            ("gradient", self.gradient.len()),
        ] {
            if len != n {
                return Err(Error::LengthMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(c) = &self.constraint {
            if c.coefficients.len() != n {
                return Err(Error::LengthMismatch {
                    what: "constraint coefficients",
                    expected: n,
                    actual: c.coefficients.len(),
                });
            }
            if !c.bound.is_finite() || c.coefficients.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "constraint",
                });
            }
        }
        if self.gradient.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "gradient" });
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "design variables",
            });
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::BoundaryConditions(alloc::format!(
                    "inconsistent bounds [{lo}, {hi}] for variable {j}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-variable data of the convex subproblem.
struct Subproblem {
    p: Vec<f64>,
    q: Vec<f64>,
    low: Vec<f64>,
    upp: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl Subproblem {
    /// Minimiser of `p/(U-x) + q/(x-L) + t x` over `[alpha, beta]`.
    fn solve_variable(&self, j: usize, t: f64) -> f64 {
        let (p, q, l, u) = (self.p[j], self.q[j], self.low[j], self.upp[j]);
        let (a, b) = (self.alpha[j], self.beta[j]);
        if a >= b {
            return a;
        }
        let grad = |x: f64| p / ((u - x) * (u - x)) - q / ((x - l) * (x - l)) + t;
        if t == 0.0 {
            let (sp, sq) = (libm::sqrt(p), libm::sqrt(q));
            return ((sp * l + sq * u) / (sp + sq)).clamp(a, b);
        }
        if grad(a) >= 0.0 {
            return a;
        }
        if grad(b) <= 0.0 {
            return b;
        }
        // The gradient is strictly increasing on (L, U): safeguarded Newton.
        let (mut lo, mut hi) = (a, b);
        let mut x = 0.5 * (a + b);
        for _ in 0..100 {
            let g = grad(x);
            if g == 0.0 {
                return x;
            }
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let dg = 2.0 * p / ((u - x) * (u - x) * (u - x)) + 2.0 * q / ((x - l) * (x - l) * (x - l));
            let mut next = x - g / dg;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || hi - lo <= 1e-15 * (1.0 + x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }

    fn solve_all(&self, coefficients: Option<&[f64]>, mu: f64, out: &mut [f64]) {
        for (j, slot) in out.iter_mut().enumerate() {
            let t = coefficients.map_or(0.0, |a| mu * a[j]);
            *slot = self.solve_variable(j, t);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Computes the next iterate. Pure: the returned state replaces `state`.
pub fn mma_update(
    problem: &BoxConstrainedProblem<'_>,
    state: &AsymptoteState,
    settings: &MmaSettings,
) -> Result<(Vec<f64>, AsymptoteState)> {
    problem.validate()?;
    let n = problem.x.len();
    let x: Vec<f64> = (0..n)
        .map(|j| problem.x[j].clamp(problem.lower[j], problem.upper[j]))
        .collect();
    let iteration = state.iteration + 1;
    let history_ok = state.xold1.len() == n && state.xold2.len() == n && state.low.len() == n;

    let mut sub = Subproblem {
        p: vec![0.0; n],
        q: vec![0.0; n],
        low: vec![0.0; n],
        upp: vec![0.0; n],
        alpha: vec![0.0; n],
        beta: vec![0.0; n],
    };
    for j in 0..n {
        let range = (problem.upper[j] - problem.lower[j]).max(1e-5);
        let (low, upp) = if iteration <= 2 || !history_ok {
            (
                x[j] - settings.asymptote_init * range,
                x[j] + settings.asymptote_init * range,
            )
        } else {
            let trend = (x[j] - state.xold1[j]) * (state.xold1[j] - state.xold2[j]);
            let factor = if trend > 0.0 {
                settings.asymptote_increase
            } else if trend < 0.0 {
                settings.asymptote_decrease
            } else {
                1.0
            };
            let low = x[j] - factor * (state.xold1[j] - state.low[j]);
            let upp = x[j] + factor * (state.upp[j] - state.xold1[j]);
            (
                low.clamp(
                    x[j] - settings.asymptote_max * range,
                    x[j] - settings.asymptote_min * range,
                ),
                upp.clamp(
                    x[j] + settings.asymptote_min * range,
                    x[j] + settings.asymptote_max * range,
                ),
            )
        };
        sub.low[j] = low;
        sub.upp[j] = upp;
        sub.alpha[j] = (low + settings.albefa * (x[j] - low))
            .max(x[j] - settings.move_limit * range)
            .max(problem.lower[j]);
        sub.beta[j] = (upp - settings.albefa * (upp - x[j]))
            .min(x[j] + settings.move_limit * range)
            .min(problem.upper[j]);
        let df = problem.gradient[j];
        let (p0, q0) = (df.max(0.0), (-df).max(0.0));
        let pq = 0.001 * (p0 + q0) + settings.raa0 / range;
        sub.p[j] = (p0 + pq) * (upp - x[j]) * (upp - x[j]);
        sub.q[j] = (q0 + pq) * (x[j] - low) * (x[j] - low);
    }

    let mut next = vec![0.0; n];
    match problem.constraint {
        None => sub.solve_all(None, 0.0, &mut next),
        Some(c) => solve_dual(&sub, c, &mut next)?,
    }

    let new_state = AsymptoteState {
        xold2: if history_ok || state.xold1.len() == n {
            state.xold1.clone()
        } else {
            x.clone()
        },
        xold1: x,
        low: sub.low,
        upp: sub.upp,
        iteration,
    };
    Ok((next, new_state))
}

fn solve_dual(sub: &Subproblem, c: LinearConstraint<'_>, out: &mut [f64]) -> Result<()> {
    let a = c.coefficients;
    let b = c.bound;
    let tol = DUAL_TOLERANCE * b.abs().max(1.0);
    let attainable: f64 = a
        .iter()
        .enumerate()
        .map(|(j, &aj)| if aj > 0.0 { aj * sub.alpha[j] } else { aj * sub.beta[j] })
        .sum();
    if attainable > b + tol {
        return Err(Error::Infeasible {
            required: b,
            attainable,
        });
    }
    sub.solve_all(Some(a), 0.0, out);
    if dot(a, out) <= b + tol {
        return Ok(());
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut bracketed = false;
    for _ in 0..2100 {
        sub.solve_all(Some(a), hi, out);
        if dot(a, out) <= b + tol {
            bracketed = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    if !bracketed {
        return Err(Error::Bracketing {
            target: b,
            low: lo,
            high: hi,
        });
    }
    // `out` holds the feasible point at `hi`.
    let mut trial = vec![0.0; out.len()];
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        sub.solve_all(Some(a), mid, &mut trial);
        let g = dot(a, &trial) - b;
        if g <= tol {
            hi = mid;
            out.copy_from_slice(&trial);
            if g >= -tol {
                break;
            }
        } else {
            lo = mid;
        }
    }
    Ok(())
}
