//! One-dimensional smoothing profiles and a finite-difference smoothness checker.
//!
//! `gamma` is the classical flat function `exp(-1/t)`, `lambda_fn` the smooth
//! step built from it, and `xi` the wrinkle profile used by the subdivision
//! map. All three are total on the real line.

use serde::Serialize;

use crate::error::{Error, Result};

/// Width at which [`xi_inv`] stops bisecting.
pub const XI_INV_WIDTH: f64 = 1e-12;

/// Highest derivative order the checker accepts.
pub const MAX_FD_ORDER: usize = 6;

/// `exp(-1/t)` for `t > 0`, zero otherwise.
pub fn gamma(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Closed-form first derivative of [`gamma`].
pub fn gamma_deriv(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp() / (t * t)
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, `γ(t)/(γ(t)+γ(1-t))` between.
pub fn lambda_fn(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = gamma(t);
        let b = gamma(1.0 - t);
        a / (a + b)
    }
}

/// Closed-form first derivative of [`lambda_fn`] (quotient rule).
pub fn lambda_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = gamma(t);
    let b = gamma(1.0 - t);
    let d = a + b;
    (gamma_deriv(t) * b + a * gamma_deriv(1.0 - t)) / (d * d)
}

/// Right inverse of [`lambda_fn`] on `[0, 1]`, by bisection down to adjacent floats.
///
/// Values `y <= 0` map to 0 and `y >= 1` map to 1, which picks the endpoint of
/// each flat fiber.
pub fn lambda_inv(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    bisect_monotone(lambda_fn, y, 0.0, 1.0, 0.0)
}

/// The wrinkle profile.
///
/// Identity on `s <= 1/6` and `s >= 5/6`, `λ(3s-1)/3 + 1/3` on `[1/3, 2/3]`.
/// On `[1/6, 1/3]` it blends `s` into the constant `1/3` with weight
/// `λ(6s-1)`; `[2/3, 5/6]` is the reflection `1 - ξ(1-s)`.
pub fn xi(s: f64) -> f64 {
    const SIXTH: f64 = 1.0 / 6.0;
    const THIRD: f64 = 1.0 / 3.0;
    if s <= SIXTH || s >= 5.0 * SIXTH {
        s
    } else if s < THIRD {
        xi_blend(s)
    } else if s <= 2.0 * THIRD {
        lambda_fn(3.0 * s - 1.0) / 3.0 + THIRD
    } else {
        1.0 - xi_blend(1.0 - s)
    }
}

fn xi_blend(s: f64) -> f64 {
    let w = lambda_fn(6.0 * s - 1.0);
    (1.0 - w) * s + w / 3.0
}

/// Inverse of [`xi`] on `[0, 1]` by bisection to [`XI_INV_WIDTH`].
pub fn xi_inv(y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::domain(format!("xi_inv expects y in [0,1], got {y}")));
    }
    Ok(bisect_monotone(xi, y, 0.0, 1.0, XI_INV_WIDTH))
}

// Smallest-interval bisection for a non-decreasing `f` with f(lo) <= y <= f(hi).
fn bisect_monotone(f: impl Fn(f64) -> f64, y: f64, mut lo: f64, mut hi: f64, width: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= width || mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A named one-dimensional profile with optional closed-form first derivative.
#[derive(Clone, Copy)]
pub struct SmoothProfile {
    pub name: &'static str,
    pub eval: fn(f64) -> f64,
    pub deriv: Option<fn(f64) -> f64>,
}

impl SmoothProfile {
    pub fn gamma() -> Self {
        Self {
            name: "gamma",
            eval: gamma,
            deriv: Some(gamma_deriv),
        }
    }

    pub fn lambda() -> Self {
        Self {
            name: "lambda",
            eval: lambda_fn,
            deriv: Some(lambda_deriv),
        }
    }

    pub fn xi() -> Self {
        Self {
            name: "xi",
            eval: xi,
            deriv: None,
        }
    }

    /// Orders with a closed form; order 0 is the profile itself.
    pub fn analytic_deriv_orders(&self) -> Vec<usize> {
        if self.deriv.is_some() {
            vec![0, 1]
        } else {
            vec![0]
        }
    }
}

impl std::fmt::Debug for SmoothProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothProfile").field("name", &self.name).finish()
    }
}

/// Step ladder for the finite-difference checker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdConfig {
    pub base_step: f64,
    /// Number of step halvings fed into Richardson extrapolation.
    pub levels: usize,
    /// Relative tolerance, floored at an absolute scale of 1.
    pub tolerance: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            base_step: 1e-2,
            levels: 4,
            tolerance: 1e-4,
        }
    }
}

impl FdConfig {
    /// Ladder for probing the seams of `xi`, whose flat zone is about six times
    /// narrower than that of `lambda_fn`.
    pub fn seam() -> Self {
        Self {
            base_step: 2e-3,
            levels: 3,
            tolerance: 1e-4,
        }
    }

    pub fn with_tolerance(self, tolerance: f64) -> Self {
        Self { tolerance, ..self }
    }
}

/// What a derivative estimate is compared against.
#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    /// Forward and backward estimates agree (the derivative exists).
    Exists,
    /// Every estimate matches the given value per order (index 0 is order 1).
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub point: f64,
    pub max_order_tested: usize,
    /// Central Richardson estimate per order, index 0 is order 1.
    pub fd_estimates: Vec<f64>,
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    pub verdict: Vec<Verdict>,
    pub tolerance_used: f64,
}

impl SmoothnessReport {
    pub fn passed(&self) -> bool {
        self.verdict.iter().all(|v| *v == Verdict::Pass)
    }

    pub fn failed(&self) -> bool {
        self.verdict.contains(&Verdict::Fail)
    }

    /// Lowest order whose verdict is not a pass.
    pub fn first_failure(&self) -> Option<usize> {
        self.verdict
            .iter()
            .position(|v| *v != Verdict::Pass)
            .map(|i| i + 1)
    }

    /// Largest deviation measured against the verdict criterion, relative to its scale.
    pub fn worst_deviation(&self, expectation: &Expectation) -> f64 {
        (0..self.max_order_tested)
            .map(|i| deviation(expectation, i, self.forward[i], self.backward[i], self.fd_estimates[i]).0)
            .fold(0.0, f64::max)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn sign(j: usize) -> f64 {
    if j.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn central_difference(f: &dyn Fn(f64) -> f64, x: f64, k: usize, h: f64) -> f64 {
    let half = k as f64 / 2.0;
    let sum: f64 = (0..=k)
        .map(|j| sign(j) * binomial(k, j) * f(x + (half - j as f64) * h))
        .sum();
    sum / h.powi(k as i32)
}

fn forward_difference(f: &dyn Fn(f64) -> f64, x: f64, k: usize, h: f64) -> f64 {
    let sum: f64 = (0..=k)
        .map(|j| sign(k - j) * binomial(k, j) * f(x + j as f64 * h))
        .sum();
    sum / h.powi(k as i32)
}

fn backward_difference(f: &dyn Fn(f64) -> f64, x: f64, k: usize, h: f64) -> f64 {
    let sum: f64 = (0..=k)
        .map(|j| sign(j) * binomial(k, j) * f(x - j as f64 * h))
        .sum();
    sum / h.powi(k as i32)
}

// Richardson table over halved steps; `ratio` is 2 for one-sided and 4 for central stencils.
fn richardson(estimates: &[f64], ratio: f64) -> f64 {
    let mut row = estimates.to_vec();
    let mut factor = ratio;
    for level in 1..row.len() {
        let next: Vec<f64> = (level..row.len())
            .map(|i| row[i] + (row[i] - row[i - 1]) / (factor - 1.0))
            .collect();
        for (slot, v) in row[level..].iter_mut().zip(next) {
            *slot = v;
        }
        factor *= ratio;
    }
    *row.last().unwrap_or(&f64::NAN)
}

fn deviation(expectation: &Expectation, i: usize, fwd: f64, bwd: f64, central: f64) -> (f64, f64) {
    match expectation {
        Expectation::Exists => ((fwd - bwd).abs(), central.abs().max(1.0)),
        Expectation::Values(values) => {
            let e = values.get(i).copied().unwrap_or(0.0);
            let d = (fwd - e).abs().max((bwd - e).abs()).max((central - e).abs());
            (d, e.abs().max(1.0))
        }
    }
}

/// Finite-difference smoothness probe of `f` at `point` for orders `1..=max_order`.
///
/// Each order gets a forward, a backward and a central estimate, each
/// Richardson-extrapolated over `cfg.levels` halvings of `cfg.base_step`. A
/// non-finite evaluation anywhere in a stencil makes that order inconclusive.
pub fn smoothness_check(
    f: impl Fn(f64) -> f64,
    point: f64,
    max_order: usize,
    cfg: &FdConfig,
    expectation: &Expectation,
) -> Result<SmoothnessReport> {
    if max_order == 0 || max_order > MAX_FD_ORDER {
        return Err(Error::domain(format!(
            "max_order must be in 1..={MAX_FD_ORDER}, got {max_order}"
        )));
    }
    if cfg.levels == 0 || !(cfg.base_step > 0.0) || !(cfg.tolerance > 0.0) {
        return Err(Error::domain("finite-difference config must be positive"));
    }
    let f: &dyn Fn(f64) -> f64 = &f;
    let steps: Vec<f64> = (0..cfg.levels)
        .map(|i| cfg.base_step / f64::powi(2.0, i as i32))
        .collect();

    let mut report = SmoothnessReport {
        point,
        max_order_tested: max_order,
        fd_estimates: Vec::with_capacity(max_order),
        forward: Vec::with_capacity(max_order),
        backward: Vec::with_capacity(max_order),
        verdict: Vec::with_capacity(max_order),
        tolerance_used: cfg.tolerance,
    };
    for k in 1..=max_order {
        let central: Vec<f64> = steps.iter().map(|&h| central_difference(f, point, k, h)).collect();
        let fwd: Vec<f64> = steps.iter().map(|&h| forward_difference(f, point, k, h)).collect();
        let bwd: Vec<f64> = steps.iter().map(|&h| backward_difference(f, point, k, h)).collect();
        let finite = central.iter().chain(&fwd).chain(&bwd).all(|v| v.is_finite());
        let (c, fw, bw) = (richardson(&central, 4.0), richardson(&fwd, 2.0), richardson(&bwd, 2.0));
        let verdict = if !finite {
            Verdict::Inconclusive
        } else {
            let (d, scale) = deviation(expectation, k - 1, fw, bw, c);
            if d < cfg.tolerance * scale {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        };
        report.fd_estimates.push(c);
        report.forward.push(fw);
        report.backward.push(bw);
        report.verdict.push(verdict);
    }
    Ok(report)
}
