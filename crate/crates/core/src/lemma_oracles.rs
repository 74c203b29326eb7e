//! Numerical oracles for the integral inequalities behind the kernel
//! estimates.
//!
//! * [`lemma31_scaled`]: `a^alpha b^beta int_0^inf (sqrt t + a)^-alpha
//!   (sqrt t + b)^-(beta+gamma) t^(gamma/2 - 1) dt`, bounded when
//!   `alpha + beta > 0`, `beta > 0`, `gamma > 0`.
//! * [`lemma32r_ratio`]: the Gaussian integral of
//!   `|y|^alpha (|y|+1)^-beta |y1|^gamma (|y1|+1)^-omega` over the plane,
//!   divided by `(|x|+1)^(alpha-beta) (|x1|+1)^(gamma-omega)`.
//! * [`lemma32s_ratio`]: the same over a wedge with `rho(y)` in place of
//!   `|y1|`.
//!
//! Parameters violating the hypotheses are run through a shell probe; a
//! divergent integral comes back as [`Error::Divergent`], anything else as
//! [`Error::Precondition`].

use std::cell::RefCell;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boundary_distance_unchecked, ConeDomain};
use crate::quad::{adaptive_with_breaks, Tolerance};

/// Relative tolerance of every oracle quadrature.
pub const ORACLE_REL_TOL: f64 = 1e-10;
/// The Gaussian box has half-width `GAUSS_RADIUS / sqrt(sigma)`.
pub const GAUSS_RADIUS: f64 = 8.0;
const MAX_SHELLS: usize = 64;
/// Shell ratio at or above which the tail counts as non-summable.
const DIVERGENT_RATIO: f64 = 1.0 - 1e-7;

/// Which hypotheses hold; always derived from the exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HypothesisFlags {
    /// `alpha + beta > 0`, `beta > 0`, `gamma > 0`.
    pub scaled_integral: bool,
    /// `sigma > 0`, `alpha + gamma > -d`, `gamma > -1`.
    pub gaussian_integral: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub sigma: f64,
    pub d: usize,
}

impl LemmaParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, omega: f64, sigma: f64) -> Result<Self> {
        if [alpha, beta, gamma, omega, sigma].iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("lemma exponents must be finite".into()));
        }
        Ok(LemmaParams { alpha, beta, gamma, omega, sigma, d: 2 })
    }

    pub fn flags(&self) -> HypothesisFlags {
        HypothesisFlags {
            scaled_integral: self.alpha + self.beta > 0.0 && self.beta > 0.0 && self.gamma > 0.0,
            gaussian_integral: self.sigma > 0.0 && self.alpha + self.gamma > -(self.d as f64) && self.gamma > -1.0,
        }
    }

    fn box_radius(&self) -> f64 {
        GAUSS_RADIUS / self.sigma.sqrt()
    }
}

/// `ln(1 + e^v)` without overflow.
fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn tol() -> Tolerance {
    Tolerance { abs: 0.0, rel: ORACLE_REL_TOL, max_intervals: 4000 }
}

/// Sum `int f` over `[start - 2^(k+1) + 1, start - 2^k + 1]` style shells
/// moving away from `start` in direction `dir` until they are negligible.
fn dyadic_tail(f: &impl Fn(f64) -> f64, start: f64, dir: f64, scale: f64, what: &str) -> Result<f64> {
    let mut total = 0.0;
    let mut inner = 0.0;
    for k in 0..MAX_SHELLS {
        let outer = 2f64.powi(k as i32);
        let (a, b) = (start + dir * inner, start + dir * outer);
        let s = match adaptive_with_breaks(f, &[a.min(b), a.max(b)], tol()) {
            Ok(q) if q.value.is_finite() => q.value,
            _ => return Err(Error::Divergent(format!("shell quadrature blows up as {what}"))),
        };
        total += s;
        inner = outer;
        if s.abs() <= 1e-17 * (scale + total.abs()) && k >= 2 {
            return Ok(total);
        }
    }
    Err(Error::Divergent(format!("shell contributions do not decay as {what}")))
}

/// Scaled left side of the first inequality, integrated in `u = ln t`.
fn time_integral_value(p: &LemmaParams, a: f64, b: f64) -> Result<f64> {
    let (la, lb) = (a.ln(), b.ln());
    // a^alpha b^beta t f(t), with each factor written through softplus
    let f = |u: f64| {
        let h = 0.5 * u;
        (-(p.alpha * softplus(h - la)) - p.beta * softplus(h - lb) - p.gamma * softplus(lb - h)).exp()
    };
    let (lo, hi) = (2.0 * lb.min(la) - 1.0, 2.0 * lb.max(la) + 1.0);
    let mut breaks = vec![lo, 2.0 * lb, 2.0 * la, hi];
    breaks.sort_by(f64::total_cmp);
    let middle = adaptive_with_breaks(f, &breaks, tol())?.value;
    let left = dyadic_tail(&f, lo, -1.0, middle, "t -> 0")?;
    let right = dyadic_tail(&f, hi, 1.0, middle, "t -> infinity")?;
    let v = middle + left + right;
    if !v.is_finite() {
        return Err(Error::Divergent("integral overflowed".into()));
    }
    Ok(v)
}

/// `a^alpha b^beta int_0^inf (sqrt t + a)^-alpha (sqrt t + b)^-(beta+gamma) t^(gamma/2-1) dt`.
///
/// Split at `t = b^2` and `t = a^2`; the tails are summed shell by shell.
pub fn lemma31_scaled(p: &LemmaParams, a: f64, b: f64) -> Result<f64> {
    if !(b > 0.0 && a >= b && a.is_finite()) {
        return Err(Error::Precondition(format!("need a >= b > 0, got a={a}, b={b}")));
    }
    let value = time_integral_value(p, a, b);
    if p.flags().scaled_integral {
        return value;
    }
    match value {
        Err(e @ Error::Divergent(_)) => Err(e),
        _ => Err(Error::Precondition(format!(
            "need alpha+beta > 0, beta > 0, gamma > 0; got ({}, {}, {})",
            p.alpha, p.beta, p.gamma
        ))),
    }
}

/// Runs a nested quadrature, carrying the first inner failure out.
struct Nested {
    err: RefCell<Option<Error>>,
}

impl Nested {
    fn new() -> Self {
        Nested { err: RefCell::new(None) }
    }

    fn inner(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.err.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }

    fn finish(self, r: Result<f64>) -> Result<f64> {
        if let Some(e) = self.err.into_inner() {
            return Err(e);
        }
        r
    }
}

fn radial_weight(p: &LemmaParams, r: f64) -> f64 {
    r.powf(p.alpha) * (r + 1.0).powf(-p.beta)
}

fn boundary_weight(p: &LemmaParams, rho: f64) -> f64 {
    rho.powf(p.gamma) * (rho + 1.0).powf(-p.omega)
}

fn sorted_breaks(mut v: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    v.retain(|x| *x > lo && *x < hi);
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Plane integrand integrated over `y2` for fixed `y1`.
fn plane_inner(p: &LemmaParams, x: [f64; 2], y1: f64) -> Result<f64> {
    let rad = p.box_radius();
    let (lo, hi) = (x[1] - rad, x[1] + rad);
    let a = y1.abs();
    let g = |y2: f64| radial_weight(p, y1.hypot(y2)) * (-p.sigma * (y2 - x[1]).powi(2)).exp();
    let breaks = sorted_breaks(vec![0.0, -a, a, x[1]], lo, hi);
    let tol = Tolerance { rel: 0.01 * ORACLE_REL_TOL, ..tol() };
    Ok(adaptive_with_breaks(g, &breaks, tol)?.value * boundary_weight(p, a) * (-p.sigma * (y1 - x[0]).powi(2)).exp())
}

/// Left side of the plane inequality over `y1` in `[lo, hi]`.
fn plane_lhs_on(p: &LemmaParams, x: [f64; 2], lo: f64, hi: f64) -> Result<f64> {
    let nested = Nested::new();
    let f = |y1: f64| nested.inner(plane_inner(p, x, y1));
    let breaks = sorted_breaks(vec![0.0, x[0]], lo, hi);
    let r = adaptive_with_breaks(f, &breaks, tol()).map(|q| q.value);
    nested.finish(r)
}

/// `int_{R^2} |y|^a (|y|+1)^-b |y1|^g (|y1|+1)^-w exp(-sigma |x-y|^2) dy`
/// over the box of half-width `8/sqrt(sigma)` around `x`.
pub fn lemma32r_lhs(p: &LemmaParams, x: [f64; 2]) -> Result<f64> {
    let rad = p.box_radius();
    plane_lhs_on(p, x, x[0] - rad, x[0] + rad)
}

/// Dyadic shells toward a singular set; `shell(lo, hi)` integrates the
/// region at distance `[lo, hi]`.
fn singular_probe(shell: impl Fn(f64, f64) -> Result<f64>, what: &str) -> Result<()> {
    let mut prev = f64::NAN;
    for k in 0..48 {
        let hi = 2f64.powi(-k);
        let s = match shell(0.5 * hi, hi) {
            Ok(s) if s.is_finite() => s,
            Err(Error::NumericalFailure(_)) | Ok(_) => {
                return Err(Error::Divergent(format!("shell quadrature blows up near {what}")));
            }
            Err(e) => return Err(e),
        };
        if k >= 40 && s >= DIVERGENT_RATIO * prev {
            return Err(Error::Divergent(format!("shell integrals do not decay near {what}")));
        }
        prev = s;
    }
    Ok(())
}

fn gaussian_precondition(p: &LemmaParams) -> Error {
    Error::Precondition(format!(
        "need sigma > 0, alpha+gamma > -{}, gamma > -1; got sigma={}, alpha={}, gamma={}",
        p.d, p.sigma, p.alpha, p.gamma
    ))
}

/// Left side over `(|x|+1)^(alpha-beta) (|x1|+1)^(gamma-omega)`.
pub fn lemma32r_ratio(p: &LemmaParams, x: [f64; 2]) -> Result<f64> {
    if !p.flags().gaussian_integral {
        if p.sigma > 0.0 {
            // shells in |y1| toward the line y1 = 0, which also contain the origin
            singular_probe(
                |lo, hi| Ok(plane_lhs_on(p, x, lo, hi)? + plane_lhs_on(p, x, -hi, -lo)?),
                "y1 = 0",
            )?;
        }
        return Err(gaussian_precondition(p));
    }
    let lhs = lemma32r_lhs(p, x)?;
    let norm = x[0].hypot(x[1]);
    Ok(lhs / ((norm + 1.0).powf(p.alpha - p.beta) * (x[0].abs() + 1.0).powf(p.gamma - p.omega)))
}

/// Wedge integrand integrated over the angle for fixed radius.
fn wedge_inner(p: &LemmaParams, kappa: f64, x: [f64; 2], r: f64, gap_range: Option<(f64, f64)>) -> Result<f64> {
    let half = 0.5 * kappa;
    let rad = p.box_radius();
    let xr = x[0].hypot(x[1]);
    let xa = x[1].atan2(x[0]);
    // angles beyond this offset from x are outside the Gaussian box
    let mut reach = if xr > rad && r > 0.0 { (rad / xr).min(1.0).asin() + 1e-9 } else { PI };
    if xa.abs() + reach > PI {
        // the window wraps around the negative axis
        reach = 2.0 * PI;
    }
    // integrate each half in the gap variable so nodes never land on the edge
    let tol = Tolerance { rel: 0.01 * ORACLE_REL_TOL, ..tol() };
    let mut total = 0.0;
    for sign in [-1.0, 1.0] {
        let g = |gap: f64| {
            let eta = sign * (half - gap);
            let rho = boundary_distance_unchecked(r, gap);
            let d2 = r * r + xr * xr - 2.0 * r * xr * (eta - xa).cos();
            boundary_weight(p, rho) * (-p.sigma * d2).exp()
        };
        let (mut lo, mut hi) = gap_range.unwrap_or((0.0, half));
        // gaps whose angle is out of reach of the Gaussian box contribute nothing
        let (e_lo, e_hi) = (xa - reach, xa + reach);
        let (g_a, g_b) = if sign > 0.0 { (half - e_hi, half - e_lo) } else { (half + e_lo, half + e_hi) };
        lo = lo.max(g_a);
        hi = hi.min(g_b);
        if hi <= lo {
            continue;
        }
        let g_x = half - sign * xa;
        let breaks = sorted_breaks(vec![0.5 * PI, g_x], lo, hi);
        total += adaptive_with_breaks(g, &breaks, tol)?.value;
    }
    Ok(total * radial_weight(p, r) * r)
}

fn wedge_lhs_on(p: &LemmaParams, kappa: f64, x: [f64; 2], r_lo: f64, r_hi: f64, gaps: Option<(f64, f64)>) -> Result<f64> {
    let nested = Nested::new();
    let f = |r: f64| nested.inner(wedge_inner(p, kappa, x, r, gaps));
    let xr = x[0].hypot(x[1]);
    let breaks = sorted_breaks(vec![xr], r_lo, r_hi);
    let r = adaptive_with_breaks(f, &breaks, tol()).map(|q| q.value);
    nested.finish(r)
}

/// `int_D |y|^a (|y|+1)^-b rho(y)^g (rho(y)+1)^-w exp(-sigma |x-y|^2) dy` for
/// the wedge of opening `kappa`, in polar coordinates. `x` may lie outside
/// the wedge; it only centres the Gaussian.
pub fn lemma32s_lhs(p: &LemmaParams, kappa: f64, x: [f64; 2]) -> Result<f64> {
    ConeDomain::wedge(kappa)?;
    let rad = p.box_radius();
    let xr = x[0].hypot(x[1]);
    wedge_lhs_on(p, kappa, x, (xr - rad).max(0.0), xr + rad, None)
}

/// Left side over `(|x|+1)^(alpha-beta) (rho(x)+1)^(gamma-omega)` for `x`
/// in the wedge closure.
pub fn lemma32s_ratio(p: &LemmaParams, kappa: f64, x: [f64; 2]) -> Result<f64> {
    let domain = ConeDomain::wedge(kappa)?;
    let xr = x[0].hypot(x[1]);
    let xa = x[1].atan2(x[0]);
    if xa.abs() > 0.5 * kappa * (1.0 + 1e-12) {
        return Err(Error::DomainMembership(format!("angle {xa} outside the wedge of opening {kappa}")));
    }
    if !p.flags().gaussian_integral {
        if p.sigma > 0.0 {
            let rad = p.box_radius();
            singular_probe(|lo, hi| wedge_lhs_on(p, kappa, x, lo, hi, None), "the vertex")?;
            singular_probe(
                |lo, hi| wedge_lhs_on(p, kappa, x, (xr - rad).max(0.0), xr + rad, Some((lo, hi))),
                "the edges",
            )?;
        }
        return Err(gaussian_precondition(p));
    }
    let _ = domain;
    let rho = boundary_distance_unchecked(xr, 0.5 * kappa - xa.abs());
    let lhs = lemma32s_lhs(p, kappa, x)?;
    Ok(lhs / ((xr + 1.0).powf(p.alpha - p.beta) * (rho + 1.0).powf(p.gamma - p.omega)))
}

/// One oracle evaluation in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSample {
    pub point: Vec<f64>,
    pub ratio: f64,
}

/// Supremum over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub sup: f64,
    pub argmax: Vec<f64>,
    pub samples: Vec<OracleSample>,
}

impl Sweep {
    fn from_samples(samples: Vec<OracleSample>) -> Result<Sweep> {
        let best = samples
            .iter()
            .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
            .ok_or_else(|| Error::InvalidParameter("empty sample set".into()))?;
        Ok(Sweep { sup: best.ratio, argmax: best.point.clone(), samples: samples.clone() })
    }
}

/// `n` values of `a/b` log-spaced in `[1, max_ratio]`.
pub fn ratio_grid(n: usize, max_ratio: f64) -> Vec<f64> {
    (0..n).map(|i| max_ratio.powf(i as f64 / (n.max(2) - 1) as f64)).collect()
}

/// Points with `|x|` log-spaced in `[r_lo, r_hi]` and `n_angle` angles
/// spaced uniformly over `[-half, half]` including both ends. Doubling the
/// number of intervals in both directions gives a superset.
pub fn polar_grid(n_r: usize, r_lo: f64, r_hi: f64, n_angle: usize, half: f64) -> Vec<[f64; 2]> {
    let mut pts = Vec::with_capacity(n_r * n_angle);
    for i in 0..n_r {
        let r = r_lo * (r_hi / r_lo).powf(i as f64 / (n_r.max(2) - 1) as f64);
        for j in 0..n_angle {
            let a = if n_angle == 1 { 0.0 } else { -half + j as f64 * 2.0 * half / (n_angle - 1) as f64 };
            pts.push([r * a.cos(), r * a.sin()]);
        }
    }
    pts
}

pub fn lemma31_sweep(p: &LemmaParams, ratios: &[f64]) -> Result<Sweep> {
    let samples = ratios
        .par_iter()
        .map(|&q| Ok(OracleSample { point: vec![q], ratio: lemma31_scaled(p, q, 1.0)? }))
        .collect::<Result<Vec<_>>>()?;
    Sweep::from_samples(samples)
}

pub fn lemma32r_sweep(p: &LemmaParams, points: &[[f64; 2]]) -> Result<Sweep> {
    let samples = points
        .par_iter()
        .map(|x| Ok(OracleSample { point: x.to_vec(), ratio: lemma32r_ratio(p, *x)? }))
        .collect::<Result<Vec<_>>>()?;
    Sweep::from_samples(samples)
}

pub fn lemma32s_sweep(p: &LemmaParams, kappa: f64, points: &[[f64; 2]]) -> Result<Sweep> {
    let samples = points
        .par_iter()
        .map(|x| Ok(OracleSample { point: x.to_vec(), ratio: lemma32s_ratio(p, kappa, *x)? }))
        .collect::<Result<Vec<_>>>()?;
    Sweep::from_samples(samples)
}
