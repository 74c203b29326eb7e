//! Dirichlet heat kernel of the Laplacian on a planar wedge.
//!
//! Separation of variables gives
//! `G(t; x, y) = (2/kappa) sum_k sin_k(eta) sin_k(eta') H_{nu_k}(t, r, r')`
//! with `nu_k = k pi / kappa`, `sin_k(eta) = sin(nu_k (eta + kappa/2))` and
//! the radial mode kernel
//! `H_nu(t, r, r') = (1/(2t)) exp(-(r-r')^2/(4t)) e^{-z} I_nu(z)`, `z = r r'/(2t)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{boundary_distance_unchecked, ConeDomain, ConePoint};
use crate::quad::{adaptive_with_breaks, Tolerance};
use crate::special::bessel_i_scaled;

/// Gaussian factors below `exp(-GAUSS_CUT)` are treated as zero.
const GAUSS_CUT: f64 = 745.0;
/// Above this `z` the series loses relative accuracy to cancellation.
const SERIES_MAX_Z: f64 = 5.0;
/// Images this close to angle 0 or pi get half weight.
const IMAGE_TIE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WedgeHeatKernel {
    pub kappa: f64,
    /// Hard cap on the number of series terms.
    pub k_max: usize,
    pub t_floor: f64,
    /// Series stops once the Bessel envelope drops below this fraction of
    /// the absolute partial sum.
    pub rel_tol: f64,
}

impl WedgeHeatKernel {
    pub fn new(kappa: f64) -> Result<Self> {
        ConeDomain::wedge(kappa)?;
        Ok(WedgeHeatKernel { kappa, k_max: 200_000, t_floor: 1e-6, rel_tol: 1e-14 })
    }

    pub fn domain(&self) -> ConeDomain {
        ConeDomain::Wedge2D { kappa: self.kappa }
    }

    pub fn order(&self, k: usize) -> f64 {
        k as f64 * PI / self.kappa
    }

    /// Angular eigenfunction `sin(nu_k (eta + kappa/2))`.
    pub fn angular_mode(&self, k: usize, eta: f64) -> f64 {
        (self.order(k) * (eta + 0.5 * self.kappa)).sin()
    }

    /// `H_nu(t, r, r')`.
    pub fn radial_mode(nu: f64, t: f64, r: f64, rp: f64) -> f64 {
        let g = (r - rp) * (r - rp) / (4.0 * t);
        if g > GAUSS_CUT {
            return 0.0;
        }
        (-g).exp() * bessel_i_scaled(nu, r * rp / (2.0 * t)) / (2.0 * t)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= self.t_floor) {
            return Err(Error::UnderflowGuard(format!(
                "t = {t:e} is below the kernel floor {:e}",
                self.t_floor
            )));
        }
        Ok(())
    }

    fn check_angle(&self, eta: f64) -> Result<bool> {
        let half = 0.5 * self.kappa;
        if eta.abs() > half * (1.0 + 1e-12) {
            return Err(Error::DomainMembership(format!(
                "angle {eta} is outside (-{half}, {half})"
            )));
        }
        Ok(eta.abs() < half)
    }

    /// Kernel in polar data `(r, eta)`, `(r', eta')`.
    pub fn eval_polar(&self, t: f64, r: f64, eta: f64, rp: f64, etap: f64) -> Result<f64> {
        self.check_time(t)?;
        let inside = self.check_angle(eta)? & self.check_angle(etap)?;
        if !inside || r <= 0.0 || rp <= 0.0 {
            return Ok(0.0);
        }
        let g = (r - rp) * (r - rp) / (4.0 * t);
        if g > GAUSS_CUT {
            return Ok(0.0);
        }
        let z = r * rp / (2.0 * t);
        let phi = PI * (eta + 0.5 * self.kappa) / self.kappa;
        let phip = PI * (etap + 0.5 * self.kappa) / self.kappa;
        let s = if z <= SERIES_MAX_Z {
            self.mode_sum_series(z, eta, etap)?
        } else {
            0.5 * (self.scaled_cosine_sum(z, phi - phip)? - self.scaled_cosine_sum(z, phi + phip)?)
        };
        Ok((-g).exp() * s / (self.kappa * t))
    }

    /// `sum_k e^{-z} I_{nu_k}(z) sin_k(eta) sin_k(eta')` summed directly.
    fn mode_sum_series(&self, z: f64, eta: f64, etap: f64) -> Result<f64> {
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        for k in 1..=self.k_max {
            let env = bessel_i_scaled(self.order(k), z);
            let term = env * self.angular_mode(k, eta) * self.angular_mode(k, etap);
            sum += term;
            abs_sum += term.abs();
            if env <= self.rel_tol * abs_sum || env == 0.0 {
                return Ok(sum);
            }
        }
        Err(Error::NumericalFailure(format!(
            "kernel series not converged after {} terms (z={z})",
            self.k_max
        )))
    }

    /// `e^{-z} (sum_{k>=1} I_{k beta}(z) cos(k psi) + I_0(z)/2)` with
    /// `beta = pi/kappa`, from the Schlafli integral for `I_nu`: a finite sum
    /// of image Gaussians plus a rapidly decaying diffraction integral.
    fn scaled_cosine_sum(&self, z: f64, psi: f64) -> Result<f64> {
        let beta = PI / self.kappa;
        let mut images = 0.0;
        let m_max = (0.5 * beta).ceil() as i64 + 2;
        for sign in [1.0, -1.0] {
            for m in -m_max..=m_max {
                let theta = (sign * psi + 2.0 * PI * m as f64) / beta;
                if theta < -IMAGE_TIE || theta > PI + IMAGE_TIE {
                    continue;
                }
                let w = if theta.abs() <= IMAGE_TIE || (theta - PI).abs() <= IMAGE_TIE { 0.5 } else { 1.0 };
                images += w * (z * (theta.cos() - 1.0)).exp();
            }
        }
        let mut total = images / (2.0 * beta);
        if 2.0 * z < GAUSS_CUT {
            let a = beta * PI;
            // signed distance of a +- psi to the nearest multiple of 2 pi; where it
            // vanishes an image sits at angle pi and the integrand has a
            // Lorentzian `d / (beta^2 u^2 + d^2)` at u = 0, removed analytically
            let signed = |x: f64| (x + PI).rem_euclid(2.0 * PI) - PI;
            // a tie with the half-weighted image counts as d = 0
            let d = [signed(a + psi), signed(a - psi)].map(|d| if d.abs() <= IMAGE_TIE * beta { 0.0 } else { d });
            let e2z = (-2.0 * z).exp();
            let integrand = |u: f64| -> f64 {
                let q = (-beta * u).exp();
                let gauss = (-z * (1.0 + u.cosh())).exp();
                let mut sum = 0.0;
                for x in d {
                    if x == 0.0 {
                        continue;
                    }
                    let h = (0.5 * x).sin();
                    let den = (1.0 - q) * (1.0 - q) + 4.0 * q * h * h;
                    let model = x / (beta * beta * u * u + x * x);
                    sum += if den == 0.0 { 0.0 } else { gauss * q * x.sin() / den } - e2z * model;
                }
                sum
            };
            let u_max = (1.0 + 45.0 / z).acosh();
            let mut breaks = vec![0.0];
            let mut w = d[0].abs().min(d[1].abs()).max(1e-18) / beta;
            while w < u_max {
                breaks.push(w);
                w *= 8.0;
            }
            breaks.push(u_max);
            let tol = Tolerance { abs: 1e-16 * e2z, rel: 1e-12, max_intervals: 2000 };
            let mut b = adaptive_with_breaks(integrand, &breaks, tol)?.value;
            for di in d {
                if di != 0.0 {
                    b += e2z / beta * (beta * u_max / di).atan();
                }
            }
            total -= b / (2.0 * PI);
        }
        Ok(total)
    }

    pub fn eval(&self, t: f64, x: &ConePoint, y: &ConePoint) -> Result<f64> {
        if x.dim != 2 || y.dim != 2 {
            return Err(Error::InvalidParameter("wedge kernel takes planar points".into()));
        }
        self.eval_polar(t, x.r, x.angle, y.r, y.angle)
    }

    /// `int_0^inf H_nu(t, r, r') r' dr'` by adaptive quadrature.
    pub fn radial_mode_mass(nu: f64, t: f64, r: f64) -> Result<f64> {
        let l = 2.0 * (GAUSS_CUT * t).sqrt().min(40.0 * t.sqrt());
        let lo = (r - l).max(0.0);
        let hi = r + l;
        let f = |rp: f64| WedgeHeatKernel::radial_mode(nu, t, r, rp) * rp;
        let tol = Tolerance { abs: 1e-15, rel: 1e-11, max_intervals: 4000 };
        Ok(adaptive_with_breaks(f, &[lo, r, hi], tol)?.value)
    }

    /// `int_D G(t; x, y) dy`. The angular integral is done exactly, leaving
    /// one radial quadrature per odd mode.
    pub fn kernel_mass(&self, t: f64, x: &ConePoint) -> Result<f64> {
        self.check_time(t)?;
        if !self.check_angle(x.angle)? || x.r <= 0.0 {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        for k in (1..=self.k_max).step_by(2) {
            let nu = self.order(k);
            let m = WedgeHeatKernel::radial_mode_mass(nu, t, x.r)?;
            let env = 4.0 / (self.kappa * nu) * m;
            let term = env * self.angular_mode(k, x.angle);
            sum += term;
            abs_sum += term.abs();
            if env <= 1e-13 * abs_sum {
                return Ok(sum);
            }
        }
        Err(Error::NumericalFailure("mass series not converged".into()))
    }
}

/// Free heat kernel `(4 pi t)^{-1} exp(-|x-y|^2/(4t))`.
pub fn free_kernel(t: f64, x: &ConePoint, y: &ConePoint) -> f64 {
    (-x.distance(y).powi(2) / (4.0 * t)).exp() / (4.0 * PI * t)
}

/// Half-plane kernel `{x_1 > 0}` by the method of images, written to avoid
/// cancellation near the boundary.
pub fn half_plane_image_kernel(t: f64, x: &ConePoint, y: &ConePoint) -> f64 {
    let (x1, y1) = (x.coords[0], y.coords[0]);
    -free_kernel(t, x, y) * (-(x1 * y1) / t).exp_m1()
}

/// Parameters of the Gaussian envelope bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelBoundParams {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub sigma: f64,
}

impl KernelBoundParams {
    pub fn new(kappa: f64, lambda_plus: f64, lambda_minus: f64, sigma: f64) -> Result<Self> {
        let cap = PI / kappa;
        for (name, l) in [("lambda_plus", lambda_plus), ("lambda_minus", lambda_minus)] {
            if !(l > 0.0 && l < cap) {
                return Err(Error::InvalidParameter(format!("{name} = {l} must lie in (0, {cap})")));
            }
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        Ok(KernelBoundParams { lambda_plus, lambda_minus, sigma })
    }

    /// `lambda = fraction * pi / kappa` on both sides and the default `sigma = 1/8`.
    pub fn fraction_of_critical(kappa: f64, fraction: f64) -> Result<Self> {
        let l = fraction * PI / kappa;
        KernelBoundParams::new(kappa, l, l, 0.125)
    }

    /// Natural log of `t^{-1} R_x^{l+ - 1} R_y^{l- - 1} J_x J_y exp(-sigma |x-y|^2 / t)`,
    /// with `R = |x|/(|x|+sqrt t)` and `J = rho/(rho+sqrt t)`.
    pub fn ln_envelope(&self, t: f64, x: &ConePoint, y: &ConePoint, domain: &ConeDomain) -> f64 {
        let st = t.sqrt();
        let rho_x = boundary_distance_unchecked(x.r, domain.angular_gap(x));
        let rho_y = boundary_distance_unchecked(y.r, domain.angular_gap(y));
        let ln_r = |r: f64| (r / (r + st)).ln();
        -t.ln() + (self.lambda_plus - 1.0) * ln_r(x.r) + (self.lambda_minus - 1.0) * ln_r(y.r) + ln_r(rho_x) + ln_r(rho_y)
            - self.sigma * x.distance(y).powi(2) / t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRatio {
    pub ratio: f64,
    /// The envelope underflowed; `ratio` is reported as 0.
    pub underflow: bool,
}

/// `G(t; x, y)` divided by the envelope with constant 1.
pub fn bound_ratio(k: &WedgeHeatKernel, t: f64, x: &ConePoint, y: &ConePoint, b: &KernelBoundParams) -> Result<BoundRatio> {
    let g = k.eval(t, x, y)?;
    let domain = k.domain();
    if domain.angular_gap(x) <= 0.0 || domain.angular_gap(y) <= 0.0 {
        return Ok(BoundRatio { ratio: 0.0, underflow: false });
    }
    let ln_env = b.ln_envelope(t, x, y, &domain);
    if ln_env < -700.0 {
        return Ok(BoundRatio { ratio: 0.0, underflow: true });
    }
    Ok(BoundRatio { ratio: g * (-ln_env).exp(), underflow: false })
}

/// One sampled triple of the envelope study.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundSample {
    pub t: f64,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub ratio: f64,
    pub underflow: bool,
}

/// Draw the `i`-th triple of a nested sample: the first `n` draws do not
/// depend on how many are requested.
///
/// `t` is log-uniform on `[1e-4, 10]`, `|x|` log-uniform on `[1e-3, 10]`
/// with the boundary distance in units of `sqrt t` log-uniform as well.
/// Even draws put `y = x + sqrt(t) xi` with `|xi|` log-uniform on
/// `[1e-3, 4]`; odd draws take `y` independently like `x`.
pub fn sample_triples(kappa: f64, n: usize, seed: u64) -> Vec<(f64, ConePoint, ConePoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 * kappa;
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.gen_range(lo.ln()..hi.ln())).exp();
    let draw_point = |rng: &mut ChaCha8Rng, t: f64| -> ConePoint {
        let r = log_uniform(rng, 1e-3, 10.0);
        // angular gap from a log-uniform boundary distance, capped at the bisector
        let rel = log_uniform(rng, 1e-3, 1e2) * t.sqrt() / r;
        let gap = if rel >= 1.0 { half } else { rel.asin().min(half) };
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        ConePoint::polar(r, side * (half - gap).max(0.0).min(half * (1.0 - 1e-12)))
    };
    let domain = ConeDomain::Wedge2D { kappa };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = log_uniform(&mut rng, 1e-4, 10.0);
        let x = draw_point(&mut rng, t);
        let y = if i % 2 == 0 {
            let len = log_uniform(&mut rng, 1e-3, 4.0) * t.sqrt();
            let dir: f64 = rng.gen_range(0.0..2.0 * PI);
            let cand = ConePoint::from_xy(x.coords[0] + len * dir.cos(), x.coords[1] + len * dir.sin());
            if domain.contains_interior(&cand) {
                cand
            } else {
                ConePoint::from_xy(x.coords[0] - len * dir.cos(), x.coords[1] - len * dir.sin())
            }
        } else {
            draw_point(&mut rng, t)
        };
        let y = if domain.contains_interior(&y) { y } else { x };
        out.push((t, x, y));
    }
    out
}

/// Bound ratios on [`sample_triples`].
pub fn sample_bound_ratios(k: &WedgeHeatKernel, b: &KernelBoundParams, n: usize, seed: u64) -> Result<Vec<BoundSample>> {
    use rayon::prelude::*;
    sample_triples(k.kappa, n, seed)
        .par_iter()
        .map(|(t, x, y)| {
            let br = bound_ratio(k, *t, x, y, b)?;
            Ok(BoundSample {
                t: *t,
                x: [x.coords[0], x.coords[1]],
                y: [y.coords[0], y.coords[1]],
                ratio: br.ratio,
                underflow: br.underflow,
            })
        })
        .collect()
}

/// Least-squares slope of `ln G(t; (r, 0), y)` against `ln r` on
/// log-spaced radii in `[r_lo, r_hi]`.
pub fn vertex_slope(k: &WedgeHeatKernel, t: f64, y: &ConePoint, r_lo: f64, r_hi: f64, n: usize) -> Result<f64> {
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let r = r_lo * (r_hi / r_lo).powf(i as f64 / (n - 1) as f64);
        let g = k.eval_polar(t, r, 0.0, y.r, y.angle)?;
        if g <= 0.0 {
            return Err(Error::NumericalFailure(format!("kernel vanished at r={r}")));
        }
        pts.push((r.ln(), g.ln()));
    }
    Ok(linear_slope(&pts))
}

pub(crate) fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
