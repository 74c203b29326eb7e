//! Critical exponents of conic domains and the admissible weight windows.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ConeDomain;

const LEGENDRE_REL_TOL: f64 = 1e-15;
const BISECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityPair {
    pub nu1: f64,
    pub nu2: f64,
}

impl EllipticityPair {
    pub fn new(nu1: f64, nu2: f64) -> Result<Self> {
        if !(nu1 > 0.0 && nu1 <= nu2 && nu2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ellipticity pair must satisfy 0 < nu1 <= nu2, got ({nu1}, {nu2})"
            )));
        }
        Ok(EllipticityPair { nu1, nu2 })
    }
}

/// Eigenvalue of the base, Laplacian exponents and the ellipticity-robust
/// lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponents {
    pub d: usize,
    #[serde(rename = "Lambda")]
    pub eigenvalue: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// `lambda_c(nu1, nu2)` lower bound, when an ellipticity pair was given.
    pub lambda_c: Option<f64>,
    pub ellipticity: Option<EllipticityPair>,
}

impl CriticalExponents {
    /// Exponents of the Laplacian on `domain`.
    pub fn laplacian(domain: &ConeDomain) -> Result<Self> {
        let eigenvalue = beltrami_eigenvalue(domain)?;
        let d = domain.dim();
        let lambda = lambda_from_eigenvalue(eigenvalue, d);
        Ok(CriticalExponents {
            d,
            eigenvalue,
            lambda_plus: lambda,
            lambda_minus: lambda,
            lambda_c: None,
            ellipticity: None,
        })
    }

    /// Attach the lower bound valid for every operator with ellipticity
    /// constants `nu`.
    pub fn with_ellipticity(mut self, nu: EllipticityPair) -> Self {
        self.lambda_c = Some(lambda_lower_bound(nu, self.eigenvalue, self.d));
        self.ellipticity = Some(nu);
        self
    }

    /// Exponents guaranteed for every operator in the ellipticity class:
    /// both set to the lower bound.
    pub fn robust(&self) -> Option<CriticalExponents> {
        self.lambda_c.map(|l| CriticalExponents {
            lambda_plus: l,
            lambda_minus: l,
            ..*self
        })
    }
}

/// `P_nu(x)` via `2F1(-nu, nu + 1; 1; (1 - x) / 2)`.
pub fn legendre_p(nu: f64, x: f64) -> Result<f64> {
    let z = 0.5 * (1.0 - x);
    if !(0.0..1.0).contains(&z) {
        return Err(Error::InvalidParameter(format!(
            "hypergeometric series needs -1 < x <= 1, got {x}"
        )));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut scale = 1.0_f64;
    for k in 0..2_000_000u32 {
        let k = k as f64;
        term *= (k - nu) * (k + nu + 1.0) / ((k + 1.0) * (k + 1.0)) * z;
        sum += term;
        scale = scale.max(sum.abs()).max(term.abs());
        if term == 0.0 || (k > nu && term.abs() < LEGENDRE_REL_TOL * scale) {
            return Ok(sum);
        }
    }
    Err(Error::NumericalFailure(format!(
        "Legendre series did not converge for nu={nu}, x={x}"
    )))
}

/// Smallest positive degree `nu` with `P_nu(cos alpha) = 0`.
pub fn legendre_first_root(alpha_cap: f64) -> Result<f64> {
    let x = alpha_cap.cos();
    let f = |nu: f64| legendre_p(nu, x);
    // the root sits near j_{0,1}/alpha - 1/2 for small caps
    let step = 0.02_f64.max(0.05 * alpha_cap);
    let upper = 2.0 * (2.405 / alpha_cap + 2.0);
    let mut a = 0.0;
    let mut fa = f(a)?;
    let mut b = step;
    loop {
        let fb = f(b)?;
        if fb == 0.0 {
            return Ok(b);
        }
        if fa * fb < 0.0 {
            break;
        }
        if b > upper {
            return Err(Error::NumericalFailure(format!(
                "no sign change of P_nu(cos {alpha_cap}) for nu in [0, {upper}] (last value {fb:e})"
            )));
        }
        a = b;
        fa = fb;
        b += step;
    }
    while b - a > BISECTION_TOL {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

/// First Dirichlet eigenvalue of the Laplace-Beltrami operator on the base.
pub fn beltrami_eigenvalue(domain: &ConeDomain) -> Result<f64> {
    match *domain {
        ConeDomain::Wedge2D { kappa } => Ok((PI / kappa).powi(2)),
        ConeDomain::CapCone3D { alpha_cap } => {
            let nu = legendre_first_root(alpha_cap)?;
            Ok(nu * (nu + 1.0))
        }
    }
}

/// `-(d-2)/2 + sqrt(Lambda + (d-2)^2/4)`.
pub fn lambda_from_eigenvalue(eigenvalue: f64, d: usize) -> f64 {
    let shift = 0.5 * (d as f64 - 2.0);
    -shift + (eigenvalue + shift * shift).sqrt()
}

/// `max(0, -(d-2)/2 + sqrt(nu1/nu2) sqrt(Lambda + (d-2)^2/4))`.
pub fn lambda_lower_bound(nu: EllipticityPair, eigenvalue: f64, d: usize) -> f64 {
    let shift = 0.5 * (d as f64 - 2.0);
    (-shift + (nu.nu1 / nu.nu2).sqrt() * (eigenvalue + shift * shift).sqrt()).max(0.0)
}

/// Open intervals of admissible `theta` and `Theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightWindow {
    pub p: f64,
    pub d: usize,
    pub theta_lo: f64,
    pub theta_hi: f64,
    #[serde(rename = "Theta_lo")]
    pub big_theta_lo: f64,
    #[serde(rename = "Theta_hi")]
    pub big_theta_hi: f64,
}

/// The inequality a `(theta, Theta)` pair failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowViolation {
    ThetaBelow,
    ThetaAbove,
    BigThetaBelow,
    BigThetaAbove,
}

impl WindowViolation {
    pub fn inequality(&self) -> &'static str {
        match self {
            WindowViolation::ThetaBelow => "θ > p(1−λ⁺)",
            WindowViolation::ThetaAbove => "θ < p(d−1+λ⁻)",
            WindowViolation::BigThetaBelow => "Θ > d−1",
            WindowViolation::BigThetaAbove => "Θ < d−1+p",
        }
    }
}

impl std::fmt::Display for WindowViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.inequality())
    }
}

impl WeightWindow {
    pub fn contains_theta(&self, theta: f64) -> bool {
        self.theta_lo < theta && theta < self.theta_hi
    }

    pub fn contains_big_theta(&self, big_theta: f64) -> bool {
        self.big_theta_lo < big_theta && big_theta < self.big_theta_hi
    }

    /// All violated inequalities, in a fixed order.
    pub fn violations(&self, theta: f64, big_theta: f64) -> Vec<WindowViolation> {
        let mut out = Vec::new();
        if theta <= self.theta_lo {
            out.push(WindowViolation::ThetaBelow);
        }
        if theta >= self.theta_hi {
            out.push(WindowViolation::ThetaAbove);
        }
        if big_theta <= self.big_theta_lo {
            out.push(WindowViolation::BigThetaBelow);
        }
        if big_theta >= self.big_theta_hi {
            out.push(WindowViolation::BigThetaAbove);
        }
        out
    }

    pub fn check(&self, theta: f64, big_theta: f64) -> std::result::Result<(), WindowViolation> {
        match self.violations(theta, big_theta).first() {
            Some(v) => Err(*v),
            None => Ok(()),
        }
    }
}

pub fn weight_windows(p: f64, exps: &CriticalExponents) -> Result<WeightWindow> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {p}")));
    }
    let d = exps.d as f64;
    Ok(WeightWindow {
        p,
        d: exps.d,
        theta_lo: p * (1.0 - exps.lambda_plus),
        theta_hi: p * (d - 1.0 + exps.lambda_minus),
        big_theta_lo: d - 1.0,
        big_theta_hi: d - 1.0 + p,
    })
}

/// Whether `theta = Theta` is admissible.
pub fn theta_equals_theta_feasible(w: &WeightWindow, big_theta: f64) -> bool {
    w.contains_theta(big_theta) && w.contains_big_theta(big_theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: shoot `u'' + cot(t) u' + L u = 0` from the pole
    /// with RK4 and bisect on `L` for `u(alpha) = 0`.
    fn shooting_eigenvalue(alpha: f64) -> f64 {
        let end_value = |l: f64| -> f64 {
            let eps = 1e-6;
            let n = 20_000;
            let h = (alpha - eps) / n as f64;
            let rhs = |t: f64, u: f64, v: f64| (v, -v / t.tan() - l * u);
            let (mut t, mut u, mut v) = (eps, 1.0 - l * eps * eps / 4.0, -l * eps / 2.0);
            for _ in 0..n {
                let k1 = rhs(t, u, v);
                let k2 = rhs(t + h / 2.0, u + h / 2.0 * k1.0, v + h / 2.0 * k1.1);
                let k3 = rhs(t + h / 2.0, u + h / 2.0 * k2.0, v + h / 2.0 * k2.1);
                let k4 = rhs(t + h, u + h * k3.0, v + h * k3.1);
                u += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
                v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
                t += h;
            }
            u
        };
        // first zero: scan upward from small L
        let (mut a, mut b) = (0.1, 0.2);
        while end_value(a) * end_value(b) > 0.0 {
            a = b;
            b *= 1.2;
        }
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if end_value(a) * end_value(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    // frozen from `shooting_eigenvalue(PI / 3.0)`
    const CAP_PI_3_EIGENVALUE: f64 = 4.936_041_865_4;

    #[test]
    fn frozen_cap_value_matches_oracle() {
        let v = shooting_eigenvalue(PI / 3.0);
        assert!((v - CAP_PI_3_EIGENVALUE).abs() < 1e-6);
    }

    #[test]
    fn wedge_eigenvalues() {
        let half = ConeDomain::wedge(PI).unwrap();
        assert!((beltrami_eigenvalue(&half).unwrap() - 1.0).abs() < 1e-15);
        for &k in &[0.5 * PI, PI, 1.5 * PI] {
            let lam = lambda_from_eigenvalue(beltrami_eigenvalue(&ConeDomain::wedge(k).unwrap()).unwrap(), 2);
            assert!((lam - PI / k).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_eigenvalues() {
        let hemi = ConeDomain::cap(0.5 * PI).unwrap();
        let nu = legendre_first_root(0.5 * PI).unwrap();
        assert!((nu - 1.0).abs() < 1e-9);
        assert!((beltrami_eigenvalue(&hemi).unwrap() - 2.0).abs() < 1e-8);
        let third = beltrami_eigenvalue(&ConeDomain::cap(PI / 3.0).unwrap()).unwrap();
        assert!(third > 2.0);
        assert!((third - CAP_PI_3_EIGENVALUE).abs() < 1e-7);
        for &alpha in &[0.3, 1.0, 2.0, 2.8] {
            let lam = beltrami_eigenvalue(&ConeDomain::cap(alpha).unwrap()).unwrap();
            let oracle = shooting_eigenvalue(alpha);
            assert!((lam - oracle).abs() < 1e-6 * oracle.max(1.0), "alpha={alpha}");
        }
    }

    #[test]
    fn legendre_integer_degrees() {
        for &x in &[-0.9, -0.2, 0.0, 0.5, 0.99] {
            assert!((legendre_p(1.0, x).unwrap() - x).abs() < 1e-14);
            let p2 = 0.5 * (3.0 * x * x - 1.0);
            assert!((legendre_p(2.0, x).unwrap() - p2).abs() < 1e-14);
        }
    }

    #[test]
    fn lambda_examples() {
        assert!((lambda_from_eigenvalue(1.0, 2) - 1.0).abs() < 1e-15);
        assert!((lambda_from_eigenvalue(2.0, 3) - 1.0).abs() < 1e-15);
        assert!((lambda_from_eigenvalue(4.0, 2) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_examples() {
        let same = EllipticityPair::new(2.0, 2.0).unwrap();
        assert!((lambda_lower_bound(same, 1.0, 2) - 1.0).abs() < 1e-15);
        let quarter = EllipticityPair::new(1.0, 4.0).unwrap();
        assert!((lambda_lower_bound(quarter, 1.0, 2) - 0.5).abs() < 1e-15);
        let tiny = EllipticityPair::new(1e-12, 1.0).unwrap();
        assert_eq!(lambda_lower_bound(tiny, 2.0, 3), 0.0);
        assert!(EllipticityPair::new(2.0, 1.0).is_err());
    }

    #[test]
    fn lower_bound_is_monotone_and_reduces_to_laplacian() {
        for &l in &[0.3, 1.0, 2.0, 7.0] {
            for d in 2..=3 {
                let eq = lambda_lower_bound(EllipticityPair::new(1.0, 1.0).unwrap(), l, d);
                assert!((eq - lambda_from_eigenvalue(l, d)).abs() < 1e-15);
                let mut prev = -1.0;
                for i in 1..=20 {
                    let v = lambda_lower_bound(EllipticityPair::new(i as f64 / 20.0, 1.0).unwrap(), l, d);
                    assert!(v >= prev);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn eigenvalue_is_monotone_in_the_aperture() {
        let mut prev = f64::INFINITY;
        for i in 1..12 {
            let alpha = 0.25 * i as f64;
            let l = beltrami_eigenvalue(&ConeDomain::cap(alpha).unwrap()).unwrap();
            assert!(l < prev);
            prev = l;
        }
        let mut prev = f64::INFINITY;
        for i in 1..12 {
            let l = beltrami_eigenvalue(&ConeDomain::wedge(0.5 * i as f64).unwrap()).unwrap();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn lambda_is_increasing_and_positive() {
        for d in 2..=3 {
            let mut prev = 0.0;
            for i in 1..100 {
                let v = lambda_from_eigenvalue(0.1 * i as f64, d);
                assert!(v > prev);
                prev = v;
            }
        }
    }

    fn wedge_window(kappa: f64, p: f64) -> WeightWindow {
        let e = CriticalExponents::laplacian(&ConeDomain::wedge(kappa).unwrap()).unwrap();
        weight_windows(p, &e).unwrap()
    }

    #[test]
    fn window_examples() {
        let w = wedge_window(PI, 2.0);
        assert!((w.theta_lo - 0.0).abs() < 1e-14 && (w.theta_hi - 4.0).abs() < 1e-14);
        assert_eq!((w.big_theta_lo, w.big_theta_hi), (1.0, 3.0));
        assert!(theta_equals_theta_feasible(&w, 2.0));

        let half = CriticalExponents {
            d: 2,
            eigenvalue: 0.25,
            lambda_plus: 0.5,
            lambda_minus: 0.5,
            lambda_c: None,
            ellipticity: None,
        };
        let w = weight_windows(5.0, &half).unwrap();
        assert!((w.theta_lo - 2.5).abs() < 1e-14 && (w.theta_hi - 7.5).abs() < 1e-14);
        assert!(!theta_equals_theta_feasible(&w, 2.0));

        let w = wedge_window(0.5 * PI, 2.0);
        assert!((w.theta_lo + 2.0).abs() < 1e-14 && (w.theta_hi - 6.0).abs() < 1e-14);
    }

    #[test]
    fn window_endpoints_are_infeasible() {
        let w = wedge_window(PI, 2.0);
        assert!(!theta_equals_theta_feasible(&w, 1.0));
        assert!(!theta_equals_theta_feasible(&w, 3.0));
        assert_eq!(w.check(0.0, 2.0), Err(WindowViolation::ThetaBelow));
        assert_eq!(w.check(2.0, 3.0), Err(WindowViolation::BigThetaAbove));
        assert!(weight_windows(1.0, &CriticalExponents::laplacian(&ConeDomain::wedge(PI).unwrap()).unwrap()).is_err());
    }

    #[test]
    fn wide_wedges_lose_theta_equal_big_theta_for_large_p() {
        let w = wedge_window(1.5 * PI, 8.0);
        assert_eq!(w.check(2.0, 2.0), Err(WindowViolation::ThetaBelow));
        assert_eq!(WindowViolation::ThetaBelow.inequality(), "θ > p(1−λ⁺)");
    }
}
