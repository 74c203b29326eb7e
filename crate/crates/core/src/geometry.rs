//! Conic domains over arcs of S^1 and circular caps of S^2.
//!
//! A wedge has its bisector on the positive `x` axis, so its angular
//! coordinate is `eta = atan2(y, x)` with `|eta| < kappa / 2`. A cap cone has
//! its axis on the positive `z` axis and polar half-angle `alpha_cap`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ConeDomain {
    Wedge2D { kappa: f64 },
    CapCone3D { alpha_cap: f64 },
}

impl ConeDomain {
    pub fn wedge(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 2.0 * PI) {
            return Err(Error::InvalidParameter(format!(
                "wedge opening must lie in (0, 2pi), got {kappa}"
            )));
        }
        Ok(ConeDomain::Wedge2D { kappa })
    }

    pub fn cap(alpha_cap: f64) -> Result<Self> {
        if !(alpha_cap > 0.0 && alpha_cap < PI) {
            return Err(Error::InvalidParameter(format!(
                "cap half-angle must lie in (0, pi), got {alpha_cap}"
            )));
        }
        Ok(ConeDomain::CapCone3D { alpha_cap })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConeDomain::Wedge2D { .. } => 2,
            ConeDomain::CapCone3D { .. } => 3,
        }
    }

    /// Largest admissible angular coordinate: `kappa/2` or `alpha_cap`.
    pub fn half_aperture(&self) -> f64 {
        match *self {
            ConeDomain::Wedge2D { kappa } => 0.5 * kappa,
            ConeDomain::CapCone3D { alpha_cap } => alpha_cap,
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match *self {
            ConeDomain::Wedge2D { kappa } => Some(kappa),
            ConeDomain::CapCone3D { .. } => None,
        }
    }

    /// Angular distance from the direction of `x` to the edge of the base,
    /// positive inside.
    pub fn angular_gap(&self, x: &ConePoint) -> f64 {
        self.half_aperture() - x.angle.abs()
    }

    pub fn contains_closure(&self, x: &ConePoint) -> bool {
        x.dim == self.dim() && (x.r == 0.0 || self.angular_gap(x) >= -1e-14)
    }

    pub fn contains_interior(&self, x: &ConePoint) -> bool {
        x.dim == self.dim() && x.r > 0.0 && self.angular_gap(x) > 0.0
    }
}

/// A point of R^2 or R^3 with cached polar data.
///
/// `angle` is the signed polar angle `eta` for d = 2 and the polar angle
/// from the cone axis for d = 3; `azimuth` is only meaningful for d = 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePoint {
    pub coords: [f64; 3],
    pub dim: usize,
    pub r: f64,
    pub angle: f64,
    pub azimuth: f64,
}

impl ConePoint {
    pub fn cartesian(x: &[f64]) -> Result<Self> {
        match x.len() {
            2 => Ok(Self::from_xy(x[0], x[1])),
            3 => Ok(Self::from_xyz(x[0], x[1], x[2])),
            n => Err(Error::InvalidParameter(format!(
                "points must be 2- or 3-dimensional, got {n} coordinates"
            ))),
        }
    }

    pub fn from_xy(x: f64, y: f64) -> Self {
        ConePoint {
            coords: [x, y, 0.0],
            dim: 2,
            r: x.hypot(y),
            angle: y.atan2(x),
            azimuth: 0.0,
        }
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Self {
        let r = (x * x + y * y + z * z).sqrt();
        let angle = if r > 0.0 { (z / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
        ConePoint {
            coords: [x, y, z],
            dim: 3,
            r,
            angle,
            azimuth: y.atan2(x),
        }
    }

    pub fn polar(r: f64, eta: f64) -> Self {
        ConePoint {
            coords: [r * eta.cos(), r * eta.sin(), 0.0],
            dim: 2,
            r,
            angle: eta,
            azimuth: 0.0,
        }
    }

    pub fn spherical(r: f64, polar: f64, azimuth: f64) -> Self {
        let s = polar.sin();
        ConePoint {
            coords: [r * s * azimuth.cos(), r * s * azimuth.sin(), r * polar.cos()],
            dim: 3,
            r,
            angle: polar,
            azimuth,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        ConePoint {
            coords: self.coords.map(|c| c * lambda),
            r: self.r * lambda,
            ..*self
        }
    }

    pub fn distance(&self, other: &ConePoint) -> f64 {
        self.coords
            .iter()
            .zip(other.coords.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Distance to the vertex, `|x|`.
pub fn rho_vertex(x: &ConePoint) -> f64 {
    x.r
}

/// Distance to the boundary of the cone.
///
/// The nearest boundary point is the foot on the closest boundary ray (or
/// boundary generator of the cap) when the angular gap is at most `pi/2`,
/// and the vertex otherwise.
pub fn rho_boundary(x: &ConePoint, domain: &ConeDomain) -> Result<f64> {
    if !domain.contains_closure(x) {
        return Err(Error::DomainMembership(format!(
            "{:?} is not in the closure of {domain:?}",
            x.as_slice()
        )));
    }
    Ok(boundary_distance_unchecked(x.r, domain.angular_gap(x)))
}

pub(crate) fn boundary_distance_unchecked(r: f64, gap: f64) -> f64 {
    if gap <= 0.0 {
        0.0
    } else if gap <= 0.5 * PI {
        r * gap.sin()
    } else {
        r
    }
}

/// Stereographic projection from the south pole `(0, .., 0, -1)`:
/// `x = (x', x_d) -> 2 x' / (1 + x_d)`.
pub fn stereographic(x: &[f64]) -> Result<Vec<f64>> {
    let (last, head) = x
        .split_last()
        .ok_or_else(|| Error::InvalidParameter("empty vector".into()))?;
    let denom = 1.0 + last;
    if denom.abs() < 1e-14 {
        return Err(Error::SingularInput(
            "stereographic projection is undefined at the south pole".into(),
        ));
    }
    Ok(head.iter().map(|c| 2.0 * c / denom).collect())
}

/// For a unit vector in the closure of the base, return the distance to
/// the cone boundary and the chordal distance to the spherical boundary of
/// the base.
pub fn sphere_distance_pair(x: &ConePoint, domain: &ConeDomain) -> Result<(f64, f64)> {
    if (x.r - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "expected a unit vector, got |x| = {}",
            x.r
        )));
    }
    let d_cone = rho_boundary(x, domain)?;
    let gap = domain.angular_gap(x).max(0.0);
    Ok((d_cone, 2.0 * (0.5 * gap).sin()))
}

/// Boundary-flattening chart of a cap cone around the boundary direction
/// with azimuth `azimuth`.
///
/// The stereographic image of the cap is a disk of radius `2 tan(alpha/2)`;
/// it is flattened with (distance to the circle, arc length) coordinates.
#[derive(Debug, Clone, Copy)]
pub struct FlatteningChart {
    alpha_cap: f64,
    azimuth: f64,
    disk_radius: f64,
    /// Chordal radius of the chart around the base point.
    pub r0: f64,
    pub base_point: [f64; 3],
}

impl FlatteningChart {
    pub fn new(domain: &ConeDomain, azimuth: f64) -> Result<Self> {
        let alpha_cap = match *domain {
            ConeDomain::CapCone3D { alpha_cap } => alpha_cap,
            ConeDomain::Wedge2D { .. } => {
                return Err(Error::Capability(
                    "flattening charts are built for 3-D cap cones".into(),
                ))
            }
        };
        // quarter of the chord to the south pole, and to the cap centre
        let r0 = 0.5 * (0.5 * alpha_cap).cos().min((0.5 * alpha_cap).sin());
        let p = ConePoint::spherical(1.0, alpha_cap, azimuth);
        Ok(FlatteningChart {
            alpha_cap,
            azimuth,
            disk_radius: 2.0 * (0.5 * alpha_cap).tan(),
            r0,
            base_point: p.coords,
        })
    }

    pub fn alpha_cap(&self) -> f64 {
        self.alpha_cap
    }

    pub fn in_chart(&self, x: &ConePoint) -> bool {
        if x.dim != 3 || x.r == 0.0 {
            return false;
        }
        let chord: f64 = (0..3)
            .map(|i| (x.coords[i] / x.r - self.base_point[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        chord < self.r0
    }

    /// `(|x| psi_p(phi(x/|x|)), |x|)`.
    pub fn apply(&self, x: &ConePoint) -> Result<[f64; 3]> {
        if !self.in_chart(x) {
            return Err(Error::ChartDomain(format!(
                "{:?} is not within chordal radius {} of the base point",
                x.as_slice(),
                self.r0
            )));
        }
        let unit: Vec<f64> = x.coords.iter().map(|c| c / x.r).collect();
        let y = stereographic(&unit)?;
        let radial = y[0].hypot(y[1]);
        let mut dbeta = y[1].atan2(y[0]) - self.azimuth;
        dbeta = (dbeta + PI).rem_euclid(2.0 * PI) - PI;
        Ok([
            x.r * (self.disk_radius - radial),
            x.r * self.disk_radius * dbeta,
            x.r,
        ])
    }
}

/// `flatten(p, x, D)` with `p` the boundary direction of azimuth `azimuth`.
pub fn flatten(azimuth: f64, x: &ConePoint, domain: &ConeDomain) -> Result<[f64; 3]> {
    FlatteningChart::new(domain, azimuth)?.apply(x)
}

/// Homogeneous regularized distance `psi(x) = |x| s(angle)`.
///
/// `s = c cos(pi eta / kappa)` on wedges and `c cos(pi phi / (2 alpha))` on
/// caps, with `c` the bisector value of `rho` at unit radius.
#[derive(Debug, Clone, Copy)]
pub struct RegularizedDistance {
    pub domain: ConeDomain,
    scale: f64,
}

impl RegularizedDistance {
    pub fn new(domain: ConeDomain) -> Self {
        let half = domain.half_aperture();
        let scale = if half <= 0.5 * PI { half.sin() } else { 1.0 };
        RegularizedDistance { domain, scale }
    }

    pub fn profile(&self, angle: f64) -> f64 {
        let half = self.domain.half_aperture();
        self.scale * (0.5 * PI * angle / half).cos()
    }

    pub fn eval(&self, x: &ConePoint) -> Result<f64> {
        if !self.domain.contains_interior(x) {
            return Err(Error::Positivity(format!(
                "psi is only positive strictly inside the cone, got {:?}",
                x.as_slice()
            )));
        }
        Ok(x.r * self.profile(x.angle))
    }

    /// Value at polar data without membership checks (mesh sweeps).
    pub fn eval_polar(&self, r: f64, angle: f64) -> f64 {
        r * self.profile(angle)
    }

    /// `max(sup psi/rho, sup rho/psi)` over an angular sweep with `n`
    /// samples; exact for all radii by homogeneity.
    pub fn comparability_constant(&self, n: usize) -> f64 {
        let half = self.domain.half_aperture();
        let mut worst = 1.0_f64;
        for i in 0..n {
            let angle = -half + half * 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = boundary_distance_unchecked(1.0, half - angle.abs());
            let ratio = self.profile(angle) / rho;
            worst = worst.max(ratio).max(1.0 / ratio);
        }
        worst
    }
}

/// Lower end of the support of the bump.
pub const BUMP_LO: f64 = 0.5 / E;
/// Upper end of the support of the bump.
pub const BUMP_HI: f64 = 2.0 * E;

/// Polynomial bump supported in `(1/(2e), 2e)`, positive on `[1/e, e]`.
pub fn bump(u: f64) -> f64 {
    let w = (2.0 * u - (BUMP_LO + BUMP_HI)) / (BUMP_HI - BUMP_LO);
    let base = 1.0 - w * w;
    if base <= 0.0 {
        0.0
    } else {
        base * base * base
    }
}

/// Derivative of [`bump`].
pub fn bump_derivative(u: f64) -> f64 {
    let span = BUMP_HI - BUMP_LO;
    let w = (2.0 * u - (BUMP_LO + BUMP_HI)) / span;
    let base = 1.0 - w * w;
    if base <= 0.0 {
        0.0
    } else {
        3.0 * base * base * (-2.0 * w) * (2.0 / span)
    }
}

/// The dyadic cutoffs `zeta_k(x) = zeta(e^k psi(x))`.
#[derive(Debug, Clone, Copy)]
pub struct DyadicCutoffs {
    pub psi: RegularizedDistance,
}

impl DyadicCutoffs {
    pub fn new(psi: RegularizedDistance) -> Self {
        DyadicCutoffs { psi }
    }

    pub fn zeta_k(&self, k: i32, x: &ConePoint) -> Result<f64> {
        Ok(bump((k as f64).exp() * self.psi.eval(x)?))
    }

    /// `min_t sum_k zeta(e^{k+t})`, i.e. the uniform lower bound of the
    /// partition sum; computed on one period of `log psi`.
    pub fn lower_constant(&self) -> f64 {
        let partition = |t: f64| -> f64 { (-4..=4).map(|k| bump((k as f64 + t).exp())).sum() };
        let n = 4000;
        let (mut best_t, mut best) = (0.0, f64::INFINITY);
        for i in 0..n {
            let t = i as f64 / n as f64;
            let v = partition(t);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        // golden-section polish around the grid minimum
        let (mut a, mut b) = (best_t - 1.0 / n as f64, best_t + 1.0 / n as f64);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if partition(c) < partition(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.min(partition(0.5 * (a + b)))
    }

    /// Integer `k0` with `supp zeta_k` inside `{e^{-k-k0} < rho < e^{-k+k0}}`.
    pub fn support_index_width(&self) -> i32 {
        let n = self.psi.comparability_constant(4096);
        let lo = (n / BUMP_LO).ln();
        let hi = (BUMP_HI * n).ln();
        lo.max(hi).ceil() as i32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vertex_distance_examples() {
        assert_eq!(rho_vertex(&ConePoint::from_xy(3.0, 4.0)), 5.0);
        assert_eq!(rho_vertex(&ConePoint::from_xy(0.0, 0.0)), 0.0);
        let p = ConePoint::from_xyz(1.0, 1.0, 1.0);
        assert!((rho_vertex(&p) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn boundary_distance_examples() {
        let quarter = ConeDomain::wedge(0.5 * PI).unwrap();
        let d = rho_boundary(&ConePoint::polar(1.0, 0.0), &quarter).unwrap();
        // foot of the perpendicular on the ray at angle pi/4
        assert!((d - (0.5 * PI * 0.5).sin()).abs() < 1e-15);
        assert!((d - 0.707_106_781_186_547_5).abs() < 1e-12);

        let wide = ConeDomain::wedge(1.5 * PI).unwrap();
        let d = rho_boundary(&ConePoint::polar(2.0, 0.0), &wide).unwrap();
        assert_eq!(d, 2.0);

        let on_ray = ConePoint::polar(3.0, 0.25 * PI);
        assert!(rho_boundary(&on_ray, &quarter).unwrap().abs() < 1e-15);
    }

    #[test]
    fn boundary_distance_rejects_outside_points() {
        let quarter = ConeDomain::wedge(0.5 * PI).unwrap();
        let err = rho_boundary(&ConePoint::polar(1.0, 1.0), &quarter).unwrap_err();
        assert!(matches!(err, Error::DomainMembership(_)));
    }

    #[test]
    fn boundary_distance_matches_brute_force_on_wedges() {
        // nearest point on either ray, sampled densely, versus the formula
        for &kappa in &[0.4, 0.5 * PI, PI, 1.5 * PI, 1.9 * PI] {
            let d = ConeDomain::wedge(kappa).unwrap();
            for i in 0..13 {
                let eta = -0.5 * kappa + kappa * (i as f64 + 0.5) / 13.0;
                let x = ConePoint::polar(1.7, eta);
                let mut best = f64::INFINITY;
                for side in [-1.0, 1.0] {
                    let dir = (side * 0.5 * kappa).sin_cos();
                    for j in 0..=20000 {
                        let s = j as f64 * 4.0 / 20000.0;
                        let q = ConePoint::from_xy(s * dir.1, s * dir.0);
                        best = best.min(x.distance(&q));
                    }
                }
                let exact = rho_boundary(&x, &d).unwrap();
                assert!((exact - best).abs() < 2e-4, "kappa={kappa} eta={eta}");
            }
        }
    }

    #[test]
    fn cap_distance_uses_polar_angle() {
        let hemi = ConeDomain::cap(0.5 * PI).unwrap();
        let x = ConePoint::from_xyz(0.0, 0.0, 2.0);
        assert!((rho_boundary(&x, &hemi).unwrap() - 2.0).abs() < 1e-15);
        let tilted = ConePoint::spherical(1.0, 0.3, 1.1);
        let d = rho_boundary(&tilted, &hemi).unwrap();
        // half-space z > 0: distance is the z coordinate
        assert!((d - tilted.coords[2]).abs() < 1e-14);
    }

    #[test]
    fn stereographic_examples() {
        assert_eq!(stereographic(&[0.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(stereographic(&[1.0, 0.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        let y = stereographic(&[0.0, 0.6, 0.8]).unwrap();
        assert!((y[1] - 2.0 / 3.0).abs() < 1e-15 && y[0] == 0.0);
        assert!(matches!(
            stereographic(&[0.0, 0.0, -1.0]),
            Err(Error::SingularInput(_))
        ));
    }

    #[test]
    fn sphere_distance_examples() {
        let half = ConeDomain::wedge(PI).unwrap();
        let (dc, ds) = sphere_distance_pair(&ConePoint::polar(1.0, 0.0), &half).unwrap();
        assert!((dc - 1.0).abs() < 1e-15 && (ds - 2f64.sqrt()).abs() < 1e-15);
        let (dc, ds) = sphere_distance_pair(&ConePoint::polar(1.0, 0.5 * PI), &half).unwrap();
        assert!(dc.abs() < 1e-15 && ds.abs() < 1e-15);
        let hemi = ConeDomain::cap(0.5 * PI).unwrap();
        let (dc, ds) = sphere_distance_pair(&ConePoint::from_xyz(0.0, 0.0, 1.0), &hemi).unwrap();
        assert!((dc - 1.0).abs() < 1e-15 && (ds - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn flatten_examples() {
        let cap = ConeDomain::cap(1.0).unwrap();
        let chart = FlatteningChart::new(&cap, 0.4).unwrap();
        let p = ConePoint::spherical(3.0, 1.0, 0.4);
        assert!(chart.apply(&p).unwrap()[0].abs() < 1e-14);
        let x = ConePoint::spherical(1.3, 0.9, 0.45);
        let a = chart.apply(&x).unwrap();
        let b = chart.apply(&x.scaled(2.0)).unwrap();
        for i in 0..3 {
            assert!((b[i] - 2.0 * a[i]).abs() < 1e-13);
        }
        let far = ConePoint::spherical(1.0, 0.1, 2.5);
        assert!(matches!(chart.apply(&far), Err(Error::ChartDomain(_))));
    }

    fn chart_samples(chart: &FlatteningChart, n: usize) -> Vec<ConePoint> {
        // interior directions inside the chart, radii over two decades
        let mut out = Vec::new();
        let alpha = chart.alpha_cap();
        for i in 0..n {
            for j in 0..n {
                let polar = alpha - chart.r0 * (i as f64 + 0.5) / n as f64;
                let az = 0.4 + chart.r0 * (j as f64 / (n - 1) as f64 - 0.5) / alpha.sin();
                let r = 10f64.powf(-1.0 + 2.0 * ((i * n + j) % 7) as f64 / 6.0);
                let x = ConePoint::spherical(r, polar, az);
                if chart.in_chart(&x) {
                    out.push(x);
                }
            }
        }
        out
    }

    #[test]
    fn flatten_is_comparable_to_distances_and_bi_lipschitz() {
        for &alpha in &[0.6, 0.5 * PI, 2.2] {
            let cap = ConeDomain::cap(alpha).unwrap();
            let chart = FlatteningChart::new(&cap, 0.4).unwrap();
            let pts = chart_samples(&chart, 14);
            assert!(pts.len() > 50);
            let mut worst = 1.0_f64;
            for x in &pts {
                let f = chart.apply(x).unwrap();
                let rho = rho_boundary(x, &cap).unwrap();
                let n1 = f[0] / rho;
                let n2 = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt() / x.r;
                worst = worst.max(n1).max(1.0 / n1).max(n2).max(1.0 / n2);
            }
            for (i, x) in pts.iter().enumerate() {
                let y = &pts[(i * 31 + 7) % pts.len()];
                if x.distance(y) < 1e-12 {
                    continue;
                }
                let (fx, fy) = (chart.apply(x).unwrap(), chart.apply(y).unwrap());
                let df = ((fx[0] - fy[0]).powi(2) + (fx[1] - fy[1]).powi(2) + (fx[2] - fy[2]).powi(2))
                    .sqrt();
                let q = df / x.distance(y);
                worst = worst.max(q).max(1.0 / q);
            }
            // chart constants for these apertures sit well below 10
            assert!(worst < 10.0, "alpha={alpha}: N={worst}");
        }
    }

    #[test]
    fn psi_examples() {
        let half = ConeDomain::wedge(PI).unwrap();
        let psi = RegularizedDistance::new(half);
        let x = ConePoint::polar(1.3, 0.2);
        assert!((psi.eval(&x.scaled(2.0)).unwrap() - 2.0 * psi.eval(&x).unwrap()).abs() < 1e-14);
        let b = ConePoint::polar(2.5, 0.0);
        assert!((psi.eval(&b).unwrap() - rho_boundary(&b, &half).unwrap()).abs() < 1e-15);
        assert!(matches!(
            psi.eval(&ConePoint::polar(1.0, 0.5 * PI)),
            Err(Error::Positivity(_))
        ));
        assert!(matches!(
            psi.eval(&ConePoint::polar(0.0, 0.0)),
            Err(Error::Positivity(_))
        ));
    }

    #[test]
    fn psi_derivative_bounds_by_finite_differences() {
        for &kappa in &[0.5 * PI, PI, 1.5 * PI] {
            let d = ConeDomain::wedge(kappa).unwrap();
            let psi = RegularizedDistance::new(d);
            let f = |x: f64, y: f64| psi.eval_polar(x.hypot(y), y.atan2(x));
            let mut n1 = 0.0_f64;
            let mut n2 = 0.0_f64;
            for i in 1..40 {
                let eta = -0.5 * kappa + kappa * i as f64 / 40.0;
                for &r in &[0.01, 1.0, 50.0] {
                    let p = ConePoint::polar(r, eta);
                    let rho = rho_boundary(&p, &d).unwrap();
                    let h = 1e-3 * rho;
                    let (x, y) = (p.coords[0], p.coords[1]);
                    let gx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
                    let gy = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
                    let hxx = (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
                    let hyy = (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h);
                    n1 = n1.max(gx.hypot(gy));
                    n2 = n2.max(rho * hxx.hypot(hyy));
                }
            }
            assert!(n1 < 3.0 && n2 < 10.0, "kappa={kappa}: {n1} {n2}");
        }
    }

    #[test]
    fn partition_lower_constant_matches_brute_force_minimum() {
        let cut = DyadicCutoffs::new(RegularizedDistance::new(ConeDomain::wedge(PI).unwrap()));
        let delta = cut.lower_constant();
        let mut brute = f64::INFINITY;
        for i in 0..200_000 {
            let t = i as f64 / 200_000.0;
            let s: f64 = (-6..=6).map(|k| bump((k as f64 + t).exp())).sum();
            brute = brute.min(s);
        }
        assert!(delta > 0.0);
        assert!((delta - brute).abs() < 1e-8, "{delta} vs {brute}");
    }

    #[test]
    fn bump_is_positive_on_the_core_interval() {
        for i in 0..=1000 {
            let u = (-1.0 + 2.0 * i as f64 / 1000.0).exp();
            assert!(bump(u) > 0.0);
        }
        assert_eq!(bump(BUMP_LO), 0.0);
        assert_eq!(bump(BUMP_HI * 1.0001), 0.0);
        let u = 1.7;
        let h = 1e-6;
        let fd = (bump(u + h) - bump(u - h)) / (2.0 * h);
        assert!((fd - bump_derivative(u)).abs() < 1e-7);
    }

    fn wedge_point() -> impl Strategy<Value = (f64, ConePoint)> {
        (0.05f64..6.2, 0.001f64..0.999, -3.0f64..3.0).prop_map(|(kappa, u, lr)| {
            let eta = kappa * (u - 0.5);
            (kappa, ConePoint::polar(10f64.powf(lr), eta))
        })
    }

    proptest! {
        #[test]
        fn boundary_distance_is_dominated_and_homogeneous(
            (kappa, x) in wedge_point(), lambda in 0.01f64..100.0
        ) {
            let d = ConeDomain::wedge(kappa).unwrap();
            let rho = rho_boundary(&x, &d).unwrap();
            prop_assert!(rho <= rho_vertex(&x) * (1.0 + 1e-15));
            let scaled = rho_boundary(&x.scaled(lambda), &d).unwrap();
            prop_assert!((scaled - lambda * rho).abs() <= 1e-12 * lambda * rho.max(1e-300));
        }

        #[test]
        fn sphere_distances_are_within_factor_two((kappa, x) in wedge_point()) {
            let d = ConeDomain::wedge(kappa).unwrap();
            let u = x.scaled(1.0 / x.r);
            let (dc, ds) = sphere_distance_pair(&u, &d).unwrap();
            prop_assert!(dc <= ds + 1e-14 && ds <= 2.0 * dc + 1e-14);
        }

        #[test]
        fn cap_sphere_distances_are_within_factor_two(
            alpha in 0.05f64..3.1, u in 0.0f64..0.999, az in -3.1f64..3.1
        ) {
            let d = ConeDomain::cap(alpha).unwrap();
            let x = ConePoint::spherical(1.0, alpha * u, az);
            let (dc, ds) = sphere_distance_pair(&x, &d).unwrap();
            prop_assert!(dc <= ds + 1e-14 && ds <= 2.0 * dc + 1e-14);
        }

        #[test]
        fn separated_directions_bound_the_distance(
            a in proptest::array::uniform3(-5.0f64..5.0),
            b in proptest::array::uniform3(-5.0f64..5.0),
            delta in 0.001f64..1.0
        ) {
            let (x, y) = (ConePoint::from_xyz(a[0], a[1], a[2]), ConePoint::from_xyz(b[0], b[1], b[2]));
            prop_assume!(x.r > 1e-6 && y.r > 1e-6);
            let cos = (0..3).map(|i| x.coords[i] * y.coords[i]).sum::<f64>() / (x.r * y.r);
            prop_assume!(cos <= 1.0 - delta);
            let d2 = x.distance(&y).powi(2);
            prop_assert!(delta * (x.r * x.r + y.r * y.r) <= d2 * (1.0 + 1e-12));
        }

        #[test]
        fn psi_is_comparable_and_cutoffs_cover((kappa, x) in wedge_point()) {
            let d = ConeDomain::wedge(kappa).unwrap();
            let psi = RegularizedDistance::new(d);
            let n = psi.comparability_constant(20_000) * (1.0 + 1e-6);
            let ratio = psi.eval(&x).unwrap() / rho_boundary(&x, &d).unwrap();
            prop_assert!(ratio <= n && ratio >= 1.0 / n);
            let cut = DyadicCutoffs::new(psi);
            let total: f64 = (-40..=40).map(|k| cut.zeta_k(k, &x).unwrap()).sum();
            prop_assert!(total >= cut.lower_constant() * (1.0 - 1e-9));
        }
    }
}
