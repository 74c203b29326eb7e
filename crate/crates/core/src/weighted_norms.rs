//! Mixed-weight norms on a truncated wedge.
//!
//! Fields live on a log-polar grid: `s = ln r` and the angle `eta` are both
//! uniform, boundary nodes included. Quadrature is the trapezoid rule in
//! `(s, eta)` with `dx = r^2 ds deta`; derivatives are second-order
//! differences in `(s, eta)` pushed to Cartesian ones by the chain rule.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boundary_distance_unchecked, bump, ConeDomain, RegularizedDistance, BUMP_HI, BUMP_LO};

/// Highest derivative order supported by the stencils.
pub const MAX_ORDER: usize = 4;

/// `(p, theta, Theta, n)` in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub p: f64,
    pub theta: f64,
    #[serde(rename = "Theta")]
    pub big_theta: f64,
    pub n: usize,
    pub d: usize,
}

impl WeightParams {
    pub fn new(p: f64, theta: f64, big_theta: f64, n: usize) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {p}")));
        }
        if !(theta.is_finite() && big_theta.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite".into()));
        }
        Ok(WeightParams { p, theta, big_theta, n, d: 2 })
    }

    pub fn mu(&self) -> f64 {
        1.0 + (self.theta - self.d as f64) / self.p
    }

    pub fn alpha(&self) -> f64 {
        1.0 + (self.big_theta - self.d as f64) / self.p
    }

    /// Same `p` and `n`, both weights moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        WeightParams {
            theta: self.theta + delta,
            big_theta: self.big_theta + delta,
            ..*self
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        WeightParams { n, ..*self }
    }
}

/// Parameters of a log-polar mesh on `{r_min < r < r_out, |eta| < kappa/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub kappa: f64,
    pub r_min: f64,
    pub r_out: f64,
    /// Number of radial cells.
    pub n_r: usize,
    /// Number of angular cells.
    pub n_eta: usize,
}

impl MeshSpec {
    pub fn new(kappa: f64, r_min: f64, r_out: f64, n_r: usize, n_eta: usize) -> Result<Self> {
        ConeDomain::wedge(kappa)?;
        if !(r_min > 0.0 && r_out > r_min && r_out.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < r_min < r_out, got ({r_min}, {r_out})"
            )));
        }
        if n_r < 4 || n_eta < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 cells per direction, got ({n_r}, {n_eta})"
            )));
        }
        Ok(MeshSpec { kappa, r_min, r_out, n_r, n_eta })
    }

    /// Default desk mesh: `r` in `[1e-3, 8]`, 48 radial cells, 64 angular
    /// cells per `pi` of aperture.
    pub fn desk(kappa: f64) -> Result<Self> {
        let n_eta = ((64.0 * kappa / PI).ceil() as usize).max(8);
        MeshSpec::new(kappa, 1e-3, 8.0, 48, n_eta)
    }

    /// Mesh with log-step exactly `ds`, starting at `r_min` and reaching at
    /// least `r_out`.
    pub fn with_log_step(kappa: f64, r_min: f64, r_out: f64, ds: f64, n_eta: usize) -> Result<Self> {
        if !(ds > 0.0) {
            return Err(Error::InvalidParameter(format!("log step must be positive, got {ds}")));
        }
        let n_r = ((r_out / r_min).ln() / ds - 1e-9).ceil().max(4.0) as usize;
        MeshSpec::new(kappa, r_min, r_min * (n_r as f64 * ds).exp(), n_r, n_eta)
    }

    /// Halve both steps `level` times.
    pub fn refined(&self, level: u32) -> Self {
        let f = 1usize << level;
        MeshSpec {
            n_r: self.n_r * f,
            n_eta: self.n_eta * f,
            ..*self
        }
    }

    pub fn build(&self) -> GradedMesh {
        GradedMesh::new(*self)
    }
}

/// Log-polar mesh with cached node geometry.
#[derive(Debug, Clone)]
pub struct GradedMesh {
    pub spec: MeshSpec,
    pub ds: f64,
    pub deta: f64,
    r: Vec<f64>,
    eta: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    rho: Vec<f64>,
    weight: Vec<f64>,
}

impl GradedMesh {
    pub fn new(spec: MeshSpec) -> Self {
        let ns = spec.n_r + 1;
        let ne = spec.n_eta + 1;
        let s0 = spec.r_min.ln();
        let ds = (spec.r_out.ln() - s0) / spec.n_r as f64;
        let deta = spec.kappa / spec.n_eta as f64;
        let half = 0.5 * spec.kappa;
        let mut r = Vec::with_capacity(ns);
        for i in 0..ns {
            r.push(if i == spec.n_r { spec.r_out } else { (s0 + i as f64 * ds).exp() });
        }
        let eta: Vec<f64> = (0..ne)
            .map(|j| if j == spec.n_eta { half } else { -half + j as f64 * deta })
            .collect();
        let cos = eta.iter().map(|e| e.cos()).collect();
        let sin = eta.iter().map(|e| e.sin()).collect();
        let mut rho = vec![0.0; ns * ne];
        let mut weight = vec![0.0; ns * ne];
        for i in 0..ns {
            let wi = if i == 0 || i == spec.n_r { 0.5 } else { 1.0 };
            for j in 0..ne {
                let wj = if j == 0 || j == spec.n_eta { 0.5 } else { 1.0 };
                let k = i * ne + j;
                let gap = if j == 0 || j == spec.n_eta { 0.0 } else { half - eta[j].abs() };
                rho[k] = boundary_distance_unchecked(r[i], gap);
                weight[k] = wi * wj * ds * deta * r[i] * r[i];
            }
        }
        GradedMesh { spec, ds, deta, r, eta, cos, sin, rho, weight }
    }

    pub fn domain(&self) -> ConeDomain {
        ConeDomain::Wedge2D { kappa: self.spec.kappa }
    }

    pub fn n_s(&self) -> usize {
        self.spec.n_r + 1
    }

    pub fn n_e(&self) -> usize {
        self.spec.n_eta + 1
    }

    pub fn len(&self) -> usize {
        self.n_s() * self.n_e()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of node `(i, j)`; the angular index runs fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_e() + j
    }

    pub fn r_at(&self, i: usize) -> f64 {
        self.r[i]
    }

    pub fn eta_at(&self, j: usize) -> f64 {
        self.eta[j]
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn angles(&self) -> &[f64] {
        &self.eta
    }

    /// Distance to the wedge boundary at each node.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Trapezoid weights including the Jacobian `r^2`.
    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    /// Boundary mask: wedge edges and both truncation circles.
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || i == self.spec.n_r || j == 0 || j == self.spec.n_eta
    }

    /// Cartesian coordinates of node `k`.
    pub fn xy(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k / self.n_e(), k % self.n_e());
        (self.r[i] * self.cos[j], self.r[i] * self.sin[j])
    }

    /// Sample `f(r, eta)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
        let ne = self.n_e();
        (0..self.len())
            .into_par_iter()
            .map(|k| f(self.r[k / ne], self.eta[k % ne]))
            .collect()
    }

    /// Sample `f(x, y)` at every node.
    pub fn sample_xy(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|k| {
                let (x, y) = self.xy(k);
                f(x, y)
            })
            .collect()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::Shape(format!(
                "field has {} samples, mesh has {} nodes",
                v.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// `d/ds`, centred inside and one-sided second order at the ends.
    pub fn d_s(&self, u: &[f64]) -> Vec<f64> {
        let (ns, ne) = (self.n_s(), self.n_e());
        let h2 = 2.0 * self.ds;
        let mut out = vec![0.0; u.len()];
        for j in 0..ne {
            let at = |i: usize| u[i * ne + j];
            out[j] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / h2;
            for i in 1..ns - 1 {
                out[i * ne + j] = (at(i + 1) - at(i - 1)) / h2;
            }
            let l = ns - 1;
            out[l * ne + j] = (3.0 * at(l) - 4.0 * at(l - 1) + at(l - 2)) / h2;
        }
        out
    }

    /// `d/deta`, centred inside and one-sided second order at the edges.
    pub fn d_eta(&self, u: &[f64]) -> Vec<f64> {
        let ne = self.n_e();
        let h2 = 2.0 * self.deta;
        let mut out = vec![0.0; u.len()];
        for (row, o) in u.chunks(ne).zip(out.chunks_mut(ne)) {
            o[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) / h2;
            for j in 1..ne - 1 {
                o[j] = (row[j + 1] - row[j - 1]) / h2;
            }
            let l = ne - 1;
            o[l] = (3.0 * row[l] - 4.0 * row[l - 1] + row[l - 2]) / h2;
        }
        out
    }

    fn d_ss(&self, u: &[f64]) -> Vec<f64> {
        let (ns, ne) = (self.n_s(), self.n_e());
        let hh = self.ds * self.ds;
        let mut out = vec![0.0; u.len()];
        for j in 0..ne {
            let at = |i: usize| u[i * ne + j];
            out[j] = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / hh;
            for i in 1..ns - 1 {
                out[i * ne + j] = (at(i + 1) - 2.0 * at(i) + at(i - 1)) / hh;
            }
            let l = ns - 1;
            out[l * ne + j] = (2.0 * at(l) - 5.0 * at(l - 1) + 4.0 * at(l - 2) - at(l - 3)) / hh;
        }
        out
    }

    fn d_ee(&self, u: &[f64]) -> Vec<f64> {
        let ne = self.n_e();
        let hh = self.deta * self.deta;
        let mut out = vec![0.0; u.len()];
        for (row, o) in u.chunks(ne).zip(out.chunks_mut(ne)) {
            o[0] = (2.0 * row[0] - 5.0 * row[1] + 4.0 * row[2] - row[3]) / hh;
            for j in 1..ne - 1 {
                o[j] = (row[j + 1] - 2.0 * row[j] + row[j - 1]) / hh;
            }
            let l = ne - 1;
            o[l] = (2.0 * row[l] - 5.0 * row[l - 1] + 4.0 * row[l - 2] - row[l - 3]) / hh;
        }
        out
    }

    /// Cartesian gradient `(u_x, u_y)`.
    pub fn gradient(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let us = self.d_s(u);
        let ue = self.d_eta(u);
        let ne = self.n_e();
        let mut ux = vec![0.0; u.len()];
        let mut uy = vec![0.0; u.len()];
        for k in 0..u.len() {
            let (i, j) = (k / ne, k % ne);
            let (c, s, inv_r) = (self.cos[j], self.sin[j], 1.0 / self.r[i]);
            ux[k] = inv_r * (c * us[k] - s * ue[k]);
            uy[k] = inv_r * (s * us[k] + c * ue[k]);
        }
        (ux, uy)
    }

    /// Cartesian Hessian `(u_xx, u_xy, u_yy)`.
    pub fn hessian(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let us = self.d_s(u);
        let ue = self.d_eta(u);
        let uss = self.d_ss(u);
        let uee = self.d_ee(u);
        let use_ = self.d_s(&ue);
        let ne = self.n_e();
        let n = u.len();
        let (mut xx, mut xy, mut yy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let (i, j) = (k / ne, k % ne);
            let (c, s) = (self.cos[j], self.sin[j]);
            let (cc, ss, cs) = (c * c, s * s, c * s);
            let e2 = 1.0 / (self.r[i] * self.r[i]);
            xx[k] = e2 * (cc * uss[k] - 2.0 * cs * use_[k] + ss * uee[k] + (ss - cc) * us[k] + 2.0 * cs * ue[k]);
            yy[k] = e2 * (ss * uss[k] + 2.0 * cs * use_[k] + cc * uee[k] + (cc - ss) * us[k] - 2.0 * cs * ue[k]);
            xy[k] = e2 * (cs * uss[k] + (cc - ss) * use_[k] - cs * uee[k] - 2.0 * cs * us[k] + (ss - cc) * ue[k]);
        }
        (xx, xy, yy)
    }

    /// All Cartesian derivatives up to order `n`: `out[m][b]` is
    /// `d_x^{m-b} d_y^b u`.
    pub fn derivatives(&self, u: &[f64], n: usize) -> Result<Vec<Vec<Vec<f64>>>> {
        if n > MAX_ORDER {
            return Err(Error::Capability(format!(
                "derivatives of order {n} exceed the supported order {MAX_ORDER}"
            )));
        }
        self.check_len(u)?;
        let mut out = vec![vec![u.to_vec()]];
        if n >= 1 {
            let (ux, uy) = self.gradient(u);
            out.push(vec![ux, uy]);
        }
        if n >= 2 {
            let (xx, xy, yy) = self.hessian(u);
            out.push(vec![xx, xy, yy]);
        }
        if n >= 3 {
            let (xxx, xxy) = self.gradient(&out[2][0]);
            let (xyy, yyy) = self.gradient(&out[2][2]);
            out.push(vec![xxx, xxy, xyy, yyy]);
        }
        if n >= 4 {
            let (a, b, c) = self.hessian(&out[2][0]);
            let (_, d, e) = self.hessian(&out[2][2]);
            out.push(vec![a, b, c, d, e]);
        }
        Ok(out)
    }

    /// `sum w |rho^m v|^p r^(theta-Theta) rho^(Theta-d)`.
    ///
    /// Where `rho = 0` and the combined `rho` exponent is negative the
    /// integrand is taken as its linear extrapolation from the two nearest
    /// angular nodes.
    fn weighted_power(&self, v: &[f64], m: usize, w: &WeightParams) -> Result<f64> {
        let e = m as f64 * w.p + w.big_theta - w.d as f64;
        let vertex_exp = w.theta - w.big_theta;
        let ne = self.n_e();
        let integrand = |k: usize| -> f64 {
            let a = v[k].abs();
            if a == 0.0 {
                return 0.0;
            }
            a.powf(w.p) * self.r[k / ne].powf(vertex_exp) * self.rho[k].powf(e)
        };
        let mut total = 0.0;
        for (i, row) in v.chunks(ne).enumerate() {
            if let Some(bad) = row.iter().find(|x| !x.is_finite()) {
                return Err(Error::Data(format!("non-finite sample {bad} in radial row {i}")));
            }
            let base = i * ne;
            for j in 0..ne {
                let k = base + j;
                let val = if self.rho[k] == 0.0 && e < 0.0 {
                    let (a, b) = if j == 0 { (base + 1, base + 2) } else { (k - 1, k - 2) };
                    (2.0 * integrand(a) - integrand(b)).max(0.0)
                } else if self.rho[k] == 0.0 && e == 0.0 {
                    v[k].abs().powf(w.p) * self.r[i].powf(vertex_exp)
                } else {
                    integrand(k)
                };
                total += self.weight[k] * val;
            }
        }
        Ok(total)
    }
}

/// `(int |f|^p rho_o^(theta-Theta) rho^(Theta-d) dx)^(1/p)` on the mesh.
pub fn lp_weighted_norm(f: &[f64], w: &WeightParams, mesh: &GradedMesh) -> Result<f64> {
    mesh.check_len(f)?;
    Ok(mesh.weighted_power(f, 0, w)?.powf(1.0 / w.p))
}

/// Individual terms `||rho^|a| D^a f||` indexed as in
/// [`GradedMesh::derivatives`].
pub fn kn_terms(f: &[f64], w: &WeightParams, mesh: &GradedMesh) -> Result<Vec<Vec<f64>>> {
    let ders = mesh.derivatives(f, w.n)?;
    ders.iter()
        .enumerate()
        .map(|(m, group)| {
            group
                .iter()
                .map(|d| Ok(mesh.weighted_power(d, m, w)?.powf(1.0 / w.p)))
                .collect()
        })
        .collect()
}

/// `sum_{|a| <= n} ||rho^|a| D^a f||_{L_{p,theta,Theta}}`.
pub fn kn_norm(f: &[f64], w: &WeightParams, mesh: &GradedMesh) -> Result<f64> {
    Ok(kn_terms(f, w, mesh)?.iter().flatten().sum())
}

/// Time-indexed samples on a mesh. `values[m]` is the slice at `times[m]`.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub mesh: GradedMesh,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ScalarField {
    pub fn new(mesh: GradedMesh, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::Shape(format!(
                "{} times but {} slices",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Shape("time grid must be strictly increasing".into()));
        }
        for v in &values {
            mesh.check_len(v)?;
        }
        Ok(ScalarField { mesh, times, values })
    }

    pub fn zeros(mesh: GradedMesh, times: Vec<f64>) -> Self {
        let n = mesh.len();
        let values = vec![vec![0.0; n]; times.len()];
        ScalarField { mesh, times, values }
    }

    /// Sample `f(t, r, eta)` on every node and time.
    pub fn from_fn(mesh: GradedMesh, times: Vec<f64>, f: impl Fn(f64, f64, f64) -> f64 + Sync) -> Result<Self> {
        let values = times.iter().map(|&t| mesh.sample(|r, e| f(t, r, e))).collect();
        ScalarField::new(mesh, times, values)
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Slice at time `t` by linear interpolation in time.
    pub fn at_time(&self, t: f64) -> Vec<f64> {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0].clone();
        }
        if t >= *ts.last().unwrap() {
            return self.values.last().unwrap().clone();
        }
        let m = ts.partition_point(|&x| x <= t) - 1;
        let lam = (t - ts[m]) / (ts[m + 1] - ts[m]);
        self.values[m]
            .iter()
            .zip(&self.values[m + 1])
            .map(|(a, b)| (1.0 - lam) * a + lam * b)
            .collect()
    }

    /// Time derivative by differences on the stored grid (centred inside,
    /// one-sided at the ends).
    pub fn time_derivative(&self) -> Result<ScalarField> {
        let m = self.times.len();
        if m < 2 {
            return Err(Error::Shape("need at least two time levels".into()));
        }
        let t = &self.times;
        let diff = |a: usize, b: usize| -> Vec<f64> {
            let h = t[b] - t[a];
            self.values[b].iter().zip(&self.values[a]).map(|(x, y)| (x - y) / h).collect()
        };
        let mut values = Vec::with_capacity(m);
        values.push(diff(0, 1));
        for k in 1..m - 1 {
            values.push(diff(k - 1, k + 1));
        }
        values.push(diff(m - 2, m - 1));
        ScalarField::new(self.mesh.clone(), self.times.clone(), values)
    }

    /// Resample on another time grid by linear interpolation.
    pub fn restrict_times(&self, times: &[f64]) -> Result<ScalarField> {
        let values = times.iter().map(|&t| self.at_time(t)).collect();
        ScalarField::new(self.mesh.clone(), times.to_vec(), values)
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            mesh: self.mesh.clone(),
            times: self.times.clone(),
            values: self.values.iter().map(|v| v.iter().map(|&x| f(x)).collect()).collect(),
        }
    }

    /// Discrete space-time `L_2` norm of the difference, relative to `other`.
    pub fn relative_l2_error(&self, other: &ScalarField) -> Result<f64> {
        same_grid(self, other)?;
        let w = self.mesh.weights();
        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in self.values.iter().zip(&other.values) {
            for k in 0..a.len() {
                num += w[k] * (a[k] - b[k]).powi(2);
                den += w[k] * b[k] * b[k];
            }
        }
        if den == 0.0 {
            return Err(Error::Degenerate("reference field is identically zero".into()));
        }
        Ok((num / den).sqrt())
    }
}

fn same_grid(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if a.mesh.spec != b.mesh.spec {
        return Err(Error::Shape("fields live on different meshes".into()));
    }
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + x.abs())) {
        return Err(Error::Shape("fields have different time grids".into()));
    }
    Ok(())
}

/// Trapezoid in time of `kn_norm^p`, then the `p`-th root.
pub fn spacetime_norm(f: &ScalarField, w: &WeightParams) -> Result<f64> {
    let slices: Vec<f64> = f
        .values
        .par_iter()
        .map(|v| kn_norm(v, w, &f.mesh).map(|x| x.powf(w.p)))
        .collect::<Result<_>>()?;
    let t = &f.times;
    if t.len() == 1 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for k in 0..t.len() - 1 {
        acc += 0.5 * (t[k + 1] - t[k]) * (slices[k] + slices[k + 1]);
    }
    Ok(acc.powf(1.0 / w.p))
}

/// `||u||_{bK^{n+2}_{p,theta-p,Theta-p}} + ||u_t||_{bK^n_{p,theta+p,Theta+p}}`.
pub fn solution_norm(u: &ScalarField, u_t: &ScalarField, w: &WeightParams) -> Result<f64> {
    same_grid(u, u_t)?;
    let first = spacetime_norm(u, &w.shifted(-w.p).with_n(w.n + 2))?;
    let second = spacetime_norm(u_t, &w.shifted(w.p))?;
    Ok(first + second)
}

/// Result of a dyadic norm evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicNorm {
    pub value: f64,
    pub k_min: i32,
    pub k_max: i32,
    /// Number of `k` with a nonzero contribution.
    pub active: usize,
}

/// Smallest index range whose cutoffs cover the support of `f`.
pub fn dyadic_support_range(f: &[f64], psi: &RegularizedDistance, mesh: &GradedMesh) -> Result<Option<(i32, i32)>> {
    mesh.check_len(f)?;
    let ne = mesh.n_e();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (k, &v) in f.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let val = psi.eval_polar(mesh.r[k / ne], mesh.eta[k % ne]);
        if val <= 0.0 {
            return Err(Error::Data("field is nonzero on the wedge boundary".into()));
        }
        lo = lo.min(val);
        hi = hi.max(val);
    }
    if lo > hi {
        return Ok(None);
    }
    // zeta(e^{-k} psi) != 0 iff ln psi - ln BUMP_HI < k < ln psi - ln BUMP_LO
    let k_min = (lo.ln() - BUMP_HI.ln()).floor() as i32;
    let k_max = (hi.ln() - BUMP_LO.ln()).ceil() as i32;
    Ok(Some((k_min, k_max)))
}

/// `(sum_k e^{k(Theta-d)} sum_{|a|<=n} e^{k|a|p} ||D^a(zeta(e^{-k} psi) g)||_p^p)^(1/p)`
/// with `g = |x|^((theta-Theta)/p) f`.
///
/// Because `psi` is homogeneous this is the dyadic decomposition norm after
/// the change of variables `x -> e^k x` in each term. `k_range` defaults to
/// the support of `f`; an explicit range must cover it.
pub fn dyadic_norm(
    f: &[f64],
    w: &WeightParams,
    psi: &RegularizedDistance,
    mesh: &GradedMesh,
    k_range: Option<(i32, i32)>,
) -> Result<DyadicNorm> {
    let support = dyadic_support_range(f, psi, mesh)?;
    let Some(needed) = support else {
        return Ok(DyadicNorm { value: 0.0, k_min: 0, k_max: -1, active: 0 });
    };
    let (k_min, k_max) = match k_range {
        None => needed,
        Some((a, b)) => {
            if a > needed.0 || b < needed.1 {
                return Err(Error::Coverage(format!(
                    "range [{a}, {b}] does not contain [{}, {}]",
                    needed.0, needed.1
                )));
            }
            (a, b)
        }
    };
    let ne = mesh.n_e();
    let g: Vec<f64> = f
        .iter()
        .enumerate()
        .map(|(k, &v)| v * mesh.r[k / ne].powf((w.theta - w.big_theta) / w.p))
        .collect();
    let psi_nodes = mesh.sample(|r, e| psi.eval_polar(r, e));
    let d = w.d as f64;
    let terms: Vec<(f64, bool)> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| -> Result<(f64, bool)> {
            let scale = (-(k as f64)).exp();
            let piece: Vec<f64> = g.iter().zip(&psi_nodes).map(|(gv, pv)| bump(scale * pv) * gv).collect();
            if piece.iter().all(|&x| x == 0.0) {
                return Ok((0.0, false));
            }
            let ders = mesh.derivatives(&piece, w.n)?;
            let mut sum = 0.0;
            for (m, group) in ders.iter().enumerate() {
                let factor = (k as f64 * (w.big_theta - d + m as f64 * w.p)).exp();
                for der in group {
                    let s: f64 = der.iter().zip(mesh.weights()).map(|(v, wt)| wt * v.abs().powf(w.p)).sum();
                    sum += factor * s;
                }
            }
            Ok((sum, true))
        })
        .collect::<Result<_>>()?;
    let active = terms.iter().filter(|t| t.1).count();
    let total: f64 = terms.iter().map(|t| t.0).sum();
    Ok(DyadicNorm { value: total.powf(1.0 / w.p), k_min, k_max, active })
}

/// Empirical ratios for the norm identities over a suite of test fields.
#[derive(Debug, Clone, Serialize)]
pub struct NormPropertyReport {
    /// `max ||D_x f||_{K^{n-1}_{p,theta+p,Theta+p}} / ||f||_{K^n_{p,theta,Theta}}`.
    pub derivative_ratio_max: f64,
    /// Range of `||rho_o f||_{K^n_{p,theta-p,Theta}} / ||f||_{K^n_{p,theta,Theta}}`.
    pub vertex_power_ratio: (f64, f64),
    /// Range of `||psi^{-1} f||_{K^n_{p,theta,Theta}} / ||f||_{K^n_{p,theta-p,Theta-p}}`.
    pub psi_power_ratio: (f64, f64),
    pub violations: Vec<String>,
}

/// Check the norm identities on `suite` with weights `w` (`w.n >= 1`).
pub fn norm_property_checks(suite: &[Vec<f64>], w: &WeightParams, mesh: &GradedMesh) -> Result<NormPropertyReport> {
    if w.n == 0 {
        return Err(Error::InvalidParameter("property checks need n >= 1".into()));
    }
    let psi = RegularizedDistance::new(mesh.domain());
    let psi_nodes = mesh.sample(|r, e| psi.eval_polar(r, e));
    let ne = mesh.n_e();
    let mut report = NormPropertyReport {
        derivative_ratio_max: 0.0,
        vertex_power_ratio: (f64::INFINITY, 0.0),
        psi_power_ratio: (f64::INFINITY, 0.0),
        violations: Vec::new(),
    };
    for (idx, f) in suite.iter().enumerate() {
        let base = kn_norm(f, w, mesh)?;
        if base == 0.0 {
            return Err(Error::Degenerate(format!("suite member {idx} has zero norm")));
        }
        let (fx, _) = mesh.gradient(f);
        let lhs = kn_norm(&fx, &w.shifted(w.p).with_n(w.n - 1), mesh)?;
        let ratio = lhs / base;
        report.derivative_ratio_max = report.derivative_ratio_max.max(ratio);
        if w.n == 1 && ratio > 1.0 + 1e-10 {
            report.violations.push(format!("derivative bound fails on member {idx}: ratio {ratio}"));
        }

        let weighted: Vec<f64> = f.iter().enumerate().map(|(k, v)| v * mesh.r[k / ne]).collect();
        let r2 = kn_norm(&weighted, &WeightParams { theta: w.theta - w.p, ..*w }, mesh)? / base;
        report.vertex_power_ratio.0 = report.vertex_power_ratio.0.min(r2);
        report.vertex_power_ratio.1 = report.vertex_power_ratio.1.max(r2);

        let inv: Vec<f64> = f
            .iter()
            .zip(&psi_nodes)
            .map(|(v, p)| if *v == 0.0 { 0.0 } else { v / p })
            .collect();
        let r3 = kn_norm(&inv, w, mesh)? / kn_norm(f, &w.shifted(-w.p), mesh)?;
        report.psi_power_ratio.0 = report.psi_power_ratio.0.min(r3);
        report.psi_power_ratio.1 = report.psi_power_ratio.1.max(r3);
    }
    for (name, (lo, hi)) in [("vertex power", report.vertex_power_ratio), ("psi power", report.psi_power_ratio)] {
        if !(lo > 0.0 && hi.is_finite()) {
            report.violations.push(format!("{name} ratio not two-sided bounded: [{lo}, {hi}]"));
        }
    }
    Ok(report)
}

/// JSON sidecar describing the mesh of a CSV field file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldHeader {
    pub mesh: MeshSpec,
    pub n_times: usize,
    pub columns: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldRow {
    t: f64,
    r: f64,
    eta: f64,
    value: f64,
}

/// Path of the JSON header next to a CSV field file.
pub fn header_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Write `field` as CSV rows `(t, r, eta, value)` plus a JSON header.
pub fn write_field(field: &ScalarField, csv_path: &Path) -> Result<()> {
    let header = FieldHeader {
        mesh: field.mesh.spec,
        n_times: field.times.len(),
        columns: ["t", "r", "eta", "value"].iter().map(|s| s.to_string()).collect(),
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(header_path(csv_path))?), &header)?;
    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(csv_path)?));
    let ne = field.mesh.n_e();
    for (t, slice) in field.times.iter().zip(&field.values) {
        for (k, &value) in slice.iter().enumerate() {
            wtr.serialize(FieldRow {
                t: *t,
                r: field.mesh.r[k / ne],
                eta: field.mesh.eta[k % ne],
                value,
            })?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Read a field written by [`write_field`].
pub fn read_field(csv_path: &Path) -> Result<ScalarField> {
    let header: FieldHeader = serde_json::from_reader(BufReader::new(File::open(header_path(csv_path))?))?;
    let spec = MeshSpec::new(header.mesh.kappa, header.mesh.r_min, header.mesh.r_out, header.mesh.n_r, header.mesh.n_eta)?;
    let mesh = spec.build();
    let n = mesh.len();
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(csv_path)?));
    let mut times = Vec::with_capacity(header.n_times);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(header.n_times);
    let ne = mesh.n_e();
    for (row_no, row) in rdr.deserialize::<FieldRow>().enumerate() {
        let row = row?;
        let (m, k) = (row_no / n, row_no % n);
        if k == 0 {
            times.push(row.t);
            values.push(Vec::with_capacity(n));
        }
        let (r, eta) = (mesh.r[k / ne], mesh.eta[k % ne]);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + b.abs());
        if !close(row.t, times[m]) || !close(row.r, r) || !close(row.eta, eta) {
            return Err(Error::Data(format!(
                "row {row_no}: ({}, {}, {}) does not match mesh node ({}, {r}, {eta})",
                row.t, row.r, row.eta, times[m]
            )));
        }
        values[m].push(row.value);
    }
    if values.len() != header.n_times || values.last().is_some_and(|v| v.len() != n) {
        return Err(Error::Data(format!(
            "expected {} slices of {n} rows",
            header.n_times
        )));
    }
    ScalarField::new(mesh, times, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bump2(x: f64, y: f64, cx: f64, cy: f64, w: f64) -> f64 {
        let q = ((x - cx).powi(2) + (y - cy).powi(2)) / (w * w);
        if q >= 1.0 {
            0.0
        } else {
            (1.0 - q).powi(4)
        }
    }

    #[test]
    fn sector_area() {
        let mesh = MeshSpec::new(1.0, 1.0, 2.0, 256, 16).unwrap().build();
        let w = WeightParams::new(2.0, 2.0, 2.0, 0).unwrap();
        let one = vec![1.0; mesh.len()];
        let v = lp_weighted_norm(&one, &w, &mesh).unwrap().powi(2);
        assert!((v - 1.5).abs() < 1e-5, "{v}");
        assert_eq!(lp_weighted_norm(&vec![0.0; mesh.len()], &w, &mesh).unwrap(), 0.0);
    }

    #[test]
    fn radial_weight_closed_form() {
        let mesh = MeshSpec::new(PI, 1.0, 2.0, 256, 32).unwrap().build();
        let w = WeightParams::new(2.0, 1.0, 2.0, 0).unwrap();
        let v = lp_weighted_norm(&vec![1.0; mesh.len()], &w, &mesh).unwrap().powi(2);
        assert!((v - PI).abs() < 1e-5, "{v}");
    }

    #[test]
    fn derivatives_of_polynomials() {
        let max_errors = |scale: usize| -> (Vec<f64>, Vec<Vec<Vec<f64>>>) {
            let mesh = MeshSpec::new(1.5 * PI, 0.5, 2.0, 50 * scale, 75 * scale).unwrap().build();
            let f = mesh.sample_xy(|x, y| x * x * y - 2.0 * x * y * y + y);
            let d = mesh.derivatives(&f, 3).unwrap();
            let exact = [
                mesh.sample_xy(|x, y| 2.0 * x * y - 2.0 * y * y),
                mesh.sample_xy(|x, y| x * x - 4.0 * x * y + 1.0),
                mesh.sample_xy(|_, y| 2.0 * y),
                mesh.sample_xy(|x, y| 2.0 * x - 4.0 * y),
                mesh.sample_xy(|x, _| -4.0 * x),
            ];
            let got = [&d[1][0], &d[1][1], &d[2][0], &d[2][1], &d[2][2]];
            let errs = got
                .iter()
                .zip(&exact)
                .map(|(g, e)| g.iter().zip(e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .collect();
            (errs, d)
        };
        let (coarse, _) = max_errors(2);
        let (fine, d) = max_errors(4);
        for (c, f) in coarse.iter().zip(&fine) {
            assert!(c / f > 3.5, "observed order too low: {c} -> {f}");
            assert!(*f < 2e-2);
        }
        // third derivatives: f_xxy = 2, f_xyy = -4
        let mid = 100 * 301 + 150;
        assert!((d[3][1][mid] - 2.0).abs() < 1e-2);
        assert!((d[3][2][mid] + 4.0).abs() < 1e-2);
        assert!(d[3][0][mid].abs() < 1e-2 && d[3][3][mid].abs() < 1e-2);
    }

    #[test]
    fn order_above_four_is_unsupported() {
        let mesh = MeshSpec::desk(PI).unwrap().build();
        let f = vec![0.0; mesh.len()];
        let w = WeightParams::new(2.0, 2.0, 2.0, 5).unwrap();
        assert!(matches!(kn_norm(&f, &w, &mesh), Err(Error::Capability(_))));
    }

    #[test]
    fn k0_is_lp_and_norm_grows_with_n() {
        let mesh = MeshSpec::desk(PI).unwrap().build();
        let f = mesh.sample_xy(|x, y| bump2(x, y, 1.0, 0.2, 0.6));
        let w = WeightParams::new(2.0, 2.0, 2.0, 0).unwrap();
        assert_eq!(kn_norm(&f, &w, &mesh).unwrap(), lp_weighted_norm(&f, &w, &mesh).unwrap());
        let mut prev = 0.0;
        for n in 0..=4 {
            let v = kn_norm(&f, &w.with_n(n), &mesh).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn linear_function_gradient_term() {
        let mesh = MeshSpec::new(PI, 0.1, 3.0, 96, 96).unwrap().build();
        let f = mesh.sample_xy(|x, _| x);
        let w = WeightParams::new(2.0, 2.0, 2.0, 1).unwrap();
        let terms = kn_terms(&f, &w, &mesh).unwrap();
        let rho_norm = lp_weighted_norm(mesh.rho(), &w.with_n(0), &mesh).unwrap();
        assert!(((terms[1][0] - rho_norm) / rho_norm).abs() < 1e-3);
        assert!(terms[1][1] < 1e-3 * rho_norm);
    }

    #[test]
    fn shifted_index_identity() {
        let mesh = MeshSpec::desk(0.75 * PI).unwrap().build();
        let f = mesh.sample_xy(|x, y| bump2(x, y, 0.8, 0.1, 0.5));
        let n = 2;
        let w = WeightParams::new(3.0, 1.5, 2.5, n).unwrap();
        let lhs = kn_norm(&f, &w.shifted(n as f64 * w.p), &mesh).unwrap();
        let ders = mesh.derivatives(&f, n).unwrap();
        let base = w.with_n(0);
        let mut rhs = 0.0;
        for (m, group) in ders.iter().enumerate() {
            for d in group {
                let scaled: Vec<f64> = d.iter().zip(mesh.rho()).map(|(v, r)| v * r.powi((m + n) as i32)).collect();
                rhs += lp_weighted_norm(&scaled, &base, &mesh).unwrap();
            }
        }
        assert!(((lhs - rhs) / rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn unit_weights_give_plain_lp() {
        let mesh = MeshSpec::desk(1.2).unwrap().build();
        let f = mesh.sample_xy(|x, y| bump2(x, y, 1.5, 0.0, 1.0));
        let w = WeightParams::new(3.0, 2.0, 2.0, 0).unwrap();
        let plain: f64 = f.iter().zip(mesh.weights()).map(|(v, wt)| wt * v.abs().powi(3)).sum();
        assert!((lp_weighted_norm(&f, &w, &mesh).unwrap() - plain.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn kn_scaling_is_exact_for_grid_aligned_factors() {
        let spec = MeshSpec::with_log_step(PI, 1e-2, 40.0, 2f64.ln() / 8.0, 64).unwrap();
        let mesh = spec.build();
        let w = WeightParams::new(2.5, 1.2, 2.3, 2).unwrap();
        let f = |x: f64, y: f64| bump2(x, y, 1.0, 0.3, 0.7);
        let base = kn_norm(&mesh.sample_xy(f), &w, &mesh).unwrap();
        for lam in [0.5, 2.0] {
            let g = mesh.sample_xy(|x, y| f(lam * x, lam * y));
            let v = kn_norm(&g, &w, &mesh).unwrap();
            let expected = lam.powf(-w.theta / w.p) * base;
            assert!(((v - expected) / expected).abs() < 1e-9, "lam={lam}: {v} vs {expected}");
        }
    }

    #[test]
    fn dyadic_norm_scales_exactly_by_e() {
        let spec = MeshSpec::with_log_step(PI, 1e-2, 60.0, 1.0 / 10.0, 64).unwrap();
        let mesh = spec.build();
        let psi = RegularizedDistance::new(mesh.domain());
        let w = WeightParams::new(2.0, 1.5, 2.5, 1).unwrap();
        let f = |x: f64, y: f64| bump2(x, y, 1.0, 0.0, 0.5);
        let base = dyadic_norm(&mesh.sample_xy(f), &w, &psi, &mesh, None).unwrap();
        for lam in [std::f64::consts::E, 1.0 / std::f64::consts::E] {
            let g = mesh.sample_xy(|x, y| f(lam * x, lam * y));
            let v = dyadic_norm(&g, &w, &psi, &mesh, None).unwrap().value;
            let expected = lam.powf(-w.theta / w.p) * base.value;
            assert!(((v - expected) / expected).abs() < 1e-9, "{v} vs {expected}");
        }
    }

    #[test]
    fn dyadic_range_must_cover_support() {
        let mesh = MeshSpec::desk(PI).unwrap().build();
        let psi = RegularizedDistance::new(mesh.domain());
        let w = WeightParams::new(2.0, 2.0, 2.0, 0).unwrap();
        let f = mesh.sample_xy(|x, y| bump2(x, y, 1.0, 0.0, 0.3));
        let full = dyadic_norm(&f, &w, &psi, &mesh, None).unwrap();
        assert!(full.active as i32 <= full.k_max - full.k_min + 1);
        assert!(full.active >= 1);
        let wider = dyadic_norm(&f, &w, &psi, &mesh, Some((full.k_min - 3, full.k_max + 3))).unwrap();
        assert!((wider.value - full.value).abs() < 1e-12 * full.value);
        assert!(matches!(
            dyadic_norm(&f, &w, &psi, &mesh, Some((full.k_min + 1, full.k_max))),
            Err(Error::Coverage(_))
        ));
    }

    #[test]
    fn dyadic_and_kn_are_comparable() {
        let mesh = MeshSpec::desk(PI).unwrap().build();
        let psi = RegularizedDistance::new(mesh.domain());
        let w = WeightParams::new(2.0, 2.0, 2.0, 1).unwrap();
        let mut ratios = Vec::new();
        for &(cx, cy, rad) in &[(1.0, 0.0, 0.5), (2.0, 1.0, 0.8), (0.3, 0.1, 0.1), (0.5, -0.3, 0.15)] {
            let f = mesh.sample_xy(|x, y| bump2(x, y, cx, cy, rad));
            ratios.push(dyadic_norm(&f, &w, &psi, &mesh, None).unwrap().value / kn_norm(&f, &w, &mesh).unwrap());
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(lo > 0.0 && hi / lo < 20.0, "{ratios:?}");
    }

    #[test]
    fn spacetime_of_separable_fields() {
        let mesh = MeshSpec::desk(PI).unwrap().build();
        let w = WeightParams::new(2.0, 2.0, 2.0, 0).unwrap();
        let shape = |r: f64, e: f64| bump2(r * e.cos(), r * e.sin(), 1.0, 0.0, 0.5);
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
        let constant = ScalarField::from_fn(mesh.clone(), times.clone(), |_, r, e| shape(r, e)).unwrap();
        let spatial = kn_norm(&constant.values[0], &w, &mesh).unwrap();
        let v = spacetime_norm(&constant, &w).unwrap();
        assert!((v - 2f64.sqrt() * spatial).abs() < 1e-12 * v);

        // u = t w(x): int_0^T t^p dt = T^3 / 3 for p = 2
        let lin = ScalarField::from_fn(mesh.clone(), times.clone(), |t, r, e| t * shape(r, e)).unwrap();
        let v = spacetime_norm(&lin, &w).unwrap();
        let exact = (8.0 / 3.0_f64).sqrt() * spatial;
        assert!((v - exact).abs() < 1e-4 * exact);

        let ut = constant.map_values(|_| 0.0);
        let sol = solution_norm(&constant, &ut, &w).unwrap();
        assert_eq!(sol, spacetime_norm(&constant, &w.shifted(-2.0).with_n(2)).unwrap());

        let short = ScalarField::from_fn(mesh, times[..10].to_vec(), |_, _, _| 0.0).unwrap();
        assert!(matches!(solution_norm(&constant, &short, &w), Err(Error::Shape(_))));
    }

    #[test]
    fn property_checks_on_bumps() {
        let mesh = MeshSpec::desk(PI).unwrap().build();
        let suite: Vec<Vec<f64>> = [(1.0, 0.0, 0.5), (0.2, 0.05, 0.1), (3.0, -1.0, 1.0)]
            .iter()
            .map(|&(cx, cy, r)| mesh.sample_xy(|x, y| bump2(x, y, cx, cy, r)))
            .collect();
        let w = WeightParams::new(2.0, 2.0, 2.0, 1).unwrap();
        let rep = norm_property_checks(&suite, &w, &mesh).unwrap();
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        assert!(rep.derivative_ratio_max <= 1.0 + 1e-10);
        assert!(rep.psi_power_ratio.0 > 0.0 && rep.psi_power_ratio.1 < 10.0);
    }

    #[test]
    fn singular_weights_use_boundary_extrapolation() {
        // u = rho-like near the edge: |u|^2 rho^-2 stays bounded
        let mesh = MeshSpec::new(PI, 0.5, 2.0, 64, 128).unwrap().build();
        let f = mesh.sample_xy(|x, _| x);
        let w = WeightParams::new(2.0, 0.0, 0.0, 0).unwrap();
        // integrand = x^2 r^0 x^-2 = 1 on the half annulus: area = 1.875 pi
        let v = lp_weighted_norm(&f, &w, &mesh).unwrap().powi(2);
        assert!((v / (1.875 * PI) - 1.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn csv_round_trip() {
        let mesh = MeshSpec::new(1.3, 0.01, 4.0, 8, 6).unwrap().build();
        let field = ScalarField::from_fn(mesh, vec![0.0, 0.5, 1.0], |t, r, e| t * r * e.cos()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        write_field(&field, &path).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.times, field.times);
        assert_eq!(back.mesh.spec, field.mesh.spec);
        for (a, b) in back.values.iter().zip(&field.values) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-15 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mismatched_slices_are_rejected() {
        let mesh = MeshSpec::desk(PI).unwrap().build();
        assert!(matches!(ScalarField::new(mesh.clone(), vec![0.0], vec![vec![0.0; 3]]), Err(Error::Shape(_))));
        let w = WeightParams::new(2.0, 2.0, 2.0, 0).unwrap();
        let mut f = vec![0.0; mesh.len()];
        f[7] = f64::NAN;
        assert!(matches!(lp_weighted_norm(&f, &w, &mesh), Err(Error::Data(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn weighted_norm_is_homogeneous_and_subadditive(
            c in -3.0f64..3.0, cx in 0.3f64..2.0, cy in -0.2f64..0.2, p in 1.2f64..4.0,
        ) {
            let mesh = MeshSpec::new(PI, 0.05, 4.0, 24, 24).unwrap().build();
            let w = WeightParams::new(p, 1.7, 2.4, 1).unwrap();
            let f = mesh.sample_xy(|x, y| bump2(x, y, cx, cy, 0.4));
            let g = mesh.sample_xy(|x, y| bump2(x, y, 1.0, 0.0, 0.6));
            let nf = kn_norm(&f, &w, &mesh).unwrap();
            let scaled: Vec<f64> = f.iter().map(|v| c * v).collect();
            prop_assert!((kn_norm(&scaled, &w, &mesh).unwrap() - c.abs() * nf).abs() <= 1e-10 * nf.max(1e-300));
            let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
            prop_assert!(kn_norm(&sum, &w, &mesh).unwrap() <= nf + kn_norm(&g, &w, &mesh).unwrap() + 1e-12);
        }
    }
}
