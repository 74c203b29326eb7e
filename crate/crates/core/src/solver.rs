//! Solvers for `u_t = a^{ij}(t) u_{x^i x^j} + f`, `u(0) = 0`, with zero
//! Dirichlet data on a truncated wedge, plus manufactured solutions and the
//! estimate ratios built on top of them.
//!
//! Two paths are provided. [`solve_fd`] is backward Euler on the log-polar
//! mesh and accepts piecewise-constant coefficient paths. [`solve_green`]
//! convolves the source with the wedge heat kernel mode by mode and only
//! handles the Laplacian.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::EllipticityPair;
use crate::greens_wedge::WedgeHeatKernel;
use crate::quad::gauss_legendre;
use crate::special::ln_gamma;
use crate::weighted_norms::{solution_norm, spacetime_norm, GradedMesh, MeshSpec, ScalarField, WeightParams};

pub type Matrix2 = [[f64; 2]; 2];

const IDENTITY: Matrix2 = [[1.0, 0.0], [0.0, 1.0]];
/// Relative residual demanded from every linear solve.
pub const RESIDUAL_TOL: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 4;
/// Sine modes and radial nodes below this fraction of the largest
/// coefficient are dropped.
const MODE_CUT: f64 = 1e-17;
/// Radial kernel windows extend this many `sqrt(t)` around the target.
const KERNEL_REACH: f64 = 10.0;
/// Kernel values below `exp(-NEGLIGIBLE_LN)` are skipped.
const NEGLIGIBLE_LN: f64 = 40.0;

/// Piecewise-constant coefficient matrices `A_j` on `[s_j, s_{j+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPath {
    breakpoints: Vec<f64>,
    matrices: Vec<Matrix2>,
    pub ellipticity: EllipticityPair,
}

fn eigenvalues(a: &Matrix2) -> (f64, f64) {
    let m = 0.5 * (a[0][0] + a[1][1]);
    let d = (0.25 * (a[0][0] - a[1][1]).powi(2) + a[0][1] * a[0][1]).sqrt();
    (m - d, m + d)
}

impl CoefficientPath {
    /// `breakpoints` must start at 0 and increase; there is one matrix per
    /// interval. Every matrix is checked against `nu`.
    pub fn new(breakpoints: Vec<f64>, matrices: Vec<Matrix2>, nu: EllipticityPair) -> Result<Self> {
        if breakpoints.len() != matrices.len() + 1 || matrices.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints for {} matrices",
                breakpoints.len(),
                matrices.len()
            )));
        }
        if breakpoints[0] != 0.0 || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("breakpoints must start at 0 and increase".into()));
        }
        for (j, a) in matrices.iter().enumerate() {
            if a[0][1] != a[1][0] || a.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("matrix {j} is not finite and symmetric")));
            }
            let (lo, hi) = eigenvalues(a);
            let slack = 1e-12 * nu.nu2;
            if lo < nu.nu1 - slack || hi > nu.nu2 + slack {
                return Err(Error::InvalidParameter(format!(
                    "matrix {j} has eigenvalues ({lo}, {hi}) outside [{}, {}]",
                    nu.nu1, nu.nu2
                )));
            }
        }
        Ok(CoefficientPath { breakpoints, matrices, ellipticity: nu })
    }

    /// The identity on `[0, t_final]`.
    pub fn laplacian(t_final: f64) -> Result<Self> {
        CoefficientPath::constant(IDENTITY, t_final, EllipticityPair::new(1.0, 1.0)?)
    }

    pub fn constant(a: Matrix2, t_final: f64, nu: EllipticityPair) -> Result<Self> {
        CoefficientPath::new(vec![0.0, t_final], vec![a], nu)
    }

    /// `diag(nu1, nu2)` on the first half of `[0, t_final]` and
    /// `diag(nu2, nu1)` on the second.
    pub fn switching(nu: EllipticityPair, t_final: f64) -> Result<Self> {
        CoefficientPath::new(
            vec![0.0, 0.5 * t_final, t_final],
            vec![[[nu.nu1, 0.0], [0.0, nu.nu2]], [[nu.nu2, 0.0], [0.0, nu.nu1]]],
            nu,
        )
    }

    pub fn final_time(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn is_laplacian(&self) -> bool {
        self.matrices.iter().all(|a| *a == IDENTITY)
    }

    /// Matrix in force at `t`, taking `A_j` on `(s_j, s_{j+1}]` so that it
    /// agrees with the backward Euler step ending at `t`.
    pub fn at(&self, t: f64) -> Matrix2 {
        let j = self.breakpoints.partition_point(|&b| b < t).clamp(1, self.matrices.len()) - 1;
        self.matrices[j]
    }

    /// Time average of the path over `[t0, t1]`.
    pub fn average(&self, t0: f64, t1: f64) -> Matrix2 {
        let mut acc = [[0.0; 2]; 2];
        let mut total = 0.0;
        for (j, a) in self.matrices.iter().enumerate() {
            let (lo, hi) = (self.breakpoints[j], self.breakpoints[j + 1]);
            let len = hi.min(t1) - lo.max(t0);
            if len <= 0.0 {
                continue;
            }
            total += len;
            for r in 0..2 {
                for c in 0..2 {
                    acc[r][c] += len * a[r][c];
                }
            }
        }
        if total <= 0.0 {
            return self.at(t0);
        }
        // the last matrix extends past the final breakpoint
        let rest = (t1 - t0) - total;
        let last = self.matrices.last().unwrap();
        if rest > 0.0 && t1 > self.final_time() {
            for r in 0..2 {
                for c in 0..2 {
                    acc[r][c] += rest * last[r][c];
                }
            }
            total += rest;
        }
        acc.map(|row| row.map(|x| x / total))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    KernelConvolution,
    ImplicitFd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub mesh: MeshSpec,
    pub dt: f64,
    pub t_final: f64,
    pub method: SolveMethod,
}

impl SolveConfig {
    /// `t_final` must be a whole number of steps.
    pub fn new(mesh: MeshSpec, dt: f64, t_final: f64, method: SolveMethod) -> Result<Self> {
        if !(dt > 0.0 && t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("need dt > 0 and T > 0, got dt={dt}, T={t_final}")));
        }
        let steps = (t_final / dt).round();
        if steps < 1.0 || (steps * dt - t_final).abs() > 1e-9 * t_final {
            return Err(Error::InvalidParameter(format!("T = {t_final} is not a multiple of dt = {dt}")));
        }
        Ok(SolveConfig { mesh, dt, t_final, method })
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.steps();
        (0..=n).map(|m| self.t_final * m as f64 / n as f64).collect()
    }

    pub fn with_method(&self, method: SolveMethod) -> Self {
        SolveConfig { method, ..*self }
    }
}

/// Statistics of an implicit solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub steps: usize,
    pub factorizations: usize,
    pub refinement_sweeps: usize,
    pub max_relative_residual: f64,
}

fn check_grid(f: &ScalarField, cfg: &SolveConfig) -> Result<()> {
    if f.mesh.spec != cfg.mesh {
        return Err(Error::Shape("source lives on a different mesh than the config".into()));
    }
    let times = cfg.times();
    if f.times.len() != times.len() || f.times.iter().zip(&times).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b)) {
        return Err(Error::Shape("source time grid differs from the config".into()));
    }
    Ok(())
}

/// Square band matrix with equal lower and upper bandwidth, stored by rows.
#[derive(Debug, Clone)]
struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    fn pos(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * (2 * self.bw + 1) + j + self.bw - i
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self.pos(i, j);
        self.data[p] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.pos(i, j)]
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU without pivoting.
    fn factor(mut self) -> Result<BandMatrix> {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        for k in 0..n {
            let pivot = self.data[k * w + bw];
            if !(pivot.abs() > 1e-300) {
                return Err(Error::NumericalFailure(format!("zero pivot in row {k}")));
            }
            let end = (k + bw).min(n - 1);
            let (head, tail) = self.data.split_at_mut((k + 1) * w);
            let row_k = &head[k * w..];
            for i in k + 1..=end {
                let row_i = &mut tail[(i - k - 1) * w..(i - k) * w];
                let l = row_i[k + bw - i] / pivot;
                row_i[k + bw - i] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=end {
                    row_i[j + bw - i] -= l * row_k[j + bw - k];
                }
            }
        }
        Ok(self)
    }

    /// Solve with a matrix returned by [`BandMatrix::factor`].
    fn lu_solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let s: f64 = (lo..i).map(|k| self.get(i, k) * x[k]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let s: f64 = (i + 1..=hi).map(|j| self.get(i, j) * x[j]).sum();
            x[i] = (x[i] - s) / self.get(i, i);
        }
        x
    }
}

/// Unknown ordering with the shorter grid direction running fastest, which
/// keeps the bandwidth at `min(n_s, n_e) + 1`.
struct Ordering {
    ne: usize,
    ns: usize,
    radial_fast: bool,
}

impl Ordering {
    fn new(mesh: &GradedMesh) -> Self {
        Ordering { ne: mesh.n_e(), ns: mesh.n_s(), radial_fast: mesh.n_s() < mesh.n_e() }
    }

    fn bandwidth(&self) -> usize {
        self.ns.min(self.ne) + 1
    }

    fn sys(&self, i: usize, j: usize) -> usize {
        if self.radial_fast {
            j * self.ns + i
        } else {
            i * self.ne + j
        }
    }

    fn to_sys(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for i in 0..self.ns {
            for j in 0..self.ne {
                out[self.sys(i, j)] = v[i * self.ne + j];
            }
        }
        out
    }

    fn from_sys(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for i in 0..self.ns {
            for j in 0..self.ne {
                out[i * self.ne + j] = v[self.sys(i, j)];
            }
        }
        out
    }
}

/// `I - dt L` with `L = a^{ij} D_ij` in `(s, eta)` form; boundary rows are
/// the identity.
fn assemble(mesh: &GradedMesh, ord: &Ordering, a: &Matrix2, dt: f64) -> BandMatrix {
    let (ns, ne) = (mesh.n_s(), mesh.n_e());
    let mut m = BandMatrix::zeros(ns * ne, ord.bandwidth());
    let (a11, a12, a22) = (a[0][0], a[0][1], a[1][1]);
    let (hs, he) = (mesh.ds, mesh.deta);
    for j in 0..ne {
        let eta = mesh.eta_at(j);
        let (c, s) = (eta.cos(), eta.sin());
        let (cc, ss, cs) = (c * c, s * s, c * s);
        let c_ss = a11 * cc + 2.0 * a12 * cs + a22 * ss;
        let c_ee = a11 * ss - 2.0 * a12 * cs + a22 * cc;
        let c_se = 2.0 * cs * (a22 - a11) + 2.0 * a12 * (cc - ss);
        let c_s = (a11 - a22) * (ss - cc) - 4.0 * a12 * cs;
        let c_e = 2.0 * cs * (a11 - a22) + 2.0 * a12 * (ss - cc);
        for i in 0..ns {
            let row = ord.sys(i, j);
            if mesh.is_boundary(i, j) {
                m.add(row, row, 1.0);
                continue;
            }
            let r = mesh.r_at(i);
            let g = dt / (r * r);
            let mut put = |di: isize, dj: isize, v: f64| {
                let col = ord.sys((i as isize + di) as usize, (j as isize + dj) as usize);
                m.add(row, col, v);
            };
            put(0, 0, 1.0 + g * (2.0 * c_ss / (hs * hs) + 2.0 * c_ee / (he * he)));
            put(1, 0, -g * (c_ss / (hs * hs) + c_s / (2.0 * hs)));
            put(-1, 0, -g * (c_ss / (hs * hs) - c_s / (2.0 * hs)));
            put(0, 1, -g * (c_ee / (he * he) + c_e / (2.0 * he)));
            put(0, -1, -g * (c_ee / (he * he) - c_e / (2.0 * he)));
            let x = g * c_se / (4.0 * hs * he);
            put(1, 1, -x);
            put(-1, -1, -x);
            put(1, -1, x);
            put(-1, 1, x);
        }
    }
    m
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

/// Backward Euler solve. See [`solve_fd_with_stats`].
pub fn solve_fd(f: &ScalarField, a: &CoefficientPath, cfg: &SolveConfig) -> Result<ScalarField> {
    Ok(solve_fd_with_stats(f, a, cfg)?.0)
}

/// Backward Euler with the step-averaged coefficient matrix. Each step is a
/// banded LU solve followed by iterative refinement until the relative
/// residual is below [`RESIDUAL_TOL`].
pub fn solve_fd_with_stats(f: &ScalarField, a: &CoefficientPath, cfg: &SolveConfig) -> Result<(ScalarField, SolveStats)> {
    if cfg.method != SolveMethod::ImplicitFd {
        return Err(Error::InvalidParameter("solve_fd needs the implicit method".into()));
    }
    check_grid(f, cfg)?;
    if a.final_time() < cfg.t_final * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "coefficient path ends at {} before T = {}",
            a.final_time(),
            cfg.t_final
        )));
    }
    let mesh = &f.mesh;
    let ord = Ordering::new(mesh);
    let (ns, ne) = (mesh.n_s(), mesh.n_e());
    let times = &f.times;
    let mut stats = SolveStats::default();
    let mut values = vec![vec![0.0; mesh.len()]];
    let mut cached: Option<(Matrix2, f64, BandMatrix, BandMatrix)> = None;
    for n in 0..times.len() - 1 {
        let dt = times[n + 1] - times[n];
        let am = a.average(times[n], times[n + 1]);
        let stale = match &cached {
            Some((c, h, _, _)) => *c != am || (*h - dt).abs() > 1e-14 * dt,
            None => true,
        };
        if stale {
            let op = assemble(mesh, &ord, &am, dt);
            let lu = op.clone().factor()?;
            stats.factorizations += 1;
            cached = Some((am, dt, op, lu));
        }
        let (_, _, op, lu) = cached.as_ref().unwrap();
        let prev = &values[n];
        let mut rhs = vec![0.0; mesh.len()];
        for i in 0..ns {
            for j in 0..ne {
                if !mesh.is_boundary(i, j) {
                    let k = i * ne + j;
                    rhs[k] = prev[k] + dt * f.values[n + 1][k];
                }
            }
        }
        let b = ord.to_sys(&rhs);
        let scale = max_abs(&b);
        let mut x = lu.lu_solve(&b);
        let mut rel = 0.0;
        if scale > 0.0 {
            for sweep in 0..=MAX_REFINEMENTS {
                let ax = op.mul(&x);
                let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
                rel = max_abs(&r) / scale;
                if rel <= RESIDUAL_TOL {
                    break;
                }
                if sweep == MAX_REFINEMENTS {
                    return Err(Error::NumericalFailure(format!(
                        "step {} residual {rel:e} above {RESIDUAL_TOL:e} after {MAX_REFINEMENTS} refinements",
                        n + 1
                    )));
                }
                let dx = lu.lu_solve(&r);
                x.iter_mut().zip(&dx).for_each(|(p, q)| *p += q);
                stats.refinement_sweeps += 1;
            }
        }
        stats.max_relative_residual = stats.max_relative_residual.max(rel);
        let mut u = ord.from_sys(&x);
        for i in 0..ns {
            for j in 0..ne {
                if mesh.is_boundary(i, j) {
                    u[i * ne + j] = 0.0;
                }
            }
        }
        values.push(u);
        stats.steps += 1;
    }
    Ok((ScalarField::new(mesh.clone(), times.clone(), values)?, stats))
}

/// Weights `w[i][i']` with `sum_i' w[i][i'] g(r_i') ~ int H_nu(t, r_i, r') g(r') r' dr'`
/// for `g` interpolated by local cubics in `s = ln r`, restricted to cells
/// touching the node range `support`. Gauss pieces span at most two cells
/// and at most `sqrt(t)` in `r`.
fn radial_weights(nu: f64, t: f64, mesh: &GradedMesh, support: (usize, usize), gl: &(Vec<f64>, Vec<f64>)) -> Vec<f64> {
    // e^{-z} I_nu(z) <= (z/2)^nu / Gamma(nu + 1): below this z the mode is negligible
    let z_negligible = 2.0 * ((ln_gamma(nu + 1.0) - NEGLIGIBLE_LN) / nu).exp();
    let ns = mesh.n_s();
    let r = mesh.radii();
    let s0 = r[0].ln();
    let ds = mesh.ds;
    let sq = t.sqrt();
    let mut w = vec![0.0; ns * ns];
    let lo = (s0 + support.0.saturating_sub(1) as f64 * ds).max(s0);
    let hi = (s0 + (support.1 + 1).min(ns - 1) as f64 * ds).min(r[ns - 1].ln());
    for i in 1..ns - 1 {
        let ri = r[i];
        let a = (ri - KERNEL_REACH * sq).max(r[0]).ln().max(lo);
        let b = (ri + KERNEL_REACH * sq).min(r[ns - 1]).ln().min(hi);
        if b <= a {
            continue;
        }
        let row = &mut w[i * ns..(i + 1) * ns];
        let mut pa = a;
        while pa < b {
            // piece width: two cells, or sqrt(t) in r
            let pb = (pa + 2.0 * ds).min((pa.exp() + sq).ln()).min(b);
            let pb = if b - pb < 1e-3 * ds { b } else { pb };
            for (x, wq) in gl.0.iter().zip(&gl.1) {
                let sp = 0.5 * (pa + pb) + 0.5 * (pb - pa) * x;
                let rp = sp.exp();
                if ri * rp / (2.0 * t) < z_negligible {
                    continue;
                }
                let k = WedgeHeatKernel::radial_mode(nu, t, ri, rp) * rp * rp * 0.5 * (pb - pa) * wq;
                if k == 0.0 {
                    continue;
                }
                let c = (((sp - s0) / ds).floor().max(0.0) as usize).min(ns - 2);
                let st = c.saturating_sub(1).min(ns - 4);
                let u = (sp - s0) / ds - st as f64;
                let l = [
                    -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0,
                    u * (u - 2.0) * (u - 3.0) / 2.0,
                    -u * (u - 1.0) * (u - 3.0) / 2.0,
                    u * (u - 1.0) * (u - 2.0) / 6.0,
                ];
                for (m, lm) in l.iter().enumerate() {
                    row[st + m] += k * lm;
                }
            }
            pa = pb;
        }
    }
    w
}

/// Radial history `u_k[m][i]` of one sine mode with coefficients `c[m][i]`.
fn mode_history(nu: f64, c: &[Vec<f64>], mesh: &GradedMesh, times: &[f64]) -> Vec<Vec<f64>> {
    let ns = mesh.n_s();
    let nt = times.len();
    let dt = times[1] - times[0];
    let peak = c.iter().map(|v| max_abs(v)).fold(0.0, f64::max);
    let active: Vec<usize> = (0..ns).filter(|&i| c.iter().any(|v| v[i].abs() > MODE_CUT * peak)).collect();
    let mut u = vec![vec![0.0; ns]; nt];
    let (Some(&lo), Some(&hi)) = (active.first(), active.last()) else {
        return u;
    };
    // the first lag sees the fastest change in the kernel
    let first = gauss_legendre(3);
    let later = gauss_legendre(2);
    let rule = gauss_legendre(4);
    for l in 0..nt - 1 {
        let mut a = vec![0.0; ns * ns];
        let mut b = vec![0.0; ns * ns];
        let (tx, tw) = if l == 0 { &first } else { &later };
        for (x, wq) in tx.iter().zip(tw) {
            let frac = 0.5 * (1.0 + x);
            let weight = 0.5 * wq * dt;
            let v = radial_weights(nu, (l as f64 + frac) * dt, mesh, (lo, hi), &rule);
            for (k, vk) in v.iter().enumerate() {
                a[k] += weight * (1.0 - frac) * vk;
                b[k] += weight * frac * vk;
            }
        }
        for m in l + 1..nt {
            let (fa, fb) = (&c[m - l], &c[m - l - 1]);
            for i in 1..ns - 1 {
                let (ra, rb) = (&a[i * ns..(i + 1) * ns], &b[i * ns..(i + 1) * ns]);
                let mut s = 0.0;
                for ip in lo.saturating_sub(2)..(hi + 3).min(ns) {
                    s += ra[ip] * fa[ip] + rb[ip] * fb[ip];
                }
                u[m][i] += s;
            }
        }
    }
    u
}

/// Kernel convolution `u(t) = int_0^t int_D G(t - s; x, y) f(s, y) dy ds`
/// for the Laplacian. The source is expanded in the discrete sine basis
/// (exact on the angular grid); each mode is convolved with its radial
/// kernel using Gauss points in time against the piecewise-linear source
/// history.
pub fn solve_green(f: &ScalarField, cfg: &SolveConfig) -> Result<ScalarField> {
    check_grid(f, cfg)?;
    let mesh = &f.mesh;
    let (ns, ne) = (mesh.n_s(), mesh.n_e());
    let n_eta = ne - 1;
    let kernel = WedgeHeatKernel::new(mesh.spec.kappa)?;
    let sines: Vec<Vec<f64>> = (1..n_eta)
        .map(|k| {
            (0..ne)
                .map(|j| (PI * ((k * j) % (2 * n_eta)) as f64 / n_eta as f64).sin())
                .collect()
        })
        .collect();
    let coeffs: Vec<Vec<Vec<f64>>> = sines
        .iter()
        .map(|sk| {
            f.values
                .iter()
                .map(|v| {
                    (0..ns)
                        .map(|i| {
                            let row = &v[i * ne..(i + 1) * ne];
                            2.0 / n_eta as f64 * row.iter().zip(sk).map(|(a, b)| a * b).sum::<f64>()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let peaks: Vec<f64> = coeffs.iter().map(|c| c.iter().map(|v| max_abs(v)).fold(0.0, f64::max)).collect();
    let top = peaks.iter().cloned().fold(0.0, f64::max);
    let mut values = vec![vec![0.0; mesh.len()]; f.times.len()];
    if top == 0.0 {
        return ScalarField::new(mesh.clone(), f.times.clone(), values);
    }
    let modes: Vec<usize> = (0..peaks.len()).filter(|&k| peaks[k] > MODE_CUT * top).collect();
    let histories: Vec<Vec<Vec<f64>>> = modes
        .par_iter()
        .map(|&k| mode_history(kernel.order(k + 1), &coeffs[k], mesh, &f.times))
        .collect();
    for (&k, hist) in modes.iter().zip(&histories) {
        for (vm, hm) in values.iter_mut().zip(hist) {
            for i in 1..ns - 1 {
                for j in 1..ne - 1 {
                    vm[i * ne + j] += sines[k][j] * hm[i];
                }
            }
        }
    }
    if values.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("kernel convolution produced non-finite values".into()));
    }
    ScalarField::new(mesh.clone(), f.times.clone(), values)
}

/// Dispatch on `cfg.method`. Kernel convolution only covers the Laplacian.
pub fn solve(f: &ScalarField, a: &CoefficientPath, cfg: &SolveConfig) -> Result<ScalarField> {
    match cfg.method {
        SolveMethod::ImplicitFd => solve_fd(f, a, cfg),
        SolveMethod::KernelConvolution => {
            if !a.is_laplacian() {
                return Err(Error::Capability(
                    "kernel convolution is only available for the Laplacian".into(),
                ));
            }
            solve_green(f, cfg)
        }
    }
}

/// Time profile `tau` of a manufactured solution, with `tau(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeProfile {
    Linear,
    Quadratic,
    Sine { omega: f64 },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Linear => t,
            TimeProfile::Quadratic => t * t,
            TimeProfile::Sine { omega } => (omega * t).sin(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Linear => 1.0,
            TimeProfile::Quadratic => 2.0 * t,
            TimeProfile::Sine { omega } => omega * (omega * t).cos(),
        }
    }
}

fn smooth_step_parts(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let g = (-1.0 / x).exp();
    (g, g / (x * x), g * (1.0 - 2.0 * x) / x.powi(4))
}

/// Smooth radial cutoff equal to 1 on `[0, 1]` and 0 on `[2, inf)`;
/// returns `(chi, chi', chi'')`.
pub fn radial_cutoff(r: f64) -> (f64, f64, f64) {
    if r <= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    if r >= 2.0 {
        return (0.0, 0.0, 0.0);
    }
    let x = 2.0 - r;
    let (a, a1, a2) = smooth_step_parts(x);
    let (b, b1, b2) = smooth_step_parts(1.0 - x);
    let (b1, b2) = (-b1, b2);
    let s = a + b;
    let s1 = a1 + b1;
    let n = a1 * b - a * b1;
    let n1 = a2 * b - a * b2;
    let psi = a / s;
    let psi1 = n / (s * s);
    let psi2 = (n1 * s - 2.0 * n * s1) / (s * s * s);
    (psi, -psi1, psi2)
}

/// Sampled solution, its time derivative and the source that produces it.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub u: ScalarField,
    pub u_t: ScalarField,
    pub f: ScalarField,
}

/// `u(t, r, eta) = tau(c^2 t) chi(c r) (c r)^lam cos(lam eta)` with
/// `lam = pi/kappa` and scale `c`; `f = u_t - Laplacian u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularSolution {
    pub kappa: f64,
    pub tau: TimeProfile,
    pub scale: f64,
}

impl SingularSolution {
    pub fn new(kappa: f64, tau: TimeProfile) -> Result<Self> {
        crate::geometry::ConeDomain::wedge(kappa)?;
        Ok(SingularSolution { kappa, tau, scale: 1.0 })
    }

    /// `u_c(t, x) = u(c^2 t, c x)`, the parabolic rescaling.
    pub fn scaled(&self, scale: f64) -> Self {
        SingularSolution { scale: self.scale * scale, ..*self }
    }

    pub fn exponent(&self) -> f64 {
        PI / self.kappa
    }

    fn harmonic(&self, r: f64, eta: f64) -> f64 {
        let lam = self.exponent();
        r.powf(lam) * (lam * eta).cos()
    }

    pub fn u(&self, t: f64, r: f64, eta: f64) -> f64 {
        let (c, rr) = (self.scale, self.scale * r);
        self.tau.value(c * c * t) * radial_cutoff(rr).0 * self.harmonic(rr, eta)
    }

    pub fn u_t(&self, t: f64, r: f64, eta: f64) -> f64 {
        let (c, rr) = (self.scale, self.scale * r);
        c * c * self.tau.derivative(c * c * t) * radial_cutoff(rr).0 * self.harmonic(rr, eta)
    }

    pub fn f(&self, t: f64, r: f64, eta: f64) -> f64 {
        let (c, rr) = (self.scale, self.scale * r);
        let tt = c * c * t;
        let (chi, chi1, chi2) = radial_cutoff(rr);
        let h = self.harmonic(rr, eta);
        let lap = h * (chi2 + (1.0 + 2.0 * self.exponent()) * chi1 / rr);
        c * c * (self.tau.derivative(tt) * chi * h - self.tau.value(tt) * lap)
    }

    pub fn sample(&self, mesh: &MeshSpec, times: &[f64]) -> Result<Manufactured> {
        if (mesh.kappa - self.kappa).abs() > 1e-12 {
            return Err(Error::InvalidParameter("mesh aperture differs from the solution's".into()));
        }
        let m = mesh.build();
        let t = times.to_vec();
        Ok(Manufactured {
            u: ScalarField::from_fn(m.clone(), t.clone(), |t, r, e| self.u(t, r, e))?,
            u_t: ScalarField::from_fn(m.clone(), t.clone(), |t, r, e| self.u_t(t, r, e))?,
            f: ScalarField::from_fn(m, t, |t, r, e| self.f(t, r, e))?,
        })
    }
}

/// The vertex-singular manufactured pair on `mesh` at `times`.
pub fn manufactured_singular(mesh: &MeshSpec, times: &[f64], tau: TimeProfile) -> Result<Manufactured> {
    SingularSolution::new(mesh.kappa, tau)?.sample(mesh, times)
}

/// `amplitude * exp(-|x - center|^2 / width^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub center: [f64; 2],
    pub width: f64,
    pub amplitude: f64,
}

impl GaussianBump {
    pub fn new(center: [f64; 2], width: f64) -> Self {
        GaussianBump { center, width, amplitude: 1.0 }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        self.amplitude * (-(dx * dx + dy * dy) / (self.width * self.width)).exp()
    }

    pub fn hessian(&self, x: f64, y: f64) -> Matrix2 {
        let d = [x - self.center[0], y - self.center[1]];
        let w2 = self.width * self.width;
        let v = self.value(x, y);
        let mut h = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                h[i][j] = v * (4.0 * d[i] * d[j] / (w2 * w2) - 2.0 * delta / w2);
            }
        }
        h
    }

    /// `int_{R^2}`; the wedge integral agrees when the bump sits far from
    /// the boundary.
    pub fn mass(&self) -> f64 {
        self.amplitude * PI * self.width * self.width
    }
}

/// `u = t w(x)` with `f = w - t a^{ij}(t) D_ij w`.
pub fn manufactured_smooth(bump: &GaussianBump, a: &CoefficientPath, mesh: &MeshSpec, times: &[f64]) -> Result<Manufactured> {
    let m = mesh.build();
    let t = times.to_vec();
    // (w, a^{ij} D_ij w) at a node
    let parts = |t: f64, r: f64, e: f64| -> (f64, f64) {
        let (x, y) = (r * e.cos(), r * e.sin());
        let h = bump.hessian(x, y);
        let am = a.at(t);
        (bump.value(x, y), am[0][0] * h[0][0] + 2.0 * am[0][1] * h[0][1] + am[1][1] * h[1][1])
    };
    Ok(Manufactured {
        u: ScalarField::from_fn(m.clone(), t.clone(), |t, r, e| t * parts(t, r, e).0)?,
        u_t: ScalarField::from_fn(m.clone(), t.clone(), |t, r, e| parts(t, r, e).0)?,
        f: ScalarField::from_fn(m, t, |t, r, e| {
            let (w, l) = parts(t, r, e);
            w - t * l
        })?,
    })
}

/// Left side over right side of the main estimate at `n = w.n`:
/// `(||u||_{bK^{n+2}_{p,theta-p,Theta-p}} + ||u_t||_{bK^n_{p,theta+p,Theta+p}}) / ||f||_{bK^n_{p,theta+p,Theta+p}}`.
pub fn estimate_ratio(u: &ScalarField, u_t: &ScalarField, f: &ScalarField, w: &WeightParams) -> Result<f64> {
    let den = spacetime_norm(f, &w.shifted(w.p))?;
    if !(den > 0.0) {
        return Err(Error::Degenerate("right-hand side norm vanishes".into()));
    }
    Ok(solution_norm(u, u_t, w)? / den)
}

/// `||u||_{bK^2_{p,theta-p,Theta-p}} / (||u||_{bL_{p,theta-p,Theta-p}} + ||f||_{bL_{p,theta+p,Theta+p}})`.
pub fn regularity_ratio(u: &ScalarField, f: &ScalarField, w: &WeightParams) -> Result<f64> {
    let low = w.shifted(-w.p);
    let num = spacetime_norm(u, &low.with_n(2))?;
    let den = spacetime_norm(u, &low.with_n(0))? + spacetime_norm(f, &w.shifted(w.p).with_n(0))?;
    if !(den > 0.0) {
        return Err(Error::Degenerate("right-hand side norm vanishes".into()));
    }
    Ok(num / den)
}
