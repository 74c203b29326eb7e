//! Experiment drivers shared by the command-line tool and the acceptance
//! suite. Each driver returns an [`Outcome`] with a table, named metrics
//! and a pass flag against fixed thresholds.

pub mod config;
pub mod output;

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{
    beltrami_eigenvalue, lambda_from_eigenvalue, legendre_first_root, theta_equals_theta_feasible, weight_windows,
    CriticalExponents, EllipticityPair, WeightWindow,
};
use crate::geometry::{ConeDomain, ConePoint, RegularizedDistance};
use crate::greens_wedge::{
    free_kernel, half_plane_image_kernel, sample_bound_ratios, sample_triples, vertex_slope, KernelBoundParams,
    WedgeHeatKernel,
};
use crate::lemma_oracles::{
    lemma31_scaled, lemma32r_ratio, lemma32s_sweep, polar_grid, ratio_grid, LemmaParams,
};
use crate::quad::GaussRule;
use crate::solver::{
    estimate_ratio, manufactured_smooth, regularity_ratio, solve_fd, solve_fd_with_stats, solve_green,
    CoefficientPath, GaussianBump, SingularSolution, SolveConfig, SolveMethod, TimeProfile, RESIDUAL_TOL,
};
use crate::weighted_norms::{dyadic_norm, kn_norm, MeshSpec, ScalarField, WeightParams};

pub use config::{parse_angle, AngleValue, ConfigFile};
pub use output::{persist, svg_plot, MeshTag, Outcome, RunRecord, Table};

/// Names accepted by `verify`.
pub const VERIFY_NAMES: [&str; 8] = [
    "lemma31",
    "lemma32R",
    "lemma32S",
    "kernel-images",
    "kernel-bound",
    "norm-equivalence",
    "estimate",
    "regularity-n0",
];

fn rel_change(a: f64, b: f64) -> f64 {
    ((b - a) / a).abs()
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / lo
}

/// Reject `(theta, Theta)` outside the admissible windows of the wedge,
/// naming the violated inequality.
pub fn require_feasible(kappa: f64, p: f64, theta: f64, big_theta: f64) -> Result<WeightWindow> {
    let exps = CriticalExponents::laplacian(&ConeDomain::wedge(kappa)?)?;
    let w = weight_windows(p, &exps)?;
    w.check(theta, big_theta).map_err(|v| {
        Error::Config(format!(
            "(theta, Theta) = ({theta}, {big_theta}) is infeasible for kappa = {kappa}, p = {p}: {v} fails"
        ))
    })?;
    Ok(w)
}

/// Critical exponents and weight windows of one domain.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentReport {
    pub exponents: CriticalExponents,
    pub window: WeightWindow,
    pub requested: Option<(f64, f64)>,
    pub violations: Vec<String>,
}

pub fn exponent_report(
    domain: &ConeDomain,
    p: f64,
    nu: Option<EllipticityPair>,
    requested: Option<(f64, f64)>,
) -> Result<ExponentReport> {
    let mut exps = CriticalExponents::laplacian(domain)?;
    if let Some(nu) = nu {
        exps = exps.with_ellipticity(nu);
    }
    let window = weight_windows(p, &exps)?;
    let violations = requested
        .map(|(t, b)| window.violations(t, b).iter().map(|v| v.inequality().to_string()).collect())
        .unwrap_or_default();
    Ok(ExponentReport { exponents: exps, window, requested, violations })
}

/// Exact exponent anchors for the half-plane, the hemisphere and three wedges.
pub fn exponent_anchors() -> Result<Outcome> {
    let mut o = Outcome::new("exponent-anchors", Table::new(&["case", "computed", "expected", "abs_error"]));
    let row = |o: &mut Outcome, case: f64, got: f64, want: f64, tol: f64, name: &str| {
        let err = (got - want).abs();
        o.table.push(vec![case, got, want, err]);
        o.check(name, err, err < tol);
    };
    let half_plane = CriticalExponents::laplacian(&ConeDomain::wedge(PI)?)?;
    row(&mut o, 0.0, half_plane.lambda_plus, 1.0, 1e-12, "half_plane_lambda_error");
    let cap = ConeDomain::cap(0.5 * PI)?;
    let nu = legendre_first_root(0.5 * PI)?;
    row(&mut o, 1.0, nu, 1.0, 1e-8, "hemisphere_degree_error");
    let eig = beltrami_eigenvalue(&cap)?;
    row(&mut o, 2.0, eig, 2.0, 1e-8, "hemisphere_eigenvalue_error");
    row(&mut o, 3.0, lambda_from_eigenvalue(eig, 3), 1.0, 1e-8, "hemisphere_lambda_error");
    for (i, kappa) in [0.5 * PI, PI, 1.5 * PI].into_iter().enumerate() {
        let l = CriticalExponents::laplacian(&ConeDomain::wedge(kappa)?)?.lambda_plus;
        row(&mut o, 4.0 + i as f64, l, PI / kappa, 1e-12, &format!("wedge_lambda_error_{i}"));
    }
    Ok(o)
}

/// Feasibility of `theta = Theta = 2` in the plane over a `(kappa, p)` grid,
/// from the window module and from the direct inequality.
pub fn window_table(kappas: &[f64], ps: &[f64]) -> Result<Outcome> {
    let mut o = Outcome::new(
        "window-table",
        Table::new(&["kappa", "p", "theta_lo", "theta_hi", "feasible", "direct"]),
    );
    let mut mismatches = 0.0;
    for &kappa in kappas {
        let exps = CriticalExponents::laplacian(&ConeDomain::wedge(kappa)?)?;
        for &p in ps {
            let w = weight_windows(p, &exps)?;
            let feasible = theta_equals_theta_feasible(&w, 2.0);
            let lam = PI / kappa;
            let direct = p * (1.0 - lam) < 2.0 && 2.0 < p * (1.0 + lam) && 1.0 < 2.0 && 2.0 < 1.0 + p;
            if feasible != direct {
                mismatches += 1.0;
            }
            o.table.push(vec![kappa, p, w.theta_lo, w.theta_hi, feasible as u8 as f64, direct as u8 as f64]);
        }
    }
    o.check("mismatches", mismatches, mismatches == 0.0);
    Ok(o)
}

/// Half-plane kernel against the reflection formula.
pub fn kernel_images(n: usize, seed: u64) -> Result<Outcome> {
    let k = WedgeHeatKernel::new(PI)?;
    let mut o = Outcome::new("kernel-images", Table::new(&["t", "x1", "x2", "y1", "y2", "series", "images", "rel_error"]));
    let rows: Vec<Vec<f64>> = sample_triples(PI, n, seed)
        .par_iter()
        .map(|(t, x, y)| {
            let g = k.eval(*t, x, y)?;
            let img = half_plane_image_kernel(*t, x, y);
            let rel = if img > 1e-250 { ((g - img) / img).abs() } else { f64::NAN };
            Ok(vec![*t, x.coords[0], x.coords[1], y.coords[0], y.coords[1], g, img, rel])
        })
        .collect::<Result<_>>()?;
    let compared: Vec<f64> = rows.iter().map(|r| r[7]).filter(|v| v.is_finite()).collect();
    let worst = compared.iter().cloned().fold(0.0, f64::max);
    o.table.rows = rows;
    o.metric("compared", compared.len() as f64);
    o.check("max_rel_error", worst, worst < 1e-6);
    Ok(o)
}

/// Symmetry, domination by the free kernel, Chapman-Kolmogorov, mass and
/// the vertex decay rate.
pub fn kernel_consistency(seed: u64) -> Result<Outcome> {
    let mut o = Outcome::new("kernel-consistency", Table::new(&["metric_index", "value"]));
    let kappa = 1.5 * PI;
    let k = WedgeHeatKernel::new(kappa)?;
    let (mut asym, mut excess, mut neg) = (0.0f64, 0.0f64, 0.0f64);
    for (t, x, y) in sample_triples(kappa, 400, seed) {
        let a = k.eval(t, &x, &y)?;
        let b = k.eval(t, &y, &x)?;
        if a.abs() > 1e-300 {
            asym = asym.max((a - b).abs() / a.abs());
        }
        let free = free_kernel(t, &x, &y);
        if free > 1e-300 {
            excess = excess.max((a - free) / free);
        }
        neg = neg.max(-a);
    }
    o.check("symmetry", asym, asym < 1e-12);
    o.check("free_domination_excess", excess, excess < 1e-10);
    o.check("negativity", neg, neg <= 1e-12);

    let (t, s) = (0.04, 0.06);
    let x = ConePoint::polar(1.0, 0.3);
    let y = ConePoint::polar(1.2, -0.2);
    let rule = GaussRule::new(8);
    let half = 0.5 * kappa;
    let (nr, ne) = (24usize, 48usize);
    let total: f64 = (0..nr)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (3.0 * i as f64 / nr as f64, 3.0 * (i + 1) as f64 / nr as f64);
            let mut acc = 0.0;
            for (r, wr) in rule.on(a, b) {
                for j in 0..ne {
                    let (ea, eb) = (-half + 2.0 * half * j as f64 / ne as f64, -half + 2.0 * half * (j + 1) as f64 / ne as f64);
                    for (e, we) in rule.on(ea, eb) {
                        let g1 = k.eval_polar(t, x.r, x.angle, r, e)?;
                        let g2 = k.eval_polar(s, r, e, y.r, y.angle)?;
                        acc += wr * we * r * g1 * g2;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    let direct = k.eval(t + s, &x, &y)?;
    o.check("chapman_kolmogorov", rel_change(direct, total), rel_change(direct, total) < 1e-2);

    let quarter = WedgeHeatKernel::new(0.5 * PI)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in [1e-3, 0.01, 0.1, 1.0] {
        for (r, e) in [(1.0, 0.0), (1.0, 0.7), (0.2, -0.5), (3.0, 0.78)] {
            let m = quarter.kernel_mass(t, &ConePoint::polar(r, e))?;
            lo = lo.min(m);
            hi = hi.max(m);
        }
    }
    o.metric("mass_min", lo);
    o.check("mass_max", hi, lo >= 0.0 && hi <= 1.0 + 1e-6);

    for (i, kappa) in [0.5 * PI, 1.5 * PI].into_iter().enumerate() {
        let kk = WedgeHeatKernel::new(kappa)?;
        let slope = vertex_slope(&kk, 0.5, &ConePoint::polar(1.0, 0.0), 1e-4, 1e-2, 9)?;
        let err = (slope / (PI / kappa) - 1.0).abs();
        o.metric(&format!("vertex_slope_{i}"), slope);
        o.check(&format!("vertex_slope_rel_error_{i}"), err, err < 0.02);
    }
    let values: Vec<f64> = o.metrics.values().copied().collect();
    for (i, v) in values.into_iter().enumerate() {
        o.table.push(vec![i as f64, v]);
    }
    Ok(o)
}

/// Sup of the kernel-to-envelope ratio on nested samples of size `n` and `2n`.
pub fn kernel_bound(kappas: &[f64], fraction: f64, n: usize, seed: u64) -> Result<Outcome> {
    let mut o = Outcome::new("kernel-bound", Table::new(&["kappa", "samples", "sup", "underflows"]));
    for (i, &kappa) in kappas.iter().enumerate() {
        let k = WedgeHeatKernel::new(kappa)?;
        let b = KernelBoundParams::fraction_of_critical(kappa, fraction)?;
        let mut sups = Vec::new();
        for m in [n, 2 * n] {
            let s = sample_bound_ratios(&k, &b, m, seed)?;
            let sup = s.iter().map(|x| x.ratio).fold(0.0, f64::max);
            let under = s.iter().filter(|x| x.underflow).count();
            o.table.push(vec![kappa, m as f64, sup, under as f64]);
            sups.push(sup);
        }
        o.metric(&format!("sup_{i}"), sups[1]);
        let c = rel_change(sups[0], sups[1]);
        o.check(&format!("sup_change_{i}"), c, sups[1].is_finite() && sups[1] > 0.0 && c < 0.05);
    }
    Ok(o)
}

/// Parameter sets satisfying the hypotheses of the first inequality.
pub fn lemma31_parameter_sets() -> Vec<LemmaParams> {
    [(-0.5, 1.0, 0.5), (1.0, 0.5, 1.5), (0.0, 2.0, 0.3), (2.5, 0.5, 0.8)]
        .iter()
        .map(|&(a, b, g)| LemmaParams::new(a, b, g, 0.0, 1.0).expect("finite"))
        .collect()
}

/// Scale invariance and sup of the first inequality over `a/b`.
pub fn verify_lemma31(n_ratios: usize) -> Result<Outcome> {
    let mut o = Outcome::new("lemma31", Table::new(&["set", "ratio", "b", "value"]));
    let mut worst = 0.0f64;
    let mut sup = 0.0f64;
    let ratios = ratio_grid(n_ratios, 1e6);
    for (i, p) in lemma31_parameter_sets().iter().enumerate() {
        let rows: Vec<Vec<Vec<f64>>> = ratios
            .par_iter()
            .map(|&q| {
                [1e-3, 1.0, 1e3]
                    .iter()
                    .map(|&b| Ok(vec![i as f64, q, b, lemma31_scaled(p, q * b, b)?]))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for group in rows {
            let base = group[0][3];
            for r in &group {
                worst = worst.max(rel_change(base, r[3]));
                sup = sup.max(r[3]);
            }
            o.table.rows.extend(group);
        }
    }
    o.metric("sup", sup);
    o.check("ratio_invariance_spread", worst, worst < 1e-8 && sup.is_finite());
    Ok(o)
}

/// Zero-exponent plane integral against `pi`, plus a mirror-symmetric sweep.
pub fn verify_lemma32r(n_r: usize, n_angle: usize) -> Result<Outcome> {
    let mut o = Outcome::new("lemma32R", Table::new(&["set", "x1", "x2", "ratio"]));
    let zero = LemmaParams::new(0.0, 0.0, 0.0, 0.0, 1.0)?;
    let pts = polar_grid(n_r, 1e-3, 50.0, n_angle, PI);
    let rows: Vec<Vec<f64>> = pts
        .par_iter()
        .map(|x| Ok(vec![0.0, x[0], x[1], lemma32r_ratio(&zero, *x)?]))
        .collect::<Result<_>>()?;
    let err = rows.iter().map(|r| (r[3] - PI).abs()).fold(0.0, f64::max);
    o.table.rows.extend(rows);
    o.check("zero_exponent_error", err, err < 1e-8);

    let p = LemmaParams::new(0.5, 1.5, 0.5, 1.0, 1.0)?;
    let half: Vec<[f64; 2]> = polar_grid(n_r.min(5), 1e-2, 20.0, 3, 0.5 * PI * 0.8);
    let rows: Vec<Vec<f64>> = half
        .par_iter()
        .map(|x| {
            let a = lemma32r_ratio(&p, *x)?;
            let b = lemma32r_ratio(&p, [-x[0], x[1]])?;
            Ok(vec![1.0, x[0], x[1], a, b])
        })
        .collect::<Result<_>>()?;
    let mirror = rows.iter().map(|r| rel_change(r[3], r[4])).fold(0.0, f64::max);
    let sup = rows.iter().map(|r| r[3].max(r[4])).fold(0.0, f64::max);
    for r in rows {
        o.table.push(vec![r[0], r[1], r[2], r[3]]);
        o.table.push(vec![r[0], -r[1], r[2], r[4]]);
    }
    o.metric("sup", sup);
    o.check("mirror_asymmetry", mirror, mirror < 1e-9 && sup.is_finite());
    Ok(o)
}

/// Parameter sets for the wedge sweep.
pub fn lemma32s_parameter_sets() -> Vec<LemmaParams> {
    vec![
        LemmaParams::new(-0.5, 1.0, -0.5, 0.5, 1.0).expect("finite"),
        LemmaParams::new(0.5, 1.5, 0.5, 1.0, 1.0).expect("finite"),
    ]
}

/// Sup of the wedge ratio on a polar grid and on the grid with doubled
/// sample density in both directions.
pub fn verify_lemma32s(kappas: &[f64], n_r: usize, n_angle: usize) -> Result<Outcome> {
    let mut o = Outcome::new("lemma32S", Table::new(&["kappa", "set", "level", "samples", "sup"]));
    for (i, &kappa) in kappas.iter().enumerate() {
        for (j, p) in lemma32s_parameter_sets().iter().enumerate() {
            let mut sups = Vec::new();
            for level in 0..2u32 {
                let f = 1usize << level;
                let grid = polar_grid((n_r - 1) * f + 1, 1e-3, 50.0, (n_angle - 1) * f + 1, 0.5 * kappa);
                let s = lemma32s_sweep(p, kappa, &grid)?;
                o.table.push(vec![kappa, j as f64, level as f64, grid.len() as f64, s.sup]);
                sups.push(s.sup);
            }
            let c = rel_change(sups[0], sups[1]);
            o.metric(&format!("sup_{i}_{j}"), sups[1]);
            o.check(&format!("sup_change_{i}_{j}"), c, sups[1].is_finite() && c < 0.05);
        }
    }
    Ok(o)
}

/// The wedge mesh used by the solver comparisons.
pub fn solver_mesh(kappa: f64) -> Result<MeshSpec> {
    MeshSpec::new(kappa, 0.01, 8.0, 96, (64.0 * kappa / PI).round() as usize)
}

fn bump_source(bump: GaussianBump, cfg: &SolveConfig, tau: impl Fn(f64) -> f64 + Sync) -> Result<ScalarField> {
    ScalarField::from_fn(cfg.mesh.build(), cfg.times(), |t, r, e| tau(t) * bump.value(r * e.cos(), r * e.sin()))
}

/// Kernel-convolution against finite-difference solutions, and recovery
/// of smooth manufactured solutions.
pub fn solver_cross_validation() -> Result<Outcome> {
    let mut o = Outcome::new("solver-cross-validation", Table::new(&["case", "kappa", "rel_l2"]));
    for (i, kappa) in [PI, 1.5 * PI].into_iter().enumerate() {
        let mesh = solver_mesh(kappa)?;
        let fd_cfg = SolveConfig::new(mesh, 0.01, 1.0, SolveMethod::ImplicitFd)?;
        let gr_cfg = SolveConfig::new(mesh, 0.05, 1.0, SolveMethod::KernelConvolution)?;
        let bump = GaussianBump::new([1.8, 0.4], 0.7);
        let tau = |t: f64| (PI * t).sin();
        let u_fd = solve_fd(&bump_source(bump, &fd_cfg, tau)?, &CoefficientPath::laplacian(1.0)?, &fd_cfg)?;
        let u_gr = solve_green(&bump_source(bump, &gr_cfg, tau)?, &gr_cfg)?;
        let rel = u_fd.restrict_times(&gr_cfg.times())?.relative_l2_error(&u_gr)?;
        o.table.push(vec![i as f64, kappa, rel]);
        o.meshes.push(MeshTag { label: "solver", level: 0, mesh });
        o.check(&format!("green_vs_fd_{i}"), rel, rel < 0.02);
    }
    let nu = EllipticityPair::new(0.5, 2.0)?;
    let paths = [
        CoefficientPath::laplacian(1.0)?,
        CoefficientPath::constant([[1.5, 0.4], [0.4, 0.8]], 1.0, nu)?,
        CoefficientPath::switching(nu, 1.0)?,
    ];
    for (i, a) in paths.iter().enumerate() {
        let cfg = SolveConfig::new(solver_mesh(1.5 * PI)?, 0.02, 1.0, SolveMethod::ImplicitFd)?;
        let ms = manufactured_smooth(&GaussianBump::new([1.5, 0.5], 0.5), a, &cfg.mesh, &cfg.times())?;
        let (u, stats) = solve_fd_with_stats(&ms.f, a, &cfg)?;
        let rel = u.relative_l2_error(&ms.u)?;
        o.table.push(vec![2.0 + i as f64, 1.5 * PI, rel]);
        o.check(&format!("manufactured_{i}"), rel, rel < 0.01 && stats.max_relative_residual <= RESIDUAL_TOL);
    }
    Ok(o)
}

fn compact_bump(x: f64, y: f64, cx: f64, cy: f64, rad: f64) -> f64 {
    let q = ((x - cx).powi(2) + (y - cy).powi(2)) / (rad * rad);
    if q >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - q)).exp()
    }
}

/// Twelve test fields: an interior bump, an edge-hugging bump and a
/// vertex-singular harmonic profile at each of four scales `e^k`,
/// `k = -3..=0`. Returns `(k, kind, values)`.
pub fn norm_suite(mesh: &crate::weighted_norms::GradedMesh, kappa: f64) -> Vec<(i32, usize, Vec<f64>)> {
    let lam = PI / kappa;
    let edge = 0.5 * kappa - 0.25;
    let mut out = Vec::new();
    for k in -3..=0 {
        let s = (k as f64).exp();
        out.push((k, 0, mesh.sample_xy(|x, y| compact_bump(x, y, s, 0.0, 0.5 * s))));
        out.push((
            k,
            1,
            mesh.sample_xy(|x, y| compact_bump(x, y, s * edge.cos(), s * edge.sin(), 0.2 * s)),
        ));
        let mut v = mesh.sample(|r, e| r.powf(lam) * (lam * e).cos() * compact_bump(r, 0.0, 0.0, 0.0, 2.0 * s));
        for i in 0..mesh.n_s() {
            for j in 0..mesh.n_e() {
                if mesh.is_boundary(i, j) {
                    v[mesh.index(i, j)] = 0.0;
                }
            }
        }
        out.push((k, 2, v));
    }
    out
}

/// Two-sided constants of dyadic against direct weighted norms, at two
/// mesh levels.
pub fn norm_equivalence(kappas: &[f64], weights: &[WeightParams], base_level: u32) -> Result<Outcome> {
    let mut o = Outcome::new(
        "norm-equivalence",
        Table::new(&["kappa", "p", "theta", "Theta", "level", "scale_k", "kind", "dyadic", "direct", "ratio"]),
    );
    for (i, &kappa) in kappas.iter().enumerate() {
        for (j, w) in weights.iter().enumerate() {
            let mut bounds = Vec::new();
            for level in [base_level, base_level + 1] {
                let spec = MeshSpec::desk(kappa)?.refined(level);
                let mesh = spec.build();
                o.meshes.push(MeshTag { label: "norm", level, mesh: spec });
                let psi = RegularizedDistance::new(mesh.domain());
                let rows: Vec<Vec<f64>> = norm_suite(&mesh, kappa)
                    .par_iter()
                    .map(|(k, kind, f)| {
                        let d = dyadic_norm(f, w, &psi, &mesh, None)?.value;
                        let n = kn_norm(f, w, &mesh)?;
                        Ok(vec![kappa, w.p, w.theta, w.big_theta, level as f64, *k as f64, *kind as f64, d, n, d / n])
                    })
                    .collect::<Result<_>>()?;
                let lo = rows.iter().map(|r| r[9]).fold(f64::INFINITY, f64::min);
                let hi = rows.iter().map(|r| r[9]).fold(0.0, f64::max);
                o.table.rows.extend(rows);
                bounds.push((lo, hi));
            }
            let tag = format!("{i}_{j}");
            o.metric(&format!("lower_{tag}"), bounds[1].0);
            o.metric(&format!("upper_{tag}"), bounds[1].1);
            let ok = bounds.iter().all(|(lo, hi)| *lo > 0.0 && hi.is_finite());
            o.check(&format!("lower_change_{tag}"), rel_change(bounds[0].0, bounds[1].0), ok && rel_change(bounds[0].0, bounds[1].0) < 0.1);
            o.check(&format!("upper_change_{tag}"), rel_change(bounds[0].1, bounds[1].1), ok && rel_change(bounds[0].1, bounds[1].1) < 0.1);
        }
    }
    Ok(o)
}

/// Log step of the singular-solution meshes at level 0.
pub const SINGULAR_LOG_STEP: f64 = LN_2 / 32.0;
/// Time slices of the singular-solution runs.
pub const SINGULAR_TIME_STEPS: usize = 16;

/// Radially fine log-polar mesh on `[r_min, r_out]` refined `level` times.
pub fn singular_mesh(kappa: f64, r_min: f64, r_out: f64, level: u32) -> Result<MeshSpec> {
    let n_eta = ((16.0 * kappa / PI).round() as usize).max(8);
    Ok(MeshSpec::with_log_step(kappa, r_min, r_out, SINGULAR_LOG_STEP, n_eta)?.refined(level))
}

fn uniform_times(t_final: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| t_final * k as f64 / steps as f64).collect()
}

/// Inputs of the estimate and regularity experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateParams {
    pub kappa: f64,
    pub p: f64,
    pub theta: f64,
    #[serde(rename = "Theta")]
    pub big_theta: f64,
    pub levels: u32,
}

/// Estimate ratio of the vertex-singular solution under mesh refinement and
/// over the parabolic scaling family `u(c^2 t, c x)`, `c in {1/2, 1, 2}`.
pub fn estimate(params: &EstimateParams) -> Result<Outcome> {
    let EstimateParams { kappa, p, theta, big_theta, levels } = *params;
    require_feasible(kappa, p, theta, big_theta)?;
    let w = WeightParams::new(p, theta, big_theta, 0)?;
    let base = SingularSolution::new(kappa, TimeProfile::Linear)?;
    let mut o = Outcome::new("estimate", Table::new(&["level", "scale", "ratio"]));
    let mut by_level = Vec::new();
    for level in 0..levels.max(1) {
        let mesh = singular_mesh(kappa, 1e-3, 2.5, level)?;
        o.meshes.push(MeshTag { label: "refinement", level, mesh });
        let m = base.sample(&mesh, &uniform_times(1.0, SINGULAR_TIME_STEPS))?;
        let r = estimate_ratio(&m.u, &m.u_t, &m.f, &w)?;
        o.table.push(vec![level as f64, 1.0, r]);
        by_level.push(r);
    }
    let scales = [0.5, 1.0, 2.0];
    let family: Vec<f64> = scales
        .iter()
        .map(|&c| {
            let mesh = singular_mesh(kappa, 1e-3 / c, 2.5 / c, 0)?;
            let m = base.scaled(c).sample(&mesh, &uniform_times(1.0 / (c * c), SINGULAR_TIME_STEPS))?;
            estimate_ratio(&m.u, &m.u_t, &m.f, &w)
        })
        .collect::<Result<_>>()?;
    for (c, r) in scales.iter().zip(&family) {
        o.table.push(vec![0.0, *c, *r]);
    }
    let finite = by_level.iter().chain(&family).all(|r| r.is_finite() && *r > 0.0);
    let refine = by_level.windows(2).map(|v| rel_change(v[0], v[1])).fold(0.0, f64::max);
    o.metric("ratio", *by_level.last().unwrap());
    o.check("refinement_change", refine, finite && refine < 0.10);
    o.check("scale_spread", spread(&family), finite && spread(&family) < 0.05);
    Ok(o)
}

/// Inputs of the regularity experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityParams {
    pub estimate: EstimateParams,
    pub horizons: Vec<f64>,
    /// The suite uses scales `2^(k/2)` for `|k| <= half_width`.
    pub half_width: i32,
}

/// Regularity ratio over a suite of rescaled singular solutions: refinement
/// stability at `T = 1` and the spread of the suite maximum over `T`.
pub fn regularity(params: &RegularityParams) -> Result<Outcome> {
    let EstimateParams { kappa, p, theta, big_theta, levels } = params.estimate;
    require_feasible(kappa, p, theta, big_theta)?;
    let w = WeightParams::new(p, theta, big_theta, 0)?;
    let base = SingularSolution::new(kappa, TimeProfile::Linear)?;
    let scales: Vec<f64> = (-params.half_width..=params.half_width).map(|k| 2f64.powf(0.5 * k as f64)).collect();
    let (c_lo, c_hi) = (scales[0], *scales.last().unwrap());
    let mut o = Outcome::new("regularity-n0", Table::new(&["level", "T", "scale", "ratio"]));
    let ratio_at = |mesh: &MeshSpec, t_final: f64, c: f64| -> Result<f64> {
        let m = base.scaled(c).sample(mesh, &uniform_times(t_final, SINGULAR_TIME_STEPS))?;
        regularity_ratio(&m.u, &m.f, &w)
    };
    let mut worst_refine = 0.0f64;
    let mut prev: Option<Vec<f64>> = None;
    for level in 0..levels.max(1) {
        let mesh = singular_mesh(kappa, 1e-3 / c_hi, 2.5 / c_lo, level)?;
        o.meshes.push(MeshTag { label: "suite", level, mesh });
        let rs: Vec<f64> = scales.iter().map(|&c| ratio_at(&mesh, 1.0, c)).collect::<Result<_>>()?;
        for (c, r) in scales.iter().zip(&rs) {
            o.table.push(vec![level as f64, 1.0, *c, *r]);
        }
        if let Some(p) = &prev {
            worst_refine = worst_refine.max(p.iter().zip(&rs).map(|(a, b)| rel_change(*a, *b)).fold(0.0, f64::max));
        }
        prev = Some(rs);
    }
    let mesh = singular_mesh(kappa, 1e-3 / c_hi, 2.5 / c_lo, 0)?;
    let mut maxima = Vec::new();
    for &t_final in &params.horizons {
        let rs: Vec<f64> = scales.iter().map(|&c| ratio_at(&mesh, t_final, c)).collect::<Result<_>>()?;
        if t_final != 1.0 {
            for (c, r) in scales.iter().zip(&rs) {
                o.table.push(vec![0.0, t_final, *c, *r]);
            }
        }
        maxima.push(rs.iter().cloned().fold(0.0, f64::max));
    }
    let finite = maxima.iter().all(|m| m.is_finite() && *m > 0.0);
    o.metric("suite_max", maxima.iter().cloned().fold(0.0, f64::max));
    o.check("refinement_change", worst_refine, finite && worst_refine < 0.10);
    o.check("horizon_spread", spread(&maxima), finite && spread(&maxima) < 0.10);
    Ok(o)
}

/// Verdict of a refinement trend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Trend {
    Growing,
    Flat,
    Mixed,
}

/// Relative step below which a sequence counts as flat.
pub const FLAT_TOLERANCE: f64 = 1e-3;

pub fn classify_trend(values: &[f64]) -> Trend {
    let steps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / w[0].abs()).collect();
    if steps.iter().all(|s| s.abs() < FLAT_TOLERANCE) {
        Trend::Flat
    } else if steps.iter().all(|s| *s >= FLAT_TOLERANCE) {
        Trend::Growing
    } else {
        Trend::Mixed
    }
}

/// Estimate ratio of the vertex-singular solution as the inner radius of
/// the mesh shrinks by decades. Returns the ratios and the verdict.
pub fn sharpness_series(kappa: f64, p: f64, theta: f64, big_theta: f64, levels: u32) -> Result<(Vec<(f64, f64)>, Trend)> {
    let w = WeightParams::new(p, theta, big_theta, 0)?;
    let sol = SingularSolution::new(kappa, TimeProfile::Linear)?;
    let rows: Vec<(f64, f64)> = (0..levels.max(2))
        .map(|level| {
            let r_min = 1e-2 * 10f64.powi(-(level as i32));
            let mesh = singular_mesh(kappa, r_min, 2.5, 0)?;
            let m = sol.sample(&mesh, &uniform_times(1.0, SINGULAR_TIME_STEPS))?;
            Ok((r_min, estimate_ratio(&m.u, &m.u_t, &m.f, &w)?))
        })
        .collect::<Result<_>>()?;
    let trend = classify_trend(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    Ok((rows, trend))
}

/// Sharpness probe with the half-plane `p = 2`, `theta = Theta = 2` control.
/// The outcome passes when the target grows and the control stays flat; it
/// is exploratory and never gates anything.
pub fn sharpness(params: &EstimateParams, allow_infeasible: bool) -> Result<Outcome> {
    let EstimateParams { kappa, p, theta, big_theta, levels } = *params;
    let feasible = require_feasible(kappa, p, theta, big_theta);
    match feasible {
        Err(Error::Config(_)) if allow_infeasible => {}
        Err(e) => return Err(e),
        Ok(_) => {}
    }
    let mut o = Outcome::new("sharpness", Table::new(&["case", "level", "r_min", "ratio"]));
    let (target, t_trend) = sharpness_series(kappa, p, theta, big_theta, levels)?;
    let (control, c_trend) = sharpness_series(PI, 2.0, 2.0, 2.0, levels)?;
    for (case, rows) in [(0.0, &target), (1.0, &control)] {
        for (level, (r_min, ratio)) in rows.iter().enumerate() {
            o.table.push(vec![case, level as f64, *r_min, *ratio]);
        }
    }
    let code = |t: Trend| match t {
        Trend::Growing => 1.0,
        Trend::Flat => 0.0,
        Trend::Mixed => -1.0,
    };
    o.metric("target_trend", code(t_trend));
    o.metric("control_trend", code(c_trend));
    o.metric("target_growth", target.last().unwrap().1 / target[0].1 - 1.0);
    o.metric("control_change", control.last().unwrap().1 / control[0].1 - 1.0);
    o.passed = t_trend == Trend::Growing && c_trend == Trend::Flat;
    o.summary = format!("target trend {t_trend:?}, control trend {c_trend:?}");
    Ok(o)
}

/// Kernel values `G(t; (r, eta), y)` on a polar grid for a fixed source point.
pub fn kernel_table(kappa: f64, t: f64, source: [f64; 2], n_r: usize, n_eta: usize) -> Result<Outcome> {
    let k = WedgeHeatKernel::new(kappa)?;
    let y = ConePoint::polar(source[0], source[1]);
    let mut o = Outcome::new("kernel-table", Table::new(&["t", "r", "eta", "kernel", "free"]));
    let half = 0.5 * kappa;
    let rows: Vec<Vec<Vec<f64>>> = (0..n_r)
        .into_par_iter()
        .map(|i| {
            let r = 1e-2 * (400f64).powf(i as f64 / (n_r.max(2) - 1) as f64);
            (1..n_eta)
                .map(|j| {
                    let eta = -half + 2.0 * half * j as f64 / n_eta as f64;
                    let x = ConePoint::polar(r, eta);
                    Ok(vec![t, r, eta, k.eval(t, &x, &y)?, free_kernel(t, &x, &y)])
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    o.table.rows = rows.into_iter().flatten().collect();
    let excess = o.table.rows.iter().map(|r| r[3] - r[4]).fold(f64::NEG_INFINITY, f64::max);
    o.check("free_domination_excess", excess.max(0.0), excess <= 1e-10);
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_table_has_no_mismatches() {
        let o = window_table(&[PI, 1.5 * PI, 1.9 * PI], &[1.5, 2.0, 5.0, 6.0]).unwrap();
        assert!(o.passed);
        let feasible = o.table.column("feasible").unwrap();
        // kappa = 3pi/2, p = 6 sits on the edge theta = p(1 - lambda)
        assert_eq!(feasible[7], 0.0);
        assert_eq!(feasible[2], 1.0);
    }

    #[test]
    fn infeasible_pairs_name_the_inequality() {
        let e = require_feasible(1.5 * PI, 8.0, 2.0, 2.0).unwrap_err();
        assert!(e.to_string().contains("θ > p(1−λ⁺)"), "{e}");
        assert!(require_feasible(PI, 2.0, 2.0, 2.0).is_ok());
        let est = EstimateParams { kappa: 1.9 * PI, p: 5.0, theta: 2.0, big_theta: 2.0, levels: 2 };
        assert!(matches!(estimate(&est), Err(Error::Config(_))));
        assert!(matches!(sharpness(&est, false), Err(Error::Config(_))));
    }

    #[test]
    fn trends() {
        assert_eq!(classify_trend(&[1.0, 1.00001, 1.0]), Trend::Flat);
        assert_eq!(classify_trend(&[1.0, 1.01, 1.05]), Trend::Growing);
        assert_eq!(classify_trend(&[1.0, 1.01, 1.0]), Trend::Mixed);
    }

    #[test]
    fn exponent_report_lists_violations() {
        let r = exponent_report(&ConeDomain::wedge(PI).unwrap(), 2.0, None, Some((5.0, 0.5))).unwrap();
        assert_eq!(r.violations, vec!["θ < p(d−1+λ⁻)".to_string(), "Θ > d−1".to_string()]);
        assert!((r.window.theta_hi - 4.0).abs() < 1e-12);
    }

    #[test]
    fn suite_has_twelve_members_on_four_scales() {
        let mesh = MeshSpec::desk(PI).unwrap().build();
        let s = norm_suite(&mesh, PI);
        assert_eq!(s.len(), 12);
        let mut ks: Vec<i32> = s.iter().map(|m| m.0).collect();
        ks.dedup();
        assert_eq!(ks, vec![-3, -2, -1, 0]);
        assert!(s.iter().all(|m| m.2.iter().any(|v| *v != 0.0)));
    }
}
