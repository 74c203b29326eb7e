//! Exponentially scaled modified Bessel functions of real order.
//!
//! `bessel_i_scaled(nu, z)` returns `exp(-z) * I_nu(z)` for `nu >= 0`,
//! `z >= 0`. Three regimes are used:
//!
//! * ascending power series (all terms positive, so no cancellation),
//!   evaluated in log space with running rescaling;
//! * the large-argument Hankel expansion when the order is moderate and the
//!   argument is large compared with `nu^2`;
//! * the Debye uniform expansion for large order, with the `U_k`
//!   polynomials generated from their recurrence.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Orders at or above this use the uniform (Debye) expansion.
pub const DEBYE_MIN_ORDER: f64 = 12.0;
const DEBYE_TERMS: usize = 14;

/// Natural log of the gamma function.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

fn series_limit(nu: f64) -> f64 {
    (nu * nu).max(60.0)
}

/// `exp(-z) I_nu(z)`.
pub fn bessel_i_scaled(nu: f64, z: f64) -> f64 {
    debug_assert!(nu >= 0.0 && z >= 0.0);
    if z == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if nu >= DEBYE_MIN_ORDER {
        debye_scaled(nu, z)
    } else if z <= series_limit(nu) {
        series_scaled(nu, z)
    } else {
        hankel_scaled(nu, z)
    }
}

/// Natural log of `exp(-z) I_nu(z)`; `-inf` when the value underflows.
pub fn ln_bessel_i_scaled(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if nu >= DEBYE_MIN_ORDER {
        ln_debye_scaled(nu, z)
    } else if z <= series_limit(nu) {
        ln_series_scaled(nu, z, ln_gamma(nu + 1.0))
    } else {
        hankel_scaled(nu, z).ln()
    }
}

/// Power series, with `ln Gamma(nu + 1)` supplied by the caller so that
/// batch evaluations over a fixed order can reuse it.
pub fn series_scaled_with_lgamma(nu: f64, z: f64, lgamma_nu1: f64) -> f64 {
    ln_series_scaled(nu, z, lgamma_nu1).exp()
}

fn series_scaled(nu: f64, z: f64) -> f64 {
    ln_series_scaled(nu, z, ln_gamma(nu + 1.0)).exp()
}

fn ln_series_scaled(nu: f64, z: f64, lgamma_nu1: f64) -> f64 {
    const RESCALE: f64 = 1e200;
    let q = 0.25 * z * z;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut log_offset = 0.0_f64;
    let mut m = 0.0_f64;
    loop {
        m += 1.0;
        term *= q / (m * (m + nu));
        sum += term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            log_offset += RESCALE.ln();
        }
        // terms decrease once m exceeds the peak near z/2
        if term < 1e-17 * sum && m > 0.5 * z {
            break;
        }
        if m > 1e6 {
            break;
        }
    }
    nu * (0.5 * z).ln() - lgamma_nu1 - z + sum.ln() + log_offset
}

fn hankel_scaled(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut k = 0.0_f64;
    let mut prev_abs = f64::INFINITY;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        term *= -(mu - odd * odd) / (8.0 * k * z);
        let a = term.abs();
        if a > prev_abs {
            // asymptotic series started diverging: stop before adding
            break;
        }
        sum += term;
        prev_abs = a;
        if a < 1e-17 * sum.abs() || k > 400.0 {
            break;
        }
    }
    sum / (2.0 * PI * z).sqrt()
}

/// Coefficients of the Debye polynomials `U_0 .. U_{DEBYE_TERMS-1}`.
fn debye_polynomials() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![1.0]];
        for _ in 1..DEBYE_TERMS {
            let prev = polys.last().unwrap();
            let mut next = vec![0.0; prev.len() + 3];
            for (j, &c) in prev.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                // (1/2) p^2 (1 - p^2) U'(p)
                if j > 0 {
                    let jc = 0.5 * j as f64 * c;
                    next[j + 1] += jc;
                    next[j + 3] -= jc;
                }
                // (1/8) int_0^p (1 - 5 t^2) U(t) dt
                next[j + 1] += 0.125 * c / (j + 1) as f64;
                next[j + 3] -= 0.625 * c / (j + 3) as f64;
            }
            polys.push(next);
        }
        polys
    })
}

/// Evaluate `U_k(p)`; exposed for tests against the tabulated low orders.
pub fn debye_u(k: usize, p: f64) -> f64 {
    debye_polynomials()[k]
        .iter()
        .rev()
        .fold(0.0, |acc, &c| acc * p + c)
}

fn ln_debye_scaled(nu: f64, z: f64) -> f64 {
    let x = z / nu;
    let root = (1.0 + x * x).sqrt();
    let p = 1.0 / root;
    // nu * eta - z, written to avoid cancellation for large x
    let exponent = nu * (1.0 / (root + x)) + nu * (x / (1.0 + root)).ln();
    let mut sum = 0.0;
    let mut scale = 1.0;
    for k in 0..DEBYE_TERMS {
        let t = debye_u(k, p) * scale;
        sum += t;
        if k > 0 && t.abs() < 1e-17 * sum.abs() {
            break;
        }
        scale /= nu;
    }
    exponent - 0.5 * (2.0 * PI * nu).ln() + 0.5 * p.ln() + sum.ln()
}

fn debye_scaled(nu: f64, z: f64) -> f64 {
    ln_debye_scaled(nu, z).exp()
}
