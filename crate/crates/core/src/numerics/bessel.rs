//! Bessel functions of the first kind, integer order.
//!
//! `bessel_j` is the production path: an ascending power series where it is
//! well conditioned and Miller's backward recurrence (normalized with
//! `J0 + 2 Σ J2k = 1`) everywhere else. `bessel_j_integral` evaluates the
//! integral representation by periodic trapezoidal quadrature and exists to
//! cross-check the former.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::NumericError;

/// Largest supported |order|.
pub const MAX_ORDER: i32 = 64;
/// Largest supported |argument|.
pub const MAX_ARG: f64 = 1e4;

const SERIES_ARG_LIMIT: f64 = 8.0;
const RESCALE: f64 = 1e250;

fn check_domain(order: i32, x: f64) -> Result<(), NumericError> {
    if order.unsigned_abs() > MAX_ORDER as u32 || !x.is_finite() || x.abs() > MAX_ARG {
        return Err(NumericError::Domain(format!(
            "bessel_j: order {order} / argument {x} outside |l| <= {MAX_ORDER}, |x| <= {MAX_ARG}"
        )));
    }
    Ok(())
}

/// `J_order(x)`, the Bessel function of the first kind.
pub fn bessel_j(order: i32, x: f64) -> Result<f64, NumericError> {
    check_domain(order, x)?;
    let n = order.unsigned_abs() as usize;
    // J_{-n} = (-1)^n J_n and J_n(-x) = (-1)^n J_n(x)
    let mut sign = 1.0;
    if order < 0 && n % 2 == 1 {
        sign = -sign;
    }
    if x < 0.0 && n % 2 == 1 {
        sign = -sign;
    }
    let ax = x.abs();
    if ax == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let value = if ax <= SERIES_ARG_LIMIT || (n as f64) > ax * ax / 4.0 {
        series(n, ax)
    } else {
        miller(n, ax)
    };
    Ok(sign * value)
}

fn series(n: usize, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    // (x/2)^n / n!
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut sum = term;
    let mut k = 1usize;
    loop {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || k > 500 {
            break;
        }
        k += 1;
    }
    sum
}

fn miller(n: usize, x: f64) -> f64 {
    let top = (n as f64).max(x) + 20.0 + 12.0 * x.cbrt();
    let mut m = top.ceil() as usize;
    if m % 2 == 1 {
        m += 1;
    }
    let two_over_x = 2.0 / x;
    let mut above = 0.0_f64; // J_{k+1}
    let mut current = 1e-300_f64; // J_k, arbitrary scale
    let mut wanted = 0.0;
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        let below = k as f64 * two_over_x * current - above;
        above = current;
        current = below;
        // current now holds J_{k-1}
        let idx = k - 1;
        if idx == n {
            wanted = current;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * current;
        }
        if current.abs() > RESCALE {
            current /= RESCALE;
            above /= RESCALE;
            wanted /= RESCALE;
            norm /= RESCALE;
        }
    }
    norm += current;
    wanted / norm
}

/// Integral representation `(1/(2π j^l)) ∫ e^{jlτ} e^{jx cos τ} dτ` by
/// trapezoidal quadrature, refined until the real part stabilizes.
///
/// Test oracle only; much slower than [`bessel_j`].
pub fn bessel_j_integral(order: i32, x: f64) -> Result<f64, NumericError> {
    check_domain(order, x)?;
    let l = order as f64;
    let min_points = 2 * (order.unsigned_abs() as usize + x.abs().ceil() as usize) + 32;
    let mut points = 64usize;
    while points < min_points {
        points *= 2;
    }
    let j_pow = Complex64::i().powi(order);
    let eval = |m: usize| -> Complex64 {
        let h = 2.0 * PI / m as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..m {
            let tau = i as f64 * h;
            acc += Complex64::from_polar(1.0, l * tau + x * tau.cos());
        }
        acc / (m as f64) / j_pow
    };
    let mut prev = eval(points);
    loop {
        points *= 2;
        if points > 1 << 22 {
            return Err(NumericError::NonConvergence(format!(
                "bessel_j_integral({order}, {x}) did not settle"
            )));
        }
        let next = eval(points);
        if (next.re - prev.re).abs() <= 1e-14 {
            if next.im.abs() >= 1e-9 {
                return Err(NumericError::NonConvergence(format!(
                    "bessel_j_integral({order}, {x}): imaginary residue {}",
                    next.im
                )));
            }
            return Ok(next.re);
        }
        prev = next;
    }
}
