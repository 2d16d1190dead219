//! Bessel and Hankel functions of real, positive argument.
//!
//! Orders 0 and 1 use the ascending power series for small arguments, Miller's
//! backward recurrence with Neumann sums in the middle range, and the Hankel
//! asymptotic expansion for large arguments. Higher orders come from Miller's
//! recurrence (J) or forward recurrence (Y).

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this the power series loses less than two digits to cancellation.
const SERIES_LIMIT: f64 = 2.0;
/// Above this the smallest asymptotic term is below 1e-17.
const ASYMPTOTIC_LIMIT: f64 = 20.0;

/// Bessel function of the first kind, order 0.
pub fn j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < SERIES_LIMIT {
        j_series(0, ax)
    } else {
        orders01(ax).0
    }
}

/// Bessel function of the first kind, order 1.
pub fn j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT {
        j_series(1, ax)
    } else {
        orders01(ax).1
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// Bessel function of the second kind, order 0. `NaN` for `x <= 0`.
pub fn y0(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    if x < SERIES_LIMIT {
        y0_series(x)
    } else {
        orders01(x).2
    }
}

/// Bessel function of the second kind, order 1. `NaN` for `x <= 0`.
pub fn y1(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    if x < SERIES_LIMIT {
        y1_series(x)
    } else {
        orders01(x).3
    }
}

/// Hankel function of the first kind, order 0: `J0 + i Y0`.
pub fn hankel1_0(x: f64) -> Complex64 {
    if x < SERIES_LIMIT {
        Complex64::new(j_series(0, x), y0_series(x))
    } else {
        let (j, _, y, _) = orders01(x);
        Complex64::new(j, y)
    }
}

/// Hankel function of the first kind, order 1: `J1 + i Y1`.
pub fn hankel1_1(x: f64) -> Complex64 {
    if x < SERIES_LIMIT {
        Complex64::new(j_series(1, x), y1_series(x))
    } else {
        let (_, j, _, y) = orders01(x);
        Complex64::new(j, y)
    }
}

/// `(J0, J1, Y0, Y1)` for `x >= SERIES_LIMIT`.
fn orders01(x: f64) -> (f64, f64, f64, f64) {
    if x >= ASYMPTOTIC_LIMIT {
        let (j0, y0) = asymptotic(0, x);
        let (j1, y1) = asymptotic(1, x);
        return (j0, j1, y0, y1);
    }
    let j = miller_sequence(x, 0);
    let log_term = 2.0 / PI * ((0.5 * x).ln() + EULER_GAMMA);
    let (mut s0, mut s1) = (0.0, 0.0);
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = log_term * j[0] - 4.0 / PI * s0;
    let y1 = -2.0 / (PI * x) * j[0] + log_term * j[1] + 2.0 / PI * s1;
    (j[0], j[1], y0, y1)
}

/// Bessel function of the first kind of integer order `n >= 0`.
pub fn jn(n: u32, x: f64) -> f64 {
    match n {
        0 => return j0(x),
        1 => return j1(x),
        _ => {}
    }
    if x == 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    if ax > n as f64 {
        // Forward recurrence is stable while the order stays below the argument.
        let (mut prev, mut cur) = (j0(ax), j1(ax));
        for k in 1..n {
            let next = 2.0 * k as f64 / ax * cur - prev;
            prev = cur;
            cur = next;
        }
        return sign * cur;
    }
    sign * miller_jn(n, ax)
}

/// Bessel function of the second kind of integer order `n >= 0`. `NaN` for `x <= 0`.
pub fn yn(n: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    match n {
        0 => return y0(x),
        1 => return y1(x),
        _ => {}
    }
    let (mut prev, mut cur) = (y0(x), y1(x));
    for k in 1..n {
        let next = 2.0 * k as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Hankel function of the first kind of integer order.
pub fn hankel1(n: u32, x: f64) -> Complex64 {
    Complex64::new(jn(n, x), yn(n, x))
}

/// First derivative of `J_n`.
pub fn jn_prime(n: u32, x: f64) -> f64 {
    if n == 0 {
        -j1(x)
    } else {
        jn(n - 1, x) - n as f64 / x * jn(n, x)
    }
}

/// First derivative of `Y_n`.
pub fn yn_prime(n: u32, x: f64) -> f64 {
    if n == 0 {
        -y1(x)
    } else {
        yn(n - 1, x) - n as f64 / x * yn(n, x)
    }
}

/// First derivative of `H^(1)_n`.
pub fn hankel1_prime(n: u32, x: f64) -> Complex64 {
    Complex64::new(jn_prime(n, x), yn_prime(n, x))
}

fn j_series(n: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = if n == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * (kf + n as f64));
        sum += term;
        if kf > 0.5 * x && term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn y0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut pow = 1.0;
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        pow *= -q / (kf * kf);
        harmonic += 1.0 / kf;
        let term = -pow * harmonic;
        sum += term;
        if kf > 0.5 * x && term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    2.0 / PI * ((0.5 * x).ln() + EULER_GAMMA) * j_series(0, x) + 2.0 / PI * sum
}

fn y1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    // k = 0 term: (psi(1) + psi(2)) * (x/2)
    let mut pow = 0.5 * x;
    let mut h_k = 0.0;
    let mut h_k1 = 1.0;
    let mut sum = (2.0 * -EULER_GAMMA + h_k + h_k1) * pow;
    for k in 1..200 {
        let kf = k as f64;
        pow *= -q / (kf * (kf + 1.0));
        h_k += 1.0 / kf;
        h_k1 += 1.0 / (kf + 1.0);
        let term = (2.0 * -EULER_GAMMA + h_k + h_k1) * pow;
        sum += term;
        if kf > 0.5 * x && term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -2.0 / (PI * x) + 2.0 / PI * (0.5 * x).ln() * j_series(1, x) - sum / PI
}

/// Hankel asymptotic expansion; returns `(J_nu, Y_nu)`.
fn asymptotic(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    // sum_k i^k a_k(nu) / x^k, truncated at the smallest term
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..64 {
        let odd = (2 * k - 1) as f64;
        let next = term * Complex64::new(0.0, 1.0) * ((mu - odd * odd) / (8.0 * k as f64 * x));
        if next.norm() >= term.norm() {
            break;
        }
        term = next;
        sum += term;
        if term.norm() < 1e-17 {
            break;
        }
    }
    let omega = x - nu as f64 * FRAC_PI_2 - FRAC_PI_4;
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = omega.sin_cos();
    let (p, q) = (sum.re, sum.im);
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// `J_0(x) .. J_N(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 sum J_2k = 1`. `N` is at least `min_len - 1` and large enough that
/// the truncated tail is negligible.
fn miller_sequence(x: f64, min_len: usize) -> Vec<f64> {
    const RESCALE: f64 = 1e200;
    let mut top = (1.5 * x) as usize + 40 + 2 * min_len;
    top += top % 2;
    let mut f = vec![0.0; top + 2];
    f[top] = 1.0;
    for k in (1..=top).rev() {
        f[k - 1] = 2.0 * k as f64 / x * f[k] - f[k + 1];
        if f[k - 1].abs() > RESCALE {
            f.iter_mut().for_each(|v| *v /= RESCALE);
        }
    }
    let norm = f[0] + 2.0 * f.iter().skip(2).step_by(2).sum::<f64>();
    f.truncate(top + 1);
    f.iter_mut().for_each(|v| *v /= norm);
    f
}

fn miller_jn(n: u32, x: f64) -> f64 {
    miller_sequence(x, n as usize + 1)[n as usize]
}
