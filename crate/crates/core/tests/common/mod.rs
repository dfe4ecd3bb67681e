//! Bessel functions by power series and their zeros by bisection.
#![allow(dead_code)]

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `J_n(x)` from its Maclaurin series; cancellation limits it to `x <= 8` or so.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = (0.5 * x).powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..200 {
        term *= q / (m as f64 * (m + n) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && m as f64 > x {
            break;
        }
    }
    sum
}

/// `Y_0(x)` from `(2/π)[(ln(x/2) + γ) J_0(x) + Σ (-1)^{m+1} H_m (x²/4)^m / (m!)²]`.
pub fn bessel_y0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut a = 1.0;
    let mut h = 0.0;
    let mut s = 0.0;
    for m in 1..200 {
        a *= q / (m as f64 * m as f64);
        h += 1.0 / m as f64;
        let t = if m % 2 == 1 { a * h } else { -a * h };
        s += t;
        if t.abs() < 1e-18 * s.abs().max(1e-300) && m as f64 > x {
            break;
        }
    }
    std::f64::consts::FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * bessel_j(0, x) + s)
}

pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    assert!(fa * f(b) <= 0.0, "no sign change on [{a}, {b}]");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// First zero of `f` on `(lo, hi]`, bracketed by scanning with `step`.
pub fn first_zero(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let mut a = lo;
    while a < hi {
        let b = (a + step).min(hi);
        if f(a) * f(b) <= 0.0 {
            return bisect(&f, a, b);
        }
        a = b;
    }
    panic!("no zero on ({lo}, {hi}]");
}

/// `j_{n,1}`, the first positive zero of `J_n`.
pub fn bessel_zero(n: u32) -> f64 {
    first_zero(|x| bessel_j(n, x), 0.5, 20.0, 0.05)
}

/// Smallest Dirichlet eigenvalue of `-Δ` on the annulus `a < r < b`: the
/// square of the first root of `J_0(x a) Y_0(x b) - J_0(x b) Y_0(x a)`.
pub fn annulus_lambda1(a: f64, b: f64) -> f64 {
    let f = |x: f64| bessel_j(0, x * a) * bessel_y0(x * b) - bessel_j(0, x * b) * bessel_y0(x * a);
    let x = first_zero(f, 0.1 / (b - a), 12.0 / b, 0.01);
    x * x
}
