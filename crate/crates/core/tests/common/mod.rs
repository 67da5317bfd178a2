//! Shared test oracles: an adaptive Simpson integrator and closed-form
//! Gaussian/Laplace law ingredients, kept independent of the library's
//! quadrature path.

#![allow(dead_code)]

pub fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        m: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let left = simpson(f, a, lm, m);
        let right = simpson(f, m, rm, b);
        if depth > 60 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, lm, m, left, tol / 2.0, depth + 1)
                + recurse(f, m, rm, b, right, tol / 2.0, depth + 1)
        }
    }
    let m = 0.5 * (a + b);
    recurse(&f, a, m, b, simpson(&f, a, m, b), tol, 0)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * core::f64::consts::PI).sqrt()
}

/// Standard normal distribution function via `erf`.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

/// Standard normal upper tail, stable for large `x`.
pub fn norm_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

/// Laplace(rate 2) density: invariant law of the standard switching model.
pub fn laplace_pdf(x: f64) -> f64 {
    (-2.0 * x.abs()).exp()
}

pub fn laplace_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * (2.0 * x).exp()
    } else {
        1.0 - 0.5 * (-2.0 * x).exp()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
