//! Fixed-stencil quadrature and differentiation on uniform samples.

use crate::prelude::*;

use super::Sample;

/// Composite Simpson weights for `m` uniform intervals of width `h`. An odd
/// interval count closes with the 3/8 rule; one or two intervals fall back
/// to the trapezoid and Simpson rules respectively.
pub fn simpson_weights(m: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; m + 1];
    match m {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let (even, tail) = if m.is_multiple_of(2) {
                (m, 0)
            } else {
                (m - 3, 3)
            };
            for k in (0..even).step_by(2) {
                w[k] += h / 3.0;
                w[k + 1] += 4.0 * h / 3.0;
                w[k + 2] += h / 3.0;
            }
            if tail == 3 {
                let s = 3.0 * h / 8.0;
                w[even] += s;
                w[even + 1] += 3.0 * s;
                w[even + 2] += 3.0 * s;
                w[even + 3] += s;
            }
        }
    }
    w
}

/// Sixth-order first derivative of uniformly spaced samples. The left end
/// uses the even reflection `u(-r) = u(r)` of a regular radial profile, the
/// right end one-sided seven-point stencils.
pub fn derivative_even<S: Sample>(u: &[S], h: f64) -> Vec<S> {
    const CENTRAL: [f64; 7] = [
        -1.0 / 60.0,
        3.0 / 20.0,
        -3.0 / 4.0,
        0.0,
        3.0 / 4.0,
        -3.0 / 20.0,
        1.0 / 60.0,
    ];
    // rows for the last three nodes, applied to u[n-6..=n]
    const ONE_SIDED: [[f64; 7]; 3] = [
        [
            1.0 / 60.0,
            -2.0 / 15.0,
            1.0 / 2.0,
            -4.0 / 3.0,
            7.0 / 12.0,
            2.0 / 5.0,
            -1.0 / 30.0,
        ],
        [
            -1.0 / 30.0,
            1.0 / 4.0,
            -5.0 / 6.0,
            5.0 / 3.0,
            -5.0 / 2.0,
            77.0 / 60.0,
            1.0 / 6.0,
        ],
        [
            1.0 / 6.0,
            -6.0 / 5.0,
            15.0 / 4.0,
            -20.0 / 3.0,
            15.0 / 2.0,
            -6.0,
            49.0 / 20.0,
        ],
    ];
    let n = u.len() - 1;
    debug_assert!(n >= 6);
    let at = |i: isize| -> S { u[i.unsigned_abs()] };
    let inv = 1.0 / h;
    let mut du = vec![S::ZERO; n + 1];
    for (i, d) in du.iter_mut().enumerate().take(n - 2) {
        let i = i as isize;
        let mut acc = S::ZERO;
        for (k, c) in CENTRAL.iter().enumerate() {
            if *c != 0.0 {
                acc = acc + at(i + k as isize - 3) * *c;
            }
        }
        *d = acc * inv;
    }
    for (row, w) in ONE_SIDED.iter().enumerate() {
        let mut acc = S::ZERO;
        for (k, c) in w.iter().enumerate() {
            acc = acc + u[n - 6 + k] * *c;
        }
        du[n - 2 + row] = acc * inv;
    }
    du
}

/// Fourth-order second derivative on interior nodes `1..n-1` with even
/// reflection at the origin. The last two nodes are left at zero.
pub fn second_derivative_even(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len() - 1;
    let at = |i: isize| -> f64 { u[i.unsigned_abs()] };
    let inv = 1.0 / (12.0 * h * h);
    let mut d2 = vec![0.0; n + 1];
    for (i, d) in d2.iter_mut().enumerate().take(n - 1) {
        let i = i as isize;
        *d = (-at(i - 2) + 16.0 * at(i - 1) - 30.0 * at(i) + 16.0 * at(i + 1) - at(i + 2)) * inv;
    }
    d2
}

/// Four-point Lagrange interpolation at fractional index `x` over samples
/// `get(k)`, `k = 0..=n`. Indices below zero go through `reflect`.
pub fn lagrange4<S: Sample>(x: f64, n: usize, reflect: bool, get: impl Fn(usize) -> S) -> S {
    let mut i = x.floor() as isize;
    let lo_limit: isize = if reflect { -1 } else { 0 };
    if i - 1 < lo_limit {
        i = lo_limit + 1;
    }
    if i + 2 > n as isize {
        i = n as isize - 2;
    }
    let t = x - i as f64;
    let fetch = |k: isize| -> S { get(k.unsigned_abs()) };
    let (a, b, c, d) = (fetch(i - 1), fetch(i), fetch(i + 1), fetch(i + 2));
    let wa = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let wb = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let wc = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let wd = (t + 1.0) * t * (t - 1.0) / 6.0;
    a * wa + b * wb + c * wc + d * wd
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_cubics_exactly() {
        for m in [2usize, 3, 5, 16, 17] {
            let h = 2.0 / m as f64;
            let w = simpson_weights(m, h);
            let s: f64 = w
                .iter()
                .enumerate()
                .map(|(k, wk)| {
                    let x = k as f64 * h;
                    wk * (x * x * x - 2.0 * x + 1.0)
                })
                .sum();
            assert!((s - 2.0).abs() < 1e-12, "m = {m}: {s}");
        }
    }

    #[test]
    fn derivative_of_even_sextic_is_exact() {
        let h = 0.1;
        let f = |r: f64| r.powi(6) - 2.0 * r.powi(4) - 3.0 * r * r + 2.0;
        let df = |r: f64| 6.0 * r.powi(5) - 8.0 * r.powi(3) - 6.0 * r;
        let u: Vec<f64> = (0..=40).map(|i| f(i as f64 * h)).collect();
        let du = derivative_even(&u, h);
        for (i, d) in du.iter().enumerate() {
            let r = i as f64 * h;
            assert!((d - df(r)).abs() < 1e-8 * (1.0 + df(r).abs()), "node {i}");
        }
    }

    #[test]
    fn lagrange_reproduces_cubic() {
        let u: Vec<f64> = (0..=10).map(|i| (i as f64).powi(3) - i as f64).collect();
        for x in [0.0, 0.3, 4.5, 9.9, 10.0] {
            let v = lagrange4(x, 10, false, |k| u[k]);
            assert!((v - (x * x * x - x)).abs() < 1e-9);
        }
    }
}
