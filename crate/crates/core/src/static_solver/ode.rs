//! Adaptive explicit Runge–Kutta integration with the 8(5,3) Dormand–Prince
//! pair.

use super::tableau::{A, C, E3, E5, STAGES};
use crate::prelude::*;
use crate::{Error, Result};

pub(crate) trait System<const N: usize> {
    fn rhs(&self, r: f64, y: &[f64; N]) -> [f64; N];
    /// Per-component error scale at `(r, y)`; already multiplied by the
    /// relative tolerance.
    fn scale(&self, r: f64, y: &[f64; N], rtol: f64) -> [f64; N];
}

pub(crate) enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub rtol: f64,
    pub first_step: f64,
    pub max_step: f64,
}

/// Integrates from `(r0, y0)` towards `r_end`, reporting every accepted
/// step as `(r, y, y')`. Returns the last accepted radius.
pub(crate) fn integrate<const N: usize, S: System<N>>(
    sys: &S,
    r0: f64,
    y0: [f64; N],
    r_end: f64,
    settings: Settings,
    mut on_step: impl FnMut(f64, &[f64; N], &[f64; N]) -> Control,
) -> Result<f64> {
    const SAFETY: f64 = 0.9;
    const MIN_FACTOR: f64 = 0.2;
    const MAX_FACTOR: f64 = 10.0;

    let mut r = r0;
    let mut y = y0;
    let mut f = sys.rhs(r, &y);
    let mut h = settings.first_step.min(r_end - r0);
    let mut k = [[0.0; N]; STAGES + 1];

    while r < r_end {
        h = h.min(r_end - r).min(settings.max_step);
        if h <= 1e-14 * r.abs().max(1.0) {
            return Err(Error::Convergence(format!(
                "step size underflow at r = {r:e}"
            )));
        }
        k[0] = f;
        for s in 1..STAGES {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for c in 0..N {
                        ys[c] += h * a * kj[c];
                    }
                }
            }
            k[s] = sys.rhs(r + C[s] * h, &ys);
        }
        let mut y_new = y;
        for (j, kj) in k.iter().enumerate().take(STAGES) {
            let b = A[STAGES][j];
            if b != 0.0 {
                for c in 0..N {
                    y_new[c] += h * b * kj[c];
                }
            }
        }
        let r_new = r + h;
        let f_new = sys.rhs(r_new, &y_new);
        k[STAGES] = f_new;

        let sc_old = sys.scale(r, &y, settings.rtol);
        let sc_new = sys.scale(r_new, &y_new, settings.rtol);
        let (mut e5, mut e3) = (0.0, 0.0);
        for c in 0..N {
            let sc = sc_old[c].max(sc_new[c]);
            let (mut d5, mut d3) = (0.0, 0.0);
            for (j, kj) in k.iter().enumerate() {
                d5 += E5[j] * kj[c];
                d3 += E3[j] * kj[c];
            }
            e5 += (d5 / sc) * (d5 / sc);
            e3 += (d3 / sc) * (d3 / sc);
        }
        let err = if e5 == 0.0 && e3 == 0.0 {
            0.0
        } else {
            h * e5 / (((e5 + 0.01 * e3) * N as f64).sqrt())
        };
        if !err.is_finite() {
            h *= MIN_FACTOR;
            continue;
        }
        if err <= 1.0 {
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-1.0 / 8.0)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            r = r_new;
            y = y_new;
            f = f_new;
            h *= factor;
            if let Control::Stop = on_step(r, &y, &f) {
                break;
            }
        } else {
            h *= (SAFETY * err.powf(-1.0 / 8.0)).max(MIN_FACTOR);
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;

    impl System<2> for Oscillator {
        fn rhs(&self, _r: f64, y: &[f64; 2]) -> [f64; 2] {
            [y[1], -y[0]]
        }
        fn scale(&self, _r: f64, y: &[f64; 2], rtol: f64) -> [f64; 2] {
            let s = rtol * (y[0].abs() + y[1].abs());
            [s, s]
        }
    }

    #[test]
    fn harmonic_oscillator_to_tolerance() {
        let settings = Settings {
            rtol: 1e-12,
            first_step: 1e-3,
            max_step: 1.0,
        };
        let mut last = [0.0; 2];
        let mut steps = 0;
        let end = integrate(&Oscillator, 0.0, [1.0, 0.0], 20.0, settings, |_, y, _| {
            last = *y;
            steps += 1;
            Control::Continue
        })
        .unwrap();
        assert_eq!(end, 20.0);
        assert!(
            (last[0] - 20f64.cos()).abs() < 1e-10,
            "{}",
            last[0] - 20f64.cos()
        );
        assert!((last[1] + 20f64.sin()).abs() < 1e-10);
        assert!(steps < 200, "{steps} steps");
    }
}
