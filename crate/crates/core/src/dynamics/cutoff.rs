//! Radial weight `φ_R(r) = R² Θ(r/R)` equal to `r²` on `r ≤ R` and constant
//! beyond `2R`, with `Θ'' = θ` a smooth plateau of height 2 on `[0, 1]`.

#[allow(unused_imports)]
use crate::prelude::*;

/// `C^∞` step, 0 below 0 and 1 above 1.
fn smooth_step(x: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        f(x) / (f(x) + f(1.0 - x))
    }
}

fn plateau(s: f64) -> f64 {
    2.0 * smooth_step(2.0 - s)
}

const PANELS: usize = 400;
const FD_STEP: f64 = 1e-4;

/// `∫_0^s θ`, exact on `[0, 1]` and Simpson on the transition.
fn plateau_integral(s: f64) -> f64 {
    if s <= 1.0 {
        return 2.0 * s;
    }
    let top = s.min(2.0);
    let h = (top - 1.0) / PANELS as f64;
    let mut acc = plateau(1.0) + plateau(top);
    for k in 1..PANELS {
        acc += plateau(1.0 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 + acc * h / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialCutoff {
    radius: f64,
}

impl RadialCutoff {
    pub fn new(radius: f64) -> Self {
        RadialCutoff { radius }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `φ_R(r)`.
    pub fn value(&self, r: f64) -> f64 {
        let s = r / self.radius;
        if s <= 1.0 {
            return r * r;
        }
        let top = s.min(2.0);
        let h = (top - 1.0) / PANELS as f64;
        let mut acc = plateau_integral(1.0) + plateau_integral(top);
        for k in 1..PANELS {
            acc += plateau_integral(1.0 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let at_top = 1.0 + acc * h / 3.0;
        let beyond = (s - top) * plateau_integral(2.0);
        self.radius * self.radius * (at_top + beyond)
    }

    /// `φ_R''(r)`.
    pub fn second_derivative(&self, r: f64) -> f64 {
        plateau(r / self.radius)
    }

    /// `Δφ_R = φ_R'' + 2φ_R'/r`.
    pub fn laplacian(&self, r: f64) -> f64 {
        let s = r / self.radius;
        if s <= 1.0 {
            6.0
        } else {
            plateau(s) + 2.0 * plateau_integral(s) / s
        }
    }

    /// `Δ²φ_R = R⁻² (θ'' + 4θ'/s)` at `s = r/R`.
    pub fn bilaplacian(&self, r: f64) -> f64 {
        let s = r / self.radius;
        if s <= 1.0 || s >= 2.0 {
            return 0.0;
        }
        let h = FD_STEP;
        let d1 = (plateau(s + h) - plateau(s - h)) / (2.0 * h);
        let d2 = (plateau(s + h) - 2.0 * plateau(s) + plateau(s - h)) / (h * h);
        (d2 + 4.0 * d1 / s) / (self.radius * self.radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_inside_and_flat_outside() {
        let c = RadialCutoff::new(3.0);
        for r in [0.0, 1.0, 2.9, 3.0] {
            assert!((c.value(r) - r * r).abs() < 1e-12);
            assert_eq!(c.laplacian(r), 6.0);
            assert_eq!(c.bilaplacian(r), 0.0);
        }
        let far = c.value(6.0);
        assert!((c.value(9.0) - far - 3.0 * 3.0 * plateau_integral(2.0)).abs() < 1e-9);
        assert_eq!(c.second_derivative(7.0), 0.0);
    }

    #[test]
    fn bounds_used_in_the_localized_virial() {
        let c = RadialCutoff::new(2.0);
        for k in 1..400 {
            let r = k as f64 * 0.015;
            let d2 = c.second_derivative(r);
            assert!((0.0..=2.0).contains(&d2));
            assert!(6.0 - c.laplacian(r) >= -1e-12);
        }
    }

    #[test]
    fn derivatives_match_differences_of_the_value() {
        let c = RadialCutoff::new(1.5);
        let h = 1e-3;
        for r in [1.7, 2.2, 2.6] {
            let fd2 = (c.value(r + h) - 2.0 * c.value(r) + c.value(r - h)) / (h * h);
            assert!((fd2 - c.second_derivative(r)).abs() < 1e-4, "r = {r}");
            let lap = |x: f64| c.laplacian(x);
            let fd = (lap(r + h) - 2.0 * lap(r) + lap(r - h)) / (h * h)
                + (lap(r + h) - lap(r - h)) / (h * r);
            assert!(
                (fd - c.bilaplacian(r)).abs() < 1e-3 * (1.0 + fd.abs()),
                "r = {r}: {fd} vs {}",
                c.bilaplacian(r)
            );
        }
    }
}
