use core::fmt::Debug;
use core::ops::{Add, Mul, Neg, Sub};

use core::f64::consts::PI;

use num_complex::Complex64;

use super::grid::RadialGrid;
use super::quadrature::{derivative_even, lagrange4};
use crate::prelude::*;
use crate::{Error, Result};

/// Scalar type of field samples: `f64` for profiles, `Complex64` for
/// evolving wave functions.
pub trait Sample:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + 'static
{
    const ZERO: Self;
    fn from_real(x: f64) -> Self;
    fn norm_sqr(self) -> f64;
    fn is_finite(self) -> bool;
    /// `Re(conj(self) * other)`.
    fn dot(self, other: Self) -> f64;

    fn modulus(self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

impl Sample for f64 {
    const ZERO: Self = 0.0;
    fn from_real(x: f64) -> Self {
        x
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn dot(self, other: Self) -> f64 {
        self * other
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Sample for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn dot(self, other: Self) -> f64 {
        self.re * other.re + self.im * other.im
    }
}

/// Analytic model for a field beyond the last stored sample `R`: the modulus
/// follows `(R/r)^s`, or `(R/r)^s exp(-κ (r - R))` with `κ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    Zero,
    Algebraic { exponent: f64 },
    Exponential { rate: f64, exponent: f64 },
}

impl Tail {
    /// Ratio `u(r)/u(R)` and `u'(r)/u(R)` for `r ≥ R`.
    pub(crate) fn profile(&self, big_r: f64, r: f64) -> (f64, f64) {
        match *self {
            Tail::Zero => (0.0, 0.0),
            Tail::Algebraic { exponent } => {
                let v = (big_r / r).powf(exponent);
                (v, -exponent * v / r)
            }
            Tail::Exponential { rate, exponent } => {
                let v = (big_r / r).powf(exponent) * (-rate * (r - big_r)).exp();
                (v, -(rate + exponent / r) * v)
            }
        }
    }

    /// `∫_R^∞ 4π r² m(r)^k dr` where `m(R) = modulus`.
    pub fn power_integral(&self, big_r: f64, modulus: f64, k: f64) -> f64 {
        if modulus == 0.0 {
            return 0.0;
        }
        let mk = modulus.powf(k);
        match *self {
            Tail::Zero => 0.0,
            Tail::Algebraic { exponent } => {
                let d = k * exponent - 3.0;
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    4.0 * PI * mk * big_r.powi(3) / d
                }
            }
            Tail::Exponential { rate, exponent } => {
                mk * exponential_moment(big_r, k * rate, k * exponent, |_| 1.0)
            }
        }
    }

    /// `∫_R^∞ 4π r² |u'(r)|² dr`.
    pub fn kinetic_integral(&self, big_r: f64, modulus: f64) -> f64 {
        if modulus == 0.0 {
            return 0.0;
        }
        let m2 = modulus * modulus;
        match *self {
            Tail::Zero => 0.0,
            Tail::Algebraic { exponent: s } => {
                if 2.0 * s <= 1.0 {
                    f64::INFINITY
                } else {
                    4.0 * PI * s * s * m2 * big_r / (2.0 * s - 1.0)
                }
            }
            Tail::Exponential { rate, exponent } => {
                m2 * exponential_moment(big_r, 2.0 * rate, 2.0 * exponent, |r| {
                    let g = rate + exponent / r;
                    g * g
                })
            }
        }
    }

    /// Model of `u(λr)`.
    fn dilated(&self, lambda: f64) -> Tail {
        match *self {
            Tail::Exponential { rate, exponent } => Tail::Exponential {
                rate: rate * lambda,
                exponent,
            },
            other => other,
        }
    }
}

/// `∫_R^∞ 4π r² (R/r)^s exp(-κ(r - R)) w(r) dr` by Simpson's rule in
/// `t = ln(r/R)`, stopped once the integrand is negligible.
fn exponential_moment(big_r: f64, kappa: f64, s: f64, w: impl Fn(f64) -> f64) -> f64 {
    let kr = kappa * big_r;
    let dt = 0.005f64.min(0.02 / kr);
    let integrand = |t: f64| {
        let r = big_r * t.exp();
        r * r * r * (-s * t - kr * (t.exp() - 1.0)).exp() * w(r)
    };
    let mut sum = integrand(0.0);
    let mut t = 0.0;
    let mut odd = true;
    loop {
        t += dt;
        let v = integrand(t);
        let log_weight = (3.0 - s) * t - kr * (t.exp() - 1.0);
        if log_weight < -60.0 || t > 200.0 {
            sum += v;
            break;
        }
        sum += if odd { 4.0 * v } else { 2.0 * v };
        odd = !odd;
    }
    4.0 * PI * sum * dt / 3.0
}

/// Continuation of a field past the end of its grid, sampled uniformly in
/// `ln r`. Node `0` sits on the grid's last node and repeats its value.
#[derive(Debug, Clone, PartialEq)]
pub struct FarField<S: Sample = f64> {
    start: f64,
    log_step: f64,
    values: Vec<S>,
    slopes: Vec<S>,
    tail: Tail,
}

impl<S: Sample> FarField<S> {
    /// `values[k]` and `slopes[k] = u'` at `start * exp(k * log_step)`.
    pub fn new(
        start: f64,
        log_step: f64,
        values: Vec<S>,
        slopes: Vec<S>,
        tail: Tail,
    ) -> Result<Self> {
        if values.is_empty() || values.len() != slopes.len() {
            return Err(Error::invalid(
                "far field needs matching, nonempty value and slope arrays",
            ));
        }
        if !(start > 0.0 && log_step > 0.0 && log_step.is_finite()) {
            return Err(Error::invalid(
                "far field needs positive start and log step",
            ));
        }
        if let Some(index) = values.iter().chain(&slopes).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(FarField {
            start,
            log_step,
            values,
            slopes,
            tail,
        })
    }

    /// Only a tail, starting at `start`.
    pub fn tail_only(start: f64, value: S, slope: S, tail: Tail) -> Self {
        FarField {
            start,
            log_step: 1.0,
            values: vec![value],
            slopes: vec![slope],
            tail,
        }
    }

    fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.start * (k as f64 * self.log_step).exp()
    }

    /// Radius of the last stored sample; the tail takes over beyond it.
    pub fn end(&self) -> f64 {
        self.radius(self.intervals())
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn slopes(&self) -> &[S] {
        &self.slopes
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| self.radius(k))
    }

    fn sample(&self, r: f64, slope: bool) -> S {
        let data = if slope { &self.slopes } else { &self.values };
        let m = self.intervals();
        let end = self.end();
        if r >= end {
            let last = self.values[m];
            let (v, dv) = self.tail.profile(end, r);
            return last * if slope { dv } else { v };
        }
        let x = (r / self.start).ln() / self.log_step;
        if m >= 3 {
            lagrange4(x, m, false, |k| data[k])
        } else {
            let k = (x.floor() as usize).min(m - 1);
            let t = x - k as f64;
            data[k] * (1.0 - t) + data[k + 1] * t
        }
    }

    fn map(&self, f: impl Fn(S) -> S) -> Self {
        FarField {
            values: self.values.iter().map(|&v| f(v)).collect(),
            slopes: self.slopes.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

/// A radial profile on a uniform grid, optionally continued beyond `r_max`
/// by a [`FarField`]. Without one the field vanishes outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField<S: Sample = f64> {
    grid: RadialGrid,
    values: Vec<S>,
    far: Option<FarField<S>>,
}

impl<S: Sample> RadialField<S> {
    pub fn from_values(grid: RadialGrid, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(RadialField {
            grid,
            values,
            far: None,
        })
    }

    /// Samples `f` at the nodes. The value at the origin must be finite.
    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> S) -> Result<Self> {
        let values: Vec<S> = grid.nodes().map(f).collect();
        if !values[0].is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        Self::from_values(grid, values)
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        RadialField {
            grid,
            values: vec![S::ZERO; grid.len()],
            far: None,
        }
    }

    pub fn with_far_field(mut self, far: FarField<S>) -> Result<Self> {
        if (far.start - self.grid.r_max()).abs() > 1e-12 * self.grid.r_max() {
            return Err(Error::invalid(
                "far field must start at the grid's last node",
            ));
        }
        self.far = Some(far);
        Ok(self)
    }

    pub fn without_far_field(mut self) -> Self {
        self.far = None;
        self
    }

    pub fn grid(&self) -> RadialGrid {
        self.grid
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn far(&self) -> Option<&FarField<S>> {
        self.far.as_ref()
    }

    /// Fourth-order radial derivative at the nodes.
    pub fn derivative(&self) -> Vec<S> {
        derivative_even(&self.values, self.grid.h())
    }

    /// Cubic interpolation of the field at any radius; `u(-r) = u(r)`.
    pub fn sample_at(&self, r: f64) -> S {
        self.sample_with(r, &self.values, false)
    }

    fn sample_with(&self, r: f64, near: &[S], slope: bool) -> S {
        let r_abs = r.abs();
        if r_abs <= self.grid.r_max() {
            let v = lagrange4(r_abs / self.grid.h(), self.grid.intervals(), !slope, |k| {
                near[k]
            });
            // The derivative of an even profile is odd.
            return if slope && r < 0.0 { -v } else { v };
        }
        match &self.far {
            Some(far) => far.sample(r_abs, slope),
            None => S::ZERO,
        }
    }

    /// `amp * u(λ r)` on the same grid. A far field is carried along exactly.
    pub fn dilate(&self, lambda: f64, amp: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "dilation factor {lambda} must be positive"
            )));
        }
        let values = self
            .grid
            .nodes()
            .map(|r| self.sample_at(lambda * r) * amp)
            .collect();
        let far = match &self.far {
            None => None,
            Some(far) => {
                let du = self.derivative();
                let end = far.end() / lambda;
                Some(self.continuation(
                    self.grid.r_max(),
                    end,
                    far.log_step,
                    far.tail.dilated(lambda),
                    |r| {
                        (
                            self.sample_at(lambda * r) * amp,
                            self.sample_with(lambda * r, &du, true) * (amp * lambda),
                        )
                    },
                ))
            }
        };
        Ok(RadialField {
            grid: self.grid,
            values,
            far,
        })
    }

    /// The same function sampled on another grid.
    pub fn resample(&self, grid: RadialGrid) -> Self {
        let values = grid.nodes().map(|r| self.sample_at(r)).collect();
        let far = self.far.as_ref().map(|far| {
            let du = self.derivative();
            self.continuation(grid.r_max(), far.end(), far.log_step, far.tail, |r| {
                (self.sample_at(r), self.sample_with(r, &du, true))
            })
        });
        RadialField { grid, values, far }
    }

    fn continuation(
        &self,
        start: f64,
        end: f64,
        log_step: f64,
        tail: Tail,
        eval: impl Fn(f64) -> (S, S),
    ) -> FarField<S> {
        if end <= start * (1.0 + 1e-12) {
            let (v, dv) = eval(start);
            return FarField::tail_only(start, v, dv, tail);
        }
        let span = (end / start).ln();
        let m = ((span / log_step).ceil() as usize).max(1);
        let step = span / m as f64;
        let (values, slopes) = (0..=m)
            .map(|k| eval(start * (k as f64 * step).exp()))
            .unzip();
        FarField {
            start,
            log_step: step,
            values,
            slopes,
            tail,
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        RadialField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            far: self.far.as_ref().map(|far| far.map(&f)),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    /// `|u|` as a real field.
    pub fn modulus(&self) -> RadialField<f64> {
        RadialField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.modulus()).collect(),
            far: self.far.as_ref().map(|far| FarField {
                start: far.start,
                log_step: far.log_step,
                values: far.values.iter().map(|v| v.modulus()).collect(),
                slopes: far
                    .values
                    .iter()
                    .zip(&far.slopes)
                    .map(|(&v, &dv)| {
                        let m = v.modulus();
                        if m > 0.0 {
                            v.dot(dv) / m
                        } else {
                            0.0
                        }
                    })
                    .collect(),
                tail: far.tail,
            }),
        }
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }
}

impl RadialField<f64> {
    pub fn to_complex(&self) -> RadialField<Complex64> {
        RadialField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
            far: self.far.as_ref().map(|far| FarField {
                start: far.start,
                log_step: far.log_step,
                values: far.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
                slopes: far.slopes.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
                tail: far.tail,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: RadialGrid) -> RadialField {
        RadialField::from_fn(grid, |r| (-r * r / 2.0).exp()).unwrap()
    }

    #[test]
    fn interpolation_is_accurate_between_nodes() {
        let g = RadialGrid::new(10.0, 512).unwrap();
        let u = gaussian(g);
        for r in [0.0, 0.013, 1.2345, 3.3, 9.99] {
            assert!(
                (u.sample_at(r) - (-r * r / 2.0).exp()).abs() < 1e-8,
                "r = {r}"
            );
        }
        assert_eq!(u.sample_at(10.5), 0.0);
        assert_eq!(u.sample_at(-1.0), u.sample_at(1.0));
    }

    #[test]
    fn far_field_continues_the_profile() {
        let g = RadialGrid::new(10.0, 256).unwrap();
        let f = |r: f64| 1.0 / (1.0 + r * r);
        let df = |r: f64| -2.0 * r / (1.0 + r * r).powi(2);
        let step = 0.01;
        let radii: Vec<f64> = (0..=230).map(|k| 10.0 * (k as f64 * step).exp()).collect();
        let far = FarField::new(
            10.0,
            step,
            radii.iter().map(|&r| f(r)).collect(),
            radii.iter().map(|&r| df(r)).collect(),
            Tail::Algebraic { exponent: 2.0 },
        )
        .unwrap();
        let u = RadialField::from_fn(g, f)
            .unwrap()
            .with_far_field(far)
            .unwrap();
        for r in [12.0, 50.0, 99.0] {
            assert!((u.sample_at(r) / f(r) - 1.0).abs() < 1e-7, "r = {r}");
        }
        // beyond the stored samples the algebraic model takes over
        assert!((u.sample_at(1000.0) / f(1000.0) - 1.0).abs() < 2e-2);
        let v = u.dilate(0.5, 1.0).unwrap();
        assert!((v.sample_at(40.0) / f(20.0) - 1.0).abs() < 1e-7);
        assert!(v.far().unwrap().end() > 198.0);
    }

    #[test]
    fn tail_integrals_match_closed_forms() {
        let t = Tail::Algebraic { exponent: 2.0 };
        // ∫_R^∞ 4π r² (R/r)^4 dr = 4π R³ / 1
        let v = t.power_integral(2.0, 1.0, 2.0);
        assert!((v - 4.0 * core::f64::consts::PI * 8.0).abs() < 1e-12);
        assert!(Tail::Algebraic { exponent: 1.0 }
            .power_integral(2.0, 1.0, 2.0)
            .is_infinite());
        // ∫_R^∞ 4π r² (R/r)² e^{-2(r-R)} dr = 4π R² / 2
        let e = Tail::Exponential {
            rate: 1.0,
            exponent: 1.0,
        };
        let v = e.power_integral(3.0, 1.0, 2.0);
        assert!((v / (2.0 * PI * 9.0) - 1.0).abs() < 1e-9, "{v}");
        // kinetic: (1 + 1/r)² weight, compared with a direct sum
        let k = e.kinetic_integral(3.0, 1.0);
        let direct: f64 = (0..200_000)
            .map(|i| {
                let r = 3.0 + (i as f64 + 0.5) * 2e-4;
                4.0 * PI * 9.0 * (1.0 + 1.0 / r).powi(2) * (-2.0 * (r - 3.0)).exp() * 2e-4
            })
            .sum();
        assert!((k / direct - 1.0).abs() < 1e-7, "{k} {direct}");
    }
}
