//! Radial shooting for `U'' + (2/r) U' = ω U + λ U^q − U^p` from `U(0) = A`,
//! `U'(0) = 0`, bisecting `A` between trajectories that cross zero and
//! trajectories that turn back up.

use super::ode::{integrate, Control, Settings, System};
use crate::prelude::*;
use crate::{Error, PowerPair, Result};

/// One member of the family of radial profile equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileEquation {
    pub p: f64,
    pub q: f64,
    /// Coefficient of the defocusing term; `0` drops it.
    pub defocusing: f64,
    pub omega: f64,
}

impl ProfileEquation {
    pub fn new(pq: PowerPair, omega: f64) -> Self {
        ProfileEquation {
            p: pq.p(),
            q: pq.q(),
            defocusing: 1.0,
            omega,
        }
    }

    /// `−ΔQ + ωQ = Q^p`.
    pub fn pure_focusing(p: f64, omega: f64) -> Self {
        ProfileEquation {
            p,
            q: 1.5,
            defocusing: 0.0,
            omega,
        }
    }

    /// `ω u + λ u^q − u^p`, the value of `Δu` along a solution.
    pub fn source(&self, u: f64) -> f64 {
        let up = u.max(0.0);
        let mut s = self.omega * u - powr(up, self.p);
        if self.defocusing != 0.0 {
            s += self.defocusing * powr(up, self.q);
        }
        s
    }

    /// Amplitude of the constant equilibrium, `source(A) = 0` with `A > 0`.
    pub fn equilibrium(&self) -> f64 {
        let f = |a: f64| self.source(a) / a;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while f(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        if self.defocusing != 0.0 {
            lo = lo.max(1.0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// `x^e`, with a fast path for small integer powers.
#[inline]
fn powr(x: f64, e: f64) -> f64 {
    if e == 2.0 {
        x * x
    } else if e == 3.0 {
        x * x * x
    } else if e == 4.0 {
        let x2 = x * x;
        x2 * x2
    } else if x == 0.0 {
        0.0
    } else {
        x.powf(e)
    }
}

impl System<2> for ProfileEquation {
    #[inline]
    fn rhs(&self, r: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], -2.0 * y[1] / r + self.source(y[0])]
    }

    #[inline]
    fn scale(&self, r: f64, y: &[f64; 2], rtol: f64) -> [f64; 2] {
        let size = y[0].abs() + (1.0 + r) * y[1].abs();
        [rtol * size, rtol * size / (1.0 + r)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// `U` reached zero: the amplitude is too large.
    Crossing,
    /// `U'` turned positive or `U` escaped above `2A`: too small.
    Rebounding,
    /// Neither happened before the horizon.
    Undecided,
}

/// Accepted integration step: radius, `U`, `U'`, `U''`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub r: f64,
    pub u: f64,
    pub v: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub amplitude: f64,
    pub class: Classification,
    /// Radius at which the classification was decided.
    pub r_event: f64,
    /// Curvature at the origin, `ΔU(0) / 3`.
    center_curvature: f64,
    knots: Vec<Knot>,
}

impl Trajectory {
    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    /// Last radius covered by the stored solution.
    pub fn end(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.r)
    }

    /// `(U, U')` at radius `r ≤ end()`, by quintic Hermite interpolation
    /// between steps and the Taylor series near the origin.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let first = &self.knots[0];
        if r <= first.r {
            let c = self.center_curvature;
            return (self.amplitude + 0.5 * c * r * r, c * r);
        }
        let i = match self.knots.binary_search_by(|k| k.r.total_cmp(&r)) {
            Ok(i) => return (self.knots[i].u, self.knots[i].v),
            Err(i) => i.min(self.knots.len() - 1),
        };
        hermite(&self.knots[i - 1], &self.knots[i], r)
    }
}

fn hermite(ka: &Knot, kb: &Knot, r: f64) -> (f64, f64) {
    let h = kb.r - ka.r;
    let t = (r - ka.r) / h;
    let (t2, t3) = (t * t, t * t * t);
    let (t4, t5) = (t3 * t, t3 * t2);
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 0.5 * (t3 - 2.0 * t4 + t5);
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let d0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let d1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let d2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
    let d3 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
    let d4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let d5 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    let u = ka.u * h0
        + h * ka.v * h1
        + h * h * ka.a * h2
        + kb.u * h5
        + h * kb.v * h4
        + h * h * kb.a * h3;
    let du = (ka.u * d0
        + h * ka.v * d1
        + h * h * ka.a * d2
        + kb.u * d5
        + h * kb.v * d4
        + h * h * kb.a * d3)
        / h;
    (u, du)
}

const RTOL: f64 = 1e-12;

/// Integrates from `U(0) = amplitude` until the trajectory classifies itself
/// or passes `horizon`. Knots are kept only when `record` is set.
pub fn shoot_once(
    eq: &ProfileEquation,
    amplitude: f64,
    horizon: f64,
    record: bool,
) -> Result<Trajectory> {
    let c = eq.source(amplitude) / 3.0;
    // series start U ≈ A + c r²/2 where the r⁴ term is below rounding
    let length = (amplitude / c.abs().max(1e-300)).sqrt().min(1.0);
    let r0 = 1e-4 * length;
    let y0 = [amplitude + 0.5 * c * r0 * r0, c * r0];
    let mut knots = Vec::new();
    if record {
        knots.push(Knot {
            r: r0,
            u: y0[0],
            v: y0[1],
            a: eq.rhs(r0, &y0)[1],
        });
    }
    let mut class = Classification::Undecided;
    let mut r_event = horizon;
    let settings = Settings {
        rtol: RTOL,
        first_step: 0.1 * r0,
        max_step: f64::INFINITY,
    };
    integrate(eq, r0, y0, horizon, settings, |r, y, f| {
        if record {
            knots.push(Knot {
                r,
                u: y[0],
                v: y[1],
                a: f[1],
            });
        }
        let verdict = if y[0] <= 0.0 {
            Some(Classification::Crossing)
        } else if y[1] > 0.0 || y[0] > 2.0 * amplitude {
            Some(Classification::Rebounding)
        } else {
            None
        };
        match verdict {
            Some(v) => {
                class = v;
                r_event = r;
                Control::Stop
            }
            None => Control::Continue,
        }
    })?;
    Ok(Trajectory {
        amplitude,
        class,
        r_event,
        center_curvature: c,
        knots,
    })
}

/// Result of bisecting the shooting amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    /// Rebounding side, recorded.
    pub low: Trajectory,
    /// Crossing side, recorded.
    pub high: Trajectory,
    pub iterations: usize,
    /// The bisection stopped on an undecided trajectory before reaching
    /// adjacent floats.
    pub stalled: bool,
}

impl Bisection {
    pub fn amplitude(&self) -> f64 {
        0.5 * (self.low.amplitude + self.high.amplitude)
    }
}

/// Largest amplitude ratio tried above the equilibrium.
pub const BRACKET_LIMIT: f64 = 1e3;

/// Classification horizon for a given frequency.
pub fn horizon(omega: f64) -> f64 {
    if omega > 0.0 {
        (100.0 + 60.0 / omega.sqrt()).min(1e9)
    } else {
        1e9
    }
}

/// Bisects the amplitude down to adjacent doubles. `hint` may narrow the
/// initial bracket (e.g. from a neighbouring frequency).
pub fn bisect(eq: &ProfileEquation, hint: Option<(f64, f64)>) -> Result<Bisection> {
    let horizon = horizon(eq.omega);
    let floor = eq.equilibrium();
    let classify = |a: f64| shoot_once(eq, a, horizon, false).map(|t| t.class);

    // Amplitudes at or below the equilibrium rebound by convention.
    let mut lo = floor;
    let mut hi = 2.0 * floor;
    if let Some((a, b)) = hint {
        if a > floor && classify(a)? == Classification::Rebounding {
            lo = a;
        }
        if b > lo && classify(b)? == Classification::Crossing {
            hi = b;
        }
    }
    if hi <= lo {
        hi = 2.0 * lo;
    }
    loop {
        match classify(hi)? {
            Classification::Crossing => break,
            Classification::Rebounding => {
                lo = hi;
                hi *= 2.0;
            }
            Classification::Undecided => {
                return Err(Error::ShootingFailed {
                    reason: format!("undecided trajectory at A = {hi} while bracketing"),
                    lo,
                    hi,
                });
            }
        }
        if hi > BRACKET_LIMIT * floor {
            return Err(Error::ShootingFailed {
                reason: "no crossing trajectory below the bracket limit".into(),
                lo,
                hi,
            });
        }
    }

    let mut iterations = 0;
    let mut stalled = false;
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        match classify(mid)? {
            Classification::Crossing => hi = mid,
            Classification::Rebounding => lo = mid,
            Classification::Undecided => {
                stalled = true;
                break;
            }
        }
    }
    let low = shoot_once(eq, lo, horizon, true)?;
    let high = shoot_once(eq, hi, horizon, true)?;
    if lo == floor && low.class != Classification::Rebounding {
        return Err(Error::ShootingFailed {
            reason: "bisection never left the equilibrium amplitude".into(),
            lo,
            hi,
        });
    }
    Ok(Bisection {
        low,
        high,
        iterations,
        stalled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_is_exact_for_quintics() {
        let f = |r: f64| {
            (
                r * r * r * r * r - 2.0 * r * r + r,
                5.0 * r * r * r * r - 4.0 * r + 1.0,
                20.0 * r * r * r - 4.0,
            )
        };
        let knot = |r: f64| {
            let (u, v, a) = f(r);
            Knot { r, u, v, a }
        };
        let (ka, kb) = (knot(0.3), knot(1.1));
        for r in [0.3, 0.5, 0.77, 1.1] {
            let (u, du) = hermite(&ka, &kb, r);
            assert!((u - f(r).0).abs() < 1e-13);
            assert!((du - f(r).1).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_balances_the_source() {
        let pq = PowerPair::new(3.0, 2.0).unwrap();
        assert!((ProfileEquation::new(pq, 0.0).equilibrium() - 1.0).abs() < 1e-14);
        let e = ProfileEquation::new(pq, 2.0);
        assert!((e.equilibrium() - 2.0).abs() < 1e-12);
        assert!((ProfileEquation::pure_focusing(3.0, 4.0).equilibrium() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn classification_brackets_the_static_profile() {
        let eq = ProfileEquation::new(PowerPair::new(3.0, 2.0).unwrap(), 0.0);
        assert_eq!(
            shoot_once(&eq, 3.9, 1e9, false).unwrap().class,
            Classification::Rebounding
        );
        assert_eq!(
            shoot_once(&eq, 4.1, 1e9, false).unwrap().class,
            Classification::Crossing
        );
    }
}
