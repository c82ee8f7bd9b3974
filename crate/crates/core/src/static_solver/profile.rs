//! Turning a bisected pair of trajectories into a [`RadialField`].

use super::shooting::Bisection;
use crate::functionals::{FarField, RadialField, RadialGrid, Tail};
use crate::prelude::*;
use crate::Result;

/// Relative disagreement between the two sides of the bisection beyond
/// which the trajectory no longer represents the decaying solution.
const AGREEMENT: f64 = 1e-6;
/// Spacing of far-field samples in `ln r`.
const FAR_LOG_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ShotField {
    pub field: RadialField,
    /// Radius up to which both sides of the bisection agree.
    pub reliable_radius: f64,
    /// Model used beyond `reliable_radius`.
    pub tail: Tail,
}

/// Radius up to which both trajectories stay positive, decreasing and
/// within `AGREEMENT` of each other.
pub fn reliable_radius(b: &Bisection) -> f64 {
    let limit = b.high.end().min(b.low.end());
    let mut last = b.low.knots()[0].r;
    for k in b.low.knots() {
        if k.r > limit {
            break;
        }
        let (uh, vh) = b.high.eval(k.r);
        let ok =
            k.u > 0.0 && uh > 0.0 && k.v < 0.0 && vh < 0.0 && (k.u - uh).abs() <= AGREEMENT * k.u;
        if !ok {
            break;
        }
        last = k.r;
    }
    last
}

pub fn assemble(b: &Bisection, grid: RadialGrid, omega: f64) -> Result<ShotField> {
    let r_rel = reliable_radius(b);
    let mid = |r: f64| {
        let (u1, v1) = b.low.eval(r);
        let (u2, v2) = b.high.eval(r);
        (0.5 * (u1 + u2), 0.5 * (v1 + v2))
    };
    let (u_rel, v_rel) = mid(r_rel);
    let kappa = omega.max(0.0).sqrt();
    let exponent = (-r_rel * v_rel / u_rel - kappa * r_rel).max(0.0);
    let tail = if kappa > 0.0 {
        Tail::Exponential {
            rate: kappa,
            exponent,
        }
    } else {
        Tail::Algebraic { exponent }
    };
    let value = |r: f64| -> (f64, f64) {
        if r <= r_rel {
            mid(r)
        } else {
            let (f, df) = tail.profile(r_rel, r);
            (u_rel * f, u_rel * df)
        }
    };
    let field = RadialField::from_fn(grid, |r| value(r).0)?;
    let r_max = grid.r_max();
    let far = if r_rel > r_max * (1.0 + FAR_LOG_STEP) {
        let span = (r_rel / r_max).ln();
        let m = (span / FAR_LOG_STEP).ceil() as usize;
        let step = span / m as f64;
        let (values, slopes): (Vec<f64>, Vec<f64>) = (0..=m)
            .map(|k| {
                value(if k == m {
                    r_rel
                } else {
                    r_max * (k as f64 * step).exp()
                })
            })
            .unzip();
        FarField::new(r_max, step, values, slopes, tail)?
    } else {
        let (u, du) = value(r_max);
        FarField::tail_only(r_max, u, du, tail)
    };
    Ok(ShotField {
        field: field.with_far_field(far)?,
        reliable_radius: r_rel,
        tail,
    })
}
