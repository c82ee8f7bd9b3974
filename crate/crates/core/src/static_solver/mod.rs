//! Zero-frequency profiles `−ΔU + U^q − U^p = 0` and the constants derived
//! from them.

mod ode;
pub mod profile;
pub mod shooting;
mod tableau;

use crate::fibering::FiberCoefficients;
use crate::functionals::{evaluate, FunctionalReport, RadialField, RadialGrid};
use crate::prelude::*;
use crate::{Error, PowerPair, Result};
use profile::{assemble, ShotField};
use shooting::{bisect, Bisection, ProfileEquation};

/// Residual tolerance for `|G|/K` and `|K + N_q − N_p|/K`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-5;

/// How `∫₀^R U² r² dr` behaves as `R` grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthClass {
    Convergent,
    Logarithmic,
    Linear,
    /// Growth between the logarithmic and linear bands.
    Intermediate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassGrowth {
    pub class: GrowthClass,
    /// `log₂` of the ratio of the last two doubling increments; `−1` for
    /// `U ~ r⁻²`, `0` for `r^{-3/2}`, `1` for `r⁻¹`.
    pub doubling_exponent: f64,
    /// Least-squares slope of the partial integral against `R`.
    pub linear_slope: f64,
    /// Least-squares slope of the partial integral against `ln R`.
    pub log_slope: f64,
    /// Largest radius used.
    pub radius: f64,
}

/// The critical mass, or why there is none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalMass {
    Finite(f64),
    Divergent(MassGrowth),
}

impl CriticalMass {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            CriticalMass::Finite(r) => Some(r),
            CriticalMass::Divergent(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticSolution {
    pub pq: PowerPair,
    pub profile: RadialField,
    /// `U(0)`.
    pub shoot_height: f64,
    pub alpha_fit: f64,
    pub report: FunctionalReport,
    pub rho_c: CriticalMass,
    pub mass_growth: MassGrowth,
    /// Radius beyond which the profile follows its tail model.
    pub reliable_radius: f64,
    pub bisection_steps: usize,
}

impl StaticSolution {
    pub fn pohozaev_residual(&self) -> f64 {
        self.report.pohozaev_ratio()
    }

    pub fn nehari_residual(&self) -> f64 {
        self.report.nehari_ratio()
    }
}

/// Solves the zero-mass equation by shooting.
pub fn solve_zero_mass(pq: PowerPair, grid: RadialGrid) -> Result<StaticSolution> {
    let eq = ProfileEquation::new(pq, 0.0);
    let bis = bisect(&eq, None)?;
    let shot = assemble(&bis, grid, 0.0)?;
    finish(pq, grid, &bis, shot)
}

fn finish(
    pq: PowerPair,
    grid: RadialGrid,
    bis: &Bisection,
    shot: ShotField,
) -> Result<StaticSolution> {
    let ShotField {
        field,
        reliable_radius,
        ..
    } = shot;
    check_shape(&field, reliable_radius)?;
    let report = evaluate(&field, pq)?;
    let (g, n) = (report.pohozaev_ratio(), report.nehari_ratio());
    if !(g <= RESIDUAL_TOLERANCE && n <= RESIDUAL_TOLERANCE) {
        return Err(Error::Convergence(format!(
            "static residuals |G|/K = {g:e}, |K + Nq - Np|/K = {n:e}"
        )));
    }
    let alpha_fit = decay_fit(&field, 0.6 * grid.r_max(), 0.9 * grid.r_max());
    let mass_growth = mass_growth(&field);
    let rho_c = match mass_growth.class {
        GrowthClass::Convergent if report.mass.is_finite() => {
            CriticalMass::Finite(report.mass.sqrt())
        }
        _ => CriticalMass::Divergent(mass_growth),
    };
    Ok(StaticSolution {
        pq,
        profile: field,
        shoot_height: bis.amplitude(),
        alpha_fit,
        report,
        rho_c,
        mass_growth,
        reliable_radius,
        bisection_steps: bis.iterations,
    })
}

/// Positive and non-increasing on the resolved part of the grid.
pub(crate) fn check_shape(field: &RadialField, reliable_radius: f64) -> Result<()> {
    let grid = field.grid();
    let v = field.values();
    for i in 0..grid.len() {
        if grid.node(i) > reliable_radius {
            break;
        }
        if !(v[i] > 0.0) || (i > 0 && v[i] > v[i - 1]) {
            return Err(Error::Inconsistent(format!(
                "profile not positive and decreasing at r = {}",
                grid.node(i)
            )));
        }
    }
    Ok(())
}

/// Least-squares slope of `−ln U` against `ln r` over grid nodes in
/// `[from, to]`.
pub fn decay_fit(field: &RadialField, from: f64, to: f64) -> f64 {
    let grid = field.grid();
    let pts: Vec<(f64, f64)> = grid
        .nodes()
        .zip(field.values())
        .filter(|(r, u)| *r >= from && *r <= to && **u > 0.0)
        .map(|(r, u)| (r.ln(), u.ln()))
        .collect();
    -least_squares_slope(&pts)
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// `∫₀^R u² r² dr` by Simpson's rule in `ln r`, using the field's
/// interpolant and far field.
pub fn partial_mass(field: &RadialField, radius: f64) -> f64 {
    let r0 = 1e-3f64.min(0.5 * radius);
    let u0 = field.sample_at(0.0);
    let head = u0 * u0 * r0 * r0 * r0 / 3.0;
    let span = (radius / r0).ln();
    let m = 2 * ((span / 0.005).ceil() as usize).max(1);
    let dt = span / m as f64;
    let mut sum = 0.0;
    for k in 0..=m {
        let r = r0 * (k as f64 * dt).exp();
        let u = field.sample_at(r);
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * u * u * r * r * r;
    }
    head + sum * dt / 3.0
}

/// Classifies the growth of the partial mass from its last doublings below
/// the reliable extent of `field`.
pub fn mass_growth(field: &RadialField) -> MassGrowth {
    let top = field.far().map_or(field.grid().r_max(), |f| f.end());
    let radii: Vec<f64> = (0..6).rev().map(|j| top / 2f64.powi(j)).collect();
    let m: Vec<f64> = radii.iter().map(|&r| partial_mass(field, r)).collect();
    let inc_last = m[5] - m[4];
    let inc_prev = m[4] - m[3];
    let gamma = (inc_last / inc_prev).log2();
    let class = if gamma < -0.25 {
        GrowthClass::Convergent
    } else if gamma <= 0.25 {
        GrowthClass::Logarithmic
    } else if gamma > 0.5 {
        GrowthClass::Linear
    } else {
        GrowthClass::Intermediate
    };
    let lin: Vec<(f64, f64)> = radii.iter().zip(&m).map(|(&r, &v)| (r, v)).collect();
    let log: Vec<(f64, f64)> = radii.iter().zip(&m).map(|(&r, &v)| (r.ln(), v)).collect();
    MassGrowth {
        class,
        doubling_exponent: gamma,
        linear_slope: least_squares_slope(&lin),
        log_slope: least_squares_slope(&log),
        radius: top,
    }
}

/// Constants of the unit-constraint minimization built from `U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountainPassConstants {
    /// `K(u₁)` for `u₁ = U(s₀^{1/3} ·)`.
    pub k_u1: f64,
    pub s0: f64,
    /// `(K(u₁)/6)^{3/2}`, to compare with `s0`.
    pub s0_from_kinetic: f64,
    /// `2 K(u₁)^{3/2} / 6^{3/2}`.
    pub i_value: f64,
    pub e_of_u: f64,
    /// `N_p(u₁)/(p+1) − N_q(u₁)/(q+1) − 1`.
    pub constraint_residual: f64,
    /// `s₀^{1/3} K(u₁)`, to compare with `K(U)`.
    pub kinetic_rescaled: f64,
}

fn constraint(field: &RadialField, pq: PowerPair) -> Result<(f64, FunctionalReport)> {
    let r = evaluate(field, pq)?;
    Ok((r.np / (pq.p() + 1.0) - r.nq / (pq.q() + 1.0) - 1.0, r))
}

pub fn mountain_pass_constants(sol: &StaticSolution) -> Result<MountainPassConstants> {
    let pq = sol.pq;
    let u = &sol.profile;
    let member =
        |s: f64| -> Result<(f64, FunctionalReport)> { constraint(&u.dilate(s.cbrt(), 1.0)?, pq) };
    // N(U(λ·)) = λ⁻³ N(U), so this is the exact root up to quadrature error.
    let rep = &sol.report;
    let mut s_prev = rep.np / (pq.p() + 1.0) - rep.nq / (pq.q() + 1.0);
    if !(s_prev > 0.0) {
        return Err(Error::Inconsistent(
            "U does not satisfy N_p/(p+1) > N_q/(q+1)".into(),
        ));
    }
    let (mut c_prev, _) = member(s_prev)?;
    let mut s = s_prev * (1.0 + c_prev);
    let (mut c, mut r1) = member(s)?;
    for _ in 0..20 {
        if c.abs() < 1e-13 || c == c_prev {
            break;
        }
        let next = s - c * (s - s_prev) / (c - c_prev);
        s_prev = s;
        c_prev = c;
        s = next;
        (c, r1) = member(s)?;
    }
    if c.abs() > 1e-4 {
        return Err(Error::Inconsistent(format!(
            "unit constraint residual {c:e}"
        )));
    }
    let k_u1 = r1.kinetic;
    Ok(MountainPassConstants {
        k_u1,
        s0: s,
        s0_from_kinetic: (k_u1 / 6.0).powf(1.5),
        i_value: 2.0 * k_u1.powf(1.5) / 6f64.powf(1.5),
        e_of_u: rep.energy,
        constraint_residual: c,
        kinetic_rescaled: s.cbrt() * k_u1,
    })
}

/// Ground state of the pure focusing problem used as a lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusingReference {
    pub p: f64,
    /// `M(Q)` and `Ẽ(Q)` for the `ω = 1` profile.
    pub mass_q: f64,
    pub energy_q: f64,
    pub amplitude: f64,
}

impl FocusingReference {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > crate::MASS_CRITICAL && p < crate::ENERGY_CRITICAL) {
            return Err(Error::invalid(format!(
                "focusing power p = {p} outside (7/3, 5)"
            )));
        }
        let (mass_q, energy_q, amplitude) = focusing_profile(p, 1.0)?;
        Ok(FocusingReference {
            p,
            mass_q,
            energy_q,
            amplitude,
        })
    }

    /// Exponent of `ρ` in `Ĩ(ρ²)`.
    pub fn exponent(&self) -> f64 {
        2.0 * (self.p - 5.0) / (3.0 * self.p - 7.0)
    }

    /// `Ĩ(ρ²)`.
    pub fn value(&self, rho: f64) -> f64 {
        let p = self.p;
        self.energy_q * (rho * rho / self.mass_q).powf((5.0 - p) / (7.0 - 3.0 * p))
    }
}

/// Mass, energy without the defocusing term, and amplitude of the positive
/// solution of `−ΔQ + ωQ = Q^p`.
pub fn focusing_profile(p: f64, omega: f64) -> Result<(f64, f64, f64)> {
    let eq = ProfileEquation::pure_focusing(p, omega);
    let bis = bisect(&eq, None)?;
    let length = 1.0 / omega.sqrt();
    let grid = RadialGrid::new(40.0 * length, 8192)?;
    let shot = assemble(&bis, grid, omega)?;
    // the defocusing term is absent, so any q reproduces K and N_p
    let pq = PowerPair::new(p, 2.0f64.min(0.5 * (1.0 + p)))?;
    let rep = evaluate(&shot.field, pq)?;
    Ok((
        rep.mass,
        0.5 * rep.kinetic - rep.np / (p + 1.0),
        bis.amplitude(),
    ))
}

/// `Ĩ(ρ²)` for the pure focusing problem.
pub fn pure_focusing_reference(p: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!(
            "mass parameter rho = {rho} must be positive"
        )));
    }
    Ok(FocusingReference::new(p)?.value(rho))
}

/// Fiber coefficients of a static profile, for convenience.
pub fn fiber_of(sol: &StaticSolution) -> Result<FiberCoefficients> {
    FiberCoefficients::from_report(&sol.report, sol.pq)
}

#[cfg(test)]
mod tests;
