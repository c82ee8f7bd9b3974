//! Evolution of rescaled ground states `(u_ρ)^μ` on either side of the
//! Pohozaev manifold.

use super::{evolve, EvolutionSettings, StopReason, VirialTrace, GRADIENT_GROWTH_LIMIT};
use crate::functionals::{evaluate, rescale, RadialField, RadialGrid};
use crate::groundstate::{ground_state_at_mass, GroundState, MassOutcome};
use crate::prelude::*;
use crate::{Error, PowerPair, Result};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    GlobalOnHorizon,
    BlowUpDetected,
    Inconclusive,
}

/// A blow-up indicator that held over the resolved part of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// `K^{1/2}` grew by `factor ≥ 10³`.
    GradientGrowth { factor: f64 },
    /// Every interior second difference of the variance is `≤ −δ₀`.
    VarianceConcavity { max_second_difference: f64 },
    /// `G(u(t)) ≤ −δ₀ < 0` at every sample.
    PohozaevTrap { delta: f64 },
    /// `−G/K ≥ ε > 0` and `K^{1/2} ≥ c > 0` at every sample.
    Coercivity { epsilon: f64, gradient_floor: f64 },
}

impl Criterion {
    fn is_growth(&self) -> bool {
        matches!(
            self,
            Criterion::GradientGrowth { .. } | Criterion::VarianceConcavity { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DichotomySettings {
    pub horizon: f64,
    pub dt: f64,
    pub sample_every: usize,
    pub grid: RadialGrid,
}

impl DichotomySettings {
    pub fn new(horizon: f64) -> Self {
        DichotomySettings {
            horizon,
            dt: EvolutionSettings::DEFAULT_DT,
            sample_every: 50,
            grid: RadialGrid::dynamics(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyVerdict {
    pub outcome: Outcome,
    /// Last resolved time, when blow-up was detected.
    pub t_detect: Option<f64>,
    pub evidence: Vec<Criterion>,
    pub mu_scale: f64,
    pub rho: f64,
    pub i_value: f64,
    pub initial_energy: f64,
    pub initial_g: f64,
    /// `6(p−1)/(3p−7) I(ρ²)`, the a-priori bound on `K` when `G ≥ 0`.
    pub kinetic_bound: f64,
    pub max_kinetic: f64,
    /// `−sup_t G(u(t))`, positive on the blow-up side.
    pub delta0: f64,
    /// Zero of the parabola bounding the variance from above, if it closes.
    pub variance_bound_zero: Option<f64>,
    /// Time of the last resolved sample.
    pub reached: f64,
    pub stop: StopReason,
    /// The resolved part of the run.
    pub trace: VirialTrace,
}

/// `6(p−1)/(3p−7) · energy`.
pub fn kinetic_bound(pq: PowerPair, energy: f64) -> f64 {
    let p = pq.p();
    6.0 * (p - 1.0) / (3.0 * p - 7.0) * energy
}

/// `(u_ρ)^μ` sampled on `grid`.
pub fn initial_datum(
    ground: &GroundState,
    mu: f64,
    grid: RadialGrid,
) -> Result<RadialField<Complex64>> {
    let scaled = rescale(&ground.profile, mu)?.field;
    let values: Vec<f64> = grid.nodes().map(|r| scaled.sample_at(r)).collect();
    Ok(RadialField::from_values(grid, values)?.to_complex())
}

/// Evolves `(u_ρ)^μ` and classifies the run.
pub fn dichotomy_from_state(
    ground: &GroundState,
    mu: f64,
    settings: DichotomySettings,
) -> Result<DichotomyVerdict> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("mu_scale = {mu} must be positive")));
    }
    let pq = ground.pq;
    let datum = initial_datum(ground, mu, settings.grid)?;
    let report = evaluate(&datum, pq)?;
    let i_value = ground.i_value;
    if report.energy > i_value + 1e-8 * i_value.abs() {
        return Err(Error::Precondition(format!(
            "rescaled datum has energy {} above the ground-state level {i_value}",
            report.energy
        )));
    }
    let mut run_settings = EvolutionSettings::new(settings.horizon, settings.dt);
    run_settings.sample_every = settings.sample_every;
    let run = evolve(&datum, pq, run_settings)?;
    let trace = run.trace.resolved();
    let n = trace.len();
    let kinetic_bound = kinetic_bound(pq, i_value);
    let max_kinetic = (0..n).map(|k| trace.kinetic(k)).fold(0.0, f64::max);
    let delta0 = trace.delta_estimate;
    let reached = trace.times.last().cloned().unwrap_or(0.0);

    let (outcome, evidence, t_detect, variance_bound_zero) = if mu <= 1.0 {
        // the manifold itself counts with the global side, up to quadrature error
        let floor = if mu == 1.0 { -1e-6 } else { 0.0 };
        let stays_positive = (0..n).all(|k| trace.g_values[k] > floor * trace.kinetic(k));
        let ok = stays_positive
            && max_kinetic <= 1.1 * kinetic_bound
            && run.stop == StopReason::Completed;
        (
            if ok {
                Outcome::GlobalOnHorizon
            } else {
                Outcome::Inconclusive
            },
            Vec::new(),
            None,
            None,
        )
    } else {
        let evidence = blow_up_evidence(&trace);
        let fired = evidence.len() >= 2 && evidence.iter().any(Criterion::is_growth);
        let zero = variance_zero(&trace, delta0);
        if fired {
            (Outcome::BlowUpDetected, evidence, Some(reached), zero)
        } else {
            (Outcome::Inconclusive, evidence, None, zero)
        }
    };
    Ok(DichotomyVerdict {
        outcome,
        t_detect,
        evidence,
        mu_scale: mu,
        rho: ground.rho,
        i_value,
        initial_energy: report.energy,
        initial_g: report.pohozaev,
        kinetic_bound,
        max_kinetic,
        delta0,
        variance_bound_zero,
        reached,
        stop: run.stop,
        trace,
    })
}

fn blow_up_evidence(trace: &VirialTrace) -> Vec<Criterion> {
    let n = trace.len();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let g0 = trace.grad_norms[0];
    let factor = trace.grad_norms.iter().cloned().fold(0.0, f64::max) / g0;
    if factor >= GRADIENT_GROWTH_LIMIT {
        out.push(Criterion::GradientGrowth { factor });
    }
    let delta = trace.delta_estimate;
    if n >= 3 && delta > 0.0 {
        let dt = trace.times[1] - trace.times[0];
        let v = &trace.variance;
        let worst = (1..n - 1)
            .map(|k| (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (dt * dt))
            .fold(f64::MIN, f64::max);
        if worst <= -delta {
            out.push(Criterion::VarianceConcavity {
                max_second_difference: worst,
            });
        }
    }
    if delta > 0.0 {
        out.push(Criterion::PohozaevTrap { delta });
        let floor = trace
            .grad_norms
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if trace.epsilon_estimate > 0.0 && floor > 0.0 {
            out.push(Criterion::Coercivity {
                epsilon: trace.epsilon_estimate,
                gradient_floor: floor,
            });
        }
    }
    out
}

/// First positive root of `V(0) + V'(0) t − 4δ t²`, the upper bound on the
/// variance under `V'' = 8G ≤ −8δ`.
fn variance_zero(trace: &VirialTrace, delta: f64) -> Option<f64> {
    if trace.len() < 3 || delta <= 0.0 {
        return None;
    }
    let dt = trace.times[1] - trace.times[0];
    let v = &trace.variance;
    let slope = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
    let a = 4.0 * delta;
    Some((slope + (slope * slope + 4.0 * a * v[0]).sqrt()) / (2.0 * a))
}

/// Ground state at mass `rho²` on the stationary grid, rescaled by
/// `mu_scale` and evolved on the dynamics grid up to `horizon`.
pub fn dichotomy_experiment(
    pq: PowerPair,
    rho: f64,
    mu_scale: f64,
    horizon: f64,
) -> Result<DichotomyVerdict> {
    let ground = match ground_state_at_mass(pq, rho, RadialGrid::stationary())? {
        MassOutcome::Achieved { state, .. } => state,
        MassOutcome::NotAchieved { min_rho, max_rho } => {
            return Err(Error::Precondition(format!(
                "no ground state at rho = {rho}; the branch covers [{min_rho}, {max_rho}]"
            )))
        }
    };
    dichotomy_from_state(&ground, mu_scale, DichotomySettings::new(horizon))
}
