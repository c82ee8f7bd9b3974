//! Radial time evolution of `i u_t + Δu − |u|^{q−1}u + |u|^{p−1}u = 0` by
//! Strang splitting on `w = r u`, with conservation and virial monitors.

mod cutoff;
mod dichotomy;
mod sine;

pub use cutoff::RadialCutoff;
pub use dichotomy::{
    dichotomy_experiment, dichotomy_from_state, initial_datum, kinetic_bound, Criterion,
    DichotomySettings, DichotomyVerdict, Outcome,
};
pub use sine::SineTransform;

use crate::functionals::quadrature::{derivative_even, simpson_weights};
use crate::functionals::{evaluate, FunctionalReport, RadialField, RadialGrid};
use crate::prelude::*;
use crate::{Error, PowerPair, Result};
use core::f64::consts::PI;
use num_complex::Complex64;

/// Relative mass drift that aborts a run.
pub const MASS_DRIFT_LIMIT: f64 = 1e-6;
/// Share of the kinetic energy in the top third of the sine modes that marks
/// a run as under-resolved.
pub const SPECTRAL_TAIL_LIMIT: f64 = 1e-3;
/// Growth of `K^{1/2}` over its initial value treated as blow-up.
pub const GRADIENT_GROWTH_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Monitors {
    pub stop_on_drift: bool,
    pub stop_on_under_resolution: bool,
    pub stop_on_blow_up: bool,
    /// Record the cut-off virial right side at `R = r_max/4, r_max/2`.
    pub localized_virial: bool,
}

impl Default for Monitors {
    fn default() -> Self {
        Monitors {
            stop_on_drift: true,
            stop_on_under_resolution: true,
            stop_on_blow_up: true,
            localized_virial: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionSettings {
    pub t_end: f64,
    pub dt: f64,
    /// Steps between trace samples.
    pub sample_every: usize,
    pub monitors: Monitors,
}

impl EvolutionSettings {
    pub const DEFAULT_DT: f64 = 1e-4;

    pub fn new(t_end: f64, dt: f64) -> Self {
        EvolutionSettings {
            t_end,
            dt,
            sample_every: 50,
            monitors: Monitors::default(),
        }
    }
}

/// Why a run ended, with the time it ended at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    Completed,
    UnderResolved { t: f64, tail_fraction: f64 },
    DriftBreach { t: f64, mass_drift: f64 },
    BlowUpThreshold { t: f64, gradient_ratio: f64 },
}

/// Samples of the conserved and virial quantities along a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VirialTrace {
    pub times: Vec<f64>,
    pub variance: Vec<f64>,
    pub g_values: Vec<f64>,
    /// `K(u(t))^{1/2}`.
    pub grad_norms: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    pub mass_drift: Vec<f64>,
    pub energy_drift: Vec<f64>,
    /// `∫ n_{p,q}(u) dx`.
    pub npq_values: Vec<f64>,
    pub spectral_tail: Vec<f64>,
    /// Radii of the cut-off weights, empty when not monitored.
    pub localized_radii: Vec<f64>,
    /// Right side of the cut-off virial identity, one row per sample.
    pub localized_rhs: Vec<Vec<f64>>,
    /// `−sup G` over the samples.
    pub delta_estimate: f64,
    /// `inf (−G/K)` over the samples.
    pub epsilon_estimate: f64,
    /// Largest relative mass drift over every step.
    pub max_mass_drift: f64,
}

impl VirialTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn kinetic(&self, k: usize) -> f64 {
        self.grad_norms[k] * self.grad_norms[k]
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.energy_drift.iter().cloned().fold(0.0, f64::max)
    }

    /// The samples before the first one whose spectral tail exceeds the
    /// resolution limit, with the running estimates recomputed.
    pub fn resolved(&self) -> VirialTrace {
        let n = self
            .spectral_tail
            .iter()
            .position(|&f| f > SPECTRAL_TAIL_LIMIT)
            .unwrap_or(self.len());
        let cut = |v: &Vec<f64>| v[..n].to_vec();
        let mut out = VirialTrace {
            times: cut(&self.times),
            variance: cut(&self.variance),
            g_values: cut(&self.g_values),
            grad_norms: cut(&self.grad_norms),
            mass: cut(&self.mass),
            energy: cut(&self.energy),
            mass_drift: cut(&self.mass_drift),
            energy_drift: cut(&self.energy_drift),
            npq_values: cut(&self.npq_values),
            spectral_tail: cut(&self.spectral_tail),
            localized_radii: self.localized_radii.clone(),
            localized_rhs: self.localized_rhs[..n].to_vec(),
            delta_estimate: f64::INFINITY,
            epsilon_estimate: f64::INFINITY,
            max_mass_drift: self.max_mass_drift,
        };
        for k in 0..n {
            let g = out.g_values[k];
            out.delta_estimate = out.delta_estimate.min(-g);
            let kin = out.kinetic(k);
            if kin > 0.0 {
                out.epsilon_estimate = out.epsilon_estimate.min(-g / kin);
            }
        }
        out
    }
}

/// The advancing solution in the variable `w = r u`.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub grid: RadialGrid,
    pub w: Vec<Complex64>,
    pub t: f64,
    pub dt: f64,
    pub steps: usize,
    pub initial_report: FunctionalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub state: EvolutionState,
    pub trace: VirialTrace,
    pub stop: StopReason,
}

impl PartialEq for EvolutionState {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.w == other.w && self.t == other.t && self.dt == other.dt
    }
}

fn mode_number(k: usize, r_max: f64) -> f64 {
    k as f64 * PI / r_max
}

impl EvolutionState {
    /// `u = w/r` on the nodes; the origin value is `w'(0)` from the sine series.
    pub fn profile(&self) -> RadialField<Complex64> {
        let mut hat = self.w.clone();
        SineTransform::new(self.grid.intervals())
            .expect("checked at start")
            .apply(&mut hat);
        RadialField::from_values(self.grid, reconstruct(self.grid, &self.w, &hat))
            .expect("finite state")
    }

    /// `|u|` on the nodes.
    pub fn modulus(&self) -> Vec<f64> {
        self.profile().values().iter().map(|z| z.norm()).collect()
    }
}

fn reconstruct(grid: RadialGrid, w: &[Complex64], hat: &[Complex64]) -> Vec<Complex64> {
    let n = grid.intervals();
    let scale = 2.0 / n as f64;
    let origin = (1..n).fold(Complex64::new(0.0, 0.0), |acc, k| {
        acc + hat[k] * (scale * mode_number(k, grid.r_max()))
    });
    let mut u: Vec<Complex64> = (0..=n)
        .map(|j| if j == 0 { origin } else { w[j] / grid.node(j) })
        .collect();
    u[n] = Complex64::new(0.0, 0.0);
    u
}

#[derive(Debug, Clone, Copy)]
struct Snapshot {
    mass: f64,
    kinetic: f64,
    nq: f64,
    np: f64,
    variance: f64,
    spectral_tail: f64,
}

struct Stepper {
    pq: PowerPair,
    grid: RadialGrid,
    dst: SineTransform,
    propagator: Vec<Complex64>,
    hat: Vec<Complex64>,
    cutoffs: Vec<CutoffTable>,
    weights: Vec<f64>,
}

/// A cut-off tabulated on the grid nodes.
struct CutoffTable {
    radius: f64,
    bilaplacian: Vec<f64>,
    second: Vec<f64>,
    laplacian: Vec<f64>,
}

impl CutoffTable {
    fn new(c: RadialCutoff, grid: RadialGrid) -> Self {
        CutoffTable {
            radius: c.radius(),
            bilaplacian: grid.nodes().map(|r| c.bilaplacian(r)).collect(),
            second: grid.nodes().map(|r| c.second_derivative(r)).collect(),
            laplacian: grid.nodes().map(|r| c.laplacian(r)).collect(),
        }
    }
}

impl Stepper {
    fn phase(&self, w: &mut [Complex64], tau: f64) {
        let (p, q) = (self.pq.p(), self.pq.q());
        for j in 1..w.len() - 1 {
            let a = w[j].norm() / self.grid.node(j);
            let theta = -tau * (a.powf(q - 1.0) - a.powf(p - 1.0));
            w[j] *= Complex64::from_polar(1.0, theta);
        }
    }

    fn linear(&mut self, w: &mut [Complex64]) {
        let n = self.grid.intervals();
        let scale = 2.0 / n as f64;
        self.dst.apply(w);
        for k in 1..n {
            w[k] *= self.propagator[k] * scale;
        }
        self.dst.apply(w);
    }

    fn step(&mut self, w: &mut [Complex64], dt: f64) {
        self.phase(w, 0.5 * dt);
        self.linear(w);
        self.phase(w, 0.5 * dt);
    }

    fn mass(&self, w: &[Complex64]) -> f64 {
        4.0 * PI * self.grid.h() * w.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    fn measure(&mut self, w: &[Complex64]) -> Snapshot {
        let grid = self.grid;
        let n = grid.intervals();
        let h = grid.h();
        self.hat.copy_from_slice(w);
        self.dst.apply(&mut self.hat);
        let (mut kin, mut top) = (0.0, 0.0);
        for k in 1..n {
            let e = mode_number(k, grid.r_max()).powi(2) * self.hat[k].norm_sqr();
            kin += e;
            if 3 * k > 2 * n {
                top += e;
            }
        }
        let four_pi = 4.0 * PI;
        let (p, q) = (self.pq.p(), self.pq.q());
        let (mut nq, mut np, mut var) = (0.0, 0.0, 0.0);
        for j in 1..n {
            let r = grid.node(j);
            let m2 = w[j].norm_sqr();
            let a = m2.sqrt() / r;
            nq += a.powf(q + 1.0) * r * r;
            np += a.powf(p + 1.0) * r * r;
            var += r * r * m2;
        }
        Snapshot {
            mass: self.mass(w),
            kinetic: four_pi * 2.0 * h / n as f64 * kin,
            nq: four_pi * h * nq,
            np: four_pi * h * np,
            variance: four_pi * h * var,
            spectral_tail: if kin > 0.0 { top / kin } else { 0.0 },
        }
    }

    /// `∫ (−Δ²φ |u|² + 4φ''|u_r|² + Δφ n_{p,q}(u)) dx` for each cut-off.
    fn localized(&self, w: &[Complex64]) -> Vec<f64> {
        if self.cutoffs.is_empty() {
            return Vec::new();
        }
        let grid = self.grid;
        let u = reconstruct(grid, w, &self.hat);
        let du = derivative_even(&u, grid.h());
        let (p, q) = (self.pq.p(), self.pq.q());
        self.cutoffs
            .iter()
            .map(|c| {
                let mut acc = 0.0;
                for (j, wt) in self.weights.iter().enumerate() {
                    let r = grid.node(j);
                    let a = u[j].norm();
                    let npq = 2.0 * (q - 1.0) / (q + 1.0) * a.powf(q + 1.0)
                        - 2.0 * (p - 1.0) / (p + 1.0) * a.powf(p + 1.0);
                    let f = -c.bilaplacian[j] * a * a
                        + 4.0 * c.second[j] * du[j].norm_sqr()
                        + c.laplacian[j] * npq;
                    acc += wt * f * r * r;
                }
                4.0 * PI * acc
            })
            .collect()
    }
}

fn relative(now: f64, start: f64) -> f64 {
    let d = (now - start).abs();
    if start == 0.0 {
        d
    } else {
        d / start.abs()
    }
}

/// Runs the splitting scheme from `initial` on its own grid.
pub fn evolve(
    initial: &RadialField<Complex64>,
    pq: PowerPair,
    settings: EvolutionSettings,
) -> Result<Evolution> {
    let grid = initial.grid();
    if let Some(i) = initial.first_non_finite() {
        return Err(Error::NonFinite { index: i });
    }
    if !(settings.dt > 0.0 && settings.dt.is_finite()) || !(settings.t_end >= 0.0) {
        return Err(Error::invalid(format!(
            "need dt > 0 and t_end >= 0 (got dt = {}, t_end = {})",
            settings.dt, settings.t_end
        )));
    }
    if settings.sample_every == 0 {
        return Err(Error::invalid("sample_every must be at least 1"));
    }
    let dst = SineTransform::new(grid.intervals())?;
    let n = grid.intervals();
    let mut w: Vec<Complex64> = grid
        .nodes()
        .zip(initial.values())
        .map(|(r, u)| u * r)
        .collect();
    let peak = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if w[n].norm() > 1e-6 * peak {
        return Err(Error::invalid(format!(
            "initial datum does not vanish at r_max: |r u| = {:e} against peak {:e}",
            w[n].norm(),
            peak
        )));
    }
    w[n] = Complex64::new(0.0, 0.0);

    let initial_report = evaluate(initial, pq)?;
    let propagator = (0..=n)
        .map(|k| Complex64::from_polar(1.0, -mode_number(k, grid.r_max()).powi(2) * settings.dt))
        .collect();
    let cutoffs = if settings.monitors.localized_virial {
        [4.0, 2.0]
            .iter()
            .map(|d| CutoffTable::new(RadialCutoff::new(grid.r_max() / d), grid))
            .collect()
    } else {
        Vec::new()
    };
    let weights = simpson_weights(n, grid.h());
    let mut stepper = Stepper {
        pq,
        grid,
        dst,
        propagator,
        hat: vec![Complex64::new(0.0, 0.0); n + 1],
        cutoffs,
        weights,
    };

    let total = (settings.t_end / settings.dt).round() as usize;
    let mut trace = VirialTrace {
        localized_radii: stepper.cutoffs.iter().map(|c| c.radius).collect(),
        delta_estimate: f64::INFINITY,
        epsilon_estimate: f64::INFINITY,
        ..VirialTrace::default()
    };
    let first = stepper.measure(&w);
    let e_of = |s: &Snapshot| 0.5 * s.kinetic + s.nq / (pq.q() + 1.0) - s.np / (pq.p() + 1.0);
    let (m0, e0, k0) = (first.mass, e_of(&first), first.kinetic);
    let mut stop = StopReason::Completed;
    let mut step = 0;
    loop {
        let t = step as f64 * settings.dt;
        if step % settings.sample_every == 0 {
            let s = if step == 0 {
                first
            } else {
                stepper.measure(&w)
            };
            let report = FunctionalReport::from_integrals(pq, s.mass, s.kinetic, s.nq, s.np);
            let energy = e_of(&s);
            trace.times.push(t);
            trace.variance.push(s.variance);
            trace.g_values.push(report.pohozaev);
            trace.grad_norms.push(s.kinetic.sqrt());
            trace.mass.push(s.mass);
            trace.energy.push(energy);
            trace.mass_drift.push(relative(s.mass, m0));
            trace.energy_drift.push(relative(energy, e0));
            let (q, p) = (pq.q(), pq.p());
            trace
                .npq_values
                .push(2.0 * (q - 1.0) / (q + 1.0) * s.nq - 2.0 * (p - 1.0) / (p + 1.0) * s.np);
            trace.spectral_tail.push(s.spectral_tail);
            trace.localized_rhs.push(stepper.localized(&w));
            trace.delta_estimate = trace.delta_estimate.min(-report.pohozaev);
            if s.kinetic > 0.0 {
                trace.epsilon_estimate = trace.epsilon_estimate.min(-report.pohozaev / s.kinetic);
            }
            let m = settings.monitors;
            if m.stop_on_under_resolution && s.spectral_tail > SPECTRAL_TAIL_LIMIT {
                stop = StopReason::UnderResolved {
                    t,
                    tail_fraction: s.spectral_tail,
                };
                break;
            }
            let ratio = if k0 > 0.0 {
                (s.kinetic / k0).sqrt()
            } else {
                0.0
            };
            if m.stop_on_blow_up && ratio > GRADIENT_GROWTH_LIMIT {
                stop = StopReason::BlowUpThreshold {
                    t,
                    gradient_ratio: ratio,
                };
                break;
            }
        }
        if step == total {
            break;
        }
        stepper.step(&mut w, settings.dt);
        step += 1;
        let drift = relative(stepper.mass(&w), m0);
        trace.max_mass_drift = trace.max_mass_drift.max(drift);
        if settings.monitors.stop_on_drift && drift > MASS_DRIFT_LIMIT {
            stop = StopReason::DriftBreach {
                t: step as f64 * settings.dt,
                mass_drift: drift,
            };
            break;
        }
    }
    let state = EvolutionState {
        grid,
        w,
        t: step as f64 * settings.dt,
        dt: settings.dt,
        steps: step,
        initial_report,
    };
    Ok(Evolution { state, trace, stop })
}

/// Mismatch of the cut-off virial right side against `8G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedVirial {
    pub radius: f64,
    /// `max_t |V_φ'' − 8G| / max_t 8K`.
    pub correction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirialReport {
    /// `max |ΔV²/Δt² − 8G| / max(|8G|, 8·10⁻³ K)` over interior samples.
    pub max_mismatch: f64,
    /// One-sided fourth-order estimate of `V''(0)`.
    pub initial_second_derivative: f64,
    pub initial_8g: f64,
    pub localized: Vec<LocalizedVirial>,
}

impl VirialReport {
    /// `|V''(0) − 8G(u₀)| / max(|8G(u₀)|, 8·10⁻³ K(u₀))`.
    pub fn initial_mismatch(&self, initial_kinetic: f64) -> f64 {
        let scale = self.initial_8g.abs().max(8e-3 * initial_kinetic);
        (self.initial_second_derivative - self.initial_8g).abs() / scale
    }
}

/// Compares finite differences of the variance with `8G(u(t))`.
pub fn virial_check(trace: &VirialTrace) -> Result<VirialReport> {
    let n = trace.len();
    if n < 5 {
        return Err(Error::invalid(format!(
            "virial check needs at least 5 samples, got {n}"
        )));
    }
    let dt = trace.times[1] - trace.times[0];
    if trace
        .times
        .windows(2)
        .any(|w| ((w[1] - w[0]) / dt - 1.0).abs() > 1e-9)
    {
        return Err(Error::invalid(
            "virial check needs uniformly spaced samples",
        ));
    }
    let v = &trace.variance;
    let scale = |k: usize| (8.0 * trace.g_values[k]).abs().max(8e-3 * trace.kinetic(k));
    let max_mismatch = (1..n - 1)
        .map(|k| {
            let d2 = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (dt * dt);
            (d2 - 8.0 * trace.g_values[k]).abs() / scale(k)
        })
        .fold(0.0, f64::max);
    let initial_second_derivative =
        (35.0 * v[0] - 104.0 * v[1] + 114.0 * v[2] - 56.0 * v[3] + 11.0 * v[4]) / (12.0 * dt * dt);
    let k_scale = (0..n).map(|k| 8.0 * trace.kinetic(k)).fold(0.0, f64::max);
    let localized = trace
        .localized_radii
        .iter()
        .enumerate()
        .map(|(i, &radius)| LocalizedVirial {
            radius,
            correction: (0..n)
                .map(|k| (trace.localized_rhs[k][i] - 8.0 * trace.g_values[k]).abs())
                .fold(0.0, f64::max)
                / k_scale,
        })
        .collect();
    Ok(VirialReport {
        max_mismatch,
        initial_second_derivative,
        initial_8g: 8.0 * trace.g_values[0],
        localized,
    })
}
