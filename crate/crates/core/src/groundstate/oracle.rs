//! Independent ground-state computation: preconditioned gradient descent on
//! the energy at fixed mass, projected back onto the Pohozaev manifold
//! through the fiber maximum after every step.

use crate::fibering::{analyze_fiber, FiberCoefficients};
use crate::functionals::{evaluate, rescale, FunctionalReport, RadialField, RadialGrid};
use crate::prelude::*;
use crate::{Error, PowerPair, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSettings {
    pub initial_step: f64,
    pub max_step: f64,
    /// Stop once the relative energy change per accepted step stays below this.
    pub energy_tolerance: f64,
    pub max_iterations: usize,
    /// Width of the Gaussian seed.
    pub seed_width: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        FlowSettings {
            initial_step: 0.5,
            max_step: 1.0,
            energy_tolerance: 1e-8,
            max_iterations: 20_000,
            seed_width: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub field: RadialField,
    pub energy: f64,
    pub report: FunctionalReport,
    /// `(N_p − N_q − K)/M` of the final state.
    pub omega_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Discrete functionals of `w = r u` with zero ends: forward-difference
/// kinetic term and nodal sums, so that [`gradient`] is their exact gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Discrete {
    mass: f64,
    kinetic: f64,
    nq: f64,
    np: f64,
}

impl Discrete {
    fn of(grid: RadialGrid, u: &[f64], pq: PowerPair) -> Self {
        let h = grid.h();
        let n = grid.len();
        let w = |i: usize| if i + 1 == n { 0.0 } else { grid.node(i) * u[i] };
        let four_pi = 4.0 * core::f64::consts::PI;
        let mut d = Discrete {
            mass: 0.0,
            kinetic: 0.0,
            nq: 0.0,
            np: 0.0,
        };
        for i in 0..n - 1 {
            d.kinetic += (w(i + 1) - w(i)).powi(2) / h;
        }
        for i in 1..n - 1 {
            let (wi, v) = (w(i), u[i].abs());
            d.mass += wi * wi * h;
            d.nq += wi * wi * v.powf(pq.q() - 1.0) * h;
            d.np += wi * wi * v.powf(pq.p() - 1.0) * h;
        }
        Discrete {
            mass: four_pi * d.mass,
            kinetic: four_pi * d.kinetic,
            nq: four_pi * d.nq,
            np: four_pi * d.np,
        }
    }

    fn energy(&self, pq: PowerPair) -> f64 {
        self.kinetic / 2.0 + self.nq / (pq.q() + 1.0) - self.np / (pq.p() + 1.0)
    }

    fn omega(&self) -> f64 {
        (self.np - self.nq - self.kinetic) / self.mass
    }

    fn fiber(&self, pq: PowerPair) -> Result<FiberCoefficients> {
        let report =
            FunctionalReport::from_integrals(pq, self.mass, self.kinetic, self.nq, self.np);
        FiberCoefficients::from_report(&report, pq)
    }
}

struct State {
    u: Vec<f64>,
    functionals: Discrete,
}

/// Mass renormalization followed by the move to the fiber maximum.
fn project(grid: RadialGrid, u: Vec<f64>, pq: PowerPair, target_mass: f64) -> Result<State> {
    let m = Discrete::of(grid, &u, pq).mass;
    let field = RadialField::from_values(grid, u)?.scaled((target_mass / m).sqrt());
    let coeffs = Discrete::of(grid, field.values(), pq).fiber(pq)?;
    let mu = analyze_fiber(&coeffs)?.mu_tilde;
    let u = rescale(&field, mu)?.field.values().to_vec();
    let m = Discrete::of(grid, &u, pq).mass;
    let u: Vec<f64> = u.iter().map(|v| v * (target_mass / m).sqrt()).collect();
    let functionals = Discrete::of(grid, &u, pq);
    Ok(State { u, functionals })
}

/// Solves `(c − ∂²) x = b` on the interior nodes with zero ends.
fn solve_shifted_laplacian(b: &[f64], c: f64, h: f64) -> Vec<f64> {
    let n = b.len();
    let diag = c + 2.0 / (h * h);
    let off = -1.0 / (h * h);
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = off / diag;
    dp[0] = b[0] / diag;
    for i in 1..n {
        let m = diag - off * cp[i - 1];
        cp[i] = off / m;
        dp[i] = (b[i] - off * dp[i - 1]) / m;
    }
    let mut x = dp;
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}

/// Energy gradient with respect to `w = r u` on interior nodes.
fn gradient(grid: RadialGrid, u: &[f64], pq: PowerPair) -> Vec<f64> {
    let h = grid.h();
    let n = grid.len();
    let w: Vec<f64> = (0..n).map(|i| grid.node(i) * u[i]).collect();
    let mut w_end = w.clone();
    w_end[n - 1] = 0.0;
    (1..n - 1)
        .map(|i| {
            let lap = (w_end[i + 1] - 2.0 * w_end[i] + w_end[i - 1]) / (h * h);
            let v = u[i].abs();
            -lap + w[i] * (v.powf(pq.q() - 1.0) - v.powf(pq.p() - 1.0))
        })
        .collect()
}

/// Preconditioned descent step, with the direction made orthogonal to `w`
/// so that the mass changes only at second order.
fn take_step(grid: RadialGrid, u: &[f64], pq: PowerPair, step: f64, shift: f64) -> Vec<f64> {
    let h = grid.h();
    let n = grid.len();
    let w: Vec<f64> = (1..n - 1).map(|i| grid.node(i) * u[i]).collect();
    let pg = solve_shifted_laplacian(&gradient(grid, u, pq), shift, h);
    let pw = solve_shifted_laplacian(&w, shift, h);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let beta = dot(&w, &pg) / dot(&w, &pw);
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let dir = pg[i - 1] - beta * pw[i - 1];
        out[i] = (w[i - 1] - step * dir) / grid.node(i);
    }
    out[0] = (4.0 * out[1] - out[2]) / 3.0;
    out
}

/// Minimizes the energy over the Pohozaev manifold at mass `rho²`, starting
/// from a Gaussian.
pub fn gradient_flow(
    pq: PowerPair,
    rho: f64,
    grid: RadialGrid,
    settings: FlowSettings,
) -> Result<FlowResult> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!(
            "mass parameter rho = {rho} must be positive"
        )));
    }
    let target = rho * rho;
    let seed: Vec<f64> = grid
        .nodes()
        .map(|r| (-0.5 * (r / settings.seed_width).powi(2)).exp())
        .collect();
    let mut state = project(grid, seed, pq, target)?;
    let mut step = settings.initial_step;
    let mut iterations = 0;
    let mut quiet = 0;
    let mut converged = false;
    while iterations < settings.max_iterations {
        iterations += 1;
        let shift = state.functionals.omega().max(1e-3);
        let trial = take_step(grid, &state.u, pq, step, shift);
        let next = match project(grid, trial, pq, target) {
            Ok(s) if s.functionals.energy(pq) <= state.functionals.energy(pq) => s,
            _ => {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
                continue;
            }
        };
        let (e0, e1) = (state.functionals.energy(pq), next.functionals.energy(pq));
        let change = (e0 - e1) / e1.abs();
        state = next;
        step = (step * 1.2).min(settings.max_step);
        quiet = if change < settings.energy_tolerance {
            quiet + 1
        } else {
            0
        };
        if quiet >= 5 {
            converged = true;
            break;
        }
    }
    // final placement on the manifold of the quadrature used everywhere else
    let field = RadialField::from_values(grid, state.u)?;
    let mu = analyze_fiber(&FiberCoefficients::from_report(&evaluate(&field, pq)?, pq)?)?.mu_tilde;
    let field = rescale(&field, mu)?.field;
    let report = evaluate(&field, pq)?;
    Ok(FlowResult {
        energy: report.energy,
        omega_estimate: report.omega_candidate.unwrap_or(f64::NAN),
        report,
        field,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve_inverts_the_operator() {
        let h = 0.1;
        let c = 0.7;
        let x: Vec<f64> = (1..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let n = x.len();
        let b: Vec<f64> = (0..n)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { x[i - 1] };
                let right = if i + 1 == n { 0.0 } else { x[i + 1] };
                c * x[i] - (right - 2.0 * x[i] + left) / (h * h)
            })
            .collect();
        let y = solve_shifted_laplacian(&b, c, h);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_lands_on_the_manifold_at_the_mass() {
        let pq = PowerPair::new(3.0, 2.0).unwrap();
        let grid = RadialGrid::new(30.0, 4096).unwrap();
        let seed: Vec<f64> = grid.nodes().map(|r| (-r * r / 3.0).exp()).collect();
        let s = project(grid, seed, pq, 9.0).unwrap();
        let d = s.functionals;
        assert!((d.mass - 9.0).abs() < 1e-9);
        let r = FunctionalReport::from_integrals(pq, d.mass, d.kinetic, d.nq, d.np);
        assert!(r.pohozaev_ratio() < 1e-3, "G/K = {:e}", r.pohozaev_ratio());
    }
}
