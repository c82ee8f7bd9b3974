//! Mass-constrained ground states through the frequency branch
//! `ω ↦ ρ(ω)` of positive radial standing waves.

mod oracle;

pub use oracle::{gradient_flow, FlowResult, FlowSettings};

use crate::fibering::theta_derivative_from_report;
use crate::functionals::quadrature::{derivative_even, second_derivative_even};
use crate::functionals::{evaluate, FunctionalReport, RadialField, RadialGrid, ResolutionWarning};
use crate::functionals::{support_radius, MIN_SUPPORT_NODES};
use crate::prelude::*;
use crate::static_solver::profile::{assemble, ShotField};
use crate::static_solver::shooting::{bisect, ProfileEquation};
use crate::static_solver::{check_shape, mass_growth, GrowthClass};
use crate::{Error, PowerPair, Regime, Result};

/// Relative mass mismatch accepted by [`Branch::ground_state_at_mass`].
pub const MASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub pq: PowerPair,
    /// `√M`; infinite when the mass integral diverges (`ω = 0`, `q ≥ 7/3`).
    pub rho: f64,
    pub profile: RadialField,
    pub omega: f64,
    pub i_value: f64,
    pub pohozaev_residual: f64,
    pub stationarity_residual: f64,
    pub report: FunctionalReport,
    pub amplitude: f64,
    pub reliable_radius: f64,
    pub warnings: Vec<ResolutionWarning>,
}

impl GroundState {
    /// `d/dθ` of the fiber maximum, divided by `K`.
    pub fn theta_stationarity(&self) -> Result<f64> {
        theta_derivative_from_report(&self.report, self.pq)
            .map(|t| t.analytic / self.report.kinetic)
    }

    /// `|ω − (N_p − N_q − K)/M| / |ω|`.
    pub fn multiplier_mismatch(&self) -> Option<f64> {
        self.report
            .omega_candidate
            .map(|c| (c - self.omega).abs() / self.omega.abs())
    }

    /// Least-squares decay rate of `r u(r)` over the outer half of the
    /// reliable range.
    pub fn tail_rate(&self) -> f64 {
        let (a, b) = (0.5 * self.reliable_radius, self.reliable_radius);
        let pts: Vec<(f64, f64)> = (0..=64)
            .map(|k| a + (b - a) * k as f64 / 64.0)
            .map(|r| (r, (r * self.profile.sample_at(r)).ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        -sxy / sxx
    }

    /// `|E_h − E_{2h}|` plus the energy shift implied by the mass mismatch
    /// `|M − ρ²|` through `dI/dM = −ω/2`.
    pub fn energy_error(&self, target_mass: Option<f64>) -> Result<f64> {
        let grid = self.profile.grid();
        let coarse_err = match grid.coarsened() {
            Some(c) => (evaluate(&self.profile.resample(c), self.pq)?.energy - self.i_value).abs(),
            None => 0.0,
        };
        let mass_err = target_mass.map_or(0.0, |m| {
            0.5 * self.omega.abs() * (self.report.mass - m).abs()
        });
        Ok(coarse_err + mass_err)
    }
}

/// `sup |−Δu + ωu + u^q − u^p| / sup |Δu|` over the resolved grid nodes.
pub fn stationarity_residual(
    field: &RadialField,
    pq: PowerPair,
    omega: f64,
    reliable_radius: f64,
) -> f64 {
    let grid = field.grid();
    let h = grid.h();
    let u = field.values();
    let du = derivative_even(u, h);
    let d2 = second_derivative_even(u, h);
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for i in 0..grid.len() - 3 {
        let r = grid.node(i);
        if r > reliable_radius {
            break;
        }
        let lap = if i == 0 {
            3.0 * d2[0]
        } else {
            d2[i] + 2.0 * du[i] / r
        };
        let v = u[i].max(0.0);
        let res = -lap + omega * u[i] + v.powf(pq.q()) - v.powf(pq.p());
        worst = worst.max(res.abs());
        scale = scale.max(lap.abs());
    }
    worst / scale
}

fn warnings_for(field: &RadialField, report: &FunctionalReport) -> Vec<ResolutionWarning> {
    let mut out = Vec::new();
    let nodes = support_radius(field, 1.0 - 1e-6) / field.grid().h();
    if nodes < MIN_SUPPORT_NODES {
        out.push(ResolutionWarning::UnderResolved { nodes });
    }
    let on_grid = crate::functionals::mass(&field.clone().without_far_field());
    let fraction = if report.mass.is_finite() {
        1.0 - on_grid / report.mass
    } else {
        1.0
    };
    if fraction > 1e-2 {
        out.push(ResolutionWarning::OffGridMass { fraction });
    }
    out
}

/// Decay lengths `1/√ω` kept on the grid; beyond that the profile is below
/// `e^{-40}` of its peak scale.
const DECAY_LENGTHS: f64 = 40.0;

/// `grid` shortened to `40/√ω` when that is smaller, keeping the node count,
/// so that narrow high-frequency profiles stay resolved.
pub fn grid_for(grid: RadialGrid, omega: f64) -> RadialGrid {
    let reach = DECAY_LENGTHS / omega.sqrt();
    if reach < grid.r_max() {
        RadialGrid::new(reach, grid.intervals()).expect("a shorter extent of a valid grid")
    } else {
        grid
    }
}

/// Positive radial solution of `−Δu + ωu + u^q − u^p = 0`; the mass is an
/// output. The profile lives on [`grid_for`]`(grid, omega)`.
pub fn solve_at_omega(pq: PowerPair, omega: f64, grid: RadialGrid) -> Result<GroundState> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::invalid(format!(
            "frequency omega = {omega} must be nonnegative"
        )));
    }
    let grid = grid_for(grid, omega);
    let eq = ProfileEquation::new(pq, omega);
    let bis = bisect(&eq, None)?;
    let ShotField {
        field,
        reliable_radius,
        ..
    } = assemble(&bis, grid, omega)?;
    check_shape(&field, reliable_radius)?;
    let mut report = evaluate(&field, pq)?;
    if omega == 0.0 && mass_growth(&field).class != GrowthClass::Convergent {
        report.mass = f64::INFINITY;
        report.omega_candidate = None;
    }
    let warnings = warnings_for(&field, &report);
    Ok(GroundState {
        pq,
        rho: report.mass.sqrt(),
        omega,
        i_value: report.energy,
        pohozaev_residual: report.pohozaev_ratio(),
        stationarity_residual: stationarity_residual(&field, pq, omega, reliable_radius),
        amplitude: bis.amplitude(),
        reliable_radius,
        profile: field,
        report,
        warnings,
    })
}

/// Grid for the gradient-flow oracle: about 30 decay lengths of a state
/// with frequency `omega`, within `[15, 120]`.
pub fn oracle_grid(omega: f64) -> RadialGrid {
    let extent = (30.0 / omega.sqrt()).clamp(15.0, 120.0);
    RadialGrid::new(extent, 4096).expect("valid extent")
}

/// Recomputes the ground state at the same mass by the gradient flow.
pub fn cross_validate(state: &GroundState) -> Result<FlowResult> {
    let flow = gradient_flow(
        state.pq,
        state.rho,
        oracle_grid(state.omega),
        FlowSettings::default(),
    )?;
    if !flow.converged {
        return Err(Error::Convergence(format!(
            "gradient flow stalled after {} iterations",
            flow.iterations
        )));
    }
    Ok(flow)
}

/// Scalars of one solved branch point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub omega: f64,
    pub rho: f64,
    pub energy: f64,
    pub amplitude: f64,
}

impl From<&GroundState> for BranchPoint {
    fn from(g: &GroundState) -> Self {
        BranchPoint {
            omega: g.omega,
            rho: g.rho,
            energy: g.i_value,
            amplitude: g.amplitude,
        }
    }
}

/// Computes one branch point.
pub fn branch_point(pq: PowerPair, omega: f64, grid: RadialGrid) -> Result<BranchPoint> {
    solve_at_omega(pq, omega, grid).map(|g| BranchPoint::from(&g))
}

/// `per_decade` log-spaced frequencies in `[10^lo, 10^hi]`.
pub fn log_frequencies(lo: i32, hi: i32, per_decade: usize) -> Vec<f64> {
    let count = (hi - lo) as usize * per_decade;
    (0..=count)
        .map(|k| 10f64.powf(lo as f64 + k as f64 / per_decade as f64))
        .collect()
}

/// Default frequency sample: 64 per decade over `[10⁻⁴, 10²]`.
pub fn default_frequencies() -> Vec<f64> {
    log_frequencies(-4, 2, 64)
}

/// Frequency samples added below or above the default range while the
/// requested masses are not covered.
const EXTENSION_PER_DECADE: usize = 16;
const LOWEST_FREQUENCY_EXP: i32 = -16;
const HIGHEST_FREQUENCY_EXP: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum MassOutcome {
    Achieved {
        state: Box<GroundState>,
        candidates: Vec<BranchPoint>,
    },
    NotAchieved {
        min_rho: f64,
        max_rho: f64,
    },
}

impl MassOutcome {
    pub fn state(&self) -> Option<&GroundState> {
        match self {
            MassOutcome::Achieved { state, .. } => Some(state),
            MassOutcome::NotAchieved { .. } => None,
        }
    }
}

/// Sampled frequency branch of one `(p, q)` on one grid, sorted by `ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub pq: PowerPair,
    pub grid: RadialGrid,
    pub points: Vec<BranchPoint>,
}

impl Branch {
    /// Builds a branch from already computed points (e.g. in parallel).
    /// Points with non-finite mass are kept but never bracket a target.
    pub fn from_points(pq: PowerPair, grid: RadialGrid, mut points: Vec<BranchPoint>) -> Self {
        points.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        points.dedup_by(|a, b| a.omega == b.omega);
        Branch { pq, grid, points }
    }

    /// Samples `ω = 0` and `omegas` sequentially.
    pub fn sample(pq: PowerPair, grid: RadialGrid, omegas: &[f64]) -> Result<Self> {
        let mut points = vec![branch_point(pq, 0.0, grid)?];
        for &w in omegas {
            points.push(branch_point(pq, w, grid)?);
        }
        Ok(Self::from_points(pq, grid, points))
    }

    /// Branch covering `masses` where the theory allows, extending the
    /// default frequency range by whole decades when needed.
    pub fn covering(pq: PowerPair, grid: RadialGrid, masses: &[f64]) -> Result<Self> {
        let mut b = Self::sample(pq, grid, &default_frequencies())?;
        b.extend_for(masses, |w| branch_point(pq, w, grid))?;
        Ok(b)
    }

    /// Frequencies the branch still needs to cover `masses`, one decade at a
    /// time; `solve` computes a point.
    pub fn extend_for(
        &mut self,
        masses: &[f64],
        mut solve: impl FnMut(f64) -> Result<BranchPoint>,
    ) -> Result<()> {
        let want_max = masses.iter().cloned().fold(0.0, f64::max);
        let want_min = masses.iter().cloned().fold(f64::INFINITY, f64::min);
        while self.finite_max_rho() < want_max && self.can_extend(self.pq.regime()) {
            let lo = self.lowest_positive_omega().log10().round() as i32;
            if lo <= LOWEST_FREQUENCY_EXP {
                break;
            }
            let new: Vec<f64> = log_frequencies(lo - 1, lo, EXTENSION_PER_DECADE);
            for w in &new[..new.len() - 1] {
                self.points.push(solve(*w)?);
            }
            self.points.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        }
        while self.min_rho() > want_min {
            let hi = self.points.last().map_or(2.0, |p| p.omega.log10().round()) as i32;
            if hi >= HIGHEST_FREQUENCY_EXP {
                break;
            }
            let new: Vec<f64> = log_frequencies(hi, hi + 1, EXTENSION_PER_DECADE);
            for w in &new[1..] {
                self.points.push(solve(*w)?);
            }
            self.points.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        }
        Ok(())
    }

    /// Subcritical branches end at the static mass; only divergent-mass
    /// branches grow without bound as `ω → 0`.
    fn can_extend(&self, regime: Regime) -> bool {
        regime != Regime::MassSubcritical
    }

    fn lowest_positive_omega(&self) -> f64 {
        self.points
            .iter()
            .find(|p| p.omega > 0.0)
            .map_or(1e-4, |p| p.omega)
    }

    fn finite_max_rho(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.rho.is_finite())
            .map(|p| p.rho)
            .fold(0.0, f64::max)
    }

    pub fn min_rho(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.rho)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_rho(&self) -> f64 {
        self.finite_max_rho()
    }

    /// The `ω = 0` point when its mass is finite.
    pub fn static_point(&self) -> Option<&BranchPoint> {
        self.points
            .first()
            .filter(|p| p.omega == 0.0 && p.rho.is_finite())
    }

    /// Critical mass extrapolated from the three smallest positive
    /// frequencies (Aitken's Δ² on the geometric frequency sequence).
    pub fn extrapolated_rho_c(&self) -> Option<f64> {
        let pos: Vec<&BranchPoint> = self
            .points
            .iter()
            .filter(|p| p.omega > 0.0)
            .take(3)
            .collect();
        if pos.len() < 3 {
            return None;
        }
        let (a, b, c) = (pos[2].rho, pos[1].rho, pos[0].rho);
        let denom = c - 2.0 * b + a;
        Some(if denom == 0.0 {
            c
        } else {
            c - (c - b) * (c - b) / denom
        })
    }

    /// All `ω` intervals of the branch whose endpoint masses straddle `rho`.
    fn brackets(&self, rho: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, w) in self.points.windows(2).enumerate() {
            let (a, b) = (w[0].rho - rho, w[1].rho - rho);
            if a.is_finite()
                && b.is_finite()
                && a * b <= 0.0
                && !(b == 0.0 && k + 2 < self.points.len())
            {
                out.push((k, k + 1));
            }
        }
        out
    }

    /// Ground state of mass `rho²`: the lowest-energy standing wave with
    /// that mass on the branch.
    pub fn ground_state_at_mass(&self, rho: f64) -> Result<MassOutcome> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!(
                "mass parameter rho = {rho} must be positive"
            )));
        }
        let brackets = self.brackets(rho);
        if brackets.is_empty() {
            return Ok(MassOutcome::NotAchieved {
                min_rho: self.min_rho(),
                max_rho: self.max_rho(),
            });
        }
        let mut best: Option<GroundState> = None;
        let mut candidates = Vec::new();
        for (i, j) in brackets {
            let gs = self.refine(rho, &self.points[i], &self.points[j])?;
            candidates.push(BranchPoint::from(&gs));
            if best.as_ref().is_none_or(|b| gs.i_value < b.i_value) {
                best = Some(gs);
            }
        }
        Ok(MassOutcome::Achieved {
            state: Box::new(best.expect("nonempty brackets")),
            candidates,
        })
    }

    /// Illinois iteration in `s = √ω` on `M(s²) − ρ²`.
    fn refine(&self, rho: f64, a: &BranchPoint, b: &BranchPoint) -> Result<GroundState> {
        let target = rho * rho;
        let solve = |omega: f64| solve_at_omega(self.pq, omega, self.grid);
        let close =
            |g: &GroundState| (g.report.mass - target).abs() <= 1e-3 * MASS_TOLERANCE * target;
        let (mut s0, mut f0) = (a.omega.sqrt(), a.rho * a.rho - target);
        let (mut s1, mut f1) = (b.omega.sqrt(), b.rho * b.rho - target);
        let mut best: Option<GroundState> = None;
        let keep = |g: GroundState, best: &mut Option<GroundState>| {
            let err = (g.report.mass - target).abs();
            if best
                .as_ref()
                .is_none_or(|b| err < (b.report.mass - target).abs())
            {
                *best = Some(g);
            }
        };
        for end in [(f0, a.omega), (f1, b.omega)] {
            if end.0 == 0.0 {
                return solve(end.1);
            }
        }
        let mut side = 0i8;
        for _ in 0..80 {
            let s = (s0 * f1 - s1 * f0) / (f1 - f0);
            let s = if s > s0.min(s1) && s < s0.max(s1) {
                s
            } else {
                0.5 * (s0 + s1)
            };
            let g = solve(s * s)?;
            let f = g.report.mass - target;
            let done = close(&g) || (s1 - s0).abs() <= 1e-15 * s.max(1e-300);
            keep(g, &mut best);
            if done {
                break;
            }
            if f * f1 < 0.0 {
                s0 = s1;
                f0 = f1;
                side = 0;
            } else {
                f0 *= if side == 1 { 0.5 } else { 1.0 };
                side = 1;
            }
            s1 = s;
            f1 = f;
        }
        let g = best.expect("at least one iteration");
        let mismatch = (g.report.mass - target).abs() / target;
        if mismatch > MASS_TOLERANCE {
            return Err(Error::Convergence(format!(
                "mass refinement stalled at relative mismatch {mismatch:e}"
            )));
        }
        Ok(g)
    }
}

/// Ground state at one mass on a freshly sampled branch.
pub fn ground_state_at_mass(pq: PowerPair, rho: f64, grid: RadialGrid) -> Result<MassOutcome> {
    Branch::covering(pq, grid, &[rho])?.ground_state_at_mass(rho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub rho: f64,
    pub i_value: f64,
    pub omega: f64,
    pub kinetic: f64,
    pub nq: f64,
    pub np: f64,
    pub pohozaev_residual: f64,
    pub stationarity_residual: f64,
    pub achieved: bool,
    pub energy_error: f64,
    /// Other standing waves of the same mass found on the branch.
    pub candidates: Vec<BranchPoint>,
    /// Why the point could not be computed.
    pub failure: Option<String>,
}

impl CurvePoint {
    fn gap(rho: f64, reason: String) -> Self {
        CurvePoint {
            rho,
            i_value: f64::NAN,
            omega: f64::NAN,
            kinetic: f64::NAN,
            nq: f64::NAN,
            np: f64::NAN,
            pohozaev_residual: f64::NAN,
            stationarity_residual: f64::NAN,
            achieved: false,
            energy_error: f64::NAN,
            candidates: Vec::new(),
            failure: Some(reason),
        }
    }

    fn from_state(
        rho: f64,
        g: &GroundState,
        achieved: bool,
        candidates: Vec<BranchPoint>,
    ) -> Result<Self> {
        let target = achieved.then_some(rho * rho);
        Ok(CurvePoint {
            rho,
            i_value: g.i_value,
            omega: g.omega,
            kinetic: g.report.kinetic,
            nq: g.report.nq,
            np: g.report.np,
            pohozaev_residual: g.pohozaev_residual,
            stationarity_residual: g.stationarity_residual,
            achieved,
            energy_error: g.energy_error(target)?,
            candidates,
            failure: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalMassEstimate {
    /// Extrapolated from the smallest sampled frequencies.
    pub extrapolated: f64,
    /// `√M(U)` of the static solution.
    pub static_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub pq: PowerPair,
    pub regime: Regime,
    pub points: Vec<CurvePoint>,
    pub rho_c_estimate: Option<CriticalMassEstimate>,
    /// Energy of the static solution.
    pub e_of_u: f64,
}

impl Curve {
    /// `I(ρ_k) − I(ρ_{k+1})` for consecutive points (NaN across gaps).
    pub fn decrements(&self) -> Vec<f64> {
        self.points
            .windows(2)
            .map(|w| w[0].i_value - w[1].i_value)
            .collect()
    }

    /// Every consecutive pair of achieved points decreases by more than
    /// `factor` times the larger energy-error estimate.
    pub fn strictly_decreasing(&self, factor: f64) -> bool {
        self.points
            .windows(2)
            .filter(|w| w[0].achieved && w[1].achieved)
            .all(|w| {
                w[0].i_value - w[1].i_value > factor * w[0].energy_error.max(w[1].energy_error)
            })
    }

    /// Difference quotients of `I` in `ρ` on either side of the critical
    /// mass: the last two achieved points and the first two beyond.
    pub fn one_sided_slopes(&self) -> (Option<f64>, Option<f64>) {
        let slope = |a: &CurvePoint, b: &CurvePoint| (b.i_value - a.i_value) / (b.rho - a.rho);
        let ach: Vec<&CurvePoint> = self.points.iter().filter(|p| p.achieved).collect();
        let beyond: Vec<&CurvePoint> = self
            .points
            .iter()
            .filter(|p| !p.achieved && p.failure.is_none())
            .collect();
        let left = (ach.len() >= 2).then(|| slope(ach[ach.len() - 2], ach[ach.len() - 1]));
        let right = (beyond.len() >= 2).then(|| slope(beyond[0], beyond[1]));
        (left, right)
    }
}

/// Ground states along `masses` (ascending) on `branch`.
pub fn curve_on_branch(branch: &Branch, masses: &[f64]) -> Result<Curve> {
    if masses.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("masses must be sorted ascending"));
    }
    let pq = branch.pq;
    let static_state = solve_at_omega(pq, 0.0, branch.grid)?;
    let subcritical = pq.regime() == Regime::MassSubcritical;
    let mut points = Vec::with_capacity(masses.len());
    for &rho in masses {
        let point = match branch.ground_state_at_mass(rho) {
            Ok(MassOutcome::Achieved { state, candidates }) => {
                CurvePoint::from_state(rho, &state, true, candidates)
            }
            Ok(MassOutcome::NotAchieved { max_rho, .. }) if subcritical && rho > max_rho => {
                CurvePoint::from_state(rho, &static_state, false, Vec::new())
            }
            Ok(MassOutcome::NotAchieved { min_rho, max_rho }) => Ok(CurvePoint::gap(
                rho,
                format!("mass outside the sampled branch [{min_rho}, {max_rho}]"),
            )),
            Err(e) => Ok(CurvePoint::gap(rho, e.to_string())),
        };
        points.push(point.unwrap_or_else(|e| CurvePoint::gap(rho, e.to_string())));
    }
    let rho_c_estimate = match (
        subcritical,
        branch.extrapolated_rho_c(),
        branch.static_point(),
    ) {
        (true, Some(extrapolated), Some(s)) => Some(CriticalMassEstimate {
            extrapolated,
            static_value: s.rho,
        }),
        _ => None,
    };
    Ok(Curve {
        pq,
        regime: pq.regime(),
        points,
        rho_c_estimate,
        e_of_u: static_state.i_value,
    })
}

/// Ground-state energy curve over `masses`.
pub fn curve(pq: PowerPair, masses: &[f64], grid: RadialGrid) -> Result<Curve> {
    let branch = Branch::covering(pq, grid, masses)?;
    curve_on_branch(&branch, masses)
}
