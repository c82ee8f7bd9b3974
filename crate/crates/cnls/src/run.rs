//! Dispatch of one configured experiment to the numerical kernels.

use std::fs;
use std::io;
use std::path::Path;

use cnls_core::dynamics::{
    dichotomy_from_state, evolve, initial_datum, virial_check, DichotomySettings,
    EvolutionSettings, Outcome, StopReason,
};
use cnls_core::fibering::{analyze_fiber, FiberCoefficients};
use cnls_core::groundstate::{
    branch_point, curve_on_branch, default_frequencies, solve_at_omega, Branch, BranchPoint, Curve,
    GroundState, MassOutcome,
};
use cnls_core::static_solver::{fiber_of, mountain_pass_constants, solve_zero_mass};
use cnls_core::{evaluate, PowerPair, RadialField, RadialGrid};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{
    exact, ConfigError, Datum, ExperimentConfig, FiberSource, MassSpec, Panel, Targets, Task,
};
use crate::records::{self, num, to_csv, to_json, CURVE_HEADER, TRACE_HEADER};
use crate::store::{previous_run, Artifact, Artifacts, RecordCache, ERROR_RECORD};

/// Process exit statuses.
pub mod status {
    pub const SUCCESS: u8 = 0;
    pub const CONFIG: u8 = 1;
    pub const UNDER_RESOLVED: u8 = 2;
    pub const DRIFT_BREACH: u8 = 3;
    pub const SOLVER_FAILURE: u8 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(#[from] cnls_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn status(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Io(_) => status::CONFIG,
            // the kernels reject inputs the config layer let through
            RunError::Solver(cnls_core::Error::InvalidInput(_)) => status::CONFIG,
            RunError::Solver(_) => status::SOLVER_FAILURE,
        }
    }

    /// Machine-readable form written to `error.json`.
    pub fn record(&self) -> Value {
        let (kind, key) = match self {
            RunError::Config(e) => ("config", e.key.clone()),
            RunError::Io(_) => ("io", None),
            RunError::Solver(e) => (solver_kind(e), None),
        };
        json!({ "status": self.status(), "kind": kind, "key": key, "message": self.to_string() })
    }
}

fn solver_kind(e: &cnls_core::Error) -> &'static str {
    use cnls_core::Error::*;
    match e {
        InvalidInput(_) => "invalid_input",
        NonFinite { .. } => "non_finite",
        DegenerateFiber => "degenerate_fiber",
        NoFiberZero { .. } => "no_fiber_zero",
        ShootingFailed { .. } => "shooting_failed",
        Convergence(_) => "convergence",
        Precondition(_) => "precondition",
        CrossCheck(_) => "cross_check",
        Inconsistent(_) => "inconsistent",
    }
}

/// Writes `error.json` into `dir`, best effort.
pub fn write_error_record(dir: &Path, err: &RunError) {
    if fs::create_dir_all(dir).is_ok() {
        let _ = fs::write(dir.join(ERROR_RECORD), to_json(&err.record()));
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub status: u8,
    /// The artifacts of an identical earlier run were kept as they were.
    pub reused: bool,
    pub config_hash: String,
    pub artifacts: Vec<Artifact>,
}

/// Runs `config`, writing its artifacts and manifest into `config.out`.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let hash = config.hash();
    if config.cache {
        if let Some((status, artifacts)) = previous_run(&config.out, &hash) {
            if status != status::CONFIG && status != status::SOLVER_FAILURE {
                return Ok(RunSummary {
                    status,
                    reused: true,
                    config_hash: hash,
                    artifacts,
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| ConfigError {
            key: Some("jobs".into()),
            message: e.to_string(),
        })?;
    let mut out = Artifacts::create(&config.out)?;
    let _ = fs::remove_file(config.out.join(ERROR_RECORD));
    let cache = if config.cache {
        RecordCache::new(&config.cache_dir)
    } else {
        RecordCache::disabled()
    };
    let result = pool.install(|| dispatch(config, &cache, &mut out));
    let parameters = config.parameters();
    match result {
        Ok(status) => {
            let artifacts = out.finish(config.command.name(), &hash, &parameters, status)?;
            Ok(RunSummary {
                status,
                reused: false,
                config_hash: hash,
                artifacts,
            })
        }
        Err(err) => {
            out.json(ERROR_RECORD, &err.record())?;
            out.finish(config.command.name(), &hash, &parameters, err.status())?;
            Err(err)
        }
    }
}

fn dispatch(
    config: &ExperimentConfig,
    cache: &RecordCache,
    out: &mut Artifacts,
) -> Result<u8, RunError> {
    let grid = config.grid;
    let pq = config.pq;
    match &config.task {
        Task::Static => run_static(pq.expect("pair"), grid, out),
        Task::Fiber { source } => run_fiber(pq.expect("pair"), grid, *source, out),
        Task::GroundState { targets } => {
            run_ground_states(pq.expect("pair"), grid, targets, cache, out)
        }
        Task::Curve { masses } => {
            let pq = pq.expect("pair");
            let branch = sample_branch(pq, grid, masses, cache)?;
            let curve = curve_on_branch(&branch, masses)?;
            let rows: Vec<Vec<String>> = curve.points.iter().map(records::curve_row).collect();
            out.write("curve.csv", &to_csv(&CURVE_HEADER, &rows))?;
            out.json("curve.json", &records::curve_summary(&curve))?;
            Ok(status::SUCCESS)
        }
        Task::Evolve {
            datum,
            t_end,
            dt,
            sample_every,
        } => run_evolve(
            pq.expect("pair"),
            grid,
            *datum,
            *t_end,
            *dt,
            *sample_every,
            cache,
            out,
        ),
        Task::Dichotomy {
            rho,
            mu_scale,
            horizon,
            dt,
            sample_every,
        } => {
            let pq = pq.expect("pair");
            let ground = ground_state_for(pq, *rho, cache)?;
            let settings = DichotomySettings {
                horizon: *horizon,
                dt: *dt,
                sample_every: *sample_every,
                grid,
            };
            let verdict = dichotomy_from_state(&ground, *mu_scale, settings)?;
            out.json("dichotomy.json", &records::verdict(&verdict))?;
            out.write(
                "trace.csv",
                &to_csv(&TRACE_HEADER, &records::trace_rows(&verdict.trace)),
            )?;
            Ok(match verdict.outcome {
                Outcome::Inconclusive => stop_status(&verdict.stop),
                _ => status::SUCCESS,
            })
        }
        Task::Figure { left, right } => run_figure(grid, left, right, cache, out),
    }
}

fn stop_status(stop: &StopReason) -> u8 {
    match stop {
        StopReason::Completed | StopReason::BlowUpThreshold { .. } => status::SUCCESS,
        StopReason::UnderResolved { .. } => status::UNDER_RESOLVED,
        StopReason::DriftBreach { .. } => status::DRIFT_BREACH,
    }
}

fn grid_text(grid: RadialGrid) -> String {
    format!("rmax={} n={}", exact(grid.r_max()), grid.intervals())
}

fn pair_text(pq: PowerPair) -> String {
    format!("p={} q={}", exact(pq.p()), exact(pq.q()))
}

/// One branch point, from the cache when possible.
fn cached_point(
    cache: &RecordCache,
    pq: PowerPair,
    grid: RadialGrid,
    omega: f64,
) -> cnls_core::Result<BranchPoint> {
    let key = format!(
        "branch-point {} omega={} {}",
        pair_text(pq),
        exact(omega),
        grid_text(grid)
    );
    if let Some(b) = cache
        .load(&key, "point.json")
        .and_then(|bytes| serde_json::from_slice(&bytes).ok())
        .and_then(|v: Value| records::parse_branch_point(&v))
    {
        return Ok(b);
    }
    let b = branch_point(pq, omega, grid)?;
    cache.store(&key, "point.json", &to_json(&records::branch_point(&b)));
    Ok(b)
}

/// The default frequency sample and `ω = 0` solved in parallel, extended
/// until `masses` are covered.
pub fn sample_branch(
    pq: PowerPair,
    grid: RadialGrid,
    masses: &[f64],
    cache: &RecordCache,
) -> cnls_core::Result<Branch> {
    let mut omegas = vec![0.0];
    omegas.extend(default_frequencies());
    let points = omegas
        .par_iter()
        .map(|&w| cached_point(cache, pq, grid, w))
        .collect::<cnls_core::Result<Vec<_>>>()?;
    let mut branch = Branch::from_points(pq, grid, points);
    branch.extend_for(masses, |w| cached_point(cache, pq, grid, w))?;
    Ok(branch)
}

fn ground_state_for(
    pq: PowerPair,
    spec: MassSpec,
    cache: &RecordCache,
) -> Result<GroundState, RunError> {
    let grid = RadialGrid::stationary();
    let rho = match spec {
        MassSpec::Absolute(r) => r,
        MassSpec::OfCritical(f) => {
            let rho_c = solve_zero_mass(pq, grid)?
                .rho_c
                .finite()
                .ok_or_else(|| ConfigError {
                    key: Some("rho_fraction".into()),
                    message: "the static mass diverges".into(),
                })?;
            f * rho_c
        }
    };
    let branch = sample_branch(pq, grid, &[rho], cache)?;
    match branch.ground_state_at_mass(rho)? {
        MassOutcome::Achieved { state, .. } => Ok(*state),
        MassOutcome::NotAchieved { min_rho, max_rho } => Err(cnls_core::Error::Precondition(
            format!("no ground state at rho = {rho}; the branch covers [{min_rho}, {max_rho}]"),
        )
        .into()),
    }
}

fn run_static(pq: PowerPair, grid: RadialGrid, out: &mut Artifacts) -> Result<u8, RunError> {
    let sol = solve_zero_mass(pq, grid)?;
    let mp = mountain_pass_constants(&sol)?;
    out.json("static.json", &records::static_solution(&sol))?;
    out.json("mountain_pass.json", &records::mountain_pass(&mp))?;
    out.write(
        "static_profile.csv",
        &to_csv(&["r", "U"], &records::profile_rows(&sol.profile)),
    )?;
    Ok(status::SUCCESS)
}

fn gaussian(grid: RadialGrid, amplitude: f64, width: f64) -> cnls_core::Result<RadialField> {
    RadialField::from_fn(grid, |r| amplitude * (-0.5 * (r / width).powi(2)).exp())
}

fn run_fiber(
    pq: PowerPair,
    grid: RadialGrid,
    source: FiberSource,
    out: &mut Artifacts,
) -> Result<u8, RunError> {
    let (coeffs, label) = match source {
        FiberSource::Gaussian { amplitude, width } => {
            let field = gaussian(grid, amplitude, width)?;
            (
                FiberCoefficients::from_report(&evaluate(&field, pq)?, pq)?,
                "gaussian",
            )
        }
        FiberSource::Static => (fiber_of(&solve_zero_mass(pq, grid)?)?, "static"),
    };
    let analysis = analyze_fiber(&coeffs)?;
    let mut record = records::fiber(&analysis);
    record["source"] = json!(label);
    record["pair"] = records::pair(pq);
    record["coefficients"] = records::coefficients(&coeffs);
    out.json("fiber.json", &record)?;
    Ok(status::SUCCESS)
}

fn run_ground_states(
    pq: PowerPair,
    grid: RadialGrid,
    targets: &Targets,
    cache: &RecordCache,
    out: &mut Artifacts,
) -> Result<u8, RunError> {
    let (label, values) = match targets {
        Targets::Masses(m) => ("rho", m),
        Targets::Frequencies(w) => ("omega", w),
    };
    let keys: Vec<String> = values
        .iter()
        .map(|v| {
            format!(
                "groundstate {} {label}={} {}",
                pair_text(pq),
                exact(*v),
                grid_text(grid)
            )
        })
        .collect();
    let missing: Vec<usize> = (0..values.len())
        .filter(|&k| cache.load(&keys[k], "record.json").is_none())
        .collect();
    let branch = match targets {
        Targets::Masses(_) if !missing.is_empty() => {
            let wanted: Vec<f64> = missing.iter().map(|&k| values[k]).collect();
            Some(sample_branch(pq, grid, &wanted, cache)?)
        }
        _ => None,
    };
    let solved = missing
        .par_iter()
        .map(|&k| -> Result<(usize, Vec<u8>, Option<Vec<u8>>), RunError> {
            let (record, profile) = match &branch {
                Some(b) => match b.ground_state_at_mass(values[k])? {
                    MassOutcome::Achieved { state, candidates } => {
                        (records::ground_state(&state, &candidates), Some(state.profile.clone()))
                    }
                    MassOutcome::NotAchieved { min_rho, max_rho } => (
                        json!({ "achieved": false, "rho": num(values[k]), "min_rho": num(min_rho), "max_rho": num(max_rho) }),
                        None,
                    ),
                },
                None => {
                    let g = solve_at_omega(pq, values[k], grid)?;
                    (records::ground_state(&g, &[]), Some(g.profile))
                }
            };
            let csv = profile.map(|p| to_csv(&["r", "u"], &records::profile_rows(&p)));
            Ok((k, to_json(&record), csv))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (k, record, csv) in &solved {
        cache.store(&keys[*k], "record.json", record);
        if let Some(csv) = csv {
            cache.store(&keys[*k], "profile.csv", csv);
        }
    }
    for (k, key) in keys.iter().enumerate() {
        let record = cache
            .load(key, "record.json")
            .or_else(|| solved.iter().find(|s| s.0 == k).map(|s| s.1.clone()));
        let profile = cache
            .load(key, "profile.csv")
            .or_else(|| solved.iter().find(|s| s.0 == k).and_then(|s| s.2.clone()));
        out.write(
            &format!("groundstate_{k:03}.json"),
            &record.expect("solved or cached"),
        )?;
        if let Some(p) = profile {
            out.write(&format!("groundstate_{k:03}_profile.csv"), &p)?;
        }
    }
    Ok(status::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn run_evolve(
    pq: PowerPair,
    grid: RadialGrid,
    datum: Datum,
    t_end: f64,
    dt: f64,
    sample_every: usize,
    cache: &RecordCache,
    out: &mut Artifacts,
) -> Result<u8, RunError> {
    let initial = match datum {
        Datum::Gaussian { amplitude, width } => gaussian(grid, amplitude, width)?.to_complex(),
        Datum::GroundState { rho, mu_scale } => {
            initial_datum(&ground_state_for(pq, rho, cache)?, mu_scale, grid)?
        }
    };
    let mut settings = EvolutionSettings::new(t_end, dt);
    settings.sample_every = sample_every;
    let run = evolve(&initial, pq, settings)?;
    let virial = match virial_check(&run.trace) {
        Ok(r) => records::virial(&r, run.state.initial_report.kinetic),
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    out.json(
        "evolve.json",
        &json!({
            "pair": records::pair(pq),
            "stop": records::stop_reason(&run.stop),
            "t": num(run.state.t),
            "steps": run.state.steps,
            "initial": records::report(&run.state.initial_report),
            "trace": records::trace_summary(&run.trace),
            "virial": virial,
        }),
    )?;
    out.write(
        "trace.csv",
        &to_csv(&TRACE_HEADER, &records::trace_rows(&run.trace)),
    )?;
    out.write(
        "final_profile.csv",
        &to_csv(
            &["r", "re_u", "im_u", "abs_u"],
            &records::complex_profile_rows(&run.state.profile()),
        ),
    )?;
    Ok(stop_status(&run.stop))
}

/// Default masses of the left panel, straddling the critical mass.
fn left_default(rho_c: f64) -> Vec<f64> {
    (0..=24).map(|k| rho_c * (0.2 + 0.05 * k as f64)).collect()
}

/// Default masses of the right panel: two decades, log-spaced.
fn right_default() -> Vec<f64> {
    (0..=20)
        .map(|k| 0.3 * 10f64.powf(k as f64 / 10.0))
        .collect()
}

fn panel_curve(
    panel: &Panel,
    grid: RadialGrid,
    cache: &RecordCache,
    default: impl Fn(&Branch) -> Vec<f64>,
) -> cnls_core::Result<Curve> {
    let mut branch = sample_branch(panel.pq, grid, &[], cache)?;
    let masses = panel.masses.clone().unwrap_or_else(|| default(&branch));
    branch.extend_for(&masses, |w| cached_point(cache, panel.pq, grid, w))?;
    curve_on_branch(&branch, &masses)
}

fn run_figure(
    grid: RadialGrid,
    left: &Panel,
    right: &Panel,
    cache: &RecordCache,
    out: &mut Artifacts,
) -> Result<u8, RunError> {
    let (l, r) = rayon::join(
        || {
            panel_curve(left, grid, cache, |b| match b.static_point() {
                Some(s) => left_default(s.rho),
                None => Vec::new(),
            })
        },
        || panel_curve(right, grid, cache, |_| right_default()),
    );
    let (l, r) = (l?, r?);
    let rho_c = l.rho_c_estimate.map_or(f64::NAN, |e| e.static_value);

    let mut header: Vec<&str> = CURVE_HEADER.to_vec();
    header.extend(["rho_c", "e_of_u", "failed"]);
    let rows: Vec<Vec<String>> = l
        .points
        .iter()
        .map(|p| {
            let mut row = records::curve_row(p);
            row.extend([
                exact(rho_c),
                exact(l.e_of_u),
                p.failure.is_some().to_string(),
            ]);
            row
        })
        .collect();
    out.write("figure_left.csv", &to_csv(&header, &rows))?;

    let mut header: Vec<&str> = CURVE_HEADER.to_vec();
    header.extend(["e_of_u", "gap_to_e_of_u", "failed"]);
    let rows: Vec<Vec<String>> = r
        .points
        .iter()
        .map(|p| {
            let mut row = records::curve_row(p);
            row.extend([
                exact(r.e_of_u),
                exact(p.i_value - r.e_of_u),
                p.failure.is_some().to_string(),
            ]);
            row
        })
        .collect();
    out.write("figure_right.csv", &to_csv(&header, &rows))?;
    out.json(
        "figure.json",
        &json!({ "left": records::curve_summary(&l), "right": records::curve_summary(&r) }),
    )?;
    Ok(status::SUCCESS)
}
