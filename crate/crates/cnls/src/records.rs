//! JSON records and CSV tables for the results of each command.
//!
//! Numbers are written with 17 significant digits so that every `f64`
//! reads back bit for bit. Non-finite values become `null` in JSON and
//! `NaN`/`inf` in CSV.

use cnls_core::dynamics::{
    Criterion, DichotomyVerdict, Outcome, StopReason, VirialReport, VirialTrace,
};
use cnls_core::fibering::{ConcavityBasis, FiberAnalysis, FiberCoefficients};
use cnls_core::groundstate::{BranchPoint, Curve, CurvePoint, GroundState};
use cnls_core::static_solver::{GrowthClass, MassGrowth, MountainPassConstants, StaticSolution};
use cnls_core::{Complex64, FunctionalReport, PowerPair, RadialField, ResolutionWarning};
use serde_json::{json, Value};

use crate::config::exact;

pub const CURVE_HEADER: [&str; 9] = [
    "rho",
    "i_value",
    "omega",
    "kinetic",
    "nq",
    "np",
    "pohozaev_residual",
    "stationarity_residual",
    "achieved",
];
pub const TRACE_HEADER: [&str; 7] = [
    "t",
    "variance",
    "g",
    "kinetic",
    "mass_drift",
    "energy_drift",
    "npq",
];

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(exact(x).parse().expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn to_json(value: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values serialize");
    bytes.push(b'\n');
    bytes
}

pub fn to_csv(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn pair(pq: PowerPair) -> Value {
    json!({ "p": num(pq.p()), "q": num(pq.q()), "regime": pq.regime().to_string() })
}

pub fn report(r: &FunctionalReport) -> Value {
    json!({
        "mass": num(r.mass),
        "kinetic": num(r.kinetic),
        "nq": num(r.nq),
        "np": num(r.np),
        "energy": num(r.energy),
        "pohozaev": num(r.pohozaev),
        "x_norm": num(r.x_norm),
        "omega_candidate": opt(r.omega_candidate),
        "egkn_residual": num(r.egkn_residual),
    })
}

pub fn warnings(list: &[ResolutionWarning]) -> Value {
    list.iter()
        .map(|w| match *w {
            ResolutionWarning::UnderResolved { nodes } => {
                json!({ "kind": "under_resolved", "nodes": num(nodes) })
            }
            ResolutionWarning::Truncated { lost_fraction } => {
                json!({ "kind": "truncated", "lost_fraction": num(lost_fraction) })
            }
            ResolutionWarning::OffGridMass { fraction } => {
                json!({ "kind": "off_grid_mass", "fraction": num(fraction) })
            }
        })
        .collect()
}

pub fn coefficients(c: &FiberCoefficients) -> Value {
    json!({ "a": num(c.a), "b": num(c.b), "c": num(c.c), "alpha": num(c.alpha), "beta": num(c.beta) })
}

pub fn fiber(a: &FiberAnalysis) -> Value {
    json!({
        "mu_tilde": num(a.mu_tilde),
        "e_at_max": num(a.e_at_max),
        "d2_at_max": num(a.second_derivative_at_max),
        "concave_beyond": a.concave_beyond,
        "concavity_basis": match a.concavity_basis {
            ConcavityBasis::MarginInequality => "margin_inequality",
            ConcavityBasis::SampledSign => "sampled_sign",
        },
        "sign_changes": a.sign_changes,
        "sign_pattern_ok": a.sign_pattern_ok,
    })
}

fn growth(g: &MassGrowth) -> Value {
    json!({
        "class": match g.class {
            GrowthClass::Convergent => "convergent",
            GrowthClass::Logarithmic => "logarithmic",
            GrowthClass::Linear => "linear",
            GrowthClass::Intermediate => "intermediate",
        },
        "doubling_exponent": num(g.doubling_exponent),
        "linear_slope": num(g.linear_slope),
        "log_slope": num(g.log_slope),
        "radius": num(g.radius),
    })
}

pub fn static_solution(s: &StaticSolution) -> Value {
    json!({
        "pair": pair(s.pq),
        "shoot_height": num(s.shoot_height),
        "alpha_fit": num(s.alpha_fit),
        "alpha_expected": num(s.pq.decay_exponent()),
        "report": report(&s.report),
        "pohozaev_residual": num(s.pohozaev_residual()),
        "nehari_residual": num(s.nehari_residual()),
        "rho_c": opt(s.rho_c.finite()),
        "divergent_mass": s.rho_c.finite().is_none(),
        "mass_growth": growth(&s.mass_growth),
        "reliable_radius": num(s.reliable_radius),
        "bisection_steps": s.bisection_steps,
    })
}

pub fn mountain_pass(m: &MountainPassConstants) -> Value {
    json!({
        "k_u1": num(m.k_u1),
        "s0": num(m.s0),
        "s0_from_kinetic": num(m.s0_from_kinetic),
        "i_value": num(m.i_value),
        "e_of_u": num(m.e_of_u),
        "constraint_residual": num(m.constraint_residual),
        "kinetic_rescaled": num(m.kinetic_rescaled),
    })
}

pub fn branch_point(b: &BranchPoint) -> Value {
    json!({ "omega": num(b.omega), "rho": num(b.rho), "energy": num(b.energy), "amplitude": num(b.amplitude) })
}

/// Inverse of [`branch_point`]; a `null` mass reads back as infinite.
pub fn parse_branch_point(v: &Value) -> Option<BranchPoint> {
    let get = |k: &str| v.get(k).and_then(Value::as_f64);
    Some(BranchPoint {
        omega: get("omega")?,
        rho: match v.get("rho")? {
            Value::Null => f64::INFINITY,
            r => r.as_f64()?,
        },
        energy: get("energy")?,
        amplitude: get("amplitude")?,
    })
}

pub fn ground_state(g: &GroundState, candidates: &[BranchPoint]) -> Value {
    json!({
        "achieved": true,
        "pair": pair(g.pq),
        "rho": num(g.rho),
        "omega": num(g.omega),
        "i_value": num(g.i_value),
        "amplitude": num(g.amplitude),
        "pohozaev_residual": num(g.pohozaev_residual),
        "stationarity_residual": num(g.stationarity_residual),
        "theta_stationarity": opt(g.theta_stationarity().ok()),
        "multiplier_mismatch": opt(g.multiplier_mismatch()),
        "reliable_radius": num(g.reliable_radius),
        "report": report(&g.report),
        "warnings": warnings(&g.warnings),
        "candidates": candidates.iter().map(branch_point).collect::<Value>(),
    })
}

fn flag(b: bool) -> String {
    b.to_string()
}

pub fn curve_row(p: &CurvePoint) -> Vec<String> {
    vec![
        exact(p.rho),
        exact(p.i_value),
        exact(p.omega),
        exact(p.kinetic),
        exact(p.nq),
        exact(p.np),
        exact(p.pohozaev_residual),
        exact(p.stationarity_residual),
        flag(p.achieved),
    ]
}

pub fn curve_summary(c: &Curve) -> Value {
    let (left, right) = c.one_sided_slopes();
    json!({
        "pair": pair(c.pq),
        "e_of_u": num(c.e_of_u),
        "rho_c": c.rho_c_estimate.map(|r| json!({
            "static": num(r.static_value),
            "extrapolated": num(r.extrapolated),
        })),
        "slope_below_rho_c": opt(left),
        "slope_above_rho_c": opt(right),
        "points": c.points.iter().map(|p| json!({
            "rho": num(p.rho),
            "achieved": p.achieved,
            "energy_error": num(p.energy_error),
            "candidates": p.candidates.iter().map(branch_point).collect::<Value>(),
            "failure": p.failure,
        })).collect::<Value>(),
    })
}

pub fn profile_rows(field: &RadialField) -> Vec<Vec<String>> {
    field
        .grid()
        .nodes()
        .zip(field.values())
        .map(|(r, u)| vec![exact(r), exact(*u)])
        .collect()
}

pub fn complex_profile_rows(field: &RadialField<Complex64>) -> Vec<Vec<String>> {
    field
        .grid()
        .nodes()
        .zip(field.values())
        .map(|(r, u)| vec![exact(r), exact(u.re), exact(u.im), exact(u.norm())])
        .collect()
}

pub fn trace_rows(t: &VirialTrace) -> Vec<Vec<String>> {
    (0..t.len())
        .map(|k| {
            vec![
                exact(t.times[k]),
                exact(t.variance[k]),
                exact(t.g_values[k]),
                exact(t.kinetic(k)),
                exact(t.mass_drift[k]),
                exact(t.energy_drift[k]),
                exact(t.npq_values[k]),
            ]
        })
        .collect()
}

pub fn stop_reason(s: &StopReason) -> Value {
    match *s {
        StopReason::Completed => json!({ "kind": "completed" }),
        StopReason::UnderResolved { t, tail_fraction } => {
            json!({ "kind": "under_resolved", "t": num(t), "tail_fraction": num(tail_fraction) })
        }
        StopReason::DriftBreach { t, mass_drift } => {
            json!({ "kind": "drift_breach", "t": num(t), "mass_drift": num(mass_drift) })
        }
        StopReason::BlowUpThreshold { t, gradient_ratio } => {
            json!({ "kind": "blow_up_threshold", "t": num(t), "gradient_ratio": num(gradient_ratio) })
        }
    }
}

pub fn trace_summary(t: &VirialTrace) -> Value {
    json!({
        "samples": t.len(),
        "max_mass_drift": num(t.max_mass_drift),
        "max_energy_drift": num(t.max_energy_drift()),
        "delta_estimate": num(t.delta_estimate),
        "epsilon_estimate": num(t.epsilon_estimate),
    })
}

pub fn virial(r: &VirialReport, initial_kinetic: f64) -> Value {
    json!({
        "max_mismatch": num(r.max_mismatch),
        "initial_second_derivative": num(r.initial_second_derivative),
        "initial_8g": num(r.initial_8g),
        "initial_mismatch": num(r.initial_mismatch(initial_kinetic)),
        "localized": r.localized.iter().map(|l| json!({
            "radius": num(l.radius),
            "correction": num(l.correction),
        })).collect::<Value>(),
    })
}

fn criterion(c: &Criterion) -> Value {
    match *c {
        Criterion::GradientGrowth { factor } => {
            json!({ "kind": "gradient_growth", "factor": num(factor) })
        }
        Criterion::VarianceConcavity {
            max_second_difference,
        } => {
            json!({ "kind": "variance_concavity", "max_second_difference": num(max_second_difference) })
        }
        Criterion::PohozaevTrap { delta } => {
            json!({ "kind": "pohozaev_trap", "delta": num(delta) })
        }
        Criterion::Coercivity {
            epsilon,
            gradient_floor,
        } => {
            json!({ "kind": "coercivity", "epsilon": num(epsilon), "gradient_floor": num(gradient_floor) })
        }
    }
}

pub fn verdict(v: &DichotomyVerdict) -> Value {
    json!({
        "outcome": match v.outcome {
            Outcome::GlobalOnHorizon => "global_on_horizon",
            Outcome::BlowUpDetected => "blow_up_detected",
            Outcome::Inconclusive => "inconclusive",
        },
        "t_detect": opt(v.t_detect),
        "evidence": v.evidence.iter().map(criterion).collect::<Value>(),
        "mu_scale": num(v.mu_scale),
        "rho": num(v.rho),
        "i_value": num(v.i_value),
        "initial_energy": num(v.initial_energy),
        "initial_g": num(v.initial_g),
        "kinetic_bound": num(v.kinetic_bound),
        "max_kinetic": num(v.max_kinetic),
        "delta0": num(v.delta0),
        "variance_bound_zero": opt(v.variance_bound_zero),
        "reached": num(v.reached),
        "stop": stop_reason(&v.stop),
        "trace": trace_summary(&v.trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        let text =
            String::from_utf8(to_json(&json!({ "x": num(0.1), "y": num(f64::NAN) }))).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("\"y\": null"));
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn branch_points_read_back_exactly() {
        let b = BranchPoint {
            omega: 1.0 / 3.0,
            rho: f64::INFINITY,
            energy: -2.5e-7,
            amplitude: 4.0,
        };
        let text = to_json(&branch_point(&b));
        let back = parse_branch_point(&serde_json::from_slice(&text).unwrap()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let bytes = to_csv(&["a", "b"], &[vec!["1".into(), "2".into()]]);
        assert_eq!(String::from_utf8(bytes).unwrap(), "a,b\n1,2\n");
    }
}
