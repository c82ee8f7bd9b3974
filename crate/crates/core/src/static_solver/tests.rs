use super::*;
use core::f64::consts::PI;

fn pair(p: f64, q: f64) -> PowerPair {
    PowerPair::new(p, q).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// For (p, q) = (3, 2) the zero-mass profile is U(r) = 4 / (1 + 2r²), which
// gives M = K = N_2 = 4√2 π², N_3 = 8√2 π².
fn exact_32(r: f64) -> f64 {
    4.0 / (1.0 + 2.0 * r * r)
}

#[test]
fn cubic_quadratic_profile_matches_closed_form() {
    let sol = solve_zero_mass(pair(3.0, 2.0), RadialGrid::stationary()).unwrap();
    assert!(rel(sol.shoot_height, 4.0) < 1e-12);
    let worst = sol
        .profile
        .values()
        .iter()
        .zip(sol.profile.grid().nodes())
        .map(|(u, r)| rel(*u, exact_32(r)))
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "profile error {worst:e}");
    let unit = 4.0 * 2f64.sqrt() * PI * PI;
    assert!(rel(sol.report.mass, unit) < 1e-6, "{}", sol.report.mass);
    assert!(rel(sol.report.kinetic, unit) < 1e-6);
    assert!(rel(sol.report.nq, unit) < 1e-6);
    assert!(rel(sol.report.np, 2.0 * unit) < 1e-6);
    assert!(rel(sol.report.energy, unit / 3.0) < 1e-6);
    assert!(rel(sol.rho_c.finite().unwrap(), unit.sqrt()) < 1e-6);
}

#[test]
fn residuals_and_shape() {
    for (p, q) in [(3.0, 2.0), (4.0, 3.0), (3.0, 2.2)] {
        let sol = solve_zero_mass(pair(p, q), RadialGrid::stationary()).unwrap();
        assert!(sol.pohozaev_residual() <= RESIDUAL_TOLERANCE);
        assert!(sol.nehari_residual() <= RESIDUAL_TOLERANCE);
        assert!(sol.shoot_height > 1.0);
        let v = sol.profile.values();
        assert!(v.windows(2).all(|w| w[1] <= w[0] && w[1] > 0.0));
    }
}

#[test]
fn decay_and_mass_growth() {
    let sol = solve_zero_mass(pair(3.0, 2.0), RadialGrid::stationary()).unwrap();
    assert!(rel(sol.alpha_fit, 2.0) < 0.03);
    assert_eq!(sol.mass_growth.class, GrowthClass::Convergent);

    let sol = solve_zero_mass(pair(4.0, 3.0), RadialGrid::stationary()).unwrap();
    assert_eq!(sol.mass_growth.class, GrowthClass::Linear);
    assert!(sol.rho_c.finite().is_none());
    assert!(sol.report.mass.is_infinite() && sol.report.omega_candidate.is_none());

    let sol =
        solve_zero_mass(pair(3.0, 7.0 / 3.0), RadialGrid::new(400.0, 65536).unwrap()).unwrap();
    assert_eq!(sol.mass_growth.class, GrowthClass::Logarithmic);
    assert!(rel(sol.alpha_fit, 1.5) < 0.05, "{}", sol.alpha_fit);

    let sol = solve_zero_mass(pair(3.0, 2.2), RadialGrid::stationary()).unwrap();
    assert_eq!(sol.mass_growth.class, GrowthClass::Convergent);
}

#[test]
fn grid_refinement_barely_moves_the_energy() {
    let coarse = solve_zero_mass(pair(3.0, 2.2), RadialGrid::stationary()).unwrap();
    let fine = solve_zero_mass(pair(3.0, 2.2), RadialGrid::stationary().refined(2)).unwrap();
    assert!(rel(fine.report.energy, coarse.report.energy) <= 1e-4);
}

#[test]
fn mountain_pass_identities() {
    for (p, q) in [(3.0, 2.0), (4.0, 3.0), (3.0, 2.2)] {
        let sol = solve_zero_mass(pair(p, q), RadialGrid::stationary()).unwrap();
        let mp = mountain_pass_constants(&sol).unwrap();
        assert!(rel(mp.i_value, mp.e_of_u) <= 1e-3);
        assert!(rel(mp.s0_from_kinetic, mp.s0) <= 1e-3);
        assert!(mp.constraint_residual.abs() <= 1e-4);
        assert!(rel(mp.kinetic_rescaled, sol.report.kinetic) <= 1e-6);
    }
}

#[test]
fn maximum_of_the_scalar_reduction() {
    // h(s) = K s^{1/3} / 2 − s peaks at s₀ = (K/6)^{3/2} with value 2K^{3/2}/6^{3/2}
    let k = 26.544;
    let h = |s: f64| 0.5 * k * s.cbrt() - s;
    let s0 = (k / 6.0).powf(1.5);
    let d = 1e-4 * s0;
    assert!(((h(s0 + d) - h(s0 - d)) / (2.0 * d)).abs() < 1e-8);
    assert!(h(s0) > h(s0 + d) && h(s0) > h(s0 - d));
    assert!(rel(h(s0), 2.0 * k.powf(1.5) / 6f64.powf(1.5)) < 1e-14);
}

#[test]
fn focusing_reference_scaling() {
    for p in [3.0, 4.0] {
        let reference = FocusingReference::new(p).unwrap();
        let want = 2.0 * (p - 5.0) / (3.0 * p - 7.0);
        let slope = (reference.value(2.0).ln() - reference.value(0.5).ln()) / (4f64.ln());
        assert!(rel(slope, want) < 1e-10);
        // an independent solve at another frequency lies on the same curve
        let (m, e, _) = focusing_profile(p, 3.0).unwrap();
        assert!(rel(reference.value(m.sqrt()), e) < 1e-5, "p = {p}");
    }
    assert!(pure_focusing_reference(3.0, 0.0).is_err());
    assert!(FocusingReference::new(5.0).is_err());
}
