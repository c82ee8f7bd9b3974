//! Radial grids, fields and the scalar functionals evaluated on them.

mod field;
mod grid;
pub mod quadrature;

pub use field::{FarField, RadialField, Sample, Tail};
pub use grid::RadialGrid;

use core::f64::consts::PI;

use crate::prelude::*;
use crate::{Error, PowerPair, Result};
use quadrature::simpson_weights;

/// Scalar functionals of one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalReport {
    pub mass: f64,
    pub kinetic: f64,
    pub nq: f64,
    pub np: f64,
    pub energy: f64,
    pub pohozaev: f64,
    pub x_norm: f64,
    /// `(N_p - N_q - K) / M`; undefined for zero or infinite mass.
    pub omega_candidate: Option<f64>,
    pub egkn_residual: f64,
}

impl FunctionalReport {
    /// Assembles the report from the four basic integrals.
    pub fn from_integrals(pq: PowerPair, mass: f64, kinetic: f64, nq: f64, np: f64) -> Self {
        let (p, q) = (pq.p(), pq.q());
        let energy = 0.5 * kinetic + nq / (q + 1.0) - np / (p + 1.0);
        let pohozaev =
            kinetic + 1.5 * (q - 1.0) / (q + 1.0) * nq - 1.5 * (p - 1.0) / (p + 1.0) * np;
        let x_norm = kinetic.sqrt() + nq.powf(1.0 / (q + 1.0));
        let omega_candidate = (mass > 0.0 && mass.is_finite()).then(|| (np - nq - kinetic) / mass);
        let egkn_residual = energy
            - 2.0 / (3.0 * (p - 1.0)) * pohozaev
            - (3.0 * p - 7.0) / (6.0 * (p - 1.0)) * kinetic
            - (p - q) / ((q + 1.0) * (p - 1.0)) * nq;
        FunctionalReport {
            mass,
            kinetic,
            nq,
            np,
            energy,
            pohozaev,
            x_norm,
            omega_candidate,
            egkn_residual,
        }
    }

    /// Scale used for the algebraic identity check.
    pub fn egkn_scale(&self) -> f64 {
        1.0 + self.energy.abs() + self.kinetic + self.nq
    }

    /// `|G| / K`.
    pub fn pohozaev_ratio(&self) -> f64 {
        self.pohozaev.abs() / self.kinetic
    }

    /// `|K + N_q - N_p| / K`, the multiplier-free Nehari residual.
    pub fn nehari_ratio(&self) -> f64 {
        (self.kinetic + self.nq - self.np).abs() / self.kinetic
    }
}

/// Weighted integral `∫ 4π r² f(r, u, u') dr` over the grid and the stored
/// far field (tail models excluded).
pub fn integrate<S: Sample>(field: &RadialField<S>, f: impl Fn(f64, S, S) -> f64) -> f64 {
    let grid = field.grid();
    let du = field.derivative();
    let w = simpson_weights(grid.intervals(), grid.h());
    let mut sum = 0.0;
    for (i, (&u, &d)) in field.values().iter().zip(&du).enumerate().skip(1) {
        let r = grid.node(i);
        sum += w[i] * r * r * f(r, u, d);
    }
    let mut total = 4.0 * PI * sum;
    if let Some(far) = field.far() {
        total += far_integral(far, &f);
    }
    total
}

fn far_integral<S: Sample>(far: &FarField<S>, f: &impl Fn(f64, S, S) -> f64) -> f64 {
    let m = far.values().len() - 1;
    if m == 0 {
        return 0.0;
    }
    let w = simpson_weights(m, far.log_step());
    // dr = r d(ln r)
    let sum: f64 = far
        .radii()
        .zip(far.values().iter().zip(far.slopes()))
        .zip(&w)
        .map(|((r, (&u, &d)), wk)| wk * r * r * r * f(r, u, d))
        .sum();
    4.0 * PI * sum
}

/// Mass, kinetic and the two potential integrals, including analytic tails.
fn basic_integrals<S: Sample>(field: &RadialField<S>, q: f64, p: f64) -> [f64; 4] {
    let grid = field.grid();
    let du = field.derivative();
    let w = simpson_weights(grid.intervals(), grid.h());
    let mut acc = [0.0; 4];
    for (i, (&u, &d)) in field.values().iter().zip(&du).enumerate().skip(1) {
        let r = grid.node(i);
        let wr = w[i] * r * r;
        let m = u.modulus();
        if m > 0.0 {
            acc[0] += wr * m * m;
            acc[2] += wr * m.powf(q + 1.0);
            acc[3] += wr * m.powf(p + 1.0);
        }
        acc[1] += wr * d.norm_sqr();
    }
    for a in &mut acc {
        *a *= 4.0 * PI;
    }
    if let Some(far) = field.far() {
        acc[0] += far_integral(far, &|_, u: S, _| u.norm_sqr());
        acc[1] += far_integral(far, &|_, _, d: S| d.norm_sqr());
        acc[2] += far_integral(far, &|_, u: S, _| u.modulus().powf(q + 1.0));
        acc[3] += far_integral(far, &|_, u: S, _| u.modulus().powf(p + 1.0));
        let (end, tail) = (far.end(), far.tail());
        let last = far.values()[far.values().len() - 1].modulus();
        acc[0] += tail.power_integral(end, last, 2.0);
        acc[1] += tail.kinetic_integral(end, last);
        acc[2] += tail.power_integral(end, last, q + 1.0);
        acc[3] += tail.power_integral(end, last, p + 1.0);
    }
    acc
}

/// Evaluates every scalar functional of `field`.
pub fn evaluate<S: Sample>(field: &RadialField<S>, pq: PowerPair) -> Result<FunctionalReport> {
    if let Some(index) = field.first_non_finite() {
        return Err(Error::NonFinite { index });
    }
    let [mass, kinetic, nq, np] = basic_integrals(field, pq.q(), pq.p());
    let report = FunctionalReport::from_integrals(pq, mass, kinetic, nq, np);
    if report.energy.is_finite() && report.egkn_residual.abs() > 1e-12 * report.egkn_scale() {
        return Err(Error::Inconsistent(format!(
            "energy identity residual {:e}",
            report.egkn_residual
        )));
    }
    Ok(report)
}

/// Mass `∫|u|²` alone, tails included.
pub fn mass<S: Sample>(field: &RadialField<S>) -> f64 {
    let mut m = integrate(field, |_, u, _| u.norm_sqr());
    if let Some(far) = field.far() {
        let last = far.values()[far.values().len() - 1].modulus();
        m += far.tail().power_integral(far.end(), last, 2.0);
    }
    m
}

/// Smallest grid radius enclosing `fraction` of the on-grid mass.
pub fn support_radius<S: Sample>(field: &RadialField<S>, fraction: f64) -> f64 {
    let grid = field.grid();
    let w = simpson_weights(grid.intervals(), grid.h());
    let dens: Vec<f64> = field
        .values()
        .iter()
        .enumerate()
        .map(|(i, u)| w[i] * grid.node(i).powi(2) * u.norm_sqr())
        .collect();
    let total: f64 = dens.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, d) in dens.iter().enumerate() {
        acc += d;
        if acc >= fraction * total {
            return grid.node(i);
        }
    }
    grid.r_max()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolutionWarning {
    /// The effective support spans only this many grid spacings.
    UnderResolved { nodes: f64 },
    /// Mass pushed off the grid by a spreading rescale.
    Truncated { lost_fraction: f64 },
    /// Share of the mass carried by the far field and tail beyond `r_max`.
    OffGridMass { fraction: f64 },
}

/// Minimum number of spacings across the effective support.
pub const MIN_SUPPORT_NODES: f64 = 32.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled<S: Sample = f64> {
    pub field: RadialField<S>,
    pub warnings: Vec<ResolutionWarning>,
}

/// Mass-preserving rescaling `μ^{3/2} u(μ r)`.
pub fn rescale<S: Sample>(field: &RadialField<S>, mu: f64) -> Result<Rescaled<S>> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!(
            "rescale factor mu = {mu} must be positive"
        )));
    }
    if mu == 1.0 {
        return Ok(Rescaled {
            field: field.clone(),
            warnings: Vec::new(),
        });
    }
    let out = field.dilate(mu, mu.powf(1.5))?;
    let mut warnings = Vec::new();
    let nodes = support_radius(&out, 1.0 - 1e-6) / out.grid().h();
    if nodes < MIN_SUPPORT_NODES {
        warnings.push(ResolutionWarning::UnderResolved { nodes });
    }
    if field.far().is_none() && mu < 1.0 {
        let before = mass(field);
        if before > 0.0 {
            let lost = 1.0 - mass(&out) / before;
            if lost > 1e-10 {
                warnings.push(ResolutionWarning::Truncated {
                    lost_fraction: lost,
                });
            }
        }
    }
    Ok(Rescaled {
        field: out,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    const PI32: f64 = 5.568_327_996_831_708; // π^{3/2}

    fn pair(p: f64, q: f64) -> PowerPair {
        PowerPair::new(p, q).unwrap()
    }

    fn gaussian(grid: RadialGrid) -> RadialField {
        RadialField::from_fn(grid, |r| (-r * r / 2.0).exp()).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn zero_field_has_zero_functionals() {
        let g = RadialGrid::new(10.0, 64).unwrap();
        let r = evaluate(&RadialField::<f64>::zeros(g), pair(3.0, 2.0)).unwrap();
        for v in [r.mass, r.kinetic, r.nq, r.np, r.energy, r.pohozaev] {
            assert_eq!(v, 0.0);
        }
        assert!(r.omega_candidate.is_none());
    }

    #[test]
    fn gaussian_matches_closed_forms() {
        // ∫ e^{-s r²} dx = (π/s)^{3/2}
        let g = RadialGrid::new(12.0, 2048).unwrap();
        let r = evaluate(&gaussian(g), pair(3.0, 2.0)).unwrap();
        let n2 = (2.0 * PI / 3.0).powf(1.5);
        let n3 = (PI / 2.0).powf(1.5);
        assert!(close(r.mass, PI32, 1e-10), "{}", r.mass);
        assert!(close(r.kinetic, 1.5 * PI32, 1e-9), "{}", r.kinetic);
        assert!(close(r.nq, n2, 1e-10));
        assert!(close(r.np, n3, 1e-10));
        assert!(close(r.energy, 0.75 * PI32 + n2 / 3.0 - n3 / 4.0, 1e-9));
        assert!(close(r.pohozaev, 1.5 * PI32 + n2 / 2.0 - 0.75 * n3, 1e-9));
        // commonly quoted four-decimal values
        assert!((r.energy - 4.6943).abs() < 3e-4);
        assert!((r.pohozaev - 8.3913).abs() < 3e-4);
        assert!(close(
            r.omega_candidate.unwrap(),
            (n3 - n2 - 1.5 * PI32) / PI32,
            1e-9
        ));
    }

    #[test]
    fn complex_fields_use_the_modulus() {
        let g = RadialGrid::new(12.0, 1024).unwrap();
        let u = gaussian(g)
            .to_complex()
            .map(|v| v * Complex64::new(0.6, 0.8));
        let a = evaluate(&u, pair(3.0, 2.0)).unwrap();
        let b = evaluate(&gaussian(g), pair(3.0, 2.0)).unwrap();
        assert!(close(a.kinetic, b.kinetic, 1e-13));
        assert!(close(a.np, b.np, 1e-13));
    }

    #[test]
    fn non_finite_samples_are_rejected() {
        let g = RadialGrid::new(10.0, 64).unwrap();
        let mut v = vec![1.0; 65];
        v[7] = f64::NAN;
        let u = RadialField::from_values(g, v).unwrap();
        assert_eq!(
            evaluate(&u, pair(3.0, 2.0)),
            Err(Error::NonFinite { index: 7 })
        );
        assert!(RadialField::from_fn(g, |r| 1.0 / r).is_err());
    }

    #[test]
    fn gaussian_rescale_by_two() {
        let g = RadialGrid::new(12.0, 2048).unwrap();
        let u = gaussian(g);
        let pq = pair(3.0, 2.0);
        let before = evaluate(&u, pq).unwrap();
        let out = rescale(&u, 2.0).unwrap();
        assert!(out.warnings.is_empty());
        let after = evaluate(&out.field, pq).unwrap();
        assert!(close(after.mass, before.mass, 1e-8));
        assert!(close(after.kinetic, 4.0 * before.kinetic, 1e-8));
        assert!(close(after.np, 8.0 * before.np, 1e-8));
        assert_eq!(rescale(&u, 1.0).unwrap().field, u);
        assert!(rescale(&u, 0.0).is_err());
        assert!(rescale(&u, -1.0).is_err());
    }

    #[test]
    fn rescale_flags_resolution_problems() {
        let g = RadialGrid::new(12.0, 256).unwrap();
        let u = gaussian(g);
        let tight = rescale(&u, 20.0).unwrap();
        assert!(matches!(
            tight.warnings[..],
            [ResolutionWarning::UnderResolved { .. }]
        ));
        let wide = rescale(&u, 0.2).unwrap();
        assert!(wide
            .warnings
            .iter()
            .any(|w| matches!(w, ResolutionWarning::Truncated { .. })));
    }

    /// Smooth random radial field: a sum of a few Gaussians with random
    /// centres, widths and signs.
    fn random_field(grid: RadialGrid, seed: &[(f64, f64, f64)]) -> RadialField {
        RadialField::from_fn(grid, |r| {
            seed.iter()
                .map(|&(a, c, w)| {
                    a * (-((r - c) * (r - c)) / (w * w)).exp()
                        + a * (-((r + c) * (r + c)) / (w * w)).exp()
                })
                .sum()
        })
        .unwrap()
    }

    fn bumps() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((-2.0..2.0f64, 0.0..3.0f64, 0.7..2.0f64), 1..4)
    }

    #[test]
    fn small_x_norm_gives_positive_energy_and_pohozaev() {
        use rand::{Rng, SeedableRng};
        let g = RadialGrid::new(30.0, 1024).unwrap();
        for (p, q) in [(3.0, 2.0), (4.0, 3.0), (3.0, 2.2), (4.5, 1.5)] {
            let pq = pair(p, q);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            let fields: Vec<RadialField> = (0..200)
                .map(|_| {
                    let seed: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..4))
                        .map(|_| {
                            (
                                rng.gen_range(-2.0..2.0),
                                rng.gen_range(0.0..4.0),
                                rng.gen_range(0.5..3.0),
                            )
                        })
                        .collect();
                    random_field(g, &seed)
                })
                .collect();
            let all_positive = |b0: f64| {
                fields.iter().all(|u| {
                    let x = evaluate(u, pq).unwrap().x_norm;
                    let r = evaluate(&u.scaled(b0.sqrt() / x), pq).unwrap();
                    r.energy > 0.0 && r.pohozaev > 0.0
                })
            };
            let b0 = (0..10).map(|k| 10f64.powi(-k)).find(|&b| all_positive(b));
            assert!(b0.is_some(), "no positive threshold for {pq}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn energy_identity_holds_to_rounding(
            seed in bumps(),
            p in 2.34..4.99f64,
            qf in 0.01..0.99f64,
        ) {
            let q = 1.0 + qf * (p - 1.0);
            let g = RadialGrid::new(16.0, 256).unwrap();
            let r = evaluate(&random_field(g, &seed), pair(p, q)).unwrap();
            prop_assert!(r.egkn_residual.abs() <= 1e-12 * r.egkn_scale());
            prop_assert!(r.mass >= 0.0 && r.kinetic >= 0.0 && r.nq >= 0.0 && r.np >= 0.0);
        }

        #[test]
        fn rescaling_follows_the_scaling_laws(
            seed in bumps(),
            mu in prop::sample::select(vec![0.5, 1.0, 2.0]),
        ) {
            let pq = pair(3.5, 2.0);
            let g = RadialGrid::new(40.0, 4096).unwrap();
            let u = random_field(g, &seed);
            let a = evaluate(&u, pq).unwrap();
            let b = evaluate(&rescale(&u, mu).unwrap().field, pq).unwrap();
            let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-12);
            prop_assert!(rel(b.mass, a.mass) < 1e-6, "mass {} {}", b.mass, a.mass);
            prop_assert!(rel(b.kinetic, mu * mu * a.kinetic) < 1e-6);
            prop_assert!(rel(b.nq, mu.powf(1.5) * a.nq) < 1e-6);
            prop_assert!(rel(b.np, mu.powf(3.75) * a.np) < 1e-6);
        }

        #[test]
        fn negative_energy_forces_negative_pohozaev(
            seed in bumps(),
            amp in 0.1..30.0f64,
            p in 2.34..4.99f64,
            qf in 0.01..0.99f64,
        ) {
            let q = 1.0 + qf * (p - 1.0);
            let g = RadialGrid::new(16.0, 512).unwrap();
            let u = random_field(g, &seed).scaled(amp);
            let r = evaluate(&u, pair(p, q)).unwrap();
            if r.energy < 0.0 {
                prop_assert!(r.pohozaev < 0.0);
            }
        }
    }
}
