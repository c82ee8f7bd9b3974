//! The fiber map `μ ↦ E(u^μ)` along the mass-preserving rescaling, which is
//! an explicit three-term power law in `μ`.

use crate::functionals::{evaluate, FunctionalReport, RadialField, Sample};
use crate::prelude::*;
use crate::{Error, PowerPair, Result};

/// `E(u^μ) = a μ² + b μ^α − c μ^β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl FiberCoefficients {
    pub fn new(a: f64, b: f64, c: f64, alpha: f64, beta: f64) -> Result<Self> {
        let all_finite = [a, b, c, alpha, beta].iter().all(|v| v.is_finite());
        if !all_finite || a < 0.0 || b < 0.0 || c <= 0.0 {
            return Err(Error::invalid(format!(
                "fiber coefficients need a, b >= 0 and c > 0 (got {a}, {b}, {c})"
            )));
        }
        if !(alpha > 0.0 && alpha < beta && beta > 2.0) {
            return Err(Error::invalid(format!(
                "fiber exponents need 0 < alpha < beta and beta > 2 (got {alpha}, {beta})"
            )));
        }
        Ok(FiberCoefficients {
            a,
            b,
            c,
            alpha,
            beta,
        })
    }

    pub fn from_report(report: &FunctionalReport, pq: PowerPair) -> Result<Self> {
        Self::new(
            report.kinetic / 2.0,
            report.nq / (pq.q() + 1.0),
            report.np / (pq.p() + 1.0),
            pq.alpha(),
            pq.beta(),
        )
    }

    /// Coefficients of the field multiplied by `theta`.
    pub fn amplified(&self, theta: f64, pq: PowerPair) -> Self {
        FiberCoefficients {
            a: self.a * theta * theta,
            b: self.b * theta.powf(pq.q() + 1.0),
            c: self.c * theta.powf(pq.p() + 1.0),
            ..*self
        }
    }

    pub fn energy(&self, mu: f64) -> f64 {
        self.a * mu * mu + self.b * mu.powf(self.alpha) - self.c * mu.powf(self.beta)
    }

    /// `μ dE/dμ`, the Pohozaev functional of `u^μ`.
    pub fn pohozaev(&self, mu: f64) -> f64 {
        2.0 * self.a * mu * mu + self.alpha * self.b * mu.powf(self.alpha)
            - self.beta * self.c * mu.powf(self.beta)
    }

    pub fn second_derivative(&self, mu: f64) -> f64 {
        let (al, be) = (self.alpha, self.beta);
        2.0 * self.a + al * (al - 1.0) * self.b * mu.powf(al - 2.0)
            - be * (be - 1.0) * self.c * mu.powf(be - 2.0)
    }

    /// `f'(z) − z f''(z) = α(2−α) b z^{α−1} + β(β−2) c z^{β−1}`; positive for
    /// `α < 2` and certifies concavity wherever `f' ≤ 0`.
    pub fn curvature_margin(&self, z: f64) -> f64 {
        let (al, be) = (self.alpha, self.beta);
        al * (2.0 - al) * self.b * z.powf(al - 1.0) + be * (be - 2.0) * self.c * z.powf(be - 1.0)
    }

    /// `G(μ)` divided by its leading small-`μ` power, so the sign change is
    /// isolated from the trivial zero at the origin.
    fn reduced_pohozaev(&self, mu: f64) -> f64 {
        let lead = self.alpha.min(2.0);
        2.0 * self.a * mu.powf(2.0 - lead) + self.alpha * self.b * mu.powf(self.alpha - lead)
            - self.beta * self.c * mu.powf(self.beta - lead)
    }
}

/// Fiber energy and Pohozaev value at `mu`.
pub fn fiber_eval(coeffs: &FiberCoefficients, mu: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!(
            "fiber parameter mu = {mu} must be positive"
        )));
    }
    Ok((coeffs.energy(mu), coeffs.pohozaev(mu)))
}

/// How `concave_beyond` was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcavityBasis {
    /// The curvature-margin inequality held on every sample (`α < 2`).
    MarginInequality,
    /// Only the sign of the second derivative was sampled (`α ≥ 2`).
    SampledSign,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberAnalysis {
    pub mu_tilde: f64,
    pub e_at_max: f64,
    pub second_derivative_at_max: f64,
    pub concave_beyond: bool,
    pub concavity_basis: ConcavityBasis,
    /// Sign changes of `G` seen on the log-spaced certificate samples.
    pub sign_changes: usize,
    /// `G > 0` on every sample below `μ̃` and `G < 0` on every sample above.
    pub sign_pattern_ok: bool,
}

const CERTIFICATE_SAMPLES: usize = 1000;
const BRACKET_LIMIT: f64 = 1e30;

fn find_mu_tilde(c: &FiberCoefficients) -> Result<f64> {
    let h = |mu: f64| c.reduced_pohozaev(mu);
    let mut lo = 1e-6;
    while h(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::NoFiberZero { limit: lo });
        }
    }
    let mut hi = 1.0f64.max(lo * 2.0);
    while h(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_LIMIT {
            return Err(Error::NoFiberZero {
                limit: BRACKET_LIMIT,
            });
        }
    }
    // bisect in ln μ
    while hi / lo - 1.0 > 1e-13 {
        let mid = (lo * hi).sqrt();
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Locates the unique maximum of the fiber energy and certifies the sign
/// and curvature structure around it on log-spaced samples.
pub fn analyze_fiber(coeffs: &FiberCoefficients) -> Result<FiberAnalysis> {
    if coeffs.a == 0.0 && coeffs.b == 0.0 {
        return Err(Error::DegenerateFiber);
    }
    let mu_tilde = find_mu_tilde(coeffs)?;

    // samples over [μ̃/10³, 10³ μ̃], excluding a thin band around the root
    let mut signs = Vec::with_capacity(CERTIFICATE_SAMPLES);
    let mut sign_pattern_ok = true;
    for k in 0..CERTIFICATE_SAMPLES {
        let t = -3.0 + 6.0 * k as f64 / (CERTIFICATE_SAMPLES - 1) as f64;
        let mu = mu_tilde * 10f64.powf(t);
        let g = coeffs.reduced_pohozaev(mu);
        signs.push(g > 0.0);
        if t.abs() > 1e-9 {
            sign_pattern_ok &= if t < 0.0 { g > 0.0 } else { g < 0.0 };
        }
    }
    let sign_changes = signs.windows(2).filter(|w| w[0] != w[1]).count();

    let beyond = (0..CERTIFICATE_SAMPLES)
        .map(|k| mu_tilde * 10f64.powf(3.0 * k as f64 / (CERTIFICATE_SAMPLES - 1) as f64));
    let (concave_beyond, concavity_basis) = if coeffs.alpha < 2.0 {
        let ok = beyond.clone().all(|z| coeffs.curvature_margin(z) > 0.0)
            && beyond.skip(1).all(|z| coeffs.pohozaev(z) < 0.0);
        (ok, ConcavityBasis::MarginInequality)
    } else {
        let ok = beyond
            .into_iter()
            .all(|z| coeffs.second_derivative(z) < 0.0);
        (ok, ConcavityBasis::SampledSign)
    };

    Ok(FiberAnalysis {
        mu_tilde,
        e_at_max: coeffs.energy(mu_tilde),
        second_derivative_at_max: coeffs.second_derivative(mu_tilde),
        concave_beyond,
        concavity_basis,
        sign_changes,
        sign_pattern_ok,
    })
}

/// Both evaluations of `d/dθ max_μ E((θu)^μ)` at `θ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaDerivative {
    /// `K + N_q − N_p`.
    pub analytic: f64,
    /// Central difference of the fiber maximum over `θ = 1 ± 10⁻⁴`.
    pub numeric: f64,
}

const THETA_STEP: f64 = 1e-4;

/// Derivative of the fiber maximum with respect to the amplitude, for a
/// field on its own Pohozaev manifold. Returns the analytic value after
/// checking it against the numerical one.
pub fn theta_derivative<S: Sample>(field: &RadialField<S>, pq: PowerPair) -> Result<f64> {
    Ok(theta_derivative_parts(field, pq)?.analytic)
}

pub fn theta_derivative_parts<S: Sample>(
    field: &RadialField<S>,
    pq: PowerPair,
) -> Result<ThetaDerivative> {
    let report = evaluate(field, pq)?;
    theta_derivative_from_report(&report, pq)
}

pub fn theta_derivative_from_report(
    report: &FunctionalReport,
    pq: PowerPair,
) -> Result<ThetaDerivative> {
    if !(report.pohozaev.abs() <= 1e-6 * report.kinetic) || report.kinetic == 0.0 {
        return Err(Error::Precondition(format!(
            "field is off its Pohozaev manifold: G = {:e}, K = {:e}",
            report.pohozaev, report.kinetic
        )));
    }
    let coeffs = FiberCoefficients::from_report(report, pq)?;
    let e_max = |theta: f64| analyze_fiber(&coeffs.amplified(theta, pq)).map(|f| f.e_at_max);
    let numeric = (e_max(1.0 + THETA_STEP)? - e_max(1.0 - THETA_STEP)?) / (2.0 * THETA_STEP);
    let analytic = report.kinetic + report.nq - report.np;
    if (analytic - numeric).abs() > 1e-3 * (1.0 + analytic.abs()) {
        return Err(Error::CrossCheck(format!(
            "theta derivative: analytic {analytic:e} vs numeric {numeric:e}"
        )));
    }
    Ok(ThetaDerivative { analytic, numeric })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{rescale, RadialGrid};
    use proptest::prelude::*;

    fn coeffs(a: f64, b: f64, c: f64, alpha: f64, beta: f64) -> FiberCoefficients {
        FiberCoefficients::new(a, b, c, alpha, beta).unwrap()
    }

    #[test]
    fn quadratic_minus_cubic() {
        let c = coeffs(1.0, 0.0, 1.0, 1.0, 3.0);
        let f = analyze_fiber(&c).unwrap();
        assert!((f.mu_tilde - 2.0 / 3.0).abs() < 1e-11);
        assert!((f.e_at_max - 4.0 / 27.0).abs() < 1e-12);
        assert!((f.second_derivative_at_max + 2.0).abs() < 1e-10);
        assert!(f.concave_beyond);
    }

    #[test]
    fn mass_critical_closed_form() {
        let c = coeffs(1.0, 1.0, 1.0, 2.0, 3.0);
        let f = analyze_fiber(&c).unwrap();
        assert!((f.mu_tilde - 4.0 / 3.0).abs() < 1e-11);
        assert_eq!(f.concavity_basis, ConcavityBasis::SampledSign);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        assert_eq!(
            analyze_fiber(&coeffs(0.0, 0.0, 1.0, 1.5, 3.0)),
            Err(Error::DegenerateFiber)
        );
        assert!(FiberCoefficients::new(1.0, 1.0, 0.0, 1.5, 3.0).is_err());
        assert!(FiberCoefficients::new(1.0, 1.0, 1.0, 1.5, 1.9).is_err());
        assert!(fiber_eval(&coeffs(1.0, 1.0, 1.0, 1.5, 3.0), 0.0).is_err());
    }

    #[test]
    fn gaussian_fiber_at_identity() {
        let pq = PowerPair::new(3.0, 2.0).unwrap();
        let g = RadialGrid::new(12.0, 2048).unwrap();
        let u = RadialField::from_fn(g, |r| (-r * r / 2.0).exp()).unwrap();
        let rep = evaluate(&u, pq).unwrap();
        let c = FiberCoefficients::from_report(&rep, pq).unwrap();
        let (e, gg) = fiber_eval(&c, 1.0).unwrap();
        assert!((e - rep.energy).abs() < 1e-12 && (gg - rep.pohozaev).abs() < 1e-12);
        assert!((gg - 8.391_472_986).abs() < 1e-7);

        // fiber-projected Gaussian sits on the manifold
        let f = analyze_fiber(&c).unwrap();
        let projected = rescale(&u, f.mu_tilde).unwrap().field;
        let parts = theta_derivative_parts(&projected, pq).unwrap();
        assert!((parts.analytic - parts.numeric).abs() <= 1e-3 * (1.0 + parts.analytic.abs()));
        assert!(theta_derivative(&u, pq).is_err());
    }

    #[test]
    fn derivative_identity_converges_at_second_order() {
        let c = coeffs(0.7, 1.3, 0.9, 1.5, 3.0);
        let mu = 1.7;
        let err = |h: f64| {
            (c.pohozaev(mu) - mu * (c.energy(mu + h) - c.energy(mu - h)) / (2.0 * h)).abs()
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    fn draw() -> impl Strategy<Value = FiberCoefficients> {
        draw_within(2.5..4.9, 0.0)
    }

    /// `gap` is the minimum of `p - q`.
    fn draw_within(p: core::ops::Range<f64>, gap: f64) -> impl Strategy<Value = FiberCoefficients> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, p, 0.01..0.9f64).prop_map(
            move |(la, lb, lc, p, qf)| {
                let q = 1.0 + qf * (p - 1.0 - gap);
                coeffs(
                    10f64.powf(la),
                    10f64.powf(lb),
                    10f64.powf(lc),
                    1.5 * (q - 1.0),
                    1.5 * (p - 1.0),
                )
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn fiber_structure(c in draw()) {
            let f = analyze_fiber(&c).unwrap();
            prop_assert_eq!(f.sign_changes, 1);
            prop_assert!(f.sign_pattern_ok);
            prop_assert!(f.second_derivative_at_max < 0.0);
            if c.alpha < 2.0 {
                prop_assert!(f.concave_beyond);
            }
            prop_assert_eq!(f.mu_tilde < 1.0, c.pohozaev(1.0) < 0.0);
        }

        #[test]
        fn margin_inequality_below_two(c in draw(), lz in -4.0..4.0f64) {
            prop_assume!(c.alpha < 2.0);
            prop_assert!(c.curvature_margin(10f64.powf(lz)) > 0.0);
        }

        #[test]
        // The elasticity of the maximum grows like 1/(β − 2) and 1/(β − α),
        // so both gaps are kept open here.
        fn fiber_maximum_is_continuous(c in draw_within(2.8..4.9, 2.0 / 3.0), da in -1.0..1.0f64, db in -1.0..1.0f64, dc in -1.0..1.0f64) {
            let e0 = analyze_fiber(&c).unwrap().e_at_max;
            let d = FiberCoefficients {
                a: c.a * (1.0 + 1e-4 * da),
                b: c.b * (1.0 + 1e-4 * db),
                c: c.c * (1.0 + 1e-4 * dc),
                ..c
            };
            let e1 = analyze_fiber(&d).unwrap().e_at_max;
            prop_assert!((e1 - e0).abs() <= 1e-3 * e0.abs());
        }

        #[test]
        fn sign_of_g_decides_side_of_max(
            amp in 0.05..20.0f64,
            width in 0.3..3.0f64,
            shift in 0.0..2.0f64,
        ) {
            let pq = PowerPair::new(3.0, 2.0).unwrap();
            let g = RadialGrid::new(20.0, 1024).unwrap();
            let u = RadialField::from_fn(g, |r| {
                amp * ((-(r - shift).powi(2) / (width * width)).exp() + (-(r + shift).powi(2) / (width * width)).exp())
            }).unwrap();
            let rep = evaluate(&u, pq).unwrap();
            let f = analyze_fiber(&FiberCoefficients::from_report(&rep, pq).unwrap()).unwrap();
            prop_assert_eq!(f.mu_tilde < 1.0, rep.pohozaev < 0.0);
        }
    }
}
