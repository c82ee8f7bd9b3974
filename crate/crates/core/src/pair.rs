use core::fmt;

use alloc::format;

use crate::{Error, Result};

/// Mass-critical exponent in three dimensions.
pub const MASS_CRITICAL: f64 = 7.0 / 3.0;
/// Energy-critical exponent in three dimensions.
pub const ENERGY_CRITICAL: f64 = 5.0;

// q is compared to 7/3 with this slack so that `7.0 / 3.0` typed by hand
// lands in the critical class.
const CRITICAL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    MassSubcritical,
    MassCritical,
    MassSupercritical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::MassSubcritical => "mass-subcritical",
            Regime::MassCritical => "mass-critical",
            Regime::MassSupercritical => "mass-supercritical",
        })
    }
}

/// Focusing exponent `p` and defocusing exponent `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPair {
    p: f64,
    q: f64,
    regime: Regime,
}

impl PowerPair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite()) {
            return Err(Error::invalid("exponents must be finite"));
        }
        if !(MASS_CRITICAL < p && p < ENERGY_CRITICAL) {
            return Err(Error::invalid(format!("p = {p} must lie in (7/3, 5)")));
        }
        if !(1.0 < q && q < p) {
            return Err(Error::invalid(format!(
                "q = {q} must satisfy 1 < q < p = {p}"
            )));
        }
        let regime = if (q - MASS_CRITICAL).abs() <= CRITICAL_SLACK {
            Regime::MassCritical
        } else if q < MASS_CRITICAL {
            Regime::MassSubcritical
        } else {
            Regime::MassSupercritical
        };
        let q = if regime == Regime::MassCritical {
            MASS_CRITICAL
        } else {
            q
        };
        Ok(PowerPair { p, q, regime })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Fiber exponent of the defocusing term, `3(q-1)/2`.
    pub fn alpha(&self) -> f64 {
        1.5 * (self.q - 1.0)
    }

    /// Fiber exponent of the focusing term, `3(p-1)/2`.
    pub fn beta(&self) -> f64 {
        1.5 * (self.p - 1.0)
    }

    /// Algebraic decay rate of the static solution, `max(2/(q-1), 1)`.
    pub fn decay_exponent(&self) -> f64 {
        (2.0 / (self.q - 1.0)).max(1.0)
    }

    /// Whether the static solution is square integrable.
    pub fn static_mass_finite(&self) -> bool {
        self.regime == Regime::MassSubcritical
    }

    /// `K(u) <= kinetic_bound_factor * E(u)` whenever `G(u) >= 0`.
    pub fn kinetic_bound_factor(&self) -> f64 {
        6.0 * (self.p - 1.0) / (3.0 * self.p - 7.0)
    }
}

impl fmt::Display for PowerPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(p, q) = ({}, {})", self.p, self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes() {
        assert_eq!(
            PowerPair::new(3.0, 2.0).unwrap().regime(),
            Regime::MassSubcritical
        );
        assert_eq!(
            PowerPair::new(3.0, 7.0 / 3.0).unwrap().regime(),
            Regime::MassCritical
        );
        assert_eq!(
            PowerPair::new(4.0, 3.0).unwrap().regime(),
            Regime::MassSupercritical
        );
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(PowerPair::new(3.0, 3.0).is_err());
        assert!(PowerPair::new(3.0, 1.0).is_err());
        assert!(PowerPair::new(2.0, 1.5).is_err());
        assert!(PowerPair::new(5.0, 2.0).is_err());
        assert!(PowerPair::new(f64::NAN, 2.0).is_err());
    }

    #[test]
    fn decay_exponents() {
        assert_eq!(PowerPair::new(3.0, 2.0).unwrap().decay_exponent(), 2.0);
        assert_eq!(PowerPair::new(4.0, 3.0).unwrap().decay_exponent(), 1.0);
        let crit = PowerPair::new(3.0, 7.0 / 3.0).unwrap();
        assert!((crit.decay_exponent() - 1.5).abs() < 1e-12);
        assert!((crit.alpha() - 2.0).abs() < 1e-12);
    }
}
