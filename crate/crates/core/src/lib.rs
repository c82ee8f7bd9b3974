//! Numerics for the three-dimensional Schrödinger equation with combined
//! power nonlinearities,
//!
//! ```text
//! i ∂t u + Δu = |u|^(q-1) u − |u|^(p-1) u,    1 < q < p,  7/3 < p < 5,
//! ```
//!
//! restricted to radial fields. The crate is `no_std` (it needs `alloc`) and
//! contains only the numerical kernels: functionals and rescalings, exact
//! fiber-map analysis, radial shooting for static and standing-wave
//! profiles, the ground-state energy curve, and a split-step radial
//! evolution with virial diagnostics. File formats, caching and the command
//! line live in the `cnls` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod prelude {
    pub(crate) use alloc::{
        boxed::Box,
        format,
        string::{String, ToString},
        vec,
        vec::Vec,
    };
    // Float supplies the transcendental methods when std is absent.
    #[allow(unused_imports)]
    pub(crate) use num_traits::Float;
}

pub mod dynamics;
mod error;
pub mod fibering;
pub mod functionals;
pub mod groundstate;
mod pair;
pub mod static_solver;

pub use error::{Error, Result};
pub use functionals::{
    evaluate, rescale, FarField, FunctionalReport, RadialField, RadialGrid, Rescaled,
    ResolutionWarning, Sample, Tail,
};
pub use pair::{PowerPair, Regime, ENERGY_CRITICAL, MASS_CRITICAL};

pub use num_complex::Complex64;
