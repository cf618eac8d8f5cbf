//! Decoherence of two-packet superpositions of a damped harmonic oscillator
//! coupled to an Ohmic bath.
//!
//! Units are `ħ = M = Ω = 1`. The entry point for most uses is
//! [`Simulation`], which caches the bath tables for one parameter set:
//!
//! ```
//! use qbm::{ModelParams, Scenario, Simulation};
//!
//! let sim = Simulation::new(ModelParams::DEFAULT);
//! let scenario = Scenario::coherent(16.0, 0.0).unwrap();
//! let curve = sim.decay_curve(&scenario, 40.0, 81, true).unwrap();
//! let tau = curve.decoherence_time().unwrap();
//! assert!(tau > 30.0 && tau < 50.0);
//! ```

pub mod bath;
pub mod coefficients;
pub mod error;
pub mod limits;
pub mod model;
pub mod phasespace;
pub mod propagation;
pub mod quadrature;
pub mod simulation;

pub use error::{Error, QuadratureError, Result};
pub use limits::{Law, Regime, RegimeReport};
pub use model::{ModelParams, Scenario};
pub use propagation::{DecayCurve, Measure, PropagationState, Trajectory};
pub use simulation::Simulation;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/bath.md")]
    mod bath {}
    #[doc = include_str!("../../../book/src/coefficients.md")]
    mod coefficients {}
    #[doc = include_str!("../../../book/src/propagation.md")]
    mod propagation {}
    #[doc = include_str!("../../../book/src/limits.md")]
    mod limits {}
    #[doc = include_str!("../../../book/src/phase-space.md")]
    mod phase_space {}
    #[doc = include_str!("../../../book/src/numerics.md")]
    mod numerics {}
}
