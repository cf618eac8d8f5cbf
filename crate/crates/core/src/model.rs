//! Physical configuration of the oscillator, its bath, and the initial
//! two-packet superposition.
//!
//! Everything is dimensionless: the oscillator frequency, its mass and
//! Planck's constant are all one. Times are in units of `1/Ω`, energies in
//! `ħΩ`, positions in `sqrt(ħ/MΩ)` and momenta in `sqrt(MħΩ)`.

use std::fmt;

use nalgebra::Vector2;
use num_complex::Complex64;

use crate::error::{domain, Result};

/// Oscillator frequency `Ω`, the unit of frequency.
pub const OMEGA: f64 = 1.0;
/// Oscillator mass `M`.
pub const MASS: f64 = 1.0;
/// Reduced Planck constant.
pub const HBAR: f64 = 1.0;

/// Separation below which the prefactor-free approximations are not trusted.
pub const WELL_SEPARATED: f64 = 5.0;

/// Bath and coupling parameters, in units of the oscillator frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    damping_rate: f64,
    cutoff: f64,
    temperature: f64,
}

impl ModelParams {
    /// The parameter set used for every figure: `γ = 1e-5`, `Λ = 100`, `kT = 20`.
    pub const DEFAULT: ModelParams = ModelParams {
        damping_rate: 1e-5,
        cutoff: 100.0,
        temperature: 20.0,
    };

    /// Validated constructor.
    ///
    /// A zero damping rate is accepted and describes the closed oscillator.
    pub fn new(damping_rate: f64, cutoff: f64, temperature: f64) -> Result<Self> {
        if !(damping_rate.is_finite() && cutoff.is_finite() && temperature.is_finite()) {
            return domain("model parameters must be finite");
        }
        if damping_rate < 0.0 {
            return domain(format!("damping rate must be nonnegative, got {damping_rate}"));
        }
        if cutoff <= 0.0 {
            return domain(format!("cutoff frequency must be positive, got {cutoff}"));
        }
        if temperature < 0.0 {
            return domain(format!("temperature must be nonnegative, got {temperature}"));
        }
        if cutoff <= OMEGA || cutoff <= damping_rate {
            return domain(format!(
                "cutoff frequency {cutoff} must exceed both the oscillator frequency and the damping rate"
            ));
        }
        Ok(Self {
            damping_rate,
            cutoff,
            temperature,
        })
    }

    /// Converts rates given in an arbitrary frequency unit to oscillator units.
    ///
    /// `kt_over_hbar` is the thermal energy expressed as a frequency.
    pub fn from_physical_rates(
        omega: f64,
        damping_rate: f64,
        cutoff: f64,
        kt_over_hbar: f64,
    ) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return domain(format!("oscillator frequency must be positive, got {omega}"));
        }
        Self::new(damping_rate / omega, cutoff / omega, kt_over_hbar / omega)
    }

    /// Damping rate `γ`.
    pub fn damping_rate(&self) -> f64 {
        self.damping_rate
    }

    /// Cutoff frequency `Λ`.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Thermal energy `kT` in units of `ħΩ`.
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Same bath with a different damping rate (used for closed-system checks).
    pub fn with_damping_rate(self, damping_rate: f64) -> Result<Self> {
        Self::new(damping_rate, self.cutoff, self.temperature)
    }

    pub fn with_temperature(self, temperature: f64) -> Result<Self> {
        Self::new(self.damping_rate, self.cutoff, temperature)
    }

    /// The shortest dynamical time of the model, `min(1/Λ, 1/Ω)`.
    pub fn fastest_time(&self) -> f64 {
        (1.0 / self.cutoff).min(1.0 / OMEGA)
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Shorthand for [`ModelParams::new`].
pub fn make_params(damping_rate: f64, cutoff: f64, temperature: f64) -> Result<ModelParams> {
    ModelParams::new(damping_rate, cutoff, temperature)
}

/// Where the pair of packets sits in phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    /// Centers at `(∓d_Q/2, ∓d_P/2)`.
    Symmetric,
    /// Centers at `(q_mid ∓ d_Q/2, p_mid ∓ d_P/2)`.
    Offset { q_mid: f64, p_mid: f64 },
}

/// Reasons a scenario is accepted but flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioWarning {
    /// `max(d_Q, d_P)` is below [`WELL_SEPARATED`]; the packets overlap and the
    /// prefactor cannot be dropped.
    PoorlySeparated,
}

impl fmt::Display for ScenarioWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioWarning::PoorlySeparated => write!(
                f,
                "packet separation below {WELL_SEPARATED}: packets overlap and the prefactor matters"
            ),
        }
    }
}

/// Initial superposition `c₁|φ₁⟩ + c₂|φ₂⟩` of two Gaussian packets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    dq: f64,
    dp: f64,
    sigma: f64,
    amplitudes: [Complex64; 2],
    placement: Placement,
}

impl Scenario {
    /// Validated constructor with symmetric placement.
    ///
    /// `sigma` is the squared position spread; `0.5` gives coherent states.
    pub fn new(dq: f64, dp: f64, sigma: f64, amplitudes: [Complex64; 2]) -> Result<Self> {
        if !(dq.is_finite() && dp.is_finite() && sigma.is_finite()) {
            return domain("scenario parameters must be finite");
        }
        if dq < 0.0 || dp < 0.0 {
            return domain(format!("separations must be nonnegative, got dq = {dq}, dp = {dp}"));
        }
        if sigma <= 0.0 {
            return domain(format!("packet variance sigma must be positive, got {sigma}"));
        }
        let norm = amplitudes[0].norm_sqr() + amplitudes[1].norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return domain(format!("amplitudes must satisfy |c1|^2 + |c2|^2 = 1, got {norm}"));
        }
        Ok(Self {
            dq,
            dp,
            sigma,
            amplitudes,
            placement: Placement::Symmetric,
        })
    }

    /// Coherent-state packets (`σ = 1/2`) with equal real amplitudes.
    pub fn coherent(dq: f64, dp: f64) -> Result<Self> {
        Self::new(dq, dp, 0.5, equal_amplitudes())
    }

    /// Moves the packet pair so that its midpoint is `(q_mid, p_mid)`.
    pub fn with_midpoint(mut self, q_mid: f64, p_mid: f64) -> Result<Self> {
        if !(q_mid.is_finite() && p_mid.is_finite()) {
            return domain("midpoint must be finite");
        }
        self.placement = if q_mid == 0.0 && p_mid == 0.0 {
            Placement::Symmetric
        } else {
            Placement::Offset { q_mid, p_mid }
        };
        Ok(self)
    }

    pub fn with_separations(self, dq: f64, dp: f64) -> Result<Self> {
        let moved = Self::new(dq, dp, self.sigma, self.amplitudes)?;
        match self.placement {
            Placement::Symmetric => Ok(moved),
            Placement::Offset { q_mid, p_mid } => moved.with_midpoint(q_mid, p_mid),
        }
    }

    pub fn dq(&self) -> f64 {
        self.dq
    }

    pub fn dp(&self) -> f64 {
        self.dp
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        self.amplitudes
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self.placement, Placement::Symmetric)
    }

    pub fn warning(&self) -> Option<ScenarioWarning> {
        (self.dq.max(self.dp) < WELL_SEPARATED).then_some(ScenarioWarning::PoorlySeparated)
    }

    /// Phase-space centers `(q_i, p_i)` of the two packets.
    pub fn centers(&self) -> [(f64, f64); 2] {
        let (qm, pm) = match self.placement {
            Placement::Symmetric => (0.0, 0.0),
            Placement::Offset { q_mid, p_mid } => (q_mid, p_mid),
        };
        [
            (qm - 0.5 * self.dq, pm - 0.5 * self.dp),
            (qm + 0.5 * self.dq, pm + 0.5 * self.dp),
        ]
    }

    /// The separation vector `(d_P, d_Q)` in the order used by the decay
    /// quadratic form.
    pub fn separation_vector(&self) -> Vector2<f64> {
        Vector2::new(self.dp, self.dq)
    }

    pub fn effective_separation(&self) -> EffectiveSeparation {
        EffectiveSeparation::new(self.dq, self.dp)
    }
}

/// `(1/√2, 1/√2)`.
pub fn equal_amplitudes() -> [Complex64; 2] {
    let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [c, c]
}

/// Shorthand for [`Scenario::new`].
pub fn make_scenario(
    dq: f64,
    dp: f64,
    sigma: f64,
    amplitudes: [Complex64; 2],
) -> Result<Scenario> {
    Scenario::new(dq, dp, sigma, amplitudes)
}

/// `sqrt(d_Q² + d_P²)`, the distance that sets the golden-rule rate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EffectiveSeparation(f64);

impl EffectiveSeparation {
    pub fn new(dq: f64, dp: f64) -> Self {
        // hypot returns the exact operand when the other is zero
        Self(dq.hypot(dp))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}
