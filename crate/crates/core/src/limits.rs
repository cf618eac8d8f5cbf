//! Limiting decay laws and the regime classifier.
//!
//! Each law is written for the coherence norm `N₁₂` and scaled by
//! [`Measure::exponent_factor`] for the indicator `n₁₂`:
//!
//! - golden rule: `exp{-d(∞) t (d_Q² + d_P²)}`
//! - interaction dominance 1: `exp{-∫₀^t 2K_R(s)(t-s)[d_Q² + d_Q d_P t + d_P²(t-s)(2t+s)/6] ds}`
//! - interaction dominance 2: `exp{-⟨B²⟩(d_Q² t² + d_Q d_P t³ + d_P² t⁴/4)}`

use std::fmt;

use crate::bath::{thermal_occupation, SpectralDensity};
use crate::error::{domain, Result};
use crate::model::{ModelParams, Scenario};
use crate::propagation::{DecayCurve, Measure};
use crate::quadrature::{Domain, Quadrature};
use crate::simulation::Simulation;

/// `⟨n_th(Ω)⟩ + 1/2`, the thermal factor of the golden rule.
fn thermal_factor(params: &ModelParams) -> f64 {
    thermal_occupation(1.0, params.temperature()).unwrap_or(0.0) + 0.5
}

/// `d(∞) = γ f_c(Ω/Λ)(n_th + 1/2)`.
pub fn asymptotic_diffusion(params: &ModelParams) -> f64 {
    let sd = SpectralDensity::new(*params);
    params.damping_rate() * sd.cutoff_factor(1.0) * thermal_factor(params)
}

/// Golden-rule law `exp{-d(∞) t (d_Q² + d_P²)}` for the chosen measure.
pub fn golden_rule_norm(params: &ModelParams, scenario: &Scenario, t: f64, measure: Measure) -> f64 {
    let d2 = scenario.dq().powi(2) + scenario.dp().powi(2);
    (-measure.exponent_factor() * asymptotic_diffusion(params) * t * d2).exp()
}

/// Golden-rule decoherence time and its ratio to the dissipation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenRuleTime {
    /// `e⁻¹` time of the golden-rule law for the chosen measure.
    pub tau: f64,
    /// `(λ_th/d_eff)²` with `λ_th² = ħ/(MΩ(n_th + 1/2))`.
    pub ratio_to_dissipation: f64,
}

pub fn gr_decoherence_time(
    params: &ModelParams,
    scenario: &Scenario,
    measure: Measure,
) -> Result<GoldenRuleTime> {
    let d = scenario.effective_separation().value();
    if d == 0.0 {
        return domain("the golden-rule time needs a nonzero separation");
    }
    let rate = measure.exponent_factor() * asymptotic_diffusion(params) * d * d;
    Ok(GoldenRuleTime {
        tau: 1.0 / rate,
        ratio_to_dissipation: thermal_wavelength(params).powi(2) / (d * d),
    })
}

/// `λ_th = (ħ/(MΩ(n_th + 1/2)))^{1/2}`.
pub fn thermal_wavelength(params: &ModelParams) -> f64 {
    (1.0 / thermal_factor(params)).sqrt()
}

/// Universal short-time exponent `⟨B²⟩(d_Q² t² + d_Q d_P t³ + d_P² t⁴/4)`.
fn id2_exponent(b2: f64, scenario: &Scenario, t: f64) -> f64 {
    let x = scenario.dq() * t + 0.5 * scenario.dp() * t * t;
    b2 * x * x
}

/// Universal short-time law for the chosen measure, given `⟨B²⟩`.
pub fn id2_norm(b_squared: f64, scenario: &Scenario, t: f64, measure: Measure) -> f64 {
    (-measure.exponent_factor() * id2_exponent(b_squared, scenario, t)).exp()
}

/// `e⁻¹` time of the universal short-time law: the positive root of
/// `f⟨B²⟩(d_Q t + d_P t²/2)² = 1`.
pub fn id2_decoherence_time(b_squared: f64, scenario: &Scenario, measure: Measure) -> Result<f64> {
    let (dq, dp) = (scenario.dq(), scenario.dp());
    if dq == 0.0 && dp == 0.0 {
        return domain("the short-time decoherence time needs a nonzero separation");
    }
    if b_squared == 0.0 {
        return Ok(f64::INFINITY);
    }
    let target = 1.0 / (measure.exponent_factor() * b_squared).sqrt();
    if dp == 0.0 {
        return Ok(target / dq);
    }
    // d_P t²/2 + d_Q t - target = 0, in the cancellation-free form
    Ok(2.0 * target / (dq + (dq * dq + 2.0 * dp * target).sqrt()))
}

/// `τ^Q = ħ/(√⟨B²⟩ d_Q)` for the norm.
pub fn tau_q(b_squared: f64, dq: f64) -> f64 {
    1.0 / (b_squared.sqrt() * dq)
}

/// `τ^P = (4M²ħ²/(⟨B²⟩ d_P²))^{1/4}` for the norm.
pub fn tau_p(b_squared: f64, dp: f64) -> f64 {
    (4.0 / (b_squared * dp * dp)).powf(0.25)
}

/// Exponent of the first interaction-dominance law, `∫₀^t 2K_R(s)(t-s)[…] ds`.
fn id1_exponent(sim: &Simulation, scenario: &Scenario, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let cache = sim.kernel_cache(t)?;
    let upper = if cache.has_decayed() {
        t.min(cache.horizon())
    } else {
        t
    };
    let (dq, dp) = (scenario.dq(), scenario.dp());
    let linear = dq * dq + dq * dp * t;
    let quad = dp * dp / 6.0;
    let step = 1.0 / sim.params().cutoff();
    let breaks: Vec<f64> = (1..)
        .map(|k| k as f64 * 10.0 * step)
        .take_while(|&s| s < upper)
        .collect();
    let scale = cache.real(0.0).abs() * t * t * (linear.abs() + quad * t * t);
    let v = Quadrature::new(1e-10)
        .abs_tol(1e-15 * scale)
        .breakpoints(breaks)
        .integrate(
            |s| 2.0 * cache.real(s) * (t - s) * (linear + quad * (t - s) * (2.0 * t + s)),
            Domain::Finite(0.0, upper),
        )?;
    Ok(v)
}

/// First interaction-dominance law for the chosen measure.
pub fn id1_norm(sim: &Simulation, scenario: &Scenario, t: f64, measure: Measure) -> Result<f64> {
    Ok((-measure.exponent_factor() * id1_exponent(sim, scenario, t)?).exp())
}

/// `e⁻¹` time of the first interaction-dominance law, by bracketing and bisection.
pub fn id1_decoherence_time(sim: &Simulation, scenario: &Scenario, measure: Measure) -> Result<f64> {
    let target = 1.0 / measure.exponent_factor();
    let b2 = sim.b_squared()?;
    let mut hi = id2_decoherence_time(b2, scenario, measure)?;
    if !hi.is_finite() {
        return Ok(f64::INFINITY);
    }
    let mut lo = 0.0;
    let mut guard = 0;
    while id1_exponent(sim, scenario, hi)? < target {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return domain("interaction-dominance law never reaches e⁻¹");
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if id1_exponent(sim, scenario, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The three limiting laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Law {
    GoldenRule,
    InteractionDominated1,
    InteractionDominated2,
}

impl Law {
    pub const ALL: [Law; 3] = [
        Law::GoldenRule,
        Law::InteractionDominated1,
        Law::InteractionDominated2,
    ];

    /// Column label used in reports and CSV headers.
    pub fn label(self) -> &'static str {
        match self {
            Law::GoldenRule => "gr",
            Law::InteractionDominated1 => "id1",
            Law::InteractionDominated2 => "id2",
        }
    }
}

/// The law sampled at `times`.
pub fn law_curve(
    law: Law,
    sim: &Simulation,
    scenario: &Scenario,
    times: &[f64],
    measure: Measure,
) -> Result<Vec<f64>> {
    match law {
        Law::GoldenRule => Ok(times
            .iter()
            .map(|&t| golden_rule_norm(sim.params(), scenario, t, measure))
            .collect()),
        Law::InteractionDominated2 => {
            let b2 = sim.b_squared()?;
            Ok(times.iter().map(|&t| id2_norm(b2, scenario, t, measure)).collect())
        }
        Law::InteractionDominated1 => {
            if let Some(&t_end) = times.last() {
                sim.kernel_cache(t_end)?;
            }
            times
                .iter()
                .map(|&t| id1_norm(sim, scenario, t, measure))
                .collect()
        }
    }
}

/// `e⁻¹` time of a law.
pub fn law_decoherence_time(
    law: Law,
    sim: &Simulation,
    scenario: &Scenario,
    measure: Measure,
) -> Result<f64> {
    match law {
        Law::GoldenRule => Ok(gr_decoherence_time(sim.params(), scenario, measure)?.tau),
        Law::InteractionDominated1 => id1_decoherence_time(sim, scenario, measure),
        Law::InteractionDominated2 => id2_decoherence_time(sim.b_squared()?, scenario, measure),
    }
}

/// Fills the law columns of `curve` in the `n₁₂` convention.
pub fn attach_laws(curve: &mut DecayCurve, sim: &Simulation, scenario: &Scenario, laws: &[Law]) -> Result<()> {
    for &law in laws {
        let values = Some(law_curve(law, sim, scenario, &curve.times, Measure::Indicator)?);
        match law {
            Law::GoldenRule => curve.golden_rule = values,
            Law::InteractionDominated1 => curve.id1 = values,
            Law::InteractionDominated2 => curve.id2 = values,
        }
    }
    Ok(())
}

/// Gaussian coefficients `(α, β, γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussCoeffs {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Weak-coupling Gaussian coefficients: the propagator is replaced by the
/// free rotation, which leaves convolutions of `c` and `d` with `sin 2(t-s)`
/// and `cos 2(t-s)`.
pub fn perturbative_gauss_coeffs(sim: &Simulation, t: f64) -> Result<GaussCoeffs> {
    if t < 0.0 {
        return domain(format!("time must be nonnegative, got {t}"));
    }
    if t == 0.0 {
        return Ok(GaussCoeffs::default());
    }
    let table = sim.coefficient_table(t)?;
    let fast = sim.params().fastest_time();
    let breaks: Vec<f64> = [fast, 10.0 * fast, 50.0 * fast]
        .into_iter()
        .filter(|&s| s < t)
        .collect();
    let scale = sim.asymptotic()?.d.abs() * t;
    let v = Quadrature::new(1e-11)
        .abs_tol(1e-15 * scale)
        .breakpoints(breaks)
        .period(std::f64::consts::PI)
        .integrate_vec(
            |s| {
                let k = table.eval(s);
                let (s2, c2) = (2.0 * (t - s)).sin_cos();
                [
                    k.c * s2 + k.d * (1.0 - c2),
                    -k.c * c2 - k.d * s2,
                    -k.c * s2 + k.d * (1.0 + c2),
                ]
            },
            Domain::Finite(0.0, t),
        )?
        .value;
    Ok(GaussCoeffs {
        alpha: v[0],
        beta: v[1],
        gamma: v[2],
    })
}

/// Short-time Gaussian coefficients, valid for `t ≪ 1/Ω`:
/// `α = ∫K_R(s)(t-s)²(2t+s)/3`, `β = -t∫K_R(s)(t-s)`, `γ = 2∫K_R(s)(t-s)`.
pub fn id1_gauss_coeffs(sim: &Simulation, t: f64) -> Result<GaussCoeffs> {
    if t < 0.0 {
        return domain(format!("time must be nonnegative, got {t}"));
    }
    if t == 0.0 {
        return Ok(GaussCoeffs::default());
    }
    let cache = sim.kernel_cache(t)?;
    let upper = if cache.has_decayed() {
        t.min(cache.horizon())
    } else {
        t
    };
    let scale = cache.real(0.0).abs() * t * t;
    let v = Quadrature::new(1e-11)
        .abs_tol(1e-16 * scale)
        .integrate_vec(
            |s| {
                let k = cache.real(s);
                let u = t - s;
                [k * u * u * (2.0 * t + s) / 3.0, -k * t * u, 2.0 * k * u]
            },
            Domain::Finite(0.0, upper),
        )?
        .value;
    Ok(GaussCoeffs {
        alpha: v[0],
        beta: v[1],
        gamma: v[2],
    })
}

/// Decoherence regime of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    GoldenRule,
    Crossover,
    InteractionDominated1,
    InteractionDominated2,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::GoldenRule => "GOLDEN_RULE",
            Regime::Crossover => "CROSSOVER",
            Regime::InteractionDominated1 => "INTERACTION_DOMINATED_1",
            Regime::InteractionDominated2 => "INTERACTION_DOMINATED_2",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Characteristic times of the system, bath and decoherence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timescales {
    /// `1/Ω`.
    pub system: f64,
    /// `1/γ`.
    pub dissipation: f64,
    /// `1/Λ`.
    pub reservoir: f64,
    pub decoherence_gr: f64,
    pub decoherence_id1: f64,
    pub decoherence_id2: f64,
}

/// Classification of a scenario with all bounds that went into it.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    pub effective_separation: f64,
    pub dq: f64,
    pub dp: f64,
    /// `d_eff` below which the golden rule holds, `(Ω/(γ(n_th+1/2)))^{1/2}`.
    pub gr_upper_bound: f64,
    /// `d_eff` above which coherence is gone within a quarter period.
    pub id1_lower_bound: f64,
    /// `d_Q` above which the universal short-time law holds, `(ħΛΩ/(kTγ))^{1/2}`.
    pub id2_bound_q: f64,
    /// `d_P` above which the universal short-time law holds, `(ħΛ³/(kTΩγ))^{1/2}`.
    pub id2_bound_p: f64,
    pub measure: Measure,
    pub timescales: Timescales,
}

/// `e⁻¹` level of coherence below which a scenario counts as decohered
/// within a quarter period for the lower edge of the first interaction
/// regime.
const QUARTER_PERIOD_RESIDUAL: f64 = 1e-3;

/// Bounds of the regimes at the given parameters.
pub fn regime_bounds(params: &ModelParams) -> (f64, f64, f64, f64) {
    let g = params.damping_rate();
    let kt = params.temperature();
    let l = params.cutoff();
    let gr = (1.0 / (g * thermal_factor(params))).sqrt();
    // golden-rule norm exponent d(∞) d² π/2 reaching ln(1/residual)
    let id1 = gr * (2.0 * (1.0 / QUARTER_PERIOD_RESIDUAL).ln() / std::f64::consts::PI).sqrt();
    let id2_q = (l / (kt * g)).sqrt();
    let id2_p = (l.powi(3) / (kt * g)).sqrt();
    (gr, id1, id2_q, id2_p)
}

/// Places a scenario into one of the four regimes. The paper's `≪`/`≫`
/// bands are read as plain comparisons against the bounds.
pub fn regime_classify(sim: &Simulation, scenario: &Scenario, measure: Measure) -> Result<RegimeReport> {
    let d_eff = scenario.effective_separation().value();
    if d_eff == 0.0 {
        return domain("regime classification needs a nonzero separation");
    }
    let params = sim.params();
    let (gr, id1, id2_q, id2_p) = regime_bounds(params);
    let regime = if d_eff < gr {
        Regime::GoldenRule
    } else if scenario.dq() > id2_q || scenario.dp() > id2_p {
        Regime::InteractionDominated2
    } else if d_eff >= id1 {
        Regime::InteractionDominated1
    } else {
        Regime::Crossover
    };
    let timescales = Timescales {
        system: 1.0,
        dissipation: 1.0 / params.damping_rate(),
        reservoir: 1.0 / params.cutoff(),
        decoherence_gr: law_decoherence_time(Law::GoldenRule, sim, scenario, measure)?,
        decoherence_id1: law_decoherence_time(Law::InteractionDominated1, sim, scenario, measure)?,
        decoherence_id2: law_decoherence_time(Law::InteractionDominated2, sim, scenario, measure)?,
    };
    Ok(RegimeReport {
        regime,
        effective_separation: d_eff,
        dq: scenario.dq(),
        dp: scenario.dp(),
        gr_upper_bound: gr,
        id1_lower_bound: id1,
        id2_bound_q: id2_q,
        id2_bound_p: id2_p,
        measure,
        timescales,
    })
}

impl RegimeReport {
    /// Rows for a two-column `key,value` CSV.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let ts = &self.timescales;
        let measure = match self.measure {
            Measure::Norm => "N12",
            Measure::Indicator => "n12",
        };
        vec![
            ("regime", self.regime.name().to_string()),
            ("dq", format!("{}", self.dq)),
            ("dp", format!("{}", self.dp)),
            ("d_eff", format!("{}", self.effective_separation)),
            ("gr_upper_bound", format!("{:.6}", self.gr_upper_bound)),
            ("id1_lower_bound", format!("{:.6}", self.id1_lower_bound)),
            ("id2_bound_q", format!("{:.6}", self.id2_bound_q)),
            ("id2_bound_p", format!("{:.6}", self.id2_bound_p)),
            ("measure", measure.to_string()),
            ("tau_sys", format!("{:e}", ts.system)),
            ("tau_diss", format!("{:e}", ts.dissipation)),
            ("tau_res", format!("{:e}", ts.reservoir)),
            ("tau_dec_gr", format!("{:e}", ts.decoherence_gr)),
            ("tau_dec_id1", format!("{:e}", ts.decoherence_id1)),
            ("tau_dec_id2", format!("{:e}", ts.decoherence_id2)),
        ]
    }
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ts = &self.timescales;
        writeln!(f, "regime: {}", self.regime)?;
        writeln!(
            f,
            "separation: d_Q = {}, d_P = {}, d_eff = {:.6}",
            self.dq, self.dp, self.effective_separation
        )?;
        writeln!(f, "bounds:")?;
        writeln!(f, "  golden rule       d_eff < {:.4}", self.gr_upper_bound)?;
        writeln!(f, "  interaction 1     d_eff > {:.4}", self.id1_lower_bound)?;
        writeln!(f, "  interaction 2     d_Q > {:.4} or d_P > {:.4}", self.id2_bound_q, self.id2_bound_p)?;
        writeln!(f, "timescales (1/Omega):")?;
        writeln!(f, "  system            {:e}", ts.system)?;
        writeln!(f, "  dissipation       {:e}", ts.dissipation)?;
        writeln!(f, "  reservoir         {:e}", ts.reservoir)?;
        let label = match self.measure {
            Measure::Norm => "N12",
            Measure::Indicator => "n12",
        };
        writeln!(f, "decoherence times ({label} = 1/e):")?;
        writeln!(f, "  golden rule       {:e}", ts.decoherence_gr)?;
        writeln!(f, "  interaction 1     {:e}", ts.decoherence_id1)?;
        write!(f, "  interaction 2     {:e}", ts.decoherence_id2)
    }
}
