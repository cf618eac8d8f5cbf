//! Time evolution of the Gaussian factor of the characteristic function and
//! the coherence measures built from it.
//!
//! The characteristic function of each component `ρ^{ij}` evolves as
//! `χ_t(x) = e^{∫b} χ₀(M_t⁻¹ x) exp(-xᵀ Σ_t x)` with `x = (μ, ν)` and
//! `Σ_t = [[α, β], [β, γ]]`. The propagator obeys `Ṁ = G M` with
//! `G = [[0, -(1+a)], [1, b]]`, and the Gaussian coefficients obey
//! `Σ̇ = -(GᵀΣ + ΣG) + [[0, -c], [-c, 2d]]` starting from zero.

use nalgebra::Matrix2;

use crate::coefficients::CoefficientTable;
use crate::error::{domain, Error, Result};
use crate::model::{ModelParams, Scenario};
use crate::simulation::Simulation;

/// Largest tolerated relative drift of `det M_t` from `exp ∫b`.
pub const DET_DRIFT_LIMIT: f64 = 1e-6;

/// Largest tolerated condition number of `I + D C_t`.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Snapshot of the propagated quantities at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationState {
    pub t: f64,
    pub gauss_alpha: f64,
    pub gauss_beta: f64,
    pub gauss_gamma: f64,
    pub propagator: Matrix2<f64>,
    /// `∫₀^t b ds`.
    pub drift_integral: f64,
}

impl PropagationState {
    pub fn initial() -> Self {
        Self {
            t: 0.0,
            gauss_alpha: 0.0,
            gauss_beta: 0.0,
            gauss_gamma: 0.0,
            propagator: Matrix2::identity(),
            drift_integral: 0.0,
        }
    }

    /// `[[α, β], [β, γ]]`.
    pub fn gauss_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.gauss_alpha,
            self.gauss_beta,
            self.gauss_beta,
            self.gauss_gamma,
        )
    }

    /// `|det M_t - e^{∫b}| / e^{∫b}`.
    pub fn det_drift(&self) -> f64 {
        let expected = self.drift_integral.exp();
        (self.propagator.determinant() - expected).abs() / expected
    }

    fn pack(&self) -> [f64; 8] {
        let m = &self.propagator;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(1, 0)],
            m[(1, 1)],
            self.gauss_alpha,
            self.gauss_beta,
            self.gauss_gamma,
            self.drift_integral,
        ]
    }

    fn unpack(t: f64, y: &[f64; 8]) -> Self {
        Self {
            t,
            gauss_alpha: y[4],
            gauss_beta: y[5],
            gauss_gamma: y[6],
            propagator: Matrix2::new(y[0], y[1], y[2], y[3]),
            drift_integral: y[7],
        }
    }
}

/// Result of [`evolve`]: one state per requested time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<PropagationState>,
    /// RK4 step used for the returned states.
    pub step: f64,
    /// Richardson estimate of the remaining relative error, from the
    /// difference to a run at twice the step.
    pub error_estimate: f64,
}

fn rhs(coeffs: [f64; 4], y: &[f64; 8]) -> [f64; 8] {
    let [a, b, c, d] = coeffs;
    let k = 1.0 + a;
    [
        -k * y[2],
        -k * y[3],
        y[0] + b * y[2],
        y[1] + b * y[3],
        -2.0 * y[5],
        k * y[4] - b * y[5] - y[6] - c,
        2.0 * k * y[5] - 2.0 * b * y[6] + 2.0 * d,
        b,
    ]
}

fn axpy(y: &[f64; 8], h: f64, k: &[f64; 8]) -> [f64; 8] {
    std::array::from_fn(|i| y[i] + h * k[i])
}

/// Classical RK4 over the sample grid, landing exactly on every sample.
fn integrate(table: &CoefficientTable, t_grid: &[f64], h_max: f64) -> Vec<[f64; 8]> {
    let mut y = PropagationState::initial().pack();
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(y);
    let coeffs = |t: f64| table.eval(t).as_array();
    let mut c_start = coeffs(0.0);
    for w in t_grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let n = ((t1 - t0) / h_max).ceil().max(1.0) as usize;
        let h = (t1 - t0) / n as f64;
        for i in 0..n {
            let t = t0 + h * i as f64;
            let c_mid = coeffs(t + 0.5 * h);
            let c_end = coeffs(if i + 1 == n { t1 } else { t + h });
            let k1 = rhs(c_start, &y);
            let k2 = rhs(c_mid, &axpy(&y, 0.5 * h, &k1));
            let k3 = rhs(c_mid, &axpy(&y, 0.5 * h, &k2));
            let k4 = rhs(c_end, &axpy(&y, h, &k3));
            y = std::array::from_fn(|j| y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]));
            c_start = c_end;
        }
        out.push(y);
    }
    out
}

/// Default RK4 step: `min(1/Λ, 1/Ω)/40`.
pub fn default_step(params: &ModelParams) -> f64 {
    params.fastest_time() / 40.0
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    match t_grid.first() {
        Some(&t0) if t0 == 0.0 => {}
        _ => return domain("time grid must start at t = 0"),
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return domain("time grid must be finite and strictly increasing");
    }
    Ok(())
}

/// Propagates from `t = 0` over `t_grid` using a prepared coefficient table.
///
/// The integration runs at the default step and at half of it; the
/// half-step states are returned and their difference sets the error
/// estimate.
pub fn evolve_with(table: &CoefficientTable, t_grid: &[f64]) -> Result<Trajectory> {
    check_grid(t_grid)?;
    let t_end = *t_grid.last().unwrap_or(&0.0);
    if !table.covers(t_end) {
        return domain(format!(
            "coefficient table ends at t = {} before the requested {t_end}",
            table.last_time()
        ));
    }
    let h = default_step(&table.spectral_density().params);
    let coarse = integrate(table, t_grid, h);
    let fine = integrate(table, t_grid, 0.5 * h);

    let mut scale = [0.0f64; 8];
    for y in &fine {
        for k in 0..8 {
            scale[k] = scale[k].max(y[k].abs());
        }
    }
    let mut error_estimate = 0.0f64;
    for (yc, yf) in coarse.iter().zip(&fine) {
        for k in 0..7 {
            if scale[k] > 0.0 {
                error_estimate = error_estimate.max((yf[k] - yc[k]).abs() / (15.0 * scale[k]));
            }
        }
    }

    let mut states = Vec::with_capacity(t_grid.len());
    for (&t, y) in t_grid.iter().zip(&fine) {
        let state = PropagationState::unpack(t, y);
        let drift = state.det_drift();
        if !(drift <= DET_DRIFT_LIMIT) {
            return Err(Error::Integration {
                t,
                reason: format!("det M_t drifted from exp ∫b by {drift:e} (relative)"),
            });
        }
        states.push(state);
    }
    Ok(Trajectory {
        states,
        step: 0.5 * h,
        error_estimate,
    })
}

/// Propagates from `t = 0` over `t_grid` for the given bath.
pub fn evolve(params: ModelParams, t_grid: &[f64]) -> Result<Trajectory> {
    Simulation::new(params).evolve(t_grid)
}

/// `C_t`, `A_t` and the separation-independent prefactor `P(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceMatrices {
    pub c_mat: Matrix2<f64>,
    pub a_mat: Matrix2<f64>,
    pub prefactor: f64,
}

/// `D = diag(1/σ, 4σ)` in the `(d_P, d_Q)` ordering.
pub fn width_matrix(sigma: f64) -> Matrix2<f64> {
    Matrix2::new(1.0 / sigma, 0.0, 0.0, 4.0 * sigma)
}

fn condition_number(m: &Matrix2<f64>) -> f64 {
    let s = m.singular_values();
    let (hi, lo) = (s.max(), s.min());
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Builds `C_t = M_tᵀ Σ_t M_t`, `A_t = C_t (I + D C_t)⁻¹` and
/// `P(t) = det(I + D C_t)^{-1/2} e^{∫b}` for packets of squared width `sigma`.
pub fn coherence_matrices(state: &PropagationState, sigma: f64) -> Result<CoherenceMatrices> {
    if !(sigma > 0.0) {
        return domain(format!("packet width must be positive, got {sigma}"));
    }
    let m = &state.propagator;
    let c = m.transpose() * state.gauss_matrix() * m;
    let c = 0.5 * (c + c.transpose());
    let shifted = Matrix2::identity() + width_matrix(sigma) * c;
    let condition = condition_number(&shifted);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::SingularMatrix {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    let inverse = shifted.try_inverse().ok_or(Error::SingularMatrix {
        condition,
        limit: CONDITION_LIMIT,
    })?;
    let a = c * inverse;
    let a = 0.5 * (a + a.transpose());
    let det = shifted.determinant();
    Ok(CoherenceMatrices {
        c_mat: c,
        a_mat: a,
        prefactor: state.drift_integral.exp() / det.sqrt(),
    })
}

/// Which coherence measure a curve reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    /// `N₁₂ = tr ρ¹²ρ¹²†`, normalised to 1 at `t = 0`.
    Norm,
    /// `n₁₂ = W_t(0,0)/W₀(0,0)` for symmetric superpositions; its exponent
    /// is half that of the norm.
    Indicator,
}

impl Measure {
    /// Factor multiplying the norm's exponent.
    pub fn exponent_factor(self) -> f64 {
        match self {
            Measure::Norm => 1.0,
            Measure::Indicator => 0.5,
        }
    }
}

/// `(d_P, d_Q) A_t (d_P, d_Q)ᵀ`.
pub fn decay_exponent(scenario: &Scenario, matrices: &CoherenceMatrices) -> f64 {
    let d = scenario.separation_vector();
    (d.transpose() * matrices.a_mat * d)[(0, 0)]
}

fn measure_value(
    measure: Measure,
    scenario: &Scenario,
    state: &PropagationState,
    include_prefactor: bool,
) -> Result<f64> {
    let m = coherence_matrices(state, scenario.sigma())?;
    let p = if include_prefactor { m.prefactor } else { 1.0 };
    Ok(p * (-measure.exponent_factor() * decay_exponent(scenario, &m)).exp())
}

/// Coherence norm `N₁₂(t) = P(t) exp{-(d_P, d_Q) A_t (d_P, d_Q)ᵀ}`.
pub fn coherence_norm(
    scenario: &Scenario,
    state: &PropagationState,
    include_prefactor: bool,
) -> Result<f64> {
    measure_value(Measure::Norm, scenario, state, include_prefactor)
}

/// Coherence indicator `n₁₂(t) = P(t) exp{-(d_P, d_Q) A_t (d_P, d_Q)ᵀ/2}`,
/// defined for symmetric placements only.
pub fn coherence_indicator(
    scenario: &Scenario,
    state: &PropagationState,
    include_prefactor: bool,
) -> Result<f64> {
    if !scenario.is_symmetric() {
        return domain("the coherence indicator needs packets placed symmetrically about the origin");
    }
    measure_value(Measure::Indicator, scenario, state, include_prefactor)
}

/// `n` equally spaced times on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return domain(format!("t_max must be positive and finite, got {t_max}"));
    }
    if n < 2 {
        return domain(format!("need at least two samples, got {n}"));
    }
    let last = (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i + 1 == n { t_max } else { t_max * i as f64 / last })
        .collect())
}

/// First time at which `values` falls to `level`, by linear interpolation
/// between samples.
pub fn crossing_time(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    if values.first().is_some_and(|&v| v <= level) {
        return times.first().copied();
    }
    for i in 1..values.len().min(times.len()) {
        let (v0, v1) = (values[i - 1], values[i]);
        if v1 <= level && v0 > level {
            let f = (v0 - level) / (v0 - v1);
            return Some(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    None
}

/// Sampled coherence decay from the exact formula, with optional columns
/// for the limiting laws.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    /// `n₁₂`.
    pub indicator: Vec<f64>,
    /// `N₁₂`.
    pub norm: Vec<f64>,
    pub include_prefactor: bool,
    pub golden_rule: Option<Vec<f64>>,
    pub id1: Option<Vec<f64>>,
    pub id2: Option<Vec<f64>>,
}

impl DecayCurve {
    pub fn from_trajectory(
        scenario: &Scenario,
        trajectory: &Trajectory,
        include_prefactor: bool,
    ) -> Result<Self> {
        let mut times = Vec::with_capacity(trajectory.states.len());
        let mut indicator = Vec::with_capacity(times.capacity());
        let mut norm = Vec::with_capacity(times.capacity());
        for state in &trajectory.states {
            times.push(state.t);
            indicator.push(coherence_indicator(scenario, state, include_prefactor)?);
            norm.push(coherence_norm(scenario, state, include_prefactor)?);
        }
        Ok(Self {
            times,
            indicator,
            norm,
            include_prefactor,
            golden_rule: None,
            id1: None,
            id2: None,
        })
    }

    pub fn values(&self, measure: Measure) -> &[f64] {
        match measure {
            Measure::Norm => &self.norm,
            Measure::Indicator => &self.indicator,
        }
    }

    /// First `e⁻¹` crossing of `n₁₂`, the reported decoherence time.
    pub fn decoherence_time(&self) -> Option<f64> {
        crossing_time(&self.times, &self.indicator, (-1.0f64).exp())
    }
}

/// Samples `n₁₂` and `N₁₂` on `n_samples` equally spaced times in `[0, t_max]`.
pub fn decay_curve(
    params: ModelParams,
    scenario: &Scenario,
    t_max: f64,
    n_samples: usize,
    include_prefactor: bool,
) -> Result<DecayCurve> {
    Simulation::new(params).decay_curve(scenario, t_max, n_samples, include_prefactor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use std::sync::OnceLock;

    fn defaults() -> &'static Simulation {
        static SIM: OnceLock<Simulation> = OnceLock::new();
        SIM.get_or_init(|| Simulation::new(ModelParams::DEFAULT))
    }

    fn closed() -> Simulation {
        Simulation::new(ModelParams::DEFAULT.with_damping_rate(0.0).unwrap())
    }

    #[test]
    fn initial_state_is_identity() {
        let traj = defaults().evolve(&[0.0, 0.1]).unwrap();
        let s = traj.states[0];
        assert_eq!(s, PropagationState::initial());
        let m = coherence_matrices(&s, 0.5).unwrap();
        assert_eq!(m.c_mat, Matrix2::zeros());
        assert_eq!(m.a_mat, Matrix2::zeros());
        assert_eq!(m.prefactor, 1.0);
    }

    #[test]
    fn closed_system_rotates() {
        let times = uniform_grid(7.0, 15).unwrap();
        let traj = closed().evolve(&times).unwrap();
        for s in &traj.states {
            let (sn, cs) = s.t.sin_cos();
            let expected = Matrix2::new(cs, -sn, sn, cs);
            assert!((s.propagator - expected).norm() < 1e-10, "t={}", s.t);
            assert_eq!(s.gauss_matrix(), Matrix2::zeros());
        }
    }

    #[test]
    fn determinant_tracks_drift_integral() {
        let times = uniform_grid(100.0, 201).unwrap();
        let traj = defaults().evolve(&times).unwrap();
        for s in &traj.states {
            assert!(s.det_drift() < 1e-8, "t={}: {}", s.t, s.det_drift());
        }
        assert!(traj.error_estimate < 1e-8);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(defaults().evolve(&[0.1, 0.2]).is_err());
        assert!(defaults().evolve(&[0.0, 0.2, 0.1]).is_err());
        assert!(defaults().evolve(&[]).is_err());
    }

    #[test]
    fn golden_rule_matrix_grows_linearly() {
        let sim = defaults();
        let t = 50.0;
        let traj = sim.evolve(&[0.0, t]).unwrap();
        let m = coherence_matrices(&traj.states[1], 0.5).unwrap();
        let d = sim.asymptotic().unwrap().d;
        let expected = d * t;
        assert!((m.c_mat[(0, 0)] / expected - 1.0).abs() < 0.05);
        assert!((m.c_mat[(1, 1)] / expected - 1.0).abs() < 0.05);
        assert!(m.c_mat[(0, 1)].abs() < 0.05 * expected);
    }

    #[test]
    fn a_matrix_matches_c_to_first_order() {
        let traj = defaults().evolve(&[0.0, 0.5, 3.0]).unwrap();
        for s in &traj.states[1..] {
            let m = coherence_matrices(s, 0.5).unwrap();
            let dc = (width_matrix(0.5) * m.c_mat).norm();
            assert!(dc < 0.1);
            assert!((m.a_mat - m.c_mat).norm() <= 1.5 * dc * m.c_mat.norm());
        }
    }

    #[test]
    fn symmetric_matrices() {
        let traj = defaults().evolve(&uniform_grid(20.0, 41).unwrap()).unwrap();
        for s in &traj.states {
            let m = coherence_matrices(s, 0.5).unwrap();
            assert!((m.c_mat - m.c_mat.transpose()).abs().max() < 1e-12);
            assert!((m.a_mat - m.a_mat.transpose()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn indicator_is_square_root_of_norm_without_prefactor() {
        let sim = defaults();
        let sc = Scenario::coherent(16.0, 3.0).unwrap();
        let curve = sim.decay_curve(&sc, 30.0, 31, false).unwrap();
        for (n, big) in curve.indicator.iter().zip(&curve.norm) {
            assert!((n * n - big).abs() <= 1e-14 * big.max(1e-300));
        }
        assert_eq!(curve.indicator[0], 1.0);
        assert_eq!(curve.norm[0], 1.0);
    }

    #[test]
    fn zero_separation_gives_prefactor() {
        let sc = Scenario::coherent(0.0, 0.0).unwrap();
        let traj = defaults().evolve(&[0.0, 10.0]).unwrap();
        let s = &traj.states[1];
        let p = coherence_matrices(s, 0.5).unwrap().prefactor;
        assert_eq!(coherence_norm(&sc, s, true).unwrap(), p);
    }

    #[test]
    fn indicator_rejects_offset_packets() {
        let sc = Scenario::coherent(16.0, 0.0).unwrap().with_midpoint(1.0, 0.0).unwrap();
        let s = PropagationState::initial();
        assert!(matches!(coherence_indicator(&sc, &s, true), Err(Error::Domain(_))));
        assert!(coherence_norm(&sc, &s, true).is_ok());
    }

    #[test]
    fn closed_system_keeps_coherence() {
        let sc = Scenario::coherent(16.0, 0.0).unwrap();
        let curve = closed().decay_curve(&sc, 5.0, 11, true).unwrap();
        for v in &curve.indicator {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coherence_falls_with_separation() {
        let traj = defaults().evolve(&[0.0, 4.0]).unwrap();
        let s = &traj.states[1];
        let mut last = 1.0;
        for dq in [0.0, 5.0, 10.0, 20.0, 40.0] {
            let sc = Scenario::coherent(dq, 0.0).unwrap();
            let v = coherence_indicator(&sc, s, true).unwrap();
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn crossing_interpolates_linearly() {
        let t = [0.0, 1.0, 2.0];
        let v = [1.0, 0.5, 0.0];
        assert_eq!(crossing_time(&t, &v, 0.25), Some(1.5));
        assert_eq!(crossing_time(&t, &v, -1.0), None);
    }

    #[test]
    fn uniform_grid_hits_end_points() {
        let g = uniform_grid(3.0, 4).unwrap();
        assert_eq!(g, vec![0.0, 1.0, 2.0, 3.0]);
        assert!(uniform_grid(3.0, 1).is_err());
        assert!(uniform_grid(0.0, 4).is_err());
    }
}
