//! Ohmic bath: spectral density, thermal occupation, and the real and
//! imaginary parts of the bath correlation function.
//!
//! The correlation kernels are frequency integrals of the spectral density,
//!
//! ```text
//! K_R(t) = (1/π) ∫₀^∞ dω J(ω) coth(ω/2kT) cos ωt      (symmetrised, ½⟨{B(t),B}⟩)
//! K_I(t) = (2/π) ∫₀^∞ dω J(ω) sin ωt                  (damping kernel, ⟨i[B(t),B]⟩)
//! ```
//!
//! with `J(ω) = γ ω f_c(ω/Λ)`. Both are evaluated by adaptive quadrature on
//! `[0, ω_c]`, pre-split into panels of width `π/|t|`, plus an asymptotic
//! expansion of the oscillatory tail beyond `ω_c = max(10Λ, 400/|t|)`.

use rayon::prelude::*;

use crate::error::{domain, QuadratureError, Result};
use crate::model::ModelParams;
use crate::quadrature::{fourier_tail, Domain, Quadrature};
use num_complex::Complex64;

/// Smallest multiple of the cutoff at which Fourier integrals switch to
/// their asymptotic tail.
pub const TRUNCATION: f64 = 10.0;

/// Minimum phase `ω_c t` accumulated before the asymptotic tail takes over.
pub const TAIL_PHASE: f64 = 400.0;

/// Default relative tolerance of the frequency integrals.
pub const KERNEL_REL_TOL: f64 = 1e-10;

/// High-frequency regularisation of the spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutoffForm {
    /// `f_c(x) = 1/(1+x²)²`.
    #[default]
    DrudeSquared,
}

impl CutoffForm {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            CutoffForm::DrudeSquared => {
                let d = 1.0 + x * x;
                1.0 / (d * d)
            }
        }
    }
}

/// Ohmic spectral density `J(ω) = Mγω f_c(ω/Λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity {
    pub params: ModelParams,
    pub cutoff_form: CutoffForm,
}

impl SpectralDensity {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            cutoff_form: CutoffForm::default(),
        }
    }

    #[inline]
    pub fn cutoff_factor(&self, omega: f64) -> f64 {
        self.cutoff_form.eval(omega / self.params.cutoff())
    }

    /// `J(ω)` without argument checking.
    #[inline]
    pub(crate) fn j(&self, omega: f64) -> f64 {
        self.params.damping_rate() * omega * self.cutoff_factor(omega)
    }

    /// `J(ω) coth(ω/2kT)`, finite as `ω → 0` where it tends to `2γkT`.
    #[inline]
    pub(crate) fn j_coth(&self, omega: f64) -> f64 {
        self.params.damping_rate()
            * omega_coth(omega, self.params.temperature())
            * self.cutoff_factor(omega)
    }

    /// Magnitude used to set absolute tolerances of kernel integrals.
    pub(crate) fn kernel_scale(&self) -> f64 {
        let p = &self.params;
        (p.damping_rate() * p.cutoff() * (p.temperature() + p.cutoff())).max(f64::MIN_POSITIVE)
    }

    /// Split point between explicit panels and the asymptotic tail for
    /// Fourier integrals at time `t > 0`.
    pub(crate) fn tail_start(&self, t: f64) -> f64 {
        (TRUNCATION * self.params.cutoff()).max(TAIL_PHASE / t)
    }

    /// `∫₀^∞ g(ω) e^{iωt} dω` for `t > 0`.
    pub(crate) fn fourier<F>(
        &self,
        g: F,
        t: f64,
        rel_tol: f64,
    ) -> std::result::Result<Complex64, QuadratureError>
    where
        F: Fn(f64) -> f64,
    {
        let cut = self.tail_start(t);
        let body = Quadrature::new(rel_tol)
            .abs_tol(1e-14 * self.kernel_scale())
            .breakpoints([1.0, self.params.cutoff()])
            .period(std::f64::consts::PI / t)
            .integrate_vec(
                |w| {
                    let (s, c) = (w * t).sin_cos();
                    let v = g(w);
                    [v * c, v * s]
                },
                Domain::Finite(0.0, cut),
            )?;
        Ok(Complex64::new(body.value[0], body.value[1]) + fourier_tail(g, cut, t))
    }
}

/// `J(ω)`; negative frequencies are rejected.
pub fn spectral_density(omega: f64, sd: &SpectralDensity) -> Result<f64> {
    if !(omega >= 0.0) {
        return domain(format!("spectral density needs ω ≥ 0, got {omega}"));
    }
    Ok(sd.j(omega))
}

/// Bose occupation `1/(e^{ω/kT} - 1)`.
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return domain(format!("thermal occupation needs ω > 0, got {omega}"));
    }
    if temperature < 0.0 {
        return domain(format!("temperature must be nonnegative, got {temperature}"));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = omega / temperature;
    if x < 1e-6 {
        Ok(1.0 / x - 0.5 + x / 12.0)
    } else {
        Ok(1.0 / x.exp_m1())
    }
}

/// `ω coth(ω/2kT) = ω (2n_th + 1)`, including its `ω → 0` limit `2kT`.
#[inline]
pub(crate) fn omega_coth(omega: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        return omega;
    }
    let y = 0.5 * omega / temperature;
    if y < 1e-4 {
        // y coth y = 1 + y²/3 - y⁴/45
        let y2 = y * y;
        2.0 * temperature * (1.0 + y2 / 3.0 - y2 * y2 / 45.0)
    } else if y > 40.0 {
        omega
    } else {
        omega * (1.0 + 2.0 / (2.0 * y).exp_m1())
    }
}

/// Symmetrised correlation `½⟨{B(t), B}⟩`.
pub fn kernel_real(t: f64, sd: &SpectralDensity) -> std::result::Result<f64, QuadratureError> {
    kernel_real_tol(t, sd, KERNEL_REL_TOL)
}

pub(crate) fn kernel_real_tol(
    t: f64,
    sd: &SpectralDensity,
    rel_tol: f64,
) -> std::result::Result<f64, QuadratureError> {
    let t = t.abs();
    if t == 0.0 {
        return b_squared(sd);
    }
    let v = sd.fourier(|w| sd.j_coth(w), t, rel_tol)?;
    Ok(v.re / std::f64::consts::PI)
}

/// Damping kernel `⟨(i/ħ)[B(t), B]⟩`; independent of temperature.
pub fn kernel_imag(t: f64, sd: &SpectralDensity) -> std::result::Result<f64, QuadratureError> {
    kernel_imag_tol(t, sd, KERNEL_REL_TOL)
}

pub(crate) fn kernel_imag_tol(
    t: f64,
    sd: &SpectralDensity,
    rel_tol: f64,
) -> std::result::Result<f64, QuadratureError> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let v = sd.fourier(|w| sd.j(w), t.abs(), rel_tol)?;
    Ok(t.signum() * 2.0 * v.im / std::f64::consts::PI)
}

/// Kernel pair at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub t: f64,
    pub real_part: f64,
    pub imag_part: f64,
}

pub fn kernel_sample(t: f64, sd: &SpectralDensity) -> std::result::Result<KernelSample, QuadratureError> {
    Ok(KernelSample {
        t,
        real_part: kernel_real(t, sd)?,
        imag_part: kernel_imag(t, sd)?,
    })
}

/// Initial bath-operator variance `⟨B²⟩ = (ħMγ/π) ∫ dω ω (2n_th+1) f_c(ω/Λ)`.
pub fn b_squared(sd: &SpectralDensity) -> std::result::Result<f64, QuadratureError> {
    let v = Quadrature::new(1e-12)
        .abs_tol(1e-16 * sd.kernel_scale())
        .breakpoints([sd.params.cutoff()])
        .truncate_at(TRUNCATION * sd.params.cutoff())
        .integrate(|w| sd.j_coth(w), Domain::SemiInfinite(0.0))?;
    Ok(v / std::f64::consts::PI)
}

/// Kernels tabulated on a uniform grid, interpolated with four-point
/// Lagrange cubics. The real kernel is even and the imaginary one odd, which
/// supplies the ghost points left of the origin. The first few steps are
/// also tabulated on a much finer grid, because the real kernel carries a
/// `t² ln t` term at the origin that a cubic on the coarse grid misses.
#[derive(Debug, Clone)]
pub struct KernelCache {
    coarse: Table,
    fine: Table,
    /// Whether both kernels have decayed to negligible values by the end of
    /// the table; if so they are zero beyond it.
    decayed: bool,
}

#[derive(Debug, Clone, Default)]
struct Table {
    step: f64,
    real: Vec<f64>,
    imag: Vec<f64>,
}

/// Relative size below which a kernel is considered to have decayed.
const DECAY_THRESHOLD: f64 = 1e-13;
/// Coarse steps covered by the fine table, and its refinement factor.
const FINE_SPAN: usize = 4;
const FINE_FACTOR: usize = 64;

impl Table {
    fn column(&self, even: bool) -> &[f64] {
        if even {
            &self.real
        } else {
            &self.imag
        }
    }

    fn extend(&mut self, sd: &SpectralDensity, count: usize) -> std::result::Result<(), QuadratureError> {
        let start = self.real.len();
        let step = self.step;
        let samples: Vec<(f64, f64)> = (start..start + count)
            .into_par_iter()
            .map(|i| {
                let t = i as f64 * step;
                Ok((kernel_real(t, sd)?, kernel_imag(t, sd)?))
            })
            .collect::<std::result::Result<_, QuadratureError>>()?;
        for (r, i) in samples {
            self.real.push(r);
            self.imag.push(i);
        }
        Ok(())
    }

    /// `None` when `t` lies beyond the interpolation support.
    fn interp(&self, data: &[f64], even: bool, t: f64) -> Option<f64> {
        let x = t / self.step;
        let i = x.floor() as isize;
        if i as usize + 2 >= data.len() {
            return None;
        }
        let at = |k: isize| -> f64 {
            if k >= 0 {
                data[k as usize]
            } else if even {
                data[(-k) as usize]
            } else {
                -data[(-k) as usize]
            }
        };
        let u = x - i as f64;
        let (f0, f1, f2, f3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        // Lagrange cubic through nodes -1, 0, 1, 2
        let c0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
        let c1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
        let c2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
        let c3 = (u + 1.0) * u * (u - 1.0) / 6.0;
        Some(c0 * f0 + c1 * f1 + c2 * f2 + c3 * f3)
    }
}

impl KernelCache {
    /// Grid spacing used for the cached kernels: `min(1/Λ, 1/Ω)/50`.
    pub fn default_step(params: &ModelParams) -> f64 {
        params.fastest_time() / 50.0
    }

    /// Tabulates the kernels until they decay or `t_end` is reached.
    pub fn build(sd: &SpectralDensity, t_end: f64) -> std::result::Result<Self, QuadratureError> {
        let step = Self::default_step(&sd.params);
        let mut fine = Table {
            step: step / FINE_FACTOR as f64,
            ..Table::default()
        };
        fine.extend(sd, (FINE_SPAN + 3) * FINE_FACTOR)?;
        let mut coarse = Table {
            step,
            ..Table::default()
        };
        let chunk = 256usize;
        let mut decayed = false;
        let mut peak_real = 0.0f64;
        let mut peak_imag = 0.0f64;
        loop {
            let start = coarse.real.len();
            coarse.extend(sd, chunk)?;
            let tail_real = coarse.real[start..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let tail_imag = coarse.imag[start..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            peak_real = peak_real.max(tail_real);
            peak_imag = peak_imag.max(tail_imag);
            if tail_real <= DECAY_THRESHOLD * peak_real && tail_imag <= DECAY_THRESHOLD * peak_imag
            {
                decayed = true;
                break;
            }
            if (coarse.real.len() - 3) as f64 * step >= t_end {
                break;
            }
        }
        Ok(Self {
            coarse,
            fine,
            decayed,
        })
    }

    pub fn step(&self) -> f64 {
        self.coarse.step
    }

    /// Last time with full interpolation support.
    pub fn horizon(&self) -> f64 {
        (self.coarse.real.len().saturating_sub(3)) as f64 * self.coarse.step
    }

    pub fn has_decayed(&self) -> bool {
        self.decayed
    }

    /// The coarse tabulation nodes.
    pub fn nodes(&self) -> impl Iterator<Item = KernelSample> + '_ {
        let step = self.coarse.step;
        self.coarse
            .real
            .iter()
            .zip(&self.coarse.imag)
            .enumerate()
            .map(move |(i, (&r, &m))| KernelSample {
                t: i as f64 * step,
                real_part: r,
                imag_part: m,
            })
    }

    pub fn real(&self, t: f64) -> f64 {
        self.lookup(true, t.abs())
    }

    pub fn imag(&self, t: f64) -> f64 {
        t.signum() * self.lookup(false, t.abs())
    }

    fn lookup(&self, even: bool, t: f64) -> f64 {
        if t < FINE_SPAN as f64 * self.coarse.step {
            if let Some(v) = self.fine.interp(self.fine.column(even), even, t) {
                return v;
            }
        }
        let data = self.coarse.column(even);
        match self.coarse.interp(data, even, t) {
            Some(v) => v,
            None if self.decayed => 0.0,
            // not tabulated that far; hold the last node
            None => data[data.len() - 1],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn defaults() -> SpectralDensity {
        SpectralDensity::new(ModelParams::DEFAULT)
    }

    fn at_temperature(t: f64) -> SpectralDensity {
        SpectralDensity::new(ModelParams::DEFAULT.with_temperature(t).unwrap())
    }

    /// Closed form of the damping kernel for the squared-Drude cutoff:
    /// `(2γ/π)Λ² ∫ x sin(xΛt)/(1+x²)² dx = γΛ³ t e^{-Λt}/2`.
    fn imag_closed_form(t: f64, p: &ModelParams) -> f64 {
        let l = p.cutoff();
        0.5 * p.damping_rate() * l.powi(3) * t * (-l * t.abs()).exp()
    }

    /// Brute-force trapezoid over `[0, 2000Λ]` with two million points.
    fn trapezoid_oracle(f: impl Fn(f64) -> f64, upper: f64) -> f64 {
        let n = 2_000_000usize;
        let h = upper / n as f64;
        let mut sum = 0.5 * (f(0.0) + f(upper));
        for i in 1..n {
            sum += f(i as f64 * h);
        }
        sum * h
    }

    #[test]
    fn spectral_density_values() {
        let sd = defaults();
        assert_eq!(spectral_density(0.0, &sd).unwrap(), 0.0);
        let l = sd.params.cutoff();
        let at_cutoff = spectral_density(l, &sd).unwrap();
        assert!((at_cutoff - 1e-5 * l / 4.0).abs() < 1e-15);
        let at_one = spectral_density(1.0, &sd).unwrap();
        assert!((at_one / 1e-5 - 1.0 / (1.0f64 + 1e-4).powi(2)).abs() < 1e-14);
        assert!((at_one / 1e-5 - 0.9998).abs() < 1e-7);
        assert!(spectral_density(-1.0, &sd).is_err());
    }

    #[test]
    fn spectral_density_is_ohmic_at_low_frequency() {
        let sd = defaults();
        let w = 1e-8;
        assert!((spectral_density(w, &sd).unwrap() / w - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn thermal_occupation_values() {
        let n = thermal_occupation(1.0, 20.0).unwrap();
        assert!((n - 1.0 / (0.05f64.exp() - 1.0)).abs() < 1e-12);
        assert!((n - 19.5042).abs() < 1e-4);
        assert_eq!(thermal_occupation(3.0, 0.0).unwrap(), 0.0);
        let one = thermal_occupation(1.0, 1.0 / 2f64.ln()).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        assert!(thermal_occupation(0.0, 1.0).is_err());
        // series branch joins the exact expression smoothly
        let x = 1e-7;
        let series = thermal_occupation(x, 1.0).unwrap();
        assert!((series - (1.0 / x - 0.5 + x / 12.0)).abs() < 1e-9);
    }

    #[test]
    fn omega_coth_has_finite_zero_limit() {
        assert!((omega_coth(0.0, 20.0) - 40.0).abs() < 1e-12);
        let w = 3.0;
        let direct = w * (2.0 * thermal_occupation(w, 20.0).unwrap() + 1.0);
        assert!((omega_coth(w, 20.0) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn real_kernel_at_origin_is_b_squared() {
        let sd = defaults();
        let k0 = kernel_real(0.0, &sd).unwrap();
        let b2 = b_squared(&sd).unwrap();
        assert!((k0 - b2).abs() < 1e-8 * b2);
    }

    #[test]
    fn imaginary_kernel_vanishes_at_origin() {
        assert_eq!(kernel_imag(0.0, &defaults()).unwrap(), 0.0);
    }

    #[test]
    fn imaginary_kernel_matches_closed_form() {
        let sd = defaults();
        for &t in &[1e-4, 1e-3, 0.01, 0.03, 0.1] {
            let k = kernel_imag(t, &sd).unwrap();
            let exact = imag_closed_form(t, &sd.params);
            assert!((k - exact).abs() < 1e-8 * exact + 1e-14 * sd.kernel_scale(), "t={t}: {k} vs {exact}");
        }
    }

    #[test]
    fn imaginary_kernel_is_temperature_independent() {
        let t = 1.0 / 100.0;
        let hot = kernel_imag(t, &at_temperature(20.0)).unwrap();
        let cold = kernel_imag(t, &at_temperature(0.0)).unwrap();
        assert!((hot - cold).abs() <= 1e-12 * hot.abs());
    }

    #[test]
    fn real_kernel_matches_trapezoid_oracle() {
        let sd = defaults();
        let t = 10.0 / sd.params.cutoff();
        let upper = 2000.0 * sd.params.cutoff();
        let oracle = trapezoid_oracle(|w| sd.j_coth(w) * (w * t).cos(), upper) / PI;
        let k = kernel_real(t, &sd).unwrap();
        assert!((k - oracle).abs() < 1e-6 * oracle.abs(), "{k} vs {oracle}");
    }

    #[test]
    fn imaginary_kernel_matches_trapezoid_oracle() {
        let sd = defaults();
        let t = 1.0 / sd.params.cutoff();
        let upper = 2000.0 * sd.params.cutoff();
        let oracle = 2.0 * trapezoid_oracle(|w| sd.j(w) * (w * t).sin(), upper) / PI;
        let k = kernel_imag(t, &sd).unwrap();
        assert!((k - oracle).abs() < 1e-6 * oracle.abs(), "{k} vs {oracle}");
    }

    #[test]
    fn b_squared_zero_temperature_closed_form() {
        let sd = at_temperature(0.0);
        let l = sd.params.cutoff();
        let exact = 1e-5 * l * l / (2.0 * PI);
        let b2 = b_squared(&sd).unwrap();
        assert!((b2 - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn b_squared_high_temperature_limit() {
        let sd = at_temperature(1e4);
        let classical = 1e4 * 1e-5 * sd.params.cutoff() / 2.0;
        let b2 = b_squared(&sd).unwrap();
        assert!((b2 / classical - 1.0).abs() < 0.02);
    }

    #[test]
    fn b_squared_default_sits_between_limit_bounds() {
        // coth y lies between max(1, 1/y) and 1 + 1/y
        let sd = defaults();
        let l = sd.params.cutoff();
        let quantum = 1e-5 * l * l / (2.0 * PI);
        let classical = 20.0 * 1e-5 * l / 2.0;
        let b2 = b_squared(&sd).unwrap();
        assert!(b2 > quantum.max(classical));
        assert!(b2 < quantum + classical);
    }

    #[test]
    fn real_kernel_decays_on_cutoff_scale() {
        let sd = defaults();
        let k0 = kernel_real(0.0, &sd).unwrap();
        let late = kernel_real(100.0 / sd.params.cutoff(), &sd).unwrap();
        assert!(late.abs() < 1e-3 * k0);
    }

    #[test]
    fn cache_interpolates_kernels() {
        let sd = defaults();
        let cache = KernelCache::build(&sd, 1.0).unwrap();
        assert!(cache.has_decayed());
        let scale = cache.real(0.0);
        for &t in &[3.3e-5, 1.234e-3, 7.77e-3, 0.02345] {
            let direct = kernel_real(t, &sd).unwrap();
            assert!((cache.real(t) - direct).abs() < 1e-6 * scale, "t={t} {} {direct}", cache.real(t));
            let exact = imag_closed_form(t, &sd.params);
            assert!((cache.imag(t) - exact).abs() < 1e-6 * exact.abs().max(1e-3 * scale));
            assert!((cache.imag(-t) + cache.imag(t)).abs() < 1e-18);
        }
        assert_eq!(cache.real(10.0), 0.0);
    }
}
