//! Master-equation coefficients at second order in the coupling.
//!
//! In units `ħ = M = Ω = 1` the four coefficients are time integrals of the
//! bath kernels against the free oscillator motion,
//!
//! ```text
//! a_t = -∫₀^t K_I(s) cos s ds      b_t = ∫₀^t K_I(s) sin s ds
//! c_t =  ∫₀^t K_R(s) sin s ds      d_t = ∫₀^t K_R(s) cos s ds
//! ```
//!
//! `a` renormalises the potential (it softens the frequency), `b` is the
//! damping rate, `c` the cross diffusion and `d` the momentum diffusion.
//! They are computed by exchanging the `s` and `ω` integrals: the inner
//! time integrals are elementary, leaving one frequency quadrature shared
//! by all four.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::{thermal_occupation, SpectralDensity, TRUNCATION};
use crate::error::QuadratureError;
use crate::quadrature::{fourier_tail, Domain, Quadrature, WGK, XGK};

/// Coefficients `(a, b, c, d)` at time `t`. `t` is infinite for the
/// asymptotic set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoefficientSet {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CoefficientSet {
    pub fn as_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    fn from_array(t: f64, v: [f64; 4]) -> Self {
        Self {
            t,
            a: v[0],
            b: v[1],
            c: v[2],
            d: v[3],
        }
    }
}

const REL_TOL: f64 = 1e-10;
const MAGNITUDE_TOL: f64 = 1e-13;

/// `sin(xt)/x`, continuous through `x = 0`.
#[inline]
fn sinc_t(x: f64, t: f64) -> f64 {
    let y = x * t;
    if y.abs() < 1e-4 {
        t * (1.0 - y * y / 6.0)
    } else {
        y.sin() / x
    }
}

/// `(1 - cos xt)/x`, continuous through `x = 0`.
#[inline]
fn versine_t(x: f64, t: f64) -> f64 {
    let y = x * t;
    if y.abs() < 1e-4 {
        0.5 * y * t * (1.0 - y * y / 12.0)
    } else {
        let s = (0.5 * y).sin();
        2.0 * s * s / x
    }
}

/// Below this `ωt` the inner time integrals are summed on Kronrod nodes
/// instead of from their closed forms, which cancel badly when both `ωt`
/// and `t` are small.
const DIRECT_PHASE: f64 = 2.0;

/// `∫₀^t (sin ωs cos s, sin ωs sin s, cos ωs sin s, cos ωs cos s) ds`.
#[inline]
fn inner_integrals(w: f64, t: f64) -> [f64; 4] {
    if w * t < DIRECT_PHASE {
        let half = 0.5 * t;
        let mut acc = [0.0; 4];
        let mut add = |s: f64, weight: f64| {
            let (sw, cw) = (w * s).sin_cos();
            let (s1, c1) = s.sin_cos();
            acc[0] += weight * sw * c1;
            acc[1] += weight * sw * s1;
            acc[2] += weight * cw * s1;
            acc[3] += weight * cw * c1;
        };
        add(half, WGK[7] * half);
        for j in 0..7 {
            let dx = half * XGK[j];
            add(half - dx, WGK[j] * half);
            add(half + dx, WGK[j] * half);
        }
        return acc;
    }
    let (sm, sp) = (sinc_t(w - 1.0, t), sinc_t(w + 1.0, t));
    let (vm, vp) = (versine_t(w - 1.0, t), versine_t(w + 1.0, t));
    [
        0.5 * (vp + vm),
        0.5 * (sm - sp),
        0.5 * (vp - vm),
        0.5 * (sm + sp),
    ]
}

/// `(a, b, c, d, K_R, K_I)` at `t > 0`, all from one frequency quadrature.
/// The kernels come along because they are the time derivatives of the
/// coefficients up to a factor `cos t` or `sin t`.
pub(crate) fn coefficients_and_kernels(
    t: f64,
    sd: &SpectralDensity,
) -> Result<[f64; 6], QuadratureError> {
    let cut = sd.tail_start(t);
    let (st, ct) = t.sin_cos();
    let body = Quadrature::new(REL_TOL)
        .magnitude_tol(MAGNITUDE_TOL)
        .breakpoints([1.0, sd.params.cutoff()])
        .period(PI / t)
        .integrate_vec(
            |w| {
                let j = sd.j(w);
                let jc = sd.j_coth(w);
                let [sc, ss, cs, cc] = inner_integrals(w, t);
                let (sw, cw) = (w * t).sin_cos();
                [
                    -2.0 * j * sc / PI,
                    2.0 * j * ss / PI,
                    jc * cs / PI,
                    jc * cc / PI,
                    jc * cw / PI,
                    2.0 * j * sw / PI,
                ]
            },
            Domain::Finite(0.0, cut),
        )?
        .value;

    // Beyond the cut every integrand is a smooth part plus smooth envelopes
    // times e^{i(ω±1)t}.
    let smooth = Quadrature::new(REL_TOL)
        .abs_tol(1e-16 * sd.kernel_scale())
        .truncate_at(2.0 * cut)
        .integrate_vec(
            |w| {
                let (j, jc) = (sd.j(w), sd.j_coth(w));
                [
                    j * (1.0 / (w + 1.0) + 1.0 / (w - 1.0)),
                    jc * (1.0 / (w + 1.0) - 1.0 / (w - 1.0)),
                ]
            },
            Domain::SemiInfinite(cut),
        )?
        .value;
    let fp_j = fourier_tail(|w| sd.j(w) / (w + 1.0), cut, t);
    let fm_j = fourier_tail(|w| sd.j(w) / (w - 1.0), cut, t);
    let fp_jc = fourier_tail(|w| sd.j_coth(w) / (w + 1.0), cut, t);
    let fm_jc = fourier_tail(|w| sd.j_coth(w) / (w - 1.0), cut, t);
    let f_j = fourier_tail(|w| sd.j(w), cut, t);
    let f_jc = fourier_tail(|w| sd.j_coth(w), cut, t);
    let ep = Complex64::new(ct, st);
    let em = ep.conj();
    let tail = [
        -(smooth[0] - (ep * fp_j + em * fm_j).re) / PI,
        ((em * fm_j).im - (ep * fp_j).im) / PI,
        (smooth[1] - (ep * fp_jc).re + (em * fm_jc).re) / (2.0 * PI),
        ((em * fm_jc).im + (ep * fp_jc).im) / (2.0 * PI),
        f_jc.re / PI,
        2.0 * f_j.im / PI,
    ];
    Ok(std::array::from_fn(|k| body[k] + tail[k]))
}

/// Second-order coefficients at time `t ≥ 0`.
pub fn coefficients_at(t: f64, sd: &SpectralDensity) -> crate::Result<CoefficientSet> {
    if !(t >= 0.0) || !t.is_finite() {
        return crate::error::domain(format!("coefficients need finite t ≥ 0, got {t}"));
    }
    if t == 0.0 {
        return Ok(CoefficientSet::default());
    }
    let v = coefficients_and_kernels(t, sd)?;
    Ok(CoefficientSet::from_array(t, [v[0], v[1], v[2], v[3]]))
}

/// Principal value of `∫₀^∞ g(ω)/(ω-1) dω`, by subtracting `g(1)` on `[0, 2]`.
fn principal_value<F>(g: F, sd: &SpectralDensity) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    let g1 = g(1.0);
    let q = Quadrature::new(1e-12).abs_tol(1e-18 * sd.kernel_scale());
    let near = q
        .clone()
        .breakpoints([1.0])
        .integrate(|w| (g(w) - g1) / (w - 1.0), Domain::Finite(0.0, 2.0))?;
    let far = q
        .breakpoints([sd.params.cutoff()])
        .truncate_at(TRUNCATION * sd.params.cutoff())
        .integrate(|w| g(w) / (w - 1.0), Domain::SemiInfinite(2.0))?;
    Ok(near + far)
}

/// Limits of the coefficients for `t ≫ 1/Λ`. `b` and `d` are resonant
/// values of the spectral density; `a` and `c` are principal-value integrals.
pub fn coefficients_asymptotic(sd: &SpectralDensity) -> Result<CoefficientSet, QuadratureError> {
    let gamma = sd.params.damping_rate();
    let fc = sd.cutoff_factor(1.0);
    let n = thermal_occupation(1.0, sd.params.temperature()).unwrap_or(0.0);
    let a = -2.0 / PI * principal_value(|w| sd.j(w) * w / (w + 1.0), sd)?;
    let c = -principal_value(|w| sd.j_coth(w) / (w + 1.0), sd)? / PI;
    Ok(CoefficientSet {
        t: f64::INFINITY,
        a,
        b: gamma * fc,
        c,
        d: gamma * fc * (n + 0.5),
    })
}

/// Time derivatives of `(a, b, c, d)` given the kernels at `t`.
#[inline]
fn slopes(t: f64, kr: f64, ki: f64) -> [f64; 4] {
    let (s, c) = t.sin_cos();
    [-ki * c, ki * s, kr * s, kr * c]
}

/// Relative kernel size below which the coefficients are taken as settled.
const SETTLE_THRESHOLD: f64 = 1e-13;
const CHUNK: usize = 64;

/// Coefficients tabulated with their exact derivatives and interpolated by
/// cubic Hermite segments.
///
/// Nodes are spaced `min(1/Λ, 1/Ω)/40` over the first fifty cutoff times
/// (with geometric refinement towards the origin),
/// where the kernels live, and more sparsely afterwards. Once both kernels
/// have decayed the coefficients are constant and the table stops growing.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    sd: SpectralDensity,
    times: Vec<f64>,
    values: Vec<[f64; 4]>,
    slopes: Vec<[f64; 4]>,
    peak: [f64; 2],
    settled: bool,
}

impl CoefficientTable {
    pub fn new(sd: SpectralDensity) -> Result<Self, QuadratureError> {
        let k0 = crate::bath::b_squared(&sd)?;
        Ok(Self {
            sd,
            times: vec![0.0],
            values: vec![[0.0; 4]],
            slopes: vec![slopes(0.0, k0, 0.0)],
            peak: [k0.abs(), 0.0],
            settled: false,
        })
    }

    pub fn build(sd: SpectralDensity, t_end: f64) -> Result<Self, QuadratureError> {
        let mut table = Self::new(sd)?;
        table.extend_to(t_end)?;
        Ok(table)
    }

    pub fn spectral_density(&self) -> &SpectralDensity {
        &self.sd
    }

    /// The node after `t`. Steps double away from the origin up to the
    /// early spacing, since the coefficients start as powers of `t`.
    fn next_time(&self, t: f64) -> f64 {
        let fast = self.sd.params.fastest_time();
        let early = fast / 40.0;
        if t == 0.0 {
            return early / 4096.0;
        }
        if t < early {
            return (2.0 * t).min(early);
        }
        if t < 50.0 * fast {
            return t + early;
        }
        let thermal = match self.sd.params.temperature() {
            kt if kt > 0.0 => 1.0 / (2.0 * PI * kt),
            _ => 1.0,
        };
        t + (0.05 * thermal.min(1.0)).max(early)
    }

    /// Adds nodes until `t_end` is covered or the kernels have decayed.
    pub fn extend_to(&mut self, t_end: f64) -> Result<(), QuadratureError> {
        while !self.settled && self.last_time() < t_end {
            let mut next = Vec::with_capacity(CHUNK);
            let mut t = self.last_time();
            for _ in 0..CHUNK {
                t = self.next_time(t);
                next.push(t);
            }
            let rows: Vec<[f64; 6]> = next
                .par_iter()
                .map(|&t| coefficients_and_kernels(t, &self.sd))
                .collect::<Result<_, _>>()?;
            let mut tail = [0.0f64; 2];
            for (&t, row) in next.iter().zip(&rows) {
                self.times.push(t);
                self.values.push([row[0], row[1], row[2], row[3]]);
                self.slopes.push(slopes(t, row[4], row[5]));
                tail[0] = tail[0].max(row[4].abs());
                tail[1] = tail[1].max(row[5].abs());
            }
            self.peak[0] = self.peak[0].max(tail[0]);
            self.peak[1] = self.peak[1].max(tail[1]);
            self.settled = tail[0] <= SETTLE_THRESHOLD * self.peak[0]
                && tail[1] <= SETTLE_THRESHOLD * self.peak[1];
        }
        Ok(())
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Whether the coefficients have reached their constant values within the table.
    pub fn is_settled(&self) -> bool {
        self.settled
    }

    /// Whether `eval` is valid up to time `t`.
    pub fn covers(&self, t: f64) -> bool {
        self.settled || t <= self.last_time()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The tabulated nodes.
    pub fn nodes(&self) -> impl Iterator<Item = CoefficientSet> + '_ {
        self.times
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| CoefficientSet::from_array(t, v))
    }

    /// Interpolated coefficients. Past the last node they are held at the
    /// final values, which is exact once the table has settled.
    pub fn eval(&self, t: f64) -> CoefficientSet {
        let n = self.times.len();
        if t >= self.times[n - 1] {
            return CoefficientSet::from_array(t, self.values[n - 1]);
        }
        let i = self.times.partition_point(|&x| x <= t).saturating_sub(1);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let u = (t - t0) / h;
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let (f0, f1, m0, m1) = (
            &self.values[i],
            &self.values[i + 1],
            &self.slopes[i],
            &self.slopes[i + 1],
        );
        let v = std::array::from_fn(|k| h00 * f0[k] + h10 * h * m0[k] + h01 * f1[k] + h11 * h * m1[k]);
        CoefficientSet::from_array(t, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{b_squared, KernelCache};
    use crate::model::ModelParams;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn defaults() -> SpectralDensity {
        SpectralDensity::new(ModelParams::DEFAULT)
    }

    fn cache() -> &'static KernelCache {
        static CACHE: OnceLock<KernelCache> = OnceLock::new();
        CACHE.get_or_init(|| KernelCache::build(&defaults(), 10.0).unwrap())
    }

    /// Composite Simpson rule over `[0, t]` with the given even number of intervals.
    fn simpson(f: impl Fn(f64) -> f64, t: f64, n: usize) -> f64 {
        let h = t / n as f64;
        let mut sum = f(0.0) + f(t);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(i as f64 * h);
        }
        sum * h / 3.0
    }

    /// Nested time-domain oracle: the defining `s`-integrals over the
    /// tabulated kernels, with the damping kernel in closed form.
    fn time_domain(t: f64) -> [f64; 4] {
        let p = ModelParams::DEFAULT;
        let l = p.cutoff();
        let ki = |s: f64| 0.5 * p.damping_rate() * l.powi(3) * s * (-l * s).exp();
        let kr = |s: f64| cache().real(s);
        // the kernels are negligible past the cache horizon
        let span = t.min(cache().horizon());
        let n = 100_000;
        [
            -simpson(|s| ki(s) * s.cos(), span, n),
            simpson(|s| ki(s) * s.sin(), span, n),
            simpson(|s| kr(s) * s.sin(), span, n),
            simpson(|s| kr(s) * s.cos(), span, n),
        ]
    }

    #[test]
    fn zero_time_is_zero() {
        let c = coefficients_at(0.0, &defaults()).unwrap();
        assert_eq!(c.as_array(), [0.0; 4]);
    }

    #[test]
    fn rejects_negative_time() {
        assert!(coefficients_at(-1.0, &defaults()).is_err());
    }

    #[test]
    fn diffusion_grows_linearly_at_first() {
        let sd = defaults();
        let t = 0.01 / sd.params.cutoff();
        let d = coefficients_at(t, &sd).unwrap().d;
        let b2 = b_squared(&sd).unwrap();
        assert!((d / (b2 * t) - 1.0).abs() < 0.01);
    }

    #[test]
    fn kernels_from_shared_quadrature_match_direct_ones() {
        let sd = defaults();
        for &t in &[1e-3, 0.02, 0.7] {
            let v = coefficients_and_kernels(t, &sd).unwrap();
            let kr = crate::bath::kernel_real(t, &sd).unwrap();
            let ki = crate::bath::kernel_imag(t, &sd).unwrap();
            let scale = b_squared(&sd).unwrap();
            assert!((v[4] - kr).abs() < 1e-9 * scale, "t={t}");
            assert!((v[5] - ki).abs() < 1e-9 * scale, "t={t}");
        }
    }

    #[test]
    fn matches_time_domain_oracle_at_five_periods() {
        let sd = defaults();
        let t = 5.0;
        let c = coefficients_at(t, &sd).unwrap().as_array();
        let o = time_domain(t);
        for k in 0..4 {
            assert!((c[k] - o[k]).abs() < 1e-6 * o[k].abs(), "{k}: {} vs {}", c[k], o[k]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]
        #[test]
        fn matches_time_domain_oracle(t in 0.002f64..8.0) {
            let c = coefficients_at(t, &defaults()).unwrap().as_array();
            let o = time_domain(t);
            for k in 0..4 {
                prop_assert!((c[k] - o[k]).abs() < 1e-6 * o[k].abs(), "t={} k={}: {} vs {}", t, k, c[k], o[k]);
            }
        }
    }

    #[test]
    fn asymptotic_values_have_closed_forms() {
        let sd = defaults();
        let inf = coefficients_asymptotic(&sd).unwrap();
        let fc = 1.0 / (1.0f64 + 1e-4).powi(2);
        let n = 1.0 / (0.05f64.exp() - 1.0);
        assert!((inf.d - 1e-5 * fc * (n + 0.5)).abs() < 1e-4 * inf.d);
        assert!((inf.d - 2.0000e-4).abs() < 1e-7);
        assert!((inf.b / 1e-5 - fc).abs() < 1e-6);
        // -(2γ/π) P∫ ω²f_c/(ω²-1) = -γΛ³(Λ²-1)/(2(Λ²+1)²) for the squared-Drude cutoff
        let l = sd.params.cutoff();
        let a = -1e-5 * l.powi(3) * (l * l - 1.0) / (2.0 * (l * l + 1.0).powi(2));
        assert!((inf.a - a).abs() < 1e-8 * a.abs(), "{} vs {a}", inf.a);
    }

    #[test]
    fn zero_temperature_diffusion_is_half_resonant_density() {
        let sd = SpectralDensity::new(ModelParams::DEFAULT.with_temperature(0.0).unwrap());
        let inf = coefficients_asymptotic(&sd).unwrap();
        assert!((inf.d - 0.5 * 1e-5 * sd.cutoff_factor(1.0)).abs() < 1e-15);
    }

    #[test]
    fn approach_asymptotic_values() {
        let sd = defaults();
        let inf = coefficients_asymptotic(&sd).unwrap().as_array();
        for &t in &[0.6, 2.0, 13.0] {
            let c = coefficients_at(t, &sd).unwrap().as_array();
            for k in 0..4 {
                assert!((c[k] - inf[k]).abs() < 0.01 * inf[k].abs(), "t={t} k={k}: {} vs {}", c[k], inf[k]);
            }
        }
    }

    #[test]
    fn short_time_exponents() {
        let sd = defaults();
        let l = sd.params.cutoff();
        let (t0, t1) = (1e-4 / l, 1e-3 / l);
        let c0 = coefficients_at(t0, &sd).unwrap().as_array();
        let c1 = coefficients_at(t1, &sd).unwrap().as_array();
        let expected = [2.0, 3.0, 2.0, 1.0];
        for k in 0..4 {
            let slope = (c1[k].abs() / c0[k].abs()).ln() / (t1 / t0).ln();
            assert!((slope - expected[k]).abs() < 0.1, "k={k}: slope {slope}");
        }
    }

    #[test]
    fn table_interpolates_direct_values() {
        let sd = defaults();
        let table = CoefficientTable::build(sd, 3.0).unwrap();
        assert!(table.is_settled());
        let inf = coefficients_asymptotic(&sd).unwrap().as_array();
        for &t in &[3.3e-6, 1.3e-4, 3.21e-3, 0.0177, 0.1234, 0.4321] {
            let direct = coefficients_at(t, &sd).unwrap().as_array();
            let interp = table.eval(t).as_array();
            for k in 0..4 {
                let tol = 1e-6 * direct[k].abs() + 1e-9 * inf[k].abs();
                assert!((interp[k] - direct[k]).abs() < tol, "t={t} k={k}");
            }
        }
        let late = table.eval(50.0).as_array();
        for k in 0..4 {
            assert!((late[k] - inf[k]).abs() < 1e-3 * inf[k].abs());
        }
    }
}
