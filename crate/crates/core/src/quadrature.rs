//! Globally adaptive Gauss–Kronrod quadrature.
//!
//! The integrator works on vector-valued integrands (`[f64; N]`) so that the
//! four master-equation coefficients, which share one frequency integral,
//! are refined on a common set of panels. Semi-infinite domains are split
//! into a finite part, optionally pre-divided into panels of a given width
//! for oscillatory integrands, and a tail mapped onto `(0, 1]` through
//! `x = cut / u`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::QuadratureError;

// 15-point Kronrod extension of the 7-point Gauss rule. Abscissae are listed
// from the outermost to the centre; the Gauss points are the odd entries.
pub(crate) const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

pub(crate) const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Integration domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Finite(f64, f64),
    /// `[a, ∞)`.
    SemiInfinite(f64),
}

/// Result of an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub panels: usize,
}

/// Adaptive integrator configuration.
#[derive(Debug, Clone)]
pub struct Quadrature {
    rel_tol: f64,
    abs_tol: f64,
    magnitude_tol: f64,
    max_panels: usize,
    breakpoints: Vec<f64>,
    period: Option<f64>,
    truncate_at: Option<f64>,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            magnitude_tol: 0.0,
            max_panels: 400_000,
            breakpoints: Vec::new(),
            period: None,
            truncate_at: None,
        }
    }
}

impl Quadrature {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    /// Accept errors below `tol · ∫|f|`, per component. Useful when the
    /// integral is much smaller than its integrand through cancellation.
    pub fn magnitude_tol(mut self, tol: f64) -> Self {
        self.magnitude_tol = tol;
        self
    }

    pub fn max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }

    /// Points where the integrand is known to have structure.
    pub fn breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(points);
        self
    }

    /// Pre-divides the finite part of the domain into panels no wider than `width`.
    pub fn period(mut self, width: f64) -> Self {
        if width.is_finite() && width > 0.0 {
            self.period = Some(width);
        }
        self
    }

    /// On semi-infinite domains, the point beyond which the mapped tail is used.
    pub fn truncate_at(mut self, cut: f64) -> Self {
        self.truncate_at = Some(cut);
        self
    }

    pub fn integrate<F>(&self, f: F, domain: Domain) -> Result<f64, QuadratureError>
    where
        F: Fn(f64) -> f64,
    {
        self.integrate_vec(|x| [f(x)], domain).map(|e| e.value[0])
    }

    pub fn integrate_vec<const N: usize, F>(
        &self,
        f: F,
        domain: Domain,
    ) -> Result<Estimate<N>, QuadratureError>
    where
        F: Fn(f64) -> [f64; N],
    {
        let mut seeds = Vec::new();
        match domain {
            Domain::Finite(a, b) => {
                if a == b {
                    return Ok(Estimate {
                        value: [0.0; N],
                        error: [0.0; N],
                        panels: 0,
                    });
                }
                let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
                self.seed_finite(lo, hi, &mut seeds);
                let mut est = self.refine(&f, seeds)?;
                for v in est.value.iter_mut() {
                    *v *= sign;
                }
                return Ok(est);
            }
            Domain::SemiInfinite(a) => match self.truncate_at {
                Some(cut) if cut > a => {
                    self.seed_finite(a, cut, &mut seeds);
                    seeds.push(Seed {
                        lo: 0.0,
                        hi: 1.0,
                        map: Map::Reciprocal { scale: cut },
                    });
                }
                _ => seeds.push(Seed {
                    lo: 0.0,
                    hi: 1.0,
                    map: Map::Shifted { origin: a },
                }),
            },
        }
        self.refine(&f, seeds)
    }

    fn seed_finite(&self, lo: f64, hi: f64, seeds: &mut Vec<Seed>) {
        let mut cuts: Vec<f64> = self
            .breakpoints
            .iter()
            .copied()
            .filter(|&x| x > lo && x < hi)
            .collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        cuts.dedup();
        // keep the seed count well inside the panel budget
        let budget = (self.max_panels / 4).max(1);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let pieces = match self.period {
                Some(p) => (((b - a) / p).ceil() as usize).clamp(1, budget),
                None => 1,
            };
            let h = (b - a) / pieces as f64;
            for i in 0..pieces {
                let x0 = a + h * i as f64;
                let x1 = if i + 1 == pieces { b } else { a + h * (i + 1) as f64 };
                seeds.push(Seed {
                    lo: x0,
                    hi: x1,
                    map: Map::Identity,
                });
            }
        }
    }

    fn refine<const N: usize, F>(
        &self,
        f: &F,
        seeds: Vec<Seed>,
    ) -> Result<Estimate<N>, QuadratureError>
    where
        F: Fn(f64) -> [f64; N],
    {
        let mut panels: Vec<Panel<N>> = seeds.into_iter().map(|s| Panel::new(f, s)).collect();
        let mut total = [0.0; N];
        let mut error = [0.0; N];
        let mut magnitude = [0.0; N];
        for p in &panels {
            for k in 0..N {
                total[k] += p.value[k];
                error[k] += p.error[k];
                magnitude[k] += p.magnitude[k];
            }
        }
        // error scales frozen from the first pass so heap keys stay valid
        let target = |total: &[f64; N], magnitude: &[f64; N], k: usize| {
            (self.rel_tol * total[k].abs())
                .max(self.abs_tol)
                .max(self.magnitude_tol * magnitude[k])
        };
        let scale: [f64; N] =
            std::array::from_fn(|k| target(&total, &magnitude, k).max(f64::MIN_POSITIVE));
        let mut roundoff = [0.0; N];
        let mut heap: BinaryHeap<Keyed> = panels
            .iter()
            .enumerate()
            .map(|(i, p)| Keyed {
                key: p.key(&scale),
                index: i,
            })
            .collect();

        while !(0..N).all(|k| error[k] <= target(&total, &magnitude, k)) {
            if panels.len() >= self.max_panels {
                let worst = heap.peek().map(|k| &panels[k.index]);
                let (worst_lo, worst_hi) = worst.map(|p| p.seed.bounds()).unwrap_or((0.0, 0.0));
                let k = (0..N)
                    .max_by(|&i, &j| {
                        (error[i] / scale[i])
                            .partial_cmp(&(error[j] / scale[j]))
                            .unwrap_or(Ordering::Equal)
                    })
                    .unwrap_or(0);
                return Err(QuadratureError {
                    panels: panels.len(),
                    error_estimate: error[k],
                    target: target(&total, &magnitude, k),
                    worst_lo,
                    worst_hi,
                });
            }
            let Some(worst) = heap.pop() else { break };
            let parent = panels[worst.index];
            let mid = 0.5 * (parent.seed.lo + parent.seed.hi);
            if !(mid > parent.seed.lo && mid < parent.seed.hi) {
                // panel is at the resolution limit; freeze its error
                panels[worst.index].error = [0.0; N];
                continue;
            }
            let mut left = Panel::new(
                f,
                Seed {
                    lo: parent.seed.lo,
                    hi: mid,
                    map: parent.seed.map,
                },
            );
            let mut right = Panel::new(
                f,
                Seed {
                    lo: mid,
                    hi: parent.seed.hi,
                    map: parent.seed.map,
                },
            );
            for k in 0..N {
                if parent.roundoff_limited(&left, &right, k) {
                    // further bisection only chases noise: bank the error
                    roundoff[k] += left.error[k] + right.error[k];
                    left.error[k] = 0.0;
                    right.error[k] = 0.0;
                }
            }
            for k in 0..N {
                total[k] += left.value[k] + right.value[k] - parent.value[k];
                error[k] += left.error[k] + right.error[k] - parent.error[k];
                magnitude[k] += left.magnitude[k] + right.magnitude[k] - parent.magnitude[k];
            }
            panels[worst.index] = left;
            heap.push(Keyed {
                key: left.key(&scale),
                index: worst.index,
            });
            panels.push(right);
            heap.push(Keyed {
                key: right.key(&scale),
                index: panels.len() - 1,
            });
        }

        // re-sum to shed the drift of the incremental updates
        let mut value = [0.0; N];
        let mut err = roundoff;
        for p in &panels {
            for k in 0..N {
                value[k] += p.value[k];
                err[k] += p.error[k];
            }
        }
        Ok(Estimate {
            value,
            error: err,
            panels: panels.len(),
        })
    }
}

/// Shorthand for a one-off scalar integration at the given relative tolerance.
pub fn quadrature<F>(f: F, domain: Domain, rel_tol: f64) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    Quadrature::new(rel_tol).integrate(f, domain)
}

/// `∫_cut^∞ g(x) e^{ixt} dx` for a smooth, slowly varying `g`, from the
/// asymptotic expansion obtained by repeated integration by parts,
///
/// ```text
/// -e^{i cut t} Σ_k (-1)^k g⁽ᵏ⁾(cut) / (it)^{k+1}
/// ```
///
/// Derivatives are taken by five-point differences on the scale of `cut`.
/// Successive terms shrink like `k/(cut·t)`, so the caller should make
/// `cut·t` large (a few hundred gives close to double precision for
/// algebraically decaying `g`).
pub fn fourier_tail<F>(g: F, cut: f64, t: f64) -> Complex64
where
    F: Fn(f64) -> f64,
{
    let h = cut / 256.0;
    let f = [g(cut - 2.0 * h), g(cut - h), g(cut), g(cut + h), g(cut + 2.0 * h)];
    let d = [
        f[2],
        (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h),
        (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h),
        (-f[0] + 2.0 * f[1] - 2.0 * f[3] + f[4]) / (2.0 * h * h * h),
    ];
    let it = Complex64::new(0.0, t);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut denom = it;
    for (k, dk) in d.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * dk / denom;
        denom *= it;
    }
    -Complex64::from_polar(1.0, cut * t) * sum
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// `x = scale / u` on `u ∈ (0, 1]`.
    Reciprocal { scale: f64 },
    /// `x = origin + (1 - u) / u` on `u ∈ (0, 1]`.
    Shifted { origin: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Seed {
    lo: f64,
    hi: f64,
    map: Map,
}

impl Seed {
    /// Returns `(x, dx/du)`.
    #[inline]
    fn transform(&self, u: f64) -> (f64, f64) {
        match self.map {
            Map::Identity => (u, 1.0),
            Map::Reciprocal { scale } => (scale / u, scale / (u * u)),
            Map::Shifted { origin } => (origin + (1.0 - u) / u, 1.0 / (u * u)),
        }
    }

    /// Bounds in the original variable.
    fn bounds(&self) -> (f64, f64) {
        match self.map {
            Map::Identity => (self.lo, self.hi),
            _ => {
                let a = self.transform(self.hi).0;
                let b = if self.lo > 0.0 {
                    self.transform(self.lo).0
                } else {
                    f64::INFINITY
                };
                (a, b)
            }
        }
    }
}

/// Error-to-magnitude ratio below which a stalled panel is treated as
/// limited by floating-point noise.
const ROUNDOFF_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
struct Panel<const N: usize> {
    seed: Seed,
    value: [f64; N],
    error: [f64; N],
    /// `∫|f|` over the panel, for detecting roundoff-limited error estimates.
    magnitude: [f64; N],
}

impl<const N: usize> Panel<N> {
    fn new<F: Fn(f64) -> [f64; N]>(f: &F, seed: Seed) -> Self {
        let centre = 0.5 * (seed.lo + seed.hi);
        let half = 0.5 * (seed.hi - seed.lo);
        let eval = |u: f64| {
            let (x, jac) = seed.transform(u);
            let mut y = f(x);
            for v in y.iter_mut() {
                *v *= jac;
            }
            y
        };
        let fc = eval(centre);
        let mut kronrod = [0.0; N];
        let mut gauss = [0.0; N];
        let mut abs = [0.0; N];
        for k in 0..N {
            kronrod[k] = WGK[7] * fc[k];
            gauss[k] = WG[3] * fc[k];
            abs[k] = WGK[7] * fc[k].abs();
        }
        for j in 0..7 {
            let dx = half * XGK[j];
            let f1 = eval(centre - dx);
            let f2 = eval(centre + dx);
            for k in 0..N {
                let s = f1[k] + f2[k];
                kronrod[k] += WGK[j] * s;
                abs[k] += WGK[j] * (f1[k].abs() + f2[k].abs());
                if j % 2 == 1 {
                    gauss[k] += WG[j / 2] * s;
                }
            }
        }
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        let mut magnitude = [0.0; N];
        for k in 0..N {
            value[k] = kronrod[k] * half;
            magnitude[k] = abs[k] * half;
            error[k] = ((kronrod[k] - gauss[k]) * half).abs();
            if !value[k].is_finite() {
                error[k] = f64::INFINITY;
            }
        }
        Self {
            seed,
            value,
            error,
            magnitude,
        }
    }

    /// Whether splitting this panel into `left` and `right` failed to reduce
    /// the error of component `k` although it is already tiny next to the
    /// panel's magnitude, the signature of rounding noise.
    fn roundoff_limited(&self, left: &Self, right: &Self, k: usize) -> bool {
        let children = left.error[k] + right.error[k];
        self.error[k] <= ROUNDOFF_RATIO * self.magnitude[k] && children >= 0.5 * self.error[k]
    }

    fn key(&self, scale: &[f64; N]) -> f64 {
        (0..N)
            .map(|k| self.error[k] / scale[k])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
struct Keyed {
    key: f64,
    index: usize,
}

impl PartialEq for Keyed {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}
