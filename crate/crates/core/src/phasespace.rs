//! Characteristic and Wigner functions of the two-packet superposition.
//!
//! Packets are `ψ_i(x) = (2πσ)^{-1/4} exp(-(x-q_i)²/(4σ) + i p_i x)`. Each of
//! the four terms `c_i c_j* |φ_i⟩⟨φ_j|` has a complex Gaussian characteristic
//! function
//!
//! `χ^{ij}(μ, ν) = (1/2π) exp(c₀ + bᵀx - xᵀHx/2)`, `x = (μ, ν)`,
//!
//! normalized so that `W(q, p) = (1/2π) ∫ χ(μ, ν) e^{-i(μq - νp)} dμ dν`.
//! Time evolution maps `H → M⁻ᵀHM⁻¹ + Σ_t` and `b → M⁻ᵀb`.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::model::Scenario;
use crate::propagation::{PropagationState, CONDITION_LIMIT};

/// Minimum number of samples per interference fringe along each grid axis.
pub const SAMPLES_PER_FRINGE: f64 = 4.0;

/// Cross terms whose peak is below this fraction of `1/π` are not checked for
/// resolution.
const NEGLIGIBLE_AMPLITUDE: f64 = 1e-15;

/// One term `c_i c_j* |φ_i⟩⟨φ_j|` of the density matrix as a complex Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    /// Packet indices, 0-based.
    pub indices: (usize, usize),
    /// `c_i c_j*`.
    pub weight: Complex64,
    /// Real symmetric width matrix of `χ`.
    pub h: Matrix2<f64>,
    pub b: [Complex64; 2],
    pub c0: Complex64,
}

impl GaussianComponent {
    /// Initial component built from the packet centers of `scenario`.
    pub fn initial(scenario: &Scenario, i: usize, j: usize) -> Result<Self> {
        if i > 1 || j > 1 {
            return domain(format!("component indices must be 0 or 1, got ({i}, {j})"));
        }
        let sigma = scenario.sigma();
        let centers = scenario.centers();
        let (qi, pi) = centers[i];
        let (qj, pj) = centers[j];
        let c = scenario.amplitudes();
        let (q_bar, p_bar) = (0.5 * (qi + qj), 0.5 * (pi + pj));
        let (delta_q, delta_p) = (qj - qi, pj - pi);
        Ok(Self {
            indices: (i, j),
            weight: c[i] * c[j].conj(),
            h: Matrix2::new(sigma, 0.0, 0.0, 0.25 / sigma),
            b: [
                Complex64::new(sigma * delta_p, q_bar),
                Complex64::new(0.25 * delta_q / sigma, -p_bar),
            ],
            c0: Complex64::new(
                -0.5 * sigma * delta_p * delta_p - delta_q * delta_q / (8.0 * sigma),
                -delta_p * q_bar,
            ),
        })
    }

    /// The component after propagation to `state`.
    pub fn evolve(&self, state: &PropagationState) -> Result<Self> {
        let m_inv = inverse(&state.propagator)?;
        let h = m_inv.transpose() * self.h * m_inv + state.gauss_matrix();
        let h = 0.5 * (h + h.transpose());
        let b = [
            self.b[0] * m_inv[(0, 0)] + self.b[1] * m_inv[(1, 0)],
            self.b[0] * m_inv[(0, 1)] + self.b[1] * m_inv[(1, 1)],
        ];
        Ok(Self { h, b, ..*self })
    }

    /// `χ^{ij}(μ, ν)` without the weight.
    pub fn chi(&self, mu: f64, nu: f64) -> Complex64 {
        let quad = self.h[(0, 0)] * mu * mu + 2.0 * self.h[(0, 1)] * mu * nu + self.h[(1, 1)] * nu * nu;
        (self.c0 + self.b[0] * mu + self.b[1] * nu - 0.5 * quad).exp() / (2.0 * PI)
    }

    fn inverse_width(&self) -> (f64, f64, f64, f64) {
        let det = self.h.determinant();
        (
            self.h[(1, 1)] / det,
            -self.h[(0, 1)] / det,
            self.h[(0, 0)] / det,
            det,
        )
    }

    /// `W^{ij}(q, p)` without the weight.
    pub fn wigner(&self, q: f64, p: f64) -> Complex64 {
        let (g00, g01, g11, det) = self.inverse_width();
        let v0 = self.b[0] - Complex64::new(0.0, q);
        let v1 = self.b[1] + Complex64::new(0.0, p);
        let form = v0 * v0 * g00 + 2.0 * v0 * v1 * g01 + v1 * v1 * g11;
        (self.c0 + 0.5 * form).exp() / (2.0 * PI * det.sqrt())
    }

    /// `∫W^{ij}(q, p) dp` without the weight.
    pub fn position_density(&self, q: f64) -> Complex64 {
        let h = self.h[(0, 0)];
        let v = self.b[0] - Complex64::new(0.0, q);
        (self.c0 + v * v / (2.0 * h)).exp() / (2.0 * PI * h).sqrt()
    }

    /// Wave vector `(k_q, k_p)` of the phase `k_q q + k_p p` of `W^{ij}`.
    pub fn wave_vector(&self) -> (f64, f64) {
        let (g00, g01, g11, _) = self.inverse_width();
        let (r0, r1) = (self.b[0].re, self.b[1].re);
        (-(g00 * r0 + g01 * r1), g01 * r0 + g11 * r1)
    }

    /// `max |W^{ij}|` over phase space, without the weight.
    pub fn peak_amplitude(&self) -> f64 {
        let (g00, g01, g11, det) = self.inverse_width();
        let form = |x: [f64; 2], y: [f64; 2]| g00 * x[0] * y[0] + g01 * (x[0] * y[1] + x[1] * y[0]) + g11 * x[1] * y[1];
        // the real part of the exponent peaks where r = Im b
        let re = [self.b[0].re, self.b[1].re];
        let exponent = self.c0.re + 0.5 * form(re, re);
        exponent.exp() / (2.0 * PI * det.sqrt())
    }
}

fn inverse(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let norm = m.norm();
    let det = m.determinant();
    // for 2×2 matrices ‖M‖_F² / |det M| bounds the condition number
    let condition = if det == 0.0 { f64::INFINITY } else { norm * norm / det.abs() };
    if condition > CONDITION_LIMIT {
        return Err(Error::SingularMatrix {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    m.try_inverse().ok_or(Error::SingularMatrix {
        condition,
        limit: CONDITION_LIMIT,
    })
}

/// The four initial components `(1,1), (1,2), (2,1), (2,2)`.
pub fn initial_components(scenario: &Scenario) -> [GaussianComponent; 4] {
    [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(i, j)| {
        GaussianComponent::initial(scenario, i, j).expect("indices are in range")
    })
}

/// The four components propagated to `state`.
pub fn evolved_components(scenario: &Scenario, state: &PropagationState) -> Result<[GaussianComponent; 4]> {
    let c = initial_components(scenario);
    Ok([
        c[0].evolve(state)?,
        c[1].evolve(state)?,
        c[2].evolve(state)?,
        c[3].evolve(state)?,
    ])
}

/// `χ_t^{ij}(μ, ν)` for 0-based packet indices.
pub fn evolved_component_chi(
    state: &PropagationState,
    scenario: &Scenario,
    component: (usize, usize),
    mu: f64,
    nu: f64,
) -> Result<Complex64> {
    let c = GaussianComponent::initial(scenario, component.0, component.1)?;
    Ok(c.evolve(state)?.chi(mu, nu))
}

/// Wigner function summed over components.
pub fn wigner_from_components(components: &[GaussianComponent], q: f64, p: f64) -> f64 {
    components
        .iter()
        .map(|c| (c.weight * c.wigner(q, p)).re)
        .sum()
}

/// Position density summed over components.
pub fn density_from_components(components: &[GaussianComponent], q: f64) -> f64 {
    components
        .iter()
        .map(|c| (c.weight * c.position_density(q)).re)
        .sum()
}

/// Initial Wigner function in closed form: two humps plus the cross term
///
/// `W^{ij} = (1/π) exp{-(q-q̄)²/(2σ) - 2σ(p-p̄)²} exp{i[Δq(p-p̄) - Δp q]}`
///
/// with `q̄, p̄` the midpoint and `Δq = q_j - q_i`, `Δp = p_j - p_i`.
pub fn superposition_wigner(scenario: &Scenario, q: f64, p: f64) -> f64 {
    let sigma = scenario.sigma();
    let [(q1, p1), (q2, p2)] = scenario.centers();
    let [c1, c2] = scenario.amplitudes();
    let hump = |qc: f64, pc: f64| (-(q - qc).powi(2) / (2.0 * sigma) - 2.0 * sigma * (p - pc).powi(2)).exp() / PI;
    let (q_bar, p_bar) = (0.5 * (q1 + q2), 0.5 * (p1 + p2));
    let phase = (q2 - q1) * (p - p_bar) - (p2 - p1) * q;
    let cross = hump(q_bar, p_bar) * Complex64::from_polar(1.0, phase);
    c1.norm_sqr() * hump(q1, p1) + c2.norm_sqr() * hump(q2, p2) + 2.0 * (c1 * c2.conj() * cross).re
}

/// Position density of the evolved state.
pub fn position_density(scenario: &Scenario, state: &PropagationState, q: f64) -> Result<f64> {
    Ok(density_from_components(&evolved_components(scenario, state)?, q))
}

/// Rectangular sampling grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub nq: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl GridSpec {
    pub fn new(q_range: (f64, f64), nq: usize, p_range: (f64, f64), np: usize) -> Result<Self> {
        let spec = Self {
            q_min: q_range.0,
            q_max: q_range.1,
            nq,
            p_min: p_range.0,
            p_max: p_range.1,
            np,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.q_min, self.q_max, self.p_min, self.p_max]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.q_max <= self.q_min || self.p_max <= self.p_min {
            return domain("grid ranges must be finite with max > min");
        }
        if self.nq < 2 || self.np < 2 {
            return domain(format!("grid needs at least 2 points per axis, got {}x{}", self.nq, self.np));
        }
        Ok(())
    }

    pub fn q_step(&self) -> f64 {
        (self.q_max - self.q_min) / (self.nq - 1) as f64
    }

    pub fn p_step(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn q(&self, k: usize) -> f64 {
        self.q_min + k as f64 * self.q_step()
    }

    pub fn p(&self, k: usize) -> f64 {
        self.p_min + k as f64 * self.p_step()
    }

    /// Fails if any non-negligible cross term has fewer than
    /// [`SAMPLES_PER_FRINGE`] samples per fringe along an axis.
    pub fn check_resolution(&self, components: &[GaussianComponent]) -> Result<()> {
        for c in components.iter().filter(|c| c.indices.0 != c.indices.1) {
            if c.weight.norm() * c.peak_amplitude() * PI < NEGLIGIBLE_AMPLITUDE {
                continue;
            }
            let (kq, kp) = c.wave_vector();
            for (k, step, axis) in [(kq, self.q_step(), "q"), (kp, self.p_step(), "p")] {
                if k == 0.0 {
                    continue;
                }
                let wavelength = 2.0 * PI / k.abs();
                if step > wavelength / SAMPLES_PER_FRINGE {
                    return Err(Error::Resolution(format!(
                        "{axis} spacing {step:e} exceeds a quarter of the fringe wavelength {wavelength:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Wigner function sampled on a [`GridSpec`]; `values[ip * nq + iq]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub spec: GridSpec,
    pub t: f64,
    pub values: Vec<f64>,
}

impl PhaseSpaceGrid {
    pub fn value(&self, iq: usize, ip: usize) -> f64 {
        self.values[ip * self.spec.nq + iq]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.spec.nq)
    }

    /// Riemann sum `Σ W Δq Δp`.
    pub fn riemann_sum(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.q_step() * self.spec.p_step()
    }

    /// `Σ_p W Δp` at each `q` node.
    pub fn marginal_q(&self) -> Vec<f64> {
        let dp = self.spec.p_step();
        (0..self.spec.nq)
            .map(|iq| (0..self.spec.np).map(|ip| self.value(iq, ip)).sum::<f64>() * dp)
            .collect()
    }

    /// CSV: one header line `qmin,qmax,nq,pmin,pmax,np` with the values, then
    /// one row per `p` node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let s = &self.spec;
        writeln!(out, "{},{},{},{},{},{}", s.q_min, s.q_max, s.nq, s.p_min, s.p_max, s.np)?;
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.11e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Whitespace matrix for gnuplot's `matrix` format, preceded by a comment
    /// with the same header.
    pub fn write_gnuplot<W: Write>(&self, mut out: W) -> io::Result<()> {
        let s = &self.spec;
        writeln!(out, "# qmin qmax nq pmin pmax np t")?;
        writeln!(out, "# {} {} {} {} {} {} {}", s.q_min, s.q_max, s.nq, s.p_min, s.p_max, s.np, self.t)?;
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.11e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Evolved Wigner function on a grid, filled in parallel over `p` rows.
pub fn wigner_grid(scenario: &Scenario, state: &PropagationState, spec: GridSpec) -> Result<PhaseSpaceGrid> {
    spec.validate()?;
    let components = evolved_components(scenario, state)?;
    spec.check_resolution(&components)?;
    let mut values = vec![0.0; spec.nq * spec.np];
    values
        .par_chunks_mut(spec.nq)
        .enumerate()
        .for_each(|(ip, row)| {
            let p = spec.p(ip);
            for (iq, v) in row.iter_mut().enumerate() {
                *v = wigner_from_components(&components, spec.q(iq), p);
            }
        });
    Ok(PhaseSpaceGrid {
        spec,
        t: state.t,
        values,
    })
}
