use std::sync::{Arc, Mutex, OnceLock};

use crate::bath::{b_squared, KernelCache, SpectralDensity};
use crate::coefficients::{coefficients_asymptotic, CoefficientSet, CoefficientTable};
use crate::error::Result;
use crate::model::{ModelParams, Scenario};
use crate::propagation::{self, DecayCurve, Trajectory};

/// Per-parameter-set cache of everything that is expensive to compute: the
/// coefficient table, the kernel table, `⟨B²⟩` and the asymptotic
/// coefficients. Tables grow on demand and are shared through `Arc`, so one
/// `Simulation` can serve many scenarios, also from several threads.
#[derive(Debug)]
pub struct Simulation {
    sd: SpectralDensity,
    table: Mutex<Option<Arc<CoefficientTable>>>,
    kernels: Mutex<Option<Arc<KernelCache>>>,
    b_squared: OnceLock<f64>,
    asymptotic: OnceLock<CoefficientSet>,
}

impl Simulation {
    pub fn new(params: ModelParams) -> Self {
        Self {
            sd: SpectralDensity::new(params),
            table: Mutex::new(None),
            kernels: Mutex::new(None),
            b_squared: OnceLock::new(),
            asymptotic: OnceLock::new(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.sd.params
    }

    pub fn spectral_density(&self) -> &SpectralDensity {
        &self.sd
    }

    /// Coefficient table valid at least up to `t_end`.
    pub fn coefficient_table(&self, t_end: f64) -> Result<Arc<CoefficientTable>> {
        let mut slot = self.table.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(table) = slot.as_ref() {
            if table.covers(t_end) {
                return Ok(Arc::clone(table));
            }
        }
        let mut table = match slot.take() {
            Some(t) => Arc::unwrap_or_clone(t),
            None => CoefficientTable::new(self.sd)?,
        };
        let grown = table.extend_to(t_end);
        let table = Arc::new(table);
        *slot = Some(Arc::clone(&table));
        grown?;
        Ok(table)
    }

    /// Kernel table valid at least up to `t_end` (or until the kernels decay).
    pub fn kernel_cache(&self, t_end: f64) -> Result<Arc<KernelCache>> {
        let mut slot = self.kernels.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(cache) = slot.as_ref() {
            if cache.has_decayed() || cache.horizon() >= t_end {
                return Ok(Arc::clone(cache));
            }
        }
        let cache = Arc::new(KernelCache::build(&self.sd, t_end)?);
        *slot = Some(Arc::clone(&cache));
        Ok(cache)
    }

    pub fn b_squared(&self) -> Result<f64> {
        if let Some(v) = self.b_squared.get() {
            return Ok(*v);
        }
        let v = b_squared(&self.sd)?;
        Ok(*self.b_squared.get_or_init(|| v))
    }

    pub fn asymptotic(&self) -> Result<CoefficientSet> {
        if let Some(v) = self.asymptotic.get() {
            return Ok(*v);
        }
        let v = coefficients_asymptotic(&self.sd)?;
        Ok(*self.asymptotic.get_or_init(|| v))
    }

    pub fn evolve(&self, t_grid: &[f64]) -> Result<Trajectory> {
        let t_end = t_grid.last().copied().unwrap_or(0.0);
        let table = self.coefficient_table(t_end)?;
        propagation::evolve_with(&table, t_grid)
    }

    pub fn decay_curve(
        &self,
        scenario: &Scenario,
        t_max: f64,
        n_samples: usize,
        include_prefactor: bool,
    ) -> Result<DecayCurve> {
        let times = propagation::uniform_grid(t_max, n_samples)?;
        let trajectory = self.evolve(&times)?;
        DecayCurve::from_trajectory(scenario, &trajectory, include_prefactor)
    }
}
