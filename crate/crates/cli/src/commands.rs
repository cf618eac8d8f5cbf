//! The four subcommands, split into a computing part that returns data and a
//! writing part that emits files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use qbm::limits::{law_curve, law_decoherence_time, regime_classify, RegimeReport};
use qbm::model::Scenario;
use qbm::phasespace::{self, PhaseSpaceGrid};
use qbm::propagation::{crossing_time, uniform_grid, Measure};
use qbm::Simulation;

use crate::config::{Curve, RunConfig, SweepAxis};
use crate::error::{io_error, CliError, Result};

/// Number of points placed inside the bracketing interval when a sweep
/// refines an `e⁻¹` crossing.
const REFINE_POINTS: usize = 201;
const MAX_DOUBLINGS: usize = 48;

fn e_inv() -> f64 {
    (-1.0f64).exp()
}

/// Formats a value with 12 significant digits.
pub fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Sampled `n₁₂` columns of a decay run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTable {
    pub times: Vec<f64>,
    pub columns: BTreeMap<Curve, Vec<f64>>,
}

impl DecayTable {
    pub fn column(&self, curve: Curve) -> Option<&[f64]> {
        self.columns.get(&curve).map(Vec::as_slice)
    }

    /// First `e⁻¹` crossing of a column, linearly interpolated.
    pub fn crossing(&self, curve: Curve) -> Option<f64> {
        crossing_time(&self.times, self.column(curve)?, e_inv())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain(Curve::ALL.iter().map(|c| format!("n12_{}", c.label())))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (k, &t) in self.times.iter().enumerate() {
            let mut line = fmt_value(t);
            for curve in Curve::ALL {
                line.push(',');
                if let Some(col) = self.column(curve) {
                    line.push_str(&fmt_value(col[k]));
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Result of `decay`.
#[derive(Debug, Clone)]
pub struct DecayRun {
    pub table: DecayTable,
    /// `None` when the separation is zero.
    pub regime: Option<RegimeReport>,
}

pub fn compute_decay(cfg: &RunConfig, sim: &Simulation) -> Result<DecayRun> {
    let scenario = &cfg.scenario;
    if !scenario.is_symmetric() {
        return Err(CliError::Config(
            "decay curves of n12 need a symmetric placement (q_mid = p_mid = 0)".into(),
        ));
    }
    let times = uniform_grid(cfg.t_max, cfg.n_samples)?;
    let mut columns = BTreeMap::new();
    for &curve in &cfg.curves {
        let values = match curve.law() {
            None => {
                let trajectory = sim.evolve(&times)?;
                qbm::DecayCurve::from_trajectory(scenario, &trajectory, cfg.include_prefactor)?.indicator
            }
            Some(law) => law_curve(law, sim, scenario, &times, Measure::Indicator)?,
        };
        columns.insert(curve, values);
    }
    let regime = if scenario.effective_separation().value() > 0.0 {
        Some(regime_classify(sim, scenario, Measure::Indicator)?)
    } else {
        None
    };
    Ok(DecayRun {
        table: DecayTable { times, columns },
        regime,
    })
}

impl DecayRun {
    pub fn report(&self, cfg: &RunConfig) -> String {
        let p = &cfg.params;
        let s = &cfg.scenario;
        let mut out = String::new();
        let _ = writeln!(out, "run: {}", cfg.name);
        let _ = writeln!(
            out,
            "parameters: damping_rate = {}, cutoff = {}, temperature = {}",
            p.damping_rate(),
            p.cutoff(),
            p.temperature()
        );
        let _ = writeln!(out, "scenario: dq = {}, dp = {}, sigma = {}", s.dq(), s.dp(), s.sigma());
        if let Some(w) = s.warning() {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(out, "include_prefactor: {}", cfg.include_prefactor);
        let _ = writeln!(out, "samples: {} on [0, {}]", cfg.n_samples, cfg.t_max);
        let _ = writeln!(out, "n12 = 1/e crossings:");
        for &curve in &cfg.curves {
            let v = match self.table.crossing(curve) {
                Some(t) => format!("{t:e}"),
                None => "not reached".into(),
            };
            let _ = writeln!(out, "  {:<6} {v}", curve.label());
        }
        match &self.regime {
            Some(r) => {
                let _ = writeln!(out, "{r}");
            }
            None => {
                let _ = writeln!(out, "regime: none (zero separation)");
            }
        }
        out
    }
}

/// Options of `decay` that only affect what is written.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecayOutputs {
    pub plot_script: bool,
    pub coefficients: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_error(path))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_error(dir))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(io_error(path))
}

/// Writes `<name>_decay.csv`, `<name>_report.txt` and the optional extras.
pub fn run_decay(cfg: &RunConfig, sim: &Simulation, outputs: DecayOutputs) -> Result<Vec<PathBuf>> {
    let run = compute_decay(cfg, sim)?;
    prepare_dir(&cfg.output_dir)?;
    let mut written = Vec::new();

    let csv = cfg.output_dir.join(format!("{}_decay.csv", cfg.name));
    let mut w = create(&csv)?;
    run.table.write_csv(&mut w).map_err(io_error(&csv))?;
    finish(w, &csv)?;
    written.push(csv.clone());

    let report = cfg.output_dir.join(format!("{}_report.txt", cfg.name));
    fs::write(&report, run.report(cfg)).map_err(io_error(&report))?;
    written.push(report);

    if outputs.plot_script {
        let path = cfg.output_dir.join(format!("{}_plot.gp", cfg.name));
        fs::write(&path, plot_script(cfg, &csv)).map_err(io_error(&path))?;
        written.push(path);
    }
    if outputs.coefficients {
        let path = cfg.output_dir.join(format!("{}_coefficients.csv", cfg.name));
        let table = sim.coefficient_table(cfg.t_max)?;
        let mut w = create(&path)?;
        let rows = (|| -> std::io::Result<()> {
            writeln!(w, "t,a,b,c,d")?;
            for &t in &run.table.times {
                let k = table.eval(t);
                writeln!(w, "{},{},{},{},{}", fmt_value(t), fmt_value(k.a), fmt_value(k.b), fmt_value(k.c), fmt_value(k.d))?;
            }
            Ok(())
        })();
        rows.map_err(io_error(&path))?;
        finish(w, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// A gnuplot script plotting the requested columns of the decay CSV.
pub fn plot_script(cfg: &RunConfig, csv: &Path) -> String {
    let file = csv.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set xlabel 'Omega t'");
    let _ = writeln!(s, "set ylabel 'n12'");
    let _ = writeln!(s, "set yrange [0:1.05]");
    let _ = writeln!(s, "set key top right");
    let plots: Vec<String> = Curve::ALL
        .iter()
        .enumerate()
        .filter(|(_, c)| cfg.curves.contains(c))
        .map(|(k, c)| format!("'{file}' using 1:{} with lines title '{}'", k + 2, c.label()))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

/// Result of `wigner`: one grid per snapshot and the position densities.
#[derive(Debug, Clone)]
pub struct WignerRun {
    pub grids: Vec<PhaseSpaceGrid>,
    /// `q` nodes of the density profile.
    pub q: Vec<f64>,
    /// One density column per snapshot.
    pub densities: Vec<Vec<f64>>,
}

fn snapshot_grid(times: &[f64]) -> Vec<f64> {
    let mut grid: Vec<f64> = std::iter::once(0.0).chain(times.iter().copied()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

pub fn compute_wigner(cfg: &RunConfig, sim: &Simulation) -> Result<WignerRun> {
    let grid_times = snapshot_grid(&cfg.snapshot_times);
    let trajectory = sim.evolve(&grid_times)?;
    let spec = cfg.grid;
    let q: Vec<f64> = (0..spec.nq).map(|k| spec.q(k)).collect();
    let mut grids = Vec::new();
    let mut densities = Vec::new();
    for &t in &cfg.snapshot_times {
        let k = grid_times.partition_point(|&x| x < t);
        let state = &trajectory.states[k];
        grids.push(phasespace::wigner_grid(&cfg.scenario, state, spec)?);
        let components = phasespace::evolved_components(&cfg.scenario, state)?;
        densities.push(
            q.iter()
                .map(|&x| phasespace::density_from_components(&components, x))
                .collect(),
        );
    }
    Ok(WignerRun { grids, q, densities })
}

/// Writes `<name>_wigner_<k>.csv`, `<name>_wigner_<k>.dat` per snapshot and
/// `<name>_density.csv`.
pub fn run_wigner(cfg: &RunConfig, sim: &Simulation) -> Result<Vec<PathBuf>> {
    let run = compute_wigner(cfg, sim)?;
    prepare_dir(&cfg.output_dir)?;
    let mut written = Vec::new();
    for (k, grid) in run.grids.iter().enumerate() {
        let csv = cfg.output_dir.join(format!("{}_wigner_{k}.csv", cfg.name));
        let mut w = create(&csv)?;
        grid.write_csv(&mut w).map_err(io_error(&csv))?;
        finish(w, &csv)?;
        written.push(csv);
        let dat = cfg.output_dir.join(format!("{}_wigner_{k}.dat", cfg.name));
        let mut w = create(&dat)?;
        grid.write_gnuplot(&mut w).map_err(io_error(&dat))?;
        finish(w, &dat)?;
        written.push(dat);
    }
    let path = cfg.output_dir.join(format!("{}_density.csv", cfg.name));
    let mut w = create(&path)?;
    let rows = (|| -> std::io::Result<()> {
        let header: Vec<String> = std::iter::once("q".to_string())
            .chain(cfg.snapshot_times.iter().map(|t| format!("density_t{t}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, &q) in run.q.iter().enumerate() {
            let mut line = fmt_value(q);
            for col in &run.densities {
                line.push(',');
                line.push_str(&fmt_value(col[i]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    })();
    rows.map_err(io_error(&path))?;
    finish(w, &path)?;
    written.push(path);
    Ok(written)
}

pub fn run_regimes(cfg: &RunConfig, sim: &Simulation, measure: Measure) -> Result<RegimeReport> {
    Ok(regime_classify(sim, &cfg.scenario, measure)?)
}

/// One line of a sweep: `e⁻¹` times of `n₁₂` for each curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub separation: f64,
    pub exact: f64,
    pub gr: f64,
    pub id1: f64,
    pub id2: f64,
}

impl SweepRow {
    pub fn get(&self, curve: Curve) -> f64 {
        match curve {
            Curve::Exact => self.exact,
            Curve::GoldenRule => self.gr,
            Curve::Id1 => self.id1,
            Curve::Id2 => self.id2,
        }
    }
}

/// `e⁻¹` crossing of the exact `n₁₂`: the horizon doubles until the curve
/// crosses, then the bracketing interval is resampled finely.
pub fn exact_crossing(
    sim: &Simulation,
    scenario: &Scenario,
    n_samples: usize,
    include_prefactor: bool,
    first_guess: f64,
) -> Result<f64> {
    let level = e_inv();
    let mut t_max = first_guess;
    for _ in 0..MAX_DOUBLINGS {
        let curve = sim.decay_curve(scenario, t_max, n_samples, include_prefactor)?;
        if let Some(k) = curve.indicator.iter().position(|&v| v <= level) {
            let (lo, hi) = (curve.times[k - 1], curve.times[k]);
            let mut times = vec![0.0];
            let step = (hi - lo) / (REFINE_POINTS - 1) as f64;
            times.extend((0..REFINE_POINTS).map(|i| lo + step * i as f64).filter(|&t| t > 0.0));
            let trajectory = sim.evolve(&times)?;
            let fine = qbm::DecayCurve::from_trajectory(scenario, &trajectory, include_prefactor)?;
            return Ok(fine.decoherence_time().unwrap_or(hi));
        }
        t_max *= 2.0;
    }
    Err(CliError::Model(qbm::Error::Domain(format!(
        "n12 stays above 1/e up to t = {t_max:e}"
    ))))
}

pub fn compute_sweep(cfg: &RunConfig, sim: &Simulation) -> Result<Vec<SweepRow>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs `sweep_values` or `sweep_log`".into()))?;
    let n_samples = cfg.n_samples.min(401);
    sweep
        .values
        .par_iter()
        .map(|&d| {
            let scenario = match sweep.axis {
                SweepAxis::Dq => cfg.scenario.with_separations(d, cfg.scenario.dp())?,
                SweepAxis::Dp => cfg.scenario.with_separations(cfg.scenario.dq(), d)?,
            };
            let m = Measure::Indicator;
            let gr = law_decoherence_time(qbm::Law::GoldenRule, sim, &scenario, m)?;
            let id1 = law_decoherence_time(qbm::Law::InteractionDominated1, sim, &scenario, m)?;
            let id2 = law_decoherence_time(qbm::Law::InteractionDominated2, sim, &scenario, m)?;
            let guess = [gr, id1, id2]
                .into_iter()
                .filter(|t| t.is_finite())
                .fold(f64::INFINITY, f64::min);
            let guess = if guess.is_finite() { guess } else { cfg.t_max };
            let exact = exact_crossing(sim, &scenario, n_samples, cfg.include_prefactor, guess)?;
            Ok(SweepRow {
                separation: d,
                exact,
                gr,
                id1,
                id2,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], axis: SweepAxis, mut out: W) -> std::io::Result<()> {
    let d = match axis {
        SweepAxis::Dq => "dq",
        SweepAxis::Dp => "dp",
    };
    writeln!(out, "{d},tau_exact,tau_gr,tau_id1,tau_id2")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_value(r.separation),
            fmt_value(r.exact),
            fmt_value(r.gr),
            fmt_value(r.id1),
            fmt_value(r.id2)
        )?;
    }
    Ok(())
}

/// Writes `<name>_sweep.csv`.
pub fn run_sweep(cfg: &RunConfig, sim: &Simulation) -> Result<PathBuf> {
    let rows = compute_sweep(cfg, sim)?;
    let axis = cfg.sweep.as_ref().map(|s| s.axis).unwrap_or(SweepAxis::Dq);
    prepare_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(format!("{}_sweep.csv", cfg.name));
    let mut w = create(&path)?;
    write_sweep_csv(&rows, axis, &mut w).map_err(io_error(&path))?;
    finish(w, &path)?;
    Ok(path)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
