//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Command-line flags are applied on top of the file with
//! [`RawConfig::set`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use qbm::model::{ModelParams, Scenario};
use qbm::phasespace::GridSpec;

use crate::error::{CliError, Result};

/// Every key the parser accepts.
pub const KEYS: &[&str] = &[
    "name",
    "damping_rate",
    "cutoff",
    "temperature",
    "dq",
    "dp",
    "sigma",
    "q_mid",
    "p_mid",
    "amplitudes",
    "relative_phase",
    "t_max",
    "n_samples",
    "include_prefactor",
    "curves",
    "output_dir",
    "grid_q",
    "grid_p",
    "grid_nq",
    "grid_np",
    "snapshot_times",
    "sweep_axis",
    "sweep_values",
    "sweep_log",
];

/// Unvalidated key-value pairs in file order of last assignment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            raw.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {}", n + 1, e.message())))?;
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{}`", x.trim())))
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some("true" | "yes" | "1") => Ok(Some(true)),
            Some("false" | "no" | "0") => Ok(Some(false)),
            Some(v) => Err(CliError::Config(format!("`{key}`: expected true or false, got `{v}`"))),
        }
    }

    fn pair(&self, key: &str) -> Result<Option<(f64, f64)>> {
        match self.list(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some((v[0], v[1]))),
            Some(_) => Err(CliError::Config(format!("`{key}` takes two values"))),
        }
    }
}

/// Curves of a decay run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Curve {
    Exact,
    GoldenRule,
    Id1,
    Id2,
}

impl Curve {
    pub const ALL: [Curve; 4] = [Curve::Exact, Curve::GoldenRule, Curve::Id1, Curve::Id2];

    pub fn label(self) -> &'static str {
        match self {
            Curve::Exact => "exact",
            Curve::GoldenRule => "gr",
            Curve::Id1 => "id1",
            Curve::Id2 => "id2",
        }
    }

    pub fn law(self) -> Option<qbm::Law> {
        match self {
            Curve::Exact => None,
            Curve::GoldenRule => Some(qbm::Law::GoldenRule),
            Curve::Id1 => Some(qbm::Law::InteractionDominated1),
            Curve::Id2 => Some(qbm::Law::InteractionDominated2),
        }
    }
}

impl FromStr for Curve {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Curve::ALL
            .into_iter()
            .find(|c| c.label() == s.trim())
            .ok_or_else(|| CliError::Config(format!("unknown curve `{s}` (expected exact, gr, id1, id2)")))
    }
}

impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn parse_curves(list: &str) -> Result<Vec<Curve>> {
    let mut curves = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Curve>>>()?;
    curves.sort();
    curves.dedup();
    if curves.is_empty() {
        return Err(CliError::Config("`curves` is empty".into()));
    }
    Ok(curves)
}

/// Which separation a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Dq,
    Dp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// `count` log-spaced values from `start` to `stop` inclusive.
pub fn log_spaced(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > 0.0) || count == 0 {
        return Err(CliError::Config("log spacing needs positive bounds and count".into()));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let (a, b) = (start.ln(), stop.ln());
    Ok((0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub params: ModelParams,
    pub scenario: Scenario,
    pub t_max: f64,
    pub n_samples: usize,
    pub include_prefactor: bool,
    pub curves: Vec<Curve>,
    pub output_dir: PathBuf,
    pub grid: GridSpec,
    pub snapshot_times: Vec<f64>,
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let defaults = ModelParams::DEFAULT;
        let params = ModelParams::new(
            raw.value("damping_rate")?.unwrap_or(defaults.damping_rate()),
            raw.value("cutoff")?.unwrap_or(defaults.cutoff()),
            raw.value("temperature")?.unwrap_or(defaults.temperature()),
        )?;

        let amplitudes = match raw.pair("amplitudes")? {
            None => qbm::model::equal_amplitudes(),
            Some((w1, w2)) => {
                let norm = w1.hypot(w2);
                if !(w1 >= 0.0 && w2 >= 0.0 && norm > 0.0) {
                    return Err(CliError::Config("`amplitudes` must be nonnegative, not both zero".into()));
                }
                let phase = raw.value("relative_phase")?.unwrap_or(0.0);
                [
                    Complex64::new(w1 / norm, 0.0),
                    Complex64::from_polar(w2 / norm, phase),
                ]
            }
        };
        let scenario = Scenario::new(
            raw.value("dq")?.unwrap_or(0.0),
            raw.value("dp")?.unwrap_or(0.0),
            raw.value("sigma")?.unwrap_or(0.5),
            amplitudes,
        )?
        .with_midpoint(
            raw.value("q_mid")?.unwrap_or(0.0),
            raw.value("p_mid")?.unwrap_or(0.0),
        )?;

        let t_max = raw.value("t_max")?.unwrap_or(10.0);
        if !(t_max > 0.0 && f64::is_finite(t_max)) {
            return Err(CliError::Config(format!("`t_max` must be positive, got {t_max}")));
        }
        let n_samples = raw.value("n_samples")?.unwrap_or(1001);
        if n_samples < 2 {
            return Err(CliError::Config(format!("`n_samples` must be at least 2, got {n_samples}")));
        }
        let curves = match raw.get("curves") {
            None => Curve::ALL.to_vec(),
            Some(list) => parse_curves(list)?,
        };

        let grid = grid_spec(raw, &scenario)?;
        let snapshot_times = raw.list("snapshot_times")?.unwrap_or_else(|| vec![0.0]);
        if snapshot_times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(CliError::Config("`snapshot_times` must be nonnegative".into()));
        }

        let sweep = match (raw.get("sweep_axis"), raw.list("sweep_values")?, raw.list("sweep_log")?) {
            (None, None, None) => None,
            (axis, values, log) => {
                let axis = match axis.unwrap_or("dq") {
                    "dq" => SweepAxis::Dq,
                    "dp" => SweepAxis::Dp,
                    other => return Err(CliError::Config(format!("`sweep_axis` must be dq or dp, got `{other}`"))),
                };
                let values = match (values, log) {
                    (Some(v), None) => v,
                    (None, Some(l)) if l.len() == 3 && l[2] >= 1.0 && l[2].fract() == 0.0 => {
                        log_spaced(l[0], l[1], l[2] as usize)?
                    }
                    (None, Some(_)) => return Err(CliError::Config("`sweep_log` takes start, stop, count".into())),
                    (Some(_), Some(_)) => {
                        return Err(CliError::Config("give either `sweep_values` or `sweep_log`".into()))
                    }
                    (None, None) => return Err(CliError::Config("sweep needs `sweep_values` or `sweep_log`".into())),
                };
                if values.is_empty() || values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(CliError::Config("sweep values must be positive".into()));
                }
                Some(SweepSpec { axis, values })
            }
        };

        Ok(Self {
            name: raw.get("name").unwrap_or("run").to_string(),
            params,
            scenario,
            t_max,
            n_samples,
            include_prefactor: raw.flag("include_prefactor")?.unwrap_or(true),
            curves,
            output_dir: PathBuf::from(raw.get("output_dir").unwrap_or(".")),
            grid,
            snapshot_times,
            sweep,
        })
    }
}

/// Explicit grid keys, or a grid covering both packets with six standard
/// deviations of margin and fringes resolved at any rotation angle.
fn grid_spec(raw: &RawConfig, scenario: &Scenario) -> Result<GridSpec> {
    let sigma = scenario.sigma();
    let [(q1, p1), (q2, p2)] = scenario.centers();
    let q_margin = 6.0 * sigma.sqrt();
    let p_margin = 3.0 / sigma.sqrt();
    let q_range = raw
        .pair("grid_q")?
        .unwrap_or((q1.min(q2) - q_margin, q1.max(q2) + q_margin));
    let p_range = raw
        .pair("grid_p")?
        .unwrap_or((p1.min(p2) - p_margin, p1.max(p2) + p_margin));
    let d = scenario.effective_separation().value();
    let auto = |range: (f64, f64)| -> usize {
        // a fifth of a fringe per step leaves room for the evolved fringes
        let step = if d > 0.0 { 2.0 * std::f64::consts::PI / (5.0 * d) } else { f64::INFINITY };
        (((range.1 - range.0) / step).ceil() as usize + 1).max(201)
    };
    let nq = raw.value("grid_nq")?.unwrap_or_else(|| auto(q_range));
    let np = raw.value("grid_np")?.unwrap_or_else(|| auto(p_range));
    Ok(GridSpec::new(q_range, nq, p_range, np)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_lists() {
        let raw = RawConfig::parse(
            "# comment\n\nname = fig3\ndq = 16\ncurves = exact, gr\nt_max=60\ninclude_prefactor = no\n",
        )
        .unwrap();
        let cfg = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.name, "fig3");
        assert_eq!(cfg.scenario.dq(), 16.0);
        assert_eq!(cfg.curves, vec![Curve::Exact, Curve::GoldenRule]);
        assert_eq!(cfg.t_max, 60.0);
        assert!(!cfg.include_prefactor);
        assert_eq!(cfg.params, ModelParams::DEFAULT);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RawConfig::parse("dq 16").is_err());
        assert!(RawConfig::parse("colour = red").is_err());
        let raw = RawConfig::parse("n_samples = 1").unwrap();
        assert!(RunConfig::from_raw(&raw).is_err());
        let raw = RawConfig::parse("damping_rate = -1").unwrap();
        assert!(matches!(RunConfig::from_raw(&raw), Err(CliError::Model(_))));
        let raw = RawConfig::parse("curves = exact, wiggle").unwrap();
        assert!(RunConfig::from_raw(&raw).is_err());
        let raw = RawConfig::parse("sweep_values = 1, 2\nsweep_log = 1, 10, 3").unwrap();
        assert!(RunConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn sweep_log_spacing() {
        let raw = RawConfig::parse("sweep_axis = dp\nsweep_log = 10, 1000, 3").unwrap();
        let sweep = RunConfig::from_raw(&raw).unwrap().sweep.unwrap();
        assert_eq!(sweep.axis, SweepAxis::Dp);
        assert_eq!(sweep.values.len(), 3);
        assert!((sweep.values[1] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn amplitudes_are_normalized() {
        let raw = RawConfig::parse("amplitudes = 1, 0\ndq = 5").unwrap();
        let cfg = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.scenario.amplitudes()[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn default_grid_resolves_fringes() {
        let raw = RawConfig::parse("dq = 10").unwrap();
        let g = RunConfig::from_raw(&raw).unwrap().grid;
        assert!(g.q_min < -8.0 && g.q_max > 8.0);
        assert!(g.p_step() <= 2.0 * std::f64::consts::PI / 40.0);
    }
}
