//! TOML run configuration.
//!
//! ```toml
//! currency = "currency units"
//!
//! [battery]            # ratings, limits, efficiencies
//! c_rated = 25.0
//! c_bess = 1.285e7
//! ...
//! [curve]
//! family = "biexp"     # or "poly4" with a = [a0, a1, a2, a3, a4]
//! b1 = 49660.0
//! ...
//! [tracking]           # band, penalties, PWL segments, horizon
//! [solver]             # kind = "reference" | "external"
//! [solver.options]
//! [simulation]         # start_index, steps, soc_initial, mode
//! [data]               # series CSV paths; synthetic day when absent
//! ```
//!
//! Relative data paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::synthetic::{generate_synthetic_day, SyntheticOptions};
use super::timeseries::{load_timeseries, TimeSeries, TimeSeriesError};
use crate::degradation::{BatteryParams, CurveSpec, CycleLifeCurve};
use crate::horizon::{SeriesData, SimulationConfig};
use crate::milp::{SolveOptions, SolverKind};
use crate::tracking::TrackingParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax error: {0}")]
    Parse(String),
    #[error("battery section: {0}")]
    Battery(String),
    #[error("curve section: {0}")]
    Curve(String),
    #[error("tracking section: {0}")]
    Tracking(String),
    #[error("solver section: {0}")]
    Solver(String),
    #[error("simulation section: at least one applied step is required")]
    NoSteps,
    #[error("simulation section: soc_initial {soc} outside battery SOC bounds [{lo}, {hi}]")]
    SocInitial { soc: f64, lo: f64, hi: f64 },
    #[error("series `{series}` has a {step_min}-minute step but tracking.dt_h is {dt_h} h")]
    StepMismatch { series: String, step_min: i64, dt_h: f64 },
    #[error("series `{series}` has {len} values; {needed} needed for the applied steps plus the look-ahead")]
    SeriesTooShort { series: String, len: usize, needed: usize },
    #[error("series `{series}` does not start at the same timestamp as p_sch")]
    Misaligned { series: String },
    #[error(transparent)]
    Data(#[from] TimeSeriesError),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub options: SolveOptions,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub p_sch: Option<PathBuf>,
    pub p_wind_f: Option<PathBuf>,
    pub c_e: Option<PathBuf>,
    pub p_wind_actual: Option<PathBuf>,
    /// Used when no series paths are given.
    pub synthetic: SyntheticOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub currency: String,
    pub battery: BatteryParams,
    pub curve: CurveSpec,
    pub tracking: TrackingParams,
    pub solver: SolverConfig,
    pub simulation: SimulationConfig,
    pub data: DataPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            currency: "currency units".into(),
            battery: BatteryParams::default(),
            curve: CurveSpec::default(),
            tracking: TrackingParams::default(),
            solver: SolverConfig::default(),
            simulation: SimulationConfig::default(),
            data: DataPaths::default(),
        }
    }
}

/// Series of a run on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSeries {
    pub start: NaiveDateTime,
    pub step_min: i64,
    pub data: SeriesData,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.data.p_sch,
            &mut cfg.data.p_wind_f,
            &mut cfg.data.c_e,
            &mut cfg.data.p_wind_actual,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn curve(&self) -> Result<CycleLifeCurve, ConfigError> {
        CycleLifeCurve::try_from(self.curve).map_err(|e| ConfigError::Curve(e.to_string()))
    }

    /// Checks that do not need the data files.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.battery
            .validate()
            .map_err(|e| ConfigError::Battery(e.to_string()))?;
        self.curve()?;
        self.tracking
            .validate()
            .map_err(|e| ConfigError::Tracking(e.to_string()))?;
        self.solver.options.validate().map_err(ConfigError::Solver)?;
        if self.simulation.steps == 0 {
            return Err(ConfigError::NoSteps);
        }
        let s = self.simulation.soc_initial;
        if !(s >= self.battery.soc_min && s <= self.battery.soc_max) {
            return Err(ConfigError::SocInitial {
                soc: s,
                lo: self.battery.soc_min,
                hi: self.battery.soc_max,
            });
        }
        Ok(())
    }

    /// Series length needed for the configured run.
    pub fn required_len(&self) -> usize {
        let window = self.tracking.steps().unwrap_or(1);
        self.simulation.start_index + self.simulation.steps + window - 1
    }

    /// Loads the configured series, or generates the synthetic day when no
    /// paths are set, and checks them against the run.
    pub fn load_series(&self) -> Result<LoadedSeries, ConfigError> {
        let d = &self.data;
        let (p_sch, p_wind_f, c_e, actual) = match (&d.p_sch, &d.p_wind_f, &d.c_e) {
            (None, None, None) => {
                let mut opts = d.synthetic.clone();
                opts.steps = opts.steps.max(self.required_len());
                let day = generate_synthetic_day(&opts);
                (day.p_sch, day.p_wind_f, day.c_e, None)
            }
            (Some(a), Some(b), Some(c)) => {
                let actual = d.p_wind_actual.as_deref().map(|p| load_timeseries(p, None)).transpose()?;
                (load_timeseries(a, None)?, load_timeseries(b, None)?, load_timeseries(c, None)?, actual)
            }
            _ => {
                return Err(ConfigError::Parse(
                    "data section needs all of p_sch, p_wind_f and c_e, or none of them".into(),
                ))
            }
        };
        let series: Vec<(&str, &TimeSeries)> = [("p_sch", &p_sch), ("p_wind_f", &p_wind_f), ("c_e", &c_e)]
            .into_iter()
            .chain(actual.as_ref().map(|a| ("p_wind_actual", a)))
            .collect();
        self.check_series(&series)?;
        Ok(LoadedSeries {
            start: p_sch.start,
            step_min: p_sch.step_min,
            data: SeriesData {
                p_sch: p_sch.values,
                p_wind_f: p_wind_f.values,
                c_e: c_e.values,
                p_wind_actual: actual.map(|a| a.values),
            },
        })
    }

    pub fn check_series(&self, series: &[(&str, &TimeSeries)]) -> Result<(), ConfigError> {
        let needed = self.required_len();
        let start = series.first().map(|s| s.1.start);
        for (name, ts) in series {
            if ((ts.step_min as f64) / 60.0 - self.tracking.dt_h).abs() > 1e-9 {
                return Err(ConfigError::StepMismatch {
                    series: name.to_string(),
                    step_min: ts.step_min,
                    dt_h: self.tracking.dt_h,
                });
            }
            if Some(ts.start) != start {
                return Err(ConfigError::Misaligned {
                    series: name.to_string(),
                });
            }
            if ts.len() < needed {
                return Err(ConfigError::SeriesTooShort {
                    series: name.to_string(),
                    len: ts.len(),
                    needed,
                });
            }
        }
        Ok(())
    }
}
