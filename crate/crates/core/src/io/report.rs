//! Report files.
//!
//! * `trajectory.csv`: one row per applied step, columns [`TRAJECTORY_HEADER`].
//! * `totals.json`: `{"indices": {five run totals}, "diagnostics": {...}}`.
//! * `case_pair.json`: four cost rows for each of Case1 and Case2.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::timeseries::TIMESTAMP_FORMAT;
use crate::horizon::{CasePair, SimulationReport, Totals};
use crate::tracking::ObjectiveMode;

pub const TRAJECTORY_HEADER: [&str; 18] = [
    "timestamp",
    "p_sch",
    "p_wind_f",
    "p_dis",
    "p_ch",
    "p_joint",
    "soc",
    "p_out_lower",
    "p_out_upper",
    "l_loss_exact",
    "step_cost",
    "l_loss_model",
    "bess_cost",
    "penalty",
    "c_e",
    "unit_loss_price",
    "band_lower",
    "band_upper",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ReportError + '_ {
    move |e| ReportError::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mode: ObjectiveMode,
    pub applied_steps: usize,
    pub bess_cost_model: f64,
    pub max_gap: f64,
    pub suboptimal_solves: usize,
    pub total_nodes: usize,
    pub solve_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalsFile {
    pub indices: Totals,
    pub diagnostics: Diagnostics,
}

/// A row of `trajectory.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub timestamp: String,
    pub p_sch: f64,
    pub p_wind_f: f64,
    pub p_dis: f64,
    pub p_ch: f64,
    pub p_joint: f64,
    pub soc: f64,
    pub p_out_lower: f64,
    pub p_out_upper: f64,
    pub l_loss_exact: f64,
    pub step_cost: f64,
    pub l_loss_model: f64,
    pub bess_cost: f64,
    pub penalty: f64,
    pub c_e: f64,
    pub unit_loss_price: f64,
    pub band_lower: f64,
    pub band_upper: f64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ReportError::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Writes `trajectory.csv` and `totals.json` into `out_dir`; `start` and
/// `step_min` give the timestamp of series index 0.
pub fn write_report(
    report: &SimulationReport,
    out_dir: &Path,
    start: NaiveDateTime,
    step_min: i64,
) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let traj = out_dir.join("trajectory.csv");
    let mut w = csv::Writer::from_path(&traj).map_err(csv_err(&traj))?;
    for r in &report.records {
        let ts = start + Duration::minutes(step_min * r.t as i64);
        w.serialize(TrajectoryRow {
            timestamp: ts.format(TIMESTAMP_FORMAT).to_string(),
            p_sch: r.p_sch,
            p_wind_f: r.p_wind,
            p_dis: r.p_dis,
            p_ch: r.p_ch,
            p_joint: r.p_joint,
            soc: r.soc,
            p_out_lower: r.p_out_lower,
            p_out_upper: r.p_out_upper,
            l_loss_exact: r.loss_exact,
            step_cost: r.step_cost,
            l_loss_model: r.loss_model,
            bess_cost: r.bess_cost,
            penalty: r.penalty,
            c_e: r.c_e,
            unit_loss_price: r.unit_loss_price,
            band_lower: r.band_lower,
            band_upper: r.band_upper,
        })
        .map_err(csv_err(&traj))?;
    }
    if report.records.is_empty() {
        w.write_record(TRAJECTORY_HEADER).map_err(csv_err(&traj))?;
    }
    w.flush().map_err(io_err(&traj))?;

    let d = &report.diagnostics;
    let totals = TotalsFile {
        indices: report.totals,
        diagnostics: Diagnostics {
            mode: report.mode,
            applied_steps: report.records.len(),
            bess_cost_model: report.bess_cost_model,
            max_gap: d.iter().map(|x| x.gap).fold(0.0, f64::max),
            suboptimal_solves: d.iter().filter(|x| x.suboptimal).count(),
            total_nodes: d.iter().map(|x| x.nodes).sum(),
            solve_time_s: d.iter().map(|x| x.wall_time_s).sum(),
        },
    };
    let totals_path = out_dir.join("totals.json");
    write_json(&totals_path, &totals)?;
    Ok(vec![traj, totals_path])
}

pub fn write_case_pair(pair: &CasePair, out_dir: &Path) -> Result<PathBuf, ReportError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let path = out_dir.join("case_pair.json");
    write_json(&path, pair)?;
    Ok(path)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, ReportError> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    rdr.deserialize().collect::<Result<Vec<_>, _>>().map_err(csv_err(path))
}
