//! Small fixed-schema CSV tables.
//!
//! * cycle-test samples: `dod,cycles`
//! * horizon slice: `p_sch,p_wind_f,c_e`, one row per look-ahead step
//! * horizon solution: one row per step, columns [`SOLUTION_HEADER`]

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::ReportError;
use crate::tracking::{HorizonInput, HorizonSolution};

pub const SOLUTION_HEADER: [&str; 13] = [
    "step",
    "p_sch",
    "p_wind_f",
    "c_e",
    "p_dis",
    "p_ch",
    "p_joint",
    "soc",
    "p_out_lower",
    "p_out_upper",
    "l_loss_model",
    "l_loss_exact",
    "step_cost_model",
];

fn format_err(path: &Path, msg: impl ToString) -> ReportError {
    ReportError::Format {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    }
}

#[derive(Debug, Deserialize)]
struct SampleRow {
    dod: f64,
    cycles: f64,
}

/// Reads `(dod, cycles)` pairs.
pub fn load_cycle_samples(path: &Path) -> Result<Vec<(f64, f64)>, ReportError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format_err(path, e))?;
    let header = rdr.headers().map_err(|e| format_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["dod", "cycles"] {
        return Err(format_err(path, format!("expected header `dod,cycles`, found `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    rdr.deserialize::<SampleRow>()
        .map(|r| r.map(|r| (r.dod, r.cycles)).map_err(|e| format_err(path, e)))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct SliceRow {
    p_sch: f64,
    p_wind_f: f64,
    c_e: f64,
}

/// Reads a look-ahead slice; the initial SOC is supplied separately.
pub fn load_horizon_slice(path: &Path, soc_init: f64) -> Result<HorizonInput, ReportError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format_err(path, e))?;
    let mut input = HorizonInput {
        soc_init,
        p_sch: Vec::new(),
        p_wind_f: Vec::new(),
        c_e: Vec::new(),
    };
    for row in rdr.deserialize::<SliceRow>() {
        let row = row.map_err(|e| format_err(path, e))?;
        input.p_sch.push(row.p_sch);
        input.p_wind_f.push(row.p_wind_f);
        input.c_e.push(row.c_e);
    }
    Ok(input)
}

pub fn write_horizon_slice(path: &Path, input: &HorizonInput) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_err(path, e))?;
    for k in 0..input.p_sch.len() {
        w.serialize(SliceRow {
            p_sch: input.p_sch[k],
            p_wind_f: input.p_wind_f[k],
            c_e: input.c_e[k],
        })
        .map_err(|e| format_err(path, e))?;
    }
    w.flush().map_err(|e| format_err(path, e))
}

/// Writes the per-step table of a horizon solution; `c_bess` prices the
/// model loss and `penalty(step)` gives the step's penalty.
pub fn write_horizon_solution(
    path: &Path,
    solution: &HorizonSolution,
    c_bess: f64,
    penalty: impl Fn(usize) -> f64,
) -> Result<PathBuf, ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_err(path, e))?;
    w.write_record(SOLUTION_HEADER).map_err(|e| format_err(path, e))?;
    for (k, s) in solution.steps.iter().enumerate() {
        let cost = c_bess * s.loss_model + penalty(k);
        let row = [
            k as f64,
            s.p_sch,
            s.p_wind_f,
            s.c_e,
            s.p_dis,
            s.p_ch,
            s.p_joint,
            s.soc,
            s.p_out_lower,
            s.p_out_upper,
            s.loss_model,
            s.loss_exact,
            cost,
        ];
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec[0] = k.to_string();
        w.write_record(&rec).map_err(|e| format_err(path, e))?;
    }
    w.flush().map_err(|e| format_err(path, e))?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_header_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "dod,cycles\n0.1,20000\n0.5,5000\n").unwrap();
        assert_eq!(load_cycle_samples(&p).unwrap(), vec![(0.1, 20000.0), (0.5, 5000.0)]);
        std::fs::write(&p, "depth,n\n0.1,20000\n").unwrap();
        assert!(load_cycle_samples(&p).unwrap_err().to_string().contains("dod,cycles"));
    }

    #[test]
    fn slice_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("slice.csv");
        let input = HorizonInput {
            soc_init: 0.4,
            p_sch: vec![100.0, 101.5],
            p_wind_f: vec![90.0, 0.1 + 0.2],
            c_e: vec![35.0, 70.0],
        };
        write_horizon_slice(&p, &input).unwrap();
        assert_eq!(load_horizon_slice(&p, 0.4).unwrap(), input);
    }
}
