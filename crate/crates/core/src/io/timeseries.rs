use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const HEADER: [&str; 2] = ["timestamp", "value"];

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: expected header `timestamp,value`, found `{found}`")]
    Header { path: PathBuf, found: String },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },
    #[error("{path}:{line}: timestamp {found} breaks the {step_min}-minute grid (expected {expected})")]
    Gap {
        path: PathBuf,
        line: u64,
        step_min: i64,
        expected: String,
        found: String,
    },
    #[error("{path}: step is {found} min, expected {expected} min")]
    StepMismatch { path: PathBuf, expected: i64, found: i64 },
    #[error("{path}: need at least two rows to infer the step")]
    TooShort { path: PathBuf },
    #[error("moving-average window {window} min is not a positive multiple of the {step} min step")]
    Window { window: i64, step: i64 },
}

/// A uniformly stepped series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub start: NaiveDateTime,
    pub step_min: i64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start: NaiveDateTime, step_min: i64, values: Vec<f64>) -> Self {
        TimeSeries { start, step_min, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, k: usize) -> NaiveDateTime {
        self.start + Duration::minutes(self.step_min * k as i64)
    }

    pub fn step_hours(&self) -> f64 {
        self.step_min as f64 / 60.0
    }
}

fn csv_err(path: &Path, e: csv::Error) -> TimeSeriesError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => TimeSeriesError::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => TimeSeriesError::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("{kind:?}"),
        },
    }
}

/// Reads a `timestamp,value` CSV. With `expected_step_min`, the inferred step
/// must match it.
pub fn load_timeseries(path: &Path, expected_step_min: Option<i64>) -> Result<TimeSeries, TimeSeriesError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(TimeSeriesError::Header {
            path: path.to_path_buf(),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows: Vec<(NaiveDateTime, f64, u64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let parse = |msg: String| TimeSeriesError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let ts = NaiveDateTime::parse_from_str(&rec[0], TIMESTAMP_FORMAT)
            .map_err(|e| parse(format!("bad timestamp `{}`: {e}", &rec[0])))?;
        let v: f64 = rec[1]
            .parse()
            .map_err(|e| parse(format!("bad value `{}`: {e}", &rec[1])))?;
        if !v.is_finite() {
            return Err(parse(format!("value `{}` is not finite", &rec[1])));
        }
        rows.push((ts, v, line));
    }
    if rows.len() < 2 {
        return Err(TimeSeriesError::TooShort { path: path.to_path_buf() });
    }
    let step = (rows[1].0 - rows[0].0).num_minutes();
    if let Some(exp) = expected_step_min {
        if step != exp {
            return Err(TimeSeriesError::StepMismatch {
                path: path.to_path_buf(),
                expected: exp,
                found: step,
            });
        }
    }
    if step <= 0 {
        return Err(TimeSeriesError::Gap {
            path: path.to_path_buf(),
            line: rows[1].2,
            step_min: step,
            expected: "a later timestamp".into(),
            found: rows[1].0.format(TIMESTAMP_FORMAT).to_string(),
        });
    }
    let start = rows[0].0;
    for (k, (ts, _, line)) in rows.iter().enumerate() {
        let expected = start + Duration::minutes(step * k as i64);
        if *ts != expected {
            return Err(TimeSeriesError::Gap {
                path: path.to_path_buf(),
                line: *line,
                step_min: step,
                expected: expected.format(TIMESTAMP_FORMAT).to_string(),
                found: ts.format(TIMESTAMP_FORMAT).to_string(),
            });
        }
    }
    Ok(TimeSeries {
        start,
        step_min: step,
        values: rows.into_iter().map(|r| r.1).collect(),
    })
}

/// Writes a `timestamp,value` CSV; values use the shortest round-trip form.
pub fn write_timeseries(path: &Path, ts: &TimeSeries) -> Result<(), TimeSeriesError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(HEADER).map_err(|e| csv_err(path, e))?;
    for (k, v) in ts.values.iter().enumerate() {
        w.write_record([ts.timestamp(k).format(TIMESTAMP_FORMAT).to_string(), format!("{v:?}")])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| TimeSeriesError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Centred moving average over `window_min`. Near the ends the window shrinks
/// symmetrically so it stays centred.
pub fn moving_average_schedule(forecast: &TimeSeries, window_min: i64) -> Result<TimeSeries, TimeSeriesError> {
    let step = forecast.step_min;
    if window_min <= 0 || step <= 0 || window_min % step != 0 {
        return Err(TimeSeriesError::Window {
            window: window_min,
            step,
        });
    }
    let w = (window_min / step) as usize;
    let n = forecast.len();
    let v = &forecast.values;
    let values = (0..n)
        .map(|k| {
            // Window of w points centred on k; even widths lean one step back.
            let back = w / 2;
            let fwd = w - 1 - back;
            let room = k.min(n - 1 - k);
            let lo = k - back.min(room);
            let hi = k + fwd.min(room);
            let slice = &v[lo..=hi];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect();
    Ok(TimeSeries {
        start: forecast.start,
        step_min: step,
        values,
    })
}
