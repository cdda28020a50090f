//! Seeded synthetic day.
//!
//! With `h` the hour of day (steps of `step_min`, starting at midnight):
//!
//! ```text
//! P_sch(h)  = base + swing·sin(2π(h − 8)/24) + ripple·sin(2π h/6)
//! e_k       = 0.7·e_{k−1} + 0.3·u_k,   u_k ~ U(−1, 1),  e_{−1} = 0
//! P_wind(k) = max(0, P_sch(k) + amplitude·e_k)
//! C_E(h)    = peak_price  for peak_start <= h < peak_end, else offpeak_price
//! ```
//!
//! `|e_k| <= 1`, so the forecast stays within `amplitude` of the schedule.

use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::timeseries::{TimeSeries, TIMESTAMP_FORMAT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticOptions {
    pub seed: u64,
    pub steps: usize,
    pub step_min: i64,
    pub start: String,
    /// MW
    pub base: f64,
    /// MW
    pub swing: f64,
    /// MW
    pub ripple: f64,
    /// Deviation bound, MW.
    pub amplitude: f64,
    pub peak_price: f64,
    pub offpeak_price: f64,
    pub peak_start_h: f64,
    pub peak_end_h: f64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions {
            seed: 42,
            steps: 104,
            step_min: 15,
            start: "2019-01-01T00:00:00".into(),
            base: 90.0,
            swing: 40.0,
            ripple: 10.0,
            amplitude: 12.0,
            peak_price: 70.0,
            offpeak_price: 35.0,
            peak_start_h: 8.0,
            peak_end_h: 22.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDay {
    pub p_sch: TimeSeries,
    pub p_wind_f: TimeSeries,
    pub c_e: TimeSeries,
}

pub fn generate_synthetic_day(opts: &SyntheticOptions) -> SyntheticDay {
    use std::f64::consts::PI;
    let start = NaiveDateTime::parse_from_str(&opts.start, TIMESTAMP_FORMAT)
        .unwrap_or_else(|_| NaiveDateTime::parse_from_str("2019-01-01T00:00:00", TIMESTAMP_FORMAT).expect("literal"));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut p_sch = Vec::with_capacity(opts.steps);
    let mut p_wind = Vec::with_capacity(opts.steps);
    let mut c_e = Vec::with_capacity(opts.steps);
    let mut e = 0.0;
    for k in 0..opts.steps {
        let h = (k as f64 * opts.step_min as f64 / 60.0) % 24.0;
        let s = opts.base + opts.swing * (2.0 * PI * (h - 8.0) / 24.0).sin() + opts.ripple * (2.0 * PI * h / 6.0).sin();
        let u: f64 = rng.gen_range(-1.0..=1.0);
        e = 0.7 * e + 0.3 * u;
        p_sch.push(s);
        p_wind.push((s + opts.amplitude * e).max(0.0));
        c_e.push(if h >= opts.peak_start_h && h < opts.peak_end_h {
            opts.peak_price
        } else {
            opts.offpeak_price
        });
    }
    SyntheticDay {
        p_sch: TimeSeries::new(start, opts.step_min, p_sch),
        p_wind_f: TimeSeries::new(start, opts.step_min, p_wind),
        c_e: TimeSeries::new(start, opts.step_min, c_e),
    }
}
