//! Benchmark fixtures.

use bess_core::horizon::SeriesData;
use bess_core::io::{generate_synthetic_day, SyntheticOptions};
use bess_core::tracking::HorizonInput;

/// The default synthetic day as simulation input.
pub fn synthetic_series() -> SeriesData {
    let day = generate_synthetic_day(&SyntheticOptions::default());
    SeriesData {
        p_sch: day.p_sch.values,
        p_wind_f: day.p_wind_f.values,
        c_e: day.c_e.values,
        p_wind_actual: None,
    }
}

/// An 8-step window of the synthetic day starting at `t`.
pub fn window(t: usize) -> HorizonInput {
    let data = synthetic_series();
    bess_core::horizon::slice_input(&data, t, 8, 0.5)
}
