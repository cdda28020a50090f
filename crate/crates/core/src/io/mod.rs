//! Time series files, run configuration, synthetic data, reports and plots.

mod config;
mod plot;
mod report;
mod synthetic;
mod tables;
mod timeseries;

pub use config::{ConfigError, DataPaths, LoadedSeries, RunConfig, SolverConfig};
pub use plot::{render_plots, PlotError, PLOT_FILES};
pub use report::{read_trajectory, write_case_pair, write_report, ReportError, TRAJECTORY_HEADER};
pub use synthetic::{generate_synthetic_day, SyntheticDay, SyntheticOptions};
pub use tables::{
    load_cycle_samples, load_horizon_slice, write_horizon_slice, write_horizon_solution, SOLUTION_HEADER,
};
pub use timeseries::{
    load_timeseries, moving_average_schedule, write_timeseries, TimeSeries, TimeSeriesError, TIMESTAMP_FORMAT,
};
