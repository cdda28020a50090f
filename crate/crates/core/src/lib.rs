//! Battery life-loss modelling and schedule tracking for battery-integrated
//! wind farms.
//!
//! The crate is organised bottom-up:
//!
//! * [`degradation`] evaluates cycle-life curves and the closed-form life loss
//!   of a unidirectional SOC move.
//! * [`pwl`] builds the self-optimal piecewise-linear expansion of the loss
//!   primitive and emits it as mixed-integer constraints.
//! * [`milp`] is a small MILP modelling layer with a reference
//!   branch-and-bound solver.
//! * [`tracking`] builds and solves one look-ahead horizon.
//! * [`horizon`] drives the receding-horizon loop over a full day.
//! * [`rainflow`] counts cycles on SOC trajectories as an independent check.
//! * [`io`] covers time series, configuration, synthetic data and reports.

pub mod degradation;
pub mod horizon;
pub mod io;
pub mod milp;
pub mod pwl;
pub mod rainflow;
pub mod tracking;

pub use degradation::{BatteryParams, CycleLifeCurve, DegradationError};
pub use milp::{MilpModel, MilpSolution, SolveOptions, SolveStatus};
pub use pwl::PwlExpansion;

pub use tracking::{HorizonInput, HorizonSolution, ObjectiveMode, TrackingParams};
pub use horizon::{SimulationConfig, SimulationReport};
