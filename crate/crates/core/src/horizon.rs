//! Receding-horizon driver: solve a look-ahead window, apply its first step,
//! advance the SOC and repeat.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::degradation::{BatteryParams, CycleLifeCurve, DegradationError};
use crate::milp::{MilpSolver, SolveOptions};
use crate::tracking::{
    loss_expansion, solve_horizon, HorizonInput, HorizonSolution, ObjectiveMode, TrackingError, TrackingParams,
};

/// Slack allowed on the SOC bounds after an applied step.
pub const SOC_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HorizonError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("horizon solve failed at step {t}: {source}\ninput: {input}")]
    Solve {
        t: usize,
        #[source]
        source: TrackingError,
        input: String,
    },
    #[error("SOC {soc} left [{lo}, {hi}] after the applied step")]
    SocOutOfRange { soc: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Degradation(#[from] DegradationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Index of the first applied step in the series.
    pub start_index: usize,
    /// Number of applied steps.
    pub steps: usize,
    pub soc_initial: f64,
    pub mode: ObjectiveMode,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            start_index: 0,
            steps: 96,
            soc_initial: 0.5,
            mode: ObjectiveMode::Case1,
        }
    }
}

/// Full-run input series on a common step grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesData {
    pub p_sch: Vec<f64>,
    pub p_wind_f: Vec<f64>,
    pub c_e: Vec<f64>,
    /// Realised wind; the forecast is used when absent.
    pub p_wind_actual: Option<Vec<f64>>,
}

impl SeriesData {
    pub fn len(&self) -> usize {
        self.p_sch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_sch.is_empty()
    }

    fn realised_wind(&self, t: usize) -> f64 {
        match &self.p_wind_actual {
            Some(a) => a[t],
            None => self.p_wind_f[t],
        }
    }
}

/// One applied step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub p_sch: f64,
    pub band_lower: f64,
    pub band_upper: f64,
    pub p_wind: f64,
    pub c_e: f64,
    pub v_dis: bool,
    pub v_ch: bool,
    pub p_dis: f64,
    pub p_ch: f64,
    pub p_joint: f64,
    pub soc: f64,
    pub p_out_lower: f64,
    pub p_out_upper: f64,
    pub loss_model: f64,
    pub loss_exact: f64,
    /// `C_BESS · loss_exact`.
    pub bess_cost: f64,
    pub penalty: f64,
    pub step_cost: f64,
    /// `C_BESS · λ_loss(soc)`: currency per MWh of throughput at the
    /// post-step SOC, for either direction.
    pub unit_loss_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostic {
    pub t: usize,
    pub objective: f64,
    pub gap: f64,
    pub nodes: usize,
    pub wall_time_s: f64,
    pub suboptimal: bool,
}

/// Run totals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub total_cost: f64,
    pub bess_cost: f64,
    pub penalty: f64,
    pub throughput_mwh: f64,
    pub out_of_limit_mwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub mode: ObjectiveMode,
    pub dt_h: f64,
    pub soc_initial: f64,
    pub records: Vec<StepRecord>,
    pub totals: Totals,
    /// Battery cost on the PWL interpolant, for comparison with the exact one.
    pub bess_cost_model: f64,
    pub diagnostics: Vec<SolveDiagnostic>,
}

/// Four-row cost comparison of a Case1/Case2 pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseCosts {
    pub objective_value: f64,
    pub penalty: f64,
    pub bess_cost: f64,
    pub sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CasePair {
    pub case1: CaseCosts,
    pub case2: CaseCosts,
}

impl CaseCosts {
    pub fn from_report(report: &SimulationReport) -> Self {
        let t = report.totals;
        CaseCosts {
            objective_value: match report.mode {
                ObjectiveMode::Case1 => t.total_cost,
                ObjectiveMode::Case2 => t.penalty,
            },
            penalty: t.penalty,
            bess_cost: t.bess_cost,
            sum: t.total_cost,
        }
    }
}

pub fn update_soc(
    s_prev: f64,
    p_dis: f64,
    p_ch: f64,
    battery: &BatteryParams,
    dt_h: f64,
) -> Result<f64, HorizonError> {
    let s = s_prev - battery.eta_dis * p_dis * dt_h / battery.c_rated + battery.eta_ch * p_ch * dt_h / battery.c_rated;
    if s < battery.soc_min - SOC_TOL || s > battery.soc_max + SOC_TOL || !s.is_finite() {
        return Err(HorizonError::SocOutOfRange {
            soc: s,
            lo: battery.soc_min,
            hi: battery.soc_max,
        });
    }
    Ok(s)
}

pub fn summarize(records: &[StepRecord], dt_h: f64) -> Totals {
    let mut t = Totals::default();
    for r in records {
        t.bess_cost += r.bess_cost;
        t.penalty += r.penalty;
        t.throughput_mwh += (r.p_dis + r.p_ch) * dt_h;
        t.out_of_limit_mwh += (r.p_out_lower + r.p_out_upper) * dt_h;
    }
    t.total_cost = t.bess_cost + t.penalty;
    t
}

/// Horizon input for the window starting at `t`.
pub fn slice_input(data: &SeriesData, t: usize, window: usize, soc_init: f64) -> HorizonInput {
    HorizonInput {
        soc_init,
        p_sch: data.p_sch[t..t + window].to_vec(),
        p_wind_f: data.p_wind_f[t..t + window].to_vec(),
        c_e: data.c_e[t..t + window].to_vec(),
    }
}

fn check_config(
    config: &SimulationConfig,
    data: &SeriesData,
    battery: &BatteryParams,
    window: usize,
) -> Result<(), HorizonError> {
    if config.steps == 0 {
        return Err(HorizonError::Config("at least one applied step is required".into()));
    }
    let n = data.len();
    if data.p_wind_f.len() != n || data.c_e.len() != n {
        return Err(HorizonError::Config(format!(
            "series lengths differ: p_sch {}, p_wind_f {}, c_e {}",
            n,
            data.p_wind_f.len(),
            data.c_e.len()
        )));
    }
    if let Some(a) = &data.p_wind_actual {
        if a.len() != n {
            return Err(HorizonError::Config(format!("actual wind has {} values, expected {n}", a.len())));
        }
    }
    let need = config.start_index + config.steps + window - 1;
    if n < need {
        return Err(HorizonError::Config(format!(
            "series have {n} values; {need} needed for {} steps from index {} plus a {window}-step look-ahead",
            config.steps, config.start_index
        )));
    }
    if !(config.soc_initial >= battery.soc_min && config.soc_initial <= battery.soc_max) {
        return Err(HorizonError::Config(format!(
            "initial SOC {} outside [{}, {}]",
            config.soc_initial, battery.soc_min, battery.soc_max
        )));
    }
    Ok(())
}

pub fn run_receding_horizon(
    config: &SimulationConfig,
    data: &SeriesData,
    params: &TrackingParams,
    battery: &BatteryParams,
    curve: &CycleLifeCurve,
    solver: &dyn MilpSolver,
    options: &SolveOptions,
) -> Result<SimulationReport, HorizonError> {
    run_receding_horizon_with(config, data, params, battery, curve, solver, options, |_, _, _| {})
}

/// As [`run_receding_horizon`], calling `observe(t, input, solution)` after
/// every window solve.
#[allow(clippy::too_many_arguments)]
pub fn run_receding_horizon_with<F>(
    config: &SimulationConfig,
    data: &SeriesData,
    params: &TrackingParams,
    battery: &BatteryParams,
    curve: &CycleLifeCurve,
    solver: &dyn MilpSolver,
    options: &SolveOptions,
    mut observe: F,
) -> Result<SimulationReport, HorizonError>
where
    F: FnMut(usize, &HorizonInput, &HorizonSolution),
{
    let params = TrackingParams {
        mode: config.mode,
        ..params.clone()
    };
    params.validate()?;
    battery.validate()?;
    let window = params.steps()?;
    check_config(config, data, battery, window)?;
    let expansion = loss_expansion(&params, battery, curve)?;
    let dt = params.dt_h;

    let mut soc = config.soc_initial;
    let mut records = Vec::with_capacity(config.steps);
    let mut diagnostics = Vec::with_capacity(config.steps);
    let mut bess_cost_model = 0.0;
    for t in config.start_index..config.start_index + config.steps {
        let input = slice_input(data, t, window, soc);
        let started = Instant::now();
        let sol = solve_horizon(&params, battery, curve, &input, solver, options).map_err(|source| {
            HorizonError::Solve {
                t,
                source,
                input: serde_json::to_string(&input).unwrap_or_default(),
            }
        })?;
        let wall = started.elapsed().as_secs_f64();
        observe(t, &input, &sol);
        diagnostics.push(SolveDiagnostic {
            t,
            objective: sol.objective,
            gap: sol.gap,
            nodes: sol.nodes,
            wall_time_s: wall,
            suboptimal: sol.suboptimal,
        });

        let first = &sol.steps[0];
        let (p_dis, p_ch) = (first.p_dis, first.p_ch);
        let next = update_soc(soc, p_dis, p_ch, battery, dt)?.clamp(battery.soc_min, battery.soc_max);
        let p_wind = data.realised_wind(t);
        let p_joint = p_wind + p_dis - p_ch;
        let (p_out_lower, p_out_upper) = params.out_of_limit(data.p_sch[t], p_joint);
        let loss_exact = curve.step_loss_exact(soc, next)?;
        let loss_model = (expansion.eval_clamped(next) - expansion.eval_clamped(soc)).abs();
        let bess_cost = battery.c_bess * loss_exact;
        let penalty = params.penalty(data.c_e[t], p_out_lower, p_out_upper);
        bess_cost_model += battery.c_bess * loss_model;
        records.push(StepRecord {
            t,
            p_sch: data.p_sch[t],
            band_lower: params.lower_limit(data.p_sch[t]),
            band_upper: params.upper_limit(data.p_sch[t]),
            p_wind,
            c_e: data.c_e[t],
            v_dis: first.v_dis,
            v_ch: first.v_ch,
            p_dis,
            p_ch,
            p_joint,
            soc: next,
            p_out_lower,
            p_out_upper,
            loss_model,
            loss_exact,
            bess_cost,
            penalty,
            step_cost: bess_cost + penalty,
            unit_loss_price: battery.c_bess * curve.loss_coefficient(battery.c_rated, next)?,
        });
        soc = next;
    }
    let totals = summarize(&records, dt);
    Ok(SimulationReport {
        mode: config.mode,
        dt_h: dt,
        soc_initial: config.soc_initial,
        records,
        totals,
        bess_cost_model,
        diagnostics,
    })
}

/// Runs the same configuration under both objective modes.
pub fn run_case_pair(
    config: &SimulationConfig,
    data: &SeriesData,
    params: &TrackingParams,
    battery: &BatteryParams,
    curve: &CycleLifeCurve,
    solver: &dyn MilpSolver,
    options: &SolveOptions,
) -> Result<(SimulationReport, SimulationReport, CasePair), HorizonError> {
    let mut c = config.clone();
    c.mode = ObjectiveMode::Case1;
    let r1 = run_receding_horizon(&c, data, params, battery, curve, solver, options)?;
    c.mode = ObjectiveMode::Case2;
    let r2 = run_receding_horizon(&c, data, params, battery, curve, solver, options)?;
    let pair = CasePair {
        case1: CaseCosts::from_report(&r1),
        case2: CaseCosts::from_report(&r2),
    };
    Ok((r1, r2, pair))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::ReferenceSolver;
    use approx::assert_relative_eq;

    #[test]
    fn update_soc_examples() {
        let b = BatteryParams::default();
        assert_eq!(update_soc(0.5, 0.0, 0.0, &b, 0.25).unwrap(), 0.5);
        assert_relative_eq!(update_soc(0.5, 10.0, 0.0, &b, 0.25).unwrap(), 0.395, epsilon = 1e-15);
        assert_relative_eq!(update_soc(0.5, 0.0, 10.0, &b, 0.25).unwrap(), 0.595, epsilon = 1e-15);
        assert!(matches!(
            update_soc(0.16, 10.0, 0.0, &b, 0.25),
            Err(HorizonError::SocOutOfRange { .. })
        ));
    }

    fn record(p_dis: f64, p_ch: f64) -> StepRecord {
        StepRecord {
            t: 0,
            p_sch: 0.0,
            band_lower: 0.0,
            band_upper: 0.0,
            p_wind: 0.0,
            c_e: 0.0,
            v_dis: p_dis > 0.0,
            v_ch: p_ch > 0.0,
            p_dis,
            p_ch,
            p_joint: 0.0,
            soc: 0.5,
            p_out_lower: 0.0,
            p_out_upper: 0.0,
            loss_model: 0.0,
            loss_exact: 0.0,
            bess_cost: 0.0,
            penalty: 0.0,
            step_cost: 0.0,
            unit_loss_price: 0.0,
        }
    }

    #[test]
    fn summarize_examples() {
        assert_eq!(summarize(&[record(0.0, 0.0)], 0.25), Totals::default());
        let t = summarize(&[record(4.0, 0.0), record(0.0, 4.0)], 0.25);
        assert_relative_eq!(t.throughput_mwh, 2.0);
    }

    #[test]
    fn short_series_rejected() {
        let data = SeriesData {
            p_sch: vec![100.0; 10],
            p_wind_f: vec![100.0; 10],
            c_e: vec![50.0; 10],
            p_wind_actual: None,
        };
        let cfg = SimulationConfig {
            steps: 4,
            ..SimulationConfig::default()
        };
        let err = run_receding_horizon(
            &cfg,
            &data,
            &TrackingParams::default(),
            &BatteryParams::default(),
            &CycleLifeCurve::lfp_reference(),
            &ReferenceSolver::default(),
            &SolveOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("11 needed"), "{err}");
    }

    #[test]
    fn single_step_matches_single_solve() {
        let params = TrackingParams {
            n_seg: 4,
            ..TrackingParams::default()
        };
        let p_sch: Vec<f64> = (0..8).map(|k| 100.0 + 5.0 * k as f64).collect();
        let p_wind: Vec<f64> = (0..8).map(|k| 90.0 + 7.0 * k as f64).collect();
        let data = SeriesData {
            p_sch: p_sch.clone(),
            p_wind_f: p_wind.clone(),
            c_e: vec![60.0; 8],
            p_wind_actual: None,
        };
        let cfg = SimulationConfig {
            steps: 1,
            ..SimulationConfig::default()
        };
        let b = BatteryParams::default();
        let curve = CycleLifeCurve::lfp_reference();
        let solver = ReferenceSolver::default();
        let opts = SolveOptions::default();
        let report = run_receding_horizon(&cfg, &data, &params, &b, &curve, &solver, &opts).unwrap();
        let sol = solve_horizon(&params, &b, &curve, &slice_input(&data, 0, 8, 0.5), &solver, &opts).unwrap();
        let r = &report.records[0];
        assert_eq!(r.p_dis, sol.steps[0].p_dis);
        assert_eq!(r.p_ch, sol.steps[0].p_ch);
        assert_relative_eq!(r.soc, sol.steps[0].soc, epsilon = 1e-7);
        assert_relative_eq!(r.penalty, params.penalty(60.0, sol.steps[0].p_out_lower, sol.steps[0].p_out_upper), epsilon = 1e-6);
    }
}
