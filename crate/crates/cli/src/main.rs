//! `bess-track`: curve fitting, single-horizon solves, receding-horizon
//! simulation, model validation, plotting and synthetic data.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration or input error,
//! 3 infeasible model, 4 solver limit.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bess_core::degradation::{fit_polynomial_curve, CurveSpec, DegradationError};
use bess_core::horizon::{run_case_pair, run_receding_horizon, slice_input, HorizonError};
use bess_core::io::{
    generate_synthetic_day, load_cycle_samples, load_horizon_slice, load_timeseries, render_plots,
    write_case_pair, write_horizon_solution, write_report, write_timeseries, ConfigError, RunConfig,
    TimeSeriesError,
};
use bess_core::milp::lp_format::to_lp_string;
use bess_core::milp::{solver_for, SolverKind};
use bess_core::rainflow::compare_models;
use bess_core::tracking::{
    build_horizon_model, evaluate_solution_cost, loss_expansion, solve_horizon, TrackingError,
};
use bess_core::ObjectiveMode;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bess-track", version, about = "Battery life-loss aware schedule tracking")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Objective: case1 (life loss + penalty) or case2 (penalty only).
    #[arg(long, global = true)]
    mode: Option<ObjectiveMode>,
    /// Number of PWL segments.
    #[arg(long, global = true, value_name = "N")]
    lambda: Option<usize>,
    #[arg(long, global = true)]
    solver: Option<SolverKind>,
    /// Seed of the synthetic day.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a quartic cycle-life curve to `dod,cycles` samples.
    Fit {
        #[arg(value_name = "SAMPLES")]
        samples: PathBuf,
    },
    /// Solve one look-ahead window.
    SolveOne {
        /// `p_sch,p_wind_f,c_e` slice; the configured series window otherwise.
        #[arg(long, value_name = "CSV")]
        input: Option<PathBuf>,
        /// Initial SOC; the configured initial SOC otherwise.
        #[arg(long)]
        soc: Option<f64>,
        /// Also write the model as `model.lp`.
        #[arg(long)]
        dump_lp: bool,
    },
    /// Run the receding-horizon simulation.
    Simulate {
        /// Run Case1 and Case2 and write the cost comparison.
        #[arg(long)]
        pair: bool,
    },
    /// Print the PWL report and, given a SOC trajectory, the rainflow comparison.
    Validate {
        /// `timestamp,value` SOC series.
        #[arg(long, value_name = "CSV")]
        soc: Option<PathBuf>,
    },
    /// Render charts of a trajectory.
    Plot {
        /// Defaults to `<out>/trajectory.csv`.
        #[arg(value_name = "CSV")]
        trajectory: Option<PathBuf>,
    },
    /// Write the synthetic day as `timestamp,value` series.
    GenData,
}

/// Bad configuration or input data.
#[derive(Debug)]
struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_err(e: impl fmt::Display) -> anyhow::Error {
    InputError(e.to_string()).into()
}

fn tracking_code(e: &TrackingError) -> u8 {
    match e {
        TrackingError::Infeasible { .. } => 3,
        TrackingError::Unbounded | TrackingError::SolverLimit(_) => 4,
        TrackingError::InvalidParams(_) | TrackingError::Dimension { .. } | TrackingError::InvalidInput(_) => 2,
        _ => 1,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>()
            || cause.is::<ConfigError>()
            || cause.is::<TimeSeriesError>()
            || cause.is::<DegradationError>()
        {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<TrackingError>() {
            return tracking_code(e);
        }
        if let Some(e) = cause.downcast_ref::<HorizonError>() {
            return match e {
                HorizonError::Solve { source, .. } => tracking_code(source),
                HorizonError::Tracking(source) => tracking_code(source),
                HorizonError::Config(_) | HorizonError::Degradation(_) => 2,
                HorizonError::SocOutOfRange { .. } => 1,
            };
        }
    }
    1
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = g.mode {
        cfg.simulation.mode = m;
        cfg.tracking.mode = m;
    }
    if let Some(n) = g.lambda {
        cfg.tracking.n_seg = n;
    }
    if let Some(k) = g.solver {
        cfg.solver.kind = k;
    }
    if let Some(s) = g.seed {
        cfg.data.synthetic.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn fit(g: &Global, samples: &Path) -> Result<()> {
    let pts = load_cycle_samples(samples).map_err(input_err)?;
    let curve = fit_polynomial_curve(&pts)?;
    let mut max_rel: f64 = 0.0;
    for &(d, n) in &pts {
        max_rel = max_rel.max(((curve.cycles_to_failure(d)? - n) / n).abs());
    }
    let spec = CurveSpec::from(curve);
    fs::create_dir_all(&g.out)?;
    let path = g.out.join("curve.json");
    write_json(&path, &spec)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "curve": spec,
            "samples": pts.len(),
            "max_rel_residual": max_rel,
        }))?
    );
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn solve_one(g: &Global, input: Option<&Path>, soc: Option<f64>, dump_lp: bool) -> Result<()> {
    let cfg = load_config(g)?;
    let curve = cfg.curve()?;
    let mut params = cfg.tracking.clone();
    params.mode = cfg.simulation.mode;
    let soc = soc.unwrap_or(cfg.simulation.soc_initial);
    let input = match input {
        Some(p) => load_horizon_slice(p, soc).map_err(input_err)?,
        None => {
            let series = cfg.load_series()?;
            slice_input(&series.data, cfg.simulation.start_index, params.steps()?, soc)
        }
    };
    fs::create_dir_all(&g.out)?;
    if dump_lp {
        let hm = build_horizon_model(&params, &cfg.battery, &curve, &input)?;
        fs::write(g.out.join("model.lp"), to_lp_string(&hm.model))?;
    }
    let solver = solver_for(cfg.solver.kind).map_err(input_err)?;
    let sol = solve_horizon(&params, &cfg.battery, &curve, &input, solver.as_ref(), &cfg.solver.options)?;
    let costs = evaluate_solution_cost(&sol, &cfg.battery, &params);
    write_json(
        &g.out.join("solution.json"),
        &serde_json::json!({ "solver": solver.name(), "mode": params.mode, "solution": sol, "costs": costs }),
    )?;
    write_horizon_solution(&g.out.join("solution.csv"), &sol, cfg.battery.c_bess, |k| {
        let s = &sol.steps[k];
        params.penalty(s.c_e, s.p_out_lower, s.p_out_upper)
    })?;
    println!(
        "objective {:.6} ({}), life-loss cost {:.6}, penalty {:.6}, first step p_dis {:.6} p_ch {:.6}",
        sol.objective,
        cfg.currency,
        costs.bess_cost_model,
        costs.penalty,
        sol.steps[0].p_dis,
        sol.steps[0].p_ch
    );
    Ok(())
}

fn simulate(g: &Global, pair: bool) -> Result<()> {
    let cfg = load_config(g)?;
    let curve = cfg.curve()?;
    let series = cfg.load_series()?;
    let solver = solver_for(cfg.solver.kind).map_err(input_err)?;
    let opts = &cfg.solver.options;
    if pair {
        let (r1, r2, costs) =
            run_case_pair(&cfg.simulation, &series.data, &cfg.tracking, &cfg.battery, &curve, solver.as_ref(), opts)?;
        write_report(&r1, &g.out.join("case1"), series.start, series.step_min)?;
        write_report(&r2, &g.out.join("case2"), series.start, series.step_min)?;
        write_case_pair(&costs, &g.out)?;
        println!("{}", serde_json::to_string_pretty(&costs)?);
    } else {
        let report =
            run_receding_horizon(&cfg.simulation, &series.data, &cfg.tracking, &cfg.battery, &curve, solver.as_ref(), opts)?;
        write_report(&report, &g.out, series.start, series.step_min)?;
        println!("{}", serde_json::to_string_pretty(&report.totals)?);
    }
    Ok(())
}

fn validate(g: &Global, soc: Option<&Path>) -> Result<()> {
    let cfg = load_config(g)?;
    let curve = cfg.curve()?;
    let exp = loss_expansion(&cfg.tracking, &cfg.battery, &curve)?;
    let max_err = exp.max_abs_error(|s| curve.primitive(s).unwrap_or(f64::NAN), 10_001);
    let mut csv = String::from("quantity,index,soc,value\n");
    for (k, s) in exp.breakpoints().iter().enumerate() {
        csv += &format!("breakpoint,{k},{s:?},{:?}\n", curve.primitive(*s)?);
    }
    for (k, phi) in exp.slopes.iter().enumerate() {
        csv += &format!("slope,{k},,{phi:?}\n");
    }
    csv += &format!("max_abs_error,,,{max_err:?}\n");
    fs::create_dir_all(&g.out)?;
    fs::write(g.out.join("pwl.csv"), &csv)?;
    print!("{csv}");
    if let Some(path) = soc {
        let ts = load_timeseries(path, None)?;
        let report = compare_models(&ts.values, &curve, &cfg.battery)?;
        write_json(&g.out.join("rainflow.json"), &report)?;
        println!("\n{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(())
}

fn plot(g: &Global, trajectory: Option<&Path>) -> Result<()> {
    let default = g.out.join("trajectory.csv");
    let path = trajectory.unwrap_or(&default);
    for p in render_plots(path, &g.out)? {
        println!("{}", p.display());
    }
    Ok(())
}

const SERIES_SCHEMA: &str = r#"{
  "format": "CSV with header `timestamp,value`; ISO-8601 local timestamps on a uniform grid",
  "series": {
    "p_sch.csv": { "quantity": "day-ahead scheduled output", "unit": "MW" },
    "p_wind_f.csv": { "quantity": "intra-day wind forecast", "unit": "MW" },
    "c_e.csv": { "quantity": "time-of-use energy price", "unit": "currency/MWh" }
  }
}
"#;

fn gen_data(g: &Global) -> Result<()> {
    let cfg = load_config(g)?;
    let mut opts = cfg.data.synthetic.clone();
    opts.steps = opts.steps.max(cfg.required_len());
    let day = generate_synthetic_day(&opts);
    fs::create_dir_all(&g.out)?;
    for (name, ts) in [("p_sch", &day.p_sch), ("p_wind_f", &day.p_wind_f), ("c_e", &day.c_e)] {
        let path = g.out.join(format!("{name}.csv"));
        write_timeseries(&path, ts)?;
        println!("{}", path.display());
    }
    fs::write(g.out.join("series_schema.json"), SERIES_SCHEMA)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Fit { samples } => fit(g, samples),
        Command::SolveOne { input, soc, dump_lp } => solve_one(g, input.as_deref(), *soc, *dump_lp),
        Command::Simulate { pair } => simulate(g, *pair),
        Command::Validate { soc } => validate(g, soc.as_deref()),
        Command::Plot { trajectory } => plot(g, trajectory.as_deref()),
        Command::GenData => gen_data(g),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
