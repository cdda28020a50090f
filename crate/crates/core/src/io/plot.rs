//! SVG charts of a trajectory.
//!
//! * `schedule.svg`: schedule, tolerance band limits and joint output (MW).
//! * `power.svg`: battery power (discharge positive) and out-of-limit power (MW).
//! * `soc.svg`: SOC on the left axis; TOU price and the unit-throughput loss
//!   price `C_BESS·λ_loss(S_OC)` on the right axis. The loss price is a
//!   diagnostic whose scale is implementation-defined.

use std::path::{Path, PathBuf};

use plotters::prelude::*;
use thiserror::Error;

use super::report::{read_trajectory, ReportError, TrajectoryRow};

pub const PLOT_FILES: [&str; 3] = ["schedule.svg", "power.svg", "soc.svg"];

#[derive(Debug, Error)]
pub enum PlotError {
    #[error(transparent)]
    Read(#[from] ReportError),
    #[error("trajectory is empty")]
    Empty,
    #[error("{path}: {msg}")]
    Draw { path: PathBuf, msg: String },
}

fn extent(series: &[&[f64]]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &v in *s {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

type DrawResult = Result<(), Box<dyn std::error::Error>>;

fn line_chart(path: &Path, caption: &str, y_label: &str, lines: &[(&str, &[f64], RGBColor)]) -> DrawResult {
    let root = SVGBackend::new(path, (960, 420)).into_drawing_area();
    root.fill(&WHITE)?;
    let n = lines[0].1.len();
    let (lo, hi) = extent(&lines.iter().map(|l| l.1).collect::<Vec<_>>());
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(55)
        .build_cartesian_2d(0f64..(n.max(2) - 1) as f64, lo..hi)?;
    chart.configure_mesh().x_desc("step").y_desc(y_label).draw()?;
    for &(name, ys, color) in lines {
        chart
            .draw_series(LineSeries::new(ys.iter().enumerate().map(|(k, &y)| (k as f64, y)), color))?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}

fn soc_chart(path: &Path, rows: &[TrajectoryRow]) -> DrawResult {
    let soc: Vec<f64> = rows.iter().map(|r| r.soc).collect();
    let price: Vec<f64> = rows.iter().map(|r| r.c_e).collect();
    let loss_price: Vec<f64> = rows.iter().map(|r| r.unit_loss_price).collect();
    let n = rows.len();
    let root = SVGBackend::new(path, (960, 420)).into_drawing_area();
    root.fill(&WHITE)?;
    let (slo, shi) = extent(&[&soc]);
    let (plo, phi) = extent(&[&price, &loss_price]);
    let x = 0f64..(n.max(2) - 1) as f64;
    let mut chart = ChartBuilder::on(&root)
        .caption("SOC and prices", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(55)
        .right_y_label_area_size(65)
        .build_cartesian_2d(x.clone(), slo..shi)?
        .set_secondary_coord(x, plo..phi);
    chart.configure_mesh().x_desc("step").y_desc("SOC").draw()?;
    chart.configure_secondary_axes().y_desc("currency / MWh").draw()?;
    chart
        .draw_series(LineSeries::new(soc.iter().enumerate().map(|(k, &y)| (k as f64, y)), BLUE))?
        .label("SOC")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], BLUE));
    chart
        .draw_secondary_series(LineSeries::new(price.iter().enumerate().map(|(k, &y)| (k as f64, y)), RED))?
        .label("TOU price")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], RED));
    let green = RGBColor(0, 140, 0);
    chart
        .draw_secondary_series(LineSeries::new(
            loss_price.iter().enumerate().map(|(k, &y)| (k as f64, y)),
            green,
        ))?
        .label("unit throughput loss price")
        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], green));
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}

/// Renders the three charts of `trajectory_csv` into `out_dir`.
pub fn render_plots(trajectory_csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let rows = read_trajectory(trajectory_csv)?;
    if rows.is_empty() {
        return Err(PlotError::Empty);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| PlotError::Draw {
        path: out_dir.to_path_buf(),
        msg: e.to_string(),
    })?;
    let col = |f: fn(&TrajectoryRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let (sch, joint, band_lo, band_hi) = (
        col(|r| r.p_sch),
        col(|r| r.p_joint),
        col(|r| r.band_lower),
        col(|r| r.band_upper),
    );
    let bess = col(|r| r.p_dis - r.p_ch);
    let out = col(|r| r.p_out_upper - r.p_out_lower);

    let paths: Vec<PathBuf> = PLOT_FILES.iter().map(|f| out_dir.join(f)).collect();
    let draw_err = |p: &Path| {
        let p = p.to_path_buf();
        move |e: Box<dyn std::error::Error>| PlotError::Draw { path: p, msg: e.to_string() }
    };
    line_chart(
        &paths[0],
        "Scheduled power tracking",
        "MW",
        &[
            ("schedule", &sch, BLACK),
            ("lower limit", &band_lo, RGBColor(150, 150, 150)),
            ("upper limit", &band_hi, RGBColor(150, 150, 150)),
            ("joint output", &joint, BLUE),
        ],
    )
    .map_err(draw_err(&paths[0]))?;
    line_chart(
        &paths[1],
        "Battery and out-of-limit power",
        "MW",
        &[("battery (discharge +)", &bess, BLUE), ("out of limit (upper +)", &out, RED)],
    )
    .map_err(draw_err(&paths[1]))?;
    soc_chart(&paths[2], &rows).map_err(draw_err(&paths[2]))?;
    Ok(paths)
}
