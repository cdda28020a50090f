use bess_bench::{synthetic_series, window};
use bess_core::horizon::{run_receding_horizon, SimulationConfig};
use bess_core::milp::{ReferenceSolver, SolveOptions};
use bess_core::pwl::PwlExpansion;
use bess_core::rainflow::{extract_extrema, rainflow_count};
use bess_core::tracking::{build_horizon_model, solve_horizon, TrackingParams};
use bess_core::{BatteryParams, CycleLifeCurve};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn degradation(c: &mut Criterion) {
    let curve = CycleLifeCurve::lfp_reference();
    c.bench_function("primitive_1001", |b| {
        b.iter(|| (0..=1000).map(|k| curve.primitive(k as f64 / 1000.0).unwrap()).sum::<f64>())
    });
    c.bench_function("pwl_build_10", |b| {
        b.iter(|| PwlExpansion::build(|s| curve.primitive(s).unwrap(), 0.15, 0.85, black_box(10), None, None).unwrap())
    });
}

fn horizon_solve(c: &mut Criterion) {
    let curve = CycleLifeCurve::lfp_reference();
    let battery = BatteryParams::default();
    let input = window(40);
    let mut group = c.benchmark_group("horizon_solve");
    group.sample_size(10);
    for n_seg in [1, 2, 4] {
        let params = TrackingParams {
            n_seg,
            ..TrackingParams::default()
        };
        group.bench_with_input(BenchmarkId::new("build", n_seg), &params, |b, p| {
            b.iter(|| build_horizon_model(p, &battery, &curve, &input).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("reference", n_seg), &params, |b, p| {
            b.iter(|| {
                solve_horizon(p, &battery, &curve, &input, &ReferenceSolver::default(), &SolveOptions::default())
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn receding(c: &mut Criterion) {
    let curve = CycleLifeCurve::lfp_reference();
    let battery = BatteryParams::default();
    let data = synthetic_series();
    let params = TrackingParams {
        n_seg: 2,
        ..TrackingParams::default()
    };
    let cfg = SimulationConfig {
        steps: 16,
        ..SimulationConfig::default()
    };
    let mut group = c.benchmark_group("receding_horizon");
    group.sample_size(10);
    group.bench_function("16_steps_nseg2", |b| {
        b.iter(|| {
            run_receding_horizon(&cfg, &data, &params, &battery, &curve, &ReferenceSolver::default(), &SolveOptions::default())
                .unwrap()
        })
    });
    group.finish();
}

fn rainflow(c: &mut Criterion) {
    let soc: Vec<f64> = (0..10_000).map(|k| 0.5 + 0.3 * ((k as f64) * 0.37).sin() * ((k as f64) * 0.011).cos()).collect();
    c.bench_function("rainflow_10k", |b| b.iter(|| rainflow_count(&extract_extrema(black_box(&soc)))));
}

criterion_group!(benches, degradation, horizon_solve, receding, rainflow);
criterion_main!(benches);
