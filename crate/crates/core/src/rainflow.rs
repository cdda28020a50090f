//! Rainflow cycle counting on SOC trajectories.
//!
//! Four-point method: while the stack holds at least four turning points
//! `a, b, c, d` with `|b - c| <= |a - b|` and `|b - c| <= |c - d|`, the inner
//! pair `b, c` is a full cycle of depth `|b - c|` and is removed. Whatever is
//! left is the residual, counted as half cycles between consecutive points.
//! Depth is the only damage driver; no mean-SOC correction is applied.

use serde::{Deserialize, Serialize};

use crate::degradation::{BatteryParams, CycleLifeCurve, DegradationError};

/// Counted cycles with depths in SOC units.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleSet {
    pub full: Vec<f64>,
    pub half: Vec<f64>,
}

impl CycleSet {
    pub fn is_empty(&self) -> bool {
        self.full.is_empty() && self.half.is_empty()
    }

    /// Number of half-cycle equivalents (`2·full + half`).
    pub fn half_equivalents(&self) -> usize {
        2 * self.full.len() + self.half.len()
    }
}

/// Turning points of `series`: alternating extrema with both endpoints kept
/// and plateaus collapsed.
pub fn extract_extrema(series: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(series.len());
    for &x in series {
        match out.len() {
            0 => out.push(x),
            1 => {
                if x != out[0] {
                    out.push(x);
                }
            }
            _ => {
                let n = out.len();
                let (a, b) = (out[n - 2], out[n - 1]);
                if x == b {
                    continue;
                }
                if (b - a) * (x - b) > 0.0 {
                    out[n - 1] = x;
                } else {
                    out.push(x);
                }
            }
        }
    }
    out
}

pub fn rainflow_count(turning_points: &[f64]) -> CycleSet {
    let mut set = CycleSet::default();
    let mut stack: Vec<f64> = Vec::with_capacity(turning_points.len());
    for &p in turning_points {
        stack.push(p);
        while stack.len() >= 4 {
            let n = stack.len();
            let (a, b, c, d) = (stack[n - 4], stack[n - 3], stack[n - 2], stack[n - 1]);
            let inner = (b - c).abs();
            if inner <= (a - b).abs() && inner <= (c - d).abs() {
                if inner > 0.0 {
                    set.full.push(inner);
                }
                stack.drain(n - 3..n - 1);
            } else {
                break;
            }
        }
    }
    for w in stack.windows(2) {
        let depth = (w[1] - w[0]).abs();
        if depth > 0.0 {
            set.half.push(depth);
        }
    }
    set
}

/// Life fraction consumed by `cycles`.
pub fn life_loss_rainflow(cycles: &CycleSet, curve: &CycleLifeCurve) -> Result<f64, DegradationError> {
    let mut loss = 0.0;
    for &d in &cycles.full {
        loss += 1.0 / curve.cycles_to_failure(d.min(1.0))?;
    }
    for &d in &cycles.half {
        loss += 0.5 / curve.cycles_to_failure(d.min(1.0))?;
    }
    Ok(loss)
}

/// Loss on one monotone run between two turning points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub from: f64,
    pub to: f64,
    pub linear_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub linear_loss: f64,
    pub rainflow_loss: f64,
    pub full_cycles: usize,
    pub half_cycles: usize,
    pub excursions: Vec<Excursion>,
    /// `1/N(0)`: the rainflow-minus-linear offset of one round trip from full.
    pub round_trip_offset: f64,
    pub linear_cost: f64,
    pub rainflow_cost: f64,
}

pub fn compare_models(
    soc: &[f64],
    curve: &CycleLifeCurve,
    battery: &BatteryParams,
) -> Result<ComparisonReport, DegradationError> {
    let linear_loss = curve.trajectory_loss_exact(soc)?;
    let tp = extract_extrema(soc);
    let cycles = rainflow_count(&tp);
    let rainflow_loss = life_loss_rainflow(&cycles, curve)?;
    let excursions = tp
        .windows(2)
        .map(|w| {
            Ok(Excursion {
                from: w[0],
                to: w[1],
                linear_loss: curve.step_loss_exact(w[0], w[1])?,
            })
        })
        .collect::<Result<Vec<_>, DegradationError>>()?;
    Ok(ComparisonReport {
        linear_loss,
        rainflow_loss,
        full_cycles: cycles.full.len(),
        half_cycles: cycles.half.len(),
        excursions,
        round_trip_offset: 1.0 / curve.cycles_to_failure(0.0)?,
        linear_cost: battery.c_bess * linear_loss,
        rainflow_cost: battery.c_bess * rainflow_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn extrema_examples() {
        assert_eq!(extract_extrema(&[0.4, 0.4, 0.4]), vec![0.4]);
        assert_eq!(extract_extrema(&[0.1, 0.2, 0.3, 0.4]), vec![0.1, 0.4]);
        let alt = [0.5, 0.8, 0.3, 0.9, 0.2];
        assert_eq!(extract_extrema(&alt), alt.to_vec());
        assert_eq!(extract_extrema(&[0.5, 0.6, 0.6, 0.7, 0.7, 0.2]), vec![0.5, 0.7, 0.2]);
        assert!(extract_extrema(&[]).is_empty());
    }

    #[test]
    fn round_trip_is_two_halves() {
        let c = rainflow_count(&[1.0, 0.6, 1.0]);
        assert!(c.full.is_empty());
        assert_eq!(c.half.len(), 2);
        assert_relative_eq!(c.half[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn four_point_trace() {
        let c = rainflow_count(&[1.0, 0.3, 1.0, 0.3, 1.0]);
        assert_eq!(c.full.len(), 1);
        assert_relative_eq!(c.full[0], 0.7, epsilon = 1e-15);
        assert_eq!(c.half.len(), 2);
        assert!(c.half.iter().all(|&d| (d - 0.7).abs() < 1e-15));
    }

    #[test]
    fn constant_is_empty() {
        let soc = [0.5; 10];
        assert!(rainflow_count(&extract_extrema(&soc)).is_empty());
        let r = compare_models(&soc, &CycleLifeCurve::lfp_reference(), &BatteryParams::default()).unwrap();
        assert_eq!(r.linear_loss, 0.0);
        assert_eq!(r.rainflow_loss, 0.0);
    }

    #[test]
    fn loss_of_counted_cycles() {
        let curve = CycleLifeCurve::lfp_reference();
        let one = CycleSet {
            full: vec![0.7],
            half: vec![],
        };
        assert_eq!(
            life_loss_rainflow(&one, &curve).unwrap(),
            1.0 / curve.cycles_to_failure(0.7).unwrap()
        );
        assert_eq!(life_loss_rainflow(&CycleSet::default(), &curve).unwrap(), 0.0);
    }

    #[test]
    fn round_trip_offset_is_one_over_n0() {
        let curve = CycleLifeCurve::lfp_reference();
        let b = BatteryParams::default();
        for k in 1..=10 {
            let d = k as f64 / 10.0;
            let r = compare_models(&[1.0, 1.0 - d, 1.0], &curve, &b).unwrap();
            assert_relative_eq!(r.rainflow_loss - r.linear_loss, r.round_trip_offset, epsilon = 1e-15);
        }
    }

    fn textbook_count(points: &[f64]) -> (Vec<f64>, Vec<f64>) {
        // Independent formulation: repeatedly scan for the first removable
        // inner pair over the whole sequence.
        let mut pts = points.to_vec();
        let mut full = Vec::new();
        'outer: loop {
            for i in 0..pts.len().saturating_sub(3) {
                let (a, b, c, d) = (pts[i], pts[i + 1], pts[i + 2], pts[i + 3]);
                let r = (b - c).abs();
                if r <= (a - b).abs() && r <= (c - d).abs() {
                    full.push(r);
                    pts.drain(i + 1..i + 3);
                    continue 'outer;
                }
            }
            break;
        }
        let half = pts.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        (full, half)
    }

    proptest! {
        #[test]
        fn matches_rescanning_formulation(xs in prop::collection::vec(0.0f64..1.0, 1..40)) {
            let tp = extract_extrema(&xs);
            let c = rainflow_count(&tp);
            let (mut full, mut half) = textbook_count(&tp);
            let mut a = c.full.clone();
            let mut h = c.half.clone();
            for v in [&mut a, &mut h, &mut full, &mut half] {
                v.sort_by(f64::total_cmp);
            }
            prop_assert_eq!(a, full);
            prop_assert_eq!(h, half);
        }

        #[test]
        fn half_count_without_full_cycles(xs in prop::collection::vec(0.0f64..1.0, 1..40)) {
            let tp = extract_extrema(&xs);
            let c = rainflow_count(&tp);
            if c.full.is_empty() {
                prop_assert_eq!(c.half.len(), tp.len().saturating_sub(1));
            }
        }

        #[test]
        fn appending_excursion_never_lowers_loss(
            xs in prop::collection::vec(0.0f64..1.0, 1..30),
            extra in 0.0f64..1.0,
        ) {
            let curve = CycleLifeCurve::lfp_reference();
            let b = BatteryParams::default();
            let base = compare_models(&xs, &curve, &b).unwrap();
            let mut longer = xs.clone();
            longer.push(extra);
            let more = compare_models(&longer, &curve, &b).unwrap();
            prop_assert!(base.linear_loss >= 0.0 && base.rainflow_loss >= 0.0);
            prop_assert!(more.linear_loss >= base.linear_loss - 1e-18);
            prop_assert!(more.rainflow_loss >= base.rainflow_loss - 1e-15);
        }
    }
}
