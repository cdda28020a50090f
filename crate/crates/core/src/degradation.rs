//! Closed-form battery life-loss mathematics.
//!
//! A cycle-life curve `N(D)` gives the number of full cycles to end of life at
//! depth of discharge `D`. From it follow the per-MWh loss coefficient
//! `λ(s) = -N'(1-s) / (2 C N(1-s)^2)` and its primitive
//! `F(s) = ½ (1/N(1) - 1/N(1-s))`, so that the life consumed by a
//! unidirectional SOC move is `|F(s_next) - F(s_prev)|`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of uniform grid points used to validate a curve at construction.
pub const VALIDATION_GRID: usize = 1001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DegradationError {
    #[error("{what} = {value} is outside [0, 1]")]
    Domain { what: &'static str, value: f64 },
    #[error("cycle-life curve is not positive at DOD {dod} (N = {cycles})")]
    NonPositive { dod: f64, cycles: f64 },
    #[error("cycle-life curve increases between DOD {from} and {to}")]
    NotMonotone { from: f64, to: f64 },
    #[error("curve coefficient is not finite")]
    NonFinite,
    #[error("curve fitting needs at least 5 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid fitting sample #{index}: {reason}")]
    BadSample { index: usize, reason: String },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("invalid battery parameters: {0}")]
    InvalidBattery(String),
}

pub type Result<T> = std::result::Result<T, DegradationError>;

#[derive(Debug, Clone, Copy, PartialEq)]
enum CurveKind {
    /// `a0 + a1 D + a2 D^2 + a3 D^3 + a4 D^4`
    Polynomial([f64; 5]),
    /// `b1 exp(c1 D) + b2 exp(c2 D)`
    BiExponential { b1: f64, c1: f64, b2: f64, c2: f64 },
}

/// Cycles-to-failure as a function of depth of discharge.
///
/// Construction checks positivity and that the curve never increases on a
/// 1001-point grid over `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleLifeCurve {
    kind: CurveKind,
}

/// Serialisable curve description used in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum CurveSpec {
    #[serde(rename = "poly4")]
    Poly4 { a: [f64; 5] },
    #[serde(rename = "biexp")]
    BiExp { b1: f64, c1: f64, b2: f64, c2: f64 },
}

impl Default for CurveSpec {
    /// The LFP curve `49660 e^{-14.32 D} + 34280 e^{-2.181 D}`.
    fn default() -> Self {
        CurveSpec::BiExp {
            b1: 49660.0,
            c1: -14.32,
            b2: 34280.0,
            c2: -2.181,
        }
    }
}

impl TryFrom<CurveSpec> for CycleLifeCurve {
    type Error = DegradationError;

    fn try_from(spec: CurveSpec) -> Result<Self> {
        match spec {
            CurveSpec::Poly4 { a } => CycleLifeCurve::polynomial(a),
            CurveSpec::BiExp { b1, c1, b2, c2 } => CycleLifeCurve::bi_exponential(b1, c1, b2, c2),
        }
    }
}

impl From<CycleLifeCurve> for CurveSpec {
    fn from(curve: CycleLifeCurve) -> Self {
        match curve.kind {
            CurveKind::Polynomial(a) => CurveSpec::Poly4 { a },
            CurveKind::BiExponential { b1, c1, b2, c2 } => CurveSpec::BiExp { b1, c1, b2, c2 },
        }
    }
}

fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(DegradationError::Domain { what, value })
    }
}

impl CycleLifeCurve {
    /// Quartic curve with coefficients `[a0, a1, a2, a3, a4]`.
    pub fn polynomial(a: [f64; 5]) -> Result<Self> {
        Self::validated(CurveKind::Polynomial(a))
    }

    pub fn bi_exponential(b1: f64, c1: f64, b2: f64, c2: f64) -> Result<Self> {
        Self::validated(CurveKind::BiExponential { b1, c1, b2, c2 })
    }

    /// The LFP curve used in the reference case study.
    pub fn lfp_reference() -> Self {
        CycleLifeCurve::try_from(CurveSpec::default()).expect("reference curve is valid")
    }

    fn validated(kind: CurveKind) -> Result<Self> {
        let finite = match kind {
            CurveKind::Polynomial(a) => a.iter().all(|v| v.is_finite()),
            CurveKind::BiExponential { b1, c1, b2, c2 } => {
                [b1, c1, b2, c2].iter().all(|v| v.is_finite())
            }
        };
        if !finite {
            return Err(DegradationError::NonFinite);
        }
        let curve = CycleLifeCurve { kind };
        let step = 1.0 / (VALIDATION_GRID - 1) as f64;
        let mut prev = curve.eval(0.0);
        if !(prev > 0.0) {
            return Err(DegradationError::NonPositive { dod: 0.0, cycles: prev });
        }
        for k in 1..VALIDATION_GRID {
            let d = k as f64 * step;
            let n = curve.eval(d);
            if !(n > 0.0) {
                return Err(DegradationError::NonPositive { dod: d, cycles: n });
            }
            if n > prev {
                return Err(DegradationError::NotMonotone {
                    from: (k - 1) as f64 * step,
                    to: d,
                });
            }
            prev = n;
        }
        Ok(curve)
    }

    fn eval(&self, d: f64) -> f64 {
        match self.kind {
            CurveKind::Polynomial(a) => (((a[4] * d + a[3]) * d + a[2]) * d + a[1]) * d + a[0],
            CurveKind::BiExponential { b1, c1, b2, c2 } => b1 * (c1 * d).exp() + b2 * (c2 * d).exp(),
        }
    }

    fn eval_derivative(&self, d: f64) -> f64 {
        match self.kind {
            CurveKind::Polynomial(a) => ((4.0 * a[4] * d + 3.0 * a[3]) * d + 2.0 * a[2]) * d + a[1],
            CurveKind::BiExponential { b1, c1, b2, c2 } => {
                b1 * c1 * (c1 * d).exp() + b2 * c2 * (c2 * d).exp()
            }
        }
    }

    /// Polynomial coefficients, if this is a quartic curve.
    pub fn polynomial_coefficients(&self) -> Option<[f64; 5]> {
        match self.kind {
            CurveKind::Polynomial(a) => Some(a),
            CurveKind::BiExponential { .. } => None,
        }
    }

    /// `N(d)`: cycles to failure at depth of discharge `d`.
    pub fn cycles_to_failure(&self, d: f64) -> Result<f64> {
        check_unit("depth of discharge", d)?;
        Ok(self.eval(d))
    }

    /// `dN/dD` at depth `d`, taken analytically.
    pub fn cycles_derivative(&self, d: f64) -> Result<f64> {
        check_unit("depth of discharge", d)?;
        Ok(self.eval_derivative(d))
    }

    /// Life consumed by one half cycle spanning `[s, 1]`.
    pub fn half_cycle_loss(&self, s: f64) -> Result<f64> {
        check_unit("state of charge", s)?;
        Ok(0.5 / self.eval(1.0 - s))
    }

    /// Life fraction consumed per MWh of throughput at SOC `s`.
    pub fn loss_coefficient(&self, c_rated: f64, s: f64) -> Result<f64> {
        check_unit("state of charge", s)?;
        let d = 1.0 - s;
        let n = self.eval(d);
        Ok(-self.eval_derivative(d) / (2.0 * c_rated * n * n))
    }

    /// Primitive `F(s) = ½ (1/N(1) - 1/N(1-s))`, with `F(0) = 0`.
    pub fn primitive(&self, s: f64) -> Result<f64> {
        check_unit("state of charge", s)?;
        Ok(self.primitive_unchecked(s))
    }

    pub(crate) fn primitive_unchecked(&self, s: f64) -> f64 {
        0.5 * (1.0 / self.eval(1.0) - 1.0 / self.eval(1.0 - s))
    }

    /// Exact life loss of a unidirectional move from `s_prev` to `s_next`.
    pub fn step_loss_exact(&self, s_prev: f64, s_next: f64) -> Result<f64> {
        Ok((self.primitive(s_next)? - self.primitive(s_prev)?).abs())
    }

    /// Total exact loss along a trajectory, one unidirectional step at a time.
    pub fn trajectory_loss_exact(&self, soc: &[f64]) -> Result<f64> {
        soc.windows(2)
            .map(|w| self.step_loss_exact(w[0], w[1]))
            .sum()
    }

    /// True when `N` strictly decreases across the validation grid.
    pub fn is_strictly_decreasing(&self) -> bool {
        let step = 1.0 / (VALIDATION_GRID - 1) as f64;
        (1..VALIDATION_GRID).all(|k| self.eval(k as f64 * step) < self.eval((k - 1) as f64 * step))
    }
}

/// Least-squares quartic fit of `(dod, cycles)` samples, validated as a
/// [`CycleLifeCurve`].
pub fn fit_polynomial_curve(samples: &[(f64, f64)]) -> Result<CycleLifeCurve> {
    CycleLifeCurve::polynomial(least_squares_quartic(samples)?)
}

/// Raw least-squares quartic coefficients `[a0..a4]`, without the curve
/// validity checks.
pub fn least_squares_quartic(samples: &[(f64, f64)]) -> Result<[f64; 5]> {
    if samples.len() < 5 {
        return Err(DegradationError::TooFewSamples(samples.len()));
    }
    for (index, &(d, n)) in samples.iter().enumerate() {
        if !(0.0..=1.0).contains(&d) {
            return Err(DegradationError::BadSample {
                index,
                reason: format!("DOD {d} outside [0, 1]"),
            });
        }
        if !(n > 0.0) || !n.is_finite() {
            return Err(DegradationError::BadSample {
                index,
                reason: format!("cycle count {n} is not positive"),
            });
        }
    }
    let design = DMatrix::from_fn(samples.len(), 5, |i, j| samples[i].0.powi(j as i32));
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));

    let qr = design.qr();
    let r = qr.r();
    let scale = (0..5).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..5).any(|i| r[(i, i)].abs() <= scale * 1e-12) {
        return Err(DegradationError::RankDeficient);
    }
    let qtb = qr.q().transpose() * rhs;
    let coeffs = r
        .solve_upper_triangular(&qtb)
        .ok_or(DegradationError::RankDeficient)?;
    Ok([coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]])
}

/// Battery ratings and limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    /// Rated energy capacity, MWh.
    pub c_rated: f64,
    /// Total investment and operation cost, currency units.
    pub c_bess: f64,
    /// MW
    pub p_dis_max: f64,
    /// MW
    pub p_ch_max: f64,
    pub eta_dis: f64,
    pub eta_ch: f64,
    pub soc_min: f64,
    pub soc_max: f64,
}

impl Default for BatteryParams {
    /// 25 MWh LFP unit.
    fn default() -> Self {
        BatteryParams {
            c_rated: 25.0,
            c_bess: 1.285e7,
            p_dis_max: 10.0,
            p_ch_max: 10.0,
            eta_dis: 1.05,
            eta_ch: 0.95,
            soc_min: 0.15,
            soc_max: 0.85,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DegradationError::InvalidBattery(msg));
        if !(self.c_rated > 0.0) {
            return bad(format!("c_rated must be positive, got {}", self.c_rated));
        }
        if !(self.c_bess >= 0.0) {
            return bad(format!("c_bess must be non-negative, got {}", self.c_bess));
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return bad(format!(
                "SOC bounds must satisfy 0 <= soc_min < soc_max <= 1, got [{}, {}]",
                self.soc_min, self.soc_max
            ));
        }
        if !(self.p_dis_max >= 0.0 && self.p_ch_max >= 0.0) {
            return bad("power limits must be non-negative".into());
        }
        if !(self.eta_ch > 0.0 && self.eta_ch <= 1.0) {
            return bad(format!("eta_ch must lie in (0, 1], got {}", self.eta_ch));
        }
        if !(self.eta_dis >= 1.0) {
            return bad(format!("eta_dis must be at least 1, got {}", self.eta_dis));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant() -> CycleLifeCurve {
        CycleLifeCurve::polynomial([1000.0, 0.0, 0.0, 0.0, 0.0]).unwrap()
    }

    // Simpson rule, adaptive, used as an independent integration oracle.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            let m = 0.5 * (a + b);
            (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
        }
        fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            recurse(f, a, m, left, tol / 2.0, depth - 1) + recurse(f, m, b, right, tol / 2.0, depth - 1)
        }
        recurse(f, a, b, simpson(f, a, b), tol, 50)
    }

    #[test]
    fn reference_curve_endpoints() {
        let c = CycleLifeCurve::lfp_reference();
        assert_eq!(c.cycles_to_failure(0.0).unwrap(), 83940.0);
        let n1 = 49660.0 * (-14.32f64).exp() + 34280.0 * (-2.181f64).exp();
        assert_relative_eq!(c.cycles_to_failure(1.0).unwrap(), n1, max_relative = 1e-15);
        assert_relative_eq!(n1, 3871.2205, max_relative = 1e-8);
    }

    #[test]
    fn constant_polynomial() {
        let c = constant();
        for d in [0.0, 0.3, 1.0] {
            assert_eq!(c.cycles_to_failure(d).unwrap(), 1000.0);
        }
        assert_eq!(c.half_cycle_loss(0.5).unwrap(), 5e-4);
        for s in [0.0, 0.5, 1.0] {
            assert_eq!(c.loss_coefficient(25.0, s).unwrap(), 0.0);
        }
        assert!(!c.is_strictly_decreasing());
    }

    #[test]
    fn domain_errors() {
        let c = CycleLifeCurve::lfp_reference();
        assert!(matches!(c.cycles_to_failure(1.01), Err(DegradationError::Domain { .. })));
        assert!(c.cycles_to_failure(-0.1).is_err());
        assert!(c.half_cycle_loss(2.0).is_err());
        assert!(c.loss_coefficient(25.0, -1e-9).is_err());
        assert!(c.primitive(f64::NAN).is_err());
        assert!(c.step_loss_exact(0.5, 1.5).is_err());
    }

    #[test]
    fn rejects_increasing_and_nonpositive_curves() {
        assert!(matches!(
            CycleLifeCurve::polynomial([1000.0, 10.0, 0.0, 0.0, 0.0]),
            Err(DegradationError::NotMonotone { .. })
        ));
        assert!(matches!(
            CycleLifeCurve::polynomial([1000.0, -2000.0, 0.0, 0.0, 0.0]),
            Err(DegradationError::NonPositive { .. })
        ));
        // Dips and recovers: decreasing at the ends but oscillating in between.
        assert!(CycleLifeCurve::polynomial([1000.0, -3000.0, 4000.0, 0.0, -1500.0]).is_err());
        assert!(CycleLifeCurve::bi_exponential(100.0, 1.0, 100.0, -1.0).is_err());
        assert!(CycleLifeCurve::bi_exponential(f64::INFINITY, -1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn half_cycle_loss_values() {
        let c = CycleLifeCurve::lfp_reference();
        assert_relative_eq!(c.half_cycle_loss(1.0).unwrap(), 1.0 / (2.0 * 83940.0));
        assert_relative_eq!(c.half_cycle_loss(1.0).unwrap(), 5.956e-6, max_relative = 1e-3);
        let n1 = c.cycles_to_failure(1.0).unwrap();
        assert_eq!(c.half_cycle_loss(0.0).unwrap(), 1.0 / (2.0 * n1));
    }

    #[test]
    fn loss_coefficient_matches_finite_difference() {
        let c = CycleLifeCurve::lfp_reference();
        let c_rated = 25.0;
        let h = 1e-6;
        let g = |s: f64| 1.0 / (2.0 * c_rated * c.eval(1.0 - s));
        // λ(s) = -d/ds [1 / (2 C N(1-s))]
        let fd = -(g(0.5 + h) - g(0.5 - h)) / (2.0 * h);
        let lam = c.loss_coefficient(c_rated, 0.5).unwrap();
        assert!(lam > 0.0);
        assert_relative_eq!(lam, fd, max_relative = 1e-6);
    }

    #[test]
    fn primitive_values_and_quadrature() {
        let c = CycleLifeCurve::lfp_reference();
        assert_eq!(c.primitive(0.0).unwrap(), 0.0);
        let n1 = c.cycles_to_failure(1.0).unwrap();
        assert_relative_eq!(
            c.primitive(1.0).unwrap(),
            0.5 * (1.0 / n1 - 1.0 / 83940.0),
            max_relative = 1e-14
        );
        let c_rated = 25.0;
        let integrand = |s: f64| c.loss_coefficient(c_rated, s).unwrap() * c_rated;
        for s in [0.1, 0.37, 0.5, 0.85, 1.0] {
            let q = adaptive_simpson(&integrand, 0.0, s, 1e-15);
            assert!((q - c.primitive(s).unwrap()).abs() <= 1e-12, "s={s}");
        }
    }

    #[test]
    fn step_loss_symmetry_and_telescoping() {
        let c = CycleLifeCurve::lfp_reference();
        assert_eq!(c.step_loss_exact(0.4, 0.4).unwrap(), 0.0);
        assert_eq!(
            c.step_loss_exact(0.85, 0.15).unwrap(),
            c.step_loss_exact(0.15, 0.85).unwrap()
        );
        let whole = c.step_loss_exact(0.2, 0.8).unwrap();
        let path: Vec<f64> = (0..=60).map(|k| 0.2 + 0.6 * k as f64 / 60.0).collect();
        let split = c.trajectory_loss_exact(&path).unwrap();
        assert!((split - whole).abs() <= 1e-15 * 60.0);
    }

    #[test]
    fn fit_recovers_exact_quartic() {
        let truth = [5000.0, -9000.0, 6000.0, -1500.0, -200.0];
        let curve = CycleLifeCurve::polynomial(truth).unwrap();
        let samples: Vec<_> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&d| (d, curve.cycles_to_failure(d).unwrap()))
            .collect();
        let fit = fit_polynomial_curve(&samples).unwrap();
        let got = fit.polynomial_coefficients().unwrap();
        for (g, t) in got.iter().zip(truth) {
            assert_relative_eq!(*g, t, max_relative = 1e-8);
        }
    }

    #[test]
    fn fit_is_least_squares_optimal() {
        let c = CycleLifeCurve::lfp_reference();
        let samples: Vec<_> = (1..=10)
            .map(|k| {
                let d = k as f64 / 10.0;
                (d, c.cycles_to_failure(d).unwrap())
            })
            .collect();
        let a = least_squares_quartic(&samples).unwrap();
        // The quartic overshoots near full depth, so it is not a valid curve.
        assert!(matches!(
            fit_polynomial_curve(&samples),
            Err(DegradationError::NotMonotone { .. })
        ));
        let residual = |coef: &[f64; 5]| -> f64 {
            samples
                .iter()
                .map(|&(d, n)| {
                    let p: f64 = coef.iter().enumerate().map(|(j, cj)| cj * d.powi(j as i32)).sum();
                    (p - n).powi(2)
                })
                .sum()
        };
        let best = residual(&a);
        for j in 0..5 {
            for sign in [-1.0, 1.0] {
                let mut p = a;
                p[j] += sign * 1e-3 * a[j].abs().max(1.0);
                assert!(residual(&p) > best, "perturbing a{j} improved the fit");
            }
        }
    }

    #[test]
    fn fit_preconditions() {
        let four = [(0.1, 10.0), (0.2, 9.0), (0.3, 8.0), (0.4, 7.0)];
        assert_eq!(fit_polynomial_curve(&four), Err(DegradationError::TooFewSamples(4)));
        let repeated = [(0.5, 10.0); 6];
        assert_eq!(fit_polynomial_curve(&repeated), Err(DegradationError::RankDeficient));
        let bad = [(0.1, 10.0), (0.2, 9.0), (0.3, -8.0), (0.4, 7.0), (0.5, 6.0)];
        assert!(matches!(
            fit_polynomial_curve(&bad),
            Err(DegradationError::BadSample { index: 2, .. })
        ));
    }

    #[test]
    fn battery_validation() {
        assert!(BatteryParams::default().validate().is_ok());
        let mut b = BatteryParams::default();
        b.soc_min = 0.9;
        assert!(b.validate().is_err());
        let mut b = BatteryParams::default();
        b.eta_dis = 0.9;
        assert!(b.validate().is_err());
        let mut b = BatteryParams::default();
        b.c_rated = 0.0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn curve_spec_json() {
        let spec: CurveSpec =
            serde_json::from_str(r#"{"family":"poly4","a":[1000,0,0,0,0]}"#).unwrap();
        let curve = CycleLifeCurve::try_from(spec).unwrap();
        assert_eq!(curve, constant());
        let spec: CurveSpec =
            serde_json::from_str(r#"{"family":"biexp","b1":49660,"c1":-14.32,"b2":34280,"c2":-2.181}"#)
                .unwrap();
        assert_eq!(CycleLifeCurve::try_from(spec).unwrap(), CycleLifeCurve::lfp_reference());
    }
}
