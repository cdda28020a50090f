//! Self-optimal piecewise linearisation on uniform breakpoints.
//!
//! A function `F` on `[y_lo, y_hi]` is cut into `Λ` equal segments. In the
//! mixed-integer form each segment gets a fill amount `Δ_λ ∈ [0, x_λ Δ̄]` and
//! a binary `x_λ`; the rows `Δ_λ ≥ Δ̄ - (1 - x_{λ+1}) M - ε⁺` force segments
//! to fill left to right, so the linear expression `F(y_lo) + Σ φ_λ Δ_λ`
//! equals the interpolant of `F` whatever the curvature of `F`.

use serde::Serialize;
use thiserror::Error;

use crate::milp::{ConstrId, Integrality, LinExpr, MilpModel, ModelError, Sense, VarId};

/// Tolerance for accepting solver values marginally outside the domain.
const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PwlError {
    #[error("invalid domain [{lo}, {hi}]")]
    InvalidDomain { lo: f64, hi: f64 },
    #[error("segment count must be at least 1")]
    NoSegments,
    #[error("big-M {big_m} is smaller than the segment width {width}")]
    BigMTooSmall { big_m: f64, width: f64 },
    #[error("epsilon {eps} must lie strictly between 0 and the segment width {width}")]
    BadEpsilon { eps: f64, width: f64 },
    #[error("{y} is outside [{lo}, {hi}]")]
    OutOfDomain { y: f64, lo: f64, hi: f64 },
    #[error("function is not finite at {0}")]
    NonFinite(f64),
    #[error("variable bounds [{var_lo}, {var_hi}] exceed the expansion domain [{lo}, {hi}]")]
    BoundMismatch {
        var_lo: f64,
        var_hi: f64,
        lo: f64,
        hi: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PwlExpansion {
    pub y_lo: f64,
    pub y_hi: f64,
    pub n_seg: usize,
    pub seg_width: f64,
    pub f_lo: f64,
    pub slopes: Vec<f64>,
    pub big_m: f64,
    pub eps_plus: f64,
}

/// Relative size of the default ε⁺ with respect to the segment width.
pub const DEFAULT_EPS_FRACTION: f64 = 1e-6;

impl PwlExpansion {
    /// Builds the expansion of `f` with uniform segments.
    ///
    /// `big_m` defaults to the segment width and `eps_plus` to
    /// `1e-6 × seg_width`.
    pub fn build(
        f: impl Fn(f64) -> f64,
        y_lo: f64,
        y_hi: f64,
        n_seg: usize,
        big_m: Option<f64>,
        eps_plus: Option<f64>,
    ) -> Result<Self, PwlError> {
        if !(y_lo < y_hi) || !y_lo.is_finite() || !y_hi.is_finite() {
            return Err(PwlError::InvalidDomain { lo: y_lo, hi: y_hi });
        }
        if n_seg == 0 {
            return Err(PwlError::NoSegments);
        }
        let width = (y_hi - y_lo) / n_seg as f64;
        let big_m = big_m.unwrap_or(width);
        if !(big_m >= width) {
            return Err(PwlError::BigMTooSmall { big_m, width });
        }
        let eps_plus = eps_plus.unwrap_or(DEFAULT_EPS_FRACTION * width);
        if !(eps_plus > 0.0 && eps_plus < width) {
            return Err(PwlError::BadEpsilon { eps: eps_plus, width });
        }
        let nodes: Vec<f64> = (0..=n_seg)
            .map(|k| y_lo + k as f64 * width)
            .map(|y| {
                let v = f(y);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(PwlError::NonFinite(y))
                }
            })
            .collect::<Result<_, _>>()?;
        let slopes = nodes.windows(2).map(|w| (w[1] - w[0]) / width).collect();
        Ok(PwlExpansion {
            y_lo,
            y_hi,
            n_seg,
            seg_width: width,
            f_lo: nodes[0],
            slopes,
            big_m,
            eps_plus,
        })
    }

    /// Breakpoint `k` (0-based), `y_lo + k Δ̄`.
    pub fn breakpoint(&self, k: usize) -> f64 {
        self.y_lo + k as f64 * self.seg_width
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        (0..=self.n_seg).map(|k| self.breakpoint(k)).collect()
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Segment fills for `y` when segments are filled strictly left to right.
    pub fn fill_order_assignment(&self, y: f64) -> Result<Vec<f64>, PwlError> {
        self.check_domain(y)?;
        Ok(self.fill(y))
    }

    fn fill(&self, y: f64) -> Vec<f64> {
        let mut remaining = (y - self.y_lo).max(0.0);
        (0..self.n_seg)
            .map(|k| {
                let take = if k + 1 == self.n_seg {
                    remaining.min(self.seg_width + DOMAIN_SLACK)
                } else {
                    remaining.min(self.seg_width)
                };
                remaining -= take;
                take
            })
            .collect()
    }

    fn check_domain(&self, y: f64) -> Result<(), PwlError> {
        if y >= self.y_lo && y <= self.y_hi {
            Ok(())
        } else {
            Err(PwlError::OutOfDomain {
                y,
                lo: self.y_lo,
                hi: self.y_hi,
            })
        }
    }

    /// Value of the interpolant at `y`.
    pub fn eval_interpolant(&self, y: f64) -> Result<f64, PwlError> {
        self.check_domain(y)?;
        Ok(self.eval_fill(y))
    }

    /// Like [`eval_interpolant`](Self::eval_interpolant) but clamps `y` into
    /// the domain; meant for solver output that may sit a hair outside.
    pub fn eval_clamped(&self, y: f64) -> f64 {
        self.eval_fill(y.clamp(self.y_lo, self.y_hi))
    }

    fn eval_fill(&self, y: f64) -> f64 {
        self.f_lo
            + self
                .fill(y)
                .iter()
                .zip(&self.slopes)
                .map(|(d, s)| d * s)
                .sum::<f64>()
    }

    /// Largest `|interpolant - f|` over a uniform grid of `grid_n` points.
    pub fn max_abs_error(&self, f: impl Fn(f64) -> f64, grid_n: usize) -> f64 {
        let grid_n = grid_n.max(2);
        let step = (self.y_hi - self.y_lo) / (grid_n - 1) as f64;
        (0..grid_n)
            .map(|k| {
                let y = if k + 1 == grid_n {
                    self.y_hi
                } else {
                    self.y_lo + k as f64 * step
                };
                (self.eval_fill(y) - f(y)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Adds the mixed-integer block for `y_var` to `model`.
    pub fn emit_constraints(&self, model: &mut MilpModel, y_var: VarId) -> Result<PwlBlock, PwlError> {
        self.emit_named(model, y_var, "")
    }

    /// As [`emit_constraints`](Self::emit_constraints), prefixing generated
    /// names with `prefix`.
    pub fn emit_named(&self, model: &mut MilpModel, y_var: VarId, prefix: &str) -> Result<PwlBlock, PwlError> {
        if y_var.0 >= model.num_vars() {
            return Err(ModelError::UnknownVariable(y_var.0).into());
        }
        let v = model.variable(y_var);
        if v.lo < self.y_lo - DOMAIN_SLACK || v.hi > self.y_hi + DOMAIN_SLACK {
            return Err(PwlError::BoundMismatch {
                var_lo: v.lo,
                var_hi: v.hi,
                lo: self.y_lo,
                hi: self.y_hi,
            });
        }
        let width = self.seg_width;
        let mut segments = Vec::with_capacity(self.n_seg);
        let mut binaries = Vec::with_capacity(self.n_seg);
        for k in 1..=self.n_seg {
            segments.push(model.add_named_variable(0.0, width, Integrality::Continuous, format!("{prefix}seg{k}"))?);
        }
        for k in 1..=self.n_seg {
            binaries.push(model.add_named_variable(0.0, 1.0, Integrality::Binary, format!("{prefix}fill{k}"))?);
        }

        let mut sum = LinExpr::new();
        for &s in &segments {
            sum.add_term(s, 1.0);
        }
        sum.add_term(y_var, -1.0);
        let coupling = model.add_named_constraint(&sum, Sense::Eq, -self.y_lo, format!("{prefix}coupling"))?;

        let mut capacity = Vec::with_capacity(self.n_seg);
        for k in 0..self.n_seg {
            let e = LinExpr::term(segments[k], 1.0).with(binaries[k], -width);
            capacity.push(model.add_named_constraint(&e, Sense::Le, 0.0, format!("{prefix}cap{}", k + 1))?);
        }
        // Δ_λ - M x_{λ+1} >= Δ̄ - M - ε⁺
        let mut fill_order = Vec::with_capacity(self.n_seg.saturating_sub(1));
        for k in 0..self.n_seg.saturating_sub(1) {
            let e = LinExpr::term(segments[k], 1.0).with(binaries[k + 1], -self.big_m);
            fill_order.push(model.add_named_constraint(
                &e,
                Sense::Ge,
                width - self.big_m - self.eps_plus,
                format!("{prefix}order{}", k + 1),
            )?);
        }

        let mut value = LinExpr::constant(self.f_lo);
        for (&s, &phi) in segments.iter().zip(&self.slopes) {
            value.add_term(s, phi);
        }
        Ok(PwlBlock {
            value,
            segments,
            binaries,
            coupling,
            capacity,
            fill_order,
        })
    }

    /// Checks segment fills and binaries against the block's constraints.
    pub fn check_fill_order(&self, seg_values: &[f64], bin_values: &[bool], tol: f64) -> Result<(), FillOrderViolation> {
        if seg_values.len() != self.n_seg || bin_values.len() != self.n_seg {
            return Err(FillOrderViolation {
                segment: 0,
                kind: ViolationKind::Length,
            });
        }
        let width = self.seg_width;
        for k in 0..self.n_seg {
            let fail = |kind| Err(FillOrderViolation { segment: k + 1, kind });
            let d = seg_values[k];
            if d < -tol {
                return fail(ViolationKind::Negative);
            }
            let cap = if bin_values[k] { width } else { 0.0 };
            if d > cap + tol {
                return fail(ViolationKind::Capacity);
            }
            if k + 1 < self.n_seg && bin_values[k + 1] {
                if !bin_values[k] {
                    return fail(ViolationKind::BinaryOrder);
                }
                if d < width - self.eps_plus - tol {
                    return fail(ViolationKind::NotFilled);
                }
            }
        }
        Ok(())
    }
}

/// Variables and rows added for one linearised variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlBlock {
    /// `F(y_lo) + Σ φ_λ Δ_λ`
    pub value: LinExpr,
    pub segments: Vec<VarId>,
    pub binaries: Vec<VarId>,
    pub coupling: ConstrId,
    pub capacity: Vec<ConstrId>,
    pub fill_order: Vec<ConstrId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Length,
    Negative,
    Capacity,
    NotFilled,
    BinaryOrder,
}

/// First violated condition; `segment` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
#[error("fill-order violation at segment {segment}: {kind:?}")]
pub struct FillOrderViolation {
    pub segment: usize,
    pub kind: ViolationKind,
}
