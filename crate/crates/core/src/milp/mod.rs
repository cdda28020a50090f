//! Minimal mixed-integer linear programming layer.
//!
//! [`MilpModel`] collects bounded variables (continuous or binary), sparse
//! linear constraints and a minimisation objective. [`ReferenceSolver`] solves
//! it by best-bound branch-and-bound over LP relaxations computed with a dense
//! bounded-variable simplex. Other engines plug in through [`MilpSolver`].

mod bnb;
#[cfg(feature = "highs")]
mod external;
pub mod lp_format;
mod simplex;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bnb::ReferenceSolver;
#[cfg(feature = "highs")]
pub use external::HighsSolver;
pub use simplex::{solve_lp, LpOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable bounds are inverted: lower {lo} > upper {hi}")]
    InvertedBounds { lo: f64, hi: f64 },
    #[error("binary variable bounds [{lo}, {hi}] are not within [0, 1]")]
    BinaryBounds { lo: f64, hi: f64 },
    #[error("bound is NaN")]
    NanBound,
    #[error("unknown variable id {0}")]
    UnknownVariable(usize),
    #[error("coefficient on variable {0} is not finite")]
    NonFiniteCoefficient(usize),
    #[error("right-hand side is not finite")]
    NonFiniteRhs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConstrId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrality {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

/// Affine expression `Σ c_j x_j + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        LinExpr {
            terms: vec![(var, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, var: VarId, coef: f64) -> &mut Self {
        self.terms.push((var, coef));
        self
    }

    pub fn with(mut self, var: VarId, coef: f64) -> Self {
        self.terms.push((var, coef));
        self
    }

    /// `self + scale * other`
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += scale * other.constant;
        self
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }

    /// Merge duplicate variables and drop zero coefficients, sorted by id.
    fn normalized(&self) -> Vec<(VarId, f64)> {
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *merged.entry(v).or_insert(0.0) += c;
        }
        merged.into_iter().filter(|&(_, c)| c != 0.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub lo: f64,
    pub hi: f64,
    pub integrality: Integrality,
    pub name: String,
    /// Lower values are branched on first; `None` sorts last.
    pub branch_priority: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sorted by variable id, one entry per variable, no zeros.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub name: String,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// A minimisation MILP.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    objective_constant: f64,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, lo: f64, hi: f64, integrality: Integrality) -> Result<VarId, ModelError> {
        self.add_named_variable(lo, hi, integrality, String::new())
    }

    pub fn add_named_variable(
        &mut self,
        lo: f64,
        hi: f64,
        integrality: Integrality,
        name: impl Into<String>,
    ) -> Result<VarId, ModelError> {
        if lo.is_nan() || hi.is_nan() {
            return Err(ModelError::NanBound);
        }
        if lo > hi {
            return Err(ModelError::InvertedBounds { lo, hi });
        }
        if integrality == Integrality::Binary && (lo < 0.0 || hi > 1.0) {
            return Err(ModelError::BinaryBounds { lo, hi });
        }
        let id = VarId(self.vars.len());
        let mut name = name.into();
        if name.is_empty() {
            name = format!("x{}", id.0);
        }
        self.vars.push(Variable {
            lo,
            hi,
            integrality,
            name,
            branch_priority: None,
        });
        Ok(id)
    }

    pub fn set_branch_priority(&mut self, var: VarId, priority: Option<u32>) -> Result<(), ModelError> {
        self.check_var(var)?;
        self.vars[var.0].branch_priority = priority;
        Ok(())
    }

    fn check_var(&self, var: VarId) -> Result<(), ModelError> {
        if var.0 < self.vars.len() {
            Ok(())
        } else {
            Err(ModelError::UnknownVariable(var.0))
        }
    }

    fn check_expr(&self, expr: &LinExpr) -> Result<(), ModelError> {
        for &(v, c) in &expr.terms {
            self.check_var(v)?;
            if !c.is_finite() {
                return Err(ModelError::NonFiniteCoefficient(v.0));
            }
        }
        Ok(())
    }

    /// Adds `expr sense rhs`. A constant inside `expr` is moved to the
    /// right-hand side.
    pub fn add_constraint(&mut self, expr: &LinExpr, sense: Sense, rhs: f64) -> Result<ConstrId, ModelError> {
        self.add_named_constraint(expr, sense, rhs, String::new())
    }

    pub fn add_named_constraint(
        &mut self,
        expr: &LinExpr,
        sense: Sense,
        rhs: f64,
        name: impl Into<String>,
    ) -> Result<ConstrId, ModelError> {
        self.check_expr(expr)?;
        let rhs = rhs - expr.constant;
        if !rhs.is_finite() {
            return Err(ModelError::NonFiniteRhs);
        }
        let id = ConstrId(self.constraints.len());
        let mut name = name.into();
        if name.is_empty() {
            name = format!("c{}", id.0);
        }
        self.constraints.push(Constraint {
            terms: expr.normalized(),
            sense,
            rhs,
            name,
        });
        Ok(id)
    }

    /// Sets the expression to minimise.
    pub fn set_objective(&mut self, expr: &LinExpr) -> Result<(), ModelError> {
        self.check_expr(expr)?;
        self.objective = expr.normalized();
        self.objective_constant = expr.constant;
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn variable(&self, var: VarId) -> &Variable {
        &self.vars[var.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: ConstrId) -> &Constraint {
        &self.constraints[id.0]
    }

    pub fn objective_terms(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.integrality == Integrality::Binary)
            .count()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_constant
            + self
                .objective
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lo - x).max(x - v.hi).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// Largest distance of a binary variable from {0, 1}.
    pub fn max_integrality_violation(&self, values: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(values)
            .filter(|(v, _)| v.integrality == Integrality::Binary)
            .map(|(_, &x)| (x - x.round()).abs())
            .fold(0.0, f64::max)
    }

    /// Copy of the model with a variable's bounds replaced.
    pub fn with_bounds(&self, var: VarId, lo: f64, hi: f64) -> Result<MilpModel, ModelError> {
        self.check_var(var)?;
        if lo > hi {
            return Err(ModelError::InvertedBounds { lo, hi });
        }
        let mut m = self.clone();
        m.vars[var.0].lo = lo;
        m.vars[var.0].hi = hi;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    LimitReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Variable values; empty unless a feasible point is known.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Incumbent objective minus the proven lower bound.
    pub gap: f64,
    pub nodes: usize,
    pub message: String,
}

impl MilpSolution {
    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub node_limit: usize,
    #[serde(with = "secs")]
    pub time_limit: Option<Duration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            abs_gap: 1e-6,
            rel_gap: 1e-6,
            node_limit: 1_000_000,
            time_limit: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("feasibility_tol", self.feasibility_tol),
            ("integrality_tol", self.integrality_tol),
            ("abs_gap", self.abs_gap),
            ("rel_gap", self.rel_gap),
        ] {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Gap below which an incumbent is accepted as optimal.
    pub fn gap_tolerance(&self, objective: f64) -> f64 {
        self.abs_gap.max(self.rel_gap * objective.abs())
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_some(&d.as_secs_f64()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        let secs: Option<f64> = Option::deserialize(d)?;
        Ok(secs.map(Duration::from_secs_f64))
    }
}

/// Backend seam for MILP engines.
pub trait MilpSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &MilpModel, options: &SolveOptions) -> MilpSolution;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Reference,
    External,
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" => Ok(SolverKind::Reference),
            "external" => Ok(SolverKind::External),
            other => Err(format!("unknown solver '{other}' (expected reference|external)")),
        }
    }
}

/// Returns the backend for `kind`, or an error if it was not compiled in.
pub fn solver_for(kind: SolverKind) -> Result<Box<dyn MilpSolver>, String> {
    match kind {
        SolverKind::Reference => Ok(Box::new(ReferenceSolver::default())),
        #[cfg(feature = "highs")]
        SolverKind::External => Ok(Box::new(HighsSolver)),
        #[cfg(not(feature = "highs"))]
        SolverKind::External => Err("external solver support was not compiled in (enable the `highs` feature)".into()),
    }
}

/// Solves with the reference branch-and-bound solver.
pub fn solve(model: &MilpModel, options: &SolveOptions) -> MilpSolution {
    ReferenceSolver::default().solve(model, options)
}
