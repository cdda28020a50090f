//! HiGHS backend.

use highs::{HighsModelStatus, RowProblem, Sense as HSense};

use super::{Integrality, MilpModel, MilpSolution, MilpSolver, Sense, SolveOptions, SolveStatus};

#[derive(Debug, Clone, Default)]
pub struct HighsSolver;

impl MilpSolver for HighsSolver {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &MilpModel, options: &SolveOptions) -> MilpSolution {
        if model.num_vars() == 0 {
            let feasible = model.max_violation(&[]) <= options.feasibility_tol;
            return MilpSolution {
                status: if feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible },
                values: Vec::new(),
                objective: model.objective_constant(),
                gap: 0.0,
                nodes: 0,
                message: String::new(),
            };
        }
        let mut cost = vec![0.0; model.num_vars()];
        for &(v, c) in model.objective_terms() {
            cost[v.0] += c;
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .variables()
            .iter()
            .zip(&cost)
            .map(|(v, &c)| pb.add_column_with_integrality(c, v.lo..=v.hi, v.integrality == Integrality::Binary))
            .collect();
        for c in model.constraints() {
            let row = c.terms.iter().map(|&(v, a)| (cols[v.0], a));
            match c.sense {
                Sense::Le => pb.add_row(f64::NEG_INFINITY..=c.rhs, row),
                Sense::Ge => pb.add_row(c.rhs..=f64::INFINITY, row),
                Sense::Eq => pb.add_row(c.rhs..=c.rhs, row),
            }
        }
        let mut m = pb.optimise(HSense::Minimise);
        m.make_quiet();
        m.set_option("primal_feasibility_tolerance", options.feasibility_tol);
        m.set_option("mip_feasibility_tolerance", options.integrality_tol);
        m.set_option("mip_abs_gap", options.abs_gap);
        m.set_option("mip_rel_gap", options.rel_gap);
        m.set_option("mip_max_nodes", options.node_limit.min(i32::MAX as usize) as i32);
        if let Some(t) = options.time_limit {
            m.set_option("time_limit", t.as_secs_f64());
        }
        let solved = m.solve();
        let status = solved.status();
        let sol = solved.get_solution();
        let mut values = sol.columns().to_vec();
        for (j, v) in model.variables().iter().enumerate() {
            if v.integrality == Integrality::Binary && j < values.len() {
                values[j] = values[j].round();
            }
        }
        let has_point = values.len() == model.num_vars()
            && model.max_violation(&values) <= 10.0 * options.feasibility_tol.max(1e-6);
        let objective = if has_point {
            model.objective_value(&values)
        } else {
            f64::INFINITY
        };
        let (status, message) = match status {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => (SolveStatus::Optimal, String::new()),
            HighsModelStatus::Infeasible => (SolveStatus::Infeasible, String::new()),
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
                (SolveStatus::Unbounded, format!("{status:?}"))
            }
            other => (SolveStatus::LimitReached, format!("{other:?}")),
        };
        let gap = if status == SolveStatus::Optimal { 0.0 } else { f64::INFINITY };
        MilpSolution {
            status,
            values: if has_point { values } else { Vec::new() },
            objective,
            gap,
            nodes: 0,
            message,
        }
    }
}
