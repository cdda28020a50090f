//! Best-bound branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::time::Instant;

use super::simplex::{Basis, LpData, LpStatus, Tableau};
use super::{Integrality, MilpModel, MilpSolution, MilpSolver, SolveOptions, SolveStatus};

/// Parent tableaus kept around for warm-starting their children.
const TABLEAU_CACHE: usize = 32;

/// Reference MILP solver.
#[derive(Debug, Clone)]
pub struct ReferenceSolver {
    /// Honour per-variable branching priorities before fractionality.
    pub use_priorities: bool,
}

impl Default for ReferenceSolver {
    fn default() -> Self {
        ReferenceSolver { use_priorities: true }
    }
}

struct Node {
    id: usize,
    parent: usize,
    depth: usize,
    bound: f64,
    fixings: Vec<(usize, f64)>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap: the "greatest" node is the one with the lowest bound, then
    // the deepest, then the oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

struct Incumbent {
    values: Vec<f64>,
    objective: f64,
}

impl ReferenceSolver {
    fn pick_branch(&self, model: &MilpModel, x: &[f64], tol: f64) -> Option<usize> {
        let mut best: Option<(u32, f64, usize)> = None;
        for (j, v) in model.variables().iter().enumerate() {
            if v.integrality != Integrality::Binary {
                continue;
            }
            let frac = (x[j] - x[j].round()).abs();
            if frac <= tol {
                continue;
            }
            let prio = if self.use_priorities {
                v.branch_priority.unwrap_or(u32::MAX)
            } else {
                u32::MAX
            };
            let better = match best {
                None => true,
                Some((bp, bf, _)) => prio < bp || (prio == bp && frac > bf + 1e-12),
            };
            if better {
                best = Some((prio, frac, j));
            }
        }
        best.map(|(_, _, j)| j)
    }

    fn run(&self, model: &MilpModel, options: &SolveOptions) -> MilpSolution {
        let start = Instant::now();
        let lp = LpData::from_model(model);
        let ftol = options.feasibility_tol;

        let mut heap = BinaryHeap::new();
        heap.push(Node {
            id: 0,
            parent: usize::MAX,
            depth: 0,
            bound: f64::NEG_INFINITY,
            fixings: Vec::new(),
            basis: None,
        });
        let mut next_id = 1;
        let mut cache: HashMap<usize, Tableau> = HashMap::new();
        let mut cache_order: VecDeque<usize> = VecDeque::new();
        let mut incumbent: Option<Incumbent> = None;
        let mut nodes = 0usize;
        let mut dropped = false;
        let mut limit_hit = false;

        while let Some(node) = heap.peek() {
            if let Some(inc) = &incumbent {
                if node.bound >= inc.objective - options.gap_tolerance(inc.objective) {
                    break;
                }
            }
            if nodes >= options.node_limit
                || options.time_limit.is_some_and(|t| start.elapsed() >= t)
            {
                limit_hit = true;
                break;
            }
            let node = heap.pop().expect("peeked");
            nodes += 1;

            let mut lo = lp.lo.clone();
            let mut hi = lp.hi.clone();
            for &(j, v) in &node.fixings {
                lo[j] = v;
                hi[j] = v;
            }
            let mut tab = match (cache.get(&node.parent), &node.basis) {
                (Some(parent), _) => {
                    let mut t = parent.clone();
                    let &(j, v) = node.fixings.last().expect("child has a fixing");
                    t.set_bounds(j, v, v);
                    t
                }
                (None, Some(basis)) => Tableau::from_basis(&lp, lo, hi, basis),
                (None, None) => Tableau::slack(&lp, lo, hi),
            };
            let status = tab.solve(&lp, ftol);
            match status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    if node.id == 0 {
                        return MilpSolution {
                            status: SolveStatus::Unbounded,
                            values: Vec::new(),
                            objective: f64::NEG_INFINITY,
                            gap: f64::INFINITY,
                            nodes,
                            message: "LP relaxation is unbounded".into(),
                        };
                    }
                    dropped = true;
                    continue;
                }
                LpStatus::IterationLimit => {
                    dropped = true;
                    continue;
                }
            }
            let objective = tab.objective(&lp);
            if let Some(inc) = &incumbent {
                if objective >= inc.objective - options.gap_tolerance(inc.objective) {
                    continue;
                }
            }
            let x = &tab.x[..lp.n];
            match self.pick_branch(model, x, options.integrality_tol) {
                None => {
                    let mut values = x.to_vec();
                    for (j, v) in model.variables().iter().enumerate() {
                        if v.integrality == Integrality::Binary {
                            values[j] = values[j].round();
                        }
                    }
                    incumbent = Some(Incumbent { values, objective });
                }
                Some(j) => {
                    let up_first = x[j] >= 0.5;
                    let basis = tab.basis();
                    let order = if up_first { [1.0, 0.0] } else { [0.0, 1.0] };
                    for v in order {
                        let mut fixings = node.fixings.clone();
                        fixings.push((j, v));
                        heap.push(Node {
                            id: next_id,
                            parent: node.id,
                            depth: node.depth + 1,
                            bound: objective,
                            fixings,
                            basis: Some(basis.clone()),
                        });
                        next_id += 1;
                    }
                    cache.insert(node.id, tab);
                    cache_order.push_back(node.id);
                    if cache_order.len() > TABLEAU_CACHE {
                        if let Some(old) = cache_order.pop_front() {
                            cache.remove(&old);
                        }
                    }
                }
            }
        }

        let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        match incumbent {
            Some(inc) => {
                let bound = open_bound.min(inc.objective);
                let gap = (inc.objective - bound).max(0.0);
                let proven = !limit_hit && !dropped;
                let status = if proven || gap <= options.gap_tolerance(inc.objective) {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::LimitReached
                };
                let message = if dropped {
                    "some nodes were dropped after numerical trouble".into()
                } else if limit_hit {
                    "node or time limit reached".into()
                } else {
                    String::new()
                };
                MilpSolution {
                    status,
                    values: inc.values,
                    objective: inc.objective,
                    gap,
                    nodes,
                    message,
                }
            }
            None => MilpSolution {
                status: if limit_hit || dropped {
                    SolveStatus::LimitReached
                } else {
                    SolveStatus::Infeasible
                },
                values: Vec::new(),
                objective: f64::INFINITY,
                gap: f64::INFINITY,
                nodes,
                message: if dropped {
                    "no incumbent; nodes dropped after numerical trouble".into()
                } else if limit_hit {
                    "no incumbent before limit".into()
                } else {
                    String::new()
                },
            },
        }
    }
}

impl MilpSolver for ReferenceSolver {
    fn name(&self) -> &'static str {
        "reference"
    }

    fn solve(&self, model: &MilpModel, options: &SolveOptions) -> MilpSolution {
        self.run(model, options)
    }
}
