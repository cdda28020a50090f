//! Plain-text model dump in an LP-file style, for debugging.
//!
//! ```text
//! Minimize
//!  obj: 2 x0 - x1 + 5
//! Subject To
//!  c0: x0 + x1 <= 1
//! Bounds
//!  0 <= x0 <= 10
//!  x2 free
//! Binaries
//!  x1
//! End
//! ```
//!
//! Names come from the model; the objective constant, when non-zero, is
//! written as a trailing number.

use std::fmt::Write;

use super::{Integrality, MilpModel, VarId};

fn write_terms(out: &mut String, model: &MilpModel, terms: &[(VarId, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        let name = &model.variable(v).name;
        let sign = if c < 0.0 { "-" } else { "+" };
        let mag = c.abs();
        if k == 0 {
            if c < 0.0 {
                out.push_str(" -");
            }
        } else {
            let _ = write!(out, " {sign}");
        }
        if mag == 1.0 {
            let _ = write!(out, " {name}");
        } else {
            let _ = write!(out, " {mag} {name}");
        }
    }
}

pub fn to_lp_string(model: &MilpModel) -> String {
    let mut out = String::from("Minimize\n obj:");
    write_terms(&mut out, model, model.objective_terms());
    let k = model.objective_constant();
    if k != 0.0 {
        let _ = write!(out, " {} {}", if k < 0.0 { "-" } else { "+" }, k.abs());
    }
    out.push_str("\nSubject To\n");
    for c in model.constraints() {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.sense, c.rhs);
    }
    out.push_str("Bounds\n");
    for v in model.variables() {
        match (v.lo.is_finite(), v.hi.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {} free", v.name);
            }
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", v.name, v.lo);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {} <= {}", v.name, v.hi);
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {} <= {}", v.lo, v.name, v.hi);
            }
        }
    }
    let binaries: Vec<&str> = model
        .variables()
        .iter()
        .filter(|v| v.integrality == Integrality::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for b in binaries {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{LinExpr, Sense};

    #[test]
    fn dump_small_model() {
        let mut m = MilpModel::new();
        let x = m
            .add_named_variable(0.0, 10.0, Integrality::Continuous, "p")
            .unwrap();
        let b = m.add_named_variable(0.0, 1.0, Integrality::Binary, "v").unwrap();
        let z = m
            .add_named_variable(f64::NEG_INFINITY, f64::INFINITY, Integrality::Continuous, "z")
            .unwrap();
        m.add_named_constraint(&LinExpr::term(x, 1.0).with(b, -10.0), Sense::Le, 0.0, "cap")
            .unwrap();
        m.add_constraint(&LinExpr::term(z, -1.0).with(x, 2.5), Sense::Eq, 1.0)
            .unwrap();
        m.set_objective(&LinExpr::term(x, 2.0).with(b, -1.0)).unwrap();
        let text = to_lp_string(&m);
        let expected = "Minimize\n obj: 2 p - v\nSubject To\n cap: p - 10 v <= 0\n c1: 2.5 p - z = 1\n\
                        Bounds\n 0 <= p <= 10\n 0 <= v <= 1\n z free\nBinaries\n v\nEnd\n";
        assert_eq!(text, expected);
    }
}
