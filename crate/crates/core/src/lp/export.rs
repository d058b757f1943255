use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{LpProblem, LpSolution, LpStatus, Sense, VarKind};
use crate::error::{Error, Result};
use crate::plan::{ContactId, NodeId};

const TERMS_PER_LINE: usize = 8;

impl LpProblem {
    /// CPLEX LP text of the model.
    pub fn to_lp_format(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "\\ {} commodities, {} arcs, {} variables, {} rows",
            self.commodities.len(),
            self.arcs.len(),
            self.num_vars(),
            self.rows.len()
        );
        s.push_str("Minimize\n obj:");
        let obj: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| (i, c))
            .collect();
        self.write_terms(&mut s, &obj);
        s.push_str("\nSubject To\n");
        for row in &self.rows {
            let _ = write!(s, " {}:", row.name);
            self.write_terms(&mut s, &row.terms);
            let op = match row.sense {
                Sense::Eq => "=",
                Sense::Le => "<=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(s, " {op} {}", row.rhs);
        }
        s.push_str("Bounds\n");
        for (i, &u) in self.upper.iter().enumerate() {
            if u == 0.0 {
                let _ = writeln!(s, " {} = 0", self.var_name(i));
            } else if u.is_finite() {
                let _ = writeln!(s, " 0 <= {} <= {u}", self.var_name(i));
            }
        }
        s.push_str("End\n");
        s
    }

    fn write_terms(&self, s: &mut String, terms: &[(usize, f64)]) {
        if terms.is_empty() {
            s.push_str(" 0");
        }
        for (n, &(v, a)) in terms.iter().enumerate() {
            if n > 0 && n % TERMS_PER_LINE == 0 {
                s.push_str("\n   ");
            }
            let sign = if a < 0.0 { '-' } else { '+' };
            let _ = write!(s, " {sign} {} {}", a.abs(), self.var_name(v));
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SolutionRow {
    var: String,
    /// 1-based state for flows, timestamp index for buffers.
    index: Option<usize>,
    /// Contact id for flows, node id for buffers.
    element: Option<u32>,
    commodity: usize,
    value: f64,
}

/// One row per variable: `var,index,element,commodity,value`.
pub fn solution_to_csv(problem: &LpProblem, solution: &LpSolution) -> Result<String> {
    if solution.values.len() != problem.num_vars() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {} variables",
            solution.values.len(),
            problem.num_vars()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, &value) in solution.values.iter().enumerate() {
        let row = match problem.var_kind(i) {
            VarKind::Flow { arc, commodity } => SolutionRow {
                var: "X".into(),
                index: Some(problem.arcs[arc].state + 1),
                element: Some(problem.arcs[arc].contact.0),
                commodity,
                value,
            },
            VarKind::Buffer {
                timestamp,
                node,
                commodity,
            } => SolutionRow {
                var: "B".into(),
                index: Some(timestamp),
                element: Some(problem.plan.nodes[node].id.0),
                commodity,
                value,
            },
            VarKind::Slack { commodity } => SolutionRow {
                var: "S".into(),
                index: None,
                element: None,
                commodity,
                value,
            },
        };
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads a solution written by [`solution_to_csv`]; absent variables are 0.
pub fn solution_from_csv(problem: &LpProblem, text: &str) -> Result<LpSolution> {
    let mut values = vec![0.0; problem.num_vars()];
    let mut r = csv::Reader::from_reader(text.as_bytes());
    for row in r.deserialize() {
        let row: SolutionRow = row?;
        let c = row.commodity;
        if c >= problem.commodities.len() {
            return Err(Error::ShapeMismatch(format!("unknown commodity {c}")));
        }
        let missing = || Error::ShapeMismatch(format!("incomplete {} row", row.var));
        let var = match row.var.as_str() {
            "X" => {
                let k = row.index.filter(|&k| k >= 1).ok_or_else(missing)?;
                let e = ContactId(row.element.ok_or_else(missing)?);
                problem.flow_var(e, k - 1, c).ok_or_else(|| {
                    Error::ShapeMismatch(format!("contact {e} is not active in state {k}"))
                })?
            }
            "B" => {
                let t = row.index.ok_or_else(missing)?;
                let id = NodeId(row.element.ok_or_else(missing)?);
                let v = problem.node_index(id).ok_or(Error::UnknownNode(id))?;
                if t > problem.plan.grid.state_count {
                    return Err(Error::ShapeMismatch(format!("timestamp index {t}")));
                }
                problem.b_var(t, v, c)
            }
            "S" => problem
                .s_var(c)
                .ok_or_else(|| Error::ShapeMismatch("slack in a hard model".into()))?,
            other => return Err(Error::ShapeMismatch(format!("unknown variable family {other}"))),
        };
        values[var] = row.value;
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: problem.evaluate(&values),
        values,
        message: None,
    })
}
