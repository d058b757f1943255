//! Feasibility check that rebuilds every constraint from the contact plan and
//! the commodities, without reading the row list of the model.

use std::fmt;

use serde::Serialize;

use super::{LpMode, LpProblem, LpSolution};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Negative,
    BufferBalance,
    BufferLimit,
    ArcCapacity,
    InitialBuffer,
    SendBeforeGeneration,
    Deadline,
    FinalBuffer,
    DestinationResend,
    DropExceedsAmount,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    /// How far the constraint is off, always positive.
    pub amount: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {} off by {:.3e}", self.kind, self.location, self.amount)
    }
}

/// Lists every constraint `solution` violates by more than `tol`.
pub fn verify_solution(problem: &LpProblem, solution: &LpSolution, tol: f64) -> Result<Vec<Violation>> {
    if solution.values.len() != problem.num_vars() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {} variables",
            solution.values.len(),
            problem.num_vars()
        )));
    }
    let plan = &problem.plan;
    let grid = plan.grid;
    let f = grid.state_count;
    let vals = &solution.values;
    let mut out = Vec::new();
    let mut check = |kind, location: &dyn Fn() -> String, excess: f64| {
        if excess > tol {
            out.push(Violation {
                kind,
                location: location(),
                amount: excess,
            });
        }
    };

    for (i, &v) in vals.iter().enumerate() {
        check(ViolationKind::Negative, &|| problem.var_name(i), -v);
    }

    // flow of commodity ci on contact `c` in state q, with a shape check
    let flow = |ci: usize, contact: &crate::plan::Contact, q: usize| -> Result<f64> {
        problem
            .flow_var(contact.id, q, ci)
            .map(|i| vals[i])
            .ok_or_else(|| {
                Error::ShapeMismatch(format!("no variable for contact {} in state {}", contact.id, q + 1))
            })
    };

    for (ci, c) in problem.commodities.iter().enumerate() {
        let y = problem.node_index(c.src).ok_or(Error::UnknownNode(c.src))?;
        let z = problem.node_index(c.dst).ok_or(Error::UnknownNode(c.dst))?;
        let g = grid
            .index_of(c.t_gen)
            .ok_or_else(|| Error::InvalidDemand(format!("generation time {}", c.t_gen)))?;
        let dropped = match problem.mode {
            LpMode::Soft => vals[problem.s_var(ci).expect("soft mode has slacks")],
            LpMode::Hard => 0.0,
        };
        let injected = c.amount - dropped;
        check(ViolationKind::DropExceedsAmount, &|| format!("c{ci}"), -injected);
        let b = |q: usize, v: usize| vals[problem.b_var(q, v, ci)];

        for v in 0..plan.nodes.len() {
            let expect = if v == y && g == 0 { injected } else { 0.0 };
            check(
                ViolationKind::InitialBuffer,
                &|| format!("t0 v{} c{ci}", plan.nodes[v].id),
                (b(0, v) - expect).abs(),
            );
        }

        for q in 1..=f {
            let mut net = vec![0.0; plan.nodes.len()];
            for ct in &plan.contacts {
                let (s0, s1) = plan.span(ct);
                if !(s0 < q && q <= s1) {
                    continue;
                }
                let x = flow(ci, ct, q - 1)?;
                let from = problem.node_index(ct.from).ok_or(Error::UnknownNode(ct.from))?;
                let to = problem.node_index(ct.to).ok_or(Error::UnknownNode(ct.to))?;
                net[to] += x;
                net[from] -= x;
                if q <= g {
                    check(
                        ViolationKind::SendBeforeGeneration,
                        &|| format!("k{q} e{} c{ci}", ct.id),
                        x.abs(),
                    );
                }
                if ct.from == c.dst {
                    check(
                        ViolationKind::DestinationResend,
                        &|| format!("k{q} e{} c{ci}", ct.id),
                        x.abs(),
                    );
                }
            }
            for v in 0..plan.nodes.len() {
                let inject = if v == y && g == q { injected } else { 0.0 };
                let residual = b(q, v) - b(q - 1, v) - net[v] - inject;
                check(
                    ViolationKind::BufferBalance,
                    &|| format!("t{q} v{} c{ci}", plan.nodes[v].id),
                    residual.abs(),
                );
            }
        }

        if let Some(ttl) = c.ttl {
            let d = grid.floor_index(c.t_gen + ttl);
            for q in d..=f {
                check(
                    ViolationKind::Deadline,
                    &|| format!("t{q} c{ci}"),
                    injected - b(q, z),
                );
            }
        }

        for v in 0..plan.nodes.len() {
            let expect = if v == z { injected } else { 0.0 };
            check(
                ViolationKind::FinalBuffer,
                &|| format!("t{f} v{} c{ci}", plan.nodes[v].id),
                (b(f, v) - expect).abs(),
            );
        }
    }

    for (v, node) in plan.nodes.iter().enumerate() {
        let Some(limit) = node.buffer.limit() else {
            continue;
        };
        for q in 0..=f {
            let held: f64 = (0..problem.commodities.len())
                .map(|ci| vals[problem.b_var(q, v, ci)])
                .sum();
            check(
                ViolationKind::BufferLimit,
                &|| format!("t{q} v{}", node.id),
                held - limit as f64,
            );
        }
    }

    for ct in &plan.contacts {
        let (s0, s1) = plan.span(ct);
        for q in s0..s1 {
            let mut sent = 0.0;
            for ci in 0..problem.commodities.len() {
                sent += flow(ci, ct, q)?;
            }
            check(
                ViolationKind::ArcCapacity,
                &|| format!("k{} e{}", q + 1, ct.id),
                sent - ct.capacity as f64,
            );
        }
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{fig1, fig1_demands};
    use super::super::*;

    fn solved() -> (LpProblem, LpSolution) {
        let c = demands_to_commodities(&fig1_demands(Some(30.0), Some(20.0)));
        let p = build_lp(&fig1(), &c, &WeightFn::Linear).unwrap();
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        (p, s)
    }

    #[test]
    fn optimal_solution_passes() {
        let (p, s) = solved();
        assert!(verify_solution(&p, &s, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn every_single_perturbation_is_caught() {
        let (p, s) = solved();
        for i in 0..p.num_vars() {
            for delta in [1.0, -1.0] {
                let mut bad = s.clone();
                bad.values[i] += delta;
                let v = verify_solution(&p, &bad, 1e-6).unwrap();
                assert!(!v.is_empty(), "{} {delta:+} not caught", p.var_name(i));
            }
        }
    }

    #[test]
    fn all_zero_misses_final_buffers() {
        let (p, s) = solved();
        let zero = LpSolution {
            values: vec![0.0; s.values.len()],
            ..s
        };
        let v = verify_solution(&p, &zero, 1e-6).unwrap();
        assert!(v.iter().any(|x| x.kind == ViolationKind::FinalBuffer));
    }

    #[test]
    fn wrong_length_is_a_shape_error() {
        let (p, mut s) = solved();
        s.values.pop();
        assert!(matches!(
            verify_solution(&p, &s, 1e-6),
            Err(crate::Error::ShapeMismatch(_))
        ));
    }
}
