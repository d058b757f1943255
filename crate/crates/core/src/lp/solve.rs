use microlp::{ComparisonOp, OptimizationDirection, Problem, SolutionStatus};

use super::{verify_solution, LpProblem, LpSolution, LpStatus, Sense, CERTIFY_TOL};

/// Solves the model and certifies the result by recomputing every constraint.
///
/// Solver output that violates the model beyond [`CERTIFY_TOL`] is reported
/// as [`LpStatus::NumericalFailure`], never as optimal.
pub fn solve_lp(problem: &LpProblem) -> LpSolution {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..problem.num_vars())
        .map(|i| lp.add_var(problem.objective[i], (0.0, problem.upper[i])))
        .collect();
    for row in &problem.rows {
        let op = match row.sense {
            Sense::Eq => ComparisonOp::Eq,
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
        };
        let expr: Vec<_> = row.terms.iter().map(|&(v, a)| (vars[v], a)).collect();
        lp.add_constraint(expr, op, row.rhs);
    }

    let failure = |status: LpStatus, message: String| LpSolution {
        status,
        objective: f64::NAN,
        values: Vec::new(),
        message: Some(message),
    };

    let outcome = match lp.solve() {
        Ok(o) => o,
        Err(microlp::Error::Infeasible) => {
            return failure(LpStatus::Infeasible, "no feasible flow".into())
        }
        Err(e) => return failure(LpStatus::NumericalFailure, e.to_string()),
    };
    let Some(sol) = outcome.solution() else {
        return failure(LpStatus::NumericalFailure, "solver interrupted".into());
    };
    if sol.status() != SolutionStatus::Optimal {
        return failure(LpStatus::NumericalFailure, "optimality not proven".into());
    }

    let values: Vec<f64> = vars
        .iter()
        .map(|&v| {
            let x = sol.var_value_raw(v);
            // the simplex may leave round-off just below a zero bound
            if x.abs() < 1e-12 {
                0.0
            } else {
                x
            }
        })
        .collect();
    let mut solution = LpSolution {
        status: LpStatus::Optimal,
        objective: problem.evaluate(&values),
        values,
        message: None,
    };
    match verify_solution(problem, &solution, CERTIFY_TOL) {
        Ok(v) if v.is_empty() => {}
        Ok(v) => {
            log::warn!("solver output violates {} constraints", v.len());
            solution.status = LpStatus::NumericalFailure;
            solution.message = Some(format!("{} violated constraints, first: {}", v.len(), v[0]));
        }
        Err(e) => {
            solution.status = LpStatus::NumericalFailure;
            solution.message = Some(e.to_string());
        }
    }
    solution
}

#[cfg(test)]
mod tests {
    use super::super::tests::{fig1, fig1_demands};
    use super::super::*;
    use crate::plan::{parse_contact_plan, ContactId, NodeId};

    const EPS: f64 = 1e-6;

    fn solve(ttl1: Option<f64>, ttl2: Option<f64>, w: &WeightFn) -> (LpProblem, LpSolution) {
        let c = demands_to_commodities(&fig1_demands(ttl1, ttl2));
        let p = build_lp(&fig1(), &c, w).unwrap();
        let s = solve_lp(&p);
        (p, s)
    }

    #[test]
    fn fig1_optimal_flow() {
        let (p, s) = solve(Some(30.0), Some(20.0), &WeightFn::Linear);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 50.0).abs() < EPS);
        // commodity 0 is N1's, commodity 1 is N2's
        assert!((s.flow(&p, ContactId(3), 2, 0) - 10.0).abs() < EPS);
        assert!((s.flow(&p, ContactId(2), 1, 1) - 10.0).abs() < EPS);
        assert!(s.flow(&p, ContactId(1), 0, 0).abs() < EPS);
        assert!(s.flow(&p, ContactId(2), 1, 0).abs() < EPS);
        let m = lp_metrics(&p, &s).unwrap();
        assert_eq!(m.delivery_ratio, Some(1.0));
        assert!((m.mean_hops.unwrap() - 1.0).abs() < EPS);
        assert!((m.energy_efficiency.unwrap() - 1.0).abs() < EPS);
        assert!((m.mean_delay.unwrap() - 25.0).abs() < EPS);
    }

    #[test]
    fn fig1_tight_ttl_is_infeasible() {
        let (p, s) = solve(Some(10.0), Some(10.0), &WeightFn::Linear);
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!(s.values.is_empty());
        assert!(matches!(lp_metrics(&p, &s), Err(crate::Error::NotOptimal(_))));
    }

    #[test]
    fn soft_mode_drops_only_what_cannot_arrive() {
        let c = demands_to_commodities(&fig1_demands(Some(10.0), Some(20.0)));
        let p = build_lp_with_mode(&fig1(), &c, &WeightFn::Linear, LpMode::Soft).unwrap();
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        let m = lp_metrics(&p, &s).unwrap();
        assert!((m.delivered_on_time - 10.0).abs() < EPS);
        assert!((m.delivery_ratio.unwrap() - 0.5).abs() < EPS);
        assert!((s.values[p.s_var(0).unwrap()] - 10.0).abs() < EPS);
    }

    #[test]
    fn zero_traffic_costs_nothing() {
        let mut c = demands_to_commodities(&fig1_demands(Some(30.0), Some(20.0)));
        for x in &mut c {
            x.amount = 0.0;
        }
        let p = build_lp(&fig1(), &c, &WeightFn::Linear).unwrap();
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.objective.abs() < EPS);
        assert!(s.values.iter().all(|v| v.abs() < EPS));
    }

    #[test]
    fn zero_relay_buffer_blocks_store_and_forward() {
        let plan = parse_contact_plan(
            "plan 3 10\nnode 1 inf\nnode 2 0\nnode 3 inf\n\
             contact 1 1 2 0 10 10\ncontact 2 2 3 10 20 10\n",
        )
        .unwrap();
        let c = vec![Commodity {
            src: NodeId(1),
            dst: NodeId(3),
            t_gen: 0.0,
            ttl: None,
            amount: 1.0,
        }];
        let p = build_lp(&plan, &c, &WeightFn::Linear).unwrap();
        assert_eq!(solve_lp(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn scaling_weights_keeps_flows() {
        let (_, base) = solve(Some(30.0), Some(20.0), &WeightFn::Linear);
        let w = WeightFn::Linear.scaled(3, 7.5).unwrap();
        let (_, scaled) = solve(Some(30.0), Some(20.0), &w);
        assert!((scaled.objective - 7.5 * base.objective).abs() < 1e-6);
        for (a, b) in base.values.iter().zip(&scaled.values) {
            assert!((a - b).abs() < EPS);
        }
    }
}
