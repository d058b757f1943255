//! Build, solve and independently verify the flow model, in hard and soft
//! mode, and print it in LP file format.

use cgrlab::lp::{
    build_lp_with_mode, demands_to_commodities, lp_metrics, solve_lp, verify_solution, LpMode, LpStatus, WeightFn,
};
use cgrlab::plan::parse_contact_plan;
use cgrlab::sim::parse_demands;

fn main() -> cgrlab::Result<()> {
    let plan = parse_contact_plan(include_str!("../scenarios/fig1.cp"))?;
    for (name, text) in [
        ("fig1", include_str!("../scenarios/fig1.json")),
        ("fig1_tight", include_str!("../scenarios/fig1_tight.json")),
    ] {
        let commodities = demands_to_commodities(&parse_demands(text)?);
        for mode in [LpMode::Hard, LpMode::Soft] {
            let problem = build_lp_with_mode(&plan, &commodities, &WeightFn::Linear, mode)?;
            let sol = solve_lp(&problem);
            print!("{name} {mode:?}: {} vars, {} rows, {}", problem.num_vars(), problem.rows.len(), sol.status);
            if sol.status == LpStatus::Optimal {
                let m = lp_metrics(&problem, &sol)?;
                let violations = verify_solution(&problem, &sol, 1e-6)?;
                print!(", objective {}, ratio {:?}, {} violations", sol.objective, m.delivery_ratio, violations.len());
            }
            println!();
        }
    }

    let problem = build_lp_with_mode(
        &plan,
        &demands_to_commodities(&parse_demands(include_str!("../scenarios/fig1.json"))?),
        &WeightFn::Linear,
        LpMode::Hard,
    )?;
    println!("\n{}", problem.to_lp_format());
    Ok(())
}
