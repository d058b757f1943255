//! The three-node example: N1 and N2 each send 10 packets to N3.
//! DELTIME sends N1's packets via N2, whose only contact to N3 is already
//! booked, so half the traffic is lost; HOPS waits for the direct contact
//! and delivers everything, as does the LP.

use cgrlab::lp::{build_lp, demands_to_commodities, lp_metrics, solve_lp, WeightFn};
use cgrlab::plan::parse_contact_plan;
use cgrlab::sim::{compute_metrics, parse_demands, run_simulation};
use cgrlab::Policy;

fn main() -> cgrlab::Result<()> {
    let plan = parse_contact_plan(include_str!("../scenarios/fig1.cp"))?;
    let demands = parse_demands(include_str!("../scenarios/fig1.json"))?;

    for policy in Policy::ALL {
        let r = run_simulation(&plan, &demands, policy, 10)?;
        let m = compute_metrics(&r, &demands);
        println!("{policy}: delivered {}/{}, {} transmissions", m.delivered_on_time, m.generated, m.transmissions);
        for p in r.records.iter().filter(|p| p.packet_id % 10 == 0) {
            let path: Vec<u32> = p.path.iter().map(|c| c.0).collect();
            println!("  packet {} from {}: {:?} via {path:?}", p.packet_id, p.src, p.outcome);
        }
    }

    let problem = build_lp(&plan, &demands_to_commodities(&demands), &WeightFn::Linear)?;
    let sol = solve_lp(&problem);
    let m = lp_metrics(&problem, &sol)?;
    println!("lp: objective {}, delivered {}/{}", sol.objective, m.delivered_on_time, m.generated);
    for arc in &problem.arcs {
        for c in 0..problem.commodities.len() {
            let x = sol.flow(&problem, arc.contact, arc.state, c);
            if x > 0.0 {
                println!("  {} packets of {}'s traffic on contact {} in k{}", x, problem.commodities[c].src, arc.contact.0, arc.state + 1);
            }
        }
    }
    Ok(())
}
