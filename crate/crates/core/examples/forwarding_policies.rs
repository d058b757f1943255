//! One forwarding decision by hand, then DELTIME and HOPS on the same
//! traffic through the simulator.

use std::collections::BTreeSet;

use cgrlab::forwarding::{forward_or_drop, CapacityLedger, Decision};
use cgrlab::plan::{generate_random_topology, parse_contact_plan, TopologyConfig};
use cgrlab::routing::build_route_table;
use cgrlab::sim::{compute_metrics, run_simulation, Outcome};
use cgrlab::{Demand, NodeId, Packet, Policy, StateGrid};

fn main() -> cgrlab::Result<()> {
    let plan = parse_contact_plan(include_str!("../scenarios/fig1.cp"))?;
    let table = build_route_table(&plan, NodeId(1), 0.0, 10, &BTreeSet::from([NodeId(3)]))?;
    let pkt = Packet { packet_id: 1, src: NodeId(1), dst: NodeId(3), t_gen: 0.0, ttl: Some(30.0) };
    for policy in Policy::ALL {
        let mut ledger = CapacityLedger::new(&plan);
        match forward_or_drop(&pkt, &table, 0.0, &mut ledger, policy) {
            Decision::Enqueue { contact, route } => {
                println!("{policy}: first contact {}, delivery at {} s over {} hop(s)", contact.0, route.delivery_time, route.hops)
            }
            Decision::Drop => println!("{policy}: drop"),
        }
    }

    let plan = generate_random_topology(&TopologyConfig {
        node_count: 8,
        density: 0.25,
        capacity: 4,
        grid: StateGrid::new(8, 10.0)?,
        seed: 3,
    })?;
    let demands: Vec<Demand> = (1..8)
        .map(|s| Demand { src: NodeId(s), dst: NodeId(8), t_gen: 0.0, ttl: (s > 4).then_some(40.0), count: 6 })
        .collect();
    for policy in Policy::ALL {
        let r = run_simulation(&plan, &demands, policy, 10)?;
        let m = compute_metrics(&r, &demands);
        println!(
            "{policy}: {} on time, {} dropped, {} stranded, ratio {:?}, efficiency {:?}",
            r.count(Outcome::DeliveredOnTime),
            r.count(Outcome::Dropped),
            r.count(Outcome::Stranded),
            m.delivery_ratio,
            m.energy_efficiency
        );
    }
    Ok(())
}
