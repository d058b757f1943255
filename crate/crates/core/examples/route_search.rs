//! Earliest-delivery search, K best routes and a full route table on a
//! small hand-written plan.

use std::collections::BTreeSet;

use cgrlab::plan::parse_contact_plan;
use cgrlab::routing::{build_route_table, earliest_delivery_route, k_best_routes, Suppressions};
use cgrlab::{ContactId, NodeId, Route};

const PLAN: &str = "\
plan 4 10
node 1 inf
node 2 inf
node 3 inf
node 4 inf
contact 1 1 2 0 10 5
contact 2 2 4 10 20 5
contact 3 1 3 0 20 5
contact 4 3 4 20 30 5
contact 5 1 4 30 40 5
";

fn show(r: &Route) -> String {
    let ids: Vec<String> = r.contacts.iter().map(|c| c.0.to_string()).collect();
    format!("[{}] delivers {} s, {} hops, expires {} s", ids.join(" "), r.delivery_time, r.hops, r.expiration)
}

fn main() -> cgrlab::Result<()> {
    let plan = parse_contact_plan(PLAN)?;
    let (src, dst) = (NodeId(1), NodeId(4));

    let best = earliest_delivery_route(&plan, src, dst, 0.0, &Suppressions::default())?.expect("reachable");
    println!("best: {}", show(&best));

    let sup = Suppressions {
        contacts: BTreeSet::from([ContactId(2)]),
        ..Default::default()
    };
    if let Some(r) = earliest_delivery_route(&plan, src, dst, 0.0, &sup)? {
        println!("without contact 2: {}", show(&r));
    }

    for (i, r) in k_best_routes(&plan, src, dst, 0.0, 5)?.iter().enumerate() {
        println!("#{}: {}", i + 1, show(r));
    }

    let table = build_route_table(&plan, src, 15.0, 3, &BTreeSet::from([NodeId(2), NodeId(3), NodeId(4)]))?;
    for (dest, routes) in &table.routes {
        println!("from t=15 to {dest}: {} route(s)", routes.len());
    }
    Ok(())
}
