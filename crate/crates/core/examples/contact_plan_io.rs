//! Generate a random plan, write it as text, read it back and validate a
//! deliberately broken one.

use cgrlab::plan::{
    generate_random_topology, parse_contact_plan, parse_unchecked, serialize_contact_plan, validate, TopologyConfig,
};
use cgrlab::StateGrid;

fn main() -> cgrlab::Result<()> {
    let cfg = TopologyConfig {
        node_count: 5,
        density: 0.3,
        capacity: 10,
        grid: StateGrid::new(4, 10.0)?,
        seed: 7,
    };
    let plan = generate_random_topology(&cfg)?;
    let text = serialize_contact_plan(&plan);
    println!("{text}");

    let back = parse_contact_plan(&text)?;
    assert_eq!(back, plan);
    println!("{} contacts over {} s, round trip ok", plan.contacts.len(), plan.grid.horizon());

    // misaligned end, self loop and unknown node
    let broken = parse_unchecked("plan 2 10\nnode 1 inf\nnode 2 5\ncontact 1 1 2 0 15 3\ncontact 2 2 2 0 10 1\ncontact 3 1 9 10 20 1\n")?;
    for d in validate(&broken) {
        println!("{d}");
    }
    Ok(())
}
