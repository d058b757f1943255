mod common;

use cgrlab::routing::k_best_routes;
use cgrlab::NodeId;

fn ids(r: &cgrlab::Route) -> Vec<u32> {
    r.contacts.iter().map(|c| c.0).collect()
}

#[test]
fn searches_match_exhaustive_enumeration() {
    let queries = common::check_route_searches(0..100, 8).unwrap();
    assert!(queries > 100, "{queries}");
}

#[test]
fn denser_plans_match_too() {
    for seed in 1000..1040 {
        let plan = common::small_plan(seed, 14);
        for (src, dst) in [(1, 2), (2, 3), (3, 1)] {
            let all = common::enumerate_routes(&plan, NodeId(src), NodeId(dst), 0.0);
            let got: Vec<_> = k_best_routes(&plan, NodeId(src), NodeId(dst), 0.0, 6)
                .unwrap()
                .iter()
                .map(|r| (ids(r), r.delivery_time))
                .collect();
            assert_eq!(got, all.into_iter().take(6).collect::<Vec<_>>(), "seed {seed}");
        }
    }
}
