mod common;

use std::collections::BTreeSet;

use cgrlab::forwarding::select_route;
use cgrlab::lp::{
    build_lp, build_lp_with_mode, demands_to_commodities, lp_metrics, solve_lp, verify_solution,
    LpMode, LpStatus, WeightFn,
};
use cgrlab::plan::{
    generate_random_topology, Buffer, parse_contact_plan, serialize_contact_plan, TopologyConfig,
};
use cgrlab::routing::{earliest_delivery_route, k_best_routes, Suppressions};
use cgrlab::sim::{compute_metrics, run_simulation, Demand, Outcome};
use cgrlab::{ContactId, ContactPlan, NodeId, Policy, StateGrid};
use proptest::prelude::*;

fn topology(seed: u64, density: f64) -> TopologyConfig {
    TopologyConfig {
        node_count: 6,
        density,
        capacity: 3,
        grid: StateGrid::new(5, 10.0).unwrap(),
        seed,
    }
}

fn without(plan: &ContactPlan, contacts: &BTreeSet<ContactId>, nodes: &BTreeSet<NodeId>) -> ContactPlan {
    let mut p = plan.clone();
    p.contacts
        .retain(|c| !contacts.contains(&c.id) && !nodes.contains(&c.from) && !nodes.contains(&c.to));
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn plan_text_round_trips(seed in any::<u64>(), density in 0.0..1.0f64) {
        for plan in [common::small_plan(seed, 10), generate_random_topology(&topology(seed, density)).unwrap()] {
            let text = serialize_contact_plan(&plan);
            let back = parse_contact_plan(&text).unwrap();
            prop_assert_eq!(&back, &plan);
            prop_assert_eq!(serialize_contact_plan(&back), text);
        }
    }

    #[test]
    fn suppressed_search_equals_search_on_reduced_plan(
        seed in any::<u64>(),
        drop_contacts in proptest::collection::btree_set(1u32..=10, 0..4),
        drop_node in proptest::option::of(1u32..=5),
    ) {
        let plan = common::small_plan(seed, 10);
        let sup = Suppressions {
            contacts: drop_contacts.into_iter().map(ContactId).collect(),
            nodes: drop_node.map(NodeId).into_iter().filter(|&n| n != NodeId(1) && n != NodeId(2)).collect(),
        };
        let got = earliest_delivery_route(&plan, NodeId(1), NodeId(2), 0.0, &sup).unwrap();
        if let Some(r) = &got {
            prop_assert!(r.contacts.iter().all(|c| !sup.contacts.contains(c)));
        }
        let reduced = without(&plan, &sup.contacts, &sup.nodes);
        let want = common::enumerate_routes(&reduced, NodeId(1), NodeId(2), 0.0);
        prop_assert_eq!(
            got.map(|r| r.contacts.iter().map(|c| c.0).collect::<Vec<_>>()),
            want.first().map(|w| w.0.clone())
        );
    }

    #[test]
    fn k_best_is_prefix_closed(seed in any::<u64>(), k in 1usize..6, t_now in 0.0..30.0f64) {
        let plan = generate_random_topology(&topology(seed, 0.4)).unwrap();
        let a = k_best_routes(&plan, NodeId(1), NodeId(6), t_now, k).unwrap();
        let b = k_best_routes(&plan, NodeId(1), NodeId(6), t_now, k + 1).unwrap();
        prop_assert!(a.len() <= k && b.len() <= k + 1);
        prop_assert_eq!(&b[..a.len()], &a[..]);
        prop_assert!(a.windows(2).all(|w| w[0].cmp_by_delivery(&w[1]).is_lt()));
        for r in &a {
            let nodes: BTreeSet<NodeId> = r
                .contacts
                .iter()
                .map(|&c| plan.contact(c).unwrap().to)
                .chain([NodeId(1)])
                .collect();
            prop_assert_eq!(nodes.len(), r.hops + 1, "route revisits a node");
        }
    }

    #[test]
    fn hops_policy_never_picks_more_hops(seed in any::<u64>(), k in 1usize..8) {
        let plan = generate_random_topology(&topology(seed, 0.5)).unwrap();
        let routes = k_best_routes(&plan, NodeId(2), NodeId(5), 0.0, k).unwrap();
        let d = select_route(&routes, Policy::DelTime);
        let h = select_route(&routes, Policy::Hops);
        prop_assert_eq!(d.is_some(), h.is_some());
        if let (Some(d), Some(h)) = (d, h) {
            prop_assert!(h.hops <= d.hops);
            prop_assert!(d.delivery_time <= h.delivery_time);
        }
    }

    #[test]
    fn simulation_conserves_packets(seed in any::<u64>(), k in 1usize..5) {
        let (plan, demands) = common::sim_case(seed);
        for policy in Policy::ALL {
            let r = run_simulation(&plan, &demands, policy, k).unwrap();
            let generated: u64 = demands.iter().map(|d| d.count).sum();
            let counted = [Outcome::DeliveredOnTime, Outcome::DeliveredLate, Outcome::Dropped, Outcome::Stranded]
                .iter()
                .map(|&o| r.count(o))
                .sum::<usize>();
            prop_assert_eq!(counted as u64, generated);
            prop_assert_eq!(r.records.len() as u64, generated);
            let used: u64 = r.utilization.iter().map(|u| u.transmitted as u64).sum();
            prop_assert_eq!(used, r.total_transmissions());
            for u in &r.utilization {
                prop_assert!(u.transmitted <= u.capacity);
            }
            for p in &r.records {
                prop_assert_eq!(p.transmissions as usize, p.path.len());
                if p.outcome == Outcome::DeliveredOnTime {
                    let delay = p.delivery_time.unwrap() - p.t_gen;
                    prop_assert!(delay <= p.ttl.unwrap_or(f64::INFINITY) + 1e-9);
                    prop_assert!(p.delivery_time.unwrap() <= plan.grid.horizon());
                }
            }
            let m = compute_metrics(&r, &demands);
            if let Some(ratio) = m.delivery_ratio {
                prop_assert!((0.0..=1.0).contains(&ratio));
            }
        }
    }

    #[test]
    fn lone_packet_without_deadline_arrives_iff_a_route_exists(seed in any::<u64>(), q in 0usize..3) {
        let plan = common::small_plan(seed, 10);
        let t_gen = q as f64 * plan.grid.state_duration;
        let demands = [Demand { src: NodeId(1), dst: NodeId(3), t_gen, ttl: None, count: 1 }];
        let reachable = !common::enumerate_routes(&plan, NodeId(1), NodeId(3), t_gen).is_empty();
        for policy in Policy::ALL {
            let r = run_simulation(&plan, &demands, policy, 1).unwrap();
            let expect = if reachable { Outcome::DeliveredOnTime } else { Outcome::Dropped };
            prop_assert_eq!(r.records[0].outcome, expect);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lp_optima_certify_and_bound_the_simulator(seed in any::<u64>()) {
        let (mut plan, demands) = common::sim_case(seed);
        // the model keeps delivered traffic in the destination's buffer while
        // the simulator consumes it, so only relays may be bounded here
        for n in &mut plan.nodes {
            if demands.iter().any(|d| d.dst == n.id) {
                n.buffer = Buffer::Unbounded;
            }
        }
        let commodities = demands_to_commodities(&demands);
        let hard = build_lp(&plan, &commodities, &WeightFn::Linear).unwrap();
        let hs = solve_lp(&hard);
        prop_assert_ne!(hs.status, LpStatus::NumericalFailure);
        let soft = build_lp_with_mode(&plan, &commodities, &WeightFn::Linear, LpMode::Soft).unwrap();
        let ss = solve_lp(&soft);
        prop_assert_eq!(ss.status, LpStatus::Optimal);
        prop_assert!(verify_solution(&soft, &ss, 1e-6).unwrap().is_empty());
        let bound = lp_metrics(&soft, &ss).unwrap().delivered_on_time;
        if hs.status == LpStatus::Optimal {
            prop_assert!(verify_solution(&hard, &hs, 1e-6).unwrap().is_empty());
            let generated: u64 = demands.iter().map(|d| d.count).sum();
            prop_assert!((bound - generated as f64).abs() < 1e-6);
        }
        for policy in Policy::ALL {
            let r = run_simulation(&plan, &demands, policy, 3).unwrap();
            let delivered = r.count(Outcome::DeliveredOnTime) as f64;
            prop_assert!(delivered <= bound + 1e-6, "{policy}: {delivered} > {bound}");
        }
    }

    #[test]
    fn scaled_weights_keep_the_optimum(seed in any::<u64>(), factor in 0.25..8.0f64) {
        let (plan, demands) = common::sim_case(seed);
        let commodities = demands_to_commodities(&demands);
        let w = WeightFn::Linear;
        let ws = w.scaled(plan.grid.state_count, factor).unwrap();
        let a = build_lp_with_mode(&plan, &commodities, &w, LpMode::Soft).unwrap();
        let b = build_lp_with_mode(&plan, &commodities, &ws, LpMode::Soft).unwrap();
        let (sa, sb) = (solve_lp(&a), solve_lp(&b));
        prop_assert_eq!(sa.status, LpStatus::Optimal);
        prop_assert_eq!(sb.status, LpStatus::Optimal);
        // the optimum for w is also optimal for the scaled weights
        let flows = a.num_flow_vars();
        let cost = |p: &cgrlab::lp::LpProblem, v: &[f64]| -> f64 {
            p.objective[..flows].iter().zip(v).map(|(c, x)| c * x).sum()
        };
        let dropped = |p: &cgrlab::lp::LpProblem, v: &[f64]| -> f64 {
            (0..p.commodities.len()).map(|c| v[p.s_var(c).unwrap()]).sum()
        };
        prop_assert!((dropped(&a, &sa.values) - dropped(&b, &sb.values)).abs() < 1e-6);
        let tol = 1e-6 * (1.0 + cost(&b, &sb.values).abs());
        prop_assert!((cost(&b, &sa.values) - cost(&b, &sb.values)).abs() < tol);
    }
}

#[test]
fn density_gives_expected_contact_count() {
    // 10 states x 55 pairs x 0.2 x 2 directions
    let counts: Vec<f64> = (0..100)
        .map(|seed| {
            let cfg = TopologyConfig {
                node_count: 11,
                density: 0.2,
                capacity: 10,
                grid: StateGrid::new(10, 10.0).unwrap(),
                seed,
            };
            generate_random_topology(&cfg).unwrap().contacts.len() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    assert!((mean - 220.0).abs() <= 0.05 * 220.0, "mean contact count {mean}");
    assert!(counts.iter().all(|&c| c % 2.0 == 0.0));
}
