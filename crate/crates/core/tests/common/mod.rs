#![allow(dead_code)]

use cgrlab::plan::{Buffer, Contact, NodeSpec};
use cgrlab::sim::Demand;
use cgrlab::{ContactId, ContactPlan, NodeId, StateGrid};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    rng.next_u64() % n
}

/// Plan with 3..=5 nodes, 3..=6 states of 10 s and 1..=`max_contacts`
/// contacts of random length.
pub fn small_plan(seed: u64, max_contacts: u64) -> ContactPlan {
    let mut r = rng(seed);
    let n = 3 + below(&mut r, 3) as u32;
    let states = 3 + below(&mut r, 4) as usize;
    let count = 1 + below(&mut r, max_contacts);
    let nodes = (1..=n)
        .map(|id| NodeSpec {
            id: NodeId(id),
            buffer: Buffer::Unbounded,
        })
        .collect();
    let mut contacts = Vec::new();
    for id in 1..=count {
        let from = 1 + below(&mut r, n as u64) as u32;
        let mut to = 1 + below(&mut r, n as u64 - 1) as u32;
        if to >= from {
            to += 1;
        }
        let s0 = below(&mut r, states as u64);
        let len = 1 + below(&mut r, (states as u64 - s0).min(3));
        contacts.push(Contact {
            id: ContactId(id as u32),
            from: NodeId(from),
            to: NodeId(to),
            start: s0 as f64 * 10.0,
            end: (s0 + len) as f64 * 10.0,
            capacity: 1 + below(&mut r, 5) as u32,
        });
    }
    ContactPlan::new(StateGrid::new(states, 10.0).unwrap(), nodes, contacts).unwrap()
}

/// Every simple route from `src` to `dst` for data ready at `t_now`, as
/// `(contact ids, delivery time)`, sorted by delivery, hops, then ids.
pub fn enumerate_routes(plan: &ContactPlan, src: NodeId, dst: NodeId, t_now: f64) -> Vec<(Vec<u32>, f64)> {
    let dur = plan.grid.state_duration;
    let ready = (t_now / dur - 1e-9).ceil().max(0.0) as usize;
    let mut out = Vec::new();
    let mut path = Vec::new();
    let mut visited = vec![src];
    dfs(plan, dst, src, ready, &mut path, &mut visited, &mut out);
    out.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then(a.0.len().cmp(&b.0.len()))
            .then(a.0.cmp(&b.0))
    });
    out
}

fn dfs(
    plan: &ContactPlan,
    dst: NodeId,
    at: NodeId,
    ready: usize,
    path: &mut Vec<u32>,
    visited: &mut Vec<NodeId>,
    out: &mut Vec<(Vec<u32>, f64)>,
) {
    let dur = plan.grid.state_duration;
    for c in &plan.contacts {
        if c.from != at || visited.contains(&c.to) {
            continue;
        }
        let s0 = (c.start / dur).round() as usize;
        let s1 = (c.end / dur).round() as usize;
        let tx = ready.max(s0);
        if tx >= s1 {
            continue;
        }
        path.push(c.id.0);
        if c.to == dst {
            out.push((path.clone(), (tx + 1) as f64 * dur));
        } else {
            visited.push(c.to);
            dfs(plan, dst, c.to, tx + 1, path, visited, out);
            visited.pop();
        }
        path.pop();
    }
}

/// Random plan plus random demands for simulator stress tests. Some nodes
/// get small bounded buffers.
pub fn sim_case(seed: u64) -> (ContactPlan, Vec<Demand>) {
    let mut r = rng(seed ^ 0x5eed);
    let base = small_plan(seed, 12);
    let nodes = base
        .nodes
        .iter()
        .map(|n| NodeSpec {
            id: n.id,
            buffer: if below(&mut r, 4) == 0 {
                Buffer::Bounded(below(&mut r, 6))
            } else {
                Buffer::Unbounded
            },
        })
        .collect();
    let plan = ContactPlan::new(base.grid, nodes, base.contacts.clone()).unwrap();
    let n = plan.nodes.len() as u64;
    let mut demands = Vec::new();
    for _ in 0..below(&mut r, 6) {
        let src = 1 + below(&mut r, n) as u32;
        let mut dst = 1 + below(&mut r, n - 1) as u32;
        if dst >= src {
            dst += 1;
        }
        let q = below(&mut r, plan.grid.state_count as u64);
        let ttl = match below(&mut r, 3) {
            0 => None,
            _ => Some((below(&mut r, 5) * 5) as f64),
        };
        demands.push(Demand {
            src: NodeId(src),
            dst: NodeId(dst),
            t_gen: q as f64 * plan.grid.state_duration,
            ttl,
            count: below(&mut r, 12),
        });
    }
    (plan, demands)
}

fn ids(r: &cgrlab::Route) -> Vec<u32> {
    r.contacts.iter().map(|c| c.0).collect()
}

/// Compares both route searches with [`enumerate_routes`] on `small_plan`s
/// for every ordered pair, several `t_now` and K = 1..=4. Returns how many
/// queries had at least two candidate routes, or the first mismatch.
pub fn check_route_searches(seeds: std::ops::Range<u64>, max_contacts: u64) -> Result<usize, String> {
    use cgrlab::routing::{earliest_delivery_route, k_best_routes, Suppressions};
    let mut queries = 0;
    for seed in seeds {
        let plan = small_plan(seed, max_contacts);
        let n = plan.nodes.len() as u32;
        for src in 1..=n {
            for dst in (1..=n).filter(|&d| d != src) {
                for t_now in [0.0, 5.0, 10.0, 20.0] {
                    let (s, d) = (NodeId(src), NodeId(dst));
                    let all = enumerate_routes(&plan, s, d, t_now);
                    let best = earliest_delivery_route(&plan, s, d, t_now, &Suppressions::default())
                        .map_err(|e| e.to_string())?
                        .map(|r| (ids(&r), r.delivery_time));
                    if best != all.first().cloned() {
                        return Err(format!("seed {seed} {src}->{dst} at {t_now}: {best:?} vs {:?}", all.first()));
                    }
                    for k in 1..=4 {
                        let routes = k_best_routes(&plan, s, d, t_now, k).map_err(|e| e.to_string())?;
                        if routes.iter().any(|r| r.hops != r.contacts.len()) {
                            return Err(format!("seed {seed} {src}->{dst}: hop count mismatch"));
                        }
                        let got: Vec<_> = routes.iter().map(|r| (ids(r), r.delivery_time)).collect();
                        let want: Vec<_> = all.iter().take(k).cloned().collect();
                        if got != want {
                            return Err(format!("seed {seed} {src}->{dst} at {t_now}, K = {k}: {got:?} vs {want:?}"));
                        }
                    }
                    queries += usize::from(all.len() >= 2);
                }
            }
        }
    }
    Ok(queries)
}
