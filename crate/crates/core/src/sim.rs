//! State-stepped store-carry-and-forward simulation.
//!
//! Every state `q` runs the same four steps:
//!
//! 1. packets that arrived at `t_q` and demands generated at `t_q` enter
//!    their node's storage (arrivals first, then injections);
//! 2. nodes in ascending id order forward or drop every stored packet in
//!    FIFO order, each against its own route table and capacity ledger;
//! 3. every contact active in `q` sends up to `capacity` packets from its
//!    queue, FIFO; they reach the receiver at `t_{q+1}`;
//! 4. outcomes are recorded.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forwarding::{forward_or_drop, CapacityLedger, Decision, Packet, Policy, TIME_EPS};
use crate::plan::{ContactId, ContactPlan, NodeId};
use crate::routing::{ContactGraph, RouteTable};

/// `count` packets from `src` to `dst` generated at the start of a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub src: NodeId,
    pub dst: NodeId,
    pub t_gen: f64,
    #[serde(default)]
    pub ttl: Option<f64>,
    pub count: u64,
}

impl Demand {
    pub fn check(&self, plan: &ContactPlan) -> Result<usize> {
        for n in [self.src, self.dst] {
            if !plan.has_node(n) {
                return Err(Error::InvalidDemand(format!("unknown node {n}")));
            }
        }
        if self.src == self.dst {
            return Err(Error::InvalidDemand(format!(
                "source and destination are both node {}",
                self.src
            )));
        }
        if let Some(ttl) = self.ttl {
            if !(ttl >= 0.0) {
                return Err(Error::InvalidDemand(format!("negative ttl {ttl}")));
            }
        }
        match plan.grid.index_of(self.t_gen) {
            Some(q) if q < plan.grid.state_count => Ok(q),
            _ => Err(Error::InvalidDemand(format!(
                "generation time {} is not a state start before the horizon {}",
                self.t_gen,
                plan.grid.horizon()
            ))),
        }
    }
}

/// Parses a JSON array of demands.
pub fn parse_demands(text: &str) -> Result<Vec<Demand>> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    DeliveredOnTime,
    DeliveredLate,
    Dropped,
    Stranded,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::DeliveredOnTime => "delivered_on_time",
            Outcome::DeliveredLate => "delivered_late",
            Outcome::Dropped => "dropped",
            Outcome::Stranded => "stranded",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub packet_id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub t_gen: f64,
    pub ttl: Option<f64>,
    pub outcome: Outcome,
    pub delivery_time: Option<f64>,
    pub transmissions: u32,
    pub path: Vec<ContactId>,
}

/// Transmissions over one contact in one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactUsage {
    pub contact: ContactId,
    pub state: usize,
    pub transmitted: u32,
    pub capacity: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub policy: Policy,
    pub k_routes: usize,
    pub records: Vec<PacketRecord>,
    pub utilization: Vec<ContactUsage>,
}

impl SimResult {
    pub fn count(&self, outcome: Outcome) -> usize {
        self.records.iter().filter(|r| r.outcome == outcome).count()
    }

    pub fn total_transmissions(&self) -> u64 {
        self.records.iter().map(|r| r.transmissions as u64).sum()
    }

    /// One row per packet.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "packet_id",
            "src",
            "dst",
            "t_gen",
            "ttl",
            "outcome",
            "delivery_time",
            "transmissions",
            "path",
        ])?;
        for r in &self.records {
            let path: Vec<String> = r.path.iter().map(|c| c.to_string()).collect();
            w.write_record([
                r.packet_id.to_string(),
                r.src.to_string(),
                r.dst.to_string(),
                r.t_gen.to_string(),
                r.ttl.map_or("inf".to_string(), |t| t.to_string()),
                r.outcome.to_string(),
                r.delivery_time.map_or(String::new(), |t| t.to_string()),
                r.transmissions.to_string(),
                path.join(";"),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// The four evaluation metrics; `None` marks an undefined ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub generated: f64,
    pub delivered_on_time: f64,
    pub transmissions: f64,
    pub delivery_ratio: Option<f64>,
    pub mean_hops: Option<f64>,
    pub mean_delay: Option<f64>,
    pub energy_efficiency: Option<f64>,
}

impl Metrics {
    /// `delay_sum` is the total latency of on-time deliveries.
    pub fn from_totals(generated: f64, delivered: f64, transmissions: f64, delay_sum: f64) -> Self {
        let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
        Metrics {
            generated,
            delivered_on_time: delivered,
            transmissions,
            delivery_ratio: ratio(delivered, generated),
            mean_hops: ratio(transmissions, delivered),
            mean_delay: ratio(delay_sum, delivered),
            energy_efficiency: ratio(delivered, transmissions),
        }
    }
}

pub fn compute_metrics(result: &SimResult, demands: &[Demand]) -> Metrics {
    let generated: u64 = demands.iter().map(|d| d.count).sum();
    debug_assert_eq!(generated as usize, result.records.len());
    let on_time = result
        .records
        .iter()
        .filter(|r| r.outcome == Outcome::DeliveredOnTime);
    let delay_sum: f64 = on_time
        .clone()
        .map(|r| r.delivery_time.unwrap_or(r.t_gen) - r.t_gen)
        .sum();
    Metrics::from_totals(
        generated as f64,
        on_time.count() as f64,
        result.total_transmissions() as f64,
        delay_sum,
    )
}

/// Route tables per `(owner, state)`, filled lazily per destination.
///
/// Tables depend only on the plan and K, so one cache can serve several
/// simulations of the same plan.
pub struct RouteCache<'a> {
    graph: ContactGraph<'a>,
    k: usize,
    tables: HashMap<(NodeId, usize), RouteTable>,
}

impl<'a> RouteCache<'a> {
    pub fn new(plan: &'a ContactPlan, k: usize) -> Self {
        RouteCache {
            graph: ContactGraph::new(plan),
            k,
            tables: HashMap::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Table of `owner` for data ready at the start of `state`, covering at
    /// least `dests`.
    pub fn table(
        &mut self,
        owner: NodeId,
        state: usize,
        dests: &BTreeSet<NodeId>,
    ) -> Result<&RouteTable> {
        let t_now = self.graph.plan().grid.timestamp(state);
        let k = self.k;
        let table = self.tables.entry((owner, state)).or_insert_with(|| RouteTable {
            owner,
            k_routes: k,
            t_now,
            routes: BTreeMap::new(),
        });
        for &d in dests {
            if d != owner && !table.routes.contains_key(&d) {
                let routes = self.graph.k_best_routes(owner, d, t_now, k)?;
                table.routes.insert(d, routes);
            }
        }
        Ok(table)
    }
}

struct NodeState {
    stored: VecDeque<usize>,
    queues: BTreeMap<ContactId, VecDeque<usize>>,
    ledger: CapacityLedger,
    occupancy: u64,
    limit: Option<u64>,
}

struct InFlight {
    packet: Packet,
    outcome: Option<Outcome>,
    delivery_time: Option<f64>,
    path: Vec<ContactId>,
}

pub fn run_simulation(
    plan: &ContactPlan,
    demands: &[Demand],
    policy: Policy,
    k: usize,
) -> Result<SimResult> {
    let mut cache = RouteCache::new(plan, k);
    run_simulation_cached(plan, demands, policy, &mut cache)
}

/// Same as [`run_simulation`], reusing route tables from `cache`.
pub fn run_simulation_cached(
    plan: &ContactPlan,
    demands: &[Demand],
    policy: Policy,
    cache: &mut RouteCache<'_>,
) -> Result<SimResult> {
    if cache.k == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    let grid = plan.grid;
    let mut packets: Vec<InFlight> = Vec::new();
    let mut injections: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for d in demands {
        let q = d.check(plan)?;
        for _ in 0..d.count {
            let id = packets.len();
            packets.push(InFlight {
                packet: Packet {
                    packet_id: id as u64,
                    src: d.src,
                    dst: d.dst,
                    t_gen: d.t_gen,
                    ttl: d.ttl,
                },
                outcome: None,
                delivery_time: None,
                path: Vec::new(),
            });
            injections.entry(q).or_default().push(id);
        }
    }

    let node_pos: HashMap<NodeId, usize> = plan
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id, i))
        .collect();
    let mut nodes: Vec<NodeState> = plan
        .nodes
        .iter()
        .map(|n| NodeState {
            stored: VecDeque::new(),
            queues: BTreeMap::new(),
            ledger: CapacityLedger::new(plan),
            occupancy: 0,
            limit: n.buffer.limit(),
        })
        .collect();
    let contact_pos = plan.contact_index();
    let spans: Vec<(usize, usize)> = plan.contacts.iter().map(|c| plan.span(c)).collect();
    let mut utilization = Vec::new();
    let mut arrivals: Vec<(usize, usize)> = Vec::new();

    let admit = |node: &mut NodeState, p: usize, packets: &mut Vec<InFlight>| {
        if node.limit.is_some_and(|l| node.occupancy >= l) {
            packets[p].outcome = Some(Outcome::Dropped);
        } else {
            node.occupancy += 1;
            node.stored.push_back(p);
        }
    };

    for q in 0..grid.state_count {
        let t_now = grid.timestamp(q);

        // queues of contacts that are over go back to storage
        for node in nodes.iter_mut() {
            let mut expired = Vec::new();
            for (cid, queue) in node.queues.iter_mut() {
                if spans[contact_pos[cid]].1 <= q {
                    expired.extend(queue.drain(..));
                }
            }
            node.queues.retain(|_, queue| !queue.is_empty());
            node.stored.extend(expired);
        }
        for (n, p) in arrivals.drain(..) {
            admit(&mut nodes[n], p, &mut packets);
        }
        for &p in injections.get(&q).into_iter().flatten() {
            let n = node_pos[&packets[p].packet.src];
            admit(&mut nodes[n], p, &mut packets);
        }

        for (n, spec) in plan.nodes.iter().enumerate() {
            let node = &mut nodes[n];
            if node.stored.is_empty() {
                continue;
            }
            let dests: BTreeSet<NodeId> =
                node.stored.iter().map(|&p| packets[p].packet.dst).collect();
            let table = cache.table(spec.id, q, &dests)?;
            while let Some(p) = node.stored.pop_front() {
                match forward_or_drop(&packets[p].packet, table, t_now, &mut node.ledger, policy) {
                    Decision::Enqueue { contact, .. } => {
                        node.queues.entry(contact).or_default().push_back(p);
                    }
                    Decision::Drop => {
                        packets[p].outcome = Some(Outcome::Dropped);
                        node.occupancy -= 1;
                    }
                }
            }
        }

        let t_end = grid.timestamp(q + 1);
        for (pos, c) in plan.contacts.iter().enumerate() {
            let (s0, s1) = spans[pos];
            if q < s0 || q >= s1 {
                continue;
            }
            let from = node_pos[&c.from];
            let to = node_pos[&c.to];
            let mut sent = 0u32;
            while sent < c.capacity {
                let Some(p) = nodes[from].queues.get_mut(&c.id).and_then(VecDeque::pop_front) else {
                    break;
                };
                sent += 1;
                nodes[from].occupancy -= 1;
                let pkt = &mut packets[p];
                pkt.path.push(c.id);
                if c.to == pkt.packet.dst {
                    let on_time = t_end <= pkt.packet.deadline() + TIME_EPS;
                    pkt.outcome = Some(if on_time {
                        Outcome::DeliveredOnTime
                    } else {
                        Outcome::DeliveredLate
                    });
                    pkt.delivery_time = Some(t_end);
                } else {
                    arrivals.push((to, p));
                }
            }
            utilization.push(ContactUsage {
                contact: c.id,
                state: q,
                transmitted: sent,
                capacity: c.capacity,
            });
        }
    }

    let records = packets
        .into_iter()
        .map(|p| PacketRecord {
            packet_id: p.packet.packet_id,
            src: p.packet.src,
            dst: p.packet.dst,
            t_gen: p.packet.t_gen,
            ttl: p.packet.ttl,
            outcome: p.outcome.unwrap_or(Outcome::Stranded),
            delivery_time: p.delivery_time,
            transmissions: p.path.len() as u32,
            path: p.path,
        })
        .collect();
    Ok(SimResult {
        policy,
        k_routes: cache.k,
        records,
        utilization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::parse_contact_plan;

    fn fig1() -> ContactPlan {
        parse_contact_plan(
            "plan 3 10\nnode 1 inf\nnode 2 inf\nnode 3 inf\n\
             contact 1 1 2 0 10 10\ncontact 2 2 3 10 20 10\ncontact 3 1 3 20 30 10\n",
        )
        .unwrap()
    }

    fn fig1_demands(ttl1: Option<f64>, ttl2: Option<f64>) -> Vec<Demand> {
        vec![
            Demand {
                src: NodeId(1),
                dst: NodeId(3),
                t_gen: 0.0,
                ttl: ttl1,
                count: 10,
            },
            Demand {
                src: NodeId(2),
                dst: NodeId(3),
                t_gen: 0.0,
                ttl: ttl2,
                count: 10,
            },
        ]
    }

    #[test]
    fn fig1_deltime_congests() {
        let demands = fig1_demands(Some(30.0), Some(20.0));
        let res = run_simulation(&fig1(), &demands, Policy::DelTime, 2).unwrap();
        assert_eq!(res.count(Outcome::DeliveredOnTime), 10);
        assert_eq!(res.count(Outcome::Dropped), 10);
        for r in &res.records {
            if r.src == NodeId(2) {
                assert_eq!(r.outcome, Outcome::DeliveredOnTime);
                assert_eq!(r.delivery_time, Some(20.0));
            } else {
                assert_eq!(r.outcome, Outcome::Dropped);
                assert_eq!(r.path, vec![ContactId(1)]);
            }
        }
        let m = compute_metrics(&res, &demands);
        assert_eq!(m.delivery_ratio, Some(0.5));
        assert_eq!(m.transmissions, 20.0);
        assert_eq!(m.mean_hops, Some(2.0));
        assert_eq!(m.energy_efficiency, Some(0.5));
        assert_eq!(m.mean_delay, Some(20.0));
    }

    #[test]
    fn fig1_hops_delivers_everything() {
        let demands = fig1_demands(Some(30.0), Some(20.0));
        let res = run_simulation(&fig1(), &demands, Policy::Hops, 2).unwrap();
        assert_eq!(res.count(Outcome::DeliveredOnTime), 20);
        for r in &res.records {
            let expected = if r.src == NodeId(1) { 30.0 } else { 20.0 };
            assert_eq!(r.delivery_time, Some(expected));
            assert_eq!(r.transmissions, 1);
        }
        let m = compute_metrics(&res, &demands);
        assert_eq!(m.delivery_ratio, Some(1.0));
        assert_eq!(m.transmissions, 20.0);
        assert_eq!(m.mean_hops, Some(1.0));
        assert_eq!(m.energy_efficiency, Some(1.0));
        assert_eq!(m.mean_delay, Some(25.0));
    }

    #[test]
    fn zero_demands() {
        let res = run_simulation(&fig1(), &[], Policy::Hops, 2).unwrap();
        assert!(res.records.is_empty());
        let m = compute_metrics(&res, &[]);
        assert_eq!(m.delivery_ratio, None);
        assert_eq!(m.mean_hops, None);
        assert_eq!(m.mean_delay, None);
        assert_eq!(m.energy_efficiency, None);
    }

    #[test]
    fn invalid_demands_are_rejected() {
        let plan = fig1();
        let mut d = fig1_demands(None, None);
        d[0].t_gen = 5.0;
        assert!(matches!(
            run_simulation(&plan, &d, Policy::Hops, 2),
            Err(Error::InvalidDemand(_))
        ));
        d[0].t_gen = 30.0;
        assert!(run_simulation(&plan, &d, Policy::Hops, 2).is_err());
        d[0].t_gen = 0.0;
        d[0].dst = NodeId(1);
        assert!(run_simulation(&plan, &d, Policy::Hops, 2).is_err());
        d[0].dst = NodeId(7);
        assert!(run_simulation(&plan, &d, Policy::Hops, 2).is_err());
    }

    #[test]
    fn unreachable_destination_drops() {
        let plan = fig1();
        let d = vec![Demand {
            src: NodeId(3),
            dst: NodeId(1),
            t_gen: 0.0,
            ttl: None,
            count: 3,
        }];
        let res = run_simulation(&plan, &d, Policy::DelTime, 2).unwrap();
        assert_eq!(res.count(Outcome::Dropped), 3);
    }

    #[test]
    fn backlog_left_at_horizon_is_stranded() {
        // volume 30 over three states, but the packets only show up in the second
        let plan = parse_contact_plan("plan 3 10\nnode 1 inf\nnode 2 inf\ncontact 1 1 2 0 30 10\n")
            .unwrap();
        let d = vec![Demand {
            src: NodeId(1),
            dst: NodeId(2),
            t_gen: 10.0,
            ttl: None,
            count: 25,
        }];
        let res = run_simulation(&plan, &d, Policy::DelTime, 1).unwrap();
        assert_eq!(res.count(Outcome::DeliveredOnTime), 20);
        assert_eq!(res.count(Outcome::Stranded), 5);
        let m = compute_metrics(&res, &d);
        assert_eq!(m.delivery_ratio, Some(0.8));
    }

    #[test]
    fn bounded_buffer_drops_on_overflow() {
        let plan = parse_contact_plan(
            "plan 2 10\nnode 1 2\nnode 2 inf\ncontact 1 1 2 10 20 10\n",
        )
        .unwrap();
        let d = vec![Demand {
            src: NodeId(1),
            dst: NodeId(2),
            t_gen: 0.0,
            ttl: None,
            count: 5,
        }];
        let res = run_simulation(&plan, &d, Policy::Hops, 1).unwrap();
        assert_eq!(res.count(Outcome::Dropped), 3);
        assert_eq!(res.count(Outcome::DeliveredOnTime), 2);
    }

    #[test]
    fn multi_state_backlog_spills_and_can_arrive_late() {
        // 15 packets booked on a contact that carries 10 per state
        let plan = parse_contact_plan("plan 3 10\nnode 1 inf\nnode 2 inf\ncontact 1 1 2 10 30 10\n")
            .unwrap();
        let d = vec![Demand {
            src: NodeId(1),
            dst: NodeId(2),
            t_gen: 0.0,
            ttl: Some(20.0),
            count: 15,
        }];
        let res = run_simulation(&plan, &d, Policy::DelTime, 1).unwrap();
        assert_eq!(res.count(Outcome::DeliveredOnTime), 10);
        assert_eq!(res.count(Outcome::DeliveredLate), 5);
        assert!(res.utilization.iter().all(|u| u.transmitted <= u.capacity));
    }

    #[test]
    fn csv_export() {
        let demands = fig1_demands(Some(30.0), None);
        let res = run_simulation(&fig1(), &demands, Policy::Hops, 2).unwrap();
        let csv = res.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "packet_id,src,dst,t_gen,ttl,outcome,delivery_time,transmissions,path"
        );
        assert_eq!(lines.next().unwrap(), "0,1,3,0,30,delivered_on_time,30,1,3");
        assert_eq!(csv.lines().count(), 21);
        assert!(csv.lines().last().unwrap().contains(",inf,"));
    }

    #[test]
    fn demands_json() {
        let d = parse_demands(r#"[{"src":1,"dst":3,"t_gen":0,"ttl":30,"count":10},
                                   {"src":2,"dst":3,"t_gen":0,"count":10}]"#)
        .unwrap();
        assert_eq!(d, fig1_demands(Some(30.0), None));
    }
}
