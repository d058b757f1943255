//! Route computation over the contact graph.
//!
//! Vertices of the contact graph are contacts; moving from one contact to
//! the next means the packet waits at the shared node. A packet that is ready
//! at timestamp `t_r` can use contact `c` in the first state of `c` that
//! starts at or after `max(t_r, c.start)`, and becomes ready at the receiving
//! node at the end of that state. Two contacts are therefore never chained
//! inside one state.
//!
//! Routes are ranked by `(delivery_time, hops, contact ids)` and never
//! revisit a node.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{ContactId, ContactPlan, NodeId};

/// An ordered contact sequence from `source` to `destination`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub contacts: Vec<ContactId>,
    pub source: NodeId,
    pub destination: NodeId,
    pub delivery_time: f64,
    pub hops: usize,
    /// Earliest end among the route's contacts.
    pub expiration: f64,
    /// Smallest contact volume along the route, in packets.
    pub max_volume: u64,
    /// Start of the state in which the first contact transmits.
    pub departure_time: f64,
    /// Scheduled transmission state (0-based) of each contact.
    pub schedule: Vec<usize>,
}

impl Route {
    /// Ordering used for route lists and by the delivery-time policy.
    pub fn cmp_by_delivery(&self, other: &Route) -> Ordering {
        self.delivery_time
            .total_cmp(&other.delivery_time)
            .then(self.hops.cmp(&other.hops))
            .then_with(|| self.contacts.cmp(&other.contacts))
    }

    /// Ordering used by the fewest-hops policy.
    pub fn cmp_by_hops(&self, other: &Route) -> Ordering {
        self.hops
            .cmp(&other.hops)
            .then(self.delivery_time.total_cmp(&other.delivery_time))
            .then_with(|| self.contacts.cmp(&other.contacts))
    }
}

/// K best routes from one node towards each destination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteTable {
    pub owner: NodeId,
    pub k_routes: usize,
    pub t_now: f64,
    pub routes: BTreeMap<NodeId, Vec<Route>>,
}

impl RouteTable {
    pub fn routes_to(&self, dest: NodeId) -> &[Route] {
        self.routes.get(&dest).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Contacts and nodes excluded from a search.
#[derive(Clone, Debug, Default)]
pub struct Suppressions {
    pub contacts: BTreeSet<ContactId>,
    pub nodes: BTreeSet<NodeId>,
}

/// Search index over a plan. Cheap to build; reusable across searches.
pub struct ContactGraph<'a> {
    plan: &'a ContactPlan,
    node_index: HashMap<NodeId, usize>,
    /// Contact positions leaving each node, in plan order.
    outgoing: Vec<Vec<usize>>,
    spans: Vec<(usize, usize)>,
    to: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Path {
    contacts: Vec<usize>,
    ids: Vec<ContactId>,
    /// Node sequence, source first.
    nodes: Vec<usize>,
    schedule: Vec<usize>,
    arrival: usize,
}

impl Path {
    fn key(&self) -> (usize, usize, &[ContactId]) {
        (self.arrival, self.ids.len(), &self.ids)
    }
}

struct Label {
    path: Path,
    visited: FixedBitSet,
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.path.key() == other.path.key()
    }
}
impl Eq for Label {}
impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Label {
    // Reversed: BinaryHeap pops the smallest key first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.path.key().cmp(&self.path.key())
    }
}

struct Settled {
    arrival: usize,
    hops: usize,
    ids: Vec<ContactId>,
    visited: FixedBitSet,
}

impl Settled {
    /// Whether every completion of `p` is beaten by the same completion of
    /// this settled label.
    fn dominates(&self, arrival: usize, ids: &[ContactId], visited: &FixedBitSet) -> bool {
        let hops = ids.len();
        self.arrival <= arrival
            && self.hops <= hops
            && (self.hops < hops || self.ids.as_slice() < ids)
            && self.visited.is_subset(visited)
    }
}

impl<'a> ContactGraph<'a> {
    pub fn new(plan: &'a ContactPlan) -> Self {
        let node_index: HashMap<NodeId, usize> = plan
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, i))
            .collect();
        let mut outgoing = vec![Vec::new(); plan.nodes.len()];
        let mut spans = Vec::with_capacity(plan.contacts.len());
        let mut to = Vec::with_capacity(plan.contacts.len());
        for (pos, c) in plan.contacts.iter().enumerate() {
            let f = node_index.get(&c.from).copied().unwrap_or(usize::MAX);
            let t = node_index.get(&c.to).copied().unwrap_or(usize::MAX);
            if f != usize::MAX && t != usize::MAX {
                outgoing[f].push(pos);
            }
            to.push(t);
            spans.push(plan.span(c));
        }
        ContactGraph {
            plan,
            node_index,
            outgoing,
            spans,
            to,
        }
    }

    pub fn plan(&self) -> &ContactPlan {
        self.plan
    }

    fn index(&self, node: NodeId) -> Result<usize> {
        self.node_index
            .get(&node)
            .copied()
            .ok_or(Error::UnknownNode(node))
    }

    fn endpoints(&self, source: NodeId, dest: NodeId) -> Result<(usize, usize)> {
        let s = self.index(source)?;
        let d = self.index(dest)?;
        if s == d {
            return Err(Error::InvalidArgument(format!(
                "source and destination are both node {source}"
            )));
        }
        Ok((s, d))
    }

    /// Best simple path from `source` (ready at grid index `ready`) to `dest`.
    ///
    /// Best-first over partial paths ordered by `(arrival, hops, ids)`. Every
    /// extension strictly increases arrival, so the first path popped at
    /// `dest` is optimal. A partial path is discarded when a settled path at
    /// the same node is no later, no longer, lexicographically ahead on ties
    /// and visited a subset of its nodes.
    fn search(
        &self,
        source: usize,
        dest: usize,
        ready: usize,
        blocked_nodes: &FixedBitSet,
        blocked_contacts: &HashSet<usize>,
    ) -> Option<Path> {
        let n = self.plan.nodes.len();
        let mut visited = FixedBitSet::with_capacity(n);
        visited.insert(source);
        let mut heap = BinaryHeap::new();
        heap.push(Label {
            path: Path {
                contacts: Vec::new(),
                ids: Vec::new(),
                nodes: vec![source],
                schedule: Vec::new(),
                arrival: ready,
            },
            visited,
        });
        let mut settled: Vec<Vec<Settled>> = (0..n).map(|_| Vec::new()).collect();

        while let Some(Label { path, visited }) = heap.pop() {
            let node = *path.nodes.last().expect("path has a node");
            if node == dest {
                return Some(path);
            }
            if settled[node]
                .iter()
                .any(|s| s.dominates(path.arrival, &path.ids, &visited))
            {
                continue;
            }
            settled[node].push(Settled {
                arrival: path.arrival,
                hops: path.ids.len(),
                ids: path.ids.clone(),
                visited: visited.clone(),
            });
            for &pos in &self.outgoing[node] {
                let (s0, s1) = self.spans[pos];
                let tx = path.arrival.max(s0);
                if tx >= s1 || blocked_contacts.contains(&pos) {
                    continue;
                }
                let next = self.to[pos];
                if visited.contains(next) || blocked_nodes.contains(next) {
                    continue;
                }
                let mut p = path.clone();
                p.contacts.push(pos);
                p.ids.push(self.plan.contacts[pos].id);
                p.nodes.push(next);
                p.schedule.push(tx);
                p.arrival = tx + 1;
                let mut v = visited.clone();
                v.insert(next);
                heap.push(Label { path: p, visited: v });
            }
        }
        None
    }

    fn to_route(&self, path: &Path) -> Route {
        let plan = self.plan;
        let contacts = path.contacts.iter().map(|&p| &plan.contacts[p]);
        Route {
            contacts: path.ids.clone(),
            source: plan.nodes[path.nodes[0]].id,
            destination: plan.nodes[*path.nodes.last().unwrap()].id,
            delivery_time: plan.grid.timestamp(path.arrival),
            hops: path.ids.len(),
            expiration: contacts.clone().map(|c| c.end).fold(f64::INFINITY, f64::min),
            max_volume: contacts.map(|c| plan.volume(c)).min().unwrap_or(0),
            departure_time: plan.grid.timestamp(path.schedule.first().copied().unwrap_or(path.arrival)),
            schedule: path.schedule.clone(),
        }
    }

    pub fn earliest_delivery_route(
        &self,
        source: NodeId,
        dest: NodeId,
        t_now: f64,
        suppressed: &Suppressions,
    ) -> Result<Option<Route>> {
        let (s, d) = self.endpoints(source, dest)?;
        if t_now < 0.0 {
            return Err(Error::InvalidArgument(format!("negative time {t_now}")));
        }
        let mut nodes = FixedBitSet::with_capacity(self.plan.nodes.len());
        for id in &suppressed.nodes {
            if let Some(&i) = self.node_index.get(id) {
                nodes.insert(i);
            }
        }
        let contacts: HashSet<usize> = self
            .plan
            .contacts
            .iter()
            .enumerate()
            .filter(|(_, c)| suppressed.contacts.contains(&c.id))
            .map(|(i, _)| i)
            .collect();
        let ready = self.plan.grid.ceil_index(t_now);
        Ok(self
            .search(s, d, ready, &nodes, &contacts)
            .map(|p| self.to_route(&p)))
    }

    /// Yen's K shortest simple paths with Lawler's restriction: spurs of a
    /// route are only taken at or after the index where it deviated from
    /// its parent.
    pub fn k_best_routes(
        &self,
        source: NodeId,
        dest: NodeId,
        t_now: f64,
        k: usize,
    ) -> Result<Vec<Route>> {
        let (s, d) = self.endpoints(source, dest)?;
        if k == 0 {
            return Err(Error::InvalidArgument("K must be >= 1".into()));
        }
        let n = self.plan.nodes.len();
        let ready = self.plan.grid.ceil_index(t_now.max(0.0));
        let none = FixedBitSet::with_capacity(n);
        let Some(first) = self.search(s, d, ready, &none, &HashSet::new()) else {
            return Ok(Vec::new());
        };

        let mut accepted: Vec<(Path, usize)> = vec![(first, 0)];
        let mut seen: HashSet<Vec<ContactId>> = HashSet::new();
        seen.insert(accepted[0].0.ids.clone());
        let mut candidates: BTreeMap<(usize, usize, Vec<ContactId>), (Path, usize)> =
            BTreeMap::new();

        while accepted.len() < k {
            let (parent, deviation) = accepted.last().cloned().unwrap();
            for i in deviation..parent.contacts.len() {
                let root = &parent.contacts[..i];
                let spur_node = parent.nodes[i];
                let root_ready = if i == 0 {
                    ready
                } else {
                    parent.schedule[i - 1] + 1
                };
                let blocked_contacts: HashSet<usize> = accepted
                    .iter()
                    .filter(|(p, _)| p.contacts.len() > i && &p.contacts[..i] == root)
                    .map(|(p, _)| p.contacts[i])
                    .collect();
                let mut blocked_nodes = FixedBitSet::with_capacity(n);
                for &v in &parent.nodes[..i] {
                    blocked_nodes.insert(v);
                }
                let Some(spur) =
                    self.search(spur_node, d, root_ready, &blocked_nodes, &blocked_contacts)
                else {
                    continue;
                };
                let mut total = Path {
                    contacts: root.to_vec(),
                    ids: parent.ids[..i].to_vec(),
                    nodes: parent.nodes[..i].to_vec(),
                    schedule: parent.schedule[..i].to_vec(),
                    arrival: spur.arrival,
                };
                total.contacts.extend(&spur.contacts);
                total.ids.extend(&spur.ids);
                total.nodes.extend(&spur.nodes);
                total.schedule.extend(&spur.schedule);
                if seen.insert(total.ids.clone()) {
                    let key = (total.arrival, total.ids.len(), total.ids.clone());
                    candidates.insert(key, (total, i));
                }
            }
            match candidates.pop_first() {
                Some((_, next)) => accepted.push(next),
                None => break,
            }
        }
        Ok(accepted.iter().map(|(p, _)| self.to_route(p)).collect())
    }

    pub fn build_route_table(
        &self,
        owner: NodeId,
        t_now: f64,
        k: usize,
        destinations: &BTreeSet<NodeId>,
    ) -> Result<RouteTable> {
        self.index(owner)?;
        let mut routes = BTreeMap::new();
        for &dest in destinations {
            if dest == owner {
                continue;
            }
            routes.insert(dest, self.k_best_routes(owner, dest, t_now, k)?);
        }
        Ok(RouteTable {
            owner,
            k_routes: k,
            t_now,
            routes,
        })
    }
}

/// Earliest-delivery route from `source` to `dest` for data ready at
/// `t_now`, avoiding the suppressed contacts and nodes.
pub fn earliest_delivery_route(
    plan: &ContactPlan,
    source: NodeId,
    dest: NodeId,
    t_now: f64,
    suppressed: &Suppressions,
) -> Result<Option<Route>> {
    ContactGraph::new(plan).earliest_delivery_route(source, dest, t_now, suppressed)
}

/// Up to `k` distinct routes ranked by `(delivery_time, hops, contact ids)`.
pub fn k_best_routes(
    plan: &ContactPlan,
    source: NodeId,
    dest: NodeId,
    t_now: f64,
    k: usize,
) -> Result<Vec<Route>> {
    ContactGraph::new(plan).k_best_routes(source, dest, t_now, k)
}

pub fn build_route_table(
    plan: &ContactPlan,
    owner: NodeId,
    t_now: f64,
    k: usize,
    destinations: &BTreeSet<NodeId>,
) -> Result<RouteTable> {
    ContactGraph::new(plan).build_route_table(owner, t_now, k, destinations)
}

/// Timing and volume attributes of an explicit contact chain for data ready
/// at `t_now`.
pub fn route_attributes(plan: &ContactPlan, contacts: &[ContactId], t_now: f64) -> Result<Route> {
    if contacts.is_empty() {
        return Err(Error::BrokenRoute("route has no contacts".into()));
    }
    let index = plan.contact_index();
    let mut ready = plan.grid.ceil_index(t_now.max(0.0));
    let mut schedule = Vec::with_capacity(contacts.len());
    let mut expiration = f64::INFINITY;
    let mut max_volume = u64::MAX;
    let mut at: Option<NodeId> = None;
    let mut source = None;
    for &id in contacts {
        let c = &plan.contacts[*index.get(&id).ok_or(Error::UnknownContact(id))?];
        if let Some(node) = at {
            if c.from != node {
                return Err(Error::BrokenRoute(format!(
                    "contact {id} leaves node {} but the chain is at node {node}",
                    c.from
                )));
            }
        } else {
            source = Some(c.from);
        }
        let (s0, s1) = plan.span(c);
        let tx = ready.max(s0);
        if tx >= s1 {
            return Err(Error::BrokenRoute(format!(
                "contact {id} ends at {} before data is ready at {}",
                c.end,
                plan.grid.timestamp(ready)
            )));
        }
        schedule.push(tx);
        ready = tx + 1;
        expiration = expiration.min(c.end);
        max_volume = max_volume.min(plan.volume(c));
        at = Some(c.to);
    }
    Ok(Route {
        contacts: contacts.to_vec(),
        source: source.unwrap(),
        destination: at.unwrap(),
        delivery_time: plan.grid.timestamp(ready),
        hops: contacts.len(),
        expiration,
        max_volume,
        departure_time: plan.grid.timestamp(schedule[0]),
        schedule,
    })
}
