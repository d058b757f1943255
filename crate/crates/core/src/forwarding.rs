//! Per-packet route filtering and selection with node-local capacity
//! bookkeeping.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{ContactId, ContactPlan, NodeId};
use crate::routing::{Route, RouteTable};

/// Slack for comparing grid-aligned times.
pub(crate) const TIME_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub packet_id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub t_gen: f64,
    /// `None` means no latency requirement.
    pub ttl: Option<f64>,
}

impl Packet {
    pub fn deadline(&self) -> f64 {
        self.ttl.map_or(f64::INFINITY, |ttl| self.t_gen + ttl)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Earliest delivery time.
    DelTime,
    /// Fewest hops among routes that meet the deadline.
    Hops,
}

impl Policy {
    pub const ALL: [Policy; 2] = [Policy::DelTime, Policy::Hops];

    pub fn name(&self) -> &'static str {
        match self {
            Policy::DelTime => "deltime",
            Policy::Hops => "hops",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "deltime" | "cgr-deltime" => Ok(Policy::DelTime),
            "hops" | "cgr-hops" => Ok(Policy::Hops),
            other => Err(Error::InvalidArgument(format!("unknown policy '{other}'"))),
        }
    }
}

/// Residual volume per contact, as one node sees it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapacityLedger {
    residual: BTreeMap<ContactId, u64>,
}

impl CapacityLedger {
    /// Ledger with every contact at its full lifetime volume.
    pub fn new(plan: &ContactPlan) -> Self {
        CapacityLedger {
            residual: plan
                .contacts
                .iter()
                .map(|c| (c.id, plan.volume(c)))
                .collect(),
        }
    }

    /// Unknown contacts have no residual.
    pub fn residual(&self, contact: ContactId) -> u64 {
        self.residual.get(&contact).copied().unwrap_or(0)
    }

    /// Sets a residual directly. Intended for tests and what-if analysis.
    pub fn set_residual(&mut self, contact: ContactId, residual: u64) {
        self.residual.insert(contact, residual);
    }
}

/// Routes of `table` still usable for `pkt` at `t_now`, in table order.
pub fn filter_routes(
    table: &RouteTable,
    pkt: &Packet,
    t_now: f64,
    ledger: &CapacityLedger,
) -> Vec<Route> {
    let deadline = pkt.deadline();
    table
        .routes_to(pkt.dst)
        .iter()
        .filter(|r| {
            r.expiration > t_now + TIME_EPS
                && r.contacts.iter().all(|&c| ledger.residual(c) >= 1)
                && r.departure_time >= t_now - TIME_EPS
                && r.delivery_time <= deadline + TIME_EPS
        })
        .cloned()
        .collect()
}

pub fn select_route(feasible: &[Route], policy: Policy) -> Option<&Route> {
    match policy {
        Policy::DelTime => feasible.iter().min_by(|a, b| a.cmp_by_delivery(b)),
        Policy::Hops => feasible.iter().min_by(|a, b| a.cmp_by_hops(b)),
    }
}

/// Consumes `n` packets of volume on every contact of `route`.
///
/// Leaves the ledger untouched on error.
pub fn book_capacity(ledger: &mut CapacityLedger, route: &Route, n: u64) -> Result<()> {
    for &c in &route.contacts {
        let residual = ledger.residual(c);
        if residual < n {
            return Err(Error::InsufficientCapacity {
                contact: c,
                residual,
                requested: n,
            });
        }
    }
    for &c in &route.contacts {
        if let Some(r) = ledger.residual.get_mut(&c) {
            *r -= n;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decision {
    Enqueue { contact: ContactId, route: Route },
    Drop,
}

/// Filters, selects and books; drops the packet if no route survives.
pub fn forward_or_drop(
    pkt: &Packet,
    table: &RouteTable,
    t_now: f64,
    ledger: &mut CapacityLedger,
    policy: Policy,
) -> Decision {
    let feasible = filter_routes(table, pkt, t_now, ledger);
    let Some(route) = select_route(&feasible, policy) else {
        return Decision::Drop;
    };
    // filter_routes guarantees a residual of at least one on every contact
    book_capacity(ledger, route, 1).expect("filtered route has residual");
    Decision::Enqueue {
        contact: route.contacts[0],
        route: route.clone(),
    }
}
