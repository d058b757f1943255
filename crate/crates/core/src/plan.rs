//! Contact plans: the scheduled, time-varying topology of the network.
//!
//! A plan is discretized into `state_count` uniform states of
//! `state_duration` seconds. State `q` (0-based) spans `[t_q, t_{q+1}]` with
//! `t_q = q * state_duration`. Every contact is aligned to state boundaries
//! and offers `capacity` packets in each state it covers.
//!
//! Text format, one record per line, `#` starts a comment:
//!
//! ```text
//! plan <state_count> <state_duration_s>
//! node <id> <buffer_capacity|inf>
//! contact <id> <from> <to> <start_s> <end_s> <capacity_pkts_per_state>
//! ```

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContactId(pub u32);

impl fmt::Display for ContactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Uniform discretization of the plan horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    pub state_count: usize,
    pub state_duration: f64,
}

impl StateGrid {
    pub fn new(state_count: usize, state_duration: f64) -> Result<Self> {
        if state_count == 0 {
            return Err(Error::InvalidConfig("state_count must be >= 1".into()));
        }
        if !(state_duration > 0.0 && state_duration.is_finite()) {
            return Err(Error::InvalidConfig(
                "state_duration must be a positive number of seconds".into(),
            ));
        }
        Ok(StateGrid {
            state_count,
            state_duration,
        })
    }

    /// `t_f`, the end of the last state.
    pub fn horizon(&self) -> f64 {
        self.timestamp(self.state_count)
    }

    /// `t_q` for `q` in `0..=state_count`.
    pub fn timestamp(&self, q: usize) -> f64 {
        q as f64 * self.state_duration
    }

    /// Index of the grid timestamp equal to `t`, if `t` lies on the grid
    /// within `[0, horizon]`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        if !t.is_finite() || t < -GRID_EPS {
            return None;
        }
        let x = t / self.state_duration;
        let r = x.round();
        if (x - r).abs() > GRID_EPS * x.abs().max(1.0) || r as usize > self.state_count {
            return None;
        }
        Some(r as usize)
    }

    /// Index of the first grid timestamp at or after `t`.
    pub fn ceil_index(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let x = t / self.state_duration;
        let r = x.round();
        if (x - r).abs() <= GRID_EPS * x.abs().max(1.0) {
            r as usize
        } else {
            x.ceil() as usize
        }
    }

    /// Index of the last grid timestamp at or before `t` (saturating at the
    /// horizon). Infinite `t` maps to the horizon.
    pub fn floor_index(&self, t: f64) -> usize {
        if t == f64::INFINITY {
            return self.state_count;
        }
        if t <= 0.0 {
            return 0;
        }
        let x = t / self.state_duration;
        let r = x.round();
        let idx = if (x - r).abs() <= GRID_EPS * x.abs().max(1.0) {
            r as usize
        } else {
            x.floor() as usize
        };
        idx.min(self.state_count)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Buffer {
    Bounded(u64),
    Unbounded,
}

impl Buffer {
    pub fn limit(&self) -> Option<u64> {
        match self {
            Buffer::Bounded(n) => Some(*n),
            Buffer::Unbounded => None,
        }
    }
}

impl fmt::Display for Buffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Buffer::Bounded(n) => write!(f, "{n}"),
            Buffer::Unbounded => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub buffer: Buffer,
}

/// A scheduled directed communication opportunity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub id: ContactId,
    pub from: NodeId,
    pub to: NodeId,
    pub start: f64,
    pub end: f64,
    /// Packets per covered state.
    pub capacity: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPlan {
    pub grid: StateGrid,
    pub nodes: Vec<NodeSpec>,
    pub contacts: Vec<Contact>,
}

impl ContactPlan {
    /// Builds a normalized plan, rejecting it if any invariant is violated.
    pub fn new(grid: StateGrid, nodes: Vec<NodeSpec>, contacts: Vec<Contact>) -> Result<Self> {
        let mut plan = ContactPlan {
            grid,
            nodes,
            contacts,
        };
        plan.normalize();
        let diags = validate(&plan);
        if diags.is_empty() {
            Ok(plan)
        } else {
            Err(Error::InvalidPlan(diags))
        }
    }

    /// Sorts nodes by id and contacts by `(start, id)`.
    pub fn normalize(&mut self) {
        self.nodes.sort_by_key(|n| n.id);
        self.contacts
            .sort_by(|a, b| a.start.total_cmp(&b.start).then(a.id.cmp(&b.id)));
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn has_node(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn contact(&self, id: ContactId) -> Option<&Contact> {
        self.contacts.iter().find(|c| c.id == id)
    }

    /// Map from contact id to its position in `contacts`.
    pub fn contact_index(&self) -> HashMap<ContactId, usize> {
        self.contacts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id, i))
            .collect()
    }

    /// Covered states `[first, end)` of a state-aligned contact.
    pub fn span(&self, c: &Contact) -> (usize, usize) {
        (self.grid.ceil_index(c.start), self.grid.floor_index(c.end))
    }

    /// Total packets a contact can carry over its lifetime.
    pub fn volume(&self, c: &Contact) -> u64 {
        let (s0, s1) = self.span(c);
        c.capacity as u64 * s1.saturating_sub(s0) as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    DuplicateNode,
    DuplicateContact,
    UnknownNode,
    SelfLoop,
    EmptyWindow,
    OffGrid,
    OutsideHorizon,
    Unsorted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            DiagnosticKind::DuplicateNode => "duplicate node",
            DiagnosticKind::DuplicateContact => "duplicate contact id",
            DiagnosticKind::UnknownNode => "unknown node",
            DiagnosticKind::SelfLoop => "self loop",
            DiagnosticKind::EmptyWindow => "empty contact window",
            DiagnosticKind::OffGrid => "off-grid timestamp",
            DiagnosticKind::OutsideHorizon => "outside horizon",
            DiagnosticKind::Unsorted => "unsorted",
        };
        write!(f, "{name}: {}", self.message)
    }
}

fn diag(kind: DiagnosticKind, message: String) -> Diagnostic {
    Diagnostic { kind, message }
}

/// Checks every plan invariant; an empty list means the plan is valid.
pub fn validate(plan: &ContactPlan) -> Vec<Diagnostic> {
    use DiagnosticKind::*;
    let mut out = Vec::new();
    let mut node_ids = HashSet::new();
    for n in &plan.nodes {
        if !node_ids.insert(n.id) {
            out.push(diag(DuplicateNode, format!("node {} declared twice", n.id)));
        }
    }
    if plan.nodes.windows(2).any(|w| w[0].id > w[1].id) {
        out.push(diag(Unsorted, "nodes are not sorted by id".into()));
    }

    let grid = &plan.grid;
    let mut contact_ids = HashSet::new();
    for c in &plan.contacts {
        if !contact_ids.insert(c.id) {
            out.push(diag(DuplicateContact, format!("contact {} declared twice", c.id)));
        }
        for end in [c.from, c.to] {
            if !node_ids.contains(&end) {
                out.push(diag(
                    UnknownNode,
                    format!("contact {} references undeclared node {}", c.id, end),
                ));
            }
        }
        if c.from == c.to {
            out.push(diag(SelfLoop, format!("contact {} starts and ends at node {}", c.id, c.from)));
        }
        if c.end <= c.start {
            out.push(diag(
                EmptyWindow,
                format!("contact {} has end {} <= start {}", c.id, c.end, c.start),
            ));
        }
        for (label, t) in [("start", c.start), ("end", c.end)] {
            if !t.is_finite() || t < 0.0 || t > grid.horizon() + GRID_EPS {
                out.push(diag(
                    OutsideHorizon,
                    format!("contact {} {label} {t} outside [0, {}]", c.id, grid.horizon()),
                ));
            } else if grid.index_of(t).is_none() {
                out.push(diag(
                    OffGrid,
                    format!("contact {} {label} {t} is not a state boundary", c.id),
                ));
            }
        }
    }
    let sorted = plan
        .contacts
        .windows(2)
        .all(|w| (w[0].start, w[0].id) <= (w[1].start, w[1].id));
    if !sorted {
        out.push(diag(Unsorted, "contacts are not sorted by (start, id)".into()));
    }
    out
}

/// Parses a plan document without checking semantic invariants.
pub fn parse_unchecked(text: &str) -> Result<ContactPlan> {
    let mut grid = None;
    let mut nodes = Vec::new();
    let mut contacts = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut tokens = Tokens::new(line, lineno + 1);
        let Some(keyword) = tokens.next_raw() else {
            continue;
        };
        match keyword.1 {
            "plan" => {
                if grid.is_some() {
                    return Err(tokens.error_at(keyword.0, "duplicate plan header"));
                }
                let count: usize = tokens.number("state_count")?;
                let dur: f64 = tokens.number("state_duration")?;
                tokens.finish()?;
                grid = Some(
                    StateGrid::new(count, dur)
                        .map_err(|e| tokens.error_at(keyword.0, &e.to_string()))?,
                );
            }
            "node" | "contact" if grid.is_none() => {
                return Err(tokens.error_at(keyword.0, "record before plan header"));
            }
            "node" => {
                let id = tokens.node_id()?;
                let (col, tok) = tokens.expect("buffer_capacity")?;
                let buffer = if tok == "inf" {
                    Buffer::Unbounded
                } else {
                    Buffer::Bounded(tok.parse().map_err(|_| {
                        tokens.error_at(col, &format!("invalid buffer capacity '{tok}'"))
                    })?)
                };
                tokens.finish()?;
                nodes.push(NodeSpec { id, buffer });
            }
            "contact" => {
                let id = ContactId(tokens.number("contact id")?);
                let from = tokens.node_id()?;
                let to = tokens.node_id()?;
                let start: f64 = tokens.number("start")?;
                let end: f64 = tokens.number("end")?;
                let capacity: u32 = tokens.number("capacity")?;
                tokens.finish()?;
                contacts.push(Contact {
                    id,
                    from,
                    to,
                    start,
                    end,
                    capacity,
                });
            }
            other => {
                return Err(tokens.error_at(keyword.0, &format!("unknown record type '{other}'")));
            }
        }
    }
    let grid = grid.ok_or_else(|| Error::Syntax {
        line: text.lines().count().max(1),
        column: 1,
        message: "missing plan header".into(),
    })?;
    Ok(ContactPlan {
        grid,
        nodes,
        contacts,
    })
}

/// Parses and normalizes a plan document, rejecting invalid plans.
pub fn parse_contact_plan(text: &str) -> Result<ContactPlan> {
    let plan = parse_unchecked(text)?;
    ContactPlan::new(plan.grid, plan.nodes, plan.contacts)
}

/// Canonical text form: nodes by id, contacts by `(start, id)`.
pub fn serialize_contact_plan(plan: &ContactPlan) -> String {
    use std::fmt::Write;
    let mut plan = plan.clone();
    plan.normalize();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "plan {} {}",
        plan.grid.state_count, plan.grid.state_duration
    );
    for n in &plan.nodes {
        let _ = writeln!(out, "node {} {}", n.id, n.buffer);
    }
    for c in &plan.contacts {
        let _ = writeln!(
            out,
            "contact {} {} {} {} {} {}",
            c.id, c.from, c.to, c.start, c.end, c.capacity
        );
    }
    out
}

struct Tokens<'a> {
    line: usize,
    iter: std::iter::Peekable<std::vec::IntoIter<(usize, &'a str)>>,
    end_col: usize,
}

impl<'a> Tokens<'a> {
    fn new(line: &'a str, lineno: usize) -> Self {
        let mut toks = Vec::new();
        let mut start = None;
        for (i, ch) in line.char_indices() {
            match (ch.is_whitespace(), start) {
                (true, Some(s)) => {
                    toks.push((s, &line[s..i]));
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            toks.push((s, &line[s..]));
        }
        let toks: Vec<_> = toks.into_iter().map(|(s, t)| (s + 1, t)).collect();
        Tokens {
            line: lineno,
            iter: toks.into_iter().peekable(),
            end_col: line.len() + 1,
        }
    }

    fn next_raw(&mut self) -> Option<(usize, &'a str)> {
        self.iter.next()
    }

    fn error_at(&self, column: usize, message: &str) -> Error {
        Error::Syntax {
            line: self.line,
            column,
            message: message.to_string(),
        }
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.iter
            .next()
            .ok_or_else(|| self.error_at(self.end_col, &format!("missing {what}")))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let (col, tok) = self.expect(what)?;
        tok.parse()
            .map_err(|_| self.error_at(col, &format!("invalid {what} '{tok}'")))
    }

    fn node_id(&mut self) -> Result<NodeId> {
        let (col, tok) = self.expect("node id")?;
        match tok.parse::<u32>() {
            Ok(n) if n > 0 => Ok(NodeId(n)),
            _ => Err(self.error_at(col, &format!("node id must be a positive integer, got '{tok}'"))),
        }
    }

    fn finish(&mut self) -> Result<()> {
        match self.iter.peek() {
            None => Ok(()),
            Some(&(col, tok)) => Err(self.error_at(col, &format!("unexpected token '{tok}'"))),
        }
    }
}

/// Parameters of a random δ-density topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub node_count: u32,
    pub density: f64,
    pub capacity: u32,
    pub grid: StateGrid,
    pub seed: u64,
}

impl TopologyConfig {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::InvalidConfig(format!(
                "density {} outside [0, 1]",
                self.density
            )));
        }
        StateGrid::new(self.grid.state_count, self.grid.state_duration)?;
        Ok(())
    }
}

/// Uniform draw in `[0, 1)` from the top 53 bits of a ChaCha8 word.
fn unit_draw(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Random topology with nodes `1..=node_count` and unbounded buffers.
///
/// For every state and every unordered pair `a < b`, a ChaCha8 stream seeded
/// from `cfg.seed` draws one Bernoulli(`density`) trial; on success the pair
/// gets two single-state contacts `a -> b` and `b -> a`. Draw order is state
/// major, then `a`, then `b`, and contact ids are assigned sequentially from 1.
pub fn generate_random_topology(cfg: &TopologyConfig) -> Result<ContactPlan> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = cfg.grid;
    let nodes: Vec<NodeSpec> = (1..=cfg.node_count)
        .map(|i| NodeSpec {
            id: NodeId(i),
            buffer: Buffer::Unbounded,
        })
        .collect();
    let mut contacts = Vec::new();
    let mut next_id = 1u32;
    for q in 0..grid.state_count {
        let (start, end) = (grid.timestamp(q), grid.timestamp(q + 1));
        for a in 1..=cfg.node_count {
            for b in (a + 1)..=cfg.node_count {
                if unit_draw(&mut rng) < cfg.density {
                    for (from, to) in [(a, b), (b, a)] {
                        contacts.push(Contact {
                            id: ContactId(next_id),
                            from: NodeId(from),
                            to: NodeId(to),
                            start,
                            end,
                            capacity: cfg.capacity,
                        });
                        next_id += 1;
                    }
                }
            }
        }
    }
    ContactPlan::new(grid, nodes, contacts)
}

/// Node ids of a plan, as an ordered set.
pub fn node_set(plan: &ContactPlan) -> BTreeSet<NodeId> {
    plan.nodes.iter().map(|n| n.id).collect()
}
