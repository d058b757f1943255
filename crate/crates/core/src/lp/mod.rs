//! Time-expanded multi-commodity flow model of the whole network.
//!
//! Each state `q` contributes one arc per active contact. A commodity is the
//! traffic of one `(source, destination, t_gen, ttl)` class. Variables:
//!
//! * `X[a, c]`: packets of commodity `c` sent on arc `a`;
//! * `B[t, v, c]`: packets of `c` stored at node `v` at timestamp `t`;
//! * `S[c]` (soft mode only): packets of `c` given up at the source.
//!
//! The objective charges every transmission the weight of its state, so
//! early delivery and few transmissions are both rewarded. Constraints:
//!
//! * buffer balance: `B[t_q] = B[t_{q-1}] + in(k_q) - out(k_q) + injection`;
//! * buffer limit: `sum_c B[t, v, c] <= b_v` for bounded nodes;
//! * arc capacity: `sum_c X[a, c] <= c_a`;
//! * initial buffers: only sources generating at `t_0` hold traffic;
//! * no transmission in states ending at or before `t_gen`, and a finite
//!   ttl requires the full amount at the destination from the deadline on;
//! * final buffers: everything sits at its destination at the horizon.
//!
//! Destinations never re-emit their own commodity.

mod export;
mod solve;
mod verify;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{ContactId, ContactPlan, NodeId};
use crate::sim::{Demand, Metrics};

pub use export::{solution_from_csv, solution_to_csv};
pub use solve::solve_lp;
pub use verify::{verify_solution, Violation, ViolationKind};

/// Absolute feasibility tolerance used to certify solver output.
pub const CERTIFY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Commodity {
    pub src: NodeId,
    pub dst: NodeId,
    pub t_gen: f64,
    pub ttl: Option<f64>,
    pub amount: f64,
}

impl Commodity {
    fn key_cmp(&self, other: &Commodity) -> std::cmp::Ordering {
        let ttl = |c: &Commodity| c.ttl.unwrap_or(f64::INFINITY);
        self.src
            .cmp(&other.src)
            .then(self.dst.cmp(&other.dst))
            .then(self.t_gen.total_cmp(&other.t_gen))
            .then(ttl(self).total_cmp(&ttl(other)))
    }

    /// Grid index from which the whole amount must sit at the destination,
    /// `None` without a latency requirement. Deliveries happen at state ends,
    /// so `t_gen + ttl` is rounded down to the grid.
    pub fn deadline_index(&self, plan: &ContactPlan) -> Option<usize> {
        self.ttl.map(|ttl| plan.grid.floor_index(self.t_gen + ttl))
    }
}

/// Merges demands sharing `(src, dst, t_gen, ttl)`; output sorted by that key.
pub fn demands_to_commodities(demands: &[Demand]) -> Vec<Commodity> {
    let mut out: Vec<Commodity> = Vec::new();
    for d in demands {
        let c = Commodity {
            src: d.src,
            dst: d.dst,
            t_gen: d.t_gen,
            ttl: d.ttl,
            amount: d.count as f64,
        };
        match out.iter_mut().find(|e| e.key_cmp(&c).is_eq()) {
            Some(existing) => existing.amount += c.amount,
            None => out.push(c),
        }
    }
    out.sort_by(|a, b| a.key_cmp(b));
    out
}

/// Per-state transmission weight `w(k_q)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFn {
    /// `w(k_q) = q` for 1-based state index `q`.
    #[default]
    Linear,
    /// Explicit weights for states `k_1..k_f`.
    Custom(Vec<f64>),
}

impl WeightFn {
    pub fn weights(&self, state_count: usize) -> Result<Vec<f64>> {
        let w: Vec<f64> = match self {
            WeightFn::Linear => (1..=state_count).map(|q| q as f64).collect(),
            WeightFn::Custom(w) => {
                if w.len() != state_count {
                    return Err(Error::InvalidConfig(format!(
                        "{} weights given for {state_count} states",
                        w.len()
                    )));
                }
                w.clone()
            }
        };
        if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) || w.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidConfig(
                "weights must be positive and strictly increasing".into(),
            ));
        }
        Ok(w)
    }

    pub fn scaled(&self, state_count: usize, factor: f64) -> Result<WeightFn> {
        Ok(WeightFn::Custom(
            self.weights(state_count)?.into_iter().map(|w| w * factor).collect(),
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpMode {
    /// Every packet must be delivered on time; otherwise infeasible.
    Hard,
    /// Undeliverable traffic is dropped at its source at a large penalty.
    Soft,
}

/// One contact in one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub contact: ContactId,
    pub from: NodeId,
    pub to: NodeId,
    /// 0-based state index.
    pub state: usize,
    pub capacity: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintTag {
    BufferBalance,
    BufferLimit,
    ArcCapacity,
    InitialBuffer,
    Deadline,
    FinalBuffer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub tag: ConstraintTag,
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Why a flow variable is fixed to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixReason {
    BeforeGeneration,
    LeavesDestination,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Flow { arc: usize, commodity: usize },
    Buffer { timestamp: usize, node: usize, commodity: usize },
    Slack { commodity: usize },
}

#[derive(Clone, Debug)]
pub struct LpProblem {
    pub plan: ContactPlan,
    pub commodities: Vec<Commodity>,
    pub weights: Vec<f64>,
    pub mode: LpMode,
    pub penalty: f64,
    pub arcs: Vec<Arc>,
    pub objective: Vec<f64>,
    pub upper: Vec<f64>,
    pub fixings: Vec<(usize, FixReason)>,
    pub rows: Vec<Row>,
    arc_index: HashMap<(ContactId, usize), usize>,
}

impl LpProblem {
    pub fn num_flow_vars(&self) -> usize {
        self.arcs.len() * self.commodities.len()
    }

    pub fn num_buffer_vars(&self) -> usize {
        (self.plan.grid.state_count + 1) * self.plan.nodes.len() * self.commodities.len()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn x_var(&self, arc: usize, commodity: usize) -> usize {
        arc * self.commodities.len() + commodity
    }

    /// Flow variable of `contact` in `state` for `commodity`, if that contact
    /// is active in that state.
    pub fn flow_var(&self, contact: ContactId, state: usize, commodity: usize) -> Option<usize> {
        self.arc_index
            .get(&(contact, state))
            .map(|&a| self.x_var(a, commodity))
    }

    pub fn b_var(&self, timestamp: usize, node: usize, commodity: usize) -> usize {
        let c = self.commodities.len();
        self.num_flow_vars() + (timestamp * self.plan.nodes.len() + node) * c + commodity
    }

    pub fn s_var(&self, commodity: usize) -> Option<usize> {
        (self.mode == LpMode::Soft)
            .then(|| self.num_flow_vars() + self.num_buffer_vars() + commodity)
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.plan.nodes.binary_search_by_key(&id, |n| n.id).ok()
    }

    pub fn var_kind(&self, var: usize) -> VarKind {
        let c = self.commodities.len().max(1);
        let nx = self.num_flow_vars();
        let nb = self.num_buffer_vars();
        if var < nx {
            VarKind::Flow {
                arc: var / c,
                commodity: var % c,
            }
        } else if var < nx + nb {
            let r = var - nx;
            let per_t = self.plan.nodes.len() * c;
            VarKind::Buffer {
                timestamp: r / per_t,
                node: (r % per_t) / c,
                commodity: r % c,
            }
        } else {
            VarKind::Slack {
                commodity: var - nx - nb,
            }
        }
    }

    /// Stable name used in the LP text export.
    pub fn var_name(&self, var: usize) -> String {
        match self.var_kind(var) {
            VarKind::Flow { arc, commodity } => {
                let a = &self.arcs[arc];
                format!("x_k{}_e{}_c{}", a.state + 1, a.contact, commodity)
            }
            VarKind::Buffer {
                timestamp,
                node,
                commodity,
            } => format!("b_t{}_v{}_c{}", timestamp, self.plan.nodes[node].id, commodity),
            VarKind::Slack { commodity } => format!("s_c{commodity}"),
        }
    }

    /// Objective value of an assignment.
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, v)| c * v).sum()
    }
}

/// Builds the hard model: every packet must arrive before its deadline.
pub fn build_lp(plan: &ContactPlan, commodities: &[Commodity], w: &WeightFn) -> Result<LpProblem> {
    build_lp_with_mode(plan, commodities, w, LpMode::Hard)
}

pub fn build_lp_with_mode(
    plan: &ContactPlan,
    commodities: &[Commodity],
    w: &WeightFn,
    mode: LpMode,
) -> Result<LpProblem> {
    let grid = plan.grid;
    let f = grid.state_count;
    let weights = w.weights(f)?;
    let mut gen_index = Vec::with_capacity(commodities.len());
    for c in commodities {
        for n in [c.src, c.dst] {
            if !plan.has_node(n) {
                return Err(Error::UnknownNode(n));
            }
        }
        if c.src == c.dst {
            return Err(Error::InvalidDemand(format!(
                "commodity from node {} to itself",
                c.src
            )));
        }
        if !(c.amount >= 0.0 && c.amount.is_finite()) {
            return Err(Error::InvalidDemand(format!("commodity amount {}", c.amount)));
        }
        match grid.index_of(c.t_gen) {
            Some(g) if g < f => gen_index.push(g),
            _ => {
                return Err(Error::InvalidDemand(format!(
                    "commodity generated at {} outside the grid [0, {})",
                    c.t_gen,
                    grid.horizon()
                )))
            }
        }
    }

    let mut arcs = Vec::new();
    for q in 0..f {
        for ct in &plan.contacts {
            let (s0, s1) = plan.span(ct);
            if s0 <= q && q < s1 {
                arcs.push(Arc {
                    contact: ct.id,
                    from: ct.from,
                    to: ct.to,
                    state: q,
                    capacity: ct.capacity,
                });
            }
        }
    }
    let arc_index = arcs
        .iter()
        .enumerate()
        .map(|(i, a)| ((a.contact, a.state), i))
        .collect();

    let nc = commodities.len();
    let nv = plan.nodes.len();
    let nx = arcs.len() * nc;
    let nb = (f + 1) * nv * nc;
    let ns = if mode == LpMode::Soft { nc } else { 0 };
    // one dropped packet costs more than any routing of all traffic
    let penalty = 1.0
        + arcs
            .iter()
            .map(|a| weights[a.state] * a.capacity as f64)
            .sum::<f64>();

    let mut problem = LpProblem {
        plan: plan.clone(),
        commodities: commodities.to_vec(),
        weights,
        mode,
        penalty,
        arcs,
        objective: vec![0.0; nx + nb + ns],
        upper: vec![f64::INFINITY; nx + nb + ns],
        fixings: Vec::new(),
        rows: Vec::new(),
        arc_index,
    };

    for (a, arc) in problem.arcs.iter().enumerate() {
        for (ci, c) in commodities.iter().enumerate() {
            let x = a * nc + ci;
            problem.objective[x] = problem.weights[arc.state];
            if arc.state < gen_index[ci] {
                problem.fixings.push((x, FixReason::BeforeGeneration));
            } else if arc.from == c.dst {
                problem.fixings.push((x, FixReason::LeavesDestination));
            }
        }
    }
    for &(x, _) in &problem.fixings {
        problem.upper[x] = 0.0;
    }
    for ci in 0..ns {
        let s = nx + nb + ci;
        problem.objective[s] = penalty;
        problem.upper[s] = commodities[ci].amount;
    }

    let node_pos: HashMap<NodeId, usize> = plan
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id, i))
        .collect();
    let mut inflow: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); nv]; f];
    let mut outflow: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); nv]; f];
    for (a, arc) in problem.arcs.iter().enumerate() {
        inflow[arc.state][node_pos[&arc.to]].push(a);
        outflow[arc.state][node_pos[&arc.from]].push(a);
    }

    let mut rows = Vec::new();
    for (ci, c) in commodities.iter().enumerate() {
        let y = node_pos[&c.src];
        let z = node_pos[&c.dst];
        let g = gen_index[ci];
        let slack = problem.s_var(ci);

        for v in 0..nv {
            let mut terms = vec![(problem.b_var(0, v, ci), 1.0)];
            let mut rhs = 0.0;
            if v == y && g == 0 {
                rhs = c.amount;
                terms.extend(slack.map(|s| (s, 1.0)));
            }
            rows.push(Row {
                tag: ConstraintTag::InitialBuffer,
                name: format!("init_v{}_c{ci}", plan.nodes[v].id),
                terms,
                sense: Sense::Eq,
                rhs,
            });
        }

        for q in 1..=f {
            for v in 0..nv {
                let mut terms = vec![
                    (problem.b_var(q, v, ci), 1.0),
                    (problem.b_var(q - 1, v, ci), -1.0),
                ];
                terms.extend(inflow[q - 1][v].iter().map(|&a| (problem.x_var(a, ci), -1.0)));
                terms.extend(outflow[q - 1][v].iter().map(|&a| (problem.x_var(a, ci), 1.0)));
                let mut rhs = 0.0;
                if v == y && g == q {
                    rhs = c.amount;
                    terms.extend(slack.map(|s| (s, 1.0)));
                }
                rows.push(Row {
                    tag: ConstraintTag::BufferBalance,
                    name: format!("bal_t{q}_v{}_c{ci}", plan.nodes[v].id),
                    terms,
                    sense: Sense::Eq,
                    rhs,
                });
            }
        }

        if let Some(d) = c.deadline_index(plan) {
            for q in d..=f {
                let mut terms = vec![(problem.b_var(q, z, ci), 1.0)];
                terms.extend(slack.map(|s| (s, 1.0)));
                rows.push(Row {
                    tag: ConstraintTag::Deadline,
                    name: format!("deadline_t{q}_c{ci}"),
                    terms,
                    sense: Sense::Ge,
                    rhs: c.amount,
                });
            }
        }

        for v in 0..nv {
            let mut terms = vec![(problem.b_var(f, v, ci), 1.0)];
            let rhs = if v == z {
                terms.extend(slack.map(|s| (s, 1.0)));
                c.amount
            } else {
                0.0
            };
            rows.push(Row {
                tag: ConstraintTag::FinalBuffer,
                name: format!("final_v{}_c{ci}", plan.nodes[v].id),
                terms,
                sense: Sense::Eq,
                rhs,
            });
        }
    }

    for (v, node) in plan.nodes.iter().enumerate() {
        let Some(limit) = node.buffer.limit() else {
            continue;
        };
        for q in 0..=f {
            rows.push(Row {
                tag: ConstraintTag::BufferLimit,
                name: format!("buf_t{q}_v{}", node.id),
                terms: (0..nc).map(|ci| (problem.b_var(q, v, ci), 1.0)).collect(),
                sense: Sense::Le,
                rhs: limit as f64,
            });
        }
    }

    for (a, arc) in problem.arcs.iter().enumerate() {
        if nc == 0 {
            break;
        }
        rows.push(Row {
            tag: ConstraintTag::ArcCapacity,
            name: format!("cap_k{}_e{}", arc.state + 1, arc.contact),
            terms: (0..nc).map(|ci| (problem.x_var(a, ci), 1.0)).collect(),
            sense: Sense::Le,
            rhs: arc.capacity as f64,
        });
    }

    problem.rows = rows;
    Ok(problem)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::NumericalFailure => "numerical_failure",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// One value per problem variable; empty unless optimal.
    pub values: Vec<f64>,
    pub message: Option<String>,
}

impl LpSolution {
    pub fn flow(&self, problem: &LpProblem, contact: ContactId, state: usize, commodity: usize) -> f64 {
        problem
            .flow_var(contact, state, commodity)
            .and_then(|i| self.values.get(i).copied())
            .unwrap_or(0.0)
    }
}

/// Metrics of an optimal flow; fractional flows are used as they are.
pub fn lp_metrics(problem: &LpProblem, solution: &LpSolution) -> Result<Metrics> {
    if solution.status != LpStatus::Optimal {
        return Err(Error::NotOptimal(solution.status.to_string()));
    }
    if solution.values.len() != problem.num_vars() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {} variables",
            solution.values.len(),
            problem.num_vars()
        )));
    }
    let grid = problem.plan.grid;
    let mut generated = 0.0;
    let mut delivered = 0.0;
    let mut delay_sum = 0.0;
    for (ci, c) in problem.commodities.iter().enumerate() {
        generated += c.amount;
        let dropped = problem.s_var(ci).map_or(0.0, |s| solution.values[s]);
        delivered += c.amount - dropped;
        for (a, arc) in problem.arcs.iter().enumerate() {
            if arc.to == c.dst {
                let x = solution.values[problem.x_var(a, ci)];
                delay_sum += x * (grid.timestamp(arc.state + 1) - c.t_gen);
            }
        }
    }
    let transmissions: f64 = solution.values[..problem.num_flow_vars()].iter().sum();
    Ok(Metrics::from_totals(generated, delivered, transmissions, delay_sum))
}
