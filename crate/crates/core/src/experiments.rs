//! Seeded scenario sweeps comparing the routing policies with the LP bound.
//!
//! A [`ScenarioConfig`] fixes the topology family, the all-to-one traffic
//! pattern and the seeds and loads to sweep. Every `(seed, load)` pair yields
//! one plan and one demand list shared by all schemes, so cross-scheme
//! comparisons are paired.
//!
//! JSON schema of a config (all fields required unless marked):
//!
//! ```json
//! {
//!   "topology": {"node_count": 11, "density": 0.2, "capacity": 10,
//!                "state_count": 10, "state_duration": 10.0},
//!   "traffic": {"destination": 11, "no_ttl_sources": [1, 2, 3, 4, 5],
//!               "ttl_sources": [6, 7, 8, 9, 10], "ttl_value": 20.0,
//!               "injection": "burst"},
//!   "routing": {"k": 10},
//!   "schemes": ["deltime", "hops", "lp"],
//!   "lp": {"mode": "hard", "weights": "linear"},
//!   "seeds": [1, 2, 3],
//!   "loads": [5, 10, 20],
//!   "workers": 1
//! }
//! ```
//!
//! `traffic.injection` (default `burst`) is either `burst`, where each source
//! emits `load` packets at `t = 0`, or `per_state`, where it emits `load`
//! packets at the start of every state. `lp` and `workers` are optional.
//! `lp.mode` is `hard` (default: an LP row is infeasible unless all traffic
//! can be delivered on time), `soft` (undeliverable traffic is dropped at
//! its source) or `hard_then_soft`. `lp.weights` is `"linear"` or
//! `{"custom": [w1, ..., wf]}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forwarding::Policy;
use crate::lp::{build_lp_with_mode, demands_to_commodities, lp_metrics, solve_lp, LpMode, LpStatus, WeightFn};
use crate::plan::{generate_random_topology, ContactPlan, NodeId, StateGrid, TopologyConfig};
use crate::sim::{compute_metrics, run_simulation_cached, Demand, Metrics, RouteCache};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub node_count: u32,
    pub density: f64,
    pub capacity: u32,
    pub state_count: usize,
    pub state_duration: f64,
}

impl TopologySpec {
    pub fn with_seed(&self, seed: u64) -> TopologyConfig {
        TopologyConfig {
            node_count: self.node_count,
            density: self.density,
            capacity: self.capacity,
            grid: StateGrid {
                state_count: self.state_count,
                state_duration: self.state_duration,
            },
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    #[default]
    Burst,
    PerState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    pub destination: NodeId,
    pub no_ttl_sources: Vec<NodeId>,
    pub ttl_sources: Vec<NodeId>,
    pub ttl_value: f64,
    #[serde(default)]
    pub injection: Injection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingConfig {
    pub k: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    DelTime,
    Hops,
    Lp,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::DelTime, Scheme::Hops, Scheme::Lp];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::DelTime => "deltime",
            Scheme::Hops => "hops",
            Scheme::Lp => "lp",
        }
    }

    fn policy(&self) -> Option<Policy> {
        match self {
            Scheme::DelTime => Some(Policy::DelTime),
            Scheme::Hops => Some(Policy::Hops),
            Scheme::Lp => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpModeConfig {
    #[default]
    Hard,
    Soft,
    /// Hard model first; soft model when the hard one is infeasible.
    HardThenSoft,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpConfig {
    #[serde(default)]
    pub mode: LpModeConfig,
    #[serde(default)]
    pub weights: WeightFn,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: TopologySpec,
    pub traffic: TrafficConfig,
    pub routing: RoutingConfig,
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub lp: LpConfig,
    pub seeds: Vec<u64>,
    pub loads: Vec<u64>,
    #[serde(default = "one")]
    pub workers: usize,
}

impl ScenarioConfig {
    /// 11 nodes, 10 states of 10 s, density 0.2, capacity 10, all traffic to
    /// node 11; nodes 1-5 without deadline, nodes 6-10 with a 20 s ttl.
    pub fn reference(seeds: Vec<u64>, loads: Vec<u64>) -> Self {
        ScenarioConfig {
            topology: TopologySpec {
                node_count: 11,
                density: 0.2,
                capacity: 10,
                state_count: 10,
                state_duration: 10.0,
            },
            traffic: TrafficConfig {
                destination: NodeId(11),
                no_ttl_sources: (1..=5).map(NodeId).collect(),
                ttl_sources: (6..=10).map(NodeId).collect(),
                ttl_value: 20.0,
                injection: Injection::Burst,
            },
            routing: RoutingConfig { k: 10 },
            schemes: Scheme::ALL.to_vec(),
            lp: LpConfig::default(),
            seeds,
            loads,
            workers: 1,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.topology.with_seed(0).check()?;
        let t = &self.traffic;
        let n = self.topology.node_count;
        let no_ttl: BTreeSet<NodeId> = t.no_ttl_sources.iter().copied().collect();
        let ttl: BTreeSet<NodeId> = t.ttl_sources.iter().copied().collect();
        if no_ttl.len() != t.no_ttl_sources.len() || ttl.len() != t.ttl_sources.len() {
            return bad("duplicate source node".into());
        }
        if let Some(x) = no_ttl.intersection(&ttl).next() {
            return bad(format!("node {x} is in both source sets"));
        }
        if no_ttl.contains(&t.destination) || ttl.contains(&t.destination) {
            return bad(format!("destination {} is also a source", t.destination));
        }
        for id in no_ttl.iter().chain(&ttl).chain([&t.destination]) {
            if id.0 < 1 || id.0 > n {
                return bad(format!("node {id} outside 1..={n}"));
            }
        }
        if !(t.ttl_value >= 0.0 && t.ttl_value.is_finite()) {
            return bad(format!("ttl_value {}", t.ttl_value));
        }
        if self.routing.k == 0 {
            return bad("routing.k must be >= 1".into());
        }
        let schemes: BTreeSet<Scheme> = self.schemes.iter().copied().collect();
        if schemes.is_empty() || schemes.len() != self.schemes.len() {
            return bad("schemes must be a non-empty set".into());
        }
        if self.seeds.is_empty() || self.loads.is_empty() {
            return bad("seeds and loads must be non-empty".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        self.lp.weights.weights(self.topology.state_count)?;
        Ok(())
    }

    /// Schemes in the fixed reporting order.
    pub fn ordered_schemes(&self) -> Vec<Scheme> {
        Scheme::ALL
            .into_iter()
            .filter(|s| self.schemes.contains(s))
            .collect()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Demands of the traffic pattern at `load` on a plan with grid `grid`.
pub fn traffic_demands(traffic: &TrafficConfig, grid: StateGrid, load: u64) -> Vec<Demand> {
    if load == 0 {
        return Vec::new();
    }
    let times: Vec<f64> = match traffic.injection {
        Injection::Burst => vec![0.0],
        Injection::PerState => (0..grid.state_count).map(|q| grid.timestamp(q)).collect(),
    };
    let mut out = Vec::new();
    for &t_gen in &times {
        let sources = traffic
            .no_ttl_sources
            .iter()
            .map(|&s| (s, None))
            .chain(traffic.ttl_sources.iter().map(|&s| (s, Some(traffic.ttl_value))));
        for (src, ttl) in sources {
            out.push(Demand {
                src,
                dst: traffic.destination,
                t_gen,
                ttl,
                count: load,
            });
        }
    }
    out
}

pub fn build_scenario(cfg: &ScenarioConfig, seed: u64, load: u64) -> Result<(ContactPlan, Vec<Demand>)> {
    cfg.check()?;
    let plan = generate_random_topology(&cfg.topology.with_seed(seed))?;
    let demands = traffic_demands(&cfg.traffic, plan.grid, load);
    Ok((plan, demands))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Infeasible,
    NumericalFailure,
    Error,
}

/// One `(seed, load, scheme)` execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub seed: u64,
    pub load: u64,
    pub scheme: Scheme,
    pub status: RunStatus,
    /// LP rows only: whether every packet fits on time.
    pub hard_feasible: Option<bool>,
    pub generated: Option<f64>,
    pub delivered_on_time: Option<f64>,
    pub transmissions: Option<f64>,
    pub delivery_ratio: Option<f64>,
    pub mean_hops: Option<f64>,
    pub mean_delay: Option<f64>,
    pub energy_efficiency: Option<f64>,
    pub message: Option<String>,
}

impl RunRow {
    fn new(seed: u64, load: u64, scheme: Scheme) -> Self {
        RunRow {
            seed,
            load,
            scheme,
            status: RunStatus::Ok,
            hard_feasible: None,
            generated: None,
            delivered_on_time: None,
            transmissions: None,
            delivery_ratio: None,
            mean_hops: None,
            mean_delay: None,
            energy_efficiency: None,
            message: None,
        }
    }

    fn with_metrics(mut self, m: &Metrics) -> Self {
        self.generated = Some(m.generated);
        self.delivered_on_time = Some(m.delivered_on_time);
        self.transmissions = Some(m.transmissions);
        self.delivery_ratio = m.delivery_ratio;
        self.mean_hops = m.mean_hops;
        self.mean_delay = m.mean_delay;
        self.energy_efficiency = m.energy_efficiency;
        self
    }

    fn failed(mut self, status: RunStatus, message: String) -> Self {
        self.status = status;
        self.message = Some(message);
        self
    }

    pub fn metric(&self, m: MetricName) -> Option<f64> {
        match m {
            MetricName::DeliveryRatio => self.delivery_ratio,
            MetricName::EnergyEfficiency => self.energy_efficiency,
            MetricName::MeanDelay => self.mean_delay,
            MetricName::MeanHops => self.mean_hops,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    DeliveryRatio,
    EnergyEfficiency,
    MeanDelay,
    MeanHops,
}

impl MetricName {
    pub const ALL: [MetricName; 4] = [
        MetricName::DeliveryRatio,
        MetricName::EnergyEfficiency,
        MetricName::MeanDelay,
        MetricName::MeanHops,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricName::DeliveryRatio => "delivery_ratio",
            MetricName::EnergyEfficiency => "energy_efficiency",
            MetricName::MeanDelay => "mean_delay",
            MetricName::MeanHops => "mean_hops",
        }
    }
}

/// Mean and sample standard deviation over the defined values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Stat {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Stat {
                mean: None,
                std: None,
                n,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| {
            let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        Stat {
            mean: Some(mean),
            std,
            n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scheme: Scheme,
    pub load: u64,
    pub runs: usize,
    pub failed: usize,
    pub stats: BTreeMap<String, Stat>,
}

impl CellSummary {
    pub fn stat(&self, m: MetricName) -> Stat {
        self.stats[m.name()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// Sorted by `(seed, load, scheme)`.
    pub runs: Vec<RunRow>,
    /// Sorted by `(scheme, load)`.
    pub cells: Vec<CellSummary>,
}

impl SweepResult {
    pub fn from_runs(mut runs: Vec<RunRow>) -> SweepResult {
        runs.sort_by_key(|r| (r.seed, r.load, r.scheme));
        let mut groups: BTreeMap<(Scheme, u64), Vec<&RunRow>> = BTreeMap::new();
        for r in &runs {
            groups.entry((r.scheme, r.load)).or_default().push(r);
        }
        let cells = groups
            .into_iter()
            .map(|((scheme, load), rows)| CellSummary {
                scheme,
                load,
                runs: rows.len(),
                failed: rows.iter().filter(|r| r.status != RunStatus::Ok).count(),
                stats: MetricName::ALL
                    .iter()
                    .map(|&m| {
                        (
                            m.name().to_string(),
                            Stat::of(rows.iter().filter_map(|r| r.metric(m))),
                        )
                    })
                    .collect(),
            })
            .collect();
        SweepResult { runs, cells }
    }

    pub fn cell(&self, scheme: Scheme, load: u64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.scheme == scheme && c.load == load)
    }

    pub fn loads(&self) -> Vec<u64> {
        let set: BTreeSet<u64> = self.runs.iter().map(|r| r.load).collect();
        set.into_iter().collect()
    }

    pub fn schemes(&self) -> Vec<Scheme> {
        let set: BTreeSet<Scheme> = self.runs.iter().map(|r| r.scheme).collect();
        set.into_iter().collect()
    }

    pub fn runs_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.runs {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_runs_csv(text: &str) -> Result<SweepResult> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let runs = r.deserialize().collect::<std::result::Result<Vec<RunRow>, _>>()?;
        Ok(SweepResult::from_runs(runs))
    }
}

fn run_lp(cfg: &ScenarioConfig, plan: &ContactPlan, demands: &[Demand], mut row: RunRow) -> RunRow {
    let commodities = demands_to_commodities(demands);
    let solve = |mode| -> Result<_> {
        let p = build_lp_with_mode(plan, &commodities, &cfg.lp.weights, mode)?;
        let s = solve_lp(&p);
        Ok((p, s))
    };
    let first = match cfg.lp.mode {
        LpModeConfig::Soft => LpMode::Soft,
        LpModeConfig::Hard | LpModeConfig::HardThenSoft => LpMode::Hard,
    };
    let (mut p, mut s) = match solve(first) {
        Ok(x) => x,
        Err(e) => return row.failed(RunStatus::Error, e.to_string()),
    };
    if first == LpMode::Hard {
        row.hard_feasible = match s.status {
            LpStatus::Optimal => Some(true),
            LpStatus::Infeasible => Some(false),
            LpStatus::NumericalFailure => None,
        };
        if s.status == LpStatus::Infeasible && cfg.lp.mode == LpModeConfig::HardThenSoft {
            (p, s) = match solve(LpMode::Soft) {
                Ok(x) => x,
                Err(e) => return row.failed(RunStatus::Error, e.to_string()),
            };
        }
    }
    match s.status {
        LpStatus::Optimal => match lp_metrics(&p, &s) {
            Ok(m) => row.with_metrics(&m),
            Err(e) => row.failed(RunStatus::Error, e.to_string()),
        },
        LpStatus::Infeasible => row.failed(RunStatus::Infeasible, "no on-time flow for all traffic".into()),
        LpStatus::NumericalFailure => {
            row.failed(RunStatus::NumericalFailure, s.message.unwrap_or_default())
        }
    }
}

fn run_seed(cfg: &ScenarioConfig, seed: u64) -> Vec<RunRow> {
    let schemes = cfg.ordered_schemes();
    let plan = match generate_random_topology(&cfg.topology.with_seed(seed)) {
        Ok(p) => p,
        Err(e) => {
            return cfg
                .loads
                .iter()
                .flat_map(|&load| {
                    let e = e.to_string();
                    schemes
                        .iter()
                        .map(move |&s| RunRow::new(seed, load, s).failed(RunStatus::Error, e.clone()))
                })
                .collect()
        }
    };
    let mut cache = RouteCache::new(&plan, cfg.routing.k);
    let mut rows = Vec::new();
    for &load in &cfg.loads {
        let demands = traffic_demands(&cfg.traffic, plan.grid, load);
        for &scheme in &schemes {
            let row = RunRow::new(seed, load, scheme);
            let row = match scheme.policy() {
                Some(policy) => match run_simulation_cached(&plan, &demands, policy, &mut cache) {
                    Ok(r) => row.with_metrics(&compute_metrics(&r, &demands)),
                    Err(e) => row.failed(RunStatus::Error, e.to_string()),
                },
                None => run_lp(cfg, &plan, &demands, row),
            };
            log::debug!("seed {seed} load {load} {scheme}: {:?}", row.status);
            rows.push(row);
        }
    }
    rows
}

/// Runs every `(seed, load, scheme)` cell. Per-cell failures are recorded in
/// the rows; only an invalid config is an error.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepResult> {
    cfg.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let runs: Vec<RunRow> = pool.install(|| {
        use rayon::prelude::*;
        cfg.seeds
            .par_iter()
            .flat_map_iter(|&seed| run_seed(cfg, seed))
            .collect()
    });
    Ok(SweepResult::from_runs(runs))
}

/// One CSV per metric: `load` then mean and std per scheme in fixed order.
pub fn summarize(result: &SweepResult) -> Vec<(String, String)> {
    let schemes: Vec<Scheme> = Scheme::ALL
        .into_iter()
        .filter(|s| result.schemes().contains(s))
        .collect();
    let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    MetricName::ALL
        .iter()
        .map(|&m| {
            let mut text = String::from("load");
            for s in &schemes {
                text.push_str(&format!(",{s}_mean,{s}_std"));
            }
            text.push('\n');
            for load in result.loads() {
                text.push_str(&load.to_string());
                for &s in &schemes {
                    let st = result.cell(s, load).map(|c| c.stat(m));
                    text.push_str(&format!(
                        ",{},{}",
                        fmt(st.and_then(|x| x.mean)),
                        fmt(st.and_then(|x| x.std))
                    ));
                }
                text.push('\n');
            }
            (format!("{}.csv", m.name()), text)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub loads: Vec<u64>,
    pub schemes: Vec<Scheme>,
    /// Output file name to hex SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

/// Writes summary tables and `manifest.json` for the runs in `result`.
pub fn write_report(dir: &Path, cfg: Option<&ScenarioConfig>, result: &SweepResult) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut files = BTreeMap::new();
    let mut put = |name: String, body: String| -> Result<()> {
        fs::write(dir.join(&name), &body)?;
        files.insert(name, hex::encode(Sha256::digest(body.as_bytes())));
        Ok(())
    };
    put("runs.csv".into(), result.runs_csv()?)?;
    for (name, body) in summarize(result) {
        put(name, body)?;
    }
    if let Some(cfg) = cfg {
        put("config.json".into(), serde_json::to_string_pretty(cfg)? + "\n")?;
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: cfg.map(|c| c.hash()).unwrap_or_default(),
        seeds: result.runs.iter().map(|r| r.seed).collect::<BTreeSet<_>>().into_iter().collect(),
        loads: result.loads(),
        schemes: result.schemes(),
        files,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seeds: Vec<u64>, loads: Vec<u64>) -> ScenarioConfig {
        ScenarioConfig::reference(seeds, loads)
    }

    #[test]
    fn reference_scenario_shape() {
        let cfg = small(vec![7], vec![3]);
        let (plan, demands) = build_scenario(&cfg, 7, 3).unwrap();
        assert_eq!(plan.nodes.len(), 11);
        assert_eq!(plan.grid.state_count, 10);
        assert_eq!(plan.grid.state_duration, 10.0);
        assert_eq!(demands.len(), 10);
        assert!(demands.iter().all(|d| d.dst == NodeId(11) && d.t_gen == 0.0 && d.count == 3));
        for d in &demands {
            let expect = (d.src.0 >= 6).then_some(20.0);
            assert_eq!(d.ttl, expect);
        }
    }

    #[test]
    fn zero_load_and_no_ttl_sources() {
        let mut cfg = small(vec![1], vec![0]);
        assert!(build_scenario(&cfg, 1, 0).unwrap().1.is_empty());
        cfg.traffic.no_ttl_sources.append(&mut cfg.traffic.ttl_sources);
        let (_, demands) = build_scenario(&cfg, 1, 4).unwrap();
        assert_eq!(demands.len(), 10);
        assert!(demands.iter().all(|d| d.ttl.is_none()));
    }

    #[test]
    fn per_state_injection() {
        let mut cfg = small(vec![1], vec![2]);
        cfg.traffic.injection = Injection::PerState;
        let (_, demands) = build_scenario(&cfg, 1, 2).unwrap();
        assert_eq!(demands.len(), 100);
        assert_eq!(demands.last().unwrap().t_gen, 90.0);
    }

    #[test]
    fn config_violations() {
        let mut cfg = small(vec![1], vec![1]);
        cfg.traffic.ttl_sources.push(NodeId(1));
        assert!(cfg.check().is_err());
        let mut cfg = small(vec![1], vec![1]);
        cfg.traffic.destination = NodeId(3);
        assert!(cfg.check().is_err());
        let mut cfg = small(vec![1], vec![1]);
        cfg.schemes.clear();
        assert!(cfg.check().is_err());
        let mut cfg = small(vec![1], vec![1]);
        cfg.traffic.destination = NodeId(12);
        assert!(cfg.check().is_err());
        let mut cfg = small(vec![], vec![1]);
        cfg.routing.k = 0;
        assert!(cfg.check().is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = small(vec![1, 2], vec![5, 10]);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
        assert!(ScenarioConfig::from_json(&text.replace("\"workers\"", "\"threads\"")).is_err());
    }

    #[test]
    fn single_cell_sweep() {
        let mut cfg = small(vec![3], vec![2]);
        cfg.schemes = vec![Scheme::DelTime];
        let r = run_sweep(&cfg).unwrap();
        assert_eq!(r.runs.len(), 1);
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.cells[0].runs, 1);
    }

    #[test]
    fn sweep_is_deterministic_across_workers() {
        let mut cfg = small(vec![1, 2, 3], vec![1, 4]);
        let a = run_sweep(&cfg).unwrap().runs_csv().unwrap();
        cfg.workers = 3;
        let b = run_sweep(&cfg).unwrap().runs_csv().unwrap();
        assert_eq!(a, b);
        let back = SweepResult::from_runs_csv(&a).unwrap();
        assert_eq!(back.runs_csv().unwrap(), a);
    }

    #[test]
    fn stats() {
        let s = Stat::of([1.0, 2.0, 3.0]);
        assert_eq!(s.mean, Some(2.0));
        assert_eq!(s.std, Some(1.0));
        assert_eq!(Stat::of([4.0]).std, None);
        assert_eq!(Stat::of([]).mean, None);
    }

    #[test]
    fn summary_columns_in_fixed_order() {
        let mut cfg = small(vec![1, 2], vec![1, 2, 3]);
        cfg.schemes = vec![Scheme::Lp, Scheme::Hops, Scheme::DelTime];
        let r = run_sweep(&cfg).unwrap();
        let tables = summarize(&r);
        let names: Vec<&str> = tables.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            ["delivery_ratio.csv", "energy_efficiency.csv", "mean_delay.csv", "mean_hops.csv"]
        );
        for (_, t) in &tables {
            assert_eq!(
                t.lines().next().unwrap(),
                "load,deltime_mean,deltime_std,hops_mean,hops_std,lp_mean,lp_std"
            );
            assert_eq!(t.lines().count(), 4);
        }
    }
}
