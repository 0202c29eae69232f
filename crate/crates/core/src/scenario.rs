//! Scripted replay of preprocessing workloads under several configuration
//! policies, side by side.
//!
//! Scenarios are TOML. Top-level keys (all optional):
//!
//! ```toml
//! clock_hz = 100e6
//! policies = ["static", "dynamic"]
//! [reconfig]            # any ReconfigPolicy field
//! horizon = 1
//! [catalog]
//! upe_capacity = 16384
//! scr_capacity = 4096
//! size = 10
//! [boot]                # initial configuration; default is the plan
//! upe = [32, 512]       # for the first workload
//! scr = [16, 256]
//! ```
//!
//! followed by `[[step]]` tables, each with an `op`:
//!
//! | op              | fields |
//! |-----------------|--------|
//! | `load`          | `handle`, then `path` (+ `format`, `edge_order`) or `nodes` + `edges` |
//! | `delta`         | `handle`, then `path` (+ `format`, `edge_order`, `add_nodes`) or `add_nodes` + `add_edges` |
//! | `preprocess`    | `handle`, `k` (10), `layers` (2), `batch` (1), `repeat` (1) |
//! | `plan`          | `handle`, `k`, `layers`, `batch` |
//! | `assert-config` | `policy` ("dynamic"), `upe = [n, w]`, `scr = [n, w]` |
//!
//! Relative paths resolve against the scenario file's directory. Each
//! preprocess run is costed with the closed-form estimate for the
//! configuration the policy holds at that point.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::{
    estimate_total, generate_catalog_sized, select_config, ConfigPair, ReconfigPolicy, ScoredPair,
    VariantCatalog, WorkloadParams, CATALOG_SIZE, DEFAULT_SCR_CAPACITY, DEFAULT_UPE_CAPACITY,
};
use crate::error::{Error, Result};
use crate::io::{load_graph, EdgeOrder, GraphFormat};
use crate::policy::{ConfigPolicy, PolicyContext, PolicyRegistry};
use crate::scr::ScrConfig;
use crate::upe::UpeConfig;
use crate::DEFAULT_CLOCK_HZ;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_clock")]
    pub clock_hz: f64,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    #[serde(default)]
    pub reconfig: ReconfigPolicy,
    #[serde(default)]
    pub catalog: CatalogSpec,
    #[serde(default)]
    pub boot: Option<BootConfig>,
    #[serde(default, rename = "step")]
    pub steps: Vec<Step>,
}

fn default_clock() -> f64 {
    DEFAULT_CLOCK_HZ
}

fn default_policies() -> Vec<String> {
    vec!["static".into(), "dynamic".into()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogSpec {
    pub upe_capacity: usize,
    pub scr_capacity: usize,
    pub size: usize,
}

impl Default for CatalogSpec {
    fn default() -> Self {
        Self {
            upe_capacity: DEFAULT_UPE_CAPACITY,
            scr_capacity: DEFAULT_SCR_CAPACITY,
            size: CATALOG_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootConfig {
    pub upe: [usize; 2],
    pub scr: [usize; 2],
}

impl BootConfig {
    fn pair(&self) -> Result<ConfigPair> {
        Ok(ConfigPair {
            upe: UpeConfig::new(self.upe[0], self.upe[1])?,
            scr: ScrConfig::new(self.scr[0], self.scr[1])?,
        })
    }
}

fn default_k() -> u64 {
    10
}
fn default_layers() -> u32 {
    2
}
fn one() -> u64 {
    1
}
fn one_u32() -> u32 {
    1
}
fn dynamic() -> String {
    "dynamic".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Step {
    Load {
        handle: String,
        path: Option<PathBuf>,
        #[serde(default)]
        format: GraphFormat,
        #[serde(default)]
        edge_order: EdgeOrder,
        nodes: Option<u64>,
        edges: Option<u64>,
    },
    Delta {
        handle: String,
        path: Option<PathBuf>,
        #[serde(default)]
        format: GraphFormat,
        #[serde(default)]
        edge_order: EdgeOrder,
        #[serde(default)]
        add_nodes: u64,
        add_edges: Option<u64>,
    },
    Preprocess {
        handle: String,
        #[serde(default = "default_k")]
        k: u64,
        #[serde(default = "default_layers")]
        layers: u32,
        #[serde(default = "one")]
        batch: u64,
        #[serde(default = "one_u32")]
        repeat: u32,
    },
    Plan {
        handle: String,
        #[serde(default = "default_k")]
        k: u64,
        #[serde(default = "default_layers")]
        layers: u32,
        #[serde(default = "one")]
        batch: u64,
    },
    AssertConfig {
        #[serde(default = "dynamic")]
        policy: String,
        upe: [usize; 2],
        scr: [usize; 2],
    },
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn catalog(&self) -> Result<VariantCatalog> {
        generate_catalog_sized(
            self.catalog.upe_capacity,
            self.catalog.scr_capacity,
            self.catalog.size,
        )
    }
}

/// One preprocessing run under one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayRow {
    /// 1-based run index, shared by all policies.
    pub run: usize,
    /// 1-based index of the script step that issued the run.
    pub script_step: usize,
    pub handle: String,
    pub policy: String,
    pub config: ConfigPair,
    pub cycles: u64,
    pub reshaping_cycles: u64,
    pub penalty_ms: f64,
    pub run_ms: f64,
    pub cumulative_ms: f64,
    pub reconfigured: bool,
}

impl ReplayRow {
    pub fn reshaping_share(&self) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.reshaping_cycles as f64 / self.cycles as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanRecord {
    pub script_step: usize,
    pub handle: String,
    pub best: ScoredPair,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplayOutcome {
    pub rows: Vec<ReplayRow>,
    pub plans: Vec<PlanRecord>,
}

impl ReplayOutcome {
    pub const CSV_HEADER: &'static str = "run,script_step,handle,policy,n_upe,w_upe,n_scr,w_scr,cycles,reshaping_cycles,reshaping_share,penalty_ms,run_ms,cumulative_ms,reconfigured";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{:.6},{},{:.6},{:.6},{}",
                r.run,
                r.script_step,
                r.handle,
                r.policy,
                r.config.upe.n_upe,
                r.config.upe.w_upe,
                r.config.scr.n_scr,
                r.config.scr.w_scr,
                r.cycles,
                r.reshaping_cycles,
                r.reshaping_share(),
                r.penalty_ms,
                r.run_ms,
                r.cumulative_ms,
                r.reconfigured
            )
            .unwrap();
        }
        out
    }

    pub fn rows_for<'a>(&'a self, policy: &'a str) -> impl Iterator<Item = &'a ReplayRow> + 'a {
        self.rows.iter().filter(move |r| r.policy == policy)
    }

    pub fn reconfigurations(&self, policy: &str) -> usize {
        self.rows_for(policy).filter(|r| r.reconfigured).count()
    }

    pub fn final_cumulative_ms(&self, policy: &str) -> Option<f64> {
        self.rows_for(policy).last().map(|r| r.cumulative_ms)
    }

    /// First run at which `challenger`'s cumulative time drops below
    /// `baseline`'s.
    pub fn crossover_run(&self, baseline: &str, challenger: &str) -> Option<usize> {
        self.rows_for(baseline)
            .zip(self.rows_for(challenger))
            .find(|(b, c)| c.cumulative_ms < b.cumulative_ms)
            .map(|(b, _)| b.run)
    }
}

#[derive(Debug, Clone, Copy)]
struct GraphMeta {
    n: u64,
    e: u64,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

pub fn replay(
    scenario: &Scenario,
    base_dir: &Path,
    registry: &PolicyRegistry,
) -> Result<ReplayOutcome> {
    if !(scenario.clock_hz.is_finite() && scenario.clock_hz > 0.0) {
        return Err(Error::Scenario(format!(
            "clock_hz must be positive, got {}",
            scenario.clock_hz
        )));
    }
    let catalog = scenario.catalog()?;
    let boot = scenario.boot.as_ref().map(BootConfig::pair).transpose()?;
    let mut policies: Vec<Box<dyn ConfigPolicy>> = scenario
        .policies
        .iter()
        .map(|p| registry.create(p))
        .collect::<Result<_>>()?;
    if policies.is_empty() {
        return Err(Error::Scenario("no policies to replay".into()));
    }
    let ctx = PolicyContext {
        catalog: &catalog,
        reconfig: &scenario.reconfig,
        clock_hz: scenario.clock_hz,
    };

    let mut graphs: HashMap<String, GraphMeta> = HashMap::new();
    let mut cumulative = vec![0.0f64; policies.len()];
    let mut out = ReplayOutcome::default();
    let mut run = 0usize;

    let lookup =
        |graphs: &HashMap<String, GraphMeta>, handle: &str, at: usize| -> Result<GraphMeta> {
            graphs.get(handle).copied().ok_or_else(|| {
                Error::Scenario(format!("step {at}: unknown graph handle `{handle}`"))
            })
        };

    for (i, step) in scenario.steps.iter().enumerate() {
        let at = i + 1;
        match step {
            Step::Load {
                handle,
                path,
                format,
                edge_order,
                nodes,
                edges,
            } => {
                let meta = match (path, nodes, edges) {
                    (Some(p), None, None) => {
                        let g = load_graph(&resolve(base_dir, p), *format, *edge_order)?;
                        GraphMeta {
                            n: g.node_count() as u64,
                            e: g.edge_count() as u64,
                        }
                    }
                    (None, Some(n), Some(e)) => GraphMeta { n: *n, e: *e },
                    _ => {
                        return Err(Error::Scenario(format!(
                            "step {at}: load needs either `path` or both `nodes` and `edges`"
                        )))
                    }
                };
                graphs.insert(handle.clone(), meta);
            }
            Step::Delta {
                handle,
                path,
                format,
                edge_order,
                add_nodes,
                add_edges,
            } => {
                let mut meta = lookup(&graphs, handle, at)?;
                let added = match (path, add_edges) {
                    (Some(p), None) => {
                        let d = load_graph(&resolve(base_dir, p), *format, *edge_order)?;
                        let limit = meta.n + add_nodes;
                        if d.node_count() as u64 > limit {
                            return Err(Error::Scenario(format!(
                                "step {at}: delta references VID {} but the graph has {limit} nodes after the update",
                                d.node_count() - 1
                            )));
                        }
                        d.edge_count() as u64
                    }
                    (None, Some(e)) => *e,
                    _ => {
                        return Err(Error::Scenario(format!(
                            "step {at}: delta needs either `path` or `add_edges`"
                        )))
                    }
                };
                meta.n += add_nodes;
                meta.e += added;
                graphs.insert(handle.clone(), meta);
            }
            Step::Preprocess {
                handle,
                k,
                layers,
                batch,
                repeat,
            } => {
                let meta = lookup(&graphs, handle, at)?;
                let workload = WorkloadParams {
                    n: meta.n,
                    e: meta.e,
                    layers: *layers,
                    fanout: *k,
                    batch: *batch,
                };
                for policy in policies.iter_mut() {
                    if policy.current().is_none() {
                        let cfg = match boot {
                            Some(b) => b,
                            None => select_config(&workload, &catalog)?.best.config,
                        };
                        policy.boot(cfg, workload);
                    }
                }
                for _ in 0..*repeat {
                    run += 1;
                    for (pi, policy) in policies.iter_mut().enumerate() {
                        let step = policy.before_run(&workload, &ctx)?;
                        let cost = estimate_total(&workload, step.config.upe, step.config.scr)?;
                        let run_ms = cost.millis(scenario.clock_hz) + step.penalty_ms;
                        cumulative[pi] += run_ms;
                        out.rows.push(ReplayRow {
                            run,
                            script_step: at,
                            handle: handle.clone(),
                            policy: policy.name().to_owned(),
                            config: step.config,
                            cycles: cost.total,
                            reshaping_cycles: cost.reshaping + cost.subgraph_reshaping,
                            penalty_ms: step.penalty_ms,
                            run_ms,
                            cumulative_ms: cumulative[pi],
                            reconfigured: step.reconfigured,
                        });
                    }
                }
            }
            Step::Plan {
                handle,
                k,
                layers,
                batch,
            } => {
                let meta = lookup(&graphs, handle, at)?;
                let workload = WorkloadParams {
                    n: meta.n,
                    e: meta.e,
                    layers: *layers,
                    fanout: *k,
                    batch: *batch,
                };
                out.plans.push(PlanRecord {
                    script_step: at,
                    handle: handle.clone(),
                    best: select_config(&workload, &catalog)?.best,
                });
            }
            Step::AssertConfig { policy, upe, scr } => {
                let want = BootConfig {
                    upe: *upe,
                    scr: *scr,
                }
                .pair()?;
                let p = policies
                    .iter()
                    .find(|p| p.name() == policy)
                    .ok_or_else(|| {
                        Error::Scenario(format!(
                            "step {at}: policy `{policy}` is not part of this replay"
                        ))
                    })?;
                match p.current() {
                    Some(have) if have == want => {}
                    have => {
                        return Err(Error::Scenario(format!(
                            "step {at}: assert-config failed: `{policy}` holds {}, expected UPE {} SCR {}",
                            have.map_or("nothing".to_owned(), |c| format!("UPE {} SCR {}", c.upe, c.scr)),
                            want.upe,
                            want.scr
                        )))
                    }
                }
            }
        }
    }
    Ok(out)
}
