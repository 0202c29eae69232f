//! End-to-end preprocessing: convert the graph, sample, renumber the
//! sample, and convert the renumbered sample.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{estimate_total, CostBreakdown, WorkloadParams};
use crate::error::{Error, Result};
use crate::graph::{CscGraph, Edge, EdgeArrayCoo, Vid};
use crate::sampling::SamplerRegistry;
use crate::scr::{reshape, ReindexMap, ScrConfig};
use crate::upe::{Cycles, OrderingCycles, UpeConfig, UpeEngine};
use crate::DEFAULT_CLOCK_HZ;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub batch: Vec<Vid>,
    pub fanout: usize,
    pub layers: usize,
    /// Registered sampler name, e.g. `node` or `layer`.
    pub mode: String,
}

impl SamplingParams {
    pub fn node_wise(batch: Vec<Vid>, fanout: usize, layers: usize) -> Self {
        Self {
            batch,
            fanout,
            layers,
            mode: "node".into(),
        }
    }

    pub fn validate(&self, node_count: usize) -> Result<()> {
        if self.fanout == 0 {
            return Err(Error::InvalidParams("fanout k must be at least 1".into()));
        }
        if self.layers == 0 {
            return Err(Error::InvalidParams("layers must be at least 1".into()));
        }
        let bad: Vec<Vid> = self
            .batch
            .iter()
            .copied()
            .filter(|&v| v as usize >= node_count)
            .collect();
        if !bad.is_empty() {
            return Err(Error::InvalidBatch(bad));
        }
        Ok(())
    }
}

/// `count` distinct batch nodes drawn uniformly from `0..n`, in draw order.
pub fn random_batch(n: usize, count: usize, seed: u64) -> Result<Vec<Vid>> {
    if count > n {
        return Err(Error::InvalidParams(format!(
            "batch of {count} from a graph of {n} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, n, count)
        .into_iter()
        .map(|v| v as Vid)
        .collect())
}

/// Cycle counts of each stage. Ordering of the subgraph includes both its
/// sort and merge phases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCycles {
    pub ordering_sort: u64,
    pub ordering_merge: u64,
    pub reshaping: u64,
    pub selecting: u64,
    pub reindexing: u64,
    pub subgraph_ordering: u64,
    pub subgraph_reshaping: u64,
}

impl StageCycles {
    pub fn total(&self) -> u64 {
        self.ordering_sort
            + self.ordering_merge
            + self.reshaping
            + self.selecting
            + self.reindexing
            + self.subgraph_ordering
            + self.subgraph_reshaping
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub stages: StageCycles,
    pub total_cycles: u64,
    pub clock_hz: f64,
    pub reconfig_penalty_ms: f64,
    pub estimated_seconds: f64,
    pub upe: Option<UpeConfig>,
    pub scr: Option<ScrConfig>,
    pub sampler: Option<String>,
    pub input_nodes: u64,
    pub input_edges: u64,
    pub output_nodes: u64,
    pub output_edges: u64,
    /// Closed-form estimate for the same workload and configuration.
    pub analytic: Option<CostBreakdown>,
}

impl Default for PreprocessReport {
    fn default() -> Self {
        gather_report(StageCycles::default(), ReportContext::default())
    }
}

/// Everything in a report besides the stage cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportContext {
    pub clock_hz: f64,
    pub reconfig_penalty_ms: f64,
    pub upe: Option<UpeConfig>,
    pub scr: Option<ScrConfig>,
    pub sampler: Option<String>,
    pub input: (u64, u64),
    pub output: (u64, u64),
    pub analytic: Option<CostBreakdown>,
}

impl Default for ReportContext {
    fn default() -> Self {
        Self {
            clock_hz: DEFAULT_CLOCK_HZ,
            reconfig_penalty_ms: 0.0,
            upe: None,
            scr: None,
            sampler: None,
            input: (0, 0),
            output: (0, 0),
            analytic: None,
        }
    }
}

pub fn gather_report(stages: StageCycles, ctx: ReportContext) -> PreprocessReport {
    let total_cycles = stages.total();
    PreprocessReport {
        stages,
        total_cycles,
        clock_hz: ctx.clock_hz,
        reconfig_penalty_ms: ctx.reconfig_penalty_ms,
        estimated_seconds: total_cycles as f64 / ctx.clock_hz + ctx.reconfig_penalty_ms / 1e3,
        upe: ctx.upe,
        scr: ctx.scr,
        sampler: ctx.sampler,
        input_nodes: ctx.input.0,
        input_edges: ctx.input.1,
        output_nodes: ctx.output.0,
        output_edges: ctx.output.1,
        analytic: ctx.analytic,
    }
}

impl PreprocessReport {
    pub const CSV_HEADER: &'static str = "ordering_sort,ordering_merge,reshaping,selecting,reindexing,subgraph_ordering,subgraph_reshaping,total_cycles,clock_hz,reconfig_penalty_ms,estimated_seconds,n_upe,w_upe,n_scr,w_scr,sampler,input_nodes,input_edges,output_nodes,output_edges";

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Header plus one data row.
    pub fn to_csv(&self) -> String {
        let s = &self.stages;
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.ordering_sort,
            s.ordering_merge,
            s.reshaping,
            s.selecting,
            s.reindexing,
            s.subgraph_ordering,
            s.subgraph_reshaping,
            self.total_cycles,
            self.clock_hz,
            self.reconfig_penalty_ms,
            self.estimated_seconds,
            opt(self.upe.map(|u| u.n_upe)),
            opt(self.upe.map(|u| u.w_upe)),
            opt(self.scr.map(|c| c.n_scr)),
            opt(self.scr.map(|c| c.w_scr)),
            self.sampler.as_deref().unwrap_or(""),
            self.input_nodes,
            self.input_edges,
            self.output_nodes,
            self.output_edges
        )
        .unwrap();
        out
    }
}

/// Subgraph over renumbered VIDs and the map back to original VIDs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSubgraph {
    pub csc: CscGraph,
    pub vid_map: ReindexMap,
}

impl SampledSubgraph {
    /// `{"new_vid": original_vid, ...}` in ascending new-VID order.
    pub fn vid_map_json(&self) -> String {
        let mut out = String::from("{");
        for (new, orig) in self.vid_map.originals().iter().enumerate() {
            if new > 0 {
                out.push(',');
            }
            write!(out, "\n  \"{new}\": {orig}").unwrap();
        }
        out.push_str(if self.vid_map.is_empty() {
            "}\n"
        } else {
            "\n}\n"
        });
        out
    }

    /// Subgraph edges translated back to original VIDs.
    pub fn original_edges(&self) -> Vec<Edge> {
        self.csc
            .to_edges()
            .into_iter()
            .map(|e| {
                Edge::new(
                    self.vid_map.original(e.dst).expect("dst mapped"),
                    self.vid_map.original(e.src).expect("src mapped"),
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionCycles {
    pub ordering: OrderingCycles,
    pub reshaping: Cycles,
}

impl ConversionCycles {
    pub fn total(&self) -> Cycles {
        self.ordering.total() + self.reshaping
    }
}

/// Engines, clock, and the samplers available to a run.
pub struct Pipeline {
    pub upe: UpeConfig,
    pub scr: ScrConfig,
    pub clock_hz: f64,
    pub samplers: SamplerRegistry,
}

impl Pipeline {
    pub fn new(upe: UpeConfig, scr: ScrConfig) -> Result<Self> {
        upe.validate()?;
        scr.validate()?;
        Ok(Self {
            upe,
            scr,
            clock_hz: DEFAULT_CLOCK_HZ,
            samplers: SamplerRegistry::default(),
        })
    }

    pub fn with_clock(mut self, clock_hz: f64) -> Result<Self> {
        if !(clock_hz.is_finite() && clock_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "clock must be positive, got {clock_hz}"
            )));
        }
        self.clock_hz = clock_hz;
        Ok(self)
    }

    /// COO to CSC: edge ordering on the UPEs, pointer array on the SCRs.
    pub fn convert(&self, g: &EdgeArrayCoo) -> Result<(CscGraph, ConversionCycles)> {
        let mut upe = UpeEngine::new(self.upe)?;
        convert_with(&mut upe, self.scr, g)
    }

    pub fn preprocess(
        &self,
        g: &EdgeArrayCoo,
        params: &SamplingParams,
        seed: u64,
    ) -> Result<(SampledSubgraph, PreprocessReport)> {
        params.validate(g.node_count())?;
        let sampler = self.samplers.get(&params.mode)?;
        let mut upe = UpeEngine::new(self.upe)?;

        let (csc, conv) = convert_with(&mut upe, self.scr, g)?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampled = sampler.sample(
            &csc,
            &params.batch,
            params.fanout,
            params.layers,
            &mut upe,
            &mut rng,
        )?;
        let selecting = sampled.selections.div_ceil(self.upe.n_upe as u64);

        // Batch nodes take the first new VIDs, in batch order.
        let mut map = ReindexMap::new();
        let (_, batch_cycles) = map.extend_stream(&params.batch, self.scr);
        let endpoints: Vec<Vid> = sampled.edges.iter().flat_map(|e| [e.dst, e.src]).collect();
        let (renumbered, stream_cycles) = map.extend_stream(&endpoints, self.scr);
        let sub_edges = renumbered
            .chunks_exact(2)
            .map(|p| Edge::new(p[0], p[1]))
            .collect();
        let sub_coo = EdgeArrayCoo::new(map.len(), sub_edges)?;
        let (sub_csc, sub_conv) = convert_with(&mut upe, self.scr, &sub_coo)?;

        let stages = StageCycles {
            ordering_sort: conv.ordering.sort.0,
            ordering_merge: conv.ordering.merge.0,
            reshaping: conv.reshaping.0,
            selecting,
            reindexing: (batch_cycles + stream_cycles).0,
            subgraph_ordering: sub_conv.ordering.total().0,
            subgraph_reshaping: sub_conv.reshaping.0,
        };
        let workload = WorkloadParams {
            n: g.node_count() as u64,
            e: g.edge_count() as u64,
            layers: params.layers as u32,
            fanout: params.fanout as u64,
            batch: params.batch.len() as u64,
        };
        let report = gather_report(
            stages,
            ReportContext {
                clock_hz: self.clock_hz,
                reconfig_penalty_ms: 0.0,
                upe: Some(self.upe),
                scr: Some(self.scr),
                sampler: Some(sampler.name().to_owned()),
                input: (g.node_count() as u64, g.edge_count() as u64),
                output: (sub_csc.node_count() as u64, sub_csc.edge_count() as u64),
                analytic: estimate_total(&workload, self.upe, self.scr).ok(),
            },
        );
        Ok((
            SampledSubgraph {
                csc: sub_csc,
                vid_map: map,
            },
            report,
        ))
    }
}

fn convert_with(
    upe: &mut UpeEngine,
    scr: ScrConfig,
    g: &EdgeArrayCoo,
) -> Result<(CscGraph, ConversionCycles)> {
    let (sorted, ordering) = upe.edge_ordering(g)?;
    let (pointers, reshaping) = reshape(&sorted, scr)?;
    let csc = CscGraph {
        pointers,
        indices: sorted.sources(),
    };
    Ok((
        csc,
        ConversionCycles {
            ordering,
            reshaping,
        },
    ))
}

pub fn convert(
    g: &EdgeArrayCoo,
    upe: UpeConfig,
    scr: ScrConfig,
) -> Result<(CscGraph, ConversionCycles)> {
    Pipeline::new(upe, scr)?.convert(g)
}

pub fn preprocess(
    g: &EdgeArrayCoo,
    params: &SamplingParams,
    upe: UpeConfig,
    scr: ScrConfig,
    seed: u64,
) -> Result<(SampledSubgraph, PreprocessReport)> {
    Pipeline::new(upe, scr)?.preprocess(g, params, seed)
}
