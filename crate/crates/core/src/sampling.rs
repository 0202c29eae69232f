//! Neighbor-sampling strategies, selected by name at runtime.
//!
//! Every strategy expands a frontier from destination to sources through
//! the CSC graph and draws neighbors with the UPE's unique random
//! selection. They differ in what a single selection call covers.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::graph::{CscGraph, Edge, Vid};
use crate::kernels::set_partition;
use crate::upe::{select_positions, UpeEngine};

/// Sampled edges in original VIDs plus the number of draws performed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleOutput {
    /// (dst = frontier node, src = sampled parent), duplicates kept.
    pub edges: Vec<Edge>,
    pub selections: u64,
}

pub trait Sampler: Send + Sync {
    fn name(&self) -> &'static str;

    fn aliases(&self) -> &'static [&'static str] {
        &[]
    }

    fn describe(&self) -> &'static str;

    fn sample(
        &self,
        csc: &CscGraph,
        batch: &[Vid],
        fanout: usize,
        layers: usize,
        upe: &mut UpeEngine,
        rng: &mut dyn RngCore,
    ) -> Result<SampleOutput>;
}

/// One selection call per frontier node per hop; up to `fanout` parents
/// each. Selected parents form the next frontier.
#[derive(Debug, Default)]
pub struct NodeWise;

impl Sampler for NodeWise {
    fn name(&self) -> &'static str {
        "node"
    }

    fn aliases(&self) -> &'static [&'static str] {
        &["node-wise", "node_wise"]
    }

    fn describe(&self) -> &'static str {
        "up to k neighbors per frontier node per hop"
    }

    fn sample(
        &self,
        csc: &CscGraph,
        batch: &[Vid],
        fanout: usize,
        layers: usize,
        upe: &mut UpeEngine,
        rng: &mut dyn RngCore,
    ) -> Result<SampleOutput> {
        let mut out = SampleOutput::default();
        let mut frontier = batch.to_vec();
        for _ in 0..layers {
            let mut next = Vec::with_capacity(frontier.len() * fanout);
            for &node in &frontier {
                let (parents, cycles) = upe.select(csc.neighbors(node), fanout, rng)?;
                out.selections += cycles.0;
                out.edges
                    .extend(parents.iter().map(|&p| Edge::new(node, p)));
                next.extend(parents);
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        Ok(out)
    }
}

/// All neighbor arrays of a hop are concatenated and a single selection
/// call draws `fanout` entries from the aggregate.
#[derive(Debug, Default)]
pub struct LayerWise;

impl Sampler for LayerWise {
    fn name(&self) -> &'static str {
        "layer"
    }

    fn aliases(&self) -> &'static [&'static str] {
        &["layer-wise", "layer_wise"]
    }

    fn describe(&self) -> &'static str {
        "k neighbors per hop drawn from the aggregated frontier neighborhood"
    }

    fn sample(
        &self,
        csc: &CscGraph,
        batch: &[Vid],
        fanout: usize,
        layers: usize,
        upe: &mut UpeEngine,
        rng: &mut dyn RngCore,
    ) -> Result<SampleOutput> {
        let mut out = SampleOutput::default();
        let mut frontier = batch.to_vec();
        for _ in 0..layers {
            // Each aggregated entry carries its owner so the drawn
            // neighbor can be attached to the right frontier node.
            let pool: Vec<u64> = frontier
                .iter()
                .flat_map(|&node| {
                    csc.neighbors(node)
                        .iter()
                        .map(move |&p| Edge::new(node, p).key())
                })
                .collect();
            let (bitmap, cycles) = select_positions(pool.len(), fanout, rng)?;
            upe.charge_select(cycles);
            out.selections += cycles.0;
            let (picked, _) = set_partition(&pool, &bitmap)?;
            let picked: Vec<Edge> = picked.into_iter().map(Edge::from_key).collect();
            frontier = picked.iter().map(|e| e.src).collect();
            out.edges.extend(picked);
            if frontier.is_empty() {
                break;
            }
        }
        Ok(out)
    }
}

/// Name-indexed set of samplers.
pub struct SamplerRegistry {
    entries: Vec<Box<dyn Sampler>>,
}

impl SamplerRegistry {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn register(&mut self, sampler: Box<dyn Sampler>) {
        self.entries.retain(|s| s.name() != sampler.name());
        self.entries.push(sampler);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Sampler> {
        self.entries
            .iter()
            .find(|s| s.name() == name || s.aliases().contains(&name))
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "sampler",
                name: name.to_owned(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.name()).collect()
    }
}

impl Default for SamplerRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(NodeWise));
        reg.register(Box::new(LayerWise));
        reg
    }
}
