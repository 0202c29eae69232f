//! Graph containers: the raw edge array (COO), the compressed sparse
//! column form, incremental edge deltas, and a sequential reference
//! conversion used to check the engine path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vertex identifier.
pub type Vid = u32;

/// One directed edge. Stored destination first, the order the engines
/// sort by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub dst: Vid,
    pub src: Vid,
}

impl Edge {
    pub const fn new(dst: Vid, src: Vid) -> Self {
        Self { dst, src }
    }

    /// Concatenated 64-bit key, destination in the high word.
    #[inline]
    pub const fn key(self) -> u64 {
        ((self.dst as u64) << 32) | self.src as u64
    }

    #[inline]
    pub const fn from_key(key: u64) -> Self {
        Self {
            dst: (key >> 32) as Vid,
            src: key as Vid,
        }
    }
}

/// Unsorted edge list. Duplicates and self-loops are kept verbatim.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeArrayCoo {
    node_count: usize,
    edges: Vec<Edge>,
}

impl EdgeArrayCoo {
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        check_vids(node_count, &edges)?;
        Ok(Self { node_count, edges })
    }

    /// Builds a graph whose node count is `1 + max VID` (0 when empty).
    pub fn from_edges(edges: Vec<Edge>) -> Self {
        let node_count = edges
            .iter()
            .map(|e| e.dst.max(e.src) as usize + 1)
            .max()
            .unwrap_or(0);
        Self { node_count, edges }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn into_edges(self) -> Vec<Edge> {
        self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Appends the delta's edges after the existing ones and grows the
    /// node count. The existing edge order is untouched.
    pub fn apply_edge_updates(&self, delta: &EdgeDelta) -> Result<EdgeArrayCoo> {
        let node_count = self
            .node_count
            .checked_add(delta.added_node_count)
            .ok_or(Error::Overflow("node count"))?;
        check_vids(node_count, &delta.added_edges)?;
        let mut edges = Vec::with_capacity(self.edges.len() + delta.added_edges.len());
        edges.extend_from_slice(&self.edges);
        edges.extend_from_slice(&delta.added_edges);
        Ok(Self { node_count, edges })
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let mut in_degree = vec![0u64; self.node_count];
        for e in &self.edges {
            in_degree[e.dst as usize] += 1;
        }
        let max_degree = in_degree.iter().copied().max().unwrap_or(0);
        let mean_degree = if self.node_count == 0 {
            0.0
        } else {
            self.edges.len() as f64 / self.node_count as f64
        };
        DegreeStats {
            max_degree,
            mean_degree,
            in_degree,
        }
    }

    /// Reference conversion: counting sort by destination, then an
    /// ordinary sort of each source bucket.
    pub fn to_csc_oracle(&self) -> CscGraph {
        let n = self.node_count;
        let mut pointers = vec![0u64; n + 1];
        for e in &self.edges {
            pointers[e.dst as usize + 1] += 1;
        }
        for d in 0..n {
            pointers[d + 1] += pointers[d];
        }
        let mut cursor: Vec<u64> = pointers[..n].to_vec();
        let mut indices = vec![0 as Vid; self.edges.len()];
        for e in &self.edges {
            let slot = &mut cursor[e.dst as usize];
            indices[*slot as usize] = e.src;
            *slot += 1;
        }
        for d in 0..n {
            indices[pointers[d] as usize..pointers[d + 1] as usize].sort_unstable();
        }
        CscGraph { pointers, indices }
    }
}

fn check_vids(node_count: usize, edges: &[Edge]) -> Result<()> {
    for e in edges {
        let hi = e.dst.max(e.src);
        if hi as usize >= node_count {
            return Err(Error::VidOutOfRange {
                vid: hi as u64,
                node_count: node_count as u64,
            });
        }
    }
    Ok(())
}

/// In-degree summary (destination side).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeStats {
    pub max_degree: u64,
    pub mean_degree: f64,
    /// In-degree of every node, indexed by VID.
    pub in_degree: Vec<u64>,
}

/// Edges and nodes appended to an existing graph. New VIDs are dense
/// after the existing ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeDelta {
    pub added_edges: Vec<Edge>,
    pub added_node_count: usize,
}

impl EdgeDelta {
    /// Concatenation of two deltas, applied in order.
    pub fn then(&self, next: &EdgeDelta) -> EdgeDelta {
        let mut added_edges = self.added_edges.clone();
        added_edges.extend_from_slice(&next.added_edges);
        EdgeDelta {
            added_edges,
            added_node_count: self.added_node_count + next.added_node_count,
        }
    }
}

/// Compressed sparse column graph: `pointers` has `n + 1` entries and
/// `indices[pointers[d]..pointers[d + 1]]` holds the sorted sources of
/// destination `d`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CscGraph {
    pub pointers: Vec<u64>,
    pub indices: Vec<Vid>,
}

impl CscGraph {
    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            pointers: vec![0; n + 1],
            indices: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.pointers.len().saturating_sub(1)
    }

    pub fn edge_count(&self) -> usize {
        self.indices.len()
    }

    /// Sources of edges into `dst`.
    pub fn neighbors(&self, dst: Vid) -> &[Vid] {
        let d = dst as usize;
        &self.indices[self.pointers[d] as usize..self.pointers[d + 1] as usize]
    }

    pub fn contains_edge(&self, dst: Vid, src: Vid) -> bool {
        (dst as usize) < self.node_count() && self.neighbors(dst).binary_search(&src).is_ok()
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCsc(msg));
        if self.pointers.is_empty() {
            return bad("pointer array must have n + 1 entries".into());
        }
        if self.pointers[0] != 0 {
            return bad(format!("pointers[0] = {}", self.pointers[0]));
        }
        let n = self.node_count();
        if self.pointers[n] != self.indices.len() as u64 {
            return bad(format!(
                "pointers[n] = {} but there are {} indices",
                self.pointers[n],
                self.indices.len()
            ));
        }
        for d in 0..n {
            let (lo, hi) = (self.pointers[d], self.pointers[d + 1]);
            if lo > hi {
                return bad(format!("pointers decrease at {d}"));
            }
            let col = &self.indices[lo as usize..hi as usize];
            if col.windows(2).any(|w| w[0] > w[1]) {
                return bad(format!("sources of {d} are not sorted"));
            }
            if let Some(&v) = col.iter().find(|&&v| v as usize >= n) {
                return bad(format!("source {v} of {d} out of range"));
            }
        }
        Ok(())
    }

    /// Edge list in (dst, src) sorted order.
    pub fn to_edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.indices.len());
        for d in 0..self.node_count() {
            out.extend(
                self.neighbors(d as Vid)
                    .iter()
                    .map(|&s| Edge::new(d as Vid, s)),
            );
        }
        out
    }
}

/// Uniform random multigraph with `e` edges over `n` nodes; duplicates and
/// self-loops occur at their natural rate.
pub fn uniform_random(n: usize, e: usize, seed: u64) -> Result<EdgeArrayCoo> {
    if n == 0 && e > 0 {
        return Err(Error::InvalidParams(
            "edges requested on an empty node set".into(),
        ));
    }
    if n > Vid::MAX as usize + 1 {
        return Err(Error::InvalidParams(format!(
            "{n} nodes exceed the 32-bit VID space"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = (0..e)
        .map(|_| Edge::new(rng.gen_range(0..n) as Vid, rng.gen_range(0..n) as Vid))
        .collect();
    Ok(EdgeArrayCoo {
        node_count: n,
        edges,
    })
}
