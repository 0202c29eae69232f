//! Cycle-level model of the UPE kernel.
//!
//! A UPE holds `w_upe` 64-bit lanes and performs one stable
//! set-partition per cycle. The kernel has `n_upe` of them behind a
//! scoreboard. On top of that the controller runs three workflows:
//!
//! - chunk sort: LSD radix sort, one partition pass (one cycle) per key bit;
//! - merge: two sorted runs are merged through a `w`-lane buffer that emits
//!   its lower half every cycle, i.e. `w / 2` elements per cycle;
//! - unique random selection: a bitmap-guarded draw per cycle, each
//!   extracted with a one-hot partition.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeArrayCoo, Vid};
use crate::kernels::set_partition;

/// Simulated clock cycles.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Cycles(pub u64);

impl Cycles {
    pub const ZERO: Cycles = Cycles(0);

    pub fn get(self) -> u64 {
        self.0
    }
}

impl Add for Cycles {
    type Output = Cycles;
    fn add(self, rhs: Cycles) -> Cycles {
        Cycles(self.0 + rhs.0)
    }
}

impl AddAssign for Cycles {
    fn add_assign(&mut self, rhs: Cycles) {
        self.0 += rhs.0;
    }
}

impl Sum for Cycles {
    fn sum<I: Iterator<Item = Cycles>>(iter: I) -> Cycles {
        Cycles(iter.map(|c| c.0).sum())
    }
}

impl fmt::Display for Cycles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Number of UPE instances and lanes per instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UpeConfig {
    pub n_upe: usize,
    pub w_upe: usize,
}

impl UpeConfig {
    pub fn new(n_upe: usize, w_upe: usize) -> Result<Self> {
        let cfg = Self { n_upe, w_upe };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_upe == 0 {
            return Err(Error::InvalidConfig("n_upe must be at least 1".into()));
        }
        if self.w_upe < 2 || !self.w_upe.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "w_upe must be a power of two >= 2, got {}",
                self.w_upe
            )));
        }
        Ok(())
    }

    pub fn lanes(&self) -> usize {
        self.n_upe * self.w_upe
    }
}

impl Default for UpeConfig {
    fn default() -> Self {
        Self {
            n_upe: 32,
            w_upe: 64,
        }
    }
}

impl fmt::Display for UpeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n_upe, self.w_upe)
    }
}

/// Edge array sorted by (dst, src).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SortedCoo {
    node_count: usize,
    edges: Vec<Edge>,
}

impl SortedCoo {
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if let Some(i) = edges.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::Contract(format!(
                "edges not sorted at position {}",
                i + 1
            )));
        }
        if let Some(e) = edges
            .iter()
            .find(|e| e.dst.max(e.src) as usize >= node_count)
        {
            return Err(Error::VidOutOfRange {
                vid: e.dst.max(e.src) as u64,
                node_count: node_count as u64,
            });
        }
        Ok(Self { node_count, edges })
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

    pub fn sources(&self) -> Vec<Vid> {
        self.edges.iter().map(|e| e.src).collect()
    }
}

/// Cycle breakdown of one edge-ordering run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingCycles {
    pub sort: Cycles,
    pub merge: Cycles,
    /// Pairwise merge rounds charged to the merge phase.
    pub charged_merge_rounds: u32,
    pub chunks: usize,
    pub key_bits: u32,
}

impl OrderingCycles {
    pub fn total(&self) -> Cycles {
        self.sort + self.merge
    }
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// `ceil(log2(x))`, with `ceil_log2(0) = ceil_log2(1) = 0`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        u64::BITS - (x - 1).leading_zeros()
    }
}

/// Bits needed per VID for a graph of `n` nodes (at least one).
pub fn vid_bits_for(n: usize) -> u32 {
    ceil_log2(n as u64).max(1)
}

/// Radix passes used by default for a graph of `n` nodes.
pub fn default_key_bits(n: usize) -> u32 {
    2 * vid_bits_for(n)
}

/// LSD radix sort over the listed bit positions, least significant
/// first. Each pass is one stable partition: zeros first.
fn radix_sort_bits(keys: &[u64], bits: &[u32]) -> Result<Vec<u64>> {
    let mut cur = keys.to_vec();
    let mut cond = vec![false; cur.len()];
    for &bit in bits {
        for (c, k) in cond.iter_mut().zip(&cur) {
            *c = (k >> bit) & 1 == 0;
        }
        let (mut zeros, ones) = set_partition(&cur, &cond)?;
        zeros.extend_from_slice(&ones);
        cur = zeros;
    }
    Ok(cur)
}

/// Sorts one chunk of at most `width` keys on their low `key_bits` bits.
/// Costs one cycle per bit.
pub fn upe_sort_chunk(chunk: &[u64], key_bits: u32, width: usize) -> Result<(Vec<u64>, Cycles)> {
    if chunk.len() > width {
        return Err(Error::Contract(format!(
            "chunk of {} keys exceeds UPE width {width}",
            chunk.len()
        )));
    }
    if !(1..=64).contains(&key_bits) {
        return Err(Error::Contract(format!(
            "key_bits must be in [1, 64], got {key_bits}"
        )));
    }
    let bits: Vec<u32> = (0..key_bits).collect();
    Ok((radix_sort_bits(chunk, &bits)?, Cycles(key_bits as u64)))
}

/// Merges two sorted runs through a `width`-lane buffer.
///
/// The buffer starts with the first `width / 2` keys of each run. Every
/// cycle it is sorted, its lower half is emitted, and the upper half is
/// topped up with the next `width / 2` keys from whichever run has the
/// smaller head. Short runs are padded with `u64::MAX`, which is stripped
/// from the output. Cycles = `ceil((|a| + |b|) / (width / 2))`.
pub fn upe_merge(a: &[u64], b: &[u64], width: usize) -> Result<(Vec<u64>, Cycles)> {
    if width < 2 || !width.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "merge width must be a power of two >= 2, got {width}"
        )));
    }
    for (name, run) in [("a", a), ("b", b)] {
        if let Some(i) = run.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::Contract(format!(
                "merge input {name} unsorted at {}",
                i + 1
            )));
        }
    }
    let half = width / 2;
    let real = a.len() + b.len();
    let mut out = Vec::with_capacity(real + half);
    if real == 0 {
        return Ok((out, Cycles::ZERO));
    }

    let block = |run: &[u64], idx: usize, dst: &mut [u64]| {
        let start = (idx * half).min(run.len());
        let end = (start + half).min(run.len());
        dst[..end - start].copy_from_slice(&run[start..end]);
        dst[end - start..].fill(u64::MAX);
    };
    let blocks = |run: &[u64]| run.len().div_ceil(half);
    let (a_blocks, b_blocks) = (blocks(a), blocks(b));

    let mut buf = vec![0u64; width];
    let mut scratch = vec![0u64; width];
    block(a, 0, &mut buf[..half]);
    block(b, 0, &mut buf[half..]);
    let (mut ai, mut bi) = (1usize, 1usize);
    let mut cycles = 0u64;

    while out.len() < real {
        merge_halves(&buf, half, &mut scratch);
        std::mem::swap(&mut buf, &mut scratch);
        out.extend_from_slice(&buf[..half]);
        cycles += 1;

        buf.copy_within(half.., 0);
        let a_head = (ai < a_blocks).then(|| a[ai * half]);
        let b_head = (bi < b_blocks).then(|| b[bi * half]);
        let take_a = match (a_head, b_head) {
            (Some(x), Some(y)) => x < y,
            (Some(_), None) => true,
            _ => false,
        };
        if take_a {
            block(a, ai, &mut buf[half..]);
            ai += 1;
        } else if b_head.is_some() {
            block(b, bi, &mut buf[half..]);
            bi += 1;
        } else {
            buf[half..].fill(u64::MAX);
        }
    }
    out.truncate(real);
    debug_assert_eq!(cycles, ceil_div(real as u64, half as u64));
    Ok((out, Cycles(cycles)))
}

/// The buffer is two sorted halves; the UPE's sort of it reduces to
/// merging them.
fn merge_halves(buf: &[u64], half: usize, out: &mut [u64]) {
    let (lo, hi) = buf.split_at(half);
    let (mut i, mut j) = (0, 0);
    for slot in out.iter_mut() {
        if j >= hi.len() || (i < lo.len() && lo[i] <= hi[j]) {
            *slot = lo[i];
            i += 1;
        } else {
            *slot = hi[j];
            j += 1;
        }
    }
}

/// Makespan of `jobs` equal-length jobs dispatched FIFO to the first idle
/// of `units` workers.
fn scoreboard_makespan(jobs: usize, units: usize, job_cycles: u64) -> u64 {
    let mut idle_at: BinaryHeap<Reverse<(u64, usize)>> =
        (0..units).map(|u| Reverse((0, u))).collect();
    let mut makespan = 0;
    for _ in 0..jobs {
        let Reverse((free, unit)) = idle_at.pop().expect("at least one unit");
        let done = free + job_cycles;
        makespan = makespan.max(done);
        idle_at.push(Reverse((done, unit)));
    }
    makespan
}

/// Draws `min(k, len)` distinct positions of a `len`-element array
/// uniformly without replacement. Returns the sampled-position bitmap
/// and one cycle per draw.
///
/// Each draw picks a random index among those not yet marked in the
/// bitmap, extracts it with a one-hot partition of the index array and
/// marks it.
pub fn select_positions<R: Rng + ?Sized>(
    len: usize,
    k: usize,
    rng: &mut R,
) -> Result<(Vec<bool>, Cycles)> {
    let picks = k.min(len);
    let mut bitmap = vec![false; len];
    if picks == 0 {
        return Ok((bitmap, Cycles::ZERO));
    }
    let index: Vec<u64> = (0..len as u64).collect();
    let mut one_hot = vec![false; len];
    for drawn in 0..picks {
        let r = rng.gen_range(0..len - drawn);
        let chosen = bitmap
            .iter()
            .enumerate()
            .filter(|(_, &taken)| !taken)
            .nth(r)
            .map(|(i, _)| i)
            .expect("r is below the unsampled count");
        one_hot[chosen] = true;
        let (extracted, _) = set_partition(&index, &one_hot)?;
        one_hot[chosen] = false;
        debug_assert_eq!(extracted, [chosen as u64]);
        bitmap[extracted[0] as usize] = true;
    }
    Ok((bitmap, Cycles(picks as u64)))
}

/// Unique random selection over a neighbor array: the draws of
/// [`select_positions`], then one partition of the neighbor array with
/// the bitmap as condition. The sample keeps the neighbors' order.
pub fn uni_random_select<R: Rng + ?Sized>(
    neighbors: &[Vid],
    k: usize,
    rng: &mut R,
) -> Result<(Vec<Vid>, Cycles)> {
    let (bitmap, cycles) = select_positions(neighbors.len(), k, rng)?;
    if cycles == Cycles::ZERO {
        return Ok((Vec::new(), cycles));
    }
    let values: Vec<u64> = neighbors.iter().map(|&v| v as u64).collect();
    let (sampled, _) = set_partition(&values, &bitmap)?;
    Ok((sampled.into_iter().map(|v| v as Vid).collect(), cycles))
}

/// Per-phase totals accumulated by an engine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpeCounters {
    pub sort: Cycles,
    pub merge: Cycles,
    pub select: Cycles,
}

/// A UPE kernel instance with its cycle counters.
#[derive(Debug, Clone)]
pub struct UpeEngine {
    cfg: UpeConfig,
    counters: UpeCounters,
}

impl UpeEngine {
    pub fn new(cfg: UpeConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            counters: UpeCounters::default(),
        })
    }

    pub fn config(&self) -> UpeConfig {
        self.cfg
    }

    pub fn counters(&self) -> UpeCounters {
        self.counters
    }

    pub fn reset(&mut self) {
        self.counters = UpeCounters::default();
    }

    pub fn sort_chunk(&mut self, chunk: &[u64], key_bits: u32) -> Result<(Vec<u64>, Cycles)> {
        let (out, c) = upe_sort_chunk(chunk, key_bits, self.cfg.w_upe)?;
        self.counters.sort += c;
        Ok((out, c))
    }

    pub fn merge(&mut self, a: &[u64], b: &[u64]) -> Result<(Vec<u64>, Cycles)> {
        let (out, c) = upe_merge(a, b, self.cfg.w_upe)?;
        self.counters.merge += c;
        Ok((out, c))
    }

    /// Draws are spread over the UPEs, so a batch of `s` selections costs
    /// `ceil(s / n_upe)`; this call charges the raw draw count and the
    /// caller divides once per batch.
    pub fn select<R: Rng + ?Sized>(
        &mut self,
        neighbors: &[Vid],
        k: usize,
        rng: &mut R,
    ) -> Result<(Vec<Vid>, Cycles)> {
        let (out, c) = uni_random_select(neighbors, k, rng)?;
        self.counters.select += c;
        Ok((out, c))
    }

    /// Records draws made outside [`UpeEngine::select`].
    pub fn charge_select(&mut self, cycles: Cycles) {
        self.counters.select += cycles;
    }

    pub fn edge_ordering(&mut self, g: &EdgeArrayCoo) -> Result<(SortedCoo, OrderingCycles)> {
        self.edge_ordering_with(g, None)
    }

    /// Sorts the edge array by (dst, src).
    ///
    /// Edges are concatenated into 64-bit keys, split into `w_upe` chunks
    /// radix-sorted on the `vid_bits` low bits of each half, then merged
    /// pairwise. Each merge round is charged at full utilization,
    /// `ceil(round work / n_upe)`. The first round, whose runs are single
    /// chunks, is folded into the chunk-sort phase and not charged, so a
    /// sort of `2^r` chunks is charged `r - 1` rounds.
    pub fn edge_ordering_with(
        &mut self,
        g: &EdgeArrayCoo,
        vid_bits: Option<u32>,
    ) -> Result<(SortedCoo, OrderingCycles)> {
        let n = g.node_count();
        if g.is_empty() {
            return Ok((SortedCoo::new(n, Vec::new())?, OrderingCycles::default()));
        }
        let needed = vid_bits_for(n);
        let vid_bits = match vid_bits {
            Some(b) if b < needed || b > 32 => {
                return Err(Error::InvalidConfig(format!(
                    "{b} bits per VID cannot cover {n} nodes (need {needed}..=32)"
                )))
            }
            Some(b) => b,
            None => needed,
        };
        let bits: Vec<u32> = (0..vid_bits).chain(32..32 + vid_bits).collect();
        let key_bits = bits.len() as u32;
        let w = self.cfg.w_upe;

        let keys: Vec<u64> = g.edges().iter().map(|e| e.key()).collect();
        let mut runs: Vec<Vec<u64>> = keys
            .par_chunks(w)
            .map(|chunk| radix_sort_bits(chunk, &bits))
            .collect::<Result<_>>()?;
        let chunks = runs.len();
        let sort = Cycles(scoreboard_makespan(chunks, self.cfg.n_upe, key_bits as u64));

        let mut merge = 0u64;
        let mut round = 0u32;
        let mut charged = 0u32;
        while runs.len() > 1 {
            let mut pending = std::mem::take(&mut runs).into_iter();
            let mut pairs = Vec::new();
            let mut carry = None;
            loop {
                match (pending.next(), pending.next()) {
                    (Some(a), Some(b)) => pairs.push((a, b)),
                    (Some(a), None) => {
                        carry = Some(a);
                        break;
                    }
                    _ => break,
                }
            }
            let merged: Vec<(Vec<u64>, Cycles)> = pairs
                .par_iter()
                .map(|(a, b)| upe_merge(a, b, w))
                .collect::<Result<_>>()?;
            let work: u64 = merged.iter().map(|(_, c)| c.0).sum();
            runs = merged.into_iter().map(|(r, _)| r).chain(carry).collect();
            if round > 0 {
                merge += ceil_div(work, self.cfg.n_upe as u64);
                charged += 1;
            }
            round += 1;
        }

        let edges = runs
            .pop()
            .unwrap_or_default()
            .into_iter()
            .map(Edge::from_key)
            .collect();
        let cycles = OrderingCycles {
            sort,
            merge: Cycles(merge),
            charged_merge_rounds: charged,
            chunks,
            key_bits,
        };
        self.counters.sort += cycles.sort;
        self.counters.merge += cycles.merge;
        Ok((
            SortedCoo {
                node_count: n,
                edges,
            },
            cycles,
        ))
    }
}
