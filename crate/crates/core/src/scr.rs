//! Cycle-level model of the SCR kernel: the reshaper, which turns a
//! sorted edge array into a pointer array, and the reindexer, which
//! renumbers sampled VIDs densely in first-seen order.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Vid;
use crate::kernels::{set_count, CountMode};
use crate::upe::{Cycles, SortedCoo};

/// `n_scr` reducer slots (targets per cycle), `w_scr` comparator lanes
/// per slot (edge-array elements per cycle).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScrConfig {
    pub n_scr: usize,
    pub w_scr: usize,
}

impl ScrConfig {
    pub fn new(n_scr: usize, w_scr: usize) -> Result<Self> {
        let cfg = Self { n_scr, w_scr };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_scr == 0 {
            return Err(Error::InvalidConfig("n_scr must be at least 1".into()));
        }
        if self.w_scr == 0 || !self.w_scr.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "w_scr must be a power of two >= 1, got {}",
                self.w_scr
            )));
        }
        Ok(())
    }

    pub fn lanes(&self) -> usize {
        self.n_scr * self.w_scr
    }
}

impl Default for ScrConfig {
    fn default() -> Self {
        Self {
            n_scr: 8,
            w_scr: 512,
        }
    }
}

impl fmt::Display for ScrConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n_scr, self.w_scr)
    }
}

/// One cycle of the reshaper's comparators: occurrences of each target
/// `v .. v + targets` in a sorted window, taken as the difference of two
/// greater-or-equal counts.
pub fn scr_count_window(window: &[Vid], v: Vid, targets: usize) -> Result<Vec<u64>> {
    if let Some(i) = window.windows(2).position(|w| w[0] > w[1]) {
        return Err(Error::Contract(format!(
            "reshaper window unsorted at {}",
            i + 1
        )));
    }
    let ge = |t: u64| -> usize {
        if t > Vid::MAX as u64 {
            0
        } else {
            set_count(window, t as Vid, CountMode::GreaterEqual)
        }
    };
    Ok((0..targets as u64)
        .map(|i| {
            let t = v as u64 + i;
            (ge(t) - ge(t + 1)) as u64
        })
        .collect())
}

/// Builds the `n + 1` pointer array from a sorted edge array.
///
/// Two counters walk the input: the first active target `v` and the
/// position `pos` of the first unconsumed edge. Each cycle the SCRs see a
/// window of `w_scr` edges and the targets `v .. v + n_scr`; edges that
/// belong to those targets are counted and consumed. If the window holds a
/// larger destination, or the input is exhausted, every active target is
/// complete. Otherwise only the targets below the window's last
/// destination are.
pub fn reshape(sorted: &SortedCoo, cfg: ScrConfig) -> Result<(Vec<u64>, Cycles)> {
    cfg.validate()?;
    let n = sorted.node_count();
    let dst: Vec<Vid> = sorted.edges().iter().map(|e| e.dst).collect();
    if let Some(i) = dst.windows(2).position(|w| w[0] > w[1]) {
        return Err(Error::Contract(format!(
            "reshape input unsorted at {}",
            i + 1
        )));
    }
    let e = dst.len();
    let mut counts = vec![0u64; n];
    let (mut v, mut pos, mut cycles) = (0usize, 0usize, 0u64);
    while v < n {
        cycles += 1;
        let window = &dst[pos..(pos + cfg.w_scr).min(e)];
        let targets_end = (v + cfg.n_scr).min(n);
        let consumed = window.partition_point(|&d| (d as usize) < targets_end);
        for &d in &window[..consumed] {
            counts[d as usize] += 1;
        }
        pos += consumed;
        if consumed < window.len() || pos == e {
            v = targets_end;
        } else {
            v = v.max(window[consumed - 1] as usize);
        }
    }
    let mut pointers = Vec::with_capacity(n + 1);
    pointers.push(0u64);
    let mut acc = 0;
    for c in counts {
        acc += c;
        pointers.push(acc);
    }
    Ok((pointers, Cycles(cycles)))
}

/// First-seen renumbering of original VIDs. `originals[i]` is the VID
/// that was assigned new VID `i`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReindexMap {
    originals: Vec<Vid>,
    // Locates a hit; the cycle cost still follows the segment scan.
    position: HashMap<Vid, Vid>,
}

impl ReindexMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn originals(&self) -> &[Vid] {
        &self.originals
    }

    /// Counter of mappings made so far; the next new VID.
    pub fn next_counter(&self) -> usize {
        self.originals.len()
    }

    pub fn len(&self) -> usize {
        self.originals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.originals.is_empty()
    }

    pub fn original(&self, new_vid: Vid) -> Option<Vid> {
        self.originals.get(new_vid as usize).copied()
    }

    pub fn get(&self, original: Vid) -> Option<Vid> {
        self.position.get(&original).copied()
    }

    /// Returns `(new VID, hit)`. On a miss the counter value becomes the
    /// new VID and the counter increments. The mapping store is scanned
    /// in segments of `n_scr * w_scr` entries, each reduced by a filter
    /// tree, so a lookup costs `max(1, ceil(|map| / (n_scr * w_scr)))`.
    pub fn lookup(&mut self, v: Vid, cfg: ScrConfig) -> (Vid, bool, Cycles) {
        let segments = (self.originals.len() as u64)
            .div_ceil(cfg.lanes() as u64)
            .max(1);
        if let Some(&new) = self.position.get(&v) {
            return (new, true, Cycles(segments));
        }
        let new = self.originals.len() as Vid;
        self.originals.push(v);
        self.position.insert(v, new);
        (new, false, Cycles(segments))
    }

    /// Renumbers a stream against this map, extending it as needed.
    pub fn extend_stream(&mut self, vids: &[Vid], cfg: ScrConfig) -> (Vec<Vid>, Cycles) {
        let mut cycles = Cycles::ZERO;
        let out = vids
            .iter()
            .map(|&v| {
                let (new, _, c) = self.lookup(v, cfg);
                cycles += c;
                new
            })
            .collect();
        (out, cycles)
    }
}

pub fn reindex_lookup(map: &mut ReindexMap, v: Vid, cfg: ScrConfig) -> (Vid, bool, Cycles) {
    map.lookup(v, cfg)
}

pub fn reindex_stream(vids: &[Vid], cfg: ScrConfig) -> (Vec<Vid>, ReindexMap, Cycles) {
    let mut map = ReindexMap::new();
    let (out, cycles) = map.extend_stream(vids, cfg);
    (out, map, cycles)
}
