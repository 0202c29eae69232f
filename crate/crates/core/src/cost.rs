//! Closed-form cycle estimates, the hardware variant catalog, the planner
//! that scores every UPE x SCR pair, and the reconfiguration decision.
//!
//! Cost functions, for `n` nodes, `e` edges, `l` layers, fanout `k` and
//! batch size `b`:
//!
//! ```text
//! ordering   m = max(0, log2(e / w_upe) - 1),  ceil(2 m e / (n_upe w_upe))
//! selecting  s = b k^(l+1) - 1,                ceil(s / n_upe)
//! reshaping  ceil(max(n / n_scr, e / w_scr))
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scr::ScrConfig;
use crate::upe::UpeConfig;

pub const CATALOG_SIZE: usize = 10;
pub const DEFAULT_UPE_CAPACITY: usize = 16384;
pub const DEFAULT_SCR_CAPACITY: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WorkloadParams {
    pub n: u64,
    pub e: u64,
    pub layers: u32,
    pub fanout: u64,
    pub batch: u64,
}

impl WorkloadParams {
    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.e as f64 / self.n as f64
        }
    }

    /// `b * k^(l+1)`, the sampled-tree size the selection cost is built on.
    pub fn sampled_tree(&self) -> Result<u64> {
        let exp = self
            .layers
            .checked_add(1)
            .ok_or(Error::Overflow("selection size"))?;
        self.fanout
            .checked_pow(exp)
            .and_then(|p| p.checked_mul(self.batch))
            .ok_or(Error::Overflow("selection size"))
    }

    /// Upper bound on the sampled subgraph: `e' = min(e, b k^(l+1))` and
    /// `n' = min(n, b + e')`.
    pub fn subgraph_bound(&self) -> WorkloadParams {
        let e = self.sampled_tree().map_or(self.e, |s| s.min(self.e));
        let n = self.batch.saturating_add(e).min(self.n);
        WorkloadParams { n, e, ..*self }
    }
}

pub fn cost_ordering(p: &WorkloadParams, c: UpeConfig) -> u64 {
    if p.e == 0 {
        return 0;
    }
    let m = ((p.e as f64 / c.w_upe as f64).log2() - 1.0).max(0.0);
    (2.0 * m * p.e as f64 / c.lanes() as f64).ceil() as u64
}

pub fn cost_selecting(p: &WorkloadParams, c: UpeConfig) -> Result<u64> {
    let s = p.sampled_tree()?.saturating_sub(1);
    Ok(s.div_ceil(c.n_upe as u64))
}

pub fn cost_reshaping(p: &WorkloadParams, c: ScrConfig) -> u64 {
    p.n.div_ceil(c.n_scr as u64)
        .max(p.e.div_ceil(c.w_scr as u64))
}

/// Per-stage estimate for one preprocessing run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub ordering: u64,
    pub selecting: u64,
    pub reshaping: u64,
    pub subgraph_ordering: u64,
    pub subgraph_reshaping: u64,
    pub total: u64,
}

impl CostBreakdown {
    pub fn seconds(&self, clock_hz: f64) -> f64 {
        self.total as f64 / clock_hz
    }

    pub fn millis(&self, clock_hz: f64) -> f64 {
        self.seconds(clock_hz) * 1e3
    }
}

/// Full-graph conversion, selection, and conversion of the subgraph at
/// its upper-bound size.
pub fn estimate_total(p: &WorkloadParams, upe: UpeConfig, scr: ScrConfig) -> Result<CostBreakdown> {
    let sub = p.subgraph_bound();
    let mut b = CostBreakdown {
        ordering: cost_ordering(p, upe),
        selecting: cost_selecting(p, upe)?,
        reshaping: cost_reshaping(p, scr),
        subgraph_ordering: cost_ordering(&sub, upe),
        subgraph_reshaping: cost_reshaping(&sub, scr),
        total: 0,
    };
    b.total = [
        b.ordering,
        b.selecting,
        b.reshaping,
        b.subgraph_ordering,
        b.subgraph_reshaping,
    ]
    .into_iter()
    .try_fold(0u64, u64::checked_add)
    .ok_or(Error::Overflow("total cost"))?;
    Ok(b)
}

/// Pre-built hardware variants. Within a family each entry halves the
/// width and doubles the count of the previous one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantCatalog {
    pub upe_variants: Vec<UpeConfig>,
    pub scr_variants: Vec<ScrConfig>,
}

pub fn generate_catalog(upe_capacity: usize, scr_capacity: usize) -> Result<VariantCatalog> {
    generate_catalog_sized(upe_capacity, scr_capacity, CATALOG_SIZE)
}

/// `size` variants per family: `(2^i, capacity / 2^i)` for `i < size`.
pub fn generate_catalog_sized(
    upe_capacity: usize,
    scr_capacity: usize,
    size: usize,
) -> Result<VariantCatalog> {
    if size == 0 || size > 32 {
        return Err(Error::InvalidConfig(format!(
            "catalog size must be in 1..=32, got {size}"
        )));
    }
    let family = |capacity: usize, min_width: usize, what: &str| -> Result<Vec<(usize, usize)>> {
        if !capacity.is_power_of_two() || capacity >> (size - 1) < min_width {
            return Err(Error::InvalidConfig(format!(
                "{what} capacity {capacity} must be a power of two of at least {} for {size} variants",
                min_width << (size - 1)
            )));
        }
        Ok((0..size).map(|i| (1 << i, capacity >> i)).collect())
    };
    let upe_variants = family(upe_capacity, 2, "UPE")?
        .into_iter()
        .map(|(n, w)| UpeConfig::new(n, w))
        .collect::<Result<_>>()?;
    let scr_variants = family(scr_capacity, 1, "SCR")?
        .into_iter()
        .map(|(n, w)| ScrConfig::new(n, w))
        .collect::<Result<_>>()?;
    Ok(VariantCatalog {
        upe_variants,
        scr_variants,
    })
}

impl Default for VariantCatalog {
    fn default() -> Self {
        generate_catalog(DEFAULT_UPE_CAPACITY, DEFAULT_SCR_CAPACITY)
            .expect("default capacities are valid")
    }
}

/// A UPE and SCR configuration loaded together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfigPair {
    pub upe: UpeConfig,
    pub scr: ScrConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub config: ConfigPair,
    pub cost: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub workload: WorkloadParams,
    pub best: ScoredPair,
    /// Every pair, UPE-major in catalog order.
    pub scores: Vec<ScoredPair>,
}

impl Plan {
    pub const CSV_HEADER: &'static str = "n_upe,w_upe,n_scr,w_scr,ordering,selecting,reshaping,subgraph_ordering,subgraph_reshaping,total_cycles,est_ms";

    pub fn scores_csv(&self, clock_hz: f64) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for s in &self.scores {
            let (u, r, c) = (s.config.upe, s.config.scr, s.cost);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{:.6}",
                u.n_upe,
                u.w_upe,
                r.n_scr,
                r.w_scr,
                c.ordering,
                c.selecting,
                c.reshaping,
                c.subgraph_ordering,
                c.subgraph_reshaping,
                c.total,
                c.millis(clock_hz)
            )
            .unwrap();
        }
        out
    }
}

/// Scores every pair in the catalog and keeps the cheapest. Ties go to
/// the larger UPE count, then the larger SCR count.
pub fn select_config(p: &WorkloadParams, cat: &VariantCatalog) -> Result<Plan> {
    if cat.upe_variants.is_empty() || cat.scr_variants.is_empty() {
        return Err(Error::InvalidConfig("catalog has no variants".into()));
    }
    let mut scores = Vec::with_capacity(cat.upe_variants.len() * cat.scr_variants.len());
    for &upe in &cat.upe_variants {
        for &scr in &cat.scr_variants {
            scores.push(ScoredPair {
                config: ConfigPair { upe, scr },
                cost: estimate_total(p, upe, scr)?,
            });
        }
    }
    let best = *scores
        .iter()
        .min_by_key(|s| {
            (
                s.cost.total,
                std::cmp::Reverse(s.config.upe.n_upe),
                std::cmp::Reverse(s.config.scr.n_scr),
            )
        })
        .expect("non-empty");
    Ok(Plan {
        workload: *p,
        best,
        scores,
    })
}

/// Reconfiguration costs and the knobs of the switch-or-stay decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconfigPolicy {
    /// Both regions reprogrammed.
    pub full_penalty_ms: f64,
    pub load_ms: f64,
    pub program_ms: f64,
    /// Device area split between the UPE and SCR regions.
    pub upe_area_share: f64,
    pub scr_area_share: f64,
    /// Upcoming runs over which a saving is amortized.
    pub horizon: u32,
    /// Relative drift in edge count or mean degree that triggers
    /// re-planning.
    pub drift_threshold: f64,
}

impl Default for ReconfigPolicy {
    fn default() -> Self {
        Self {
            full_penalty_ms: 230.0,
            load_ms: 3.0,
            program_ms: 225.0,
            upe_area_share: 0.7,
            scr_area_share: 0.3,
            horizon: 1,
            drift_threshold: 0.10,
        }
    }
}

impl ReconfigPolicy {
    /// Only regions whose variant changes are reprogrammed; one region
    /// costs half of a full reconfiguration.
    pub fn penalty_ms(&self, current: ConfigPair, candidate: ConfigPair) -> f64 {
        let changed = (current.upe != candidate.upe) as u32 + (current.scr != candidate.scr) as u32;
        match changed {
            0 => 0.0,
            1 => self.full_penalty_ms / 2.0,
            _ => self.full_penalty_ms,
        }
    }

    /// Whether `now` has drifted far enough from `planned` to re-plan.
    pub fn drifted(&self, planned: &WorkloadParams, now: &WorkloadParams) -> bool {
        let rel = |a: f64, b: f64| {
            if a == 0.0 {
                b != 0.0
            } else {
                ((b - a) / a).abs() > self.drift_threshold
            }
        };
        rel(planned.e as f64, now.e as f64) || rel(planned.mean_degree(), now.mean_degree())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconfigDecision {
    pub reconfigure: bool,
    pub penalty_ms: f64,
    pub saving_ms_per_run: f64,
}

/// Switch when the per-run saving over the horizon exceeds the penalty.
pub fn reconfig_decision(
    current: ConfigPair,
    candidate: ConfigPair,
    p: &WorkloadParams,
    pol: &ReconfigPolicy,
    clock_hz: f64,
) -> Result<ReconfigDecision> {
    let now = estimate_total(p, current.upe, current.scr)?.millis(clock_hz);
    let then = estimate_total(p, candidate.upe, candidate.scr)?.millis(clock_hz);
    let saving = now - then;
    let penalty = pol.penalty_ms(current, candidate);
    Ok(ReconfigDecision {
        reconfigure: current != candidate && saving * pol.horizon as f64 > penalty,
        penalty_ms: penalty,
        saving_ms_per_run: saving,
    })
}
