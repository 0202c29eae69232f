//! Set-partitioning and set-counting, the two primitives every engine is
//! built from.
//!
//! Partitioning runs a condition array through a layered adder network to
//! get each surviving element's exclusive write index, then moves the
//! elements left through a layered shift network. Both networks have
//! `ceil(log2 L)` layers. Counting compares every lane against a target
//! and reduces the one-bit results with an adder tree.

use crate::error::{Error, Result};
use crate::graph::Vid;

/// Exclusive write indices: `offsets[i]` is the number of true conditions
/// strictly before `i`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DisplacementArray {
    offsets: Vec<usize>,
    total: usize,
}

impl DisplacementArray {
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Number of true conditions in the whole array.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Wraps precomputed offsets. Used by callers that want to hand
    /// [`relocate`] something other than the network's output.
    pub fn from_offsets(offsets: Vec<usize>, total: usize) -> Self {
        Self { offsets, total }
    }
}

/// Number of layers in a log-depth network over `len` lanes.
pub fn network_depth(len: usize) -> u32 {
    if len <= 1 {
        0
    } else {
        usize::BITS - (len - 1).leading_zeros()
    }
}

/// Layered scan: layer `j` adds the partial sum `2^j` lanes to the left,
/// then the inclusive result is shifted one lane to become exclusive.
pub fn exclusive_prefix_sum(cond: &[bool]) -> DisplacementArray {
    let len = cond.len();
    let mut acc: Vec<usize> = cond.iter().map(|&c| c as usize).collect();
    let mut next = acc.clone();
    for layer in 0..network_depth(len) {
        let stride = 1usize << layer;
        next[..stride.min(len)].copy_from_slice(&acc[..stride.min(len)]);
        for i in stride..len {
            next[i] = acc[i] + acc[i - stride];
        }
        std::mem::swap(&mut acc, &mut next);
    }
    let total = acc.last().copied().unwrap_or(0);
    let mut offsets = Vec::with_capacity(len);
    if len > 0 {
        offsets.push(0);
        offsets.extend_from_slice(&acc[..len - 1]);
    }
    DisplacementArray { offsets, total }
}

/// Compacts the elements whose condition is set to the front, preserving
/// their order. Each element moves left by `i - offsets[i]`; layer `j`
/// applies bit `j` of that distance.
pub fn relocate(values: &[u64], cond: &[bool], disp: &DisplacementArray) -> Result<Vec<u64>> {
    let len = values.len();
    if cond.len() != len || disp.len() != len {
        return Err(Error::Contract(format!(
            "relocate lengths differ: values {len}, conditions {}, displacements {}",
            cond.len(),
            disp.len()
        )));
    }
    let mut running = 0usize;
    for (i, (&c, &d)) in cond.iter().zip(disp.offsets()).enumerate() {
        if d != running {
            return Err(Error::Contract(format!(
                "displacement {d} at {i} does not match the condition prefix count {running}"
            )));
        }
        running += c as usize;
    }
    if running != disp.total() {
        return Err(Error::Contract(format!(
            "displacement total {} does not match {running} set conditions",
            disp.total()
        )));
    }

    // Lanes carry (value, remaining distance); the AND with the condition
    // clears lanes that do not survive.
    let mut lanes: Vec<Option<(u64, usize)>> = (0..len)
        .map(|i| cond[i].then(|| (values[i], i - disp.offsets()[i])))
        .collect();
    let mut next: Vec<Option<(u64, usize)>> = vec![None; len];
    for layer in 0..network_depth(len) {
        let step = 1usize << layer;
        next.fill(None);
        for (pos, lane) in lanes.iter().enumerate() {
            let Some((v, dist)) = *lane else { continue };
            let to = if dist & step != 0 { pos - step } else { pos };
            if next[to].is_some() {
                return Err(Error::Contract(format!(
                    "relocation collision at lane {to}"
                )));
            }
            next[to] = Some((v, dist & !step));
        }
        std::mem::swap(&mut lanes, &mut next);
    }
    let out: Vec<u64> = lanes[..running]
        .iter()
        .map(|lane| lane.expect("compacted prefix is dense").0)
        .collect();
    debug_assert!(lanes[running..].iter().all(Option::is_none));
    Ok(out)
}

/// Stable split into (condition true, condition false).
pub fn set_partition(values: &[u64], cond: &[bool]) -> Result<(Vec<u64>, Vec<u64>)> {
    if values.len() != cond.len() {
        return Err(Error::Contract(format!(
            "set_partition lengths differ: values {}, conditions {}",
            values.len(),
            cond.len()
        )));
    }
    let taken = relocate(values, cond, &exclusive_prefix_sum(cond))?;
    let negated: Vec<bool> = cond.iter().map(|c| !c).collect();
    let rest = relocate(values, &negated, &exclusive_prefix_sum(&negated))?;
    Ok((taken, rest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    GreaterEqual,
    Equal,
}

/// Comparator array against `threshold`, reduced by an adder tree.
pub fn set_count(values: &[Vid], threshold: Vid, mode: CountMode) -> usize {
    let hits: Vec<usize> = values
        .iter()
        .map(|&v| match mode {
            CountMode::GreaterEqual => (v >= threshold) as usize,
            CountMode::Equal => (v == threshold) as usize,
        })
        .collect();
    adder_tree(hits)
}

fn adder_tree(mut level: Vec<usize>) -> usize {
    while level.len() > 1 {
        level = level.chunks(2).map(|p| p.iter().sum()).collect();
    }
    level.first().copied().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &[u8]) -> Vec<bool> {
        s.iter().map(|&b| b != 0).collect()
    }

    #[test]
    fn prefix_sum_examples() {
        let d = exclusive_prefix_sum(&bits(&[1, 0, 1, 1]));
        assert_eq!(d.offsets(), &[0, 1, 1, 2]);
        assert_eq!(d.total(), 3);
        assert_eq!(
            exclusive_prefix_sum(&bits(&[0, 0, 0, 0])).offsets(),
            &[0, 0, 0, 0]
        );
        let empty = exclusive_prefix_sum(&[]);
        assert!(empty.is_empty());
        assert_eq!(empty.total(), 0);
    }

    #[test]
    fn relocate_examples() {
        let c = bits(&[1, 0, 1, 1]);
        let d = exclusive_prefix_sum(&c);
        assert_eq!(relocate(&[5, 9, 2, 7], &c, &d).unwrap(), vec![5, 2, 7]);

        let all = vec![true; 4];
        assert_eq!(
            relocate(&[5, 9, 2, 7], &all, &exclusive_prefix_sum(&all)).unwrap(),
            vec![5, 9, 2, 7]
        );
        let none = vec![false; 4];
        assert!(relocate(&[5, 9, 2, 7], &none, &exclusive_prefix_sum(&none))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn relocate_rejects_inconsistent_displacements() {
        let c = bits(&[1, 0, 1, 1]);
        let wrong = DisplacementArray::from_offsets(vec![0, 1, 2, 2], 3);
        assert!(matches!(
            relocate(&[5, 9, 2, 7], &c, &wrong),
            Err(Error::Contract(_))
        ));
        let short = DisplacementArray::from_offsets(vec![0, 1], 1);
        assert!(relocate(&[5, 9, 2, 7], &c, &short).is_err());
    }

    #[test]
    fn partition_examples() {
        let (t, f) = set_partition(&[5, 9, 2, 7], &bits(&[1, 0, 1, 1])).unwrap();
        assert_eq!((t, f), (vec![5, 2, 7], vec![9]));
        let (t, f) = set_partition(&[], &[]).unwrap();
        assert!(t.is_empty() && f.is_empty());
        let alt: Vec<bool> = (0..9).map(|i| i % 2 == 0).collect();
        let vals: Vec<u64> = (10..19).collect();
        let (t, f) = set_partition(&vals, &alt).unwrap();
        assert_eq!(t, vec![10, 12, 14, 16, 18]);
        assert_eq!(f, vec![11, 13, 15, 17]);
    }

    #[test]
    fn count_examples() {
        assert_eq!(set_count(&[0, 0, 1, 3], 1, CountMode::GreaterEqual), 2);
        assert_eq!(set_count(&[0, 0, 1, 3], 0, CountMode::GreaterEqual), 4);
        assert_eq!(set_count(&[0, 0, 1, 3], 0, CountMode::Equal), 2);
        assert_eq!(set_count(&[], 5, CountMode::Equal), 0);
    }

    #[test]
    fn depth() {
        assert_eq!(network_depth(0), 0);
        assert_eq!(network_depth(1), 0);
        assert_eq!(network_depth(2), 1);
        assert_eq!(network_depth(4), 2);
        assert_eq!(network_depth(5), 3);
        assert_eq!(network_depth(64), 6);
    }

    proptest! {
        #[test]
        fn relocate_output_length_is_popcount(cond in proptest::collection::vec(any::<bool>(), 0..300)) {
            let values: Vec<u64> = (0..cond.len() as u64).collect();
            let out = relocate(&values, &cond, &exclusive_prefix_sum(&cond)).unwrap();
            prop_assert_eq!(out.len(), cond.iter().filter(|&&c| c).count());
        }

        #[test]
        fn count_ge_complements_lt(values in proptest::collection::vec(0u32..50, 0..200), t in 0u32..60) {
            let lt = values.iter().filter(|&&v| v < t).count();
            prop_assert_eq!(set_count(&values, t, CountMode::GreaterEqual) + lt, values.len());
        }
    }
}
