//! Work distribution and timing hooks.

use alloc::vec::Vec;
use core::ops::Range;

/// Splits `n` items into `workers` contiguous ranges whose sizes differ by
/// at most one; earlier workers get the larger share.
pub fn partition_ranges(n: usize, workers: usize) -> Vec<Range<usize>> {
    let workers = workers.max(1);
    let base = n / workers;
    let extra = n % workers;
    let mut out = Vec::with_capacity(workers);
    let mut start = 0;
    for w in 0..workers {
        let len = base + usize::from(w < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Per-worker assignment of `nodes`, preserving input order.
pub fn partition_nodes<T: Clone>(nodes: &[T], workers: usize) -> Vec<Vec<T>> {
    partition_ranges(nodes.len(), workers)
        .into_iter()
        .map(|r| nodes[r].to_vec())
        .collect()
}

/// Runs a batch of independent jobs. Implementations must return results
/// in job order; returning acts as the stage barrier.
pub trait Executor: Sync {
    fn workers(&self) -> usize;

    fn map<J, R, F>(&self, jobs: &[J], f: F) -> Vec<R>
    where
        J: Sync,
        R: Send,
        F: Fn(&J) -> R + Sync;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn workers(&self) -> usize {
        1
    }

    fn map<J, R, F>(&self, jobs: &[J], f: F) -> Vec<R>
    where
        J: Sync,
        R: Send,
        F: Fn(&J) -> R + Sync,
    {
        jobs.iter().map(f).collect()
    }
}

/// Elapsed time source for time limits.
pub trait Clock {
    fn elapsed_ms(&self) -> u64;
}

/// A clock that never advances.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_ms(&self) -> u64 {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let sizes: Vec<usize> = partition_ranges(10, 4).iter().map(|r| r.len()).collect();
        assert_eq!(sizes, alloc::vec![3, 3, 2, 2]);
        let parts = partition_nodes(&[7], 4);
        assert_eq!(parts.iter().filter(|p| !p.is_empty()).count(), 1);
        assert_eq!(parts[0], alloc::vec![7]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn disjoint_cover_with_balanced_sizes(
            nodes in proptest::collection::vec(any::<u32>(), 0..200),
            workers in 1usize..17,
        ) {
            let parts = partition_nodes(&nodes, workers);
            prop_assert_eq!(parts.len(), workers);
            let flat: Vec<u32> = parts.iter().flatten().copied().collect();
            prop_assert_eq!(&flat, &nodes);
            let min = parts.iter().map(Vec::len).min().unwrap();
            let max = parts.iter().map(Vec::len).max().unwrap();
            prop_assert!(max - min <= 1);
        }
    }
}
