// SPDX-License-Identifier: Apache-2.0

//! Rayon-backed executor.

use cubegof_core::Executor;
use rayon::prelude::*;

/// Spreads blocks over the global rayon pool.
///
/// Inside a pool worker the blocks run sequentially instead: lazily built
/// tables are guarded by one-shot cells, and a worker that waits on its own
/// children could otherwise steal a job blocked on the cell it is filling.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl Executor for Parallel {
    fn map_blocks<T, F>(&self, blocks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if blocks <= 1 || rayon::current_thread_index().is_some() {
            (0..blocks).map(f).collect()
        } else {
            (0..blocks).into_par_iter().map(f).collect()
        }
    }
}

/// Configures the global pool. Later calls are ignored.
pub fn init_threads(threads: Option<usize>) {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    let _ = b.build_global();
}
