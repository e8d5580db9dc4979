// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

/// Runs independent Monte Carlo blocks. Implementations must return results
/// in block order so merged outputs are scheduling independent.
pub trait Executor: Sync {
    fn map_blocks<T, F>(&self, blocks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs blocks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_blocks<T, F>(&self, blocks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..blocks).map(f).collect()
    }
}
