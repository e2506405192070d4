//! Sequential or rayon-backed execution of independent work items.
//!
//! Work items are indexed and results come back in index order, so the
//! output never depends on the mode or the number of threads.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ExecMode {
    Sequential,
    /// Rayon's global pool. Falls back to sequential without the `parallel`
    /// feature.
    #[default]
    Parallel,
}

impl ExecMode {
    /// `f(0), …, f(len − 1)` in order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            ExecMode::Sequential => (0..len).map(f).collect(),
            ExecMode::Parallel => parallel_map(len, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}
