//! Sequential or rayon-backed evaluation of independent work items.
//!
//! Without the `parallel` feature every mode runs sequentially. Results are
//! always combined in item order, so both modes produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Sum `f(i, &mut item)` over all items.
    pub fn map_sum<T, F>(self, items: &mut [T], f: F) -> u64
    where
        T: Send,
        F: Fn(usize, &mut T) -> u64 + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter_mut().enumerate().map(|(i, t)| f(i, t)).sum(),
            _ => items.iter_mut().enumerate().map(|(i, t)| f(i, t)).sum(),
        }
    }

    /// `items.map(f)` collected in input order.
    pub fn map_collect<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }
}
