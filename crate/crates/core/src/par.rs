//! Order-preserving data-parallel helpers.
//!
//! With the `parallel` feature (default) work items are spread over the rayon
//! pool; without it everything runs on the calling thread. Either way results
//! come back in input order, so downstream reductions are deterministic.
//!
//! [`sequential_scope`] forces the sequential path for the current thread,
//! which lets the benches compare both paths in one binary.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Name of the compiled-in execution backend.
pub const BACKEND: &str = if cfg!(feature = "parallel") {
    "rayon"
} else {
    "sequential"
};

/// Guard returned by [`sequential_scope`]; restores the previous mode on drop.
pub struct SequentialGuard {
    previous: bool,
}

impl Drop for SequentialGuard {
    fn drop(&mut self) {
        FORCE_SEQUENTIAL.with(|f| f.set(self.previous));
    }
}

/// Run every `par::*` call made from this thread sequentially until the guard drops.
pub fn sequential_scope() -> SequentialGuard {
    let previous = FORCE_SEQUENTIAL.with(|f| f.replace(true));
    SequentialGuard { previous }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.with(|f| f.get())
}

/// Map `f` over `items`, keeping input order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Map `f` over `0..n`, keeping index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_keeps_order() {
        let v: Vec<u64> = (0..1000).collect();
        let out = map(&v, |x| x * x);
        assert!(out.iter().enumerate().all(|(i, &y)| y == (i * i) as u64));
    }

    #[test]
    fn sequential_scope_restores() {
        {
            let _g = sequential_scope();
            assert!(!is_parallel());
            let out = map_range(10, |i| i + 1);
            assert_eq!(out, (1..11).collect::<Vec<_>>());
        }
        assert_eq!(is_parallel(), cfg!(feature = "parallel"));
    }
}
