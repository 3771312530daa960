//! Execution strategy for the data-parallel loops (sweeps, window
//! certification, cut enumeration).
//!
//! With the `parallel` feature enabled (the default) work is spread over the
//! rayon thread pool; without it every call runs sequentially. Results are
//! always returned in input order, so output never depends on scheduling.

/// How a batch of independent jobs is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential execution when built without `parallel`.
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
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Returns the smallest index in `0..n` for which `f` yields `Some`, along
/// with its value. Deterministic regardless of execution strategy.
pub fn find_first<R, F>(exec: Execution, n: usize, f: F) -> Option<(usize, R)>
where
    R: Send,
    F: Fn(usize) -> Option<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .filter_map(|i| f(i).map(|r| (i, r)))
            .min_by_key(|(i, _)| *i);
    }
    let _ = exec;
    (0..n).find_map(|i| f(i).map(|r| (i, r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let a = map(Execution::Sequential, &items, |x| x * x);
        let b = map(Execution::Parallel, &items, |x| x * x);
        assert_eq!(a, b);
        let fa = find_first(Execution::Sequential, 1000, |i| (i % 97 == 96).then_some(i));
        let fb = find_first(Execution::Parallel, 1000, |i| (i % 97 == 96).then_some(i));
        assert_eq!(fa, Some((96, 96)));
        assert_eq!(fa, fb);
    }
}
