//! Parallel map helpers.
//!
//! Sweeps, spectrum scans, and the verification suite are embarrassingly
//! parallel over independent cells. `map` fans out over rayon when the
//! `parallel` feature is enabled and degrades to a plain sequential loop
//! otherwise; `map_seq` is always sequential and exists so benchmarks can
//! compare the two paths in one build. Output order always matches input
//! order.

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

/// Map `f` over `items` (sequential build).
#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Map `f` over `items` sequentially regardless of features.
pub fn map_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

/// Configure the global worker pool. Returns the effective worker count.
///
/// With the `parallel` feature off this is a no-op reporting one worker.
pub fn configure_workers(n: Option<usize>) -> usize {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = n {
            // Ignore the error if a pool already exists; rayon keeps the
            // first configuration in that case.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        1
    }
}
