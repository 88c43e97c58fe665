//! Compile-time switch between rayon and sequential iteration.
//!
//! With the `parallel` feature (default) the helpers fan out over the current
//! rayon pool; without it they run on the calling thread. Results are always
//! returned in index order, so callers stay deterministic either way.

/// Sequential reference implementations, always available.
pub mod sequential {
    pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
    where
        F: Fn(usize) -> T,
    {
        (0..n).map(f).collect()
    }

    pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
    where
        F: Fn(&S) -> T,
    {
        items.iter().map(f).collect()
    }
}

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }

    pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        items.par_iter().map(f).collect()
    }

    pub fn with_jobs<R, F>(jobs: usize, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        if jobs == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }

    pub fn current_jobs() -> usize {
        rayon::current_num_threads()
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        super::sequential::map_range(n, f)
    }

    pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        super::sequential::map_slice(items, f)
    }

    pub fn with_jobs<R, F>(_jobs: usize, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        f()
    }

    pub fn current_jobs() -> usize {
        1
    }
}

/// Map `f` over `0..n`, collecting results in index order.
pub use imp::map_range;
/// Map `f` over a slice, collecting results in order.
pub use imp::map_slice;
/// Run `f` with at most `jobs` worker threads (`0` keeps the ambient pool).
pub use imp::with_jobs;
/// Number of worker threads available to [`map_range`].
pub use imp::current_jobs;
