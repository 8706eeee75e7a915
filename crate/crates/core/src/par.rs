//! Data-parallel map with a sequential fallback.
//!
//! Results are always collected in index order, so reductions performed by
//! callers over the returned vector are bit-identical whichever mode runs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn from_workers(workers: usize) -> Self {
        if workers == 1 {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(usize, &S) -> T + Sync + Send,
    {
        self.map_range(items.len(), |i| f(i, &items[i]))
    }

    pub fn try_map_range<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map_range(n, f).into_iter().collect()
    }
}

/// Installs a global worker pool of `workers` threads. Zero keeps the default.
pub fn configure_workers(workers: usize) {
    #[cfg(feature = "parallel")]
    if workers > 1 {
        // a second call fails harmlessly when the pool is already built
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let f = |i: usize| (i as f64).sqrt() * 1.5;
        let a = Exec::Sequential.map_range(1000, f);
        let b = Exec::Parallel.map_range(1000, f);
        assert_eq!(a, b);
        assert_eq!(a[9], 4.5);
    }
}
