//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the rayon
//! global pool; without it every [`Schedule`] runs sequentially. Results are
//! always collected in index order, so both schedules produce identical
//! output.

/// How an index-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Sequential,
    Parallel,
}

impl Default for Schedule {
    fn default() -> Self {
        if is_parallel_available() {
            Schedule::Parallel
        } else {
            Schedule::Sequential
        }
    }
}

#[inline]
pub fn is_parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// Evaluates `f(0..count)` and returns the results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<U, F>(schedule: Schedule, count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match schedule {
        Schedule::Parallel => (0..count).into_par_iter().map(f).collect(),
        Schedule::Sequential => (0..count).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F>(_schedule: Schedule, count: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..count).map(f).collect()
}

/// Maps over a slice, preserving order.
#[cfg(feature = "parallel")]
pub fn map_slice<T, U, F>(schedule: Schedule, data: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match schedule {
        Schedule::Parallel => data.par_iter().map(f).collect(),
        Schedule::Sequential => data.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, U, F>(_schedule: Schedule, data: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    data.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_agree() {
        let a = map_indexed(Schedule::Sequential, 1000, |i| (i * i) as u64 % 97);
        let b = map_indexed(Schedule::Parallel, 1000, |i| (i * i) as u64 % 97);
        assert_eq!(a, b);
        let c = map_slice(Schedule::Parallel, &a, |v| v + 1);
        assert_eq!(c[3], a[3] + 1);
    }
}
