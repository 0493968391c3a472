//! Execution policy for the data-parallel kernels.
//!
//! With the `parallel` feature (default) work is spread over rayon's pool;
//! without it every policy runs sequentially. Results never depend on the
//! policy: parallel maps preserve index order and reductions are done by the
//! caller over the ordered output.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecPolicy {
    Sequential,
    #[default]
    Parallel,
}

impl ExecPolicy {
    /// Parallel only when compiled in.
    pub fn effective(self) -> ExecPolicy {
        if cfg!(feature = "parallel") {
            self
        } else {
            ExecPolicy::Sequential
        }
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel, order preserved.
pub fn map_indexed<T, F>(policy: ExecPolicy, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match policy.effective() {
        #[cfg(feature = "parallel")]
        ExecPolicy::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Applies `f` to consecutive chunks of `data` of length `size`.
pub fn for_each_chunk<T, F>(policy: ExecPolicy, data: &mut [T], size: usize, f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Sync + Send,
{
    match policy.effective() {
        #[cfg(feature = "parallel")]
        ExecPolicy::Parallel => {
            use rayon::prelude::*;
            data.par_chunks_mut(size).for_each(f)
        }
        _ => data.chunks_mut(size).for_each(f),
    }
}

/// Sum of `f(i)` over `0..n`, combined in index order.
pub fn sum_indexed<F>(policy: ExecPolicy, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(policy, n, f).into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let a = map_indexed(ExecPolicy::Sequential, 1000, |i| i * i);
        let b = map_indexed(ExecPolicy::Parallel, 1000, |i| i * i);
        assert_eq!(a, b);
        let s = sum_indexed(ExecPolicy::Sequential, 100, |i| 1.0 / (i + 1) as f64);
        let p = sum_indexed(ExecPolicy::Parallel, 100, |i| 1.0 / (i + 1) as f64);
        assert_eq!(s, p);
    }

    #[test]
    fn chunks_cover_everything() {
        let mut v = vec![0u32; 64];
        for_each_chunk(ExecPolicy::Parallel, &mut v, 8, |c| {
            for x in c.iter_mut() {
                *x += 1
            }
        });
        assert!(v.iter().all(|x| *x == 1));
    }
}
