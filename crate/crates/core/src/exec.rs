//! Execution policy for data-parallel work.
//!
//! With the `parallel` feature (the default) independent work items such as
//! sweep members or FFT rows are spread over the rayon pool. Without it every
//! entry point degrades to a plain sequential loop with identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows shorter than this are transformed sequentially even when the
/// `parallel` feature is on; task overhead dominates below it.
pub const ROW_PARALLEL_THRESHOLD: usize = 128;

/// Runtime choice between sequential and pooled execution.
///
/// `Parallel` silently behaves like `Sequential` when the crate is built
/// without the `parallel` feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be distributed over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Map `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.into_par_iter().map(f).collect();
        }
        items.into_iter().map(f).collect()
    }
}

/// Apply `f` to each contiguous chunk of `len` elements.
pub(crate) fn for_each_chunk<T, F>(data: &mut [T], len: usize, exec: Execution, f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && len >= ROW_PARALLEL_THRESHOLD {
        data.par_chunks_mut(len).for_each(f);
        return;
    }
    let _ = exec;
    data.chunks_mut(len).for_each(f);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_in_both_modes() {
        let items: Vec<u64> = (0..100).collect();
        let seq = Execution::Sequential.map(items.clone(), |x| x * x);
        let par = Execution::Parallel.map(items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }

    #[test]
    fn chunks_visit_everything() {
        let mut data = vec![1.0_f64; 4 * 256];
        for_each_chunk(&mut data, 256, Execution::Parallel, |row| {
            for x in row.iter_mut() {
                *x *= 2.0;
            }
        });
        assert!(data.iter().all(|&x| x == 2.0));
    }
}
