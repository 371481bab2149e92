//! Execution strategy for fanning independent point evaluations out.
//!
//! The default build pulls in rayon and runs point loops data-parallel;
//! compiling with `--no-default-features` removes the dependency and every
//! run is sequential. Either way results are collected in input order, so
//! reports are byte-identical across modes.

/// How to evaluate a batch of independent points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExecMode {
    /// One point after another on the calling thread.
    Sequential,
    /// Work-stealing across threads (falls back to sequential without the
    /// `parallel` feature).
    #[default]
    Parallel,
}

/// Maps `f` over `0..count`, preserving index order in the output.
pub fn map_indexed<T, F>(mode: ExecMode, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..count).map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..count).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..count).map(f).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved_in_both_modes() {
        let seq = map_indexed(ExecMode::Sequential, 100, |i| i * i);
        let par = map_indexed(ExecMode::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }
}
