//! Data-parallel batch helpers.
//!
//! Certificates, problem verification and parameter sweeps all reduce to
//! "evaluate an independent function over a slice of inputs". With the
//! `parallel` feature (on by default) those batches run on the rayon pool;
//! without it they run sequentially with the same signature.
//!
//! Determinism note: callers collect the mapped values into a `Vec` and
//! reduce sequentially afterwards, so results are bit-identical whichever
//! backend is active and however many threads rayon uses.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
///
/// Runs on the rayon pool when the `parallel` feature is enabled.
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential variant, kept available under either feature set so the bench
/// suite can compare the two on identical workloads.
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_and_preserve_order() {
        let items: Vec<u64> = (0..257).collect();
        let f = |x: &u64| x.wrapping_mul(0x9e3779b97f4a7c15).rotate_left(17);
        assert_eq!(map_collect(&items, f), map_collect_seq(&items, f));
    }
}
