//! Deterministic parallel replication.
//!
//! Replicate `i` always draws from `RngStream::child(i)` of the base stream, so
//! results do not depend on the number of worker threads or on scheduling.

use rayon::prelude::*;

use crate::numerics::RngStream;

/// Runs `f` on replicates `0..reps` in parallel, each with its own child stream.
pub fn replicate<T, F>(base: &RngStream, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut RngStream) -> T + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = base.child(i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Like [`replicate`] with a per-thread scratch value created by `init`.
pub fn replicate_with<T, S, I, F>(base: &RngStream, reps: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(usize, &mut RngStream, &mut S) -> T + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map_init(init, |scratch, i| {
            let mut rng = base.child(i as u64);
            f(i, &mut rng, scratch)
        })
        .collect()
}
