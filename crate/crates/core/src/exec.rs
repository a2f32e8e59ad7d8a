//! Data-parallel helpers. With the `parallel` feature the per-index work is
//! spread over the rayon pool; without it the same closures run sequentially.
//! Every helper writes result `i` from closure call `i` only, so outputs do
//! not depend on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Collect `f(i)` for `i in 0..n`.
#[cfg(feature = "parallel")]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Collect `f(i, &items[i])`.
#[cfg(feature = "parallel")]
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(usize, &S) -> T + Sync + Send,
{
    items.par_iter().enumerate().map(|(i, s)| f(i, s)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    F: Fn(usize, &S) -> T,
{
    items.iter().enumerate().map(|(i, s)| f(i, s)).collect()
}

/// Apply `f(i, &mut items[i])` to every element.
#[cfg(feature = "parallel")]
pub fn for_each_mut<S, F>(items: &mut [S], f: F)
where
    S: Send,
    F: Fn(usize, &mut S) + Sync + Send,
{
    items.par_iter_mut().enumerate().for_each(|(i, s)| f(i, s));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_mut<S, F>(items: &mut [S], f: F)
where
    F: Fn(usize, &mut S),
{
    items.iter_mut().enumerate().for_each(|(i, s)| f(i, s));
}

/// Run two closures, concurrently when the pool allows it.
#[cfg(feature = "parallel")]
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA,
    B: FnOnce() -> RB,
{
    (a(), b())
}

/// Number of worker threads the helpers above will use.
pub fn worker_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Run `f` on a dedicated pool of `threads` workers (sequentially when the
/// `parallel` feature is off).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .expect("failed to build worker pool");
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
