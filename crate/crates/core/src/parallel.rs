use crate::error::{Error, Result};

/// Runs `f` on a dedicated rayon pool with `workers` threads. All parallel
/// work inside the library executes on whichever pool is current.
pub fn with_workers<R, F>(workers: usize, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    if workers == 0 {
        return Err(Error::InvalidConfig("worker count must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
