use enkf::RngStream;
use rayon::prelude::*;

use crate::LabError;

/// Random stream of Monte Carlo run `run`: stream id `seed + run`.
pub fn run_stream(seed: u64, run: usize) -> RngStream {
    RngStream::new(seed, seed.wrapping_add(run as u64))
}

/// Executes `task(run, stream)` for `run in 0..runs` on `threads` workers
/// (0 for the rayon default) and returns the results in run order. The
/// failure with the lowest run index is reported.
pub fn mc_driver<T, F>(runs: usize, seed: u64, threads: usize, task: F) -> Result<Vec<T>, LabError>
where
    T: Send,
    F: Fn(usize, RngStream) -> Result<T, LabError> + Sync,
{
    if runs == 0 {
        return Err(LabError::Config("at least one Monte Carlo run is required".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<T, LabError>> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|run| task(run, run_stream(seed, run)))
            .collect()
    });
    outcomes
        .into_iter()
        .enumerate()
        .map(|(run, r)| {
            r.map_err(|source| LabError::Run {
                run,
                source: Box::new(source),
            })
        })
        .collect()
}
