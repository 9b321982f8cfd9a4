//! Thread pool executor and wall clock.

use std::time::Instant;

use modcap_core::sddip::exec::{partition_ranges, Clock, Executor};

/// Runs each batch on up to `workers` scoped threads, one contiguous chunk
/// per thread, and joins before returning.
#[derive(Clone, Copy, Debug)]
pub struct ThreadedExecutor {
    workers: usize,
}

impl ThreadedExecutor {
    pub fn new(workers: usize) -> Self {
        ThreadedExecutor {
            workers: workers.max(1),
        }
    }
}

impl Executor for ThreadedExecutor {
    fn workers(&self) -> usize {
        self.workers
    }

    fn map<J, R, F>(&self, jobs: &[J], f: F) -> Vec<R>
    where
        J: Sync,
        R: Send,
        F: Fn(&J) -> R + Sync,
    {
        if self.workers == 1 || jobs.len() < 2 {
            return jobs.iter().map(f).collect();
        }
        let f = &f;
        std::thread::scope(|s| {
            let handles: Vec<_> = partition_ranges(jobs.len(), self.workers)
                .into_iter()
                .filter(|r| !r.is_empty())
                .map(|r| {
                    let chunk = &jobs[r];
                    s.spawn(move || chunk.iter().map(f).collect::<Vec<R>>())
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
                .collect()
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn start() -> Self {
        WallClock {
            start: Instant::now(),
        }
    }
}

impl Clock for WallClock {
    fn elapsed_ms(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }
}
