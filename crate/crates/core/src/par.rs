//! Scenario-parallel maps with deterministic ordering.

use std::sync::Once;

use rayon::prelude::*;

/// Environment variable capping the worker count (`0` or unset = automatic).
pub const THREADS_ENV: &str = "CODIFFSP_THREADS";

/// Below this many scenarios work stays on the calling thread.
const PARALLEL_MIN: usize = 16;

static INIT: Once = Once::new();

/// Sizes the global pool from [`THREADS_ENV`]. Later calls are no-ops.
pub fn configure_threads() {
    INIT.call_once(|| {
        let n = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        if n > 0 {
            // A pool may already exist when embedded; keep it then.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}

/// `(0..count).map(f)` with results in index order.
pub fn map_scenarios<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if count < PARALLEL_MIN {
        (0..count).map(f).collect()
    } else {
        (0..count).into_par_iter().map(f).collect()
    }
}

/// Fallible variant of [`map_scenarios`]; the error of the lowest index wins.
pub fn try_map_scenarios<T, E, F>(count: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_scenarios(count, f).into_iter().collect()
}

/// `Σ_s w_s v_s` in ascending index order.
pub fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (w, v) in weights.iter().zip(values) {
        acc += w * v;
    }
    acc
}
