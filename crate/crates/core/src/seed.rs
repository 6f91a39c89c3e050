//! Per-task seeds derived from one global seed.
//!
//! Task `i` of a run seeded with `s` uses `splitmix64(s ^ splitmix64(i))`, so
//! the seed of a task depends only on its index. Parallel and serial runs
//! therefore draw identical random numbers.

/// One round of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn task_seed(global: u64, index: u64) -> u64 {
    splitmix64(global ^ splitmix64(index))
}

/// Seed of task `index` within stream `stream` (e.g. circuits vs. shots).
pub fn stream_seed(global: u64, stream: u64, index: u64) -> u64 {
    task_seed(task_seed(global, stream), index)
}
