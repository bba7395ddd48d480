//! Data-parallel batch gradient descent and the speedup/efficiency model.
//!
//! Each epoch splits the dataset into contiguous shards, one per worker
//! thread. Workers compute per-image gradients against the same read-only
//! parameter snapshot; after the join barrier the main thread folds those
//! gradients in dataset order and applies one update. Because the fold
//! order never depends on the worker count, an epoch produces bit-identical
//! parameters for every `n_workers`, including the serial case.
//!
//! Memory scales with dataset size times parameter count during an epoch
//! (one gradient set per image), which is fine at the desk scale this crate
//! targets.

use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::time::Instant;

use crate::backprop::GradientSet;
use crate::dataio::TrainingSample;
use crate::error::{Error, Result};
use crate::network::NetworkParams;
use crate::trainer::{ms_since, process_sample, train_epoch, EpochRecord, SampleStats, TimingProfile};

/// Measured and predicted speedup of one worker count.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupReport {
    pub n_nodes: usize,
    pub t_serial_ms: f64,
    pub t_parallel_ms: f64,
    pub speedup_ratio: f64,
    pub efficiency: f64,
    pub predicted_speedup: f64,
}

/// Contiguous shard ranges with sizes differing by at most one; the first
/// `len % n_workers` shards take the extra image. Shards past the image
/// count come out empty.
pub fn shard_ranges(len: usize, n_workers: usize) -> Vec<Range<usize>> {
    let base = len / n_workers;
    let extra = len % n_workers;
    let mut ranges = Vec::with_capacity(n_workers);
    let mut start = 0;
    for w in 0..n_workers {
        let size = base + usize::from(w < extra);
        ranges.push(start..start + size);
        start += size;
    }
    ranges
}

/// One data-parallel batch epoch. Same contract and same arithmetic as
/// [`train_epoch`]; only the per-image work is distributed.
pub fn parallel_epoch(
    params: &mut NetworkParams,
    dataset: &[TrainingSample],
    learning_rate: f64,
    n_workers: usize,
) -> Result<(EpochRecord, TimingProfile)> {
    if n_workers == 0 {
        return Err(Error::config("need at least one worker"));
    }
    if dataset.is_empty() {
        return Err(Error::config("cannot train on an empty dataset"));
    }
    if n_workers == 1 {
        // One shard reduces in dataset order by construction, which is the
        // serial loop itself; skip the per-image gradient staging.
        return train_epoch(params, dataset, learning_rate);
    }
    let epoch_start = Instant::now();
    let shards = shard_ranges(dataset.len(), n_workers);

    let mut slots: Vec<Option<Result<(GradientSet, SampleStats)>>> = Vec::new();
    slots.resize_with(dataset.len(), || None);

    std::thread::scope(|scope| {
        let snapshot: &NetworkParams = params;
        let mut remaining = slots.as_mut_slice();
        for range in &shards {
            let (mine, rest) = remaining.split_at_mut(range.len());
            remaining = rest;
            let shard = &dataset[range.clone()];
            scope.spawn(move || {
                for (slot, sample) in mine.iter_mut().zip(shard) {
                    let mut grad = GradientSet::zeros_like(snapshot);
                    *slot = Some(
                        process_sample(snapshot, sample, &mut grad).map(|stats| (grad, stats)),
                    );
                }
            });
        }
    }); // scope join is the single synchronization barrier

    // Ordered reduction: fold shard 0 first, then shard 1, and so on, image
    // by image, exactly like the serial accumulation loop.
    let mut acc = GradientSet::zeros_like(params);
    let mut error = 0usize;
    let mut loss = 0.0;
    let mut t1_total = 0.0;
    let mut t2_total = 0.0;
    for slot in slots {
        let (grad, stats) = slot.expect("every slot is filled before the barrier")?;
        acc.accumulate(&grad)?;
        error += stats.misclassified as usize;
        loss += stats.loss;
        t1_total += stats.t1_ms;
        t2_total += stats.t2_ms;
    }

    let update_start = Instant::now();
    params.apply_update(&acc, learning_rate)?;
    let t3_ms = ms_since(update_start);

    let n = dataset.len();
    Ok((
        EpochRecord {
            epoch: 0,
            error,
            loss,
            wall_time_ms: ms_since(epoch_start),
        },
        TimingProfile {
            t1_ms: t1_total / n as f64,
            t2_ms: t2_total / n as f64,
            t3_ms,
            n_images: n,
        },
    ))
}

/// The epoch-time model: serial cost is (t1 + t2) * N + t3; parallel cost is
/// (t1 + t2) * ceil(N / n) + t3, the largest shard's share plus the shared
/// update.
pub fn predict_times(profile: &TimingProfile, n_images: usize, n_nodes: usize) -> (f64, f64) {
    let per_image = profile.t1_ms + profile.t2_ms;
    let t_serial = per_image * n_images as f64 + profile.t3_ms;
    let largest_shard = n_images.div_ceil(n_nodes);
    let t_parallel = per_image * largest_shard as f64 + profile.t3_ms;
    (t_serial, t_parallel)
}

pub fn speedup_ratio(t_serial_ms: f64, t_parallel_ms: f64) -> f64 {
    t_serial_ms / t_parallel_ms
}

pub fn efficiency(speedup: f64, n_nodes: usize) -> f64 {
    speedup / n_nodes as f64
}

/// Everything one benchmark run measured: the serial t1/t2/t3 means and one
/// report per requested worker count.
#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub serial_profile: TimingProfile,
    pub reports: Vec<SpeedupReport>,
}

/// Times `epochs` serial epochs and `epochs` parallel epochs per worker
/// count, all from the same starting parameters, and pairs each measured
/// speedup with the model's prediction from the measured t1/t2/t3 means.
pub fn benchmark(
    params: &NetworkParams,
    dataset: &[TrainingSample],
    learning_rate: f64,
    worker_counts: &[usize],
    epochs: usize,
) -> Result<BenchmarkResult> {
    if worker_counts.is_empty() {
        return Err(Error::config("need at least one worker count"));
    }
    if worker_counts.contains(&0) {
        return Err(Error::config("worker counts must be at least 1"));
    }
    if epochs == 0 {
        return Err(Error::config("need at least one epoch"));
    }

    // Serial and parallel windows interleave epoch by epoch so that slow
    // drifts in machine speed (frequency scaling, noisy neighbors) hit every
    // measured stream about equally instead of biasing whichever phase ran
    // later.
    let mut serial_params = params.clone();
    let mut worker_params: Vec<NetworkParams> =
        worker_counts.iter().map(|_| params.clone()).collect();
    let mut serial_total_ms = 0.0;
    let mut parallel_total_ms = vec![0.0; worker_counts.len()];
    let mut profile_sum = TimingProfile {
        t1_ms: 0.0,
        t2_ms: 0.0,
        t3_ms: 0.0,
        n_images: dataset.len(),
    };
    for _ in 0..epochs {
        let start = Instant::now();
        let (_, profile) = train_epoch(&mut serial_params, dataset, learning_rate)?;
        serial_total_ms += ms_since(start);
        profile_sum.t1_ms += profile.t1_ms;
        profile_sum.t2_ms += profile.t2_ms;
        profile_sum.t3_ms += profile.t3_ms;
        for (i, &n) in worker_counts.iter().enumerate() {
            let start = Instant::now();
            parallel_epoch(&mut worker_params[i], dataset, learning_rate, n)?;
            parallel_total_ms[i] += ms_since(start);
        }
    }

    let t_serial_ms = serial_total_ms / epochs as f64;
    let mean_profile = TimingProfile {
        t1_ms: profile_sum.t1_ms / epochs as f64,
        t2_ms: profile_sum.t2_ms / epochs as f64,
        t3_ms: profile_sum.t3_ms / epochs as f64,
        n_images: dataset.len(),
    };

    let reports = worker_counts
        .iter()
        .zip(&parallel_total_ms)
        .map(|(&n, &total_ms)| {
            let t_parallel_ms = total_ms / epochs as f64;
            let speedup = speedup_ratio(t_serial_ms, t_parallel_ms);
            let (pred_serial, pred_parallel) = predict_times(&mean_profile, dataset.len(), n);
            SpeedupReport {
                n_nodes: n,
                t_serial_ms,
                t_parallel_ms,
                speedup_ratio: speedup,
                efficiency: efficiency(speedup, n),
                predicted_speedup: pred_serial / pred_parallel,
            }
        })
        .collect();
    Ok(BenchmarkResult {
        serial_profile: mean_profile,
        reports,
    })
}

/// Writes reports as `n,t_serial_ms,t_parallel_ms,speedup,efficiency,predicted_speedup`.
pub fn write_bench_csv(path: &Path, reports: &[SpeedupReport]) -> Result<()> {
    let mut out = String::from("n,t_serial_ms,t_parallel_ms,speedup,efficiency,predicted_speedup\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n_nodes, r.t_serial_ms, r.t_parallel_ms, r.speedup_ratio, r.efficiency, r.predicted_speedup
        ));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
