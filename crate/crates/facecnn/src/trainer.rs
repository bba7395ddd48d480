//! Serial batch gradient descent with the two-phase stop protocol:
//! phase 1 trains until the misclassification count plateaus and reports
//! that plateau as the error threshold; phase 2 trains until the error
//! drops to the threshold (success) or the epoch budget runs out
//! (failure, i.e. the run fell into a local optimum).
//!
//! Each epoch performs one parameter update: gradients of every image are
//! accumulated in dataset order, then applied once. That structure is what
//! makes the serial cost model (t1 + t2) * N + t3 exact.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::backprop::{backward_into, GradientSet};
use crate::dataio::TrainingSample;
use crate::error::{Error, Result};
use crate::network::NetworkParams;

/// Knobs of a training run. `error_threshold` selects phase 2.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub error_threshold: Option<usize>,
    pub plateau_window: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            max_epochs: 100,
            error_threshold: None,
            plateau_window: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::config("learning rate must be finite and >= 0"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        if self.plateau_window == 0 {
            return Err(Error::config("plateau window must be at least 1"));
        }
        Ok(())
    }
}

/// What one epoch produced: the misclassified-image count (the protocol's
/// "error"), the summed squared-error loss, and the epoch wall time.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub error: usize,
    pub loss: f64,
    pub wall_time_ms: f64,
}

/// Measured per-image forward (t1) and backward (t2) means plus the single
/// per-epoch update time (t3). Feeds the parallel speedup model.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingProfile {
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub t3_ms: f64,
    pub n_images: usize,
}

/// Class label as a tanh-range target: -1 everywhere, +1 at the label index.
pub fn encode_target(label: usize, num_classes: usize) -> Vec<f64> {
    let mut target = vec![-1.0; num_classes];
    target[label] = 1.0;
    target
}

/// Argmax classification; ties resolve to the lowest index.
pub fn classify(outputs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in outputs.iter().enumerate().skip(1) {
        if v > outputs[best] {
            best = i;
        }
    }
    best
}

/// Squared-error loss 1/2 * sum((y - t)^2) of one sample.
pub fn sample_loss(outputs: &[f64], target: &[f64]) -> f64 {
    outputs
        .iter()
        .zip(target)
        .map(|(&y, &t)| (y - t) * (y - t))
        .sum::<f64>()
        / 2.0
}

pub(crate) struct SampleStats {
    pub loss: f64,
    pub misclassified: bool,
    pub t1_ms: f64,
    pub t2_ms: f64,
}

/// One forward/backward pass of one image, writing the gradient into a
/// caller-owned buffer. The serial and parallel epoch drivers share this so
/// their arithmetic is identical.
pub(crate) fn process_sample(
    params: &NetworkParams,
    sample: &TrainingSample,
    grad: &mut GradientSet,
) -> Result<SampleStats> {
    if sample.label >= params.spec.num_classes {
        return Err(Error::config(format!(
            "label {} out of range for {} classes",
            sample.label, params.spec.num_classes
        )));
    }
    let start = Instant::now();
    let (trace, outputs) = params.forward_full(&sample.image)?;
    let t1_ms = ms_since(start);

    let target = encode_target(sample.label, params.spec.num_classes);
    let misclassified = classify(&outputs) != sample.label;
    let loss = sample_loss(&outputs, &target);

    let start = Instant::now();
    backward_into(&trace, &target, params, grad)?;
    let t2_ms = ms_since(start);

    Ok(SampleStats {
        loss,
        misclassified,
        t1_ms,
        t2_ms,
    })
}

pub(crate) fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// One batch epoch: per-image forward + backward over the whole dataset in
/// order, gradients accumulated, then a single update. The error and loss
/// come from the same forward passes that produced the gradients.
pub fn train_epoch(
    params: &mut NetworkParams,
    dataset: &[TrainingSample],
    learning_rate: f64,
) -> Result<(EpochRecord, TimingProfile)> {
    if dataset.is_empty() {
        return Err(Error::config("cannot train on an empty dataset"));
    }
    let epoch_start = Instant::now();
    let mut acc = GradientSet::zeros_like(params);
    let mut delta = GradientSet::zeros_like(params);
    let mut error = 0usize;
    let mut loss = 0.0;
    let mut t1_total = 0.0;
    let mut t2_total = 0.0;

    for sample in dataset {
        let stats = process_sample(params, sample, &mut delta)?;
        acc.accumulate(&delta)?;
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

/// Phase-1 result: the error value the curve settled on, whether it actually
/// settled within the epoch budget, and the full curve.
#[derive(Debug, Clone)]
pub struct Phase1Result {
    pub plateau_error: usize,
    pub plateau_reached: bool,
    pub curve: Vec<EpochRecord>,
}

/// Phase-2 result. `Failure` means the threshold was never reached within
/// the epoch budget.
#[derive(Debug, Clone)]
pub struct Phase2Result {
    pub outcome: Phase2Outcome,
    pub elapsed_ms: f64,
    pub curve: Vec<EpochRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase2Outcome {
    Success,
    Failure,
}

/// Phase-1 driver generic over the epoch function, so the CLI can route
/// epochs through the parallel module and tests can script error curves.
/// Stops once the error is identical for `plateau_window` consecutive epochs.
pub fn phase1_with<F>(config: &TrainConfig, mut run_epoch: F) -> Result<Phase1Result>
where
    F: FnMut(usize) -> Result<(EpochRecord, TimingProfile)>,
{
    config.validate()?;
    let mut curve: Vec<EpochRecord> = Vec::new();
    for epoch in 0..config.max_epochs {
        let (mut record, _) = run_epoch(epoch)?;
        record.epoch = epoch;
        curve.push(record);
        if curve.len() >= config.plateau_window {
            let tail = &curve[curve.len() - config.plateau_window..];
            if tail.iter().all(|r| r.error == tail[0].error) {
                return Ok(Phase1Result {
                    plateau_error: tail[0].error,
                    plateau_reached: true,
                    curve,
                });
            }
        }
    }
    let final_error = curve.last().expect("max_epochs >= 1").error;
    Ok(Phase1Result {
        plateau_error: final_error,
        plateau_reached: false,
        curve,
    })
}

/// Phase-2 driver generic over the epoch function. Requires
/// `config.error_threshold`; stops as soon as an epoch's error is at or
/// below it.
pub fn phase2_with<F>(config: &TrainConfig, mut run_epoch: F) -> Result<Phase2Result>
where
    F: FnMut(usize) -> Result<(EpochRecord, TimingProfile)>,
{
    config.validate()?;
    let threshold = config
        .error_threshold
        .ok_or_else(|| Error::config("phase 2 requires an error threshold"))?;
    let start = Instant::now();
    let mut curve: Vec<EpochRecord> = Vec::new();
    for epoch in 0..config.max_epochs {
        let (mut record, _) = run_epoch(epoch)?;
        record.epoch = epoch;
        let reached = record.error <= threshold;
        curve.push(record);
        if reached {
            return Ok(Phase2Result {
                outcome: Phase2Outcome::Success,
                elapsed_ms: ms_since(start),
                curve,
            });
        }
    }
    Ok(Phase2Result {
        outcome: Phase2Outcome::Failure,
        elapsed_ms: ms_since(start),
        curve,
    })
}

/// Phase 1 over the serial epoch loop.
pub fn train_phase1(
    params: &mut NetworkParams,
    dataset: &[TrainingSample],
    config: &TrainConfig,
) -> Result<Phase1Result> {
    let lr = config.learning_rate;
    phase1_with(config, |_| train_epoch(params, dataset, lr))
}

/// Phase 2 over the serial epoch loop.
pub fn train_phase2(
    params: &mut NetworkParams,
    dataset: &[TrainingSample],
    config: &TrainConfig,
) -> Result<Phase2Result> {
    let lr = config.learning_rate;
    phase2_with(config, |_| train_epoch(params, dataset, lr))
}

/// Writes the error curve as `epoch,error,loss,wall_time_ms`.
pub fn write_curve_csv(path: &Path, curve: &[EpochRecord]) -> Result<()> {
    let mut out = String::from("epoch,error,loss,wall_time_ms\n");
    for r in curve {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch, r.error, r.loss, r.wall_time_ms
        ));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
