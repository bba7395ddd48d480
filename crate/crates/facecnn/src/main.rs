//! Command-line driver wiring data ingestion, the network, the trainer, and
//! the parallel epoch driver into one workflow.
//!
//! Exit codes: 0 success, 1 training failure (epoch budget exhausted without
//! reaching the threshold), 2 usage error, 3 I/O or file-format error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use facecnn::dataio::{generate_synthetic, load_dataset, materialize_dataset, TrainingSample};
use facecnn::error::{Error, Result};
use facecnn::network::{build, count_parameters, ArchitectureSpec, NetworkParams};
use facecnn::parallel::{benchmark, parallel_epoch, write_bench_csv};
use facecnn::trainer::{
    classify, phase1_with, phase2_with, train_epoch, write_curve_csv, Phase2Outcome, TrainConfig,
};

#[derive(Parser)]
#[command(name = "facecnn", version, about = "Train and benchmark a from-scratch CNN classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the network: phase 1 (find the error plateau) without
    /// --threshold, phase 2 (train until the threshold) with it
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset
    Eval(EvalArgs),
    /// Measure serial vs parallel epoch times and report speedup
    Bench(BenchArgs),
    /// Materialize a synthetic dataset as PGM files
    Synth(SynthArgs),
    /// Print the layer dimension chain and parameter counts
    Inspect(InspectArgs),
}

#[derive(Args)]
struct DataSource {
    /// Dataset root directory with one subdirectory of .pgm files per class
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Use the in-memory synthetic dataset instead of --data
    #[arg(long)]
    synthetic: bool,
    /// Synthetic classes
    #[arg(long, default_value_t = 17)]
    classes: usize,
    /// Synthetic samples per class
    #[arg(long = "per-class", default_value_t = 8)]
    per_class: usize,
    /// Synthetic noise amplitude
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

impl DataSource {
    /// Class names plus preprocessed samples sized for `input_size`.
    fn load(&self, input_size: usize, seed: u64) -> Result<(Vec<String>, Vec<TrainingSample>)> {
        match (&self.data, self.synthetic) {
            (Some(_), true) | (None, false) => Err(Error::Config(
                "specify exactly one of --data DIR or --synthetic".to_string(),
            )),
            (Some(dir), false) => {
                let (manifest, samples) = load_dataset(dir, input_size)?;
                Ok((manifest.class_names, samples))
            }
            (None, true) => {
                let samples =
                    generate_synthetic(self.classes, self.per_class, input_size, seed, self.noise)?;
                let names = (0..self.classes).map(|c| format!("class_{c:02}")).collect();
                Ok((names, samples))
            }
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    source: DataSource,
    /// Epoch budget
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Learning rate
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Phase-2 stop threshold (misclassified images); omit to run phase 1
    #[arg(long)]
    threshold: Option<usize>,
    /// Consecutive equal-error epochs that count as a plateau
    #[arg(long = "plateau-window", default_value_t = 4)]
    plateau_window: usize,
    /// Worker threads; more than 1 routes epochs through the parallel driver
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Seed for initialization and synthetic data
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the final parameters here
    #[arg(long = "checkpoint-out", value_name = "PATH")]
    checkpoint_out: Option<PathBuf>,
    /// Write the per-epoch error curve CSV here
    #[arg(long = "curve-out", value_name = "PATH")]
    curve_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint to evaluate
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    #[command(flatten)]
    source: DataSource,
    /// Seed for synthetic data
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: DataSource,
    /// Comma-separated worker counts
    #[arg(long = "workers-list", value_name = "LIST", default_value = "1,2,4")]
    workers_list: String,
    /// Epochs per measurement
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    /// Learning rate
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Seed for initialization and synthetic data
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the speedup report CSV here
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Classes
    #[arg(long, default_value_t = 17)]
    classes: usize,
    /// Samples per class
    #[arg(long = "per-class", default_value_t = 8)]
    per_class: usize,
    /// Image side length
    #[arg(long, default_value_t = 32)]
    size: usize,
    /// Seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Noise amplitude
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

#[derive(Args)]
struct InspectArgs {
    /// Checkpoint to describe
    #[arg(long, value_name = "PATH", conflicts_with = "spec_defaults")]
    checkpoint: Option<PathBuf>,
    /// Describe the built-in default architecture
    #[arg(long = "spec-defaults")]
    spec_defaults: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 3,
            }
        }
    };
    ExitCode::from(code)
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Bench(args) => run_bench(args),
        Command::Synth(args) => run_synth(args),
        Command::Inspect(args) => run_inspect(args),
    }
}

fn run_train(args: TrainArgs) -> Result<u8> {
    if args.workers == 0 {
        return Err(Error::Config("--workers must be at least 1".to_string()));
    }
    let spec = ArchitectureSpec::default();
    let (_, dataset) = args.source.load(spec.input_size, args.seed)?;
    let mut params = build(&spec, args.seed)?;
    let config = TrainConfig {
        learning_rate: args.lr,
        max_epochs: args.epochs,
        error_threshold: args.threshold,
        plateau_window: args.plateau_window,
        seed: args.seed,
    };

    let workers = args.workers;
    let lr = args.lr;
    let (curve, exit) = {
        let run_epoch = |_: usize| {
            if workers > 1 {
                parallel_epoch(&mut params, &dataset, lr, workers)
            } else {
                train_epoch(&mut params, &dataset, lr)
            }
        };
        if args.threshold.is_none() {
            let result = phase1_with(&config, run_epoch)?;
            println!("plateau_error={}", result.plateau_error);
            println!("plateau_reached={}", result.plateau_reached);
            (result.curve, 0)
        } else {
            let result = phase2_with(&config, run_epoch)?;
            let (outcome, exit) = match result.outcome {
                Phase2Outcome::Success => ("success", 0),
                Phase2Outcome::Failure => ("failure", 1),
            };
            println!("outcome={outcome} elapsed_ms={:.3}", result.elapsed_ms);
            (result.curve, exit)
        }
    };

    if let Some(path) = &args.checkpoint_out {
        params.save_checkpoint(path)?;
        println!("checkpoint={}", path.display());
    }
    if let Some(path) = &args.curve_out {
        write_curve_csv(path, &curve)?;
        println!("curve={}", path.display());
    }
    Ok(exit)
}

fn run_eval(args: EvalArgs) -> Result<u8> {
    let params = NetworkParams::load_checkpoint(&args.checkpoint)?;
    let (class_names, dataset) = args.source.load(params.spec.input_size, args.seed)?;
    if class_names.len() > params.spec.num_classes {
        return Err(Error::Config(format!(
            "dataset has {} classes but the checkpoint outputs {}",
            class_names.len(),
            params.spec.num_classes
        )));
    }

    let mut per_class_total = vec![0usize; class_names.len()];
    let mut per_class_correct = vec![0usize; class_names.len()];
    for sample in &dataset {
        let (_, outputs) = params.forward_full(&sample.image)?;
        per_class_total[sample.label] += 1;
        if classify(&outputs) == sample.label {
            per_class_correct[sample.label] += 1;
        }
    }
    for (i, name) in class_names.iter().enumerate() {
        println!(
            "class {i} ({name}): {}/{} correct",
            per_class_correct[i], per_class_total[i]
        );
    }
    let total: usize = per_class_total.iter().sum();
    let correct: usize = per_class_correct.iter().sum();
    println!(
        "overall accuracy={:.6} errors={} total={}",
        correct as f64 / total as f64,
        total - correct,
        total
    );
    Ok(0)
}

fn run_bench(args: BenchArgs) -> Result<u8> {
    let worker_counts: Vec<usize> = args
        .workers_list
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad worker count {t:?} in --workers-list")))
        })
        .collect::<Result<_>>()?;

    let spec = ArchitectureSpec::default();
    let (_, dataset) = args.source.load(spec.input_size, args.seed)?;
    let params = build(&spec, args.seed)?;
    let result = benchmark(&params, &dataset, args.lr, &worker_counts, args.epochs)?;

    let p = &result.serial_profile;
    println!(
        "t1_ms={:.3} t2_ms={:.3} t3_ms={:.3} n_images={}",
        p.t1_ms, p.t2_ms, p.t3_ms, p.n_images
    );
    for r in &result.reports {
        println!(
            "n={} serial={:.3} parallel={:.3} speedup={:.6} efficiency={:.6} predicted={:.6}",
            r.n_nodes, r.t_serial_ms, r.t_parallel_ms, r.speedup_ratio, r.efficiency, r.predicted_speedup
        );
    }
    if let Some(path) = &args.report {
        write_bench_csv(path, &result.reports)?;
        println!("report={}", path.display());
    }
    Ok(0)
}

fn run_synth(args: SynthArgs) -> Result<u8> {
    let samples =
        generate_synthetic(args.classes, args.per_class, args.size, args.seed, args.noise)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    materialize_dataset(&args.out, &samples)?;
    println!(
        "wrote {} samples across {} classes to {}",
        samples.len(),
        args.classes,
        args.out.display()
    );
    Ok(0)
}

fn run_inspect(args: InspectArgs) -> Result<u8> {
    let params = match (&args.checkpoint, args.spec_defaults) {
        (Some(path), false) => NetworkParams::load_checkpoint(path)?,
        (None, true) => build(&ArchitectureSpec::default(), 0)?,
        _ => {
            return Err(Error::Config(
                "specify exactly one of --checkpoint PATH or --spec-defaults".to_string(),
            ))
        }
    };
    let spec = &params.spec;
    let dims = spec.dims()?;
    let counts = count_parameters(&params);
    // Connection counts are descriptive only; the convention counts each
    // output neuron's fan-in plus its bias as one connection each.
    let conn = |maps: usize, side: usize, fan_in: usize| maps * side * side * (fan_in + 1);
    println!("input: {0}x{0}", dims.input);
    println!(
        "C1: {} maps of {1}x{1}, {2} parameters, {3} connections",
        dims.c1.0,
        dims.c1.1,
        counts.c1,
        conn(dims.c1.0, dims.c1.1, spec.kernel1_size * spec.kernel1_size)
    );
    println!(
        "S1: {} maps of {1}x{1}, {2} parameters, {3} connections",
        dims.s1.0,
        dims.s1.1,
        counts.s1,
        conn(dims.s1.0, dims.s1.1, spec.pool1_window * spec.pool1_window)
    );
    if let (Some(c2), Some(s2)) = (dims.c2, dims.s2) {
        println!(
            "C2: {} maps of {1}x{1}, {2} parameters, {3} connections",
            c2.0,
            c2.1,
            counts.c2,
            conn(c2.0, c2.1, dims.s1.0 * spec.kernel2_size * spec.kernel2_size)
        );
        println!(
            "S2: {} maps of {1}x{1}, {2} parameters, {3} connections",
            s2.0,
            s2.1,
            counts.s2,
            conn(s2.0, s2.1, spec.pool2_window * spec.pool2_window)
        );
    }
    println!(
        "H: {} units, {} parameters, {} connections",
        dims.hidden_units,
        counts.hidden,
        dims.hidden_units * (dims.hidden_inputs + 1)
    );
    println!(
        "F: {} outputs, {} parameters, {} connections",
        dims.num_classes,
        counts.output,
        dims.num_classes * (dims.hidden_units + 1)
    );
    println!("total: {} parameters", counts.total);
    Ok(0)
}
