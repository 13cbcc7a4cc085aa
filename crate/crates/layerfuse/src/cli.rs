//! Subcommand CLI over the library: synthesize datasets, train, evaluate,
//! count parameters, gradient-check, and benchmark. Every run emits a JSON
//! report (to stdout or `--report`); exit codes are 0 success, 1 validation
//! error, 2 runtime error.

use crate::data::{generate, GeneratedDataset, SignalSite, SynthSpec, SynthTask};
use crate::error::{Error, Result};
use crate::heads::HeadKind;
use crate::interface::{InterfaceParams, InterfaceSpec, LayerStack};
use crate::numerics::Prng;
use crate::trainer::{
    evaluate, gradcheck::GRADCHECK_STEP, gradcheck_interface, load_bundle, save_bundle, train,
    GradCheckOutcome, OptimizerKind, TrainConfig,
};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "layerfuse",
    version,
    about = "Layer-aggregation interfaces over frozen feature stacks",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (feature files + train/test manifests)
    Synth(SynthArgs),
    /// Train an interface + head on a manifest pair
    Train(TrainArgs),
    /// Evaluate a saved model bundle on a manifest
    Eval(EvalArgs),
    /// Print the exact trainable parameter count of an interface
    Params(ParamsArgs),
    /// Finite-difference check of every gradient in one interface
    Gradcheck(GradcheckArgs),
    /// Forward-pass throughput (informational)
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Collision,
    LayerSelect,
}

#[derive(Clone, Copy, ValueEnum)]
enum InterfaceArg {
    WeightedSum,
    GroupWs,
    ConcatProj,
    HierConv,
    ClsPool,
    PcaConcat,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeadArg {
    Frame,
    Utterance,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 13)]
    layers: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 20)]
    frames: usize,
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long, default_value_t = 5.0)]
    nuisance: f64,
    /// Per-frame noise sigma; defaults to 0.1 (collision) or 0.5 (layer-select)
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct InterfaceFlags {
    #[arg(long, value_enum)]
    interface: InterfaceArg,
    /// Group count for group-ws (default 2)
    #[arg(long)]
    groups: Option<usize>,
    /// Attention heads for cls-pool (default 4)
    #[arg(long)]
    heads: Option<usize>,
    /// Feed-forward width for cls-pool (default round(8D/3))
    #[arg(long)]
    ffn: Option<usize>,
    /// Components per layer for pca-concat (default ceil(D/L))
    #[arg(long)]
    pca_k: Option<usize>,
}

impl InterfaceFlags {
    fn spec(&self) -> InterfaceSpec {
        match self.interface {
            InterfaceArg::WeightedSum => InterfaceSpec::weighted_sum(),
            InterfaceArg::GroupWs => InterfaceSpec::GroupWs {
                num_groups: self.groups.unwrap_or(2),
            },
            InterfaceArg::ConcatProj => InterfaceSpec::ConcatProj,
            InterfaceArg::HierConv => InterfaceSpec::HierConv,
            InterfaceArg::ClsPool => InterfaceSpec::ClsPool {
                heads: self.heads,
                ffn_dim: self.ffn,
            },
            InterfaceArg::PcaConcat => InterfaceSpec::PcaConcat {
                components_per_layer: self.pca_k,
            },
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train_manifest: PathBuf,
    #[arg(long)]
    test_manifest: PathBuf,
    #[command(flatten)]
    interface: InterfaceFlags,
    #[arg(long, value_enum)]
    head: HeadArg,
    #[arg(long)]
    classes: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Save the trained bundle here
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ParamsArgs {
    #[command(flatten)]
    interface: InterfaceFlags,
    #[arg(long)]
    layers: usize,
    #[arg(long)]
    dim: usize,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    interface: InterfaceFlags,
    #[arg(long)]
    layers: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    interface: InterfaceFlags,
    #[arg(long)]
    layers: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 100)]
    iters: usize,
}

/// Parse argv and dispatch; returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            }
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Params(args) => cmd_params(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

#[derive(Serialize)]
struct SynthReport<'a> {
    command: &'a str,
    spec: &'a SynthSpec,
    dataset: &'a GeneratedDataset,
}

fn cmd_synth(args: SynthArgs) -> Result<i32> {
    let spec = match args.task {
        TaskArg::Collision => SynthSpec {
            task: SynthTask::Collision,
            num_utterances: args.n,
            num_layers: args.layers,
            num_frames: args.frames,
            dim: args.dim,
            signal: SignalSite::Pair(3, 5),
            margin: args.margin,
            nuisance_sigma: args.nuisance,
            noise_sigma: args.noise.unwrap_or(0.1),
            seed: args.seed,
        },
        TaskArg::LayerSelect => SynthSpec {
            task: SynthTask::LayerSelect,
            num_utterances: args.n,
            num_layers: args.layers,
            num_frames: args.frames,
            dim: args.dim,
            signal: SignalSite::Single(3),
            margin: args.margin,
            nuisance_sigma: args.nuisance,
            noise_sigma: args.noise.unwrap_or(0.5),
            seed: args.seed,
        },
    };
    let dataset = generate(&spec, &args.out)?;
    let report = SynthReport {
        command: "synth",
        spec: &spec,
        dataset: &dataset,
    };
    println!("{}", to_json(&report)?);
    Ok(0)
}

fn cmd_train(args: TrainArgs) -> Result<i32> {
    let config = TrainConfig {
        interface: args.interface.spec(),
        head_kind: match args.head {
            HeadArg::Frame => HeadKind::Frame,
            HeadArg::Utterance => HeadKind::Utterance,
        },
        head_hidden: None,
        num_classes: args.classes,
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        optimizer: OptimizerKind::Adam,
        seed: args.seed,
        train_manifest: args.train_manifest,
        test_manifest: args.test_manifest,
    };
    let (report, bundle) = train(&config)?;
    if let Some(path) = &args.model {
        save_bundle(&bundle, path)?;
    }
    emit(&report, args.report.as_deref())?;
    Ok(0)
}

#[derive(Serialize)]
struct EvalReport<'a> {
    command: &'a str,
    model: &'a std::path::Path,
    manifest: &'a std::path::Path,
    mean_loss: f64,
    accuracy: f64,
}

fn cmd_eval(args: EvalArgs) -> Result<i32> {
    let bundle = load_bundle(&args.model)?;
    let (mean_loss, accuracy) = evaluate(&bundle.interface, &bundle.head, &args.manifest)?;
    let report = EvalReport {
        command: "eval",
        model: &args.model,
        manifest: &args.manifest,
        mean_loss,
        accuracy,
    };
    emit(&report, args.report.as_deref())?;
    Ok(0)
}

fn cmd_params(args: ParamsArgs) -> Result<i32> {
    let count = args.interface.spec().param_count(args.layers, args.dim)?;
    println!("{count}");
    Ok(0)
}

#[derive(Serialize)]
struct GradcheckReport<'a> {
    command: &'a str,
    layers: usize,
    dim: usize,
    frames: usize,
    seed: u64,
    tol: f64,
    step: f64,
    outcomes: Vec<GradCheckOutcome>,
    pass: bool,
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<i32> {
    if args.frames == 0 {
        return Err(Error::Config("frame count must be >= 1".to_string()));
    }
    if args.tol <= 0.0 {
        return Err(Error::Config(format!(
            "tolerance must be > 0, got {}",
            args.tol
        )));
    }
    let spec = args.interface.spec();
    let mut outcomes = Vec::new();
    for head in [HeadKind::Frame, HeadKind::Utterance] {
        outcomes.push(gradcheck_interface(
            &spec,
            head,
            args.layers,
            args.frames,
            args.dim,
            args.seed,
            args.tol,
        )?);
    }
    let pass = outcomes.iter().all(|o| o.pass);
    let report = GradcheckReport {
        command: "gradcheck",
        layers: args.layers,
        dim: args.dim,
        frames: args.frames,
        seed: args.seed,
        tol: args.tol,
        step: GRADCHECK_STEP,
        outcomes,
        pass,
    };
    println!("{}", to_json(&report)?);
    Ok(if pass { 0 } else { 2 })
}

#[derive(Serialize)]
struct BenchReport<'a> {
    command: &'a str,
    interface: &'a str,
    layers: usize,
    dim: usize,
    frames: usize,
    iters: usize,
    total_secs: f64,
    frames_per_sec: f64,
}

fn cmd_bench(args: BenchArgs) -> Result<i32> {
    if args.frames == 0 || args.iters == 0 {
        return Err(Error::Config(
            "frame count and iteration count must be >= 1".to_string(),
        ));
    }
    let spec = args.interface.spec();
    let mut rng = Prng::new(0);
    let mut params = InterfaceParams::init(spec.clone(), args.layers, args.dim, &mut rng)?;
    if matches!(spec, InterfaceSpec::PcaConcat { .. }) {
        let fit: Vec<LayerStack> = (0..4)
            .map(|_| LayerStack::random_normal(&mut rng, args.layers, args.frames, args.dim))
            .collect();
        params.fit_pca(&fit)?;
    }
    let stack = LayerStack::random_normal(&mut rng, args.layers, args.frames, args.dim);
    let started = Instant::now();
    let mut sink = 0.0;
    for _ in 0..args.iters {
        let (z, _) = params.forward(&stack)?;
        sink += z.values().data()[0];
    }
    let total_secs = started.elapsed().as_secs_f64();
    std::hint::black_box(sink);
    let report = BenchReport {
        command: "bench",
        interface: spec.name(),
        layers: args.layers,
        dim: args.dim,
        frames: args.frames,
        iters: args.iters,
        total_secs,
        frames_per_sec: args.iters as f64 * args.frames as f64 / total_secs,
    };
    println!("{}", to_json(&report)?);
    Ok(0)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))
}

fn emit<T: Serialize>(value: &T, report_path: Option<&std::path::Path>) -> Result<()> {
    let json = to_json(value)?;
    match report_path {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}
