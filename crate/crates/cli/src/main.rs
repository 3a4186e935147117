//! `lungnet` binary. Exit codes: 0 success, 1 usage or config error, 2 data
//! error, 3 numeric failure.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use lungnet::data::Split;
use lungnet::models::{Arch, ModelConfig, TrainablePolicy};
use lungnet::synthetic::SyntheticSpec;
use lungnet::Result;
use lungnet_cli::commands::{self, EvalArgs};
use lungnet_cli::{exit_code, RunConfig};

#[derive(Parser)]
#[command(name = "lungnet", version, about = "Chest X-ray classification with MobileNetV2 and squeeze-excitation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a class-per-directory tree and write a stratified split index.
    Split {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-channel normalisation statistics of the train split.
    Stats {
        #[arg(long)]
        index: PathBuf,
    },
    /// Train from a `key = value` config; writes log.csv, best.nncp, report.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint to initialise from (overrides `init`).
        #[arg(long)]
        init: Option<PathBuf>,
        /// Trainable policy: all, none or head_only (overrides `policy`).
        #[arg(long)]
        policy: Option<TrainablePolicy>,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Extra `key=value` overrides, applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate a checkpoint on one split of an index.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        index: PathBuf,
        /// Run config supplying the model fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        arch: Option<Arch>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        width: Option<f32>,
        #[arg(long)]
        input_size: Option<usize>,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        /// Report CSV destination.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Destination for per-sample `index,label,prediction` rows.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Finite-difference check of every layer, the SE block and a reduced model.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print total and per-stage parameter counts.
    Params {
        #[arg(long, default_value = "mobilenet_v2")]
        arch: Arch,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 1.0)]
        width: f32,
    },
    /// Generate the synthetic three-class dataset as raw images.
    Synth {
        /// Spec file with `images_per_class`, `image_size`, `seed`.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(command: Command, w: &mut dyn Write) -> Result<()> {
    match command {
        Command::Split { root, seed, out } => commands::split(&root, seed, &out, w).map(drop),
        Command::Stats { index } => commands::stats(&index, w).map(drop),
        Command::Train { config, init, policy, out_dir, overrides } => {
            let mut cfg = RunConfig::from_file(&config)?;
            for kv in &overrides {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| lungnet::Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
                cfg.set(k.trim(), v.trim())?;
            }
            if init.is_some() {
                cfg.init = init;
            }
            if let Some(p) = policy {
                cfg.policy = p;
            }
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            commands::train(&cfg, w).map(drop)
        }
        Command::Eval {
            checkpoint,
            split,
            index,
            config,
            arch,
            classes,
            width,
            input_size,
            batch_size,
            report,
            predictions,
        } => {
            let mut model = match &config {
                Some(path) => RunConfig::from_file(path)?.model,
                None => ModelConfig::for_arch(Arch::MobileNetLung),
            };
            if let Some(a) = arch {
                model.se_after_stem = a == Arch::MobileNetLung;
            }
            model.num_classes = classes.unwrap_or(model.num_classes);
            model.width_multiplier = width.unwrap_or(model.width_multiplier);
            model.input_size = input_size.unwrap_or(model.input_size);
            let args = EvalArgs { checkpoint, index, split, model, batch_size, report, predictions };
            commands::eval(&args, w).map(drop)
        }
        Command::Gradcheck { seed } => commands::gradcheck(seed, w).map(drop),
        Command::Params { arch, classes, width } => commands::params(arch, classes, width, w).map(drop),
        Command::Synth { spec, out, per_class, size, seed } => {
            let mut s = match &spec {
                Some(path) => commands::parse_synth_spec(&std::fs::read_to_string(path)?)?,
                None => SyntheticSpec::default(),
            };
            s.images_per_class = per_class.unwrap_or(s.images_per_class);
            s.image_size = size.unwrap_or(s.image_size);
            s.seed = seed.unwrap_or(s.seed);
            commands::synth(&s, &out, w).map(drop)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            return ExitCode::from(code);
        }
    };
    let stdout = io::stdout();
    let mut w = stdout.lock();
    match run(cli.command, &mut w) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = w.flush();
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
