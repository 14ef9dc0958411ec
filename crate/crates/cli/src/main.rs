//! Command-line front end: `fit` trains the generative pipeline, `augment`
//! writes an augmented graph directory, `eval` scores a trained checkpoint,
//! and `bench` runs the full baseline-vs-augmented comparison.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use augraph_core::eval::{
    benchmark_with_checkpoint, histogram_report, run_benchmark, write_results, DetectorConfig,
};
use augraph_core::graph::{make_benchmark, BenchmarkSpec, Graph};
use augraph_core::io::{load_graph, save_graph};
use augraph_core::pipeline::{augment, fit, synthesize, write_loss_history, Checkpoint, TrainConfig};
use augraph_core::Rng;

#[derive(Parser)]
#[command(name = "augraph", version, about = "Synthetic-outlier graph augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the autoencoder and latent diffusion model, write a checkpoint.
    Fit(CommonArgs),
    /// Sample synthetic outliers from a checkpoint and write the augmented
    /// graph directory.
    Augment(CommonArgs),
    /// Compare detectors trained with and without augmentation from an
    /// existing checkpoint; write results.csv.
    Eval(CommonArgs),
    /// Full run: fit, evaluate both arms, write results.csv and histograms.
    Bench(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding meta.json / features.csv / labels.csv / edges.csv.
    #[arg(long)]
    graph_dir: Option<PathBuf>,
    /// Checkpoint file to write (fit/bench) or read (augment/eval).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory for generated artifacts.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    partition_size: Option<usize>,
    #[arg(long)]
    diffusion_steps: Option<usize>,
    #[arg(long)]
    neg_ratio: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Largest diffusion noise level; drop toward the latent scale for
    /// sharper samples.
    #[arg(long)]
    sigma_max: Option<f64>,
    /// Number of synthetic nodes; defaults to the train-outlier count.
    #[arg(long)]
    n_hat: Option<usize>,
    /// Comma-separated evaluation seeds for eval/bench.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    detector_epochs: Option<usize>,
}

/// Synthetic benchmark parameters, used when no graph directory is given.
#[derive(Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct BenchmarkConfig {
    n: usize,
    d: usize,
    outlier_frac: f64,
    cohesion: f64,
    #[serde(default)]
    num_edge_types: u32,
    #[serde(default)]
    with_time: bool,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    train: TrainConfig,
    graph_dir: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    n_hat: Option<usize>,
    seeds: Option<Vec<u64>>,
    detector: DetectorConfig,
    benchmark: Option<BenchmarkConfig>,
    histogram_dim: usize,
    histogram_bins: Option<usize>,
}

/// Errors split by exit code: 2 for configuration/input problems, 3 for
/// runtime failures.
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

impl RunConfig {
    fn from_args(args: &CommonArgs) -> Result<RunConfig, CliError> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| config_err(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let t = &mut cfg.train;
        macro_rules! over {
            ($($field:ident),*) => { $( if let Some(v) = args.$field { t.$field = v; } )* };
        }
        over!(seed, lr, epochs, patience, partition_size, diffusion_steps, neg_ratio, beta, sigma_max);
        if let Some(p) = &args.graph_dir {
            cfg.graph_dir = Some(p.clone());
        }
        if let Some(p) = &args.checkpoint {
            cfg.checkpoint = Some(p.clone());
        }
        if let Some(p) = &args.output_dir {
            cfg.output_dir = Some(p.clone());
        }
        if let Some(n) = args.n_hat {
            cfg.n_hat = Some(n);
        }
        if let Some(e) = args.detector_epochs {
            cfg.detector.epochs = e;
        }
        if let Some(s) = &args.seeds {
            let parsed: Result<Vec<u64>, _> = s.split(',').map(|x| x.trim().parse()).collect();
            cfg.seeds = Some(parsed.map_err(|e| config_err(format!("--seeds: {e}")))?);
        }
        cfg.train.validate().map_err(config_err)?;
        Ok(cfg)
    }

    fn load_input_graph(&self) -> Result<Graph, CliError> {
        match (&self.graph_dir, &self.benchmark) {
            (Some(dir), _) => load_graph(dir).map_err(config_err),
            (None, Some(b)) => {
                let mut rng = Rng::new(b.seed);
                make_benchmark(
                    &mut rng,
                    BenchmarkSpec {
                        n: b.n,
                        d: b.d,
                        outlier_frac: b.outlier_frac,
                        cohesion: b.cohesion,
                        num_edge_types: b.num_edge_types,
                        with_time: b.with_time,
                    },
                )
                .map_err(config_err)
            }
            (None, None) => Err(CliError::Config(
                "no input graph: set graph_dir or benchmark in the config (or pass --graph-dir)".into(),
            )),
        }
    }

    fn output_dir(&self) -> Result<&Path, CliError> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| CliError::Config("output_dir is required (or pass --output-dir)".into()))
    }

    fn checkpoint_path(&self) -> Result<PathBuf, CliError> {
        match &self.checkpoint {
            Some(p) => Ok(p.clone()),
            None => Ok(self.output_dir()?.join("model.ckpt")),
        }
    }

    fn eval_seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..5).collect())
    }

    fn load_checkpoint(&self) -> Result<Checkpoint, CliError> {
        let path = self.checkpoint_path()?;
        if !path.is_file() {
            return Err(CliError::Config(format!("checkpoint not found: {}", path.display())));
        }
        Checkpoint::load(&path).map_err(config_err)
    }
}

fn ensure_output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir()?.to_path_buf();
    std::fs::create_dir_all(&dir).map_err(|e| config_err(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn cmd_fit(cfg: &RunConfig) -> Result<(), CliError> {
    let g = cfg.load_input_graph()?;
    let dir = ensure_output_dir(cfg)?;
    let ckpt = fit(&g, &cfg.train).map_err(runtime_err)?;
    let path = cfg.checkpoint_path()?;
    ckpt.save(&path).map_err(runtime_err)?;
    write_loss_history(&dir.join("loss.csv"), &ckpt.loss_history).map_err(runtime_err)?;
    println!("wrote {} and {}", path.display(), dir.join("loss.csv").display());
    Ok(())
}

fn cmd_augment(cfg: &RunConfig) -> Result<(), CliError> {
    let g = cfg.load_input_graph()?;
    let ckpt = cfg.load_checkpoint()?;
    let dir = ensure_output_dir(cfg)?;
    let mut rng = Rng::new(cfg.train.seed).derive(4);
    let aug = augment(&g, &ckpt, cfg.n_hat, &mut rng).map_err(runtime_err)?;
    let out = dir.join("augmented");
    save_graph(&aug, &out).map_err(runtime_err)?;
    println!("wrote {} ({} nodes, {} synthetic)", out.display(), aug.n, aug.n - g.n);
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> Result<(), CliError> {
    let g = cfg.load_input_graph()?;
    let ckpt = cfg.load_checkpoint()?;
    let dir = ensure_output_dir(cfg)?;
    let rows = benchmark_with_checkpoint(&g, &ckpt, &cfg.eval_seeds(), &cfg.detector, cfg.n_hat)
        .map_err(runtime_err)?;
    let path = dir.join("results.csv");
    write_results(&path, &rows).map_err(runtime_err)?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

fn cmd_bench(cfg: &RunConfig) -> Result<(), CliError> {
    let g = cfg.load_input_graph()?;
    let dir = ensure_output_dir(cfg)?;
    let (rows, ckpt) =
        run_benchmark(&g, &cfg.train, &cfg.eval_seeds(), &cfg.detector, cfg.n_hat).map_err(runtime_err)?;
    ckpt.save(&cfg.checkpoint_path()?).map_err(runtime_err)?;
    write_loss_history(&dir.join("loss.csv"), &ckpt.loss_history).map_err(runtime_err)?;
    let results = dir.join("results.csv");
    write_results(&results, &rows).map_err(runtime_err)?;

    let mut rng = Rng::new(cfg.train.seed).derive(4);
    let synth = synthesize(&g, &ckpt, cfg.n_hat, &mut rng).map_err(runtime_err)?;
    let aug = augraph_core::graph::batch_graphs(&g, &synth).map_err(runtime_err)?;
    save_graph(&aug, &dir.join("augmented")).map_err(runtime_err)?;
    if synth.n > 0 {
        let report = histogram_report(&g, &synth, cfg.histogram_dim, cfg.histogram_bins.unwrap_or(20))
            .map_err(runtime_err)?;
        std::fs::write(dir.join("histogram.csv"), report.to_csv())
            .map_err(|e| runtime_err(format!("histogram.csv: {e}")))?;
    }
    println!("wrote {} ({} rows)", results.display(), rows.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, fn(&RunConfig) -> Result<(), CliError>) = match &cli.command {
        Command::Fit(a) => (a, cmd_fit),
        Command::Augment(a) => (a, cmd_augment),
        Command::Eval(a) => (a, cmd_eval),
        Command::Bench(a) => (a, cmd_bench),
    };
    let result = RunConfig::from_args(args).and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
