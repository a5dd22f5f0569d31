use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dhtm::harness::{self, ExperimentConfig, Variant, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "dhtm", version, about = "Hebbian temporal memory agents on a pinball table")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial per seed and write metrics and checkpoints.
    Train(RunArgs),
    /// Run TD-horizon (or configured) variants on the same seeds.
    Compare(RunArgs),
    /// Summarize a checkpoint file.
    Inspect { checkpoint: PathBuf },
    /// Render SVG charts from an output directory.
    Plot {
        #[arg(long, env = OUT_DIR_ENV, default_value = "runs")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trial seed; repeat for several trials.
    #[arg(long)]
    seed: Vec<u64>,
    /// Episodes per trial.
    #[arg(long)]
    episodes: Option<usize>,
    /// TD prediction steps; `compare` takes one variant per value.
    #[arg(long)]
    horizon: Vec<usize>,
    /// Output directory; defaults to `runs`.
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    /// Obstruct the target after this many episodes.
    #[arg(long)]
    switch_episode: Option<usize>,
    /// Save frames of the first N episodes of every trial as PGM images.
    #[arg(long)]
    export_frames: Option<usize>,
    /// Write surprise and return charts as SVG.
    #[arg(long)]
    plot: bool,
}

impl RunArgs {
    fn config(&self) -> dhtm::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.seed.is_empty() {
            c.seeds = self.seed.clone();
        }
        if let Some(n) = self.episodes {
            c.episodes = n;
        }
        if let Some(dir) = &self.out_dir {
            c.out_dir = Some(dir.clone());
        }
        if let Some(n) = self.switch_episode {
            c.switch_episode = Some(n);
        }
        if let Some(n) = self.export_frames {
            c.export_frames = n;
        }
        c.plot |= self.plot;
        Ok(c)
    }
}

fn train(args: &RunArgs) -> dhtm::Result<()> {
    let mut config = args.config()?;
    match args.horizon.as_slice() {
        [] => {}
        [t] => config.agent.horizon = *t,
        _ => return Err(dhtm::Error::Config("train takes a single --horizon".into())),
    }
    let (dir, trials) = harness::run(&config)?;
    for t in &trials {
        let r = t.returns();
        let tail = &r[r.len().saturating_sub(50)..];
        println!(
            "seed {}: mean return over last {} episodes {:.3}, {} segments",
            t.seed,
            tail.len(),
            tail.iter().sum::<f64>() / tail.len() as f64,
            t.trial.agent.memory().segment_count()
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn compare(args: &RunArgs) -> dhtm::Result<()> {
    let config = args.config()?;
    let variants = if args.horizon.is_empty() {
        config.variants.clone()
    } else {
        args.horizon.iter().map(|&t| Variant::horizon(t)).collect()
    };
    let (path, results) = harness::compare(&config, &variants)?;
    for (name, trials) in &results {
        let n: usize = trials.iter().map(|t| t.episodes.len()).sum();
        let total: f64 = trials.iter().flat_map(|t| t.returns()).sum();
        println!("{name}: mean return {:.3}", total / n as f64);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => train(args),
        Command::Compare(args) => compare(args),
        Command::Inspect { checkpoint } => harness::inspect(checkpoint).map(|report| print!("{report}")),
        Command::Plot { out_dir } => harness::plot(out_dir).map(|()| println!("wrote plots to {}", out_dir.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
