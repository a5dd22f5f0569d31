//! Experiment runner: configuration, trials, metrics files, checkpoints and
//! plots.
//!
//! A run executes one trial per seed (in parallel) and writes into its output
//! directory:
//!
//! * `steps.csv`: one row per environment step,
//! * `episodes.csv`: one row per episode with the mean over seeds and
//!   per-seed columns,
//! * `timing.csv`: wall-clock time per episode, kept apart so the other
//!   files are reproducible byte for byte,
//! * `checkpoint_seed{S}.bin`: the final state of every trial,
//! * optionally `surprise.svg` / `return.svg` and PGM frames.

mod checkpoint;
mod compare;
mod output;
mod plot;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentConfig, EpisodeRecord};
use crate::encoder::EncoderConfig;
use crate::env::{Pinball, PinballConfig};
use crate::error::{Error, Result};
use crate::seed::{component_rng, Stream};
use crate::tm::MemoryConfig;

pub use checkpoint::{inspect, CHECKPOINT_VERSION};
pub use compare::{compare, Variant, VariantTrials};
pub use output::{EPISODE_COLUMNS, STEP_COLUMNS};
pub use plot::plot;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DHTM_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Number of episodes played before the table changes; later episodes
    /// use `switched_env`, or the obstructed default table when unset.
    pub switch_episode: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub plot: bool,
    /// Frames of the first this many episodes of each trial are saved.
    pub export_frames: usize,
    pub env: PinballConfig,
    pub switched_env: Option<PinballConfig>,
    pub agent: AgentConfig,
    pub encoder: EncoderConfig,
    pub memory: MemoryConfig,
    /// Variants run by [`compare`].
    pub variants: Vec<Variant>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            seeds: vec![0, 1, 2],
            switch_episode: None,
            out_dir: None,
            plot: false,
            export_frames: 0,
            env: PinballConfig::default(),
            switched_env: None,
            agent: AgentConfig::default(),
            encoder: EncoderConfig::default(),
            memory: MemoryConfig::default(),
            variants: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    /// 1000 episodes with the target obstructed after episode 500.
    pub fn adaptation() -> Self {
        Self { episodes: 1000, switch_episode: Some(500), ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.encoder.input_dim != self.env.input_dim() {
            return Err(Error::Config(format!(
                "encoder input_dim {} does not match the {}x{} frames",
                self.encoder.input_dim, self.env.resolution[0], self.env.resolution[1]
            )));
        }
        let switched = self.switched_env();
        if switched.actions.len() != self.env.actions.len() || switched.resolution != self.env.resolution {
            return Err(Error::Config("the switched table must keep actions and resolution".into()));
        }
        switched.validate()?;
        self.env.validate()?;
        self.agent.validate()?;
        self.encoder.validate()?;
        self.memory.validate()
    }

    pub fn switched_env(&self) -> PinballConfig {
        self.switched_env.clone().unwrap_or_else(|| self.env.obstructed())
    }

    /// Configured directory, else `$DHTM_OUT_DIR`, else `runs`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(default_out_dir)
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// Agent, environment and episode counter of one seed. This is also what a
/// checkpoint stores.
#[derive(Debug, Clone)]
pub struct Trial {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub episodes_done: usize,
    pub agent: Agent,
    pub env: Pinball,
}

impl Trial {
    pub fn new(config: ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let env = Pinball::new(config.env.clone(), component_rng(seed, Stream::Environment))?;
        let agent = Agent::new(
            config.agent.clone(),
            config.encoder.clone(),
            config.memory.clone(),
            config.env.actions.len(),
            seed,
        )?;
        Ok(Self { config, seed, episodes_done: 0, agent, env })
    }

    /// True when the next episode runs on the switched table.
    pub fn switched(&self) -> bool {
        self.config.switch_episode.is_some_and(|s| self.episodes_done >= s)
    }

    pub fn run_episode(&mut self) -> Result<EpisodeRecord> {
        self.run_episode_with(|_, _| {})
    }

    pub fn run_episode_with<F>(&mut self, on_frame: F) -> Result<EpisodeRecord>
    where
        F: FnMut(usize, &crate::env::Frame),
    {
        if self.config.switch_episode == Some(self.episodes_done) {
            self.env.reconfigure(self.config.switched_env())?;
        }
        let record = self.agent.run_episode_with(&mut self.env, on_frame);
        self.episodes_done += 1;
        Ok(record)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        checkpoint::load(path)
    }
}

/// Episodes of one finished trial.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
    pub trial: Trial,
}

impl TrialOutput {
    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.episode_return).collect()
    }

    /// Mean surprise per episode at `offset` (1-based).
    pub fn surprise(&self, offset: usize) -> Vec<Option<f64>> {
        self.episodes.iter().map(|e| e.mean_surprise(offset)).collect()
    }
}

/// Runs every seed of `config` without writing anything.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialOutput>> {
    run_trials_with(config, None)
}

fn run_trials_with(config: &ExperimentConfig, frames_dir: Option<&Path>) -> Result<Vec<TrialOutput>> {
    config.validate()?;
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut trial = Trial::new(config.clone(), seed)?;
            let mut episodes = Vec::with_capacity(config.episodes);
            for ep in 0..config.episodes {
                let record = match frames_dir.filter(|_| ep < config.export_frames) {
                    Some(dir) => {
                        let mut failure = None;
                        let record = trial.run_episode_with(|step, frame| {
                            if failure.is_none() {
                                failure = output::write_frame(dir, seed, ep + 1, step, frame).err();
                            }
                        })?;
                        if let Some(e) = failure {
                            return Err(e);
                        }
                        record
                    }
                    None => trial.run_episode()?,
                };
                if let Some(msg) = &record.error {
                    return Err(Error::InvalidState(format!("seed {seed} episode {}: {msg}", ep + 1)));
                }
                episodes.push(record);
            }
            Ok(TrialOutput { seed, episodes, trial })
        })
        .collect()
}

/// Runs all trials and writes metrics, checkpoints and optional plots into
/// the resolved output directory, which is returned.
pub fn run(config: &ExperimentConfig) -> Result<(PathBuf, Vec<TrialOutput>)> {
    config.validate()?;
    let dir = config.resolved_out_dir();
    let mut writers = output::Writers::create(&dir)?;
    let frames = (config.export_frames > 0).then(|| dir.join("frames"));
    let trials = run_trials_with(config, frames.as_deref())?;
    writers.write(config, &trials)?;
    for t in &trials {
        t.trial.save(&dir.join(format!("checkpoint_seed{}.bin", t.seed)))?;
    }
    if config.plot {
        plot(&dir)?;
    }
    Ok((dir, trials))
}
