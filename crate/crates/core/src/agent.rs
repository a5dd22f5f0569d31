//! The decision loop: events, encoding, memory, reward model, SR and policy.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::encoder::{EncoderConfig, SpatialPooler};
use crate::env::{Frame, Pinball};
use crate::error::{invalid_arg, Error, Result};
use crate::prob::{sample_categorical, softmax, softmax_into};
use crate::sdr::Sdr;
use crate::seed::{component_rng, Stream};
use crate::sr::SrMatrix;
use crate::tm::{BeliefState, Memory, MemoryConfig};

/// Future offsets at which surprise is reported.
pub const SURPRISE_OFFSETS: usize = 3;

/// Event image of a frame pair with a floating threshold: a pixel fires when
/// its absolute change exceeds the mean absolute change. Without a previous
/// frame nothing fires.
pub fn preprocess(frame: &Frame, prev: Option<&Frame>) -> Result<Sdr> {
    let dim = frame.pixels.len();
    let Some(prev) = prev else {
        return Sdr::empty(dim);
    };
    if prev.cols != frame.cols || prev.rows != frame.rows {
        return invalid_arg("frames differ in size");
    }
    let deltas: Vec<f64> = frame.pixels.iter().zip(&prev.pixels).map(|(&a, &b)| f64::from(a - b).abs()).collect();
    let threshold = deltas.iter().sum::<f64>() / dim as f64;
    let active = deltas.iter().enumerate().filter(|(_, &d)| d > threshold).map(|(i, _)| i).collect();
    Sdr::new(dim, active)
}

/// Per-variable reward estimates turned into observation priors.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    r: Vec<f64>,
    obs_per_var: usize,
    pub learning_rate: f64,
    pub scale: f64,
}

impl RewardModel {
    pub fn new(n_vars: usize, obs_per_var: usize, learning_rate: f64, scale: f64) -> Result<Self> {
        if n_vars == 0 || obs_per_var == 0 {
            return invalid_arg("reward model needs at least one state");
        }
        if !learning_rate.is_finite() || !scale.is_finite() {
            return invalid_arg("reward model rates must be finite");
        }
        Ok(Self { r: vec![0.0; n_vars * obs_per_var], obs_per_var, learning_rate, scale })
    }

    pub fn rewards(&self) -> &[f64] {
        &self.r
    }

    /// Moves the estimate of each observed state towards `reward`.
    pub fn learn(&mut self, obs: &[usize], reward: f64) -> Result<()> {
        if obs.len() * self.obs_per_var != self.r.len() || obs.iter().any(|&o| o >= self.obs_per_var) {
            return invalid_arg("observation does not match the reward model");
        }
        for (k, &o) in obs.iter().enumerate() {
            let r = &mut self.r[k * self.obs_per_var + o];
            *r += self.learning_rate * (reward - *r);
        }
        Ok(())
    }

    /// Per-variable `softmax(scale * r)`.
    pub fn observation_prior(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.r.len()];
        for (src, dst) in self.r.chunks(self.obs_per_var).zip(out.chunks_mut(self.obs_per_var)) {
            let scaled: Vec<f64> = src.iter().map(|&x| self.scale * x).collect();
            softmax_into(&scaled, dst);
        }
        out
    }

    /// Log of the observation prior, computed stably.
    pub fn log_prior(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.r.len());
        for block in self.r.chunks(self.obs_per_var) {
            let max = block.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(self.scale * x));
            let lse = max + block.iter().map(|&x| (self.scale * x - max).exp()).sum::<f64>().ln();
            out.extend(block.iter().map(|&x| self.scale * x - lse));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Prediction steps `T` of the n-step TD target.
    pub horizon: usize,
    pub gamma: f64,
    pub temperature: f64,
    pub sr_learning_rate: f64,
    pub reward_learning_rate: f64,
    /// `lambda` in the observation prior.
    pub reward_scale: f64,
    pub learn_encoder: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            horizon: 5,
            gamma: 0.99,
            temperature: 1.0,
            sr_learning_rate: 0.05,
            reward_learning_rate: 0.2,
            reward_scale: 5.0,
            learn_encoder: true,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if !(self.sr_learning_rate >= 0.0 && self.reward_learning_rate >= 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::Config("learning rates must be non-negative".into()));
        }
        Ok(())
    }
}

/// One environment step as seen by the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub action: usize,
    pub reward: f64,
    /// Surprise about the resulting observation as predicted 1..=3 steps
    /// earlier; `None` when the episode is not that old yet.
    pub surprise: [Option<f64>; SURPRISE_OFFSETS],
    pub segments: usize,
    /// See [`Observed::memory_surprise`].
    pub memory_surprise: f64,
    /// Observed state of every variable after the step.
    pub observation: Vec<usize>,
}

/// Result of processing one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observed {
    pub states: Vec<usize>,
    /// Surprise about these states as predicted 1..=3 steps earlier.
    pub surprise: [Option<f64>; SURPRISE_OFFSETS],
    /// Mean negative log probability the memory's prior gave these states.
    pub memory_surprise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub steps: Vec<StepRecord>,
    pub episode_return: f64,
    pub elapsed: Duration,
    /// Set when the episode was aborted.
    pub error: Option<String>,
}

impl EpisodeRecord {
    /// Mean of the available surprise values at `offset` (1-based).
    pub fn mean_surprise(&self, offset: usize) -> Option<f64> {
        let values: Vec<f64> = self.steps.iter().filter_map(|s| s.surprise[offset - 1]).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    encoder: SpatialPooler,
    memory: Memory,
    sr: SrMatrix,
    reward: RewardModel,
    termination: RewardModel,
    n_env_actions: usize,
    rng: ChaCha8Rng,
    prev_frame: Option<Frame>,
    readouts: VecDeque<Vec<f64>>,
}

impl Agent {
    /// Builds an agent whose components draw from the `trial_seed` hierarchy.
    ///
    /// The memory has one variable per encoder block, one observation state
    /// per block neuron and one action cell per environment action plus the
    /// null action.
    pub fn new(
        config: AgentConfig,
        encoder: EncoderConfig,
        memory: MemoryConfig,
        n_env_actions: usize,
        trial_seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        encoder.validate()?;
        let t = memory.topology;
        if encoder.winners_per_block != 1 {
            return Err(Error::Config("the encoder must select one winner per block".into()));
        }
        if t.n_vars != encoder.blocks || t.n_obs_states != encoder.block_size() {
            return Err(Error::Config(format!(
                "memory topology {}x{} does not match encoder blocks {}x{}",
                t.n_vars,
                t.n_obs_states,
                encoder.blocks,
                encoder.block_size()
            )));
        }
        if n_env_actions == 0 || t.n_actions != n_env_actions + 1 {
            return Err(Error::Config(format!(
                "memory needs {} action cells (environment actions plus null), has {}",
                n_env_actions + 1,
                t.n_actions
            )));
        }
        let encoder = SpatialPooler::new(encoder, &mut component_rng(trial_seed, Stream::Encoder))?;
        let memory = Memory::new(memory, component_rng(trial_seed, Stream::Memory))?;
        let sr = SrMatrix::new(
            t.n_hidden_cells(),
            t.n_vars,
            t.n_obs_states,
            config.gamma,
            config.horizon,
            config.sr_learning_rate,
        )?;
        let reward = RewardModel::new(t.n_vars, t.n_obs_states, config.reward_learning_rate, config.reward_scale)?;
        let termination = RewardModel::new(t.n_vars, t.n_obs_states, config.reward_learning_rate, 1.0)?;
        Ok(Self {
            config,
            encoder,
            memory,
            sr,
            reward,
            termination,
            n_env_actions,
            rng: component_rng(trial_seed, Stream::Policy),
            prev_frame: None,
            readouts: VecDeque::new(),
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn encoder(&self) -> &SpatialPooler {
        &self.encoder
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub fn memory_mut(&mut self) -> &mut Memory {
        &mut self.memory
    }

    pub fn sr(&self) -> &SrMatrix {
        &self.sr
    }

    pub fn sr_mut(&mut self) -> &mut SrMatrix {
        &mut self.sr
    }

    pub fn reward_model(&self) -> &RewardModel {
        &self.reward
    }

    /// Per-state estimate of how often an observation ends the episode,
    /// learned at the reward rate. Rollout offsets are weighted by it.
    pub fn termination_model(&self) -> &RewardModel {
        &self.termination
    }

    pub fn null_action(&self) -> usize {
        self.n_env_actions
    }

    /// Observation state of every variable for an encoder output.
    pub fn observation_states(&self, z: &Sdr) -> Vec<usize> {
        let block = self.encoder.config().block_size();
        z.active().iter().map(|&i| i % block).collect()
    }

    /// Per-action values of the current belief.
    pub fn action_values(&self) -> Result<Vec<f64>> {
        let log_prior = self.reward.log_prior();
        self.values_from(self.memory.messages(), &log_prior)
    }

    fn values_from(&self, belief: &BeliefState, log_prior: &[f64]) -> Result<Vec<f64>> {
        (0..self.n_env_actions)
            .map(|a| {
                let next = self.memory.predict_from(belief, Some(a))?;
                self.sr.value(next.probs(), log_prior)
            })
            .collect()
    }

    /// Softmax over action values at the configured temperature.
    pub fn policy(&self) -> Result<Vec<f64>> {
        Ok(policy_from_values(&self.action_values()?, self.config.temperature))
    }

    pub fn select_action(&mut self) -> Result<usize> {
        let pi = self.policy()?;
        Ok(sample_categorical(&pi, &mut self.rng))
    }

    /// Starts a new episode: messages and frame history are cleared, learned
    /// weights are kept.
    pub fn begin_episode(&mut self) {
        self.memory.reset();
        self.prev_frame = None;
        self.readouts.clear();
    }

    /// Processes one frame reached by `action` with `reward`: encode, filter
    /// and learn, update the reward model and the SR. The SR target of a
    /// terminal frame has no future part.
    pub fn observe(&mut self, frame: &Frame, action: usize, reward: f64, terminal: bool) -> Result<Observed> {
        let events = preprocess(frame, self.prev_frame.as_ref())?;
        let z = self.encoder.encode(&events)?;
        if self.config.learn_encoder {
            self.encoder.learn(&events, &z)?;
            self.encoder.newborn_step();
        }
        let obs = self.observation_states(&z);
        let (prior, _) = self.memory.step(Some(action), &obs)?;
        let t = *self.memory.topology();
        let marginals = prior.column_marginals(&t);
        let memory_surprise = obs
            .iter()
            .enumerate()
            .map(|(k, &o)| -marginals[k * t.n_obs_states + o].max(crate::sr::SURPRISE_FLOOR).ln())
            .sum::<f64>()
            / obs.len() as f64;
        self.reward.learn(&obs, reward)?;
        self.termination.learn(&obs, if terminal { 1.0 } else { 0.0 })?;

        let mut surprise = [None; SURPRISE_OFFSETS];
        for (slot, readout) in surprise.iter_mut().zip(&self.readouts) {
            *slot = Some(self.sr.surprise_of(readout, &obs)?);
        }
        if terminal {
            let t = *self.memory.topology();
            let belief = self.memory.messages().probs().to_vec();
            let observed = self.memory.messages().column_marginals(&t);
            self.sr.td_update_terminal(&belief, &observed)?;
        } else {
            self.td_step()?;
        }
        let belief = self.memory.messages().probs().to_vec();
        self.readouts.push_front(self.sr.normalized_readout(&belief)?);
        self.readouts.truncate(SURPRISE_OFFSETS);
        self.prev_frame = Some(frame.clone());
        Ok(Observed { states: obs, surprise, memory_surprise })
    }

    /// One n-step TD update from a rollout driven by the current policy.
    /// Memory rollouts do not stop at terminal states, so each offset and the
    /// bootstrap term are weighted by the estimated survival probability.
    fn td_step(&mut self) -> Result<()> {
        let t = *self.memory.topology();
        let horizon = self.config.horizon;
        let log_prior = self.reward.log_prior();
        let mut failure = None;
        let mut rng = self.rng.clone();
        let rollout = self.memory.rollout(horizon + 1, |belief| {
            let pi = match self.values_from(belief, &log_prior) {
                Ok(v) => policy_from_values(&v, self.config.temperature),
                Err(e) => {
                    failure.get_or_insert(e);
                    vec![1.0; self.n_env_actions]
                }
            };
            Some(sample_categorical(&pi, &mut rng))
        });
        self.rng = rng;
        if let Some(e) = failure {
            return Err(e);
        }
        let rollout = rollout?;
        let mut predicted = Vec::with_capacity(horizon + 1);
        predicted.push(self.memory.messages().column_marginals(&t));
        predicted.extend(rollout.obs_dists.into_iter().take(horizon));
        // weight offsets by the chance that the episode is still running
        let mut future = rollout.final_belief.probs().to_vec();
        let mut alive = 1.0;
        for p in predicted.iter_mut().skip(1) {
            let ended = self.termination_probability(p);
            p.iter_mut().for_each(|x| *x *= alive);
            alive *= 1.0 - ended;
        }
        future.iter_mut().for_each(|x| *x *= alive);
        let belief = self.memory.messages().probs().to_vec();
        self.sr.td_update(&belief, &predicted, &future)?;
        Ok(())
    }

    /// Mean over variables of the chance that `dist` is a terminal state.
    fn termination_probability(&self, dist: &[f64]) -> f64 {
        let k = self.termination.obs_per_var;
        let n = dist.len() / k;
        (dist.iter().zip(self.termination.rewards()).map(|(p, q)| p * q).sum::<f64>() / n as f64).clamp(0.0, 1.0)
    }

    /// Runs one episode until the environment terminates.
    ///
    /// An environment or model fault ends the episode early; the record keeps
    /// the steps taken so far and the error message.
    pub fn run_episode(&mut self, env: &mut Pinball) -> EpisodeRecord {
        self.run_episode_with(env, |_, _| {})
    }

    /// [`Agent::run_episode`] that also hands every frame to `on_frame`
    /// together with its step index (0 for the reset frame).
    pub fn run_episode_with<F>(&mut self, env: &mut Pinball, mut on_frame: F) -> EpisodeRecord
    where
        F: FnMut(usize, &Frame),
    {
        let start = Instant::now();
        let mut steps = Vec::new();
        let error = self.episode_loop(env, &mut steps, &mut on_frame).err().map(|e| e.to_string());
        EpisodeRecord {
            episode_return: steps.iter().map(|s| s.reward).sum(),
            steps,
            elapsed: start.elapsed(),
            error,
        }
    }

    fn episode_loop(
        &mut self,
        env: &mut Pinball,
        steps: &mut Vec<StepRecord>,
        on_frame: &mut dyn FnMut(usize, &Frame),
    ) -> Result<()> {
        self.begin_episode();
        let first = env.reset();
        on_frame(0, &first.frame);
        self.observe(&first.frame, self.null_action(), 0.0, first.terminal)?;
        let mut terminal = first.terminal;
        while !terminal {
            let action = self.select_action()?;
            let out = env.step(action)?;
            on_frame(steps.len() + 1, &out.frame);
            let seen = self.observe(&out.frame, action, out.reward, out.terminal)?;
            steps.push(StepRecord {
                step: steps.len() + 1,
                action,
                reward: out.reward,
                surprise: seen.surprise,
                segments: self.memory.segment_count(),
                memory_surprise: seen.memory_surprise,
                observation: seen.states,
            });
            terminal = out.terminal;
        }
        Ok(())
    }

    pub(crate) fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        codec::write_tag(w, b"AGT1")?;
        let cfg = toml::to_string(&self.config).map_err(|e| Error::Config(e.to_string()))?;
        codec::write_bytes(w, cfg.as_bytes())?;
        codec::write_usize(w, self.n_env_actions)?;
        self.encoder.write_to(w)?;
        self.memory.write_to(w)?;
        self.sr.write_to(w)?;
        codec::write_f64(w, self.reward.learning_rate)?;
        codec::write_f64(w, self.reward.scale)?;
        codec::write_usize(w, self.reward.obs_per_var)?;
        codec::write_f64s(w, &self.reward.r)?;
        codec::write_f64s(w, &self.termination.r)?;
        codec::write_rng(w, &self.rng)
    }

    pub(crate) fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        codec::expect_tag(r, b"AGT1")?;
        let cfg = codec::read_bytes(r, 1 << 16)?;
        let cfg = std::str::from_utf8(&cfg).map_err(|e| Error::Parse(e.to_string()))?;
        let config: AgentConfig = toml::from_str(cfg).map_err(|e| Error::Parse(e.to_string()))?;
        let n_env_actions = codec::read_usize(r)?;
        let encoder = SpatialPooler::read_from(r)?;
        let memory = Memory::read_from(r)?;
        let sr = SrMatrix::read_from(r)?;
        let learning_rate = codec::read_f64(r)?;
        let scale = codec::read_f64(r)?;
        let obs_per_var = codec::read_usize(r)?;
        let rewards = codec::read_f64s(r, sr.n_obs())?;
        let ended = codec::read_f64s(r, sr.n_obs())?;
        let t = *memory.topology();
        if rewards.len() != sr.n_obs()
            || ended.len() != sr.n_obs()
            || obs_per_var != t.n_obs_states
            || sr.n_cells() != t.n_hidden_cells()
            || t.n_actions != n_env_actions + 1
        {
            return Err(Error::Parse("agent sections disagree on sizes".into()));
        }
        let reward = RewardModel { r: rewards, obs_per_var, learning_rate, scale };
        let termination = RewardModel { r: ended, obs_per_var, learning_rate, scale: 1.0 };
        let rng = codec::read_rng(r)?;
        Ok(Self {
            config,
            encoder,
            memory,
            sr,
            reward,
            termination,
            n_env_actions,
            rng,
            prev_frame: None,
            readouts: VecDeque::new(),
        })
    }
}

/// `softmax(values / temperature)`.
pub fn policy_from_values(values: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = values.iter().map(|v| v / temperature).collect();
    softmax(&scaled)
}

/// Agent and environment seeded from one trial seed.
pub fn trial(
    agent: AgentConfig,
    encoder: EncoderConfig,
    memory: MemoryConfig,
    env: crate::env::PinballConfig,
    trial_seed: u64,
) -> Result<(Agent, Pinball)> {
    let n_actions = env.actions.len();
    let env = Pinball::new(env, component_rng(trial_seed, Stream::Environment))?;
    let agent = Agent::new(agent, encoder, memory, n_actions, trial_seed)?;
    Ok((agent, env))
}
