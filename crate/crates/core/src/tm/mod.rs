//! Distributed Hebbian Temporal Memory.
//!
//! Each hidden variable is filtered independently. The transition factor of a
//! variable is stored sparsely as segments attached to its cells: a segment
//! holds one nonzero factor value `f`, a receptive field of presynaptic cells
//! from the previous step, and per-synapse specificity weights `w`.
//!
//! Prediction for cell `j` is `max_l (log f_l + log L_l)` over its segments,
//! followed by a softmax within the variable. The segment log-likelihood
//! interpolates between "presynaptic cells fire together" (`w -> 1`, average
//! of messages) and "independent presynaptic cells" (`w -> 0`, product of
//! messages):
//!
//! ```text
//! log L = log(sum_u w_u m_u + eps) + sum_u (1 - w_u) log(max(m_u, eps_m)) - log n
//! ```
//!
//! Emissions are fixed by construction: a cell only explains the observation
//! state of its column. Learning samples one winner cell per variable from the
//! previous and current posteriors and applies Hebbian updates to `f` and `w`.

mod belief;
mod topology;

use std::io::{Read, Write};

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use belief::BeliefState;
pub use topology::Topology;

use crate::codec;
use crate::error::{invalid_arg, Error, Result};
use crate::prob::{sample_categorical, softmax_into};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    pub topology: Topology,
    /// Learning rate of segment factor values.
    pub factor_lr: f64,
    /// Learning rate of synapse specificity weights.
    pub specificity_lr: f64,
    /// Initial factor value of a new segment; defaults to `factor_lr`.
    pub initial_factor: Option<f64>,
    pub initial_specificity: f64,
    /// Floor inside the log of the weighted message sum.
    pub eps: f64,
    /// Floor applied to individual messages before taking logs.
    pub eps_message: f64,
    /// Excitation of cells without segments is `ln(eps_floor)`.
    pub eps_floor: f64,
    /// Prior column mass below which the posterior bursts to uniform.
    pub burst_threshold: f64,
    pub max_segments_per_cell: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            topology: Topology {
                n_vars: 4,
                n_obs_states: 32,
                cells_per_column: 4,
                context_field_size: 5,
                n_actions: 4,
            },
            factor_lr: 0.1,
            specificity_lr: 0.1,
            initial_factor: None,
            initial_specificity: 0.5,
            eps: 1e-12,
            eps_message: 1e-12,
            eps_floor: 1e-9,
            burst_threshold: 1e-12,
            max_segments_per_cell: 16,
        }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.factor_lr) || !unit(self.specificity_lr) || !unit(self.initial_specificity) {
            return Err(Error::Config("memory learning rates must lie in [0, 1]".into()));
        }
        let f0 = self.f0();
        if !(f0 > 0.0 && f0 <= 1.0) {
            return Err(Error::Config(format!("initial factor {f0} outside (0, 1]")));
        }
        if !(self.eps > 0.0 && self.eps_message > 0.0 && self.eps_floor > 0.0) {
            return Err(Error::Config("memory floors must be positive".into()));
        }
        if self.max_segments_per_cell == 0 {
            return Err(Error::Config("max_segments_per_cell must be positive".into()));
        }
        Ok(())
    }

    pub fn f0(&self) -> f64 {
        self.initial_factor.unwrap_or(self.factor_lr)
    }
}

/// One nonzero entry of a variable's transition factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub owner: usize,
    /// Factor value in (0, 1]; its log is taken when predicting.
    pub factor: f64,
    pub receptive_field: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Per-step distributions produced by [`Memory::rollout`].
#[derive(Debug, Clone)]
pub struct Rollout {
    /// Predicted observation-state distribution for offsets 1..=T.
    pub obs_dists: Vec<Vec<f64>>,
    pub final_belief: BeliefState,
}

const MIN_FACTOR: f64 = 1e-30;

#[derive(Debug, Clone)]
pub struct Memory {
    config: MemoryConfig,
    segments: Vec<Option<Segment>>,
    free: Vec<usize>,
    by_owner: Vec<Vec<usize>>,
    by_presyn: Vec<Vec<usize>>,
    messages: BeliefState,
    /// True right after a reset: the messages carry no context.
    fresh: bool,
    rng: ChaCha8Rng,
}

impl Memory {
    pub fn new(config: MemoryConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let t = config.topology;
        Ok(Self {
            segments: Vec::new(),
            free: Vec::new(),
            by_owner: vec![Vec::new(); t.n_hidden_cells()],
            by_presyn: vec![Vec::new(); t.n_context_cells()],
            messages: BeliefState::uniform(&t),
            fresh: true,
            config,
            rng,
        })
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.config.topology
    }

    pub fn messages(&self) -> &BeliefState {
        &self.messages
    }

    /// Overwrites the current messages (e.g. to condition on a known state).
    pub fn set_messages(&mut self, messages: BeliefState) -> Result<()> {
        if messages.probs().len() != self.topology().n_hidden_cells() {
            return invalid_arg("message size does not match topology");
        }
        self.messages = messages;
        self.fresh = false;
        Ok(())
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len() - self.free.len()
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().flatten()
    }

    pub fn segments_of(&self, cell: usize) -> impl Iterator<Item = &Segment> {
        self.by_owner[cell].iter().filter_map(|&id| self.segments[id].as_ref())
    }

    pub fn segments_per_var(&self) -> Vec<usize> {
        let t = self.topology();
        let mut counts = vec![0; t.n_vars];
        for s in self.segments() {
            counts[t.var_of(s.owner)] += 1;
        }
        counts
    }

    /// Full scan check that owner and presynaptic indices agree with the store.
    pub fn check_indices(&self) -> bool {
        for (id, seg) in self.segments.iter().enumerate() {
            match seg {
                Some(s) => {
                    if !self.by_owner[s.owner].contains(&id) {
                        return false;
                    }
                    if s.receptive_field.iter().any(|&u| !self.by_presyn[u].contains(&id)) {
                        return false;
                    }
                }
                None => {
                    if !self.free.contains(&id) {
                        return false;
                    }
                }
            }
        }
        let owned: usize = self.by_owner.iter().map(Vec::len).sum();
        let synapses: usize = self.segments().map(|s| s.receptive_field.len()).sum();
        let indexed: usize = self.by_presyn.iter().map(Vec::len).sum();
        owned == self.segment_count() && synapses == indexed
    }

    /// Resets messages to uniform; segments are kept.
    pub fn reset(&mut self) {
        self.messages = BeliefState::uniform(self.topology());
        self.fresh = true;
    }

    fn check_action(&self, action: Option<usize>) -> Result<()> {
        match (self.topology().n_actions, action) {
            (0, None) => Ok(()),
            (0, Some(_)) => invalid_arg("memory has no action variable"),
            (_, None) => invalid_arg("an action is required"),
            (n, Some(a)) if a >= n => invalid_arg(format!("action {a} out of range 0..{n}")),
            _ => Ok(()),
        }
    }

    fn message_value(&self, messages: &BeliefState, action: Option<usize>, cell: usize) -> f64 {
        let t = self.topology();
        if t.is_action_cell(cell) {
            match action {
                Some(a) if t.action_cell(a) == cell => 1.0,
                _ => 0.0,
            }
        } else {
            messages.probs()[cell]
        }
    }

    /// Log-likelihood that `segment`'s context is active under `messages`.
    pub fn segment_log_likelihood(
        &self,
        segment: &Segment,
        messages: &BeliefState,
        action: Option<usize>,
    ) -> Result<f64> {
        if segment.receptive_field.is_empty() {
            return Err(Error::InvalidState("segment with empty receptive field".into()));
        }
        let (values, logs) = self.context_values(messages, action);
        Ok(self.log_likelihood_with(segment, &values, &logs))
    }

    /// Message value and its floored log for every context cell.
    fn context_values(&self, messages: &BeliefState, action: Option<usize>) -> (Vec<f64>, Vec<f64>) {
        let eps_m = self.config.eps_message;
        let n = self.topology().n_context_cells();
        let values: Vec<f64> = (0..n).map(|u| self.message_value(messages, action, u)).collect();
        let logs = values.iter().map(|m| m.max(eps_m).ln()).collect();
        (values, logs)
    }

    fn log_likelihood_with(&self, segment: &Segment, values: &[f64], logs: &[f64]) -> f64 {
        let mut weighted = 0.0;
        let mut independent = 0.0;
        for (&u, &w) in segment.receptive_field.iter().zip(&segment.weights) {
            weighted += w * values[u];
            independent += (1.0 - w) * logs[u];
        }
        let n = segment.receptive_field.len() as f64;
        (weighted + self.config.eps).ln() + independent - n.ln()
    }

    /// Prior over the current step given the stored messages and an action.
    pub fn predict(&self, action: Option<usize>) -> Result<BeliefState> {
        self.predict_from(&self.messages, action)
    }

    /// Prior over the next step given arbitrary previous-step messages.
    pub fn predict_from(&self, messages: &BeliefState, action: Option<usize>) -> Result<BeliefState> {
        self.check_action(action)?;
        let t = *self.topology();
        let (values, logs) = self.context_values(messages, action);
        let mut excitation = vec![f64::NEG_INFINITY; t.n_hidden_cells()];
        for seg in self.segments() {
            let e = seg.factor.ln() + self.log_likelihood_with(seg, &values, &logs);
            let slot = &mut excitation[seg.owner];
            if e > *slot {
                *slot = e;
            }
        }
        let floor = self.config.eps_floor.ln();
        for (cell, e) in excitation.iter_mut().enumerate() {
            if self.by_owner[cell].is_empty() {
                *e = floor;
            }
        }
        let mut out = BeliefState::from_raw(t.cells_per_var(), vec![0.0; t.n_hidden_cells()]);
        let n = t.cells_per_var();
        for k in 0..t.n_vars {
            softmax_into(&excitation[k * n..(k + 1) * n], out.var_mut(k));
        }
        Ok(out)
    }

    /// Restricts `prior` to the observed column of each variable.
    ///
    /// `obs[k]` is the observed state (column) of variable `k`. When the prior
    /// holds less than `burst_threshold` mass in that column the posterior is
    /// uniform over the column.
    pub fn observe(&self, prior: &BeliefState, obs: &[usize]) -> Result<BeliefState> {
        let t = self.topology();
        if obs.len() != t.n_vars {
            return invalid_arg(format!("expected {} observations, got {}", t.n_vars, obs.len()));
        }
        let cpc = t.cells_per_column;
        let mut post = BeliefState::from_raw(t.cells_per_var(), vec![0.0; t.n_hidden_cells()]);
        for (k, &o) in obs.iter().enumerate() {
            if o >= t.n_obs_states {
                return invalid_arg(format!("observation {o} out of range for variable {k}"));
            }
            let col = &prior.var(k)[o * cpc..(o + 1) * cpc];
            let mass: f64 = col.iter().sum();
            let dst = &mut post.var_mut(k)[o * cpc..(o + 1) * cpc];
            if mass < self.config.burst_threshold || !mass.is_finite() {
                dst.iter_mut().for_each(|p| *p = 1.0 / cpc as f64);
            } else {
                dst.iter_mut().zip(col).for_each(|(p, &q)| *p = q / mass);
            }
        }
        Ok(post)
    }

    /// One filtering step: predict, observe, learn, then carry the posterior.
    ///
    /// Right after [`Memory::reset`] there is no context: the prior is uniform
    /// and no learning happens.
    pub fn step(&mut self, action: Option<usize>, obs: &[usize]) -> Result<(BeliefState, BeliefState)> {
        self.check_action(action)?;
        let prior = if self.fresh {
            BeliefState::uniform(self.topology())
        } else {
            self.predict(action)?
        };
        let posterior = self.observe(&prior, obs)?;
        if !self.fresh {
            let prev = self.messages.clone();
            self.learn(&prev, &posterior, action)?;
        }
        self.messages = posterior.clone();
        self.fresh = false;
        Ok((prior, posterior))
    }

    /// Predict and observe without learning; advances the messages.
    pub fn infer(&mut self, action: Option<usize>, obs: &[usize]) -> Result<(BeliefState, BeliefState)> {
        self.check_action(action)?;
        let prior = if self.fresh {
            BeliefState::uniform(self.topology())
        } else {
            self.predict(action)?
        };
        let posterior = self.observe(&prior, obs)?;
        self.messages = posterior.clone();
        self.fresh = false;
        Ok((prior, posterior))
    }

    /// Monte-Carlo Hebbian update from one sampled winner per variable.
    pub fn learn(&mut self, prev: &BeliefState, cur: &BeliefState, action: Option<usize>) -> Result<()> {
        self.check_action(action)?;
        let t = *self.topology();
        let n = t.cells_per_var();
        let mut prev_winners: Vec<usize> = (0..t.n_vars)
            .map(|k| k * n + sample_categorical(prev.var(k), &mut self.rng))
            .collect();
        if let Some(a) = action {
            prev_winners.push(t.action_cell(a));
        }
        prev_winners.sort_unstable();
        let cur_winners: Vec<usize> = (0..t.n_vars)
            .map(|k| k * n + sample_categorical(cur.var(k), &mut self.rng))
            .collect();
        self.learn_winners(&prev_winners, &cur_winners)
    }

    /// Hebbian update for explicit winners. `prev_winners` are context cells
    /// (hidden and action), `cur_winners` one hidden cell per variable.
    pub fn learn_winners(&mut self, prev_winners: &[usize], cur_winners: &[usize]) -> Result<()> {
        let t = *self.topology();
        if prev_winners.iter().any(|&u| u >= t.n_context_cells())
            || cur_winners.iter().any(|&j| j >= t.n_hidden_cells())
        {
            return invalid_arg("winner cell out of range");
        }
        let mut prev: Vec<usize> = prev_winners.to_vec();
        prev.sort_unstable();
        prev.dedup();
        let is_prev = |u: &usize| prev.binary_search(u).is_ok();
        let alpha_f = self.config.factor_lr;
        let alpha_w = self.config.specificity_lr;

        // reinforce active segments of winners, grow where none is active
        for &j in cur_winners {
            let mut any_active = false;
            for &id in &self.by_owner[j] {
                let seg = self.segments[id].as_mut().expect("indexed segment exists");
                if seg.receptive_field.iter().all(is_prev) {
                    seg.factor += alpha_f * (1.0 - seg.factor);
                    any_active = true;
                }
            }
            if !any_active && !prev.is_empty() {
                let size = t.context_field_size.min(prev.len());
                let mut field: Vec<usize> = sample(&mut self.rng, prev.len(), size)
                    .into_iter()
                    .map(|i| prev[i])
                    .collect();
                field.sort_unstable();
                self.grow(j, field);
            }
        }

        // specificity update and punishment of false predictions
        let mut touched: Vec<usize> = prev.iter().flat_map(|&u| self.by_presyn[u].iter().copied()).collect();
        touched.sort_unstable();
        touched.dedup();
        for id in touched {
            let seg = self.segments[id].as_mut().expect("indexed segment exists");
            let active = seg.receptive_field.iter().all(is_prev);
            let s = if active { 1.0 } else { 0.0 };
            for (u, w) in seg.receptive_field.iter().zip(seg.weights.iter_mut()) {
                if is_prev(u) {
                    *w += alpha_w * (s - *w);
                }
            }
            if active && !cur_winners.contains(&seg.owner) {
                seg.factor = (seg.factor * (1.0 - alpha_f)).max(MIN_FACTOR);
            }
        }
        Ok(())
    }

    fn grow(&mut self, owner: usize, field: Vec<usize>) {
        // an identical field on the same cell is reinforced, not duplicated
        if let Some(&id) = self.by_owner[owner]
            .iter()
            .find(|&&id| self.segments[id].as_ref().is_some_and(|s| s.receptive_field == field))
        {
            let seg = self.segments[id].as_mut().expect("indexed segment exists");
            seg.factor += self.config.factor_lr * (1.0 - seg.factor);
            return;
        }
        if self.by_owner[owner].len() >= self.config.max_segments_per_cell {
            let weakest = self.by_owner[owner]
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let fa = self.segments[a].as_ref().map_or(0.0, |s| s.factor);
                    let fb = self.segments[b].as_ref().map_or(0.0, |s| s.factor);
                    fa.total_cmp(&fb).then(a.cmp(&b))
                })
                .expect("full cell has segments");
            self.remove(weakest);
        }
        let seg = Segment {
            owner,
            factor: self.config.f0(),
            weights: vec![self.config.initial_specificity; field.len()],
            receptive_field: field,
        };
        self.insert(seg);
    }

    fn insert(&mut self, seg: Segment) -> usize {
        let id = match self.free.pop() {
            Some(id) => id,
            None => {
                self.segments.push(None);
                self.segments.len() - 1
            }
        };
        self.place(id, seg);
        id
    }

    fn place(&mut self, id: usize, seg: Segment) {
        self.by_owner[seg.owner].push(id);
        for &u in &seg.receptive_field {
            self.by_presyn[u].push(id);
        }
        self.segments[id] = Some(seg);
    }

    fn remove(&mut self, id: usize) {
        if let Some(seg) = self.segments[id].take() {
            self.by_owner[seg.owner].retain(|&x| x != id);
            for &u in &seg.receptive_field {
                self.by_presyn[u].retain(|&x| x != id);
            }
            self.free.push(id);
        }
    }

    /// Adds a segment directly (fixtures and hand-built models).
    pub fn add_segment(&mut self, segment: Segment) -> Result<usize> {
        self.validate_segment(&segment)?;
        Ok(self.insert(segment))
    }

    fn validate_segment(&self, segment: &Segment) -> Result<()> {
        let t = self.topology();
        if segment.owner >= t.n_hidden_cells() {
            return invalid_arg("segment owner out of range");
        }
        if segment.receptive_field.is_empty() || segment.receptive_field.len() != segment.weights.len() {
            return invalid_arg("segment field and weights must be nonempty and aligned");
        }
        if segment.receptive_field.iter().any(|&u| u >= t.n_context_cells()) {
            return invalid_arg("presynaptic cell out of range");
        }
        let mut sorted = segment.receptive_field.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != segment.receptive_field.len() {
            return invalid_arg("presynaptic cells must be distinct");
        }
        if !(segment.factor > 0.0 && segment.factor <= 1.0)
            || segment.weights.iter().any(|w| !(0.0..=1.0).contains(w))
        {
            return invalid_arg("segment factor must be in (0, 1] and weights in [0, 1]");
        }
        Ok(())
    }

    /// Open-loop prediction `horizon` steps ahead from a copy of the messages.
    ///
    /// `action_sampler` picks the action fed to each prediction from the
    /// belief it starts from. The memory itself is not modified.
    pub fn rollout<F>(&self, horizon: usize, mut action_sampler: F) -> Result<Rollout>
    where
        F: FnMut(&BeliefState) -> Option<usize>,
    {
        if horizon == 0 {
            return invalid_arg("rollout horizon must be at least 1");
        }
        let t = *self.topology();
        let mut belief = self.messages.clone();
        let mut obs_dists = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let action = action_sampler(&belief);
            belief = self.predict_from(&belief, action)?;
            obs_dists.push(belief.column_marginals(&t));
        }
        Ok(Rollout { obs_dists, final_belief: belief })
    }

    pub(crate) fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        codec::write_tag(w, b"MEM1")?;
        let c = &self.config;
        let t = &c.topology;
        for v in [t.n_vars, t.n_obs_states, t.cells_per_column, t.context_field_size, t.n_actions, c.max_segments_per_cell] {
            codec::write_usize(w, v)?;
        }
        for v in [
            c.factor_lr,
            c.specificity_lr,
            c.f0(),
            c.initial_specificity,
            c.eps,
            c.eps_message,
            c.eps_floor,
            c.burst_threshold,
        ] {
            codec::write_f64(w, v)?;
        }
        // full slot table so segment ids survive a round trip
        codec::write_usize(w, self.segments.len())?;
        for slot in &self.segments {
            let Some(seg) = slot else {
                w.write_all(&[0])?;
                continue;
            };
            w.write_all(&[1])?;
            codec::write_usize(w, seg.owner)?;
            codec::write_f64(w, seg.factor)?;
            codec::write_usize(w, seg.receptive_field.len())?;
            for (&u, &wt) in seg.receptive_field.iter().zip(&seg.weights) {
                codec::write_usize(w, u)?;
                codec::write_f64(w, wt)?;
            }
        }
        codec::write_usize(w, self.free.len())?;
        for &id in &self.free {
            codec::write_usize(w, id)?;
        }
        codec::write_f64s(w, self.messages.probs())?;
        w.write_all(&[self.fresh as u8])?;
        codec::write_rng(w, &self.rng)?;
        Ok(())
    }

    pub(crate) fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        codec::expect_tag(r, b"MEM1")?;
        const LIMIT: usize = 1 << 24;
        let mut d = [0usize; 6];
        for x in d.iter_mut() {
            *x = codec::read_len(r, LIMIT)?;
        }
        let mut f = [0f64; 8];
        for x in f.iter_mut() {
            *x = codec::read_f64(r)?;
        }
        let config = MemoryConfig {
            topology: Topology {
                n_vars: d[0],
                n_obs_states: d[1],
                cells_per_column: d[2],
                context_field_size: d[3],
                n_actions: d[4],
            },
            max_segments_per_cell: d[5],
            factor_lr: f[0],
            specificity_lr: f[1],
            initial_factor: Some(f[2]),
            initial_specificity: f[3],
            eps: f[4],
            eps_message: f[5],
            eps_floor: f[6],
            burst_threshold: f[7],
        };
        config.validate().map_err(|e| Error::Parse(e.to_string()))?;
        if config.topology.n_context_cells() > LIMIT {
            return Err(Error::Parse("topology too large".into()));
        }
        let mut mem = Memory::new(config, rand::SeedableRng::seed_from_u64(0))?;
        let n_slots = codec::read_len(r, LIMIT)?;
        for _ in 0..n_slots {
            let mut flag = [0u8];
            r.read_exact(&mut flag)?;
            if flag[0] == 0 {
                mem.segments.push(None);
                continue;
            }
            let owner = codec::read_usize(r)?;
            let factor = codec::read_f64(r)?;
            let n = codec::read_len(r, 1 << 16)?;
            let mut receptive_field = Vec::with_capacity(n);
            let mut weights = Vec::with_capacity(n);
            for _ in 0..n {
                receptive_field.push(codec::read_usize(r)?);
                weights.push(codec::read_f64(r)?);
            }
            let seg = Segment { owner, factor, receptive_field, weights };
            mem.validate_segment(&seg).map_err(|e| Error::Parse(e.to_string()))?;
            mem.segments.push(None);
            let id = mem.segments.len() - 1;
            mem.place(id, seg);
        }
        let n_free = codec::read_len(r, n_slots)?;
        for _ in 0..n_free {
            let id = codec::read_usize(r)?;
            if id >= n_slots || mem.segments[id].is_some() || mem.free.contains(&id) {
                return Err(Error::Parse(format!("bad free segment slot {id}")));
            }
            mem.free.push(id);
        }
        if mem.free.len() + mem.segments().count() != n_slots {
            return Err(Error::Parse("segment slot table is inconsistent".into()));
        }
        let probs = codec::read_f64s(r, mem.topology().n_hidden_cells())?;
        mem.messages = BeliefState::from_probs(mem.topology(), probs).map_err(|e| Error::Parse(e.to_string()))?;
        let mut fresh = [0u8];
        r.read_exact(&mut fresh)?;
        mem.fresh = fresh[0] != 0;
        mem.rng = codec::read_rng(r)?;
        Ok(mem)
    }
}

#[cfg(test)]
mod tests;
