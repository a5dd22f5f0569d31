//! Spatial pooler encoder and a linear decoder for inspecting its output.
//!
//! The pooler turns a binary input (an event image) into an SDR with a fixed
//! number of active neurons. Neurons hold real-valued, row-normalized weights
//! over a binary receptive field. Overlaps are `boost_i * (W_i . obs)` and the
//! winners are chosen by k-WTA, optionally per contiguous block of neurons so
//! that every block contributes the same number of winners.
//!
//! Learning is Hebbian: each winner moves a fixed fraction `alpha` of weight
//! mass onto the active inputs inside its receptive field and renormalizes.
//!
//! A newborn stage runs first. During it, boosting (exponential homeostasis
//! towards the target activity rate) is enabled with a scale that decays
//! linearly to zero, and receptive fields are pruned linearly from their
//! initial size to the target size by removing the weakest connections.
//! Afterwards the pooler is an adult: boosting is exactly neutral.

use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::error::{invalid_arg, Error, Result};
use crate::sdr::{top_k_indices, Sdr};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub num_neurons: usize,
    /// Output neurons are split into this many equal contiguous blocks.
    pub blocks: usize,
    pub winners_per_block: usize,
    /// Initial fraction of inputs each neuron is connected to.
    pub connectivity: f64,
    pub learning_rate: f64,
    /// Initial boosting scale `s` in `exp(s * (target_rate - rate))`. A
    /// neuron that never fires is boosted by at most `exp(s * target_rate)`.
    pub boost_strength: f64,
    pub newborn_steps: usize,
    /// Receptive field size reached at the end of the newborn stage.
    pub target_rf_size: usize,
    /// Horizon of the moving average of neuron activity.
    pub activity_horizon: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            input_dim: 50 * 36,
            num_neurons: 128,
            blocks: 4,
            winners_per_block: 1,
            connectivity: 0.5,
            learning_rate: 0.02,
            boost_strength: 300.0,
            newborn_steps: 1500,
            target_rf_size: 24,
            activity_horizon: 1000.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_neurons == 0 || self.blocks == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        if !self.num_neurons.is_multiple_of(self.blocks) {
            return Err(Error::Config(format!(
                "{} neurons cannot be split into {} equal blocks",
                self.num_neurons, self.blocks
            )));
        }
        if self.winners_per_block == 0 || self.winners_per_block > self.block_size() {
            return Err(Error::Config("winners_per_block must be in 1..=block size".into()));
        }
        if !(0.0..=1.0).contains(&self.connectivity) || self.initial_rf_size() == 0 {
            return Err(Error::Config("connectivity must yield at least one connection".into()));
        }
        if self.target_rf_size == 0 || self.target_rf_size > self.initial_rf_size() {
            return Err(Error::Config(format!(
                "target receptive field size {} outside 1..={}",
                self.target_rf_size,
                self.initial_rf_size()
            )));
        }
        if !(self.learning_rate >= 0.0) || !(self.activity_horizon >= 1.0) {
            return Err(Error::Config("invalid encoder learning parameters".into()));
        }
        Ok(())
    }

    pub fn block_size(&self) -> usize {
        self.num_neurons / self.blocks
    }

    /// Output sparsity `k`.
    pub fn k(&self) -> usize {
        self.blocks * self.winners_per_block
    }

    pub fn initial_rf_size(&self) -> usize {
        ((self.input_dim as f64) * self.connectivity).round() as usize
    }

    fn target_rate(&self) -> f64 {
        self.winners_per_block as f64 / self.block_size() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Newborn,
    Adult,
}

#[derive(Debug, Clone)]
pub struct SpatialPooler {
    config: EncoderConfig,
    /// Dense `num_neurons x input_dim` weights, zero outside the receptive field.
    weights: Vec<f64>,
    /// Dense `num_neurons x input_dim` connectivity mask.
    rf: Vec<bool>,
    rf_size: Vec<usize>,
    activity: Vec<f64>,
    boost_scale: f64,
    stage: Stage,
    newborn_remaining: usize,
}

impl SpatialPooler {
    /// Random receptive fields of exactly `initial_rf_size` inputs with random
    /// positive weights, normalized per row.
    pub fn new<R: Rng + ?Sized>(config: EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let n_in = config.input_dim;
        let size = config.initial_rf_size();
        let mut masks = Vec::with_capacity(config.num_neurons);
        let mut init = Vec::with_capacity(config.num_neurons);
        for _ in 0..config.num_neurons {
            let mut mask = vec![false; n_in];
            let mut row = vec![0.0; n_in];
            for j in sample(rng, n_in, size) {
                mask[j] = true;
                row[j] = rng.random::<f64>() + 1e-3;
            }
            masks.push(mask);
            init.push(row);
        }
        Self::from_parts(config, masks, Some(init))
    }

    /// Builds a pooler from explicit receptive fields with uniform weights.
    pub fn with_receptive_fields(config: EncoderConfig, masks: Vec<Vec<bool>>) -> Result<Self> {
        Self::from_parts(config, masks, None)
    }

    fn from_parts(
        config: EncoderConfig,
        masks: Vec<Vec<bool>>,
        init: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if config.num_neurons == 0 || config.blocks == 0 || !config.num_neurons.is_multiple_of(config.blocks) {
            return Err(Error::Config("neurons must split into equal blocks".into()));
        }
        if masks.len() != config.num_neurons || masks.iter().any(|m| m.len() != config.input_dim) {
            return invalid_arg("receptive field masks do not match the configured shape");
        }
        let n_in = config.input_dim;
        let mut weights = vec![0.0; config.num_neurons * n_in];
        let mut rf = vec![false; config.num_neurons * n_in];
        let mut rf_size = vec![0; config.num_neurons];
        for (i, mask) in masks.iter().enumerate() {
            let count = mask.iter().filter(|&&b| b).count();
            if count == 0 {
                return invalid_arg(format!("neuron {i} has an empty receptive field"));
            }
            rf_size[i] = count;
            for (j, &on) in mask.iter().enumerate() {
                if on {
                    rf[i * n_in + j] = true;
                    weights[i * n_in + j] = match &init {
                        Some(rows) => rows[i][j],
                        None => 1.0,
                    };
                }
            }
        }
        let stage = if config.newborn_steps == 0 { Stage::Adult } else { Stage::Newborn };
        let boost_scale = if stage == Stage::Newborn { config.boost_strength } else { 0.0 };
        let mut sp = Self {
            activity: vec![config.target_rate(); config.num_neurons],
            newborn_remaining: config.newborn_steps,
            config,
            weights,
            rf,
            rf_size,
            boost_scale,
            stage,
        };
        for i in 0..sp.config.num_neurons {
            sp.normalize_row(i);
        }
        Ok(sp)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn boost_scale(&self) -> f64 {
        self.boost_scale
    }

    pub fn newborn_remaining(&self) -> usize {
        self.newborn_remaining
    }

    pub fn output_dim(&self) -> usize {
        self.config.num_neurons
    }

    pub fn weight_row(&self, neuron: usize) -> &[f64] {
        let n = self.config.input_dim;
        &self.weights[neuron * n..(neuron + 1) * n]
    }

    pub fn receptive_field(&self, neuron: usize) -> &[bool] {
        let n = self.config.input_dim;
        &self.rf[neuron * n..(neuron + 1) * n]
    }

    pub fn receptive_field_size(&self, neuron: usize) -> usize {
        self.rf_size[neuron]
    }

    /// Boosting multiplier of a neuron; exactly 1 in the adult stage.
    pub fn boost(&self, neuron: usize) -> f64 {
        if self.stage == Stage::Adult || self.boost_scale == 0.0 {
            return 1.0;
        }
        (self.boost_scale * (self.config.target_rate() - self.activity[neuron])).exp()
    }

    /// Boosted overlaps `boost_i * (W_i . obs)`.
    pub fn overlaps(&self, obs: &Sdr) -> Result<Vec<f64>> {
        if obs.dimension() != self.config.input_dim {
            return invalid_arg(format!(
                "observation of length {} for encoder with input_dim {}",
                obs.dimension(),
                self.config.input_dim
            ));
        }
        Ok((0..self.config.num_neurons)
            .map(|i| {
                let row = self.weight_row(i);
                let raw: f64 = obs.active().iter().map(|&j| row[j]).sum();
                self.boost(i) * raw
            })
            .collect())
    }

    /// Encodes a binary observation; the result always has exactly `k` bits.
    pub fn encode(&self, obs: &Sdr) -> Result<Sdr> {
        let overlaps = self.overlaps(obs)?;
        let bs = self.config.block_size();
        let mut active = Vec::with_capacity(self.config.k());
        for b in 0..self.config.blocks {
            let block = &overlaps[b * bs..(b + 1) * bs];
            active.extend(
                top_k_indices(block, self.config.winners_per_block)
                    .into_iter()
                    .map(|i| b * bs + i),
            );
        }
        Sdr::new(self.config.num_neurons, active)
    }

    /// Hebbian update of the winners in `z` towards `obs`, followed by the
    /// activity-rate update used by boosting.
    pub fn learn(&mut self, obs: &Sdr, z: &Sdr) -> Result<()> {
        if obs.dimension() != self.config.input_dim || z.dimension() != self.config.num_neurons {
            return invalid_arg("learn called with mismatched dimensions");
        }
        let n = self.config.input_dim;
        let alpha = self.config.learning_rate;
        if alpha > 0.0 {
            for &i in z.active() {
                let base = i * n;
                let covered = obs.active().iter().filter(|&&j| self.rf[base + j]).count();
                if covered == 0 {
                    continue;
                }
                let delta = alpha / covered as f64;
                for &j in obs.active() {
                    if self.rf[base + j] {
                        self.weights[base + j] += delta;
                    }
                }
                self.normalize_row(i);
            }
        }
        let decay = 1.0 / self.config.activity_horizon;
        for (i, rate) in self.activity.iter_mut().enumerate() {
            let on = if z.contains(i) { 1.0 } else { 0.0 };
            *rate += decay * (on - *rate);
        }
        Ok(())
    }

    /// Advances the newborn stage by one step: anneals boosting and prunes
    /// receptive fields towards the target size. No-op for adults.
    pub fn newborn_step(&mut self) {
        if self.stage == Stage::Adult {
            return;
        }
        self.newborn_remaining = self.newborn_remaining.saturating_sub(1);
        let total = self.config.newborn_steps.max(1) as f64;
        let frac = self.newborn_remaining as f64 / total;
        self.boost_scale = self.config.boost_strength * frac;
        let initial = self.config.initial_rf_size() as f64;
        let target = self.config.target_rf_size as f64;
        let allowed = (target + (initial - target) * frac).ceil() as usize;
        for i in 0..self.config.num_neurons {
            if self.rf_size[i] > allowed {
                self.prune(i, allowed);
            }
        }
        if self.newborn_remaining == 0 {
            self.stage = Stage::Adult;
            self.boost_scale = 0.0;
        }
    }

    /// Removes the weakest connections of `neuron` until `keep` remain.
    fn prune(&mut self, neuron: usize, keep: usize) {
        let n = self.config.input_dim;
        let base = neuron * n;
        let mut conns: Vec<usize> = (0..n).filter(|&j| self.rf[base + j]).collect();
        let drop = conns.len().saturating_sub(keep);
        if drop == 0 {
            return;
        }
        let w = &self.weights;
        conns.select_nth_unstable_by(drop - 1, |&a, &b| {
            w[base + a].total_cmp(&w[base + b]).then(a.cmp(&b))
        });
        for &j in &conns[..drop] {
            self.rf[base + j] = false;
            self.weights[base + j] = 0.0;
        }
        self.rf_size[neuron] = keep;
        self.normalize_row(neuron);
    }

    fn normalize_row(&mut self, neuron: usize) {
        let n = self.config.input_dim;
        let row = &mut self.weights[neuron * n..(neuron + 1) * n];
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|w| *w /= sum);
        }
    }

    pub(crate) fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        codec::write_tag(w, b"ENC1")?;
        let c = &self.config;
        for v in [c.input_dim, c.num_neurons, c.blocks, c.winners_per_block, c.newborn_steps, c.target_rf_size] {
            codec::write_usize(w, v)?;
        }
        for v in [c.connectivity, c.learning_rate, c.boost_strength, c.activity_horizon] {
            codec::write_f64(w, v)?;
        }
        codec::write_f64s(w, &self.weights)?;
        let mask: Vec<u8> = self.rf.iter().map(|&b| b as u8).collect();
        codec::write_bytes(w, &mask)?;
        codec::write_f64s(w, &self.activity)?;
        codec::write_f64(w, self.boost_scale)?;
        codec::write_usize(w, self.newborn_remaining)?;
        w.write_all(&[(self.stage == Stage::Adult) as u8])?;
        Ok(())
    }

    pub(crate) fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        codec::expect_tag(r, b"ENC1")?;
        const LIMIT: usize = 1 << 28;
        let mut dims = [0usize; 6];
        for d in dims.iter_mut() {
            *d = codec::read_len(r, LIMIT)?;
        }
        let mut reals = [0f64; 4];
        for v in reals.iter_mut() {
            *v = codec::read_f64(r)?;
        }
        let config = EncoderConfig {
            input_dim: dims[0],
            num_neurons: dims[1],
            blocks: dims[2],
            winners_per_block: dims[3],
            newborn_steps: dims[4],
            target_rf_size: dims[5],
            connectivity: reals[0],
            learning_rate: reals[1],
            boost_strength: reals[2],
            activity_horizon: reals[3],
        };
        config.validate().map_err(|e| Error::Parse(e.to_string()))?;
        let cells = config.input_dim * config.num_neurons;
        let weights = codec::read_f64s(r, cells)?;
        let mask = codec::read_bytes(r, cells)?;
        let activity = codec::read_f64s(r, config.num_neurons)?;
        if weights.len() != cells || mask.len() != cells || activity.len() != config.num_neurons {
            return Err(Error::Parse("encoder section has inconsistent sizes".into()));
        }
        let boost_scale = codec::read_f64(r)?;
        let newborn_remaining = codec::read_usize(r)?;
        let mut stage = [0u8];
        r.read_exact(&mut stage)?;
        let rf: Vec<bool> = mask.iter().map(|&b| b != 0).collect();
        let rf_size = rf
            .chunks(config.input_dim)
            .map(|row| row.iter().filter(|&&b| b).count())
            .collect();
        Ok(Self {
            config,
            weights,
            rf,
            rf_size,
            activity,
            boost_scale,
            stage: if stage[0] == 1 { Stage::Adult } else { Stage::Newborn },
            newborn_remaining,
        })
    }
}

/// Linear layer mapping an SDR back to input space, trained by gradient
/// descent on the squared reconstruction error.
#[derive(Debug, Clone)]
pub struct LinearDecoder {
    sdr_dim: usize,
    output_dim: usize,
    weights: Vec<f64>,
    learning_rate: f64,
}

impl LinearDecoder {
    pub fn new(sdr_dim: usize, output_dim: usize, learning_rate: f64) -> Self {
        Self {
            sdr_dim,
            output_dim,
            weights: vec![0.0; sdr_dim * output_dim],
            learning_rate,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn decode(&self, z: &Sdr) -> Result<Vec<f64>> {
        if z.dimension() != self.sdr_dim {
            return invalid_arg("decoder input dimension mismatch");
        }
        let mut out = vec![0.0; self.output_dim];
        for &i in z.active() {
            let row = &self.weights[i * self.output_dim..(i + 1) * self.output_dim];
            out.iter_mut().zip(row).for_each(|(o, w)| *o += w);
        }
        Ok(out)
    }

    /// One gradient step on `0.5 * |decode(z) - obs|^2`; returns the MSE
    /// before the step.
    pub fn learn(&mut self, z: &Sdr, obs: &Sdr) -> Result<f64> {
        if obs.dimension() != self.output_dim {
            return invalid_arg("decoder target dimension mismatch");
        }
        let mut err = self.decode(z)?;
        for &j in obs.active() {
            err[j] -= 1.0;
        }
        let mse = err.iter().map(|e| e * e).sum::<f64>() / self.output_dim as f64;
        if self.learning_rate != 0.0 {
            for &i in z.active() {
                let row = &mut self.weights[i * self.output_dim..(i + 1) * self.output_dim];
                row.iter_mut().zip(&err).for_each(|(w, e)| *w -= self.learning_rate * e);
            }
        }
        Ok(mse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> EncoderConfig {
        EncoderConfig {
            input_dim: 100,
            num_neurons: 20,
            blocks: 1,
            winners_per_block: 4,
            connectivity: 0.5,
            learning_rate: 0.1,
            boost_strength: 10.0,
            newborn_steps: 0,
            target_rf_size: 50,
            activity_horizon: 1000.0,
        }
    }

    fn random_obs(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Sdr {
        Sdr::new(dim, sample(rng, dim, n).into_vec()).unwrap()
    }

    fn row_sums_ok(sp: &SpatialPooler) {
        for i in 0..sp.output_dim() {
            let row = sp.weight_row(i);
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "row {i} sums to {s}");
            for (w, &on) in row.iter().zip(sp.receptive_field(i)) {
                assert_eq!(*w > 0.0, on);
            }
        }
    }

    #[test]
    fn zero_observation_picks_lowest_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sp = SpatialPooler::new(small_config(), &mut rng).unwrap();
        let z = sp.encode(&Sdr::empty(100).unwrap()).unwrap();
        assert_eq!(z.active(), &[0, 1, 2, 3]);

        let cfg = EncoderConfig { blocks: 4, winners_per_block: 1, ..small_config() };
        let sp = SpatialPooler::new(cfg, &mut rng).unwrap();
        let z = sp.encode(&Sdr::empty(100).unwrap()).unwrap();
        assert_eq!(z.active(), &[0, 5, 10, 15]);
    }

    #[test]
    fn unique_matching_neuron_wins() {
        let cfg = EncoderConfig { winners_per_block: 1, ..small_config() };
        let mut masks = vec![vec![false; 100]; 20];
        for (i, m) in masks.iter_mut().enumerate() {
            m[50 + i] = true;
        }
        masks[7][..5].fill(true);
        masks[7][57] = false;
        let sp = SpatialPooler::with_receptive_fields(cfg, masks).unwrap();
        let obs = Sdr::new(100, (0..5).collect()).unwrap();
        assert_eq!(sp.encode(&obs).unwrap().active(), &[7]);
    }

    #[test]
    fn encode_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sp = SpatialPooler::new(small_config(), &mut rng).unwrap();
        for _ in 0..20 {
            let obs = random_obs(&mut rng, 100, 15);
            let dense = obs.to_dense();
            let scores: Vec<f64> = (0..20)
                .map(|i| {
                    sp.weight_row(i)
                        .iter()
                        .zip(&dense)
                        .map(|(w, &o)| w * o as f64)
                        .sum()
                })
                .collect();
            let mut order: Vec<usize> = (0..20).collect();
            order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
            let mut expect = order[..4].to_vec();
            expect.sort();
            assert_eq!(sp.encode(&obs).unwrap().active(), expect.as_slice());
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sp = SpatialPooler::new(small_config(), &mut rng).unwrap();
        assert!(sp.encode(&Sdr::empty(99).unwrap()).is_err());
    }

    #[test]
    fn zero_rate_leaves_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sp = SpatialPooler::new(EncoderConfig { learning_rate: 0.0, ..small_config() }, &mut rng).unwrap();
        let before = sp.weights.clone();
        let obs = random_obs(&mut rng, 100, 10);
        let z = sp.encode(&obs).unwrap();
        sp.learn(&obs, &z).unwrap();
        assert_eq!(before, sp.weights);
    }

    #[test]
    fn learning_keeps_rows_normalized_and_skips_uncovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sp = SpatialPooler::new(small_config(), &mut rng).unwrap();
        for _ in 0..200 {
            let obs = random_obs(&mut rng, 100, 12);
            let z = sp.encode(&obs).unwrap();
            sp.learn(&obs, &z).unwrap();
        }
        row_sums_ok(&sp);

        let cfg = EncoderConfig { winners_per_block: 1, ..small_config() };
        let masks: Vec<Vec<bool>> = (0..20).map(|i| (0..100).map(|j| j == 80 + i).collect()).collect();
        let mut sp = SpatialPooler::with_receptive_fields(cfg, masks).unwrap();
        let obs = Sdr::new(100, vec![1, 2]).unwrap();
        let z = sp.encode(&obs).unwrap();
        let before = sp.weights.clone();
        sp.learn(&obs, &z).unwrap();
        assert_eq!(before, sp.weights);
    }

    #[test]
    fn repeated_pattern_concentrates_mass() {
        // Independent recurrence for the mass a winner holds on the pattern:
        // p' = (p + alpha) / (1 + alpha).
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = EncoderConfig { winners_per_block: 1, learning_rate: 0.05, ..small_config() };
        let mut sp = SpatialPooler::new(cfg.clone(), &mut rng).unwrap();
        let obs = random_obs(&mut rng, 100, 20);
        let z = sp.encode(&obs).unwrap();
        let winner = z.active()[0];
        let mass = |sp: &SpatialPooler| -> f64 {
            obs.active().iter().map(|&j| sp.weight_row(winner)[j]).sum()
        };
        let mut expected = mass(&sp);
        for _ in 0..50 {
            let z = sp.encode(&obs).unwrap();
            assert_eq!(z.active(), &[winner]);
            sp.learn(&obs, &z).unwrap();
            expected = (expected + cfg.learning_rate) / (1.0 + cfg.learning_rate);
            assert!((mass(&sp) - expected).abs() < 1e-12);
        }
        assert!(mass(&sp) > 0.9);
    }

    #[test]
    fn newborn_stage_anneals_and_prunes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = EncoderConfig {
            input_dim: 1000,
            num_neurons: 16,
            newborn_steps: 40,
            target_rf_size: 25,
            winners_per_block: 2,
            ..small_config()
        };
        let mut sp = SpatialPooler::new(cfg, &mut rng).unwrap();
        assert_eq!(sp.receptive_field_size(0), 500);
        assert_eq!(sp.stage(), Stage::Newborn);
        let mut last = sp.boost_scale();
        for _ in 0..40 {
            let obs = random_obs(&mut rng, 1000, 100);
            let z = sp.encode(&obs).unwrap();
            assert_eq!(z.len(), 2);
            sp.learn(&obs, &z).unwrap();
            sp.newborn_step();
            assert!(sp.boost_scale() <= last);
            last = sp.boost_scale();
            row_sums_ok(&sp);
        }
        assert_eq!(sp.stage(), Stage::Adult);
        assert_eq!(sp.boost_scale(), 0.0);
        for i in 0..16 {
            assert_eq!(sp.receptive_field_size(i), 25);
            assert_eq!(sp.boost(i), 1.0);
        }
        // adults ignore further newborn steps
        let snapshot = sp.weights.clone();
        sp.newborn_step();
        assert_eq!(snapshot, sp.weights);
    }

    #[test]
    fn target_equal_to_initial_prunes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = EncoderConfig { newborn_steps: 10, target_rf_size: 50, ..small_config() };
        let mut sp = SpatialPooler::new(cfg, &mut rng).unwrap();
        let rf = sp.rf.clone();
        for _ in 0..10 {
            sp.newborn_step();
        }
        assert_eq!(rf, sp.rf);
        assert_eq!(sp.stage(), Stage::Adult);
    }

    #[test]
    fn boosting_favours_quiet_neurons() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = EncoderConfig { newborn_steps: 1000, activity_horizon: 10.0, ..small_config() };
        let mut sp = SpatialPooler::new(cfg, &mut rng).unwrap();
        let obs = random_obs(&mut rng, 100, 10);
        let z = sp.encode(&obs).unwrap();
        for _ in 0..20 {
            sp.learn(&obs, &z).unwrap();
        }
        let winner = z.active()[0];
        let loser = (0..20).find(|i| !z.contains(*i)).unwrap();
        assert!(sp.boost(winner) < 1.0);
        assert!(sp.boost(loser) > 1.0);
    }

    #[test]
    fn decoder_basics() {
        let z = Sdr::new(8, vec![1, 5]).unwrap();
        let obs = Sdr::new(6, vec![0, 3]).unwrap();
        let mut dec = LinearDecoder::new(8, 6, 0.0);
        assert_eq!(dec.decode(&z).unwrap(), vec![0.0; 6]);
        dec.learn(&z, &obs).unwrap();
        assert!(dec.weights().iter().all(|&w| w == 0.0));
        assert!(dec.decode(&Sdr::empty(7).unwrap()).is_err());
    }

    #[test]
    fn decoder_error_follows_closed_form() {
        // Single pattern with |z| = k rows updated identically: the residual
        // shrinks by (1 - lr * k) per step, so MSE_t = MSE_0 (1 - lr k)^(2t).
        let z = Sdr::new(10, vec![2, 4, 7]).unwrap();
        let obs = Sdr::new(12, vec![0, 5, 6, 11]).unwrap();
        let lr = 0.05;
        let mut dec = LinearDecoder::new(10, 12, lr);
        let mse0 = 4.0 / 12.0;
        let mut prev = f64::INFINITY;
        for t in 0..10 {
            let mse = dec.learn(&z, &obs).unwrap();
            let expect = mse0 * (1.0 - lr * 3.0f64).powi(2 * t);
            assert!((mse - expect).abs() < 1e-12);
            assert!(mse < prev);
            prev = mse;
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut sp = SpatialPooler::new(EncoderConfig { newborn_steps: 5, ..small_config() }, &mut rng).unwrap();
        let obs = random_obs(&mut rng, 100, 10);
        let z = sp.encode(&obs).unwrap();
        sp.learn(&obs, &z).unwrap();
        sp.newborn_step();
        let mut buf = Vec::new();
        sp.write_to(&mut buf).unwrap();
        let back = SpatialPooler::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.weights, sp.weights);
        assert_eq!(back.rf_size, sp.rf_size);
        assert_eq!(back.encode(&obs).unwrap(), sp.encode(&obs).unwrap());
    }
}
