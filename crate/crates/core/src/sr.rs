//! Successor representations over hidden cells.
//!
//! `M[i][j]` is the discounted expected occupancy of observation state `j`
//! starting from hidden cell `i`. Rows are flat hidden cells across all
//! variables, columns are flat observation states across all variables, so
//! the SR of a belief is a single vector-matrix product.
//!
//! Learning is n-step TD: the first `T + 1` terms of the discounted sum come
//! from the memory's open-loop predictions, the tail is bootstrapped from `M`
//! at the belief `T + 1` steps ahead. Updates are weighted by the current
//! belief.

use std::io::{Read, Write};

use crate::codec;
use crate::error::{invalid_arg, Error, Result};

/// Probability floor used by the surprise metric.
pub const SURPRISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SrMatrix {
    n_cells: usize,
    n_vars: usize,
    obs_per_var: usize,
    m: Vec<f64>,
    gamma: f64,
    horizon: usize,
    lr: f64,
}

impl SrMatrix {
    pub fn new(n_cells: usize, n_vars: usize, obs_per_var: usize, gamma: f64, horizon: usize, lr: f64) -> Result<Self> {
        if n_cells == 0 || n_vars == 0 || obs_per_var == 0 {
            return invalid_arg("SR dimensions must be positive");
        }
        if !(0.0..1.0).contains(&gamma) {
            return invalid_arg(format!("discount {gamma} outside [0, 1)"));
        }
        if !lr.is_finite() || lr < 0.0 {
            return invalid_arg("SR learning rate must be finite and nonnegative");
        }
        Ok(Self {
            n_cells,
            n_vars,
            obs_per_var,
            m: vec![0.0; n_cells * n_vars * obs_per_var],
            gamma,
            horizon,
            lr,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_obs(&self) -> usize {
        self.n_vars * self.obs_per_var
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn row(&self, cell: usize) -> &[f64] {
        let n = self.n_obs();
        &self.m[cell * n..(cell + 1) * n]
    }

    pub fn row_mut(&mut self, cell: usize) -> &mut [f64] {
        let n = self.n_obs();
        &mut self.m[cell * n..(cell + 1) * n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.m
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.n_cells)
            .map(|i| self.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    fn check_belief(&self, belief: &[f64]) -> Result<()> {
        if belief.len() != self.n_cells {
            return invalid_arg(format!("belief over {} cells for SR with {} rows", belief.len(), self.n_cells));
        }
        Ok(())
    }

    /// `SR_j = sum_i b(i) M_ij`.
    pub fn sr_of_belief(&self, belief: &[f64]) -> Result<Vec<f64>> {
        self.check_belief(belief)?;
        let mut out = vec![0.0; self.n_obs()];
        for (i, &b) in belief.iter().enumerate() {
            if b != 0.0 {
                out.iter_mut().zip(self.row(i)).for_each(|(o, &m)| *o += b * m);
            }
        }
        Ok(out)
    }

    /// Linear value readout `sum_j SR_j R_j`.
    pub fn value(&self, belief: &[f64], reward: &[f64]) -> Result<f64> {
        if reward.len() != self.n_obs() {
            return invalid_arg("reward vector length does not match SR columns");
        }
        Ok(self.sr_of_belief(belief)?.iter().zip(reward).map(|(s, r)| s * r).sum())
    }

    /// n-step TD update.
    ///
    /// `predicted[l]` is the observation distribution at offset `l = 0..=T`
    /// (offset 0 is the current observation) and `future` the belief at offset
    /// `T + 1`. Returns the TD error vector.
    pub fn td_update(&mut self, belief: &[f64], predicted: &[Vec<f64>], future: &[f64]) -> Result<Vec<f64>> {
        self.check_belief(belief)?;
        self.check_belief(future)?;
        if predicted.len() != self.horizon + 1 {
            return invalid_arg(format!(
                "expected {} predicted distributions, got {}",
                self.horizon + 1,
                predicted.len()
            ));
        }
        if predicted.iter().any(|p| p.len() != self.n_obs()) {
            return invalid_arg("predicted distribution length does not match SR columns");
        }
        let mut target = vec![0.0; self.n_obs()];
        let mut discount = 1.0;
        for dist in predicted {
            target.iter_mut().zip(dist).for_each(|(t, &p)| *t += discount * p);
            discount *= self.gamma;
        }
        let tail = self.sr_of_belief(future)?;
        target.iter_mut().zip(&tail).for_each(|(t, &s)| *t += discount * s);
        self.apply(belief, &target)
    }

    /// TD update at the end of an episode: the target is the current
    /// observation distribution alone.
    pub fn td_update_terminal(&mut self, belief: &[f64], observed: &[f64]) -> Result<Vec<f64>> {
        self.check_belief(belief)?;
        if observed.len() != self.n_obs() {
            return invalid_arg("observed distribution length does not match SR columns");
        }
        self.apply(belief, observed)
    }

    fn apply(&mut self, belief: &[f64], target: &[f64]) -> Result<Vec<f64>> {
        let current = self.sr_of_belief(belief)?;
        let delta: Vec<f64> = target.iter().zip(&current).map(|(t, c)| t - c).collect();
        if self.lr != 0.0 {
            for (i, &b) in belief.iter().enumerate() {
                if b != 0.0 {
                    let step = self.lr * b;
                    self.row_mut(i).iter_mut().zip(&delta).for_each(|(m, &d)| *m += step * d);
                }
            }
        }
        Ok(delta)
    }

    /// SR of `belief`, clipped at zero and normalized within each variable.
    /// A variable with no positive mass gets a uniform distribution.
    pub fn normalized_readout(&self, belief: &[f64]) -> Result<Vec<f64>> {
        let mut sr = self.sr_of_belief(belief)?;
        for block in sr.chunks_mut(self.obs_per_var) {
            block.iter_mut().for_each(|x| *x = x.max(0.0));
            let s: f64 = block.iter().sum();
            if s > 0.0 && s.is_finite() {
                block.iter_mut().for_each(|x| *x /= s);
            } else {
                block.iter_mut().for_each(|x| *x = 1.0 / self.obs_per_var as f64);
            }
        }
        Ok(sr)
    }

    /// Surprise of the normalized readout at each future offset.
    ///
    /// `observed[l]` holds the observed state of every variable at offset
    /// `l + 1`. Each value is `-(1/K) sum_k log max(q_k(o_k), floor)`.
    pub fn surprise(&self, belief: &[f64], observed: &[Vec<usize>]) -> Result<Vec<f64>> {
        if observed.len() > self.horizon.max(1) {
            return invalid_arg("surprise offsets exceed the prediction horizon");
        }
        let q = self.normalized_readout(belief)?;
        observed.iter().map(|obs| self.surprise_of(&q, obs)).collect()
    }

    /// Surprise of a precomputed normalized readout for one observation.
    pub fn surprise_of(&self, readout: &[f64], obs: &[usize]) -> Result<f64> {
        if obs.len() != self.n_vars || readout.len() != self.n_obs() {
            return invalid_arg("observation does not cover every variable");
        }
        let mut total = 0.0;
        for (k, &o) in obs.iter().enumerate() {
            if o >= self.obs_per_var {
                return invalid_arg(format!("observation {o} out of range"));
            }
            total -= readout[k * self.obs_per_var + o].max(SURPRISE_FLOOR).ln();
        }
        Ok(total / self.n_vars as f64)
    }

    pub(crate) fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        codec::write_tag(w, b"SRM1")?;
        for v in [self.n_cells, self.n_vars, self.obs_per_var, self.horizon] {
            codec::write_usize(w, v)?;
        }
        codec::write_f64(w, self.gamma)?;
        codec::write_f64(w, self.lr)?;
        codec::write_f64s(w, &self.m)
    }

    pub(crate) fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        codec::expect_tag(r, b"SRM1")?;
        const LIMIT: usize = 1 << 24;
        let n_cells = codec::read_len(r, LIMIT)?;
        let n_vars = codec::read_len(r, LIMIT)?;
        let obs_per_var = codec::read_len(r, LIMIT)?;
        let horizon = codec::read_len(r, LIMIT)?;
        let gamma = codec::read_f64(r)?;
        let lr = codec::read_f64(r)?;
        let mut sr = Self::new(n_cells, n_vars, obs_per_var, gamma, horizon, lr)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let m = codec::read_f64s(r, sr.m.len())?;
        if m.len() != sr.m.len() {
            return Err(Error::Parse("SR matrix size mismatch".into()));
        }
        sr.m = m;
        Ok(sr)
    }
}
