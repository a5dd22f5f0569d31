use crate::error::{invalid_arg, Result};

use super::Topology;

/// Per-variable categorical distributions over hidden cells, stored flat in
/// cell-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    cells_per_var: usize,
    probs: Vec<f64>,
}

impl BeliefState {
    pub fn uniform(topology: &Topology) -> Self {
        let n = topology.cells_per_var();
        Self {
            cells_per_var: n,
            probs: vec![1.0 / n as f64; topology.n_hidden_cells()],
        }
    }

    /// Wraps flat probabilities; each variable's block must be a distribution.
    pub fn from_probs(topology: &Topology, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != topology.n_hidden_cells() {
            return invalid_arg(format!(
                "belief of length {} for {} hidden cells",
                probs.len(),
                topology.n_hidden_cells()
            ));
        }
        let b = Self { cells_per_var: topology.cells_per_var(), probs };
        if !b.is_normalized(1e-9) {
            return invalid_arg("belief blocks must be nonnegative and sum to 1");
        }
        Ok(b)
    }

    pub(crate) fn from_raw(cells_per_var: usize, probs: Vec<f64>) -> Self {
        Self { cells_per_var, probs }
    }

    /// Belief with all mass of each variable on one cell.
    pub fn one_hot(topology: &Topology, cells: &[usize]) -> Result<Self> {
        if cells.len() != topology.n_vars {
            return invalid_arg("one cell per variable required");
        }
        let mut probs = vec![0.0; topology.n_hidden_cells()];
        for (v, &c) in cells.iter().enumerate() {
            if topology.var_of(c) != v || c >= topology.n_hidden_cells() {
                return invalid_arg(format!("cell {c} does not belong to variable {v}"));
            }
            probs[c] = 1.0;
        }
        Ok(Self { cells_per_var: topology.cells_per_var(), probs })
    }

    pub fn n_vars(&self) -> usize {
        self.probs.len() / self.cells_per_var
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn var(&self, k: usize) -> &[f64] {
        &self.probs[k * self.cells_per_var..(k + 1) * self.cells_per_var]
    }

    pub(crate) fn var_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.probs[k * self.cells_per_var..(k + 1) * self.cells_per_var]
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (0..self.n_vars()).all(|k| {
            let v = self.var(k);
            v.iter().all(|&p| p >= 0.0 && p.is_finite()) && (v.iter().sum::<f64>() - 1.0).abs() <= tol
        })
    }

    /// Probability mass of each column, flattened as `var * n_obs_states + column`.
    pub fn column_marginals(&self, topology: &Topology) -> Vec<f64> {
        self.probs
            .chunks(topology.cells_per_column)
            .map(|c| c.iter().sum())
            .collect()
    }
}
