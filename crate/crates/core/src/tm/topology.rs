use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the factorial hidden space.
///
/// Each of the `n_vars` hidden variables has `n_obs_states` columns of
/// `cells_per_column` cells. Flat hidden cell ids are
/// `var * cells_per_var + column * cells_per_column + within`. Action cells
/// follow the hidden cells in the presynaptic (context) id space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub n_vars: usize,
    pub n_obs_states: usize,
    pub cells_per_column: usize,
    /// Number of presynaptic cells sampled into a new segment.
    pub context_field_size: usize,
    /// Size of the always-observed action variable (0 disables it).
    pub n_actions: usize,
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        if self.n_vars == 0 || self.n_obs_states == 0 || self.cells_per_column == 0 {
            return Err(Error::Config("topology dimensions must be positive".into()));
        }
        if self.context_field_size == 0 {
            return Err(Error::Config("context_field_size must be positive".into()));
        }
        Ok(())
    }

    pub fn cells_per_var(&self) -> usize {
        self.n_obs_states * self.cells_per_column
    }

    pub fn n_hidden_cells(&self) -> usize {
        self.n_vars * self.cells_per_var()
    }

    /// Size of the presynaptic id space: hidden cells plus action cells.
    pub fn n_context_cells(&self) -> usize {
        self.n_hidden_cells() + self.n_actions
    }

    /// Total observation states across all variables.
    pub fn n_obs_total(&self) -> usize {
        self.n_vars * self.n_obs_states
    }

    pub fn cell_id(&self, var: usize, column: usize, within: usize) -> usize {
        debug_assert!(var < self.n_vars && column < self.n_obs_states && within < self.cells_per_column);
        var * self.cells_per_var() + column * self.cells_per_column + within
    }

    /// Inverse of [`Topology::cell_id`] for hidden cells.
    pub fn locate(&self, cell: usize) -> (usize, usize, usize) {
        let var = cell / self.cells_per_var();
        let rest = cell % self.cells_per_var();
        (var, rest / self.cells_per_column, rest % self.cells_per_column)
    }

    pub fn var_of(&self, cell: usize) -> usize {
        cell / self.cells_per_var()
    }

    /// Flat observation-state index of the column containing `cell`.
    pub fn obs_index_of(&self, cell: usize) -> usize {
        cell / self.cells_per_column
    }

    pub fn action_cell(&self, action: usize) -> usize {
        self.n_hidden_cells() + action
    }

    pub fn is_action_cell(&self, cell: usize) -> bool {
        cell >= self.n_hidden_cells()
    }
}
