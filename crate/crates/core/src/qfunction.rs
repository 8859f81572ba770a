use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::Policy;

/// Dense action-value table, `values[x * n_actions + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QFunction {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "Q table has {} entries, expected {}",
                values.len(),
                n_states * n_actions
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "Q({}, {}) is not finite",
                i / n_actions,
                i % n_actions
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::constant(n_states, n_actions, 0.0)
    }

    pub fn constant(n_states: usize, n_actions: usize, v: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![v; n_states * n_actions],
        }
    }

    pub fn zeros_for(mdp: &Mdp) -> Self {
        Self::zeros(mdp.n_states(), mdp.n_actions())
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::Dimension("ragged Q rows".into()));
        }
        Self::new(rows.len(), n_actions, rows.concat())
    }

    pub(crate) fn from_vector(n_states: usize, n_actions: usize, v: &DVector<f64>) -> Result<Self> {
        Self::new(n_states, n_actions, v.as_slice().to_vec())
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.values[x * self.n_actions + a]
    }

    pub fn set(&mut self, x: usize, a: usize, v: f64) {
        self.values[x * self.n_actions + a] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.n_actions..(x + 1) * self.n_actions]
    }

    /// Lowest-index maximiser of `Q(x, .)`.
    pub fn greedy_action(&self, x: usize) -> usize {
        let row = self.row(x);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn max_at(&self, x: usize) -> f64 {
        self.row(x)[self.greedy_action(x)]
    }

    /// `E_pi Q(x, .)`
    pub fn expectation(&self, x: usize, pi: &Policy) -> f64 {
        self.row(x).iter().zip(pi.row(x)).map(|(q, p)| q * p).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &QFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn check_dims(&self, mdp: &Mdp) -> Result<()> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(Error::Dimension(format!(
                "Q is {}x{}, MDP is {}x{}",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}
