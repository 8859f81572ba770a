use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::Policy;
use crate::qfunction::QFunction;
use crate::traces::{trace_coefficient, TraceSpec};

use super::schedule::StepSizeSchedule;
use super::trajectory::Trajectory;

/// Accumulating traces `z(x,a)` and the per-pair sums `sum_t delta_t z_t`
/// gathered along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EligibilityTable {
    z: Vec<f64>,
    pending: Vec<f64>,
    /// Pairs in order of first occurrence.
    visited: Vec<usize>,
    seen: Vec<bool>,
}

impl EligibilityTable {
    pub fn new(n_pairs: usize) -> Self {
        Self {
            z: vec![0.0; n_pairs],
            pending: vec![0.0; n_pairs],
            visited: Vec::new(),
            seen: vec![false; n_pairs],
        }
    }

    /// Multiplies every live trace by `factor = gamma * c_t`.
    pub fn decay(&mut self, factor: f64) {
        debug_assert!(factor >= 0.0);
        for &p in &self.visited {
            self.z[p] *= factor;
        }
    }

    pub fn visit(&mut self, pair: usize) {
        if !self.seen[pair] {
            self.seen[pair] = true;
            self.visited.push(pair);
        }
        self.z[pair] += 1.0;
    }

    /// Adds `delta * z(x,a)` to every visited pair's pending increment.
    pub fn accumulate(&mut self, delta: f64) {
        for &p in &self.visited {
            self.pending[p] += delta * self.z[p];
        }
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn pending(&self) -> &[f64] {
        &self.pending
    }

    pub fn visited(&self) -> &[usize] {
        &self.visited
    }
}

/// One every-visit update from a single trajectory:
///
/// `Q(x,a) += alpha(x,a) * sum_{t >= s} delta_t z_{s,t}` for each pair first
/// seen at time `s`, with every `delta_t` computed against the input `q`
/// and the accumulating trace `z` built from the Markovian `c_t`.
/// Absorbing states keep `Q = 0` and are never updated. Each visited pair's
/// step counter advances once.
pub fn every_visit_update(
    mdp: &Mdp,
    q: &QFunction,
    traj: &Trajectory,
    spec: &TraceSpec,
    pi: &Policy,
    sched: &mut StepSizeSchedule,
) -> Result<QFunction> {
    spec.require_markovian()?;
    q.check_dims(mdp)?;
    pi.check_dims(mdp)?;
    if sched.n_pairs() != mdp.n_pairs() {
        return Err(Error::Dimension("step-size table does not match the MDP".into()));
    }
    let g = mdp.gamma();
    let mut table = EligibilityTable::new(mdp.n_pairs());
    for (t, step) in traj.steps.iter().enumerate() {
        if !(step.mu_prob > 0.0) {
            return Err(Error::Domain(format!(
                "step {t} records behaviour probability {}",
                step.mu_prob
            )));
        }
        let (x, a) = (step.state, step.action);
        if x >= mdp.n_states() || a >= mdp.n_actions() {
            return Err(Error::Dimension(format!("step {t} refers to ({x}, {a})")));
        }
        if t > 0 {
            let c = trace_coefficient(spec, pi.prob(x, a), step.mu_prob, 1.0)?;
            table.decay(g * c);
        }
        table.visit(mdp.pair(x, a));
        let next = traj.next_state(t);
        let bootstrap = if mdp.is_absorbing(next) {
            0.0
        } else {
            q.expectation(next, pi)
        };
        let delta = step.reward + g * bootstrap - q.get(x, a);
        table.accumulate(delta);
    }

    let mut values = q.values().to_vec();
    for &p in table.visited() {
        if mdp.is_absorbing(p / mdp.n_actions()) {
            continue;
        }
        values[p] += sched.current(p) * table.pending()[p];
        sched.record_visit(p);
    }
    QFunction::new(mdp.n_states(), mdp.n_actions(), values)
}
