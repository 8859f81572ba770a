//! Benchmark MDP families.

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::Policy;
use crate::rng::SplitMix64;

/// Parameters of a Garnet instance. The generated MDP has `n_states`
/// ordinary states plus one absorbing state at index `n_states`.
#[derive(Debug, Clone, PartialEq)]
pub struct GarnetParams {
    pub n_states: usize,
    pub n_actions: usize,
    /// Number of distinct successor states per `(x, a)`.
    pub branching: usize,
    /// Per-step probability of moving to the absorbing state.
    pub termination_prob: f64,
    /// Probability that a pair's reward is exactly zero.
    pub reward_sparsity: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl GarnetParams {
    pub fn new(n_states: usize, n_actions: usize, branching: usize, gamma: f64, seed: u64) -> Self {
        Self {
            n_states,
            n_actions,
            branching,
            termination_prob: 0.1,
            reward_sparsity: 0.5,
            gamma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::Domain("Garnet needs at least one state and action".into()));
        }
        if self.branching == 0 || self.branching > self.n_states {
            return Err(Error::Domain(format!(
                "branching {} must lie in [1, {}]",
                self.branching, self.n_states
            )));
        }
        if !(self.termination_prob > 0.0 && self.termination_prob <= 1.0) {
            return Err(Error::Domain(format!(
                "termination probability {} must lie in (0, 1]",
                self.termination_prob
            )));
        }
        if !(0.0..=1.0).contains(&self.reward_sparsity) {
            return Err(Error::Domain(format!(
                "reward sparsity {} must lie in [0, 1]",
                self.reward_sparsity
            )));
        }
        Ok(())
    }
}

/// Draws a Garnet MDP. For each `(x, a)` in flattened order the stream is
/// consumed as: `branching` partial Fisher-Yates draws over the ordinary
/// states, `branching` Exponential(1) weights (normalised, i.e. a flat
/// Dirichlet), one uniform deciding whether the reward is zero, and, when
/// it is not, one uniform mapped to `[-1, 1]`.
pub fn generate_garnet(params: &GarnetParams) -> Result<Mdp> {
    params.validate()?;
    let n = params.n_states;
    let na = params.n_actions;
    let total = n + 1;
    let absorbing = n;
    let mut rng = SplitMix64::new(params.seed);
    let mut transitions = vec![0.0; total * na * total];
    let mut rewards = vec![0.0; total * na];
    let mut pool: Vec<usize> = (0..n).collect();
    let keep = 1.0 - params.termination_prob;

    for x in 0..n {
        for a in 0..na {
            pool.iter_mut().enumerate().for_each(|(i, s)| *s = i);
            for i in 0..params.branching {
                let j = i + rng.below(n - i);
                pool.swap(i, j);
            }
            let weights: Vec<f64> = (0..params.branching).map(|_| rng.exponential()).collect();
            let sum: f64 = weights.iter().sum();
            let row = &mut transitions[(x * na + a) * total..(x * na + a + 1) * total];
            for (k, &w) in weights.iter().enumerate() {
                let p = if sum > 0.0 { w / sum } else { 1.0 / params.branching as f64 };
                row[pool[k]] += keep * p;
            }
            row[absorbing] = params.termination_prob;
            // Renormalise away rounding so rows sum to one to machine precision.
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);

            if rng.uniform() >= params.reward_sparsity {
                rewards[x * na + a] = rng.uniform_in(-1.0, 1.0);
            }
        }
    }
    for a in 0..na {
        transitions[(absorbing * na + a) * total + absorbing] = 1.0;
    }
    Mdp::new(total, na, params.gamma, transitions, rewards, [absorbing])
}

/// Index of the "forward" action in [`generate_chain`].
pub const CHAIN_FORWARD: usize = 0;
/// Index of the "stay" action in [`generate_chain`].
pub const CHAIN_STAY: usize = 1;

/// `n` transient states in a line plus an absorbing terminal at index `n`.
/// `forward` moves one step right (reward 1 only when entering the
/// terminal), `stay` self-loops with reward 0. Hence
/// `Q*(x, forward) = gamma^(n - 1 - x)`.
pub fn generate_chain(n: usize, gamma: f64) -> Result<Mdp> {
    if n < 2 {
        return Err(Error::Domain(format!("chain length {n} must be at least 2")));
    }
    let total = n + 1;
    let na = 2;
    let mut transitions = vec![0.0; total * na * total];
    let mut rewards = vec![0.0; total * na];
    for x in 0..n {
        transitions[(x * na + CHAIN_FORWARD) * total + x + 1] = 1.0;
        transitions[(x * na + CHAIN_STAY) * total + x] = 1.0;
    }
    rewards[(n - 1) * na + CHAIN_FORWARD] = 1.0;
    for a in 0..na {
        transitions[(n * na + a) * total + n] = 1.0;
    }
    Mdp::new(total, na, gamma, transitions, rewards, [n])
}

/// A policy with full support: each row is a flat Dirichlet draw
/// (`n_actions` Exponential(1) weights, normalised).
pub fn random_policy(n_states: usize, n_actions: usize, rng: &mut SplitMix64) -> Policy {
    let mut probs = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        let w: Vec<f64> = (0..n_actions).map(|_| rng.exponential().max(1e-12)).collect();
        let sum: f64 = w.iter().sum();
        probs.extend(w.iter().map(|v| v / sum));
    }
    Policy::from_raw(n_states, n_actions, probs)
}

/// An instance on which the expected `Q^pi(1)` iteration diverges.
#[derive(Debug, Clone)]
pub struct DivergenceInstance {
    pub mdp: Mdp,
    /// Deterministic target.
    pub pi: Policy,
    /// Puts [`DIVERGENCE_OFF_TARGET_MASS`] on the action `pi` avoids.
    pub mu: Policy,
}

pub const DIVERGENCE_GAMMA: f64 = 0.99;
pub const DIVERGENCE_OFF_TARGET_MASS: f64 = 0.95;

/// Two states, two actions, `gamma = 0.99`. Action 0 leads to state 1 and
/// action 1 to state 0 from either state; `r(0, 0) = r(1, 1) = 1`. The
/// target takes action 0 in state 0 and action 1 in state 1, so it cycles
/// collecting reward 1. With `termination_prob > 0` every move instead ends
/// in an absorbing state 2 with that probability.
pub fn qpi_divergence_instance(termination_prob: f64) -> Result<DivergenceInstance> {
    if !(0.0..1.0).contains(&termination_prob) {
        return Err(Error::Domain(format!(
            "termination probability {termination_prob} must lie in [0, 1)"
        )));
    }
    let terminating = termination_prob > 0.0;
    let total = if terminating { 3 } else { 2 };
    let na = 2;
    let keep = 1.0 - termination_prob;
    let mut transitions = vec![0.0; total * na * total];
    let mut rewards = vec![0.0; total * na];
    for x in 0..2 {
        for a in 0..na {
            let row = (x * na + a) * total;
            transitions[row + 1 - a] = keep;
            if terminating {
                transitions[row + 2] = termination_prob;
            }
        }
    }
    rewards[0] = 1.0;
    rewards[na + 1] = 1.0;
    let mut absorbing = Vec::new();
    if terminating {
        for a in 0..na {
            transitions[(2 * na + a) * total + 2] = 1.0;
        }
        absorbing.push(2);
    }
    let mdp = Mdp::new(total, na, DIVERGENCE_GAMMA, transitions, rewards, absorbing)?;
    let targets = [0, 1, 0];
    let pi = Policy::deterministic(na, &targets[..total])?;
    let m = DIVERGENCE_OFF_TARGET_MASS;
    let mu_rows = [vec![1.0 - m, m], vec![m, 1.0 - m], vec![0.5, 0.5]];
    let mu = Policy::from_rows(&mu_rows[..total])?;
    Ok(DivergenceInstance { mdp, pi, mu })
}
