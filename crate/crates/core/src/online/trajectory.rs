use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::Policy;
use crate::rng::SplitMix64;

pub const DEFAULT_MAX_LEN: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    /// `mu(action | state)` under the behaviour policy that produced the step.
    pub mu_prob: f64,
}

/// A sampled path `x_0, a_0, r_0, x_1, ...`. `final_state` is the state
/// reached after the last step; `terminated` is set when that state is
/// absorbing rather than the path having hit the length cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub final_state: usize,
    pub terminated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// State entered after step `t`.
    pub fn next_state(&self, t: usize) -> usize {
        self.steps.get(t + 1).map_or(self.final_state, |s| s.state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartState {
    /// Uniform over non-absorbing states, one `below(m)` draw.
    #[default]
    UniformNonAbsorbing,
    Fixed(usize),
}

/// Follows `mu` and the MDP from the start state until an absorbing state
/// is entered or `max_len` steps were taken. Per step the stream supplies
/// one categorical draw for the action, then one for the next state.
pub fn sample_trajectory(
    mdp: &Mdp,
    mu: &Policy,
    rng: &mut SplitMix64,
    start: StartState,
    max_len: usize,
) -> Result<Trajectory> {
    mu.check_dims(mdp)?;
    if max_len == 0 {
        return Err(Error::Domain("max_len must be at least 1".into()));
    }
    let mut x = match start {
        StartState::Fixed(x) if x < mdp.n_states() => x,
        StartState::Fixed(x) => {
            return Err(Error::Domain(format!("start state {x} out of range")));
        }
        StartState::UniformNonAbsorbing => {
            let candidates = mdp.non_absorbing_states();
            if candidates.is_empty() {
                return Err(Error::Domain("every state is absorbing".into()));
            }
            candidates[rng.below(candidates.len())]
        }
    };
    let mut steps = Vec::new();
    while !mdp.is_absorbing(x) && steps.len() < max_len {
        let a = rng
            .categorical(mu.row(x))
            .ok_or_else(|| Error::Domain(format!("behaviour policy has no mass in state {x}")))?;
        let next = rng
            .categorical(mdp.next_state_probs(x, a))
            .ok_or_else(|| Error::InvalidMdp(format!("transition row ({x}, {a}) is empty")))?;
        steps.push(Step {
            state: x,
            action: a,
            reward: mdp.reward(x, a),
            mu_prob: mu.prob(x, a),
        });
        x = next;
    }
    Ok(Trajectory {
        steps,
        final_state: x,
        terminated: mdp.is_absorbing(x),
    })
}

pub fn sample_trajectory_seeded(mdp: &Mdp, mu: &Policy, seed: u64, max_len: usize) -> Result<Trajectory> {
    sample_trajectory(mdp, mu, &mut SplitMix64::new(seed), StartState::UniformNonAbsorbing, max_len)
}

/// Every trajectory [`sample_trajectory`] can produce from a uniform
/// non-absorbing start with cap `max_len`, with its probability.
/// Zero-probability branches are skipped. Fails with a resource error once
/// more than `budget` trajectories would be produced.
pub fn trajectory_distribution(mdp: &Mdp, mu: &Policy, max_len: usize, budget: usize) -> Result<Vec<(f64, Trajectory)>> {
    mu.check_dims(mdp)?;
    if max_len == 0 {
        return Err(Error::Domain("max_len must be at least 1".into()));
    }
    let starts = mdp.non_absorbing_states();
    if starts.is_empty() {
        return Err(Error::Domain("every state is absorbing".into()));
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    let p0 = 1.0 / starts.len() as f64;
    for &x in &starts {
        extend_paths(mdp, mu, x, p0, max_len, budget, &mut prefix, &mut out)?;
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn extend_paths(
    mdp: &Mdp,
    mu: &Policy,
    x: usize,
    prob: f64,
    max_len: usize,
    budget: usize,
    prefix: &mut Vec<Step>,
    out: &mut Vec<(f64, Trajectory)>,
) -> Result<()> {
    if mdp.is_absorbing(x) || prefix.len() == max_len {
        if out.len() == budget {
            return Err(Error::Resource(format!("more than {budget} trajectories")));
        }
        out.push((
            prob,
            Trajectory {
                steps: prefix.clone(),
                final_state: x,
                terminated: mdp.is_absorbing(x),
            },
        ));
        return Ok(());
    }
    for a in 0..mdp.n_actions() {
        let m = mu.prob(x, a);
        if m == 0.0 {
            continue;
        }
        prefix.push(Step {
            state: x,
            action: a,
            reward: mdp.reward(x, a),
            mu_prob: m,
        });
        for (y, &p) in mdp.next_state_probs(x, a).iter().enumerate() {
            if p > 0.0 {
                extend_paths(mdp, mu, y, prob * m * p, max_len, budget, prefix, out)?;
            }
        }
        prefix.pop();
    }
    Ok(())
}
