use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::qfunction::QFunction;

use super::policies::{epsilon_greedy, mixture_behavior, softmax_policy};

/// A deterministic real sequence indexed from `k = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sequence {
    Constant(f64),
    /// `scale / k`
    Harmonic { scale: f64 },
    /// `initial * ratio^(k - 1)`
    Geometric { initial: f64, ratio: f64 },
    /// `initial + slope * (k - 1)`
    Linear { initial: f64, slope: f64 },
}

impl Sequence {
    pub fn value(&self, k: u64) -> f64 {
        let k = k.max(1);
        match *self {
            Sequence::Constant(v) => v,
            Sequence::Harmonic { scale } => scale / k as f64,
            Sequence::Geometric { initial, ratio } => initial * ratio.powf((k - 1) as f64),
            Sequence::Linear { initial, slope } => initial + slope * (k - 1) as f64,
        }
    }

    pub fn is_non_increasing(&self) -> bool {
        match *self {
            Sequence::Constant(_) => true,
            Sequence::Harmonic { scale } => scale >= 0.0,
            Sequence::Geometric { initial, ratio } => initial >= 0.0 && (0.0..=1.0).contains(&ratio),
            Sequence::Linear { slope, .. } => slope <= 0.0,
        }
    }

    pub fn is_non_decreasing(&self) -> bool {
        match *self {
            Sequence::Constant(_) => true,
            Sequence::Harmonic { scale } => scale <= 0.0,
            Sequence::Geometric { initial, ratio } => initial >= 0.0 && ratio >= 1.0,
            Sequence::Linear { slope, .. } => slope >= 0.0,
        }
    }

    fn all_finite(&self) -> bool {
        match *self {
            Sequence::Constant(v) => v.is_finite(),
            Sequence::Harmonic { scale } => scale.is_finite(),
            Sequence::Geometric { initial, ratio } => initial.is_finite() && ratio.is_finite(),
            Sequence::Linear { initial, slope } => initial.is_finite() && slope.is_finite(),
        }
    }
}

/// How target or behaviour policies are refreshed from the current Q at
/// each episode.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySchedule {
    /// `epsilon_k`-greedy with `epsilon_k` non-increasing (clamped to [0, 1]).
    EpsilonGreedy(Sequence),
    /// Softmax with `beta_k` non-decreasing.
    Softmax(Sequence),
    /// Greedy action with mass `1 - eps_mix`, the rest spread by `base_mu`.
    Mixture { base_mu: Policy, eps_mix: f64 },
    Fixed(Policy),
}

impl PolicySchedule {
    pub fn epsilon_greedy(epsilons: Sequence) -> Result<Self> {
        if !epsilons.all_finite() || !epsilons.is_non_increasing() || epsilons.value(1) < 0.0 {
            return Err(Error::Domain(format!(
                "epsilon schedule {epsilons:?} must be finite, non-negative and non-increasing"
            )));
        }
        Ok(Self::EpsilonGreedy(epsilons))
    }

    pub fn softmax(betas: Sequence) -> Result<Self> {
        if !betas.all_finite() || !betas.is_non_decreasing() || betas.value(1) < 0.0 {
            return Err(Error::Domain(format!(
                "softmax schedule {betas:?} must be finite, non-negative and non-decreasing"
            )));
        }
        Ok(Self::Softmax(betas))
    }

    pub fn mixture(base_mu: Policy, eps_mix: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps_mix) {
            return Err(Error::Domain(format!("mixture coefficient {eps_mix} outside [0, 1)")));
        }
        Ok(Self::Mixture { base_mu, eps_mix })
    }

    /// Watkins' target: greedy at every episode.
    pub fn greedy() -> Self {
        Self::EpsilonGreedy(Sequence::Constant(0.0))
    }

    /// The policy for episode `k >= 1` given the current estimate.
    pub fn policy(&self, q: &QFunction, k: u64) -> Result<Policy> {
        match self {
            PolicySchedule::EpsilonGreedy(seq) => epsilon_greedy(q, seq.value(k).clamp(0.0, 1.0)),
            PolicySchedule::Softmax(seq) => softmax_policy(q, seq.value(k)),
            PolicySchedule::Mixture { base_mu, eps_mix } => mixture_behavior(q, base_mu, *eps_mix),
            PolicySchedule::Fixed(p) => {
                if p.n_states() != q.n_states() || p.n_actions() != q.n_actions() {
                    return Err(Error::Dimension("fixed policy does not match Q".into()));
                }
                Ok(p.clone())
            }
        }
    }
}

/// Robbins-Monro step sizes `alpha0 / (1 + n(x,a))^exponent`, with `n`
/// counting the trajectories that visited `(x, a)` so far.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeSchedule {
    alpha0: f64,
    exponent: f64,
    visits: Vec<u64>,
}

impl StepSizeSchedule {
    pub const DEFAULT_ALPHA0: f64 = 0.5;
    pub const DEFAULT_EXPONENT: f64 = 0.75;

    /// `exponent` must lie in `(0.5, 1]` so that the sum of steps diverges
    /// while the sum of squares converges.
    pub fn new(alpha0: f64, exponent: f64, n_pairs: usize) -> Result<Self> {
        if !(alpha0 > 0.0) || !alpha0.is_finite() {
            return Err(Error::Domain(format!("alpha0 {alpha0} must be positive")));
        }
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(Error::Domain(format!("step exponent {exponent} outside (0.5, 1]")));
        }
        Ok(Self {
            alpha0,
            exponent,
            visits: vec![0; n_pairs],
        })
    }

    pub fn with_defaults(n_pairs: usize) -> Self {
        Self {
            alpha0: Self::DEFAULT_ALPHA0,
            exponent: Self::DEFAULT_EXPONENT,
            visits: vec![0; n_pairs],
        }
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// The `n`-th step size of a pair visited `n` times before.
    pub fn step_for_count(&self, n: u64) -> f64 {
        self.alpha0 / (1.0 + n as f64).powf(self.exponent)
    }

    pub fn current(&self, pair: usize) -> f64 {
        self.step_for_count(self.visits[pair])
    }

    pub fn visits(&self, pair: usize) -> u64 {
        self.visits[pair]
    }

    pub fn n_pairs(&self) -> usize {
        self.visits.len()
    }

    pub(crate) fn record_visit(&mut self, pair: usize) {
        self.visits[pair] += 1;
    }
}
