use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::Policy;
use crate::qfunction::QFunction;
use crate::rng::SplitMix64;
use crate::solve::exact_q_pi;
use crate::traces::{satisfies_ratio_bound, ExpectedOperator, TraceSpec};

const MIN_DISTANCE: f64 = 1e-8;
const Q_RANGE: f64 = 10.0;
const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionCheck {
    /// `max ||RQ - Q^pi|| / ||Q - Q^pi||` over the accepted draws.
    pub max_ratio: f64,
    pub samples: usize,
    pub rejected: usize,
}

/// Applies the exact operator to `n_samples` random estimates with entries
/// uniform in `[-10, 10]` and reports the worst contraction ratio around
/// `Q^pi`. Draws within `1e-8` of `Q^pi` are redrawn.
///
/// Only Markovian families with `c <= pi / mu` are accepted; `Q^pi(lambda)`
/// outside that bound should go through `spectral_radius_qpi` instead.
pub fn verify_contraction(
    mdp: &Mdp,
    spec: &TraceSpec,
    pi: &Policy,
    mu: &Policy,
    n_samples: usize,
    seed: u64,
) -> Result<ContractionCheck> {
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be at least 1".into()));
    }
    if !spec.is_markovian() {
        return Err(Error::Domain(format!("{} has no closed-form operator", spec.family())));
    }
    pi.check_dims(mdp)?;
    mu.check_dims(mdp)?;
    if !satisfies_ratio_bound(spec, pi, mu) {
        return Err(Error::Domain(format!(
            "{}(lambda={}) exceeds pi/mu for these policies",
            spec.family(),
            spec.lambda()
        )));
    }
    let op = ExpectedOperator::new(mdp, spec, pi, mu)?;
    let q_pi = exact_q_pi(mdp, pi)?;
    let mut rng = SplitMix64::new(seed);
    let mut max_ratio: f64 = 0.0;
    let mut rejected = 0;
    for _ in 0..n_samples {
        let mut streak = 0;
        let q = loop {
            let values = (0..mdp.n_pairs()).map(|_| rng.uniform_in(-Q_RANGE, Q_RANGE)).collect();
            let q = QFunction::new(mdp.n_states(), mdp.n_actions(), values)?;
            if q.sup_distance(&q_pi) >= MIN_DISTANCE {
                break q;
            }
            rejected += 1;
            streak += 1;
            if streak >= MAX_REJECTIONS {
                return Err(Error::Numerical("could not draw Q away from Q^pi".into()));
            }
        };
        let ratio = op.apply(&q)?.sup_distance(&q_pi) / q.sup_distance(&q_pi);
        max_ratio = max_ratio.max(ratio);
    }
    Ok(ContractionCheck {
        max_ratio,
        samples: n_samples,
        rejected,
    })
}
