use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::online::{sample_trajectory, StartState};
use crate::policy::Policy;
use crate::rng::SplitMix64;
use crate::traces::{trace_coefficient, TraceSpec};

/// Samples per Monte-Carlo block; block `i` uses `SplitMix64::derive(seed, i)`.
pub const VARIANCE_BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReport {
    pub n_samples: usize,
    pub mean: f64,
    /// Unbiased sample variance of `S = sum_{t=1..H} gamma^t c_1 ... c_t`.
    pub variance: f64,
    pub mean_se: f64,
    /// Standard error of `variance`, from the fourth central moment.
    pub variance_se: f64,
    /// Single-state Markovian case only: `V(c)` under `mu`.
    pub per_step_variance: Option<f64>,
    /// Single-state Markovian case only: `sum_{t=1..H} gamma^{2t} V(c)^t`.
    pub iid_lower_bound: Option<f64>,
}

/// Monte-Carlo moments of the discounted trace sum along trajectories from
/// `mu`, started uniformly over non-absorbing states. The sum stops early
/// when a trajectory is absorbed.
pub fn trace_product_variance(
    mdp: &Mdp,
    spec: &TraceSpec,
    pi: &Policy,
    mu: &Policy,
    n_samples: usize,
    horizon: usize,
    seed: u64,
) -> Result<VarianceReport> {
    if n_samples < 2 {
        return Err(Error::Domain("need at least 2 samples".into()));
    }
    pi.check_dims(mdp)?;
    mu.check_dims(mdp)?;
    let n_blocks = n_samples.div_ceil(VARIANCE_BLOCK);
    let blocks: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = SplitMix64::derive(seed, b as u64);
            let count = VARIANCE_BLOCK.min(n_samples - b * VARIANCE_BLOCK);
            (0..count)
                .map(|_| sample_sum(mdp, spec, pi, mu, horizon, &mut rng))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let samples: Vec<f64> = blocks.into_iter().flatten().collect();

    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for s in &samples {
        let d = s - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    let variance = m2 / (n - 1.0);
    let m4 = m4 / n;
    let var_of_var = ((m4 - variance * variance * (n - 3.0) / (n - 1.0)) / n).max(0.0);

    let per_step_variance = single_state_step_variance(mdp, spec, pi, mu)?;
    let g2 = mdp.gamma() * mdp.gamma();
    let iid_lower_bound = per_step_variance.map(|v| (1..=horizon).map(|t| (g2 * v).powi(t as i32)).sum());
    Ok(VarianceReport {
        n_samples,
        mean,
        variance,
        mean_se: (variance / n).sqrt(),
        variance_se: var_of_var.sqrt(),
        per_step_variance,
        iid_lower_bound,
    })
}

fn sample_sum(mdp: &Mdp, spec: &TraceSpec, pi: &Policy, mu: &Policy, horizon: usize, rng: &mut SplitMix64) -> Result<f64> {
    let traj = sample_trajectory(mdp, mu, rng, StartState::UniformNonAbsorbing, horizon + 1)?;
    let g = mdp.gamma();
    let (mut sum, mut product, mut discount) = (0.0, 1.0, 1.0);
    for step in traj.steps.iter().skip(1) {
        product *= trace_coefficient(spec, pi.prob(step.state, step.action), step.mu_prob, product)?;
        discount *= g;
        sum += discount * product;
    }
    Ok(sum)
}

fn single_state_step_variance(mdp: &Mdp, spec: &TraceSpec, pi: &Policy, mu: &Policy) -> Result<Option<f64>> {
    if mdp.n_states() != 1 || mdp.is_absorbing(0) || !spec.is_markovian() {
        return Ok(None);
    }
    let (mut m1, mut m2) = (0.0, 0.0);
    for a in 0..mdp.n_actions() {
        let m = mu.prob(0, a);
        if m > 0.0 {
            let c = trace_coefficient(spec, pi.prob(0, a), m, 1.0)?;
            m1 += m * c;
            m2 += m * c * c;
        }
    }
    Ok(Some(m2 - m1 * m1))
}
