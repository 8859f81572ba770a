//! Exact evaluation of the return-based operator by enumerating the law
//! of `(x_t, a_t, c_1 ... c_t)` under `mu` up to a horizon.
//!
//! History-dependent traces rule out the matrix form, but the trace
//! product is the only history the capped family reads. The frontier at
//! step `t` therefore maps `(pair, product)` to probability mass, merging
//! paths whose products agree bit for bit. Entries whose product hits zero
//! contribute nothing further and are dropped.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::operators::bellman_operator;
use crate::policy::Policy;
use crate::qfunction::QFunction;
use crate::solve::exact_q_pi;
use crate::traces::{trace_coefficient, TraceSpec};

/// Maximum number of frontier entries visited per start pair.
pub const DEFAULT_PATH_BUDGET: usize = 10_000_000;

/// `ceil(log(1e-8) / log(gamma))`, at least 1 and capped at 40.
pub fn default_horizon(gamma: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    // The slack keeps exact powers such as gamma = 0.1 from rounding up.
    let h = (1e-8_f64.ln() / gamma.ln() - 1e-9).ceil();
    (h as usize).clamp(1, 40)
}

/// Truncated evaluation of `R Q` with its error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedEvaluation {
    pub q: QFunction,
    pub horizon: usize,
    /// `2 gamma^horizon ||Q - Q^pi||`, valid whenever the traces respect
    /// `c <= pi / mu` and their products stay at most 1.
    pub tail_bound: f64,
}

/// Sums `gamma^t (c_1 ... c_t) f(x_t, a_t)` over `t < horizon` in
/// expectation, for every start pair.
fn discounted_sum(
    mdp: &Mdp,
    spec: &TraceSpec,
    pi: &Policy,
    mu: &Policy,
    horizon: usize,
    budget: usize,
    f: &[f64],
) -> Result<Vec<f64>> {
    pi.check_dims(mdp)?;
    mu.check_dims(mdp)?;
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let na = mdp.n_actions();
    let g = mdp.gamma();
    (0..mdp.n_pairs())
        .into_par_iter()
        .map(|start| {
            let mut frontier: BTreeMap<(usize, u64), f64> = BTreeMap::new();
            frontier.insert((start, 1.0_f64.to_bits()), 1.0);
            let mut total = 0.0;
            let mut discount = 1.0;
            let mut visited = 0usize;
            for t in 0..horizon {
                visited += frontier.len();
                if visited > budget {
                    return Err(Error::Resource(format!(
                        "enumeration from pair {start} exceeded {budget} frontier entries at step {t}"
                    )));
                }
                let mut step_sum = 0.0;
                for (&(sa, bits), &mass) in &frontier {
                    step_sum += mass * f64::from_bits(bits) * f[sa];
                }
                total += discount * step_sum;
                if t + 1 == horizon {
                    break;
                }
                let mut next: BTreeMap<(usize, u64), f64> = BTreeMap::new();
                for (&(sa, bits), &mass) in &frontier {
                    let prod = f64::from_bits(bits);
                    let (x, a) = (sa / na, sa % na);
                    for (y, &p) in mdp.next_state_probs(x, a).iter().enumerate() {
                        if p == 0.0 {
                            continue;
                        }
                        for b in 0..na {
                            let m = mu.prob(y, b);
                            if m == 0.0 {
                                continue;
                            }
                            let c = trace_coefficient(spec, pi.prob(y, b), m, prod)?;
                            let new_prod = prod * c;
                            if new_prod == 0.0 {
                                continue;
                            }
                            *next.entry((y * na + b, new_prod.to_bits())).or_insert(0.0) += mass * p * m;
                        }
                    }
                }
                frontier = next;
                discount *= g;
                if frontier.is_empty() {
                    break;
                }
            }
            Ok(total)
        })
        .collect()
}

/// `E_mu[sum_{t < horizon} gamma^t c_1 ... c_t]` for every start pair.
pub fn discounted_trace_mass(
    mdp: &Mdp,
    spec: &TraceSpec,
    pi: &Policy,
    mu: &Policy,
    horizon: usize,
) -> Result<Vec<f64>> {
    let ones = vec![1.0; mdp.n_pairs()];
    discounted_sum(mdp, spec, pi, mu, horizon, DEFAULT_PATH_BUDGET, &ones)
}

/// `R Q` for any trace family (including the history-dependent capped
/// one) by enumeration of the first `horizon` terms:
///
/// `Q(x,a) + sum_{t < horizon} gamma^t E_mu[c_1 ... c_t (T^pi Q - Q)(x_t, a_t)]`.
pub fn apply_expected_operator_nonmarkov(
    mdp: &Mdp,
    spec: &TraceSpec,
    pi: &Policy,
    mu: &Policy,
    q: &QFunction,
    horizon: usize,
) -> Result<TruncatedEvaluation> {
    apply_with_budget(mdp, spec, pi, mu, q, horizon, DEFAULT_PATH_BUDGET)
}

pub fn apply_with_budget(
    mdp: &Mdp,
    spec: &TraceSpec,
    pi: &Policy,
    mu: &Policy,
    q: &QFunction,
    horizon: usize,
    budget: usize,
) -> Result<TruncatedEvaluation> {
    q.check_dims(mdp)?;
    let tq = bellman_operator(mdp, pi, q)?;
    let residual: Vec<f64> = tq.values().iter().zip(q.values()).map(|(a, b)| a - b).collect();
    let sums = discounted_sum(mdp, spec, pi, mu, horizon, budget, &residual)?;
    let values = q.values().iter().zip(&sums).map(|(a, b)| a + b).collect();
    let q_pi = exact_q_pi(mdp, pi)?;
    Ok(TruncatedEvaluation {
        q: QFunction::new(mdp.n_states(), mdp.n_actions(), values)?,
        horizon,
        tail_bound: 2.0 * mdp.gamma().powi(horizon as i32) * q.sup_distance(&q_pi),
    })
}
