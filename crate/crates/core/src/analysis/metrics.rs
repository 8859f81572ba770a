use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::operators::{matrix_sup_norm, min_transition_operator, transition_operator};
use crate::policy::Policy;

/// `max_x ||pi(.|x) - mu(.|x)||_1`, in `[0, 2]`.
pub fn offpolicyness(pi: &Policy, mu: &Policy) -> Result<f64> {
    if pi.n_states() != mu.n_states() || pi.n_actions() != mu.n_actions() {
        return Err(Error::Dimension("policies have different shapes".into()));
    }
    Ok((0..pi.n_states())
        .map(|x| pi.row(x).iter().zip(mu.row(x)).map(|(p, m)| (p - m).abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Largest `lambda` for which `Q^pi(lambda)` is known to contract:
/// `(1 - gamma) / (gamma * eps)`, infinite on-policy.
pub fn qpi_lambda_safety(pi: &Policy, mu: &Policy, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma {gamma} outside (0, 1)")));
    }
    let eps = offpolicyness(pi, mu)?;
    if eps == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 - gamma) / (gamma * eps))
}

/// `||P^pi P^{pi∧mu} - P^{pi∧mu} P^pi||` in the max-row-sum norm.
pub fn commutation_defect(mdp: &Mdp, pi: &Policy, mu: &Policy) -> Result<f64> {
    let p = transition_operator(mdp, pi)?.entries;
    let m = min_transition_operator(mdp, pi, mu)?.entries;
    Ok(matrix_sup_norm(&(&p * &m - &m * &p)))
}
