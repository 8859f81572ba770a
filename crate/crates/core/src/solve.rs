//! Exact solvers for `Q^pi` and `Q*`.

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::operators::{bellman_optimality_operator, transition_operator, ShiftedSolver};
use crate::policy::Policy;
use crate::qfunction::QFunction;

pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

/// `Q^pi = (I - gamma P^pi)^-1 r` by dense LU.
pub fn exact_q_pi(mdp: &Mdp, pi: &Policy) -> Result<QFunction> {
    let p = transition_operator(mdp, pi)?;
    let solver = ShiftedSolver::new(&p.entries, mdp.gamma())?;
    let r = nalgebra::DVector::from_column_slice(mdp.rewards());
    let q = solver.solve(&r)?;
    QFunction::from_vector(mdp.n_states(), mdp.n_actions(), &q)
}

/// Value iteration on the optimality operator, stopped once
/// `||Q_{k+1} - Q_k|| <= tol (1 - gamma) / (2 gamma)`, which bounds the
/// distance of the returned table to `Q*` by `tol`.
pub fn exact_q_star(mdp: &Mdp, tol: f64) -> Result<QFunction> {
    exact_q_star_capped(mdp, tol, DEFAULT_MAX_ITERATIONS)
}

pub fn exact_q_star_capped(mdp: &Mdp, tol: f64, max_iterations: usize) -> Result<QFunction> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let g = mdp.gamma();
    let threshold = if g == 0.0 {
        f64::INFINITY
    } else {
        tol * (1.0 - g) / (2.0 * g)
    };
    let mut q = QFunction::zeros_for(mdp);
    let mut change = f64::INFINITY;
    for _ in 0..max_iterations {
        let next = bellman_optimality_operator(mdp, &q)?;
        change = next.sup_distance(&q);
        q = next;
        if change <= threshold {
            return Ok(q);
        }
    }
    Err(Error::Convergence {
        iterations: max_iterations,
        last_change: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn self_loop(r: &[f64], gamma: f64) -> Mdp {
        Mdp::new(1, r.len(), gamma, vec![1.0; r.len()], r.to_vec(), []).unwrap()
    }

    #[test]
    fn geometric_series_value() {
        let mdp = self_loop(&[1.0], 0.5);
        let q = exact_q_pi(&mdp, &Policy::uniform(1, 1)).unwrap();
        assert!((q.get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_action_q_star() {
        let mdp = self_loop(&[1.0, 0.0], 0.5);
        let q = exact_q_star(&mdp, 1e-10).unwrap();
        assert!((q.get(0, 0) - 2.0).abs() <= 1e-10);
        assert!((q.get(0, 1) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn zero_discount_is_one_step() {
        let mdp = self_loop(&[0.3, -0.7], 0.0);
        let q = exact_q_star(&mdp, 1e-9).unwrap();
        assert_eq!(q.values(), &[0.3, -0.7]);
    }

    #[test]
    fn iteration_cap_reports_convergence_error() {
        let mdp = self_loop(&[1.0], 0.99);
        let err = exact_q_star_capped(&mdp, 1e-12, 3).unwrap_err();
        assert!(matches!(err, Error::Convergence { iterations: 3, .. }));
        assert!(exact_q_star(&mdp, 0.0).is_err());
    }
}
