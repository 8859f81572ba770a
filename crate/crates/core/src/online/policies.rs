use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::qfunction::QFunction;

/// `(1 - epsilon)` on the lowest-index argmax plus `epsilon / |A|` everywhere.
pub fn epsilon_greedy(q: &QFunction, epsilon: f64) -> Result<Policy> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let na = q.n_actions();
    let spread = epsilon / na as f64;
    let mut probs = vec![spread; q.n_states() * na];
    for x in 0..q.n_states() {
        probs[x * na + q.greedy_action(x)] += 1.0 - epsilon;
    }
    Ok(Policy::from_raw(q.n_states(), na, probs))
}

/// Boltzmann policy `exp(beta Q(x, a)) / sum_b exp(beta Q(x, b))`, computed
/// with the row maximum subtracted.
pub fn softmax_policy(q: &QFunction, beta: f64) -> Result<Policy> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("inverse temperature {beta} must be finite and >= 0")));
    }
    let na = q.n_actions();
    let mut probs = Vec::with_capacity(q.n_states() * na);
    for x in 0..q.n_states() {
        let row = q.row(x);
        let top = q.max_at(x);
        let weights: Vec<f64> = row.iter().map(|v| (beta * (v - top)).exp()).collect();
        let z: f64 = weights.iter().sum();
        probs.extend(weights.iter().map(|w| w / z));
    }
    Ok(Policy::from_raw(q.n_states(), na, probs))
}

/// Greedy action with mass `1 - eps_mix`; the remaining `eps_mix` is spread
/// over the other actions in proportion to `base_mu`.
pub fn mixture_behavior(q: &QFunction, base_mu: &Policy, eps_mix: f64) -> Result<Policy> {
    if !(0.0..1.0).contains(&eps_mix) {
        return Err(Error::Domain(format!("mixture coefficient {eps_mix} outside [0, 1)")));
    }
    if base_mu.n_states() != q.n_states() || base_mu.n_actions() != q.n_actions() {
        return Err(Error::Dimension("base behaviour policy does not match Q".into()));
    }
    let na = q.n_actions();
    let mut probs = vec![0.0; q.n_states() * na];
    for x in 0..q.n_states() {
        let greedy = q.greedy_action(x);
        let rest = 1.0 - base_mu.prob(x, greedy);
        let row = &mut probs[x * na..(x + 1) * na];
        row[greedy] = 1.0 - eps_mix;
        if eps_mix == 0.0 {
            continue;
        }
        if rest <= 1e-12 {
            return Err(Error::Domain(format!(
                "base behaviour puts all mass on the greedy action in state {x}"
            )));
        }
        for (a, p) in row.iter_mut().enumerate() {
            if a != greedy {
                *p = eps_mix * base_mu.prob(x, a) / rest;
            }
        }
    }
    Ok(Policy::from_raw(q.n_states(), na, probs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn epsilon_greedy_cases() {
        let q = QFunction::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(close(epsilon_greedy(&q, 0.2).unwrap().row(0), &[0.1, 0.9]));
        assert!(close(epsilon_greedy(&q, 1.0).unwrap().row(0), &[0.5, 0.5]));
        assert!(close(epsilon_greedy(&q, 0.0).unwrap().row(0), &[0.0, 1.0]));
        assert!(epsilon_greedy(&q, 1.5).is_err());
    }

    #[test]
    fn softmax_cases() {
        let q = QFunction::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let p = softmax_policy(&q, 3.0_f64.ln()).unwrap();
        assert!(close(p.row(0), &[0.75, 0.25]));
        assert!(close(p.row(1), &[0.5, 0.5]));
        assert!(close(softmax_policy(&q, 0.0).unwrap().row(0), &[0.5, 0.5]));
        assert!(softmax_policy(&q, -1.0).is_err());
        // Large beta must not overflow.
        let p = softmax_policy(&q, 1e6).unwrap();
        assert!(close(p.row(0), &[1.0, 0.0]));
    }

    #[test]
    fn mixture_cases() {
        let q = QFunction::from_rows(&[vec![5.0, 1.0, 0.0]]).unwrap();
        let base = Policy::uniform(1, 3);
        assert!(close(mixture_behavior(&q, &base, 0.3).unwrap().row(0), &[0.7, 0.15, 0.15]));
        assert!(close(mixture_behavior(&q, &base, 0.0).unwrap().row(0), &[1.0, 0.0, 0.0]));
        let degenerate = Policy::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(mixture_behavior(&q, &degenerate, 0.3), Err(Error::Domain(_))));
        assert!(mixture_behavior(&q, &base, 1.0).is_err());
    }
}
