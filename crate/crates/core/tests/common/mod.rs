//! Independent oracles. Nothing here goes through the crate's dense
//! solvers: values come from plain loops over the transition tensor.
#![allow(dead_code)]

use retrace_core::generators::{generate_garnet, random_policy, GarnetParams};
use retrace_core::{Mdp, Policy, QFunction, SplitMix64, TraceFamily, TraceSpec};

pub struct Case {
    pub mdp: Mdp,
    pub pi: Policy,
    pub mu: Policy,
}

pub const GAMMAS: [f64; 3] = [0.5, 0.9, 0.99];

/// Random Garnets with at most 10 states (absorbing sink included) and
/// full-support random policies.
pub fn battery(seed: u64, count: usize) -> Vec<Case> {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|i| {
            let n = 1 + rng.below(9);
            let na = 2 + rng.below(2);
            let mut params = GarnetParams::new(n, na, 1 + rng.below(n), GAMMAS[i % 3], rng.next_u64());
            params.termination_prob = rng.uniform_in(0.01, 0.3);
            let mdp = generate_garnet(&params).unwrap();
            let pi = random_policy(n + 1, na, &mut rng);
            let mu = random_policy(n + 1, na, &mut rng);
            Case { mdp, pi, mu }
        })
        .collect()
}

pub fn random_q(n_states: usize, n_actions: usize, rng: &mut SplitMix64, scale: f64) -> QFunction {
    let v = (0..n_states * n_actions).map(|_| rng.uniform_in(-scale, scale)).collect();
    QFunction::new(n_states, n_actions, v).unwrap()
}

pub fn coefficient(spec: &TraceSpec, pi: f64, mu: f64, product: f64) -> f64 {
    let l = spec.lambda();
    match spec.family() {
        TraceFamily::ImportanceSampling => pi / mu,
        TraceFamily::QPiLambda => l,
        TraceFamily::TreeBackup => l * pi,
        TraceFamily::Retrace => l * (pi / mu).min(1.0),
        TraceFamily::CappedNonMarkov => {
            if product > 0.0 {
                l * (1.0 / product).min(pi / mu)
            } else {
                l * pi / mu
            }
        }
    }
}

fn v(q: &[f64], pi: &Policy, x: usize, na: usize) -> f64 {
    (0..na).map(|a| pi.prob(x, a) * q[x * na + a]).sum()
}

/// `T^pi Q` by direct summation.
pub fn bellman(mdp: &Mdp, pi: &Policy, q: &[f64]) -> Vec<f64> {
    let (n, na, g) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    let mut out = vec![0.0; n * na];
    for x in 0..n {
        for a in 0..na {
            let mut s = 0.0;
            for y in 0..n {
                s += mdp.prob(x, a, y) * v(q, pi, y, na);
            }
            out[x * na + a] = mdp.reward(x, a) + g * s;
        }
    }
    out
}

/// `Q^pi` by fixed-point iteration to machine precision.
pub fn q_pi_iterative(mdp: &Mdp, pi: &Policy) -> Vec<f64> {
    let mut q = vec![0.0; mdp.n_pairs()];
    for _ in 0..200_000 {
        let next = bellman(mdp, pi, &q);
        let change = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        if change < 1e-15 {
            break;
        }
    }
    q
}

/// `Q*` by policy iteration with iterative evaluation.
pub fn q_star_policy_iteration(mdp: &Mdp) -> Vec<f64> {
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    let mut actions = vec![0usize; n];
    loop {
        let pi = Policy::deterministic(na, &actions).unwrap();
        let q = q_pi_iterative(mdp, &pi);
        let mut changed = false;
        for x in 0..n {
            let best = (0..na).fold(actions[x], |b, a| if q[x * na + a] > q[x * na + b] + 1e-12 { a } else { b });
            if best != actions[x] {
                actions[x] = best;
                changed = true;
            }
        }
        if !changed {
            return q;
        }
    }
}

/// `R Q - Q = sum_t (gamma P^{c mu})^t (T^pi Q - Q)` summed term by term.
/// Markovian families only.
pub fn r_q_series(mdp: &Mdp, spec: &TraceSpec, pi: &Policy, mu: &Policy, q: &[f64], terms: usize) -> Vec<f64> {
    let (n, na, g) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    let tq = bellman(mdp, pi, q);
    let mut w: Vec<f64> = tq.iter().zip(q).map(|(a, b)| a - b).collect();
    let mut out: Vec<f64> = q.iter().zip(&w).map(|(a, b)| a + b).collect();
    let weight = |y: usize, b: usize| {
        let m = mu.prob(y, b);
        if m == 0.0 {
            0.0
        } else {
            m * coefficient(spec, pi.prob(y, b), m, 1.0)
        }
    };
    for _ in 1..terms {
        let mut next = vec![0.0; n * na];
        for x in 0..n {
            for a in 0..na {
                let mut s = 0.0;
                for y in 0..n {
                    let p = mdp.prob(x, a, y);
                    if p == 0.0 {
                        continue;
                    }
                    for b in 0..na {
                        s += p * weight(y, b) * w[y * na + b];
                    }
                }
                next[x * na + a] = g * s;
            }
        }
        w = next;
        for (o, d) in out.iter_mut().zip(&w) {
            *o += d;
        }
    }
    out
}

/// `R Q(x,a)` by explicit path enumeration to `depth` future steps,
/// carrying the running trace product. Works for every family.
pub fn r_q_paths(mdp: &Mdp, spec: &TraceSpec, pi: &Policy, mu: &Policy, q: &[f64], depth: usize) -> Vec<f64> {
    let tq = bellman(mdp, pi, q);
    let delta: Vec<f64> = tq.iter().zip(q).map(|(a, b)| a - b).collect();
    (0..mdp.n_pairs())
        .map(|p| q[p] + path_sum(mdp, spec, pi, mu, &delta, p, 1.0, 1.0, depth))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn path_sum(mdp: &Mdp, spec: &TraceSpec, pi: &Policy, mu: &Policy, delta: &[f64], p: usize, weight: f64, product: f64, depth: usize) -> f64 {
    let mut total = weight * product * delta[p];
    if depth == 0 {
        return total;
    }
    let na = mdp.n_actions();
    let (x, a) = (p / na, p % na);
    for y in 0..mdp.n_states() {
        let pr = mdp.prob(x, a, y);
        if pr == 0.0 {
            continue;
        }
        for b in 0..na {
            let m = mu.prob(y, b);
            if m == 0.0 {
                continue;
            }
            let c = coefficient(spec, pi.prob(y, b), m, product);
            total += path_sum(mdp, spec, pi, mu, delta, y * na + b, weight * pr * m * mdp.gamma(), product * c, depth - 1);
        }
    }
    total
}

/// Expected visit counts `D(x,a) = sum_{t < horizon} Pr{(x_t, a_t) = (x, a)}`
/// for trajectories from `mu` started uniformly over non-absorbing states.
pub fn visit_counts(mdp: &Mdp, mu: &Policy, horizon: usize) -> Vec<f64> {
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    let starts = mdp.non_absorbing_states();
    let mut state = vec![0.0; n];
    for &x in &starts {
        state[x] = 1.0 / starts.len() as f64;
    }
    let mut d = vec![0.0; n * na];
    for _ in 0..horizon {
        let mut next = vec![0.0; n];
        for x in 0..n {
            if mdp.is_absorbing(x) || state[x] == 0.0 {
                continue;
            }
            for a in 0..na {
                let w = state[x] * mu.prob(x, a);
                d[x * na + a] += w;
                for (y, slot) in next.iter_mut().enumerate() {
                    *slot += w * mdp.prob(x, a, y);
                }
            }
        }
        state = next;
    }
    d
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
