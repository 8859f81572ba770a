mod common;

use common::*;
use retrace_core::generators::{generate_garnet, qpi_divergence_instance, GarnetParams};
use retrace_core::online::*;
use retrace_core::*;

#[test]
fn garnet_invariants_over_seeds() {
    for seed in 0..100 {
        let p = GarnetParams::new(5, 3, 1 + (seed as usize % 5), 0.9, seed);
        let mdp = generate_garnet(&p).unwrap();
        let again = generate_garnet(&p).unwrap();
        assert_eq!(mdp.to_text(), again.to_text());
        // Round trip through the validating constructor.
        let text = mdp.to_text();
        let parsed = Mdp::parse(&text).unwrap();
        assert_eq!(parsed, mdp);
        for x in 0..5 {
            for a in 0..3 {
                let row = mdp.next_state_probs(x, a);
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|v| *v >= 0.0));
                assert!(row[..5].iter().filter(|v| **v > 0.0).count() <= p.branching);
                assert!(mdp.reward(x, a).abs() <= 1.0);
            }
        }
    }
}

#[test]
fn single_step_garnet_values_are_rewards() {
    let mut p = GarnetParams::new(4, 2, 1, 0.9, 11);
    p.termination_prob = 1.0;
    let mdp = generate_garnet(&p).unwrap();
    let q = exact_q_star(&mdp, 1e-12).unwrap();
    assert!(sup_diff(q.values(), mdp.rewards()) < 1e-12);
}

#[test]
fn mean_trajectory_length_matches_termination() {
    let mdp = generate_garnet(&GarnetParams::new(5, 2, 2, 0.9, 12)).unwrap();
    let mu = Policy::uniform(6, 2);
    let mut rng = SplitMix64::new(12);
    let n = 100_000;
    let (mut s, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let t = sample_trajectory(&mdp, &mu, &mut rng, StartState::UniformNonAbsorbing, DEFAULT_MAX_LEN).unwrap();
        assert!(t.terminated);
        assert!(t.steps.iter().all(|st| st.mu_prob > 0.0 && st.reward.abs() <= mdp.r_max()));
        let l = t.len() as f64;
        s += l;
        sq += l * l;
    }
    let mean = s / n as f64;
    let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - 10.0).abs() < 3.0 * se, "mean {mean} se {se}");
}

fn hand_mdp() -> Mdp {
    // State 0: action 0 loops with reward 1, action 1 terminates with reward 2.
    Mdp::new(2, 2, 0.5, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0], vec![1.0, 2.0, 0.0, 0.0], [1]).unwrap()
}

#[test]
fn every_visit_update_by_hand() {
    let mdp = hand_mdp();
    let pi = Policy::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    let q = QFunction::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
    let step = |action, reward, mu_prob| Step { state: 0, action, reward, mu_prob };
    let traj = Trajectory {
        steps: vec![step(0, 1.0, 0.25), step(0, 1.0, 0.25), step(1, 2.0, 0.75)],
        final_state: 1,
        terminated: true,
    };
    let mut sched = StepSizeSchedule::with_defaults(4);
    let spec = TraceSpec::retrace(1.0).unwrap();
    let out = every_visit_update(&mdp, &q, &traj, &spec, &pi, &mut sched).unwrap();
    assert!((out.get(0, 0) - 1.8125).abs() < 1e-15);
    assert!((out.get(0, 1) - 1.0).abs() < 1e-15);
    assert_eq!(out.row(1), &[0.0, 0.0]);
    assert_eq!(sched.visits(0), 1);
    assert_eq!(sched.visits(1), 1);
    assert_eq!(sched.visits(2), 0);
    assert!((sched.current(0) - 0.5 / 2f64.powf(0.75)).abs() < 1e-15);

    let bad = Trajectory {
        steps: vec![step(0, 1.0, 0.0)],
        final_state: 0,
        terminated: false,
    };
    assert!(every_visit_update(&mdp, &q, &bad, &spec, &pi, &mut sched).is_err());
}

#[test]
fn eligibility_table_traces_stay_nonnegative() {
    let mut t = EligibilityTable::new(3);
    t.visit(1);
    t.decay(0.5);
    t.visit(1);
    t.visit(2);
    t.accumulate(2.0);
    assert_eq!(t.z(), &[0.0, 1.5, 1.0]);
    assert_eq!(t.pending(), &[0.0, 3.0, 2.0]);
    assert_eq!(t.visited(), &[1, 2]);
}

/// Exact expectation of the every-visit increment (alpha = 1) over all
/// trajectories of length at most `h`, compared with `D (R Q - Q)`.
fn unbiasedness_gap(mdp: &Mdp, spec: &TraceSpec, pi: &Policy, mu: &Policy, q: &QFunction, h: usize) -> (f64, f64) {
    let dist = trajectory_distribution(mdp, mu, h, 1 << 22).unwrap();
    let mut expected = vec![0.0; mdp.n_pairs()];
    for (p, traj) in &dist {
        let mut sched = StepSizeSchedule::new(1.0, 1.0, mdp.n_pairs()).unwrap();
        let out = every_visit_update(mdp, q, traj, spec, pi, &mut sched).unwrap();
        for (e, (o, v)) in expected.iter_mut().zip(out.values().iter().zip(q.values())) {
            *e += p * (o - v);
        }
    }
    let rq = apply_expected_operator(mdp, spec, pi, mu, q).unwrap();
    let d = visit_counts(mdp, mu, 100_000);
    let target: Vec<f64> = (0..mdp.n_pairs()).map(|i| d[i] * (rq.values()[i] - q.values()[i])).collect();
    let q_pi = exact_q_pi(mdp, pi).unwrap();
    let bound = 2.0 * mdp.gamma().powi(h as i32) * q.sup_distance(&q_pi);
    (sup_diff(&expected, &target), bound)
}

fn pinned_q(mdp: &Mdp, rng: &mut SplitMix64) -> QFunction {
    let mut q = random_q(mdp.n_states(), mdp.n_actions(), rng, 2.0);
    for x in mdp.absorbing_states().collect::<Vec<_>>() {
        for a in 0..mdp.n_actions() {
            q.set(x, a, 0.0);
        }
    }
    q
}

#[test]
fn sampled_update_is_unbiased_on_small_mdps() {
    let mut rng = SplitMix64::new(13);
    // Loop-or-terminate, a 2-state ring with termination, and an acyclic chain.
    let loop_mdp = Mdp::new(2, 2, 0.9, vec![0.7, 0.3, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0, 0.0], [1]).unwrap();
    let ring = Mdp::new(
        3,
        2,
        0.9,
        vec![
            0.0, 0.7, 0.3, 0.7, 0.0, 0.3, //
            0.7, 0.0, 0.3, 0.0, 0.7, 0.3, //
            0.0, 0.0, 1.0, 0.0, 0.0, 1.0,
        ],
        vec![0.5, 0.0, 0.0, 1.0, 0.0, 0.0],
        [2],
    )
    .unwrap();
    let acyclic = Mdp::new(
        3,
        2,
        0.9,
        vec![
            0.0, 0.6, 0.4, 0.0, 0.2, 0.8, //
            0.0, 0.0, 1.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0, 0.0, 1.0,
        ],
        vec![0.3, -0.2, 1.0, 0.4, 0.0, 0.0],
        [2],
    )
    .unwrap();
    for mdp in [&loop_mdp, &ring, &acyclic] {
        let n = mdp.n_states();
        let pi = generators::random_policy(n, 2, &mut rng);
        let mu = generators::random_policy(n, 2, &mut rng);
        for spec in [TraceSpec::retrace(1.0).unwrap(), TraceSpec::tree_backup(0.7).unwrap(), TraceSpec::importance_sampling()] {
            let q = pinned_q(mdp, &mut rng);
            let (gap, bound) = unbiasedness_gap(mdp, &spec, &pi, &mu, &q, 8);
            assert!(gap <= bound, "{spec:?}: gap {gap} > {bound}");
        }
    }
    // Every path of the acyclic MDP ends within 2 steps, so nothing is truncated.
    let pi = generators::random_policy(3, 2, &mut rng);
    let mu = generators::random_policy(3, 2, &mut rng);
    let q = pinned_q(&acyclic, &mut rng);
    let (gap, _) = unbiasedness_gap(&acyclic, &TraceSpec::retrace(0.8).unwrap(), &pi, &mu, &q, 8);
    assert!(gap < 1e-12, "{gap}");
}

#[test]
fn truncation_error_shrinks_with_horizon() {
    let mut rng = SplitMix64::new(14);
    let mdp = Mdp::new(2, 2, 0.9, vec![0.7, 0.3, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0, 0.0], [1]).unwrap();
    let pi = generators::random_policy(2, 2, &mut rng);
    let mu = generators::random_policy(2, 2, &mut rng);
    let q = pinned_q(&mdp, &mut rng);
    let spec = TraceSpec::retrace(1.0).unwrap();
    let (g4, _) = unbiasedness_gap(&mdp, &spec, &pi, &mu, &q, 4);
    let (g12, _) = unbiasedness_gap(&mdp, &spec, &pi, &mu, &q, 12);
    assert!(g12 < g4 * 0.1, "{g4} -> {g12}");
}

#[test]
fn control_with_zero_episodes_logs_initial_error() {
    let mdp = Mdp::new(1, 2, 0.5, vec![1.0, 1.0], vec![1.0, 0.0], []).unwrap();
    let cfg = ControlConfig::new(TraceSpec::retrace(1.0).unwrap(), PolicySchedule::greedy(), PolicySchedule::Fixed(Policy::uniform(1, 2)), 0, 0);
    let rec = run_control(&mdp, &cfg).unwrap();
    assert_eq!(rec.entries.len(), 1);
    assert_eq!(rec.entries[0].episode, 0);
    assert!((rec.entries[0].err_q_star - 2.0).abs() < 1e-9);
}

#[test]
fn control_converges_on_two_action_loop() {
    // Q* = [2, 1]; trajectories never terminate so they are capped at 10 steps.
    let mdp = Mdp::new(1, 2, 0.5, vec![1.0, 1.0], vec![1.0, 0.0], []).unwrap();
    let mut cfg = ControlConfig::new(
        TraceSpec::retrace(1.0).unwrap(),
        PolicySchedule::epsilon_greedy(Sequence::Harmonic { scale: 1.0 }).unwrap(),
        PolicySchedule::Fixed(Policy::uniform(1, 2)),
        5000,
        0,
    );
    cfg.max_len = 10;
    let rec = run_control(&mdp, &cfg).unwrap();
    assert!(!rec.diverged);
    assert!(rec.final_entry().err_q_star < 0.05, "{:?}", rec.final_entry());
}

#[test]
fn qpi_traces_diverge_online_where_retrace_does_not() {
    let inst = qpi_divergence_instance(0.05).unwrap();
    let q_star_norm = exact_q_star(&inst.mdp, 1e-12).unwrap().sup_norm();
    let run = |spec| {
        let mut cfg = ControlConfig::new(spec, PolicySchedule::greedy(), PolicySchedule::Fixed(inst.mu.clone()), 5000, 0);
        cfg.log_every = 1;
        run_control(&inst.mdp, &cfg).unwrap()
    };
    let qpi = run(TraceSpec::qpi(1.0).unwrap());
    let first = qpi.entries.iter().find(|e| e.q_norm > 10.0 * q_star_norm);
    assert!(first.is_some_and(|e| e.episode < 5000));
    let retrace = run(TraceSpec::retrace(1.0).unwrap());
    assert!(!retrace.diverged);
    assert!(retrace.entries.iter().all(|e| e.q_norm < 10.0 * q_star_norm));
}

#[test]
fn control_is_deterministic_and_rejects_capped_traces() {
    let mdp = generate_garnet(&GarnetParams::new(4, 2, 2, 0.9, 15)).unwrap();
    let behaviour = PolicySchedule::mixture(Policy::uniform(5, 2), 0.3).unwrap();
    let mut cfg = ControlConfig::new(TraceSpec::retrace(0.9).unwrap(), PolicySchedule::greedy(), behaviour, 300, 99);
    cfg.log_every = 7;
    let a = run_control(&mdp, &cfg).unwrap();
    let b = run_control(&mdp, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.entries.len(), 1 + 300 / 7 + 1);
    cfg.spec = TraceSpec::capped(1.0).unwrap();
    assert!(run_control(&mdp, &cfg).is_err());
}
