mod common;

use common::*;
use proptest::prelude::*;
use retrace_core::generators::{generate_garnet, random_policy, GarnetParams};
use retrace_core::online::{epsilon_greedy, mixture_behavior, softmax_policy, StepSizeSchedule};
use retrace_core::operators::min_transition_operator;
use retrace_core::*;

fn case_from(seed: u64, n: usize, na: usize, gamma: f64) -> Case {
    let mut rng = SplitMix64::new(seed);
    let mut p = GarnetParams::new(n, na, 1 + rng.below(n), gamma, seed);
    p.termination_prob = rng.uniform_in(0.02, 0.5);
    let mdp = generate_garnet(&p).unwrap();
    let pi = random_policy(n + 1, na, &mut rng);
    let mu = random_policy(n + 1, na, &mut rng);
    Case { mdp, pi, mu }
}

fn safe_spec(kind: u8, lambda: f64) -> TraceSpec {
    match kind % 3 {
        0 => TraceSpec::retrace(lambda).unwrap(),
        1 => TraceSpec::tree_backup(lambda).unwrap(),
        _ => TraceSpec::importance_sampling(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_monotone(seed in any::<u64>(), n in 1usize..6, na in 2usize..4, kind in 0u8..3, lambda in 0.0f64..=1.0, shift in 0.0f64..3.0) {
        let case = case_from(seed, n, na, 0.9);
        let spec = safe_spec(kind, lambda);
        let mut rng = SplitMix64::new(seed ^ 1);
        let q1 = random_q(n + 1, na, &mut rng, 5.0);
        let bumps: Vec<f64> = (0..q1.values().len()).map(|_| rng.uniform() * shift).collect();
        let q2 = QFunction::new(n + 1, na, q1.values().iter().zip(&bumps).map(|(a, b)| a + b).collect()).unwrap();
        let r1 = apply_expected_operator(&case.mdp, &spec, &case.pi, &case.mu, &q1).unwrap();
        let r2 = apply_expected_operator(&case.mdp, &spec, &case.pi, &case.mu, &q2).unwrap();
        for (a, b) in r1.values().iter().zip(r2.values()) {
            prop_assert!(*a <= *b + 1e-9);
        }
    }

    #[test]
    fn operator_contracts_around_q_pi(seed in any::<u64>(), n in 1usize..6, na in 2usize..4, kind in 0u8..3, lambda in 0.0f64..=1.0, gi in 0usize..3) {
        let case = case_from(seed, n, na, GAMMAS[gi]);
        let spec = safe_spec(kind, lambda);
        let mut rng = SplitMix64::new(seed ^ 2);
        let q = random_q(n + 1, na, &mut rng, 10.0);
        let q_pi = exact_q_pi(&case.mdp, &case.pi).unwrap();
        let rq = apply_expected_operator(&case.mdp, &spec, &case.pi, &case.mu, &q).unwrap();
        let g = case.mdp.gamma();
        prop_assert!(rq.sup_distance(&q_pi) <= g * q.sup_distance(&q_pi) + 1e-9);
        let report = contraction_diagnostics(&case.mdp, &spec, &case.pi, &case.mu, 0).unwrap();
        prop_assert!(report.max_eta <= g + 1e-12);
        for (i, (r, p)) in rq.values().iter().zip(q_pi.values()).enumerate() {
            prop_assert!((r - p).abs() <= report.eta.values()[i] * q.sup_distance(&q_pi) + 1e-9);
        }
    }

    #[test]
    fn transition_operators_are_stochastic(seed in any::<u64>(), n in 1usize..8, na in 2usize..4) {
        let case = case_from(seed, n, na, 0.5);
        let p = transition_operator(&case.mdp, &case.pi).unwrap();
        prop_assert!(p.min_entry() >= 0.0);
        for s in p.row_sums() {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
        let m = min_transition_operator(&case.mdp, &case.pi, &case.mu).unwrap();
        for (s, t) in m.row_sums().iter().zip(p.row_sums()) {
            prop_assert!(*s <= t + 1e-12);
        }
    }

    #[test]
    fn control_matrix_is_nonnegative_with_small_rows(seed in any::<u64>(), n in 1usize..6, na in 2usize..4, kind in 0u8..3, lambda in 0.0f64..=1.0, gi in 0usize..3) {
        let case = case_from(seed, n, na, GAMMAS[gi]);
        let a = control_matrix_a(&case.mdp, &safe_spec(kind, lambda), &case.pi, &case.mu).unwrap();
        prop_assert!(a.min_entry() >= -1e-12);
        for s in a.row_sums() {
            prop_assert!(s <= case.mdp.gamma() + 1e-10);
        }
    }

    #[test]
    fn epsilon_greedy_is_increasingly_greedy(seed in any::<u64>(), n in 1usize..6, na in 2usize..5, e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0) {
        let case = case_from(seed, n, na, 0.9);
        let (hi, lo) = if e1 >= e2 { (e1, e2) } else { (e2, e1) };
        let mut rng = SplitMix64::new(seed ^ 3);
        let qk = random_q(n + 1, na, &mut rng, 5.0);
        let qk1 = random_q(n + 1, na, &mut rng, 5.0);
        let pk = transition_operator(&case.mdp, &epsilon_greedy(&qk, hi).unwrap()).unwrap().apply(&qk1).unwrap();
        let pk1 = transition_operator(&case.mdp, &epsilon_greedy(&qk1, lo).unwrap()).unwrap().apply(&qk1).unwrap();
        for (a, b) in pk1.values().iter().zip(pk.values()) {
            prop_assert!(*a >= *b - 1e-12);
        }
    }

    #[test]
    fn softmax_expectation_grows_with_beta(seed in any::<u64>(), n in 1usize..6, na in 2usize..5, b1 in 0.0f64..20.0, b2 in 0.0f64..20.0) {
        let case = case_from(seed, n, na, 0.9);
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let mut rng = SplitMix64::new(seed ^ 4);
        let q = random_q(n + 1, na, &mut rng, 5.0);
        let pk = transition_operator(&case.mdp, &softmax_policy(&q, lo).unwrap()).unwrap().apply(&q).unwrap();
        let pk1 = transition_operator(&case.mdp, &softmax_policy(&q, hi).unwrap()).unwrap().apply(&q).unwrap();
        for (a, b) in pk1.values().iter().zip(pk.values()) {
            prop_assert!(*a >= *b - 1e-12);
        }
    }

    #[test]
    fn mixture_rows_sum_to_one(seed in any::<u64>(), n in 1usize..8, na in 2usize..5, eps in 0.0f64..0.999) {
        let mut rng = SplitMix64::new(seed);
        let q = random_q(n, na, &mut rng, 5.0);
        let base = random_policy(n, na, &mut rng);
        let mu = mixture_behavior(&q, &base, eps).unwrap();
        for x in 0..n {
            let s: f64 = mu.row(x).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!((mu.prob(x, q.greedy_action(x)) - (1.0 - eps)).abs() < 1e-12);
        }
    }

    #[test]
    fn text_format_round_trips(seed in any::<u64>(), n in 1usize..6, na in 1usize..4) {
        let mdp = generate_garnet(&GarnetParams::new(n, na, 1 + (seed as usize) % n, 0.9, seed)).unwrap();
        let text = mdp.to_text();
        let back = Mdp::parse(&text).unwrap();
        prop_assert_eq!(&back, &mdp);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn spectral_radius_below_safety_threshold(seed in any::<u64>(), n in 1usize..5, na in 2usize..4, frac in 0.0f64..0.999, gi in 0usize..3) {
        let case = case_from(seed, n, na, GAMMAS[gi]);
        let t = analysis::qpi_lambda_safety(&case.pi, &case.mu, case.mdp.gamma()).unwrap();
        let lambda = (t * frac).min(1.0);
        let est = analysis::spectral_radius_qpi(&case.mdp, lambda, &case.pi, &case.mu).unwrap();
        prop_assert!(est.converged);
        prop_assert!(est.radius <= 1.0 + 1e-8, "radius {} at lambda {}", est.radius, lambda);
    }
}

#[test]
fn softmax_monotonicity_fails_for_unrelated_estimates() {
    // Softmax of a different estimate can be greedier than softmax of Q_{k+1}.
    let qk1 = QFunction::from_rows(&[vec![1.0, 0.0]]).unwrap();
    let qk = QFunction::from_rows(&[vec![100.0, 0.0]]).unwrap();
    let next = qk1.expectation(0, &softmax_policy(&qk1, 1.0).unwrap());
    let prev = qk1.expectation(0, &softmax_policy(&qk, 1.0).unwrap());
    assert!((next - 1.0f64.exp() / (1.0 + 1.0f64.exp())).abs() < 1e-15);
    assert!(prev > next + 0.2);
}

#[test]
fn robbins_monro_partial_sums() {
    // sum alpha diverges and sum alpha^2 converges for exponents in (0.5, 1].
    for &e in &[0.55, 0.75, 1.0] {
        let s = StepSizeSchedule::new(0.5, e, 1).unwrap();
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut s1_half = 0.0;
        let mut s2_half = 0.0;
        let n = 1_000_000u64;
        for k in 0..n {
            let a = s.step_for_count(k);
            s1 += a;
            s2 += a * a;
            if k + 1 == n / 2 {
                s1_half = s1;
                s2_half = s2;
            }
        }
        // Linear sums keep growing by a non-vanishing amount when n doubles;
        // squared sums gain less than their tail bound.
        let tail_sq = 0.25 * (n as f64 / 2.0).powf(1.0 - 2.0 * e) / (2.0 * e - 1.0);
        assert!(s1 - s1_half > 0.5 * 0.5f64.powf(e) * (if e == 1.0 { 0.69 } else { 1.0 }), "e={e}");
        assert!(s2 - s2_half <= tail_sq, "e={e} {} > {}", s2 - s2_half, tail_sq);
        assert!(s2.is_finite());
    }
    assert!(StepSizeSchedule::new(0.5, 0.5, 1).is_err());
    assert!(StepSizeSchedule::new(0.5, 1.01, 1).is_err());
}
