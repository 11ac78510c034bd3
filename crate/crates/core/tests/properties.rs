use neq_core::bandit::{stationary_distribution, Exp3, SwapLearner};
use neq_core::dp::{gap_report, gap_value, EqKind};
use neq_core::game::{families, game_distance, parse_game, write_game, Game, Shape};
use neq_core::nonstationary::{check_legality, compute_block_params, BlockSchedule, RandomSpawns};
use neq_core::policy::{CorrelatedPolicy, JointPolicy, ProductPolicy};
use neq_core::sequence::{DriftProfile, GameSequence};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn game_from(seed: u64, horizon: usize, states: usize, actions: &[usize]) -> Game {
    families::random_markov(horizon, states, actions, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn dims() -> impl Strategy<Value = (usize, usize, Vec<usize>)> {
    (1usize..=2, 1usize..=3, prop::collection::vec(1usize..=3, 2..=3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_format_round_trips(seed in any::<u64>(), (h, s, a) in dims()) {
        let g = game_from(seed, h, s, &a);
        let back = parse_game(&write_game(&g)).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn gaps_are_ordered(seed in any::<u64>(), (h, s, a) in dims(), sparsity in 0.0f64..0.8) {
        let g = game_from(seed, h, s, &a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let product: JointPolicy = ProductPolicy::random(g.shape(), sparsity, &mut rng).into();
        let r = gap_report(&g, &product).unwrap();
        prop_assert!(r.cce_gap >= 0.0);
        prop_assert!(r.ce_gap >= r.cce_gap);
        prop_assert_eq!(r.ne_gap, Some(r.cce_gap));
        prop_assert!(r.ce_gap <= h as f64 + 1e-12);
        let joint: JointPolicy = CorrelatedPolicy::random(g.shape(), sparsity, &mut rng).into();
        let r = gap_report(&g, &joint).unwrap();
        prop_assert!(r.ne_gap.is_none());
        prop_assert!(r.ce_gap >= r.cce_gap && r.cce_gap >= 0.0);
    }

    #[test]
    fn gap_moves_at_most_two_h_times_the_distance(seed in any::<u64>(), (h, s, a) in dims(), lambda in 0.0f64..1.0) {
        let g = game_from(seed, h, s, &a);
        let other = game_from(seed.wrapping_add(7), h, s, &a);
        let g2 = g.interpolate(&other, lambda).unwrap();
        let d = game_distance(&g, &g2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let pi: JointPolicy = CorrelatedPolicy::random(g.shape(), 0.3, &mut rng).into();
        for kind in [EqKind::Cce, EqKind::Ce] {
            let diff = (gap_value(&g, &pi, kind).unwrap() - gap_value(&g2, &pi, kind).unwrap()).abs();
            prop_assert!(diff <= 2.0 * h as f64 * d + 1e-12, "{} > 2H * {}", diff, d);
        }
    }

    #[test]
    fn exp3_stays_a_distribution(seed in any::<u64>(), arms in 1usize..6, rounds in 1u64..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut learner = Exp3::with_horizon(arms, rounds);
        for _ in 0..rounds {
            let a = learner.select(&mut rng);
            prop_assert!(a < arms);
            learner.update(a, rng.random_range(0.0..=1.0)).unwrap();
            let p = learner.probabilities();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn swap_learner_plays_a_fixed_point(seed in any::<u64>(), arms in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut learner = SwapLearner::new(arms, 200);
        for _ in 0..50 {
            let a = learner.select(&mut rng);
            learner.update(a, rng.random::<f64>()).unwrap();
            prop_assert!(learner.residual() <= 1e-9);
        }
    }

    #[test]
    fn stationary_distribution_agrees_with_power_iteration(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = Vec::with_capacity(n * n);
        for _ in 0..n {
            let row: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
            let total: f64 = row.iter().sum();
            q.extend(row.iter().map(|x| x / total));
        }
        let p = stationary_distribution(&q, n, None).unwrap();
        let reference = neq_testkit::power_iteration_stationary(&q, n);
        for (a, b) in p.iter().zip(&reference) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn random_schedules_are_legal(seed in any::<u64>(), n in 4u32..=12, log_c2 in -4.0f64..4.0, learn_frac in 0.0f64..0.9) {
        let params = compute_block_params(n, 2f64.powf(log_c2), 0.1);
        let block = 1u64 << n;
        let learn = (block as f64 * learn_frac) as u64;
        let mut schedule = BlockSchedule::new(params, block, learn).with_history();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spawns = RandomSpawns(&mut rng);
        while !schedule.is_finished() {
            schedule.plan(&mut spawns);
            schedule.finish_episode(false);
        }
        let violations = check_legality(&schedule);
        prop_assert!(violations.is_empty(), "{:?}", violations);
    }

    #[test]
    fn switching_sequences_report_their_switches(seed in any::<u64>(), len in 10usize..200, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut times: Vec<usize> = (0..k).map(|_| rng.random_range(2..=len)).collect();
        times.sort_unstable();
        times.dedup();
        let bases: Vec<Game> = (0..=times.len()).map(|_| families::random_matrix(&[2, 2], &mut rng)).collect();
        let seq = GameSequence::switching(bases, times.clone(), len).unwrap();
        prop_assert_eq!(seq.switch_count(), times.len());
        prop_assert_eq!(seq.change_points(), times);
        let (l, v) = seq.audit();
        prop_assert_eq!(l, seq.switch_count());
        prop_assert!((v - seq.variation()).abs() < 1e-9);
    }

    #[test]
    fn drift_sequences_respect_their_budget(seed in any::<u64>(), budget in 0.0f64..0.5, len in 2usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g0 = families::random_matrix(&[2, 3], &mut rng);
        let g1 = families::random_matrix(&[2, 3], &mut rng);
        for profile in [DriftProfile::Linear, DriftProfile::FrontLoaded, DriftProfile::AbruptBursts { bursts: 2 }] {
            if let Ok(seq) = GameSequence::drift(g0.clone(), g1.clone(), budget, len, profile) {
                let (_, v) = seq.audit();
                prop_assert!(v <= budget + 1e-9, "{} > {}", v, budget);
            }
        }
    }
}

#[test]
fn shapes_reject_zero_dimensions() {
    assert!(Shape::new(0, 1, vec![2]).is_err());
    assert!(Shape::new(1, 1, vec![0, 2]).is_err());
}
