use neq_core::dp::{equilibrium_gap, exact_value, gap_report, gap_value, EqKind};
use neq_core::game::{families, Shape};
use neq_core::oracles::{extended_mdp, induced_mdp};
use neq_core::policy::{CorrelatedPolicy, JointPolicy, MixturePolicy, ProductPolicy};
use neq_testkit as tk;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn random_shape(rng: &mut ChaCha8Rng) -> Shape {
    let m = rng.random_range(2..=3);
    let actions = (0..m).map(|_| rng.random_range(1..=3)).collect();
    Shape::new(rng.random_range(1..=2), rng.random_range(1..=3), actions).unwrap()
}

fn brute_gaps(g: &neq_core::game::Game, pi: &JointPolicy) -> (f64, f64) {
    let v = tk::values(g, pi);
    let mut cce: f64 = 0.0;
    let mut ce: f64 = 0.0;
    for i in 0..g.shape().players() {
        cce = cce.max(tk::brute_best_response(g, pi, i) - v[i]);
        ce = ce.max(tk::brute_best_modification(g, pi, i) - v[i]);
    }
    (cce, ce.max(cce))
}

#[test]
fn dynamic_programming_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let shape = random_shape(&mut rng);
        let g = families::random_markov(shape.horizon(), shape.states(), shape.actions(), &mut rng);
        let product: JointPolicy = ProductPolicy::random(&shape, 0.3, &mut rng).into();
        let (cce, ce) = brute_gaps(&g, &product);
        let r = equilibrium_gap(&g, &product, EqKind::Ne).unwrap();
        assert!((r.ne_gap.unwrap() - cce).abs() < TOL);
        assert!((r.cce_gap - cce).abs() < TOL);
        assert!((r.ce_gap - ce).abs() < TOL);
        let v = exact_value(&g, &product).unwrap();
        for (a, b) in v.iter().zip(tk::values(&g, &product)) {
            assert!((a - b).abs() < TOL);
        }

        let joint: JointPolicy = CorrelatedPolicy::random(&shape, 0.5, &mut rng).into();
        let (cce, ce) = brute_gaps(&g, &joint);
        assert!((gap_value(&g, &joint, EqKind::Cce).unwrap() - cce).abs() < TOL);
        assert!((gap_value(&g, &joint, EqKind::Ce).unwrap() - ce).abs() < TOL);
        assert!(gap_value(&g, &joint, EqKind::Ne).is_err());
    }
}

#[test]
fn matrix_mixtures_match_their_flattening() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let g = families::random_matrix(&[2, 3], &mut rng);
        let comps = (0..3).map(|_| ProductPolicy::random(g.shape(), 0.4, &mut rng)).collect();
        let mix = MixturePolicy::uniform(comps).unwrap();
        let flat: JointPolicy = mix.flatten().into();
        let mix: JointPolicy = mix.into();
        let a = gap_report(&g, &mix).unwrap();
        let b = gap_report(&g, &flat).unwrap();
        assert!((a.cce_gap - b.cce_gap).abs() < TOL);
        assert!((a.ce_gap - b.ce_gap).abs() < TOL);
        let (cce, ce) = brute_gaps(&g, &mix);
        assert!((a.cce_gap - cce).abs() < TOL && (a.ce_gap - ce).abs() < TOL);
    }
}

#[test]
fn deviation_mdps_solve_to_the_enumerated_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..40 {
        let g = families::random_markov(2, 2, &[2, 2], &mut rng);
        let pi: JointPolicy = if rng.random::<bool>() {
            CorrelatedPolicy::random(g.shape(), 0.4, &mut rng).into()
        } else {
            ProductPolicy::random(g.shape(), 0.4, &mut rng).into()
        };
        for i in 0..2 {
            let br = induced_mdp(&g, &pi, i).unwrap().solve().value;
            assert!((br - tk::brute_best_response(&g, &pi, i)).abs() < TOL);
            let mut count = 0;
            let mut best = f64::NEG_INFINITY;
            tk::for_each_modification(&g, &pi, i, |_, v| {
                count += 1;
                best = best.max(v);
            });
            assert_eq!(count, 256);
            let bm = extended_mdp(&g, &pi, i).unwrap().solve().value;
            assert!((bm - best).abs() < TOL, "{bm} vs {best}");
        }
    }
}

#[test]
fn episode_mixtures_are_rejected_beyond_one_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let g = families::random_markov(2, 2, &[2, 2], &mut rng);
    let mix: JointPolicy = MixturePolicy::uniform(vec![ProductPolicy::uniform(g.shape())])
        .unwrap()
        .into();
    assert!(gap_report(&g, &mix).is_err());
    assert!(extended_mdp(&g, &mix, 0).is_err());
    assert!(induced_mdp(&g, &mix, 0).is_err());
}
