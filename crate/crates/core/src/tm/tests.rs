use proptest::prelude::*;
use rand::SeedableRng;

use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn config(n_vars: usize, n_obs: usize, cpc: usize, field: usize, n_actions: usize) -> MemoryConfig {
    MemoryConfig {
        topology: Topology {
            n_vars,
            n_obs_states: n_obs,
            cells_per_column: cpc,
            context_field_size: field,
            n_actions,
        },
        ..MemoryConfig::default()
    }
}

fn chain_memory(n_obs: usize) -> Memory {
    Memory::new(config(1, n_obs, 1, 1, 0), rng(1)).unwrap()
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}

#[test]
fn no_segments_gives_uniform_prior() {
    let mut mem = Memory::new(config(2, 3, 2, 2, 2), rng(0)).unwrap();
    mem.set_messages(BeliefState::one_hot(mem.topology(), &[0, 7]).unwrap()).unwrap();
    let prior = mem.predict(Some(1)).unwrap();
    assert!(prior.probs().iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-12));
}

#[test]
fn matching_segment_dominates() {
    let mut mem = Memory::new(config(1, 4, 1, 1, 0), rng(0)).unwrap();
    mem.add_segment(Segment { owner: 2, factor: 1.0, receptive_field: vec![0], weights: vec![1.0] })
        .unwrap();
    mem.set_messages(BeliefState::one_hot(mem.topology(), &[0]).unwrap()).unwrap();
    let prior = mem.predict(None).unwrap();
    assert_eq!(argmax(prior.probs()), 2);
    assert!(prior.probs()[2] > 0.99);
}

#[test]
fn two_segments_follow_factor_ratio() {
    // Hand evaluation: fully matching contexts give log L = 0, so the owner
    // excitations are log 0.8 and log 0.2; the other cells sit at the floor.
    let cfg = config(1, 5, 1, 1, 0);
    let floor = cfg.eps_floor;
    let mut mem = Memory::new(cfg, rng(0)).unwrap();
    mem.add_segment(Segment { owner: 1, factor: 0.8, receptive_field: vec![0], weights: vec![1.0] })
        .unwrap();
    mem.add_segment(Segment { owner: 2, factor: 0.2, receptive_field: vec![0], weights: vec![1.0] })
        .unwrap();
    mem.set_messages(BeliefState::one_hot(mem.topology(), &[0]).unwrap()).unwrap();
    let p = mem.predict(None).unwrap();
    let lift = 1.0 + 1e-12; // the eps inside log(sum w m + eps)
    let z = (0.8 + 0.2) * lift + 3.0 * floor;
    assert!((p.probs()[1] / p.probs()[2] - 4.0).abs() < 1e-9);
    assert!((p.probs()[1] - 0.8 * lift / z).abs() < 1e-12);
    assert!((p.probs()[0] - floor / z).abs() < 1e-15);
}

#[test]
fn segment_log_likelihood_cases() {
    let mut mem = Memory::new(config(1, 4, 1, 4, 0), rng(0)).unwrap();
    let topo = *mem.topology();
    let all = Segment { owner: 0, factor: 1.0, receptive_field: vec![0, 1, 2, 3], weights: vec![1.0; 4] };

    // equal messages m = 0.25 on all four cells: log(4 * 0.25) - log 4 = log 0.25
    let uniform = BeliefState::uniform(&topo);
    let ll = mem.segment_log_likelihood(&all, &uniform, None).unwrap();
    assert!((ll - 0.25f64.ln()).abs() < 1e-9);

    // one-hot messages covering one of four cells: log(1/4)
    let hot = BeliefState::one_hot(&topo, &[2]).unwrap();
    let ll = mem.segment_log_likelihood(&all, &hot, None).unwrap();
    assert!((ll - 0.25f64.ln()).abs() < 1e-9);

    // w = 0 is floor dominated: log eps + sum log m - log n
    let none = Segment { weights: vec![0.0; 4], ..all.clone() };
    let ll = mem.segment_log_likelihood(&none, &uniform, None).unwrap();
    let expect = 1e-12f64.ln() + 4.0 * 0.25f64.ln() - 4.0f64.ln();
    assert!((ll - expect).abs() < 1e-9);

    let empty = Segment { receptive_field: vec![], weights: vec![], ..all };
    assert!(matches!(mem.segment_log_likelihood(&empty, &uniform, None), Err(Error::InvalidState(_))));
    assert!(mem.add_segment(empty).is_err());
}

#[test]
fn observe_restricts_to_column() {
    let mem = Memory::new(config(2, 3, 2, 1, 0), rng(0)).unwrap();
    let topo = *mem.topology();
    let uniform = BeliefState::uniform(&topo);
    let post = mem.observe(&uniform, &[1, 2]).unwrap();
    assert_eq!(post.var(0), &[0.0, 0.0, 0.5, 0.5, 0.0, 0.0]);
    assert_eq!(post.var(1), &[0.0, 0.0, 0.0, 0.0, 0.5, 0.5]);

    let prior = BeliefState::from_probs(
        &topo,
        vec![0.0, 0.0, 0.3, 0.1, 0.4, 0.2, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    )
    .unwrap();
    let post = mem.observe(&prior, &[1, 0]).unwrap();
    assert!((post.var(0)[2] - 0.75).abs() < 1e-12);
    assert!((post.var(0)[3] - 0.25).abs() < 1e-12);
    // no prior mass in the observed column: burst
    assert_eq!(post.var(1), &[0.5, 0.5, 0.0, 0.0, 0.0, 0.0]);

    assert!(mem.observe(&uniform, &[0]).is_err());
    assert!(mem.observe(&uniform, &[0, 3]).is_err());
}

#[test]
fn two_state_sequence_grows_two_segments() {
    let mut mem = chain_memory(2);
    for &o in &[0, 1, 0] {
        mem.step(None, &[o]).unwrap();
    }
    assert_eq!(mem.segment_count(), 2);
    for _ in 0..20 {
        for &o in &[1, 0] {
            mem.step(None, &[o]).unwrap();
        }
    }
    assert_eq!(mem.segment_count(), 2);
    assert!(mem.check_indices());
}

#[test]
fn zero_rates_only_grow() {
    let mut cfg = config(1, 3, 1, 1, 0);
    cfg.factor_lr = 0.0;
    cfg.specificity_lr = 0.0;
    cfg.initial_factor = Some(0.3);
    let mut mem = Memory::new(cfg, rng(0)).unwrap();
    for _ in 0..5 {
        for o in 0..3 {
            mem.step(None, &[o]).unwrap();
        }
    }
    assert_eq!(mem.segment_count(), 3);
    for s in mem.segments() {
        assert_eq!(s.factor, 0.3);
        assert_eq!(s.weights, vec![0.5]);
    }
}

#[test]
fn reinforcement_follows_closed_form() {
    let mut mem = chain_memory(2);
    let f0 = mem.config().f0();
    let a = mem.config().factor_lr;
    mem.learn_winners(&[0], &[1]).unwrap();
    for t in 1..=30 {
        mem.learn_winners(&[0], &[1]).unwrap();
        let f = mem.segments_of(1).next().unwrap().factor;
        let expect = 1.0 - (1.0 - f0) * (1.0 - a).powi(t);
        assert!((f - expect).abs() < 1e-12, "t={t}: {f} vs {expect}");
    }
    assert_eq!(mem.segment_count(), 1);
}

#[test]
fn false_predictions_are_punished() {
    let mut mem = chain_memory(3);
    mem.learn_winners(&[0], &[1]).unwrap();
    let f = mem.segments_of(1).next().unwrap().factor;
    mem.learn_winners(&[0], &[2]).unwrap();
    let punished = mem.segments_of(1).next().unwrap().factor;
    assert!((punished - f * (1.0 - mem.config().factor_lr)).abs() < 1e-15);
}

#[test]
fn specificity_tracks_coactivity() {
    // segment on cell 2 listening to {0, action 0}; action fires alone often
    let mut mem = Memory::new(config(1, 3, 1, 2, 2), rng(0)).unwrap();
    let a0 = mem.topology().action_cell(0);
    mem.learn_winners(&[0, a0], &[2]).unwrap();
    let w = mem.segments_of(2).next().unwrap().weights.clone();
    assert!(w.iter().all(|&x| (x - 0.55).abs() < 1e-12));
    mem.learn_winners(&[1, a0], &[0]).unwrap();
    let seg = mem.segments_of(2).next().unwrap();
    let i_action = seg.receptive_field.iter().position(|&u| u == a0).unwrap();
    assert!((seg.weights[i_action] - 0.55 * 0.9).abs() < 1e-12);
    assert!((seg.weights[1 - i_action] - 0.55).abs() < 1e-12);
}

#[test]
fn eviction_removes_weakest() {
    let mut cfg = config(1, 4, 1, 1, 0);
    cfg.max_segments_per_cell = 2;
    let mut mem = Memory::new(cfg, rng(0)).unwrap();
    mem.learn_winners(&[0], &[3]).unwrap();
    mem.learn_winners(&[0], &[3]).unwrap();
    mem.learn_winners(&[1], &[3]).unwrap();
    mem.learn_winners(&[2], &[3]).unwrap();
    let fields: Vec<Vec<usize>> = mem.segments_of(3).map(|s| s.receptive_field.clone()).collect();
    assert_eq!(mem.segments_of(3).count(), 2);
    assert!(fields.contains(&vec![0]));
    assert!(fields.contains(&vec![2]));
    assert!(mem.check_indices());
}

fn train_cycle(mem: &mut Memory, cycle: &[usize], passes: usize) {
    mem.reset();
    for _ in 0..passes {
        for &o in cycle {
            mem.step(None, &[o]).unwrap();
        }
    }
    mem.step(None, &[cycle[0]]).unwrap();
}

#[test]
fn trained_chain_predicts_next_column() {
    let mut mem = chain_memory(3);
    train_cycle(&mut mem, &[0, 1, 2], 1);
    mem.reset();
    let (p1, _) = mem.step(None, &[0]).unwrap();
    assert!(p1.probs().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-12));
    let (p2, _) = mem.step(None, &[1]).unwrap();
    assert_eq!(argmax(p2.probs()), 1);
    let (p3, _) = mem.step(None, &[2]).unwrap();
    assert_eq!(argmax(p3.probs()), 2);
}

#[test]
fn step_decomposes() {
    let mut a = Memory::new(config(2, 3, 2, 2, 2), rng(5)).unwrap();
    let seq = [[0, 1], [1, 2], [2, 0], [0, 1], [1, 1]];
    for (i, o) in seq.iter().enumerate() {
        a.step(Some(i % 2), o).unwrap();
    }
    let mut b = a.clone();
    let (prior, post) = a.step(Some(1), &[2, 2]).unwrap();

    let prev = b.messages().clone();
    let prior_b = b.predict(Some(1)).unwrap();
    let post_b = b.observe(&prior_b, &[2, 2]).unwrap();
    b.learn(&prev, &post_b, Some(1)).unwrap();
    assert_eq!(prior, prior_b);
    assert_eq!(post, post_b);
    let fa: Vec<f64> = a.segments().map(|s| s.factor).collect();
    let fb: Vec<f64> = b.segments().map(|s| s.factor).collect();
    assert_eq!(fa, fb);
}

#[test]
fn reset_semantics() {
    let mut mem = chain_memory(3);
    train_cycle(&mut mem, &[0, 1, 2], 2);
    let n = mem.segment_count();
    mem.reset();
    let once = mem.messages().clone();
    mem.reset();
    assert_eq!(&once, mem.messages());
    assert_eq!(mem.segment_count(), n);

    let fresh = chain_memory(3);
    let p = fresh.predict(None).unwrap();
    assert!(p.probs().iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12));
}

#[test]
fn rollout_semantics() {
    let mut mem = chain_memory(4);
    train_cycle(&mut mem, &[0, 1, 2, 3], 2);
    mem.reset();
    mem.infer(None, &[1]).unwrap();
    let before = mem.messages().clone();

    let one = mem.rollout(1, |_| None).unwrap();
    let direct = mem.predict(None).unwrap().column_marginals(mem.topology());
    assert_eq!(one.obs_dists[0], direct);

    let ro = mem.rollout(6, |_| None).unwrap();
    for (l, dist) in ro.obs_dists.iter().enumerate() {
        assert_eq!(argmax(dist), (1 + l + 1) % 4);
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert_eq!(&before, mem.messages());
    assert!(mem.rollout(0, |_| None).is_err());
}

#[test]
fn action_validation() {
    let mem = Memory::new(config(1, 2, 1, 1, 3), rng(0)).unwrap();
    assert!(mem.predict(None).is_err());
    assert!(mem.predict(Some(3)).is_err());
    assert!(mem.predict(Some(2)).is_ok());
    let plain = chain_memory(2);
    assert!(plain.predict(Some(0)).is_err());
}

#[test]
fn checkpoint_round_trip_preserves_behaviour() {
    let mut cfg = config(2, 3, 2, 2, 2);
    cfg.max_segments_per_cell = 2;
    let mut mem = Memory::new(cfg, rng(9)).unwrap();
    let mut obs_rng = rng(10);
    let mut stream = |n: usize| -> Vec<(usize, [usize; 2])> {
        (0..n)
            .map(|_| {
                use rand::Rng;
                (obs_rng.random_range(0..2), [obs_rng.random_range(0..3), obs_rng.random_range(0..3)])
            })
            .collect()
    };
    for (a, o) in stream(200) {
        mem.step(Some(a), &o).unwrap();
    }
    let mut buf = Vec::new();
    mem.write_to(&mut buf).unwrap();
    let mut back = Memory::read_from(&mut buf.as_slice()).unwrap();
    assert!(back.check_indices());
    for (a, o) in stream(200) {
        let x = mem.step(Some(a), &o).unwrap();
        let y = back.step(Some(a), &o).unwrap();
        assert_eq!(x, y);
    }
    let mut again = Vec::new();
    back.write_to(&mut again).unwrap();
    let mut orig = Vec::new();
    mem.write_to(&mut orig).unwrap();
    assert_eq!(orig, again);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn beliefs_stay_normalized_and_indices_consistent(
        seed in 0u64..1000,
        steps in prop::collection::vec((0usize..3, 0usize..4, 0usize..4), 1..60),
    ) {
        let mut cfg = config(2, 4, 3, 2, 3);
        cfg.max_segments_per_cell = 3;
        let mut mem = Memory::new(cfg, rng(seed)).unwrap();
        for (i, (a, o1, o2)) in steps.iter().enumerate() {
            if i % 17 == 16 {
                mem.reset();
            }
            let (prior, post) = mem.step(Some(*a), &[*o1, *o2]).unwrap();
            prop_assert!(prior.is_normalized(1e-6));
            prop_assert!(post.is_normalized(1e-6));
            for s in mem.segments() {
                prop_assert!(s.factor > 0.0 && s.factor <= 1.0);
                prop_assert!(s.weights.iter().all(|w| (0.0..=1.0).contains(w)));
            }
        }
        prop_assert!(mem.check_indices());
        let ro = mem.rollout(3, |_| Some(0)).unwrap();
        prop_assert!(ro.final_belief.is_normalized(1e-6));
        for d in &ro.obs_dists {
            prop_assert!((d.iter().sum::<f64>() - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn repeated_coincidence_never_decreases_factor(reps in 1usize..40, lr in 0.0f64..1.0) {
        let mut cfg = config(1, 3, 1, 1, 0);
        cfg.factor_lr = lr;
        cfg.initial_factor = Some(0.2);
        let mut mem = Memory::new(cfg, rng(0)).unwrap();
        let mut last = 0.0;
        for _ in 0..reps {
            mem.learn_winners(&[0], &[1]).unwrap();
            let f = mem.segments_of(1).next().unwrap().factor;
            prop_assert!(f >= last);
            last = f;
        }
    }
}
