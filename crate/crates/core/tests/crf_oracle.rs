use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdcc_core::crf::*;
use rdcc_core::nn::{grad_check, Tensor};
use rdcc_core::{Error, Tag};

mod common;
use common::{all_paths, enumerate, random};

#[test]
fn two_hundred_random_instances_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=5);
        let em = random(&mut rng, &[n, k], 3.0);
        let tr = random(&mut rng, &[k + 1, k], 3.0);
        let want = enumerate(&em, &tr);
        assert!((log_partition(&em, &tr).unwrap() - want.log_z).abs() <= 1e-9);
        let (path, score) = viterbi(&em, &tr, false).unwrap();
        assert_eq!(path, want.best);
        assert!((score - want.best_score).abs() <= 1e-12);
        let m = marginals(&em, &tr).unwrap();
        for (a, b) in m.data().iter().zip(&want.marginals) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn viterbi_ties_follow_the_lower_index_rule() {
    // Integer scores make many exact ties.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.gen_range(1..=5);
        let k = rng.gen_range(2..=4);
        let int = |rng: &mut ChaCha8Rng, len| (0..len).map(|_| rng.gen_range(-1..=1) as f64).collect::<Vec<_>>();
        let em = Tensor::from_vec(&[n, k], int(&mut rng, n * k)).unwrap();
        let tr = Tensor::from_vec(&[k + 1, k], int(&mut rng, (k + 1) * k)).unwrap();
        let want = enumerate(&em, &tr);
        let (path, score) = viterbi(&em, &tr, false).unwrap();
        assert_eq!(score, want.best_score);
        assert_eq!(path, want.best);
    }
}

#[test]
fn constrained_decoding_matches_brute_force_over_valid_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let k = Tag::COUNT;
    for _ in 0..40 {
        let n = rng.gen_range(1..=3);
        let em = random(&mut rng, &[n, k], 2.0);
        let tr = random(&mut rng, &[k + 1, k], 2.0);
        let valid = |p: &[usize]| {
            let tags: Vec<Tag> = p.iter().map(|&i| Tag::from_index(i).unwrap()).collect();
            (0..tags.len()).all(|t| Tag::can_follow(if t == 0 { None } else { Some(tags[t - 1]) }, tags[t]))
        };
        let best = all_paths(n, k)
            .into_iter()
            .filter(|p| valid(p))
            .map(|p| (score_path(&em, &p, &tr).unwrap(), p))
            .fold(None::<(f64, Vec<usize>)>, |acc, cur| match acc {
                Some(a) if a.0 >= cur.0 => Some(a),
                _ => Some(cur),
            })
            .unwrap();
        let (path, score) = viterbi(&em, &tr, true).unwrap();
        assert!(valid(&path));
        assert!((score - best.0).abs() <= 1e-12);
    }
}

#[test]
fn constrained_mode_repairs_outside_then_inside() {
    let k = Tag::COUNT;
    let o = Tag::Outside.index();
    let i_b: Tag = "I-b".parse().unwrap();
    let s_b: Tag = "S-b".parse().unwrap();
    let mut em = Tensor::zeros(&[2, k]);
    em.set2(0, o, 5.0);
    em.set2(1, i_b.index(), 5.0);
    em.set2(1, s_b.index(), 1.0);
    let tr = Tensor::zeros(&[k + 1, k]);
    assert_eq!(viterbi(&em, &tr, false).unwrap().0, [o, i_b.index()]);
    assert_eq!(viterbi(&em, &tr, true).unwrap().0, [o, s_b.index()]);
}

#[test]
fn unsatisfiable_constraints_are_reported() {
    let em = Tensor::zeros(&[2, 2]);
    let tr = Tensor::zeros(&[3, 2]);
    assert_eq!(viterbi_masked(&em, &tr, |_, _| false), Err(Error::Unsatisfiable));
}

#[test]
fn nll_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n, k) = (4, 3);
    for _ in 0..5 {
        let em = random(&mut rng, &[n, k], 1.0);
        let tr = random(&mut rng, &[k + 1, k], 1.0);
        let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let (_, ge, ga) = nll_and_grad(&em, &gold, &tr).unwrap();
        let loss_e = |x: &[f64]| nll_and_grad(&Tensor::from_vec(&[n, k], x.to_vec()).unwrap(), &gold, &tr).unwrap().0;
        let c = grad_check(loss_e, em.data(), ge.data(), 1e-5, 1e-6).unwrap();
        assert!(c.passed, "{c:?}");
        let loss_a = |x: &[f64]| nll_and_grad(&em, &gold, &Tensor::from_vec(&[k + 1, k], x.to_vec()).unwrap()).unwrap().0;
        let c = grad_check(loss_a, tr.data(), ga.data(), 1e-5, 1e-6).unwrap();
        assert!(c.passed, "{c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_are_normalised_and_bounded(seed in any::<u64>(), n in 1usize..=4, k in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let em = random(&mut rng, &[n, k], 4.0);
        let tr = random(&mut rng, &[k + 1, k], 4.0);
        let log_z = log_partition(&em, &tr).unwrap();
        let mut total = 0.0;
        for p in all_paths(n, k) {
            let s = score_path(&em, &p, &tr).unwrap();
            if k > 1 {
                prop_assert!(s < log_z);
            } else {
                prop_assert!((s - log_z).abs() <= 1e-12);
            }
            total += (s - log_z).exp();
        }
        prop_assert!((total - 1.0).abs() <= 1e-9);
        let m = marginals(&em, &tr).unwrap();
        for t in 0..n {
            prop_assert!((m.row(t).iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn viterbi_dominates_any_gold(seed in any::<u64>(), n in 1usize..=8, k in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let em = random(&mut rng, &[n, k], 4.0);
        let tr = random(&mut rng, &[k + 1, k], 4.0);
        let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let (path, score) = viterbi(&em, &tr, false).unwrap();
        prop_assert_eq!(score, score_path(&em, &path, &tr).unwrap());
        prop_assert!(score >= score_path(&em, &gold, &tr).unwrap());
    }

    #[test]
    fn shifting_one_position_shifts_scores(seed in any::<u64>(), n in 1usize..=8, k in 1usize..=6, c in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let em = random(&mut rng, &[n, k], 4.0);
        let tr = random(&mut rng, &[k + 1, k], 4.0);
        let t = rng.gen_range(0..n);
        let mut shifted = em.clone();
        for v in shifted.row_mut(t) {
            *v += c;
        }
        let (p0, s0) = viterbi(&em, &tr, false).unwrap();
        let (p1, s1) = viterbi(&shifted, &tr, false).unwrap();
        prop_assert_eq!(p0, p1);
        prop_assert!((s1 - s0 - c).abs() <= 1e-9);
        let dz = log_partition(&shifted, &tr).unwrap() - log_partition(&em, &tr).unwrap();
        prop_assert!((dz - c).abs() <= 1e-9);
    }
}
