use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdcc_core::encoder::{Branches, Encoder, EncoderConfig};
use rdcc_core::nn::*;
use rdcc_core::Tag;

mod common;
use common::{bits, direct_sum, randomise_running_stats};

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn undilated_odd_windows_are_bit_identical_to_the_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let window = 2 * rng.gen_range(0..4) + 1;
        let (n, c_in, c_out) = (rng.gen_range(1..20), rng.gen_range(1..12), rng.gen_range(1..20));
        let mut f = ConvFilter::init(window, 1, c_in, c_out, &mut rng);
        f.bias = random(&mut rng, &[c_out]);
        let x = random(&mut rng, &[n, c_in]);
        let l = (window / 2) as isize;
        assert_eq!(bits(&conv1d(&x, &f).unwrap()), bits(&direct_sum(&x, &f, -l, l)));
    }
}

#[test]
fn even_windows_drop_the_leftmost_tap() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let l = rng.gen_range(1..=3);
        let (d, n) = (rng.gen_range(1..=4), rng.gen_range(1..25));
        let (c_in, c_out) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let mut f = ConvFilter::init(2 * l, d, c_in, c_out, &mut rng);
        f.bias = random(&mut rng, &[c_out]);
        let x = random(&mut rng, &[n, c_in]);
        let l = l as isize;
        assert_eq!(bits(&conv1d(&x, &f).unwrap()), bits(&direct_sum(&x, &f, -l + 1, l)));
    }
}

#[test]
fn dilated_odd_windows_match_the_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let l = rng.gen_range(0..=3);
        let (d, n) = (rng.gen_range(1..=5), rng.gen_range(1..30));
        let f = ConvFilter::init(2 * l + 1, d, 3, 4, &mut rng);
        let x = random(&mut rng, &[n, 3]);
        let l = l as isize;
        assert_eq!(bits(&conv1d(&x, &f).unwrap()), bits(&direct_sum(&x, &f, -l, l)));
    }
}

#[test]
fn packed_sequences_convolve_like_separate_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = ConvFilter::init(3, 2, 4, 5, &mut rng);
    let lengths = [3, 1, 7, 4];
    let seg = Segments::new(&lengths);
    let x = random(&mut rng, &[seg.total(), 4]);
    let packed = f.forward(&x, &seg).unwrap();
    for range in seg.ranges() {
        let part = Tensor::from_vec(&[range.len(), 4], x.data()[range.start * 4..range.end * 4].to_vec()).unwrap();
        let alone = conv1d(&part, &f).unwrap();
        assert_eq!(alone.data(), &packed.data()[range.start * 5..range.end * 5]);
    }
}

#[test]
fn default_receptive_field_is_minus_one_to_eight() {
    let config = EncoderConfig::default();
    let mut field = receptive_field(&config.left_layers());
    field.extend(receptive_field(&[(config.std_window, 1)]));
    assert_eq!(field, (-1..=8).collect());
    assert_eq!(receptive_field(&config.left_layers()), (0..=8).collect());
}

#[test]
fn perturbations_reach_exactly_the_receptive_field() {
    let config = EncoderConfig::default();
    let n = 32;
    let seg = Segments::single(n);
    for trial in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
        let mut encoder = Encoder::configure(&config, Tag::COUNT, &mut rng).unwrap();
        randomise_running_stats(&mut encoder, &mut rng);
        let e = random(&mut rng, &[n, config.embed_dim()]);
        let (base, _) = encoder.forward(&e, &seg, Mode::Infer).unwrap();
        for p in [0, 1, 5, 16, 30, 31] {
            let mut moved = e.clone();
            for v in moved.row_mut(p) {
                *v += rng.gen_range(0.1..1.0);
            }
            let (out, _) = encoder.forward(&moved, &seg, Mode::Infer).unwrap();
            let changed: BTreeSet<isize> = (0..n).filter(|&i| out.row(i) != base.row(i)).map(|i| i as isize).collect();
            let want: BTreeSet<isize> = (0..n as isize).filter(|&i| (-1..=8).contains(&(p as isize - i))).collect();
            assert_eq!(changed, want, "trial {trial}, p = {p}");
        }
    }
}

fn small_config() -> EncoderConfig {
    EncoderConfig {
        char_dim: 3,
        feature_dim: 3,
        filters: 6,
        std_filters: 6,
        ..EncoderConfig::default()
    }
}

#[test]
fn residual_block_with_zero_transform_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut block = ResidualBlock::init(2, 3, 6, 6, true, 0.01, 0.99, 1e-3, &mut rng).unwrap();
    block.second.bn.gamma.fill(0.0);
    block.second.bn.beta.fill(0.0);
    let x = random(&mut rng, &[9, 6]);
    for mode in [Mode::Train, Mode::Infer] {
        let y = residual_block(&x, &block, mode).unwrap();
        assert_eq!(bits(&y), bits(&x));
    }
}

#[test]
fn both_branches_are_the_projected_sum_of_each() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let encoder = Encoder::configure(&small_config(), 5, &mut rng).unwrap();
    let seg = Segments::new(&[4, 6]);
    let e = random(&mut rng, &[10, 6]);
    for mode in [Mode::Train, Mode::Infer] {
        let (scores, _) = encoder.forward(&e, &seg, mode).unwrap();
        let (left, right) = encoder.branch_outputs(&e, &seg, mode).unwrap();
        let mut sum = left.unwrap();
        sum.add_assign(&right.unwrap());
        assert_eq!(bits(&scores), bits(&encoder.projection.forward(&sum).unwrap()));
    }
}

#[test]
fn single_branch_variants() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let seg = Segments::single(8);
    let e = random(&mut rng, &[8, 6]);
    for branches in [Branches::Left, Branches::Right] {
        let config = EncoderConfig {
            branches,
            ..small_config()
        };
        let encoder = Encoder::configure(&config, 4, &mut rng).unwrap();
        assert_eq!(encoder.left.is_empty(), branches == Branches::Right);
        assert_eq!(encoder.right.is_none(), branches == Branches::Left);
        let (scores, _) = encoder.forward(&e, &seg, Mode::Train).unwrap();
        assert_eq!(scores.shape(), [8, 4]);
        assert!(scores.all_finite());
    }
}

#[test]
fn dropping_the_skip_changes_outputs_but_stays_finite() {
    let seg = Segments::new(&[5, 7]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let e = random(&mut rng, &[12, 6]);
    let with = Encoder::configure(&small_config(), 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let without_config = EncoderConfig {
        residual: false,
        ..small_config()
    };
    // Same seed, so the two differ only in the skip.
    let mut without = Encoder::configure(&without_config, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(with.left[0].first, without.left[0].first);
    let (a, _) = with.forward(&e, &seg, Mode::Train).unwrap();
    let (b, _) = without.forward(&e, &seg, Mode::Train).unwrap();
    assert!(b.all_finite());
    assert!(a.max_abs_diff(&b) > 1e-6);
    // Without the skip the block width may differ from the embedding width.
    let narrow = EncoderConfig {
        filters: 4,
        std_filters: 4,
        ..without_config
    };
    without = Encoder::configure(&narrow, 4, &mut rng).unwrap();
    assert!(without.forward(&e, &seg, Mode::Train).unwrap().0.all_finite());
    assert!(EncoderConfig { residual: true, ..narrow }.validate().is_err());
}
