mod support;

use landseg::autodiff::Tape;
use landseg::swin::{
    backbone_forward, cyclic_shift, upernet_head, window_partition, window_reverse, ModelParams, SwinConfig,
    SwinSegmenter,
};
use landseg::tensor::Tensor;
use proptest::prelude::*;
use support::{rand_tensor, seeded, shifted_attention_check};

#[test]
fn masked_shift_matches_region_attention_f32() {
    for seed in 0..5 {
        let e = shifted_attention_check::<f32>(seed, 8, 8, 2, 4);
        assert!(e.out_diff < 1e-5, "{e:?}");
        assert!(e.weight_diff < 1e-5, "{e:?}");
        assert!(e.cross_region_max < 1e-6, "{e:?}");
    }
}

#[test]
fn masked_shift_matches_region_attention_f64() {
    let e = shifted_attention_check::<f64>(3, 8, 8, 2, 4);
    assert!(e.out_diff < 1e-12 && e.weight_diff < 1e-12 && e.cross_region_max == 0.0, "{e:?}");
    // larger map, more windows without wrap-around
    let e = shifted_attention_check::<f64>(4, 16, 12, 3, 4);
    assert!(e.out_diff < 1e-12 && e.weight_diff < 1e-12 && e.cross_region_max == 0.0, "{e:?}");
}

#[test]
fn attention_rows_are_distributions() {
    use landseg::swin::{shift_attention_mask, window_attention};
    let mut rng = seeded(5);
    let params = support::attention_params::<f64>(&mut rng, "a", 8, 2, 4);
    let x: Tensor<f64> = rand_tensor(&mut rng, &[4, 16, 8], 2.0);
    let mask = shift_attention_mask::<f64>(8, 8, 4, 2).unwrap();
    for m in [None, Some(&mask)] {
        let mut tape = Tape::new();
        let xn = tape.constant(x.clone());
        let a = window_attention(&mut tape, &params, "a", xn, 2, 4, m).unwrap();
        for row in tape.value(a.probs).data().chunks(16) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }
}

#[test]
fn partition_reverse_on_12x12x8() {
    let x: Tensor<f32> = rand_tensor(&mut seeded(6), &[12, 12, 8], 1.0);
    let w = window_partition(&x, 4).unwrap();
    assert_eq!(w.shape(), &[9, 16, 8]);
    assert_eq!(window_reverse(&w, 4, 12, 12).unwrap(), x);
}

#[test]
fn tiny_forward_backward_is_finite() {
    let cfg = SwinConfig::tiny();
    let model = SwinSegmenter::<f32>::init(cfg.clone(), 1).unwrap();
    let images: Tensor<f32> = rand_tensor(&mut seeded(8), &[2, 32, 32, 3], 2.0);
    let pass = model.record(&images).unwrap();
    let logits = pass.logits().unwrap();
    assert_eq!(logits.shape(), &[2, 32, 32, 6]);
    assert!(logits.all_finite());
    let grads = pass.backward(&Tensor::ones(logits.shape())).unwrap();
    assert!(grads.iter().all(|(_, g)| g.all_finite()));
    assert_eq!(grads.len(), model.params().len());
}

#[test]
fn segmenter_pads_odd_sizes() {
    let model = SwinSegmenter::<f32>::init(SwinConfig::tiny(), 2).unwrap();
    let images: Tensor<f32> = rand_tensor(&mut seeded(9), &[1, 40, 23, 3], 1.0);
    assert_eq!(model.logits(&images).unwrap().shape(), &[1, 40, 23, 6]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn partition_then_reverse_is_identity(
        m in 2usize..6, bh in 1usize..4, bw in 1usize..4, c in 1usize..5, n in 1usize..3, seed in any::<u64>()
    ) {
        let (h, w) = (bh * m, bw * m);
        let shape: Vec<usize> = if n == 1 { vec![h, w, c] } else { vec![n, h, w, c] };
        let x: Tensor<f64> = rand_tensor(&mut seeded(seed), &shape, 1e3);
        let back = window_reverse(&window_partition(&x, m).unwrap(), m, h, w).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn shift_then_unshift_is_identity(
        h in 1usize..10, w in 1usize..10, c in 1usize..4, s in -12isize..12, seed in any::<u64>()
    ) {
        let x: Tensor<f32> = rand_tensor(&mut seeded(seed), &[h, w, c], 1e3);
        let y = cyclic_shift(&x, s).unwrap();
        prop_assert_eq!(y.get(&[0, 0, 0]), x.get(&[s.rem_euclid(h as isize) as usize, s.rem_euclid(w as isize) as usize, 0]));
        prop_assert_eq!(cyclic_shift(&y, -s).unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pyramid_and_head_shapes(
        window in prop::sample::select(vec![2usize, 4, 6]),
        d0 in 1usize..3, d2 in 1usize..3,
        dim in prop::sample::select(vec![8usize, 16]),
        hb in 1usize..3, wb in 1usize..3,
        seed in any::<u64>(),
    ) {
        let cfg = SwinConfig {
            window_size: window,
            embed_dim: dim,
            depths: [d0, 1, d2, 1],
            num_heads: [1, 2, 2, 4],
            decoder_channels: 8,
            ..SwinConfig::default()
        };
        let params = ModelParams::<f32>::random(&cfg, seed, 0.1).unwrap();
        let (h, w) = (32 * hb, 32 * wb);
        let mut tape = Tape::new();
        let img = tape.constant(rand_tensor(&mut seeded(seed), &[1, h, w, 3], 1.0));
        let pyr = backbone_forward(&mut tape, &params, &cfg, img).unwrap();
        for (k, &p) in pyr.iter().enumerate() {
            let f = 4 << k;
            prop_assert_eq!(tape.shape(p), &[1, h / f, w / f, dim << k][..]);
        }
        let logits = upernet_head(&mut tape, &params, &cfg, &pyr, (h, w)).unwrap();
        prop_assert_eq!(tape.shape(logits), &[1, h, w, 6][..]);
        prop_assert!(tape.value(logits).all_finite());
    }
}
