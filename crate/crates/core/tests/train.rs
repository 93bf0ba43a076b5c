mod support;

use landseg::classes::{NODATA, NUM_CLASSES};
use landseg::fixture::{self, Fixture};
use landseg::raster::{GridSpec, LabelRaster, RgbRaster};
use landseg::swin::{SwinConfig, SwinSegmenter};
use landseg::tensor::Tensor;
use landseg::tiler::WeightVector;
use landseg::train::{
    argmax_labels, augment, images_to_tensor, sliding_infer, train_on_tiles, weighted_cross_entropy,
    ConfusionMatrix, LogitModel, TrainConfig, TrainError,
};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use support::{miou_by_sets, random_label_pair, seeded};

fn rational_miou(cm: &ConfusionMatrix) -> Ratio<u64> {
    let present = cm.present_classes();
    let sum = present
        .iter()
        .map(|&c| {
            let (i, u) = cm.intersection_union(c);
            Ratio::new(i, u)
        })
        .fold(Ratio::from_integer(0), |a, b| a + b);
    sum / present.len() as u64
}

#[test]
fn miou_matches_set_oracle() {
    let mut rng = seeded(31);
    for k in 0..20 {
        let len = rng.gen_range(50..400);
        let (truth, pred) = random_label_pair(&mut rng, len, NODATA);
        let mut cm = ConfusionMatrix::default();
        cm.add(&truth, &pred, NODATA).unwrap();
        let oracle = miou_by_sets(&truth, &pred, NODATA).unwrap();
        assert_eq!(rational_miou(&cm), oracle, "map {k}");
        let float = *oracle.numer() as f64 / *oracle.denom() as f64;
        assert!((cm.miou().unwrap() - float).abs() <= 1e-12, "map {k}");
    }
}

proptest! {
    #[test]
    fn confusion_ignores_pixel_order(seed in any::<u64>(), len in 1usize..300) {
        let mut rng = seeded(seed);
        let (truth, pred) = random_label_pair(&mut rng, len, NODATA);
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut rng);
        let mut a = ConfusionMatrix::default();
        a.add(&truth, &pred, NODATA).unwrap();
        let mut b = ConfusionMatrix::default();
        let pt: Vec<u8> = perm.iter().map(|&i| truth[i]).collect();
        let pp: Vec<u8> = perm.iter().map(|&i| pred[i]).collect();
        b.add(&pt, &pp, NODATA).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(a.total(), truth.iter().filter(|&&t| t != NODATA).count() as u64);
    }

    #[test]
    fn weight_scale_leaves_loss_and_gradient(seed in any::<u64>(), scale in 1e-2f64..1e2) {
        let mut rng = seeded(seed);
        let n = rng.gen_range(1..40);
        let logits: Tensor<f64> = support::rand_tensor(&mut rng, &[n, NUM_CLASSES], 5.0);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..NUM_CLASSES as u8)).collect();
        // the first pixel always stays scored
        for l in labels.iter_mut().skip(1) {
            if rng.gen_bool(0.2) {
                *l = NODATA;
            }
        }
        let w: [f64; NUM_CLASSES] = std::array::from_fn(|_| rng.gen_range(0.1..3.0));
        let (l1, g1) = weighted_cross_entropy(&logits, &labels, &WeightVector::new(w).unwrap(), NODATA).unwrap();
        let (l2, g2) = weighted_cross_entropy(&logits, &labels, &WeightVector::new(w.map(|v| v * scale)).unwrap(), NODATA).unwrap();
        prop_assert!((l1 - l2).abs() <= 1e-6);
        prop_assert!(g1.max_abs_diff(&g2) <= 1e-6);
    }

    #[test]
    fn crop_histogram_is_sub_multiset(seed in any::<u64>(), side in 4usize..20, crop_frac in 0.1f64..1.0) {
        let mut rng = seeded(seed);
        let g = GridSpec::new(0.0, 0.0, 0.5, side, side).unwrap();
        let labels = LabelRaster::from_data(g, (0..side * side).map(|_| match rng.gen_range(0..7u8) { 6 => NODATA, v => v }).collect()).unwrap();
        let image = RgbRaster::from_data(g, (0..side * side * 3).map(|_| rng.gen()).collect()).unwrap();
        let crop = ((side as f64 * crop_frac) as usize).max(1);
        let (img, lab) = augment(&image, &labels, crop, seed).unwrap();
        prop_assert_eq!(img.data.len(), crop * crop * 3);
        let count = |d: &[u8]| {
            let mut h = [0usize; 256];
            d.iter().for_each(|&v| h[v as usize] += 1);
            h
        };
        let (whole, part) = (count(&labels.data), count(&lab.data));
        prop_assert!(part.iter().zip(&whole).all(|(p, w)| p <= w));
        prop_assert_eq!(augment(&image, &labels, crop, seed).unwrap(), (img, lab));
    }
}

/// Per-pixel logits `[j, 1 - j, 0.55, -5, -5, -5]` where `j` is the pixel's
/// column inside the window.
struct ColumnProbe;

impl LogitModel for ColumnProbe {
    fn logits(&self, image: &Tensor<f32>) -> Result<Tensor<f32>, TrainError> {
        let (h, w) = (image.shape()[1], image.shape()[2]);
        Ok(Tensor::from_fn(&[1, h, w, NUM_CLASSES], |i| {
            let j = ((i / NUM_CLASSES) % w) as f32;
            [j, 1.0 - j, 0.55, -5.0, -5.0, -5.0][i % NUM_CLASSES]
        }))
    }
}

#[test]
fn two_overlapping_windows_average_by_hand() {
    // Windows cover columns {0,1} and {1,2}. Column 1 averages to
    // [0.5, 0.5, 0.55, ..] so class 2 wins there although neither window
    // alone would pick it.
    let g = GridSpec::new(0.0, 0.0, 0.5, 3, 2).unwrap();
    let out = sliding_infer(&ColumnProbe, &RgbRaster::filled(g, [0; 3]), 2, 1).unwrap();
    assert_eq!(out.data, [1, 2, 0, 1, 2, 0]);
}

#[test]
fn single_window_equals_one_forward() {
    let model = SwinSegmenter::<f32>::init(SwinConfig::tiny(), 4).unwrap();
    let g = GridSpec::new(0.0, 0.0, 0.5, 64, 64).unwrap();
    let mut rng = seeded(41);
    let img = RgbRaster::from_data(g, (0..64 * 64 * 3).map(|_| rng.gen()).collect()).unwrap();
    let direct = argmax_labels(&model.logits(&images_to_tensor(&[&img])).unwrap());
    assert_eq!(sliding_infer(&model, &img, 64, 32).unwrap().data, direct);
}

#[test]
fn stride_equal_to_window_is_per_window_argmax() {
    let model = SwinSegmenter::<f32>::init(SwinConfig::tiny(), 5).unwrap();
    let g = GridSpec::new(0.0, 0.0, 0.5, 96, 64).unwrap();
    let mut rng = seeded(42);
    let img = RgbRaster::from_data(g, (0..96 * 64 * 3).map(|_| rng.gen()).collect()).unwrap();
    let out = sliding_infer(&model, &img, 32, 32).unwrap();
    for wr in 0..2 {
        for wc in 0..3 {
            let crop = img.crop(wr * 32, wc * 32, 32, 32);
            let labels = argmax_labels(&model.logits(&images_to_tensor(&[&crop])).unwrap());
            for r in 0..32 {
                for c in 0..32 {
                    assert_eq!(out.get(wr * 32 + r, wc * 32 + c), labels[r * 32 + c]);
                }
            }
        }
    }
}

fn short_config(steps: usize) -> TrainConfig {
    TrainConfig { max_steps: steps, batch_size: 2, seed: 9, ..fixture::train_config() }
}

#[test]
fn training_is_deterministic() {
    let tiles = Fixture::generate(0).unwrap().training_tiles();
    let a = train_on_tiles(&tiles, &short_config(4), &SwinConfig::tiny(), |_| {}).unwrap();
    let b = train_on_tiles(&tiles, &short_config(4), &SwinConfig::tiny(), |_| {}).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.model.params(), b.model.params());
}

#[test]
fn one_step_moves_only_reached_parameters() {
    let tiles = Fixture::generate(0).unwrap().training_tiles();
    let cfg = SwinConfig::tiny();
    let init = SwinSegmenter::<f32>::init(cfg.clone(), 9).unwrap();
    let stepped = train_on_tiles(&tiles, &short_config(1), &cfg, |_| {}).unwrap().model;
    let probe = images_to_tensor(&[&tiles[0].image]);
    let pass = init.record(&probe).unwrap();
    let grads = pass.backward(&Tensor::ones(pass.logits().unwrap().shape())).unwrap();
    let mut moved = 0;
    for (name, before) in init.params().iter() {
        let after = stepped.params().get(name).unwrap();
        if after != before {
            assert!(grads.is_active(name), "{name} changed without a gradient");
            moved += 1;
        }
    }
    assert!(moved > 0);
}

#[test]
fn empty_training_set_is_an_error() {
    assert!(matches!(train_on_tiles(&[], &short_config(1), &SwinConfig::tiny(), |_| {}), Err(TrainError::Empty(_))));
}

#[test]
fn fixture_overfits_with_falling_loss() {
    let run = support::overfit_fixture(fixture::train_config().seed);
    assert!(run.accuracy >= 0.95, "accuracy {}", run.accuracy);
    assert_eq!(run.rises, 0, "20-step moving average rose {} times", run.rises);
}
