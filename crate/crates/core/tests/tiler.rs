mod support;

use landseg::classes::{NODATA, NUM_CLASSES};
use landseg::raster::{GridSpec, LabelRaster, RgbRaster};
use landseg::tiler::{
    class_stats, compute_weights, cut_tiles, filter_tiles, write_dataset, ClassHistogram, Dataset, Split,
    SplitSpec, TileRecord, WeightScheme, WeightVector,
};
use proptest::prelude::*;
use rand::Rng;
use support::seeded;

fn tile_with_nodata(id: &str, side: usize, nodata: usize) -> TileRecord {
    let g = GridSpec::new(0.0, 0.0, 0.5, side, side).unwrap();
    let mut labels = vec![0u8; side * side];
    labels[..nodata].fill(NODATA);
    TileRecord::new(
        id.into(),
        RgbRaster::filled(g, [1, 2, 3]),
        LabelRaster::from_data(g, labels).unwrap(),
    )
    .unwrap()
}

#[test]
fn strictly_more_than_half_nodata_is_dropped() {
    let tiles = vec![
        tile_with_nodata("over", 1000, 501_000),
        tile_with_nodata("half", 1000, 500_000),
        tile_with_nodata("clean", 1000, 0),
    ];
    assert_eq!(tiles[0].nodata_fraction, 0.501);
    assert_eq!(tiles[1].nodata_fraction, 0.5);
    let kept: Vec<String> = filter_tiles(tiles, 0.5).into_iter().map(|t| t.tile_id).collect();
    assert_eq!(kept, ["half", "clean"]);
}

#[test]
fn striped_tile_counts() {
    // stripe widths 1..=6 columns then 4 nodata columns, 10 rows
    let g = GridSpec::new(0.0, 0.0, 0.5, 25, 10).unwrap();
    let mut row = Vec::new();
    for c in 0..NUM_CLASSES {
        row.extend(std::iter::repeat_n(c as u8, c + 1));
    }
    row.extend([NODATA; 4]);
    let data: Vec<u8> = (0..10).flat_map(|_| row.clone()).collect();
    let t = TileRecord::new("s".into(), RgbRaster::filled(g, [0; 3]), LabelRaster::from_data(g, data).unwrap()).unwrap();
    let h = class_stats(&[t]).unwrap();
    assert_eq!(h.counts, [10, 20, 30, 40, 50, 60]);
    assert_eq!(h.total(), 210);
}

#[test]
fn median_frequency_hand_oracle() {
    // freq = (.4, .2, .1, .1, .04, .16), median = (.1 + .16) / 2 = .13
    let h = ClassHistogram { counts: [100, 50, 25, 25, 10, 40] };
    let w = compute_weights(&h, WeightScheme::MedianFrequency).unwrap();
    for (got, want) in w.values().iter().zip([0.325, 0.65, 1.3, 1.3, 3.25, 0.8125]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn cut_tile_georeference() {
    let g = GridSpec::new(0.0, 0.0, 0.5, 2000, 1000).unwrap();
    let tiles = cut_tiles(&RgbRaster::filled(g, [0; 3]), &LabelRaster::filled(g, 0), 1000).unwrap();
    assert_eq!(tiles.len(), 2);
    let r = tiles[1].georef();
    assert_eq!((r.origin_x, r.origin_y), (500.0, 0.0));
}

#[test]
fn split_is_deterministic() {
    let a = SplitSpec::new(0.8, 7).assign(10);
    assert_eq!(a, SplitSpec::new(0.8, 7).assign(10));
    assert_eq!(a.iter().filter(|&&s| s == Split::Training).count(), 8);
}

fn random_tiles(rng: &mut rand_chacha::ChaCha8Rng) -> Vec<TileRecord> {
    let n = rng.gen_range(1..5);
    let side = rng.gen_range(4..24);
    (0..n)
        .map(|k| {
            let g = GridSpec::new(900_000.0 + 1000.0 * k as f64, 6_400_000.0, 0.5, side, side).unwrap();
            let labels = (0..side * side)
                .map(|_| if rng.gen_bool(0.2) { NODATA } else { rng.gen_range(0..NUM_CLASSES as u8) })
                .collect();
            let image = (0..side * side * 3).map(|_| rng.gen()).collect();
            TileRecord::new(
                format!("t{k}"),
                RgbRaster::from_data(g, image).unwrap(),
                LabelRaster::from_data(g, labels).unwrap(),
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn dataset_write_read_round_trip() {
    let mut rng = seeded(21);
    for case in 0..100 {
        let tiles = random_tiles(&mut rng);
        let dir = tempfile::tempdir().unwrap();
        let split = SplitSpec::new(rng.gen_range(0.0..=1.0), case);
        let manifest = write_dataset(&tiles, split, dir.path(), WeightVector::ign()).unwrap();
        let ds = Dataset::open(dir.path()).unwrap();
        assert_eq!(ds.manifest, manifest);
        let mut read: Vec<TileRecord> = Split::ALL.iter().flat_map(|&s| ds.load_split(s).unwrap()).collect();
        read.sort_by(|a, b| a.tile_id.cmp(&b.tile_id));
        assert_eq!(read.len(), tiles.len());
        for (r, t) in read.iter().zip(&tiles) {
            assert_eq!(r.tile_id, t.tile_id);
            assert_eq!(r.labels.data, t.labels.data, "case {case}");
            assert_eq!(r.image.data, t.image.data, "case {case}");
            assert!(r.labels.grid.same_shape(&t.labels.grid));
            assert_eq!(r.nodata_fraction, t.nodata_fraction);
        }
    }
}

proptest! {
    #[test]
    fn filter_extremes(fracs in proptest::collection::vec(0usize..=16, 1..12)) {
        let tiles: Vec<TileRecord> = fracs.iter().enumerate().map(|(i, &n)| tile_with_nodata(&i.to_string(), 4, n)).collect();
        prop_assert_eq!(filter_tiles(tiles.clone(), 1.0), tiles.clone());
        let clean: Vec<TileRecord> = tiles.iter().filter(|t| t.labels.nodata_count() == 0).cloned().collect();
        prop_assert_eq!(filter_tiles(tiles, 0.0), clean);
    }

    #[test]
    fn inverse_frequency_conserves_mass(counts in proptest::array::uniform6(1u64..1_000_000)) {
        let h = ClassHistogram { counts };
        let w = compute_weights(&h, WeightScheme::InverseFrequency).unwrap();
        let mass: f64 = counts.iter().zip(w.values()).map(|(&c, &w)| c as f64 * w).sum();
        prop_assert!((mass - h.total() as f64).abs() <= 1e-9 * h.total() as f64);
    }

    #[test]
    fn median_frequency_direction(counts in proptest::array::uniform6(1u64..1_000_000)) {
        let h = ClassHistogram { counts };
        let freq = h.frequencies();
        let mut sorted = freq;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = (sorted[2] + sorted[3]) / 2.0;
        let w = compute_weights(&h, WeightScheme::MedianFrequency).unwrap();
        for (f, w) in freq.iter().zip(w.values()) {
            if *f > median {
                prop_assert!(*w < 1.0);
            } else if *f < median {
                prop_assert!(*w > 1.0);
            }
        }
    }
}
