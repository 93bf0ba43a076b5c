//! Acceptance gate: one line per criterion, nonzero exit if any fails.
//!
//! `cargo test --test acceptance`

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use landseg::classes::{NODATA, NUM_CLASSES};
use landseg::cli::Palette;
use landseg::fixture;
use landseg::raster::{GridSpec, LabelRaster, RgbRaster};
use landseg::swin::gradcheck::gradient_check;
use landseg::swin::{cyclic_shift, window_partition, window_reverse, ModelParams, SwinConfig};
use landseg::tensor::Tensor;
use landseg::tiler::{
    compute_weights, filter_tiles, write_dataset, ClassHistogram, Dataset, Split, SplitSpec, TileRecord,
    WeightScheme, WeightVector, IGN_WEIGHTS,
};
use landseg::train::{weighted_cross_entropy, ConfusionMatrix};
use num_rational::Ratio;
use rand::Rng;
use support::seeded;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

enum Status {
    Pass,
    Fail,
    NotApplicable,
}

fn report(status: Status, name: &str, detail: &str, secs: f64) {
    let tag = match status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::NotApplicable => "N/A ",
    };
    println!("[{tag}] {name}: {detail} ({secs:.1}s)");
}

fn run(name: &str, budget_s: Option<f64>, f: impl FnOnce() -> Check) -> bool {
    let t0 = Instant::now();
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Err(msg)
    });
    let secs = t0.elapsed().as_secs_f64();
    let r = match (r, budget_s) {
        (Ok(d), Some(b)) if secs > b => Err(format!("{d}; over the {b:.0}s budget")),
        (r, _) => r,
    };
    match &r {
        Ok(d) => report(Status::Pass, name, d, secs),
        Err(e) => report(Status::Fail, name, e, secs),
    }
    r.is_ok()
}

fn shifted_window_equivalence() -> Check {
    let e = support::shifted_attention_check::<f32>(0, 8, 8, 2, 4);
    ensure(e.out_diff < 1e-5, format!("output differs by {:.2e}", e.out_diff))?;
    ensure(e.weight_diff < 1e-5, format!("weights differ by {:.2e}", e.weight_diff))?;
    ensure(e.cross_region_max < 1e-6, format!("cross-region weight {:.2e}", e.cross_region_max))?;
    Ok(format!(
        "max |out diff| {:.2e}, max |weight diff| {:.2e}, max cross-region weight {:.2e}",
        e.out_diff, e.weight_diff, e.cross_region_max
    ))
}

fn gradient_check_tiny() -> Check {
    let cfg = SwinConfig::tiny();
    let params = ModelParams::<f64>::random(&cfg, 7, 0.4).map_err(|e| e.to_string())?;
    let mut rng = seeded(8);
    let images = Tensor::from_fn(&[1, 32, 32, 3], |_| rng.gen_range(-1.0..1.0));
    let weights = Tensor::from_fn(&[1, 32, 32, NUM_CLASSES], |_| rng.gen_range(-1.0..1.0));
    let r = gradient_check(&cfg, &params, &images, &weights, 1e-3).map_err(|e| e.to_string())?;
    let worst = r.worst().ok_or("no parameters checked")?;
    ensure(r.params.len() == params.len(), "not every parameter was checked")?;
    ensure(
        worst.max_rel_err <= 1e-3,
        format!("{} [{}]: relative error {:.2e}", worst.name, worst.worst_index, worst.max_rel_err),
    )?;
    Ok(format!(
        "{} tensors, {} scalars, worst relative error {:.2e} ({})",
        r.params.len(),
        r.scalars_checked(),
        worst.max_rel_err,
        worst.name
    ))
}

fn rasterization_oracle() -> Check {
    use landseg::classes::ClassId;
    use landseg::geovec::{rasterize, DEFAULT_PRIORITY};
    let grid = GridSpec::new(935_000.0, 6_390_000.0, 0.5, 64, 64).map_err(|e| e.to_string())?;
    let mut rng = seeded(11);
    let mut pixels = 0;
    for k in 0..100 {
        let poly = support::random_convex(&mut rng, 64);
        let f = support::classed(support::lattice_to_world(&poly, (grid.origin_x, grid.origin_y), 0.5), ClassId::HERBACEOUS);
        let r = rasterize(&[f], &grid, &DEFAULT_PRIORITY).map_err(|e| e.to_string())?;
        for p in 0..64 * 64 {
            let want = if support::center_inside(&poly, p / 64, p % 64) { 3 } else { NODATA };
            ensure(r.data[p] == want, format!("polygon {k}, pixel ({}, {}): got {}, oracle {want}", p / 64, p % 64, r.data[p]))?;
            pixels += (want == 3) as usize;
        }
    }
    Ok(format!("100 polygons bit-exact, {pixels} pixels inside"))
}

fn tile_filter_boundary() -> Check {
    let g = GridSpec::new(0.0, 0.0, 0.5, 1000, 1000).map_err(|e| e.to_string())?;
    let tile = |id: &str, nodata: usize| {
        let mut d = vec![1u8; 1_000_000];
        d[..nodata].fill(NODATA);
        TileRecord::new(id.into(), RgbRaster::filled(g, [0; 3]), LabelRaster::from_data(g, d).unwrap()).unwrap()
    };
    let tiles = vec![tile("a", 501_000), tile("b", 500_000)];
    ensure(tiles[0].nodata_fraction == 0.501 && tiles[1].nodata_fraction == 0.5, "unexpected fractions")?;
    let kept: Vec<String> = filter_tiles(tiles, 0.5).into_iter().map(|t| t.tile_id).collect();
    ensure(kept == ["b"], format!("kept {kept:?}"))?;
    Ok("0.501 dropped, 0.500 kept".into())
}

fn weights() -> Check {
    let manual = compute_weights(&ClassHistogram::default(), "manual".parse().map_err(|e: String| e)?).map_err(|e| e.to_string())?;
    let expected = [0.5, 1.31237, 1.38874, 1.39761, 1.5, 1.47807];
    ensure(manual.values() == &expected && IGN_WEIGHTS == expected, format!("manual gave {manual}"))?;
    let uniform = compute_weights(&ClassHistogram { counts: [12_345; NUM_CLASSES] }, WeightScheme::InverseFrequency)
        .map_err(|e| e.to_string())?;
    ensure(uniform.values() == &[1.0; NUM_CLASSES], format!("inverse frequency gave {uniform}"))?;
    Ok(format!("manual {manual}, uniform inverse frequency {uniform}"))
}

fn loss_analytics() -> Check {
    let mut rng = seeded(51);
    let n = 64;
    let labels: Vec<u8> = (0..n).map(|i| if i % 9 == 8 { NODATA } else { rng.gen_range(0..NUM_CLASSES as u8) }).collect();
    let (l, _) = weighted_cross_entropy(&Tensor::<f64>::full(&[n, NUM_CLASSES], 0.7), &labels, &WeightVector::ign(), NODATA)
        .map_err(|e| e.to_string())?;
    let ln6_err = (l - 6f64.ln()).abs();
    ensure(ln6_err <= 1e-6, format!("uniform logits gave {l}"))?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let logits: Tensor<f64> = support::rand_tensor(&mut rng, &[n, NUM_CLASSES], 6.0);
        let w: [f64; NUM_CLASSES] = std::array::from_fn(|_| rng.gen_range(0.1..3.0));
        let k = rng.gen_range(1e-3..1e3);
        let a = weighted_cross_entropy(&logits, &labels, &WeightVector::new(w).unwrap(), NODATA).unwrap();
        let b = weighted_cross_entropy(&logits, &labels, &WeightVector::new(w.map(|v| v * k)).unwrap(), NODATA).unwrap();
        worst = worst.max((a.0 - b.0).abs()).max(a.1.max_abs_diff(&b.1));
    }
    ensure(worst <= 1e-6, format!("rescaling moved loss or gradient by {worst:.2e}"))?;
    Ok(format!("|loss - ln 6| = {ln6_err:.1e}; rescaling changes at most {worst:.1e} over 50 cases"))
}

fn metric_oracle() -> Check {
    let mut rng = seeded(31);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let len = rng.gen_range(100..1000);
        let (truth, pred) = support::random_label_pair(&mut rng, len, NODATA);
        let mut cm = ConfusionMatrix::default();
        cm.add(&truth, &pred, NODATA).map_err(|e| e.to_string())?;
        let oracle = support::miou_by_sets(&truth, &pred, NODATA).ok_or("empty ground truth")?;
        let present = cm.present_classes();
        let exact = present.iter().fold(Ratio::from_integer(0u64), |acc, &c| {
            let (i, u) = cm.intersection_union(c);
            acc + Ratio::new(i, u)
        }) / present.len() as u64;
        ensure(exact == oracle, format!("map {k}: {exact} vs {oracle}"))?;
        let float = *oracle.numer() as f64 / *oracle.denom() as f64;
        let diff = (cm.miou().ok_or("no mIoU")? - float).abs();
        ensure(diff <= 1e-12, format!("map {k}: float mIoU off by {diff:.2e}"))?;
        worst = worst.max(diff);
    }
    Ok(format!("20 maps exact in rationals, float error at most {worst:.1e}"))
}

fn overfit() -> Check {
    let seed = fixture::train_config().seed;
    let a = support::overfit_fixture(seed);
    ensure(a.accuracy >= 0.95, format!("pixel accuracy {:.4} after 300 steps", a.accuracy))?;
    let b = support::overfit_fixture(seed);
    ensure(a.log == b.log, "two runs with the same seed logged different losses")?;
    ensure(a.seconds < 300.0, format!("one run took {:.0}s", a.seconds))?;
    Ok(format!(
        "pixel accuracy {:.4} after 300 steps, identical logs across two runs, {:.0}s per run",
        a.accuracy, a.seconds
    ))
}

fn round_trips() -> Check {
    let mut rng = seeded(61);
    let cases = 100;
    for k in 0..cases {
        let m = rng.gen_range(2..7);
        let (h, w, c) = (m * rng.gen_range(1..4), m * rng.gen_range(1..4), rng.gen_range(1..6));
        let x: Tensor<f32> = support::rand_tensor(&mut rng, &[h, w, c], 1e4);
        let back = window_reverse(&window_partition(&x, m).unwrap(), m, h, w).unwrap();
        ensure(back == x, format!("partition case {k}"))?;
        let s = rng.gen_range(-(2 * h as isize)..2 * h as isize);
        ensure(cyclic_shift(&cyclic_shift(&x, s).unwrap(), -s).unwrap() == x, format!("shift case {k}, s = {s}"))?;
    }
    let palette = Palette::default();
    for k in 0..cases {
        let (w, h) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let g = GridSpec::new(0.0, 0.0, 0.5, w, h).unwrap();
        let data = (0..w * h).map(|_| match rng.gen_range(0..7u8) { 6 => NODATA, v => v }).collect();
        let labels = LabelRaster::from_data(g, data).unwrap();
        let back = palette.decolorize(&palette.colorize(&labels)).map_err(|e| e.to_string())?;
        ensure(back == labels, format!("colorize case {k}"))?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for k in 0..cases {
        let side = rng.gen_range(2..20);
        let tiles: Vec<TileRecord> = (0..rng.gen_range(1..4))
            .map(|i| {
                let g = GridSpec::new(0.0, 0.0, 0.5, side, side).unwrap();
                let labels = (0..side * side).map(|_| match rng.gen_range(0..7u8) { 6 => NODATA, v => v }).collect();
                let image = (0..side * side * 3).map(|_| rng.gen()).collect();
                TileRecord::new(format!("{k}_{i}"), RgbRaster::from_data(g, image).unwrap(), LabelRaster::from_data(g, labels).unwrap())
                    .unwrap()
            })
            .collect();
        let root = dir.path().join(k.to_string());
        write_dataset(&tiles, SplitSpec::new(0.5, k as u64), &root, WeightVector::ign()).map_err(|e| e.to_string())?;
        let ds = Dataset::open(&root).map_err(|e| e.to_string())?;
        let mut read: Vec<TileRecord> = Split::ALL.iter().flat_map(|&s| ds.load_split(s).unwrap()).collect();
        read.sort_by(|a, b| a.tile_id.cmp(&b.tile_id));
        ensure(read.len() == tiles.len(), format!("dataset case {k}: tile count"))?;
        for (r, t) in read.iter().zip(&tiles) {
            ensure(
                r.tile_id == t.tile_id && r.labels.data == t.labels.data && r.image.data == t.image.data,
                format!("dataset case {k}: tile {} differs", t.tile_id),
            )?;
        }
    }
    Ok(format!("{cases} cases each of partition/reverse, shift(±s), colorize/decolorize, dataset write/read"))
}

fn end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let steps = fixture::train_config().max_steps;
    let diff = support::end_to_end(dir.path(), steps)?;
    ensure(diff.is_empty(), format!("dataset layout differs: {}", diff.join(" ")))?;
    Ok(format!(
        "all stages exit 0 ({steps} training steps); dataset layout matches the expected {} files",
        support::EXPECTED_DATASET.lines().count()
    ))
}

fn main() -> ExitCode {
    report(
        Status::NotApplicable,
        "full-scale mIoU 54.22",
        "not reproducible here (needs the pretrained Swin-L checkpoint, the 600-tile IGN dataset and GPU training); \
         covered by the substitute criteria below",
        0.0,
    );
    let results = [
        run("shifted-window equivalence", Some(5.0), shifted_window_equivalence),
        run("gradient check (tiny)", Some(180.0), gradient_check_tiny),
        run("rasterization oracle", Some(10.0), rasterization_oracle),
        run("tile filter boundary", None, tile_filter_boundary),
        run("class weights", None, weights),
        run("loss analytics", None, loss_analytics),
        run("metric oracle", None, metric_oracle),
        run("overfit smoke test", None, overfit),
        run("round trips", None, round_trips),
        run("end to end", None, end_to_end),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
