//! Independent oracles shared by the integration tests and the acceptance
//! harness.
#![allow(dead_code)]

use landseg::classes::{ClassId, NUM_CLASSES};
use landseg::geovec::{ClassedFeature, Feature, Geometry};
use landseg::swin::ModelParams;
use landseg::tensor::Tensor;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- rasterization

/// Vertex coordinates in pixel space are multiples of `1 / LATTICE`.
pub const LATTICE: i64 = 512;

/// A convex polygon in integer lattice units of pixel space, counter-clockwise
/// in (col, row) and not closed.
pub type LatticePoly = Vec<(i64, i64)>;

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain; collinear points are dropped.
pub fn convex_hull(mut pts: Vec<(i64, i64)>) -> LatticePoly {
    pts.sort();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Random convex polygon spilling a little past a `size`×`size` grid. Half
/// of the draws snap vertices to quarter pixels so that many pixel centers
/// land exactly on edges and vertices.
pub fn random_convex(rng: &mut ChaCha8Rng, size: i64) -> LatticePoly {
    loop {
        let coarse = rng.gen_bool(0.5);
        let step = if coarse { LATTICE / 4 } else { 1 };
        let n = rng.gen_range(3..=9);
        let lo = -8 * LATTICE / step;
        let hi = (size + 8) * LATTICE / step;
        let pts = (0..n)
            .map(|_| (rng.gen_range(lo..=hi) * step, rng.gen_range(lo..=hi) * step))
            .collect();
        let hull = convex_hull(pts);
        if hull.len() >= 3 {
            return hull;
        }
    }
}

/// Parity of edge crossings at or left of the pixel center, with each edge
/// spanning rows `[y_min, y_max)`. Exact integer arithmetic.
pub fn center_inside(poly: &[(i64, i64)], row: usize, col: usize) -> bool {
    let half = LATTICE / 2;
    let (xc, yc) = (col as i64 * LATTICE + half, row as i64 * LATTICE + half);
    let mut inside = false;
    for k in 0..poly.len() {
        let (mut a, mut b) = (poly[k], poly[(k + 1) % poly.len()]);
        if a.1 == b.1 {
            continue;
        }
        if a.1 > b.1 {
            std::mem::swap(&mut a, &mut b);
        }
        if !(a.1 <= yc && yc < b.1) {
            continue;
        }
        // crossing x <= xc  <=>  (a.x - xc)(b.y - a.y) + (yc - a.y)(b.x - a.x) <= 0
        let lhs = (a.0 - xc) as i128 * (b.1 - a.1) as i128 + (yc - a.1) as i128 * (b.0 - a.0) as i128;
        if lhs <= 0 {
            inside = !inside;
        }
    }
    inside
}

/// World-coordinate polygon for a grid with the given origin and pixel size.
pub fn lattice_to_world(poly: &[(i64, i64)], origin: (f64, f64), pixel: f64) -> Geometry {
    let mut ring: Vec<[f64; 2]> = poly
        .iter()
        .map(|&(x, y)| {
            [
                origin.0 + x as f64 / LATTICE as f64 * pixel,
                origin.1 - y as f64 / LATTICE as f64 * pixel,
            ]
        })
        .collect();
    ring.push(ring[0]);
    Geometry::Polygon(vec![ring])
}

pub fn classed(geometry: Geometry, class: ClassId) -> ClassedFeature {
    ClassedFeature {
        feature: Feature {
            geometry,
            source_class: format!("class {}", class.value()),
            attributes: Default::default(),
        },
        class,
    }
}

/// Twice the signed area in lattice units squared.
pub fn area2(poly: &[(i64, i64)]) -> i64 {
    (0..poly.len())
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<i64>()
        .abs()
}

// ---------------------------------------------------------------- metrics

/// mIoU by explicit pixel sets, in exact rational arithmetic. Classes absent
/// from the ground truth are skipped.
pub fn miou_by_sets(truth: &[u8], pred: &[u8], ignore: u8) -> Option<Ratio<u64>> {
    let scored: Vec<usize> = (0..truth.len()).filter(|&p| truth[p] != ignore).collect();
    let mut sum = Ratio::from_integer(0u64);
    let mut present = 0u64;
    for c in 0..NUM_CLASSES as u8 {
        let g: std::collections::BTreeSet<usize> = scored.iter().copied().filter(|&p| truth[p] == c).collect();
        if g.is_empty() {
            continue;
        }
        let p: std::collections::BTreeSet<usize> = scored.iter().copied().filter(|&q| pred[q] == c).collect();
        let inter = g.intersection(&p).count() as u64;
        let union = g.union(&p).count() as u64;
        sum += Ratio::new(inter, union);
        present += 1;
    }
    (present > 0).then(|| sum / present)
}

/// Random label maps where each class may be missing, plus ignored pixels.
pub fn random_label_pair(rng: &mut ChaCha8Rng, len: usize, ignore: u8) -> (Vec<u8>, Vec<u8>) {
    let allowed: Vec<u8> = (0..NUM_CLASSES as u8).filter(|_| rng.gen_bool(0.7)).collect();
    let allowed = if allowed.is_empty() { vec![0] } else { allowed };
    let pick = |rng: &mut ChaCha8Rng| allowed[rng.gen_range(0..allowed.len())];
    let truth = (0..len).map(|_| if rng.gen_bool(0.1) { ignore } else { pick(rng) }).collect();
    let pred = (0..len)
        .map(|_| if rng.gen_bool(0.2) { rng.gen_range(0..NUM_CLASSES as u8) } else { pick(rng) })
        .collect();
    (truth, pred)
}

// ---------------------------------------------------------------- attention

pub fn rand_tensor<T: landseg::tensor::Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::from_f64(rng.gen_range(-scale..scale)))
}

/// Random `qkv`, `proj` and bias-table parameters under `prefix`.
pub fn attention_params<T: landseg::tensor::Scalar>(
    rng: &mut ChaCha8Rng,
    prefix: &str,
    c: usize,
    heads: usize,
    m: usize,
) -> ModelParams<T> {
    let mut p = ModelParams::new();
    p.insert(format!("{prefix}.qkv.weight"), rand_tensor(rng, &[c, 3 * c], 0.6));
    p.insert(format!("{prefix}.qkv.bias"), rand_tensor(rng, &[3 * c], 0.3));
    p.insert(format!("{prefix}.proj.weight"), rand_tensor(rng, &[c, c], 0.6));
    p.insert(format!("{prefix}.proj.bias"), rand_tensor(rng, &[c], 0.3));
    let span = 2 * m - 1;
    p.insert(format!("{prefix}.relative_position_bias_table"), rand_tensor(rng, &[span * span, heads], 1.0));
    p
}

/// Reference attention of an `h×w×c` map rolled by `s`, evaluated token by
/// token. Token `t` (shifted-frame position) attends to the tokens of its
/// window whose original positions are within `m` of its own on both axes
/// without crossing the wrap-around seam, i.e. tokens that were contiguous
/// before the roll.
///
/// Holds outputs in the shifted frame, one row per token, and the weight of
/// every (head, query, key) triple of a window keyed by shifted-frame
/// positions; weights across regions are exactly zero.
pub struct RegionAttention {
    pub out: Vec<Vec<f64>>,
    pub weight: std::collections::HashMap<(usize, usize, usize), f64>,
}

pub fn region_attention(
    params: &ModelParams<f64>,
    prefix: &str,
    x: &Tensor<f64>,
    heads: usize,
    m: usize,
    s: usize,
) -> RegionAttention {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let d = c / heads;
    let get = |n: &str| params.get(&format!("{prefix}.{n}")).unwrap();
    let (wq, bq, wp, bp, table) = (
        get("qkv.weight"),
        get("qkv.bias"),
        get("proj.weight"),
        get("proj.bias"),
        get("relative_position_bias_table"),
    );
    let orig = |t: usize| (((t / w) + s) % h, ((t % w) + s) % w);
    let token = |t: usize| {
        let (r, col) = orig(t);
        (0..c).map(|k| x.get(&[r, col, k])).collect::<Vec<f64>>()
    };
    let qkv: Vec<Vec<f64>> = (0..h * w)
        .map(|t| {
            let v = token(t);
            (0..3 * c)
                .map(|o| bq.data()[o] + (0..c).map(|i| v[i] * wq.get(&[i, o])).sum::<f64>())
                .collect()
        })
        .collect();
    let same_window = |a: usize, b: usize| (a / w) / m == (b / w) / m && (a % w) / m == (b % w) / m;
    let contiguous = |a: usize, b: usize| {
        let ((ra, ca), (rb, cb)) = (orig(a), orig(b));
        ra.abs_diff(rb) < m && ca.abs_diff(cb) < m
    };
    let span = 2 * m - 1;
    let mut out = Vec::with_capacity(h * w);
    let mut weight = std::collections::HashMap::new();
    for i in 0..h * w {
        let keys: Vec<usize> = (0..h * w).filter(|&j| same_window(i, j)).collect();
        let mut ctx = vec![0.0; c];
        for hh in 0..heads {
            let logits: Vec<Option<f64>> = keys
                .iter()
                .map(|&j| {
                    contiguous(i, j).then(|| {
                        let dot: f64 = (0..d).map(|k| qkv[i][hh * d + k] * qkv[j][c + hh * d + k]).sum();
                        let dr = (i / w) % m + m - 1 - (j / w) % m;
                        let dc = (i % w) % m + m - 1 - (j % w) % m;
                        dot / (d as f64).sqrt() + table.get(&[dr * span + dc, hh])
                    })
                })
                .collect();
            let mx = logits.iter().flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let z: f64 = logits.iter().flatten().map(|l| (l - mx).exp()).sum();
            for (&j, l) in keys.iter().zip(&logits) {
                let a = l.map_or(0.0, |l| (l - mx).exp() / z);
                weight.insert((hh, i, j), a);
                for k in 0..d {
                    ctx[hh * d + k] += a * qkv[j][2 * c + hh * d + k];
                }
            }
        }
        out.push((0..c).map(|o| bp.data()[o] + (0..c).map(|k| ctx[k] * wp.get(&[k, o])).sum::<f64>()).collect());
    }
    RegionAttention { out, weight }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Worst deviations of the library's masked shifted attention from
/// [`region_attention`].
#[derive(Debug, Clone, Copy)]
pub struct Equivalence {
    pub out_diff: f64,
    pub weight_diff: f64,
    pub cross_region_max: f64,
}

/// Rolls a random `size×size×c` map by `m/2`, partitions it, runs masked
/// window attention in precision `T` and compares against the per-region
/// oracle evaluated in f64.
pub fn shifted_attention_check<T: landseg::tensor::Scalar>(
    seed: u64,
    size: usize,
    c: usize,
    heads: usize,
    m: usize,
) -> Equivalence {
    use landseg::autodiff::Tape;
    use landseg::swin::{cyclic_shift, shift_attention_mask, window_attention, window_partition, window_reverse};

    let s = m / 2;
    let mut rng = seeded(seed);
    let params64 = attention_params::<f64>(&mut rng, "attn", c, heads, m);
    let x64: Tensor<f64> = rand_tensor(&mut rng, &[size, size, c], 1.0);
    let oracle = region_attention(&params64, "attn", &x64, heads, m, s);

    let params: ModelParams<T> = params64.cast();
    let windows = window_partition(&cyclic_shift(&x64.cast::<T>(), s as isize).unwrap(), m).unwrap();
    let mask = shift_attention_mask::<T>(size, size, m, s).unwrap();
    let mut tape = Tape::new();
    let xw = tape.constant(windows);
    let attn = window_attention(&mut tape, &params, "attn", xw, heads, m, Some(&mask)).unwrap();
    let out = window_reverse(tape.value(attn.out), m, size, size).unwrap();
    let probs = tape.value(attn.probs);

    let mut out_diff = 0.0f64;
    for t in 0..size * size {
        for k in 0..c {
            out_diff = out_diff.max((out.get(&[t / size, t % size, k]).to_f64() - oracle.out[t][k]).abs());
        }
    }
    let (mut weight_diff, mut cross_region_max) = (0.0f64, 0.0f64);
    let per_row = size / m;
    let n = m * m;
    for win in 0..per_row * per_row {
        let pos = |tok: usize| ((win / per_row) * m + tok / m) * size + (win % per_row) * m + tok % m;
        for h in 0..heads {
            for qi in 0..n {
                for kj in 0..n {
                    let got = probs.get(&[win, h, qi, kj]).to_f64();
                    let want = oracle.weight[&(h, pos(qi), pos(kj))];
                    weight_diff = weight_diff.max((got - want).abs());
                    if want == 0.0 {
                        cross_region_max = cross_region_max.max(got.abs());
                    }
                }
            }
        }
    }
    Equivalence { out_diff, weight_diff, cross_region_max }
}

// ---------------------------------------------------------------- training

/// Result of the fixture overfit run.
pub struct Overfit {
    pub accuracy: f64,
    /// Steps where the 20-step moving average of the loss went up.
    pub rises: usize,
    pub log: String,
    pub seconds: f64,
}

pub fn overfit_fixture(seed: u64) -> Overfit {
    use landseg::fixture::{self, Fixture};
    use landseg::train::{evaluate_tiles, format_log, train_on_tiles, TrainConfig};

    let t0 = std::time::Instant::now();
    let tiles = Fixture::generate(0).unwrap().training_tiles();
    let tcfg = TrainConfig { seed, ..fixture::train_config() };
    let out = train_on_tiles(&tiles, &tcfg, &fixture::model_config(), |_| {}).unwrap();
    let avg: Vec<f64> = out.log.windows(20).map(|w| w.iter().map(|r| r.loss).sum::<f64>() / 20.0).collect();
    let rises = avg.windows(2).filter(|p| p[1] > p[0]).count();
    let (cm, _) = evaluate_tiles(&out.model, &tiles, fixture::FIXTURE_TILE_PX, fixture::FIXTURE_TILE_PX / 2, 255).unwrap();
    Overfit {
        accuracy: cm.pixel_accuracy().unwrap(),
        rises,
        log: format_log(&out.log),
        seconds: t0.elapsed().as_secs_f64(),
    }
}

// ---------------------------------------------------------------- command line

pub fn landseg(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_landseg"))
        .args(args)
        .output()
        .expect("spawn landseg")
}

/// Files under `root`, relative and sorted.
pub fn tree(root: &std::path::Path) -> Vec<String> {
    fn walk(base: &std::path::Path, dir: &std::path::Path, out: &mut Vec<String>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.push(p.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

pub const EXPECTED_DATASET: &str = include_str!("../data/fixture_dataset.txt");

/// Lines present in only one of the two listings, prefixed `-` (expected
/// only) or `+` (found only).
pub fn listing_diff(expected: &str, found: &[String]) -> Vec<String> {
    let exp: Vec<&str> = expected.lines().filter(|l| !l.is_empty()).collect();
    let mut d: Vec<String> = exp.iter().filter(|l| !found.iter().any(|f| f == *l)).map(|l| format!("-{l}")).collect();
    d.extend(found.iter().filter(|f| !exp.contains(&f.as_str())).map(|f| format!("+{f}")));
    d
}

/// Runs `fixture → prepare → stats → train → eval → infer → colorize` in
/// `dir`. Returns the first failing stage with its stderr, or the dataset
/// layout diff (empty on success).
pub fn end_to_end(dir: &std::path::Path, steps: usize) -> Result<Vec<String>, String> {
    let d = dir.to_str().unwrap();
    let cfg = format!("{d}/landseg.toml");
    let steps = steps.to_string();
    let pred = format!("{d}/output/prediction.png");
    let color = format!("{d}/output/prediction_rgb.png");
    let stages: Vec<(&str, Vec<&str>)> = vec![
        ("fixture", vec!["fixture", "--out", d]),
        ("prepare", vec!["prepare", "-c", &cfg]),
        ("stats", vec!["stats", "-c", &cfg]),
        ("train", vec!["train", "-c", &cfg, "--steps", &steps]),
        ("eval", vec!["eval", "-c", &cfg]),
        ("infer", vec!["infer", "-c", &cfg, "--output", &pred]),
        ("colorize", vec!["colorize", "-c", &cfg, "--input", &pred, "--output", &color]),
    ];
    for (name, args) in stages {
        let o = landseg(&args);
        if !o.status.success() {
            return Err(format!("{name} exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr).trim()));
        }
    }
    for f in ["model.swseg", "output/train_log.tsv", "output/eval_validation.txt", "output/confusion_validation.csv", "output/prediction.png", "output/prediction_rgb.png"] {
        if !dir.join(f).is_file() {
            return Err(format!("missing {f}"));
        }
    }
    Ok(listing_diff(EXPECTED_DATASET, &tree(&dir.join("dataset"))))
}
