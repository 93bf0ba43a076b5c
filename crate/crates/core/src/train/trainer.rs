use std::fmt::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    images_to_tensor, poly_lr, sliding_infer, weighted_cross_entropy, AdamW, ConfusionMatrix, CropFlip, LogitModel,
    TrainConfig, TrainError,
};
use crate::raster::{LabelRaster, RgbRaster};
use crate::swin::{SwinConfig, SwinSegmenter};
use crate::tiler::{Dataset, Split, TileRecord};

/// Crops drawn for one sample are rejected while they contain no labelled pixel.
const MAX_CROP_REDRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SwinSegmenter<f32>,
    pub log: Vec<LossRecord>,
}

/// `step<TAB>lr<TAB>loss` lines.
pub fn format_log(log: &[LossRecord]) -> String {
    let mut s = String::new();
    for r in log {
        let _ = writeln!(s, "{}\t{:e}\t{:.6}", r.step, r.lr, r.loss);
    }
    s
}

/// Trains on the training split of a dataset written by the tiler.
pub fn train(root: &Path, tcfg: &TrainConfig, scfg: &SwinConfig) -> Result<TrainOutcome, TrainError> {
    let ds = Dataset::open(root)?;
    let tiles = ds.load_split(Split::Training)?;
    train_on_tiles(&tiles, tcfg, scfg, |_| {})
}

/// Visits tiles in a fresh random order each epoch.
struct TileSampler {
    order: Vec<usize>,
    next: usize,
}

impl TileSampler {
    fn new(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            next: n,
        }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> usize {
        if self.next == self.order.len() {
            self.order.shuffle(rng);
            self.next = 0;
        }
        self.next += 1;
        self.order[self.next - 1]
    }
}

fn draw_sample(
    rng: &mut ChaCha8Rng,
    sampler: &mut TileSampler,
    tiles: &[TileRecord],
    crop: usize,
    ignore: u8,
) -> Result<(RgbRaster, LabelRaster), TrainError> {
    let mut last = None;
    for _ in 0..MAX_CROP_REDRAWS {
        let t = &tiles[sampler.draw(rng)];
        let d = CropFlip::draw(rng, t.labels.grid.width, t.labels.grid.height, crop)?;
        let (img, lab) = d.apply(&t.image, &t.labels, crop);
        if lab.data.iter().any(|&v| v != ignore) {
            return Ok((img, lab));
        }
        last = Some((img, lab));
    }
    Ok(last.expect("at least one draw"))
}

/// Runs `max_steps` optimizer steps from a seeded initialization.
///
/// Tiles are visited in shuffled epochs. Every random choice
/// (initialization, tile order, crop position, flips)
/// comes from `tcfg.seed`, so two runs produce identical logs and weights.
/// `on_step` sees each record as it is produced.
pub fn train_on_tiles(
    tiles: &[TileRecord],
    tcfg: &TrainConfig,
    scfg: &SwinConfig,
    mut on_step: impl FnMut(&LossRecord),
) -> Result<TrainOutcome, TrainError> {
    tcfg.validate()?;
    if tiles.is_empty() {
        return Err(TrainError::Empty("training split has no tiles".into()));
    }
    let mut model = SwinSegmenter::<f32>::init(scfg.clone(), tcfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed ^ 0x5EED_DA7A);
    let mut sampler = TileSampler::new(tiles.len());
    let mut opt = AdamW::new(tcfg.weight_decay);
    let mut log = Vec::with_capacity(tcfg.max_steps);
    for step in 0..tcfg.max_steps {
        let mut images = Vec::with_capacity(tcfg.batch_size);
        let mut labels = Vec::with_capacity(tcfg.batch_size * tcfg.crop_size * tcfg.crop_size);
        for _ in 0..tcfg.batch_size {
            let (img, lab) = draw_sample(&mut rng, &mut sampler, tiles, tcfg.crop_size, tcfg.ignore_index)?;
            images.push(img);
            labels.extend_from_slice(&lab.data);
        }
        let batch = images_to_tensor(&images.iter().collect::<Vec<_>>());
        let pass = model.record(&batch).map_err(|e| match e {
            crate::swin::ModelError::NonFinite(_) => TrainError::NonFinite { step },
            e => e.into(),
        })?;
        let logits = pass.logits().expect("recorded forward");
        let (loss, dlogits) = match weighted_cross_entropy(logits, &labels, &tcfg.weights, tcfg.ignore_index) {
            Err(TrainError::AllIgnored) => continue,
            r => r?,
        };
        if !loss.is_finite() {
            return Err(TrainError::NonFinite { step });
        }
        let grads = pass.backward(&dlogits)?;
        let lr = poly_lr(step, tcfg.max_steps, tcfg.base_lr, tcfg.poly_power);
        opt.step(model.params_mut(), &grads, lr);
        if !model.params().all_finite() {
            return Err(TrainError::NonFinite { step });
        }
        let rec = LossRecord { step, lr, loss };
        on_step(&rec);
        log.push(rec);
    }
    Ok(TrainOutcome { model, log })
}

/// Sliding-window predictions of every tile, scored against its labels.
pub fn evaluate_tiles<M: LogitModel + Sync + ?Sized>(
    model: &M,
    tiles: &[TileRecord],
    window: usize,
    stride: usize,
    ignore: u8,
) -> Result<(ConfusionMatrix, Vec<LabelRaster>), TrainError> {
    if tiles.is_empty() {
        return Err(TrainError::Empty("no tiles to evaluate".into()));
    }
    let preds: Vec<LabelRaster> = tiles
        .par_iter()
        .map(|t| sliding_infer(model, &t.image, window, stride))
        .collect::<Result<_, _>>()?;
    let mut cm = ConfusionMatrix::default();
    for (t, p) in tiles.iter().zip(&preds) {
        cm.add(&t.labels.data, &p.data, ignore)?;
    }
    Ok((cm, preds))
}

/// Scores one split of a dataset on disk.
pub fn evaluate<M: LogitModel + Sync + ?Sized>(
    model: &M,
    dataset: &Dataset,
    split: Split,
    window: usize,
    stride: usize,
    ignore: u8,
) -> Result<ConfusionMatrix, TrainError> {
    let tiles = dataset.load_split(split)?;
    if tiles.is_empty() {
        return Err(TrainError::Empty(format!("{} split has no tiles", split.dir_name())));
    }
    Ok(evaluate_tiles(model, &tiles, window, stride, ignore)?.0)
}
