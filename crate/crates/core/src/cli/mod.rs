//! The `landseg` command line: one subcommand per pipeline stage, driven by a
//! TOML [`PipelineConfig`]. Flags override values from the file.

mod config;
mod palette;

pub use config::{GridConfig, InferConfig, Paths, PipelineConfig, TilingConfig, VectorConfig};
pub use palette::{Palette, PaletteError};

use std::error::Error as StdError;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classes::{CLASS_NAMES, NODATA, NUM_CLASSES};
use crate::fixture::{self, Fixture};
use crate::geovec::{apply_class_map, parse_feature_collection, rasterize, ClassMap, DEFAULT_PRIORITY};
use crate::raster::{LabelRaster, RgbRaster};
use crate::swin::{checkpoint, ModelError};
use crate::tiler::{
    class_stats, compute_weights, cut_tiles, filter_tiles, write_dataset, Dataset, Manifest, Split, WeightVector,
    MANIFEST_FILE,
};
use crate::train::{evaluate_tiles, format_log, sliding_infer, train_on_tiles, ConfusionMatrix, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

/// A failed subcommand: the stage that failed and a one-line reason.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(stage: &'static str, kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { stage, kind, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numeric => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

/// The error and its sources on a single line.
fn one_line(e: &dyn StdError) -> String {
    let mut s = e.to_string();
    let mut src = e.source();
    while let Some(inner) = src {
        let m = inner.to_string();
        if !s.contains(&m) {
            s.push_str(": ");
            s.push_str(&m);
        }
        src = inner.source();
    }
    s.replace('\n', " ")
}

fn is_numeric(e: &TrainError) -> bool {
    matches!(e, TrainError::NonFinite { .. } | TrainError::Model(ModelError::NonFinite(_)))
}

fn data<E: StdError>(stage: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::new(stage, ErrorKind::Data, one_line(&e))
}

fn model<E: StdError + Into<TrainError>>(stage: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| {
        let e: TrainError = e.into();
        let kind = if is_numeric(&e) { ErrorKind::Numeric } else { ErrorKind::Data };
        CliError::new(stage, kind, one_line(&e))
    }
}

fn io(stage: &'static str, path: &Path) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.to_path_buf();
    move |e| CliError::new(stage, ErrorKind::Data, format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "landseg", version, about = "Land-cover dataset builder and segmenter")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// TOML pipeline config; built-in defaults when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize vector layers, cut tiles, filter and write the dataset.
    Prepare {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        tile_px: Option<usize>,
        #[arg(long)]
        max_nodata: Option<f64>,
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Class histogram of the training split and the resulting weights.
    Stats {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Weight scheme, overriding `tiling.weight_scheme`.
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Train a model on the training split and write a checkpoint.
    Train {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Per-class IoU and mIoU of a split.
    Eval {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "validation")]
        split: Split,
        /// Score label PNGs named `<tile id>.png` in this directory instead of
        /// running the model.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Write the model's predictions here.
        #[arg(long)]
        save_predictions: Option<PathBuf>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Segment an RGB raster with sliding windows.
    Infer {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Defaults to `paths.ortho`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Defaults to `<output>/prediction.png`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Map a label PNG to palette colors, or back with `--reverse`.
    Colorize {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        reverse: bool,
    },
    /// Write the synthetic demo scene and a matching config into a directory.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(arg: &ConfigArg) -> Result<PipelineConfig, CliError> {
    let usage = |e: String| CliError::new("config", ErrorKind::Usage, e);
    match &arg.config {
        Some(p) if !p.exists() => Err(usage(format!("{}: no such file", p.display()))),
        Some(p) => PipelineConfig::load(p).map_err(usage),
        None => Ok(PipelineConfig::default()),
    }
}

fn revalidate(cfg: PipelineConfig) -> Result<PipelineConfig, CliError> {
    cfg.validate().map_err(|e| CliError::new("config", ErrorKind::Usage, e))?;
    Ok(cfg)
}

fn override_with<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn create_parent(stage: &'static str, path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => fs::create_dir_all(d).map_err(io(stage, d)),
        _ => Ok(()),
    }
}

/// Parses arguments (without the program name) and runs the subcommand.
/// Output goes to `out`.
pub fn run_with<I, S>(args: I, out: &mut dyn std::io::Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(std::iter::once("landseg".into()).chain(args.into_iter().map(Into::into)))
        .map_err(|e| CliError::new("usage", ErrorKind::Usage, e.to_string().lines().next().unwrap_or("").to_string()))?;
    run(cli, out)
}

pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mut w = |s: String| {
        let _ = out.write_all(s.as_bytes());
    };
    match cli.command {
        Command::Prepare { cfg, dataset, tile_px, max_nodata, train_fraction } => {
            let mut c = load_config(&cfg)?;
            override_with(&mut c.paths.dataset, dataset);
            override_with(&mut c.tiling.tile_px, tile_px);
            override_with(&mut c.tiling.max_nodata, max_nodata);
            override_with(&mut c.tiling.train_fraction, train_fraction);
            w(cmd_prepare(&revalidate(c)?)?);
        }
        Command::Stats { cfg, dataset, scheme } => {
            let mut c = load_config(&cfg)?;
            override_with(&mut c.paths.dataset, dataset);
            override_with(&mut c.tiling.weight_scheme, scheme);
            w(cmd_stats(&revalidate(c)?)?);
        }
        Command::Train { cfg, dataset, checkpoint, steps, seed, lr, batch_size } => {
            let mut c = load_config(&cfg)?;
            override_with(&mut c.paths.dataset, dataset);
            override_with(&mut c.paths.checkpoint, checkpoint);
            override_with(&mut c.train.max_steps, steps);
            override_with(&mut c.train.seed, seed);
            override_with(&mut c.train.base_lr, lr);
            override_with(&mut c.train.batch_size, batch_size);
            w(cmd_train(&revalidate(c)?, &mut |s| eprintln!("{s}"))?);
        }
        Command::Eval { cfg, dataset, checkpoint, split, predictions, save_predictions, window, stride } => {
            let mut c = load_config(&cfg)?;
            override_with(&mut c.paths.dataset, dataset);
            override_with(&mut c.paths.checkpoint, checkpoint);
            c.infer.window = window.or(c.infer.window);
            c.infer.stride = stride.or(c.infer.stride);
            w(cmd_eval(&revalidate(c)?, split, predictions.as_deref(), save_predictions.as_deref())?);
        }
        Command::Infer { cfg, checkpoint, input, output, window, stride } => {
            let mut c = load_config(&cfg)?;
            override_with(&mut c.paths.checkpoint, checkpoint);
            c.infer.window = window.or(c.infer.window);
            c.infer.stride = stride.or(c.infer.stride);
            let c = revalidate(c)?;
            let input = input.unwrap_or_else(|| c.paths.ortho.clone());
            let output = output.unwrap_or_else(|| c.paths.output.join("prediction.png"));
            w(cmd_infer(&c, &input, &output)?);
        }
        Command::Colorize { cfg, input, output, reverse } => {
            let c = load_config(&cfg)?;
            w(cmd_colorize(&c, &input, &output, reverse)?);
        }
        Command::Fixture { out, seed } => w(cmd_fixture(&out, seed)?),
    }
    Ok(())
}

fn load_class_map(c: &PipelineConfig) -> Result<ClassMap, CliError> {
    let policy = c.unknown_policy().map_err(|e| CliError::new("config", ErrorKind::Usage, e))?;
    let mut map = match &c.paths.class_map {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io("class-map", p))?;
            ClassMap::parse(&text, policy).map_err(data("class-map"))?
        }
        None => ClassMap::illustrative_default(),
    };
    map.unknown = policy;
    Ok(map)
}

pub fn cmd_prepare(c: &PipelineConfig) -> Result<String, CliError> {
    if c.paths.layers.is_empty() {
        return Err(CliError::new("config", ErrorKind::Usage, "paths.layers lists no vector layers"));
    }
    let opts = c.parse_options();
    let mut features = Vec::new();
    for p in &c.paths.layers {
        let bytes = fs::read(p).map_err(io("parse", p))?;
        let fc = parse_feature_collection(&bytes, &opts)
            .map_err(|e| CliError::new("parse", ErrorKind::Data, format!("{}: {}", p.display(), one_line(&e))))?;
        features.extend(fc);
    }
    let map = load_class_map(c)?;
    let classed = apply_class_map(&features, &map).map_err(data("class-map"))?;
    let ortho = RgbRaster::load_png(&c.paths.ortho, c.grid_fallback()).map_err(data("ortho"))?;
    let labels = rasterize(&classed, &ortho.grid, &DEFAULT_PRIORITY).map_err(data("rasterize"))?;

    let all = cut_tiles(&ortho, &labels, c.tiling.tile_px).map_err(data("tile"))?;
    let n_all = all.len();
    let dropped: Vec<String> = all
        .iter()
        .filter(|t| t.nodata_fraction > c.tiling.max_nodata)
        .map(|t| format!("{} ({:.1}% nodata)", t.tile_id, 100.0 * t.nodata_fraction))
        .collect();
    let tiles = filter_tiles(all, c.tiling.max_nodata);
    if tiles.is_empty() {
        return Err(CliError::new("filter", ErrorKind::Data, format!("all {n_all} tiles exceed the nodata limit")));
    }

    let split = c.split_spec();
    let scheme = c.weight_scheme().map_err(|e| CliError::new("config", ErrorKind::Usage, e))?;
    let training: Vec<_> = tiles
        .iter()
        .zip(split.assign(tiles.len()))
        .filter(|(_, s)| *s == Split::Training)
        .map(|(t, _)| t.clone())
        .collect();
    let weights = match scheme {
        crate::tiler::WeightScheme::Manual(v) => WeightVector::new(v),
        s => class_stats(&training).and_then(|h| compute_weights(&h, s)),
    }
    .map_err(data("weights"))?;

    let root = &c.paths.dataset;
    for sub in ["images", "annotations"] {
        let d = root.join(sub);
        if d.exists() {
            fs::remove_dir_all(&d).map_err(io("write", &d))?;
        }
    }
    let manifest = write_dataset(&tiles, split, root, weights).map_err(data("write"))?;
    fs::create_dir_all(&c.paths.output).map_err(io("write", &c.paths.output))?;
    labels
        .save_georeferenced(&c.paths.output.join("labels.png"))
        .map_err(data("write"))?;

    let n_train = manifest.ids(Split::Training).count();
    let mut s = format!(
        "rasterized {} features onto {}x{} px\nkept {} of {n_all} tiles ({n_train} training, {} validation), dropped {}\n",
        classed.len(),
        labels.grid.width,
        labels.grid.height,
        tiles.len(),
        tiles.len() - n_train,
        dropped.len(),
    );
    for d in dropped {
        s.push_str(&format!("  dropped {d}\n"));
    }
    s.push_str(&format!("weights {weights}\nwrote {}\n", root.join(MANIFEST_FILE).display()));
    Ok(s)
}

pub fn cmd_stats(c: &PipelineConfig) -> Result<String, CliError> {
    let ds = Dataset::open(&c.paths.dataset).map_err(data("dataset"))?;
    let tiles = ds.load_split(Split::Training).map_err(data("dataset"))?;
    let hist = class_stats(&tiles).map_err(data("stats"))?;
    let scheme = c.weight_scheme().map_err(|e| CliError::new("config", ErrorKind::Usage, e))?;
    let weights = compute_weights(&hist, scheme).map_err(data("weights"))?;
    let freq = hist.frequencies();
    let mut s = format!("{} training tiles, {} labelled pixels\nclass\tpixels\tfrequency\tweight\n", tiles.len(), hist.total());
    for k in 0..NUM_CLASSES {
        s.push_str(&format!("{}\t{}\t{:.6}\t{}\n", CLASS_NAMES[k], hist.counts[k], freq[k], weights.get(k)));
    }
    s.push_str(&format!("weights\t{weights}\n"));
    Ok(s)
}

/// Trains with the class weights recorded in the dataset manifest.
pub fn cmd_train(c: &PipelineConfig, progress: &mut dyn FnMut(String)) -> Result<String, CliError> {
    let ds = Dataset::open(&c.paths.dataset).map_err(data("dataset"))?;
    let tiles = ds.load_split(Split::Training).map_err(data("dataset"))?;
    let tcfg = crate::train::TrainConfig { weights: ds.manifest.weights, ..c.train.clone() };
    let every = (tcfg.max_steps / 20).max(1);
    let outcome = train_on_tiles(&tiles, &tcfg, &c.model, |r| {
        if r.step % every == 0 || r.step + 1 == tcfg.max_steps {
            progress(format!("step {}\tlr {:.3e}\tloss {:.4}", r.step, r.lr, r.loss));
        }
    })
    .map_err(model("train"))?;
    create_parent("checkpoint", &c.paths.checkpoint)?;
    checkpoint::save(&outcome.model, &c.paths.checkpoint).map_err(data("checkpoint"))?;
    fs::create_dir_all(&c.paths.output).map_err(io("write", &c.paths.output))?;
    let log_path = c.paths.output.join("train_log.tsv");
    fs::write(&log_path, format_log(&outcome.log)).map_err(io("write", &log_path))?;
    let last = outcome.log.last().map_or(f64::NAN, |r| r.loss);
    Ok(format!(
        "trained {} steps on {} tiles, final loss {last:.4}\nwrote {}\nwrote {}\n",
        outcome.log.len(),
        tiles.len(),
        c.paths.checkpoint.display(),
        log_path.display()
    ))
}

pub fn cmd_eval(
    c: &PipelineConfig,
    split: Split,
    predictions: Option<&Path>,
    save: Option<&Path>,
) -> Result<String, CliError> {
    let ds = Dataset::open(&c.paths.dataset).map_err(data("dataset"))?;
    let tiles = ds.load_split(split).map_err(data("dataset"))?;
    if tiles.is_empty() {
        return Err(CliError::new("dataset", ErrorKind::Data, format!("{split} split has no tiles")));
    }
    let cm = match predictions {
        Some(dir) => {
            let mut cm = ConfusionMatrix::default();
            for t in &tiles {
                let p = dir.join(format!("{}.png", t.tile_id));
                let pred = LabelRaster::load_png(&p, Some(t.labels.grid)).map_err(data("predictions"))?;
                if !pred.grid.same_shape(&t.labels.grid) {
                    return Err(CliError::new("predictions", ErrorKind::Data, format!("{}: size differs from ground truth", p.display())));
                }
                cm.add(&t.labels.data, &pred.data, NODATA).map_err(model("eval"))?;
            }
            cm
        }
        None => {
            let m = checkpoint::load(&c.paths.checkpoint).map_err(data("checkpoint"))?;
            let (win, stride) = c.window_stride();
            let (cm, preds) = evaluate_tiles(&m, &tiles, win, stride, NODATA).map_err(model("eval"))?;
            if let Some(dir) = save {
                fs::create_dir_all(dir).map_err(io("write", dir))?;
                for (t, p) in tiles.iter().zip(&preds) {
                    p.save_georeferenced(&dir.join(format!("{}.png", t.tile_id))).map_err(data("write"))?;
                }
            }
            cm
        }
    };
    let report = cm.report();
    fs::create_dir_all(&c.paths.output).map_err(io("write", &c.paths.output))?;
    let rp = c.paths.output.join(format!("eval_{split}.txt"));
    let cp = c.paths.output.join(format!("confusion_{split}.csv"));
    fs::write(&rp, &report).map_err(io("write", &rp))?;
    fs::write(&cp, cm.to_csv()).map_err(io("write", &cp))?;
    Ok(format!("{split}: {} tiles, {} scored pixels\n{report}", tiles.len(), cm.total()))
}

pub fn cmd_infer(c: &PipelineConfig, input: &Path, output: &Path) -> Result<String, CliError> {
    let m = checkpoint::load(&c.paths.checkpoint).map_err(data("checkpoint"))?;
    let img = RgbRaster::load_png(input, c.grid_fallback()).map_err(data("input"))?;
    let (win, stride) = c.window_stride();
    let labels = sliding_infer(&m, &img, win, stride).map_err(model("infer"))?;
    create_parent("write", output)?;
    labels.save_georeferenced(output).map_err(data("write"))?;
    Ok(format!(
        "segmented {}x{} px with window {win}, stride {stride}\nwrote {}\n",
        img.grid.width,
        img.grid.height,
        output.display()
    ))
}

pub fn cmd_colorize(c: &PipelineConfig, input: &Path, output: &Path, reverse: bool) -> Result<String, CliError> {
    create_parent("write", output)?;
    if reverse {
        let img = RgbRaster::load_png(input, None).map_err(data("input"))?;
        let labels = c.palette.decolorize(&img).map_err(|e| CliError::new("colorize", ErrorKind::Data, format!("{}: {e}", input.display())))?;
        labels.save_png(output).map_err(data("write"))?;
    } else {
        let labels = LabelRaster::load_png(input, None).map_err(data("input"))?;
        c.palette.colorize(&labels).save_png(output).map_err(data("write"))?;
    }
    Ok(format!("wrote {}\n", output.display()))
}

/// Writes the fixture's inputs and a `landseg.toml` that runs the whole
/// pipeline on them.
pub fn cmd_fixture(dir: &Path, seed: u64) -> Result<String, CliError> {
    let fx = Fixture::generate(seed).map_err(data("fixture"))?;
    let files = fx.write(dir).map_err(data("fixture"))?;
    let name = |p: &Path| PathBuf::from(p.file_name().expect("file name"));
    let cfg = PipelineConfig {
        paths: Paths {
            layers: files.layers.iter().map(|p| name(p)).collect(),
            ortho: name(&files.ortho),
            class_map: Some(name(&files.class_map)),
            ..Paths::default()
        },
        tiling: TilingConfig {
            tile_px: fixture::FIXTURE_TILE_PX,
            train_fraction: fixture::split().training,
            split_seed: fixture::split().seed,
            ..TilingConfig::default()
        },
        train: fixture::train_config(),
        model: fixture::model_config(),
        ..PipelineConfig::default()
    };
    let p = dir.join("landseg.toml");
    fs::write(&p, cfg.to_toml()).map_err(io("fixture", &p))?;
    Ok(format!("wrote fixture to {}\nconfig {}\n", dir.display(), p.display()))
}

/// Reads a manifest without opening tiles; used to compare dataset layouts.
pub fn manifest_paths(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    Ok(Manifest::read(root).map_err(data("dataset"))?.paths())
}
