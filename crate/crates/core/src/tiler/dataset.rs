//! On-disk dataset layout:
//!
//! ```text
//! <root>/
//!   annotations/training/<id>.png     raw class ids, 255 = nodata
//!   annotations/validation/<id>.png
//!   images/training/<id>.png          RGB
//!   images/validation/<id>.png
//!   manifest.tsv
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{TileError, TileRecord, WeightVector};
use crate::classes::NUM_CLASSES;
use crate::raster::{GridSpec, LabelRaster, RgbRaster};

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Training,
    Validation,
}

impl Split {
    pub const ALL: [Split; 2] = [Split::Training, Split::Validation];

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Training => "training",
            Split::Validation => "validation",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "training" => Ok(Split::Training),
            "validation" => Ok(Split::Validation),
            o => Err(format!("unknown split `{o}`")),
        }
    }
}

/// Training/validation fractions and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub training: f64,
    pub validation: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            training: 0.9,
            validation: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(training: f64, seed: u64) -> Self {
        Self {
            training,
            validation: 1.0 - training,
            seed,
        }
    }

    fn validate(&self) -> Result<(), TileError> {
        let ok = (0.0..=1.0).contains(&self.training)
            && (0.0..=1.0).contains(&self.validation)
            && (self.training + self.validation - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(TileError::Split(format!(
                "fractions {} + {} must be in [0,1] and sum to 1",
                self.training, self.validation
            )))
        }
    }

    /// Assigns each of `n` items to a split; deterministic for a given seed.
    pub fn assign(&self, n: usize) -> Vec<Split> {
        let n_train = (n as f64 * self.training).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let mut out = vec![Split::Validation; n];
        for &i in &order[..n_train.min(n)] {
            out[i] = Split::Training;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub split: Split,
    pub tile_id: String,
    pub nodata_fraction: f64,
}

/// Index of a written dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub weights: WeightVector,
}

impl Manifest {
    pub fn image_path(root: &Path, split: Split, id: &str) -> PathBuf {
        root.join("images").join(split.dir_name()).join(format!("{id}.png"))
    }

    pub fn annotation_path(root: &Path, split: Split, id: &str) -> PathBuf {
        root.join("annotations")
            .join(split.dir_name())
            .join(format!("{id}.png"))
    }

    /// Every file the dataset consists of, relative to `root`.
    pub fn paths(&self) -> Vec<PathBuf> {
        let rel = Path::new("");
        let mut out = Vec::with_capacity(self.entries.len() * 2 + 1);
        for e in &self.entries {
            out.push(Self::annotation_path(rel, e.split, &e.tile_id));
            out.push(Self::image_path(rel, e.split, &e.tile_id));
        }
        out.push(PathBuf::from(MANIFEST_FILE));
        out.sort();
        out
    }

    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(move |e| e.split == split)
            .map(|e| e.tile_id.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# split\ttile_id\tnodata_fraction\n");
        for e in &self.entries {
            s.push_str(&format!("{}\t{}\t{}\n", e.split, e.tile_id, e.nodata_fraction));
        }
        let w: Vec<String> = self.weights.values().iter().map(|w| w.to_string()).collect();
        s.push_str(&format!("weights\t{}\n", w.join("\t")));
        s
    }

    pub fn parse(text: &str) -> Result<Self, TileError> {
        let mut entries = Vec::new();
        let mut weights = None;
        for (n, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let bad = |why: String| TileError::Manifest(format!("line {}: {why}", n + 1));
            let cols: Vec<&str> = line.split('\t').collect();
            if cols[0] == "weights" {
                let v: Vec<f64> = cols[1..]
                    .iter()
                    .map(|c| c.parse::<f64>().map_err(|e| bad(e.to_string())))
                    .collect::<Result<_, _>>()?;
                let arr: [f64; NUM_CLASSES] =
                    v.try_into().map_err(|_| bad("expected 6 weights".into()))?;
                weights = Some(WeightVector::new(arr)?);
                continue;
            }
            let [split, id, frac] = cols[..] else {
                return Err(bad(format!("expected 3 columns, got {}", cols.len())));
            };
            entries.push(ManifestEntry {
                split: split.parse().map_err(bad)?,
                tile_id: id.to_string(),
                nodata_fraction: frac.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            });
        }
        Ok(Self {
            entries,
            weights: weights.ok_or_else(|| TileError::Manifest("missing weights line".into()))?,
        })
    }

    pub fn read(root: &Path) -> Result<Self, TileError> {
        let p = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&p).map_err(|source| TileError::Io { path: p, source })?;
        Self::parse(&text)
    }
}

/// Writes tiles into the standard layout and returns the manifest.
pub fn write_dataset(
    tiles: &[TileRecord],
    split: SplitSpec,
    root: &Path,
    weights: WeightVector,
) -> Result<Manifest, TileError> {
    if tiles.is_empty() {
        return Err(TileError::Empty);
    }
    split.validate()?;
    let mut seen = HashSet::new();
    for t in tiles {
        if !seen.insert(t.tile_id.as_str()) {
            return Err(TileError::DuplicateId(t.tile_id.clone()));
        }
    }
    for s in Split::ALL {
        for sub in ["annotations", "images"] {
            let d = root.join(sub).join(s.dir_name());
            fs::create_dir_all(&d).map_err(|source| TileError::Io { path: d, source })?;
        }
    }
    let assignment = split.assign(tiles.len());
    let mut entries = Vec::with_capacity(tiles.len());
    for s in Split::ALL {
        for (t, _) in tiles.iter().zip(&assignment).filter(|(_, &a)| a == s) {
            t.labels
                .save_png(&Manifest::annotation_path(root, s, &t.tile_id))?;
            t.image.save_png(&Manifest::image_path(root, s, &t.tile_id))?;
            entries.push(ManifestEntry {
                split: s,
                tile_id: t.tile_id.clone(),
                nodata_fraction: t.nodata_fraction,
            });
        }
    }
    let manifest = Manifest { entries, weights };
    let p = root.join(MANIFEST_FILE);
    fs::write(&p, manifest.to_text()).map_err(|source| TileError::Io { path: p, source })?;
    Ok(manifest)
}

/// A dataset on disk, opened through its manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self, TileError> {
        Ok(Self {
            root: root.to_path_buf(),
            manifest: Manifest::read(root)?,
        })
    }

    pub fn len(&self, split: Split) -> usize {
        self.manifest.ids(split).count()
    }

    pub fn is_empty(&self, split: Split) -> bool {
        self.len(split) == 0
    }

    pub fn load_labels(&self, split: Split, id: &str) -> Result<LabelRaster, TileError> {
        Ok(LabelRaster::load_png(
            &Manifest::annotation_path(&self.root, split, id),
            None,
        )?)
    }

    pub fn load_tile(&self, split: Split, id: &str) -> Result<TileRecord, TileError> {
        let labels = self.load_labels(split, id)?;
        let image = RgbRaster::load_png(&Manifest::image_path(&self.root, split, id), None)?;
        let grid: GridSpec = labels.grid;
        let image = RgbRaster { grid, ..image };
        TileRecord::new(id.to_string(), image, labels)
    }

    /// Loads every tile of a split in manifest order.
    pub fn load_split(&self, split: Split) -> Result<Vec<TileRecord>, TileError> {
        self.manifest
            .ids(split)
            .map(|id| self.load_tile(split, id))
            .collect()
    }
}
