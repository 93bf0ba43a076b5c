//! Class histograms and per-class loss weights.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{TileError, TileRecord};
use crate::classes::NUM_CLASSES;

/// The hand-tuned weights used for the IGN six-class dataset, ordered
/// dense forest, sparse forest, moor, herbaceous, building, road.
pub const IGN_WEIGHTS: [f64; NUM_CLASSES] = [0.5, 1.31237, 1.38874, 1.39761, 1.5, 1.47807];

/// Pixel counts per class; nodata is excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassHistogram {
    pub counts: [u64; NUM_CLASSES],
}

impl ClassHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add_labels(&mut self, labels: &[u8]) {
        for &v in labels {
            if (v as usize) < NUM_CLASSES {
                self.counts[v as usize] += 1;
            }
        }
    }

    pub fn frequencies(&self) -> [f64; NUM_CLASSES] {
        let t = self.total() as f64;
        self.counts.map(|c| c as f64 / t)
    }
}

impl std::ops::Add for ClassHistogram {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(rhs.counts) {
            *a += b;
        }
        self
    }
}

pub fn class_stats(tiles: &[TileRecord]) -> Result<ClassHistogram, TileError> {
    if tiles.is_empty() {
        return Err(TileError::Empty);
    }
    Ok(tiles
        .par_iter()
        .map(|t| {
            let mut h = ClassHistogram::default();
            h.add_labels(&t.labels.data);
            h
        })
        .reduce(ClassHistogram::default, |a, b| a + b))
}

/// Six strictly positive finite weights, one per class.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "[f64; NUM_CLASSES]", into = "[f64; NUM_CLASSES]")]
pub struct WeightVector([f64; NUM_CLASSES]);

impl TryFrom<[f64; NUM_CLASSES]> for WeightVector {
    type Error = TileError;

    fn try_from(w: [f64; NUM_CLASSES]) -> Result<Self, TileError> {
        Self::new(w)
    }
}

impl From<WeightVector> for [f64; NUM_CLASSES] {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

impl WeightVector {
    pub fn new(w: [f64; NUM_CLASSES]) -> Result<Self, TileError> {
        if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(TileError::Weights(format!("weight {bad} is not positive and finite")));
        }
        Ok(Self(w))
    }

    pub fn uniform() -> Self {
        Self([1.0; NUM_CLASSES])
    }

    pub fn ign() -> Self {
        Self(IGN_WEIGHTS)
    }

    pub fn values(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }

    pub fn get(&self, class: usize) -> f64 {
        self.0[class]
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightScheme {
    Manual([f64; NUM_CLASSES]),
    /// `w[c] = total / (6 · counts[c])`
    InverseFrequency,
    /// `w[c] = median(freq) / freq[c]`
    MedianFrequency,
}

impl FromStr for WeightScheme {
    type Err = String;

    /// `manual` (the IGN weights), `manual:a,b,c,d,e,f`, `inverse_frequency`
    /// or `median_frequency`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manual" => Ok(Self::Manual(IGN_WEIGHTS)),
            "inverse_frequency" => Ok(Self::InverseFrequency),
            "median_frequency" => Ok(Self::MedianFrequency),
            other => {
                let vals = other
                    .strip_prefix("manual:")
                    .ok_or_else(|| format!("unknown weight scheme `{other}`"))?;
                let v: Vec<f64> = vals
                    .split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
                    .collect::<Result<_, _>>()?;
                let arr: [f64; NUM_CLASSES] = v
                    .try_into()
                    .map_err(|_| format!("manual scheme needs {NUM_CLASSES} values"))?;
                Ok(Self::Manual(arr))
            }
        }
    }
}

pub fn compute_weights(hist: &ClassHistogram, scheme: WeightScheme) -> Result<WeightVector, TileError> {
    match scheme {
        WeightScheme::Manual(v) => WeightVector::new(v),
        WeightScheme::InverseFrequency | WeightScheme::MedianFrequency => {
            if let Some(c) = hist.counts.iter().position(|&c| c == 0) {
                return Err(TileError::Weights(format!(
                    "class {c} has no pixels; frequency weighting is undefined"
                )));
            }
            let total = hist.total() as f64;
            let w = if scheme == WeightScheme::InverseFrequency {
                hist.counts.map(|c| total / (NUM_CLASSES as f64 * c as f64))
            } else {
                let freq = hist.frequencies();
                let mut sorted = freq;
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = (sorted[NUM_CLASSES / 2 - 1] + sorted[NUM_CLASSES / 2]) / 2.0;
                freq.map(|f| median / f)
            };
            WeightVector::new(w)
        }
    }
}
