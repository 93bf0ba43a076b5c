use serde::{Deserialize, Serialize};

use crate::classes::{NODATA, NUM_CLASSES};
use crate::raster::{LabelRaster, RgbRaster};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PaletteError {
    #[error("palette colors must be distinct, {0:?} appears twice")]
    Duplicate([u8; 3]),
    #[error("pixel {index} has color {color:?}, which is not in the palette")]
    UnknownColor { index: usize, color: [u8; 3] },
}

/// One display color per class plus one for nodata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Palette {
    pub classes: [[u8; 3]; NUM_CLASSES],
    pub nodata: [u8; 3],
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            classes: [
                [0, 100, 0],
                [120, 200, 80],
                [170, 110, 50],
                [200, 210, 60],
                [220, 30, 30],
                [128, 128, 128],
            ],
            nodata: [0, 0, 0],
        }
    }
}

impl Palette {
    pub fn validate(&self) -> Result<(), PaletteError> {
        let all: Vec<[u8; 3]> = self.classes.iter().copied().chain([self.nodata]).collect();
        for (i, c) in all.iter().enumerate() {
            if all[..i].contains(c) {
                return Err(PaletteError::Duplicate(*c));
            }
        }
        Ok(())
    }

    pub fn color(&self, label: u8) -> [u8; 3] {
        if label == NODATA {
            self.nodata
        } else {
            self.classes[label as usize]
        }
    }

    pub fn colorize(&self, labels: &LabelRaster) -> RgbRaster {
        let data = labels.data.iter().flat_map(|&l| self.color(l)).collect();
        RgbRaster::from_data(labels.grid, data).expect("three bytes per pixel")
    }

    /// Inverse of [`colorize`](Self::colorize); every pixel must carry a
    /// palette color.
    pub fn decolorize(&self, image: &RgbRaster) -> Result<LabelRaster, PaletteError> {
        let data = image
            .data
            .chunks_exact(3)
            .enumerate()
            .map(|(index, px)| {
                let color = [px[0], px[1], px[2]];
                if color == self.nodata {
                    return Ok(NODATA);
                }
                self.classes
                    .iter()
                    .position(|c| *c == color)
                    .map(|c| c as u8)
                    .ok_or(PaletteError::UnknownColor { index, color })
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Ok(LabelRaster::from_data(image.grid, data).expect("one label per pixel"))
    }
}
