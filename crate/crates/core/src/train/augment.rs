use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::raster::{LabelRaster, RgbRaster};

/// The random choices of one augmentation draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropFlip {
    pub row: usize,
    pub col: usize,
    pub flip: bool,
}

impl CropFlip {
    pub fn draw(rng: &mut impl Rng, width: usize, height: usize, crop: usize) -> Result<Self, TrainError> {
        if crop == 0 || crop > width || crop > height {
            return Err(TrainError::Crop { crop, width, height });
        }
        Ok(Self {
            row: rng.gen_range(0..=height - crop),
            col: rng.gen_range(0..=width - crop),
            flip: rng.gen_bool(0.5),
        })
    }

    pub fn apply(&self, image: &RgbRaster, labels: &LabelRaster, crop: usize) -> (RgbRaster, LabelRaster) {
        let mut img = image.crop(self.row, self.col, crop, crop);
        let mut lab = labels.crop(self.row, self.col, crop, crop);
        if self.flip {
            for row in img.data.chunks_exact_mut(crop * 3) {
                let src = row.to_vec();
                for (c, px) in row.chunks_exact_mut(3).enumerate() {
                    let s = (crop - 1 - c) * 3;
                    px.copy_from_slice(&src[s..s + 3]);
                }
            }
            for row in lab.data.chunks_exact_mut(crop) {
                row.reverse();
            }
        }
        (img, lab)
    }
}

/// Seeded random `crop×crop` window plus horizontal flip, applied identically
/// to the image and its labels.
pub fn augment(
    image: &RgbRaster,
    labels: &LabelRaster,
    crop: usize,
    seed: u64,
) -> Result<(RgbRaster, LabelRaster), TrainError> {
    if image.grid != labels.grid {
        return Err(TrainError::Shape("image and labels are not aligned".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = CropFlip::draw(&mut rng, labels.grid.width, labels.grid.height, crop)?;
    Ok(draw.apply(image, labels, crop))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridSpec;

    fn tile(n: usize) -> (RgbRaster, LabelRaster) {
        let g = GridSpec::new(0.0, 0.0, 0.5, n, n).unwrap();
        let img = RgbRaster::from_data(g, (0..n * n * 3).map(|i| (i % 251) as u8).collect()).unwrap();
        let lab = LabelRaster::from_data(g, (0..n * n).map(|i| ((i / 3) % 6) as u8).collect()).unwrap();
        (img, lab)
    }

    #[test]
    fn full_crop_without_flip_is_identity() {
        let (img, lab) = tile(8);
        let d = CropFlip { row: 0, col: 0, flip: false };
        assert_eq!(d.apply(&img, &lab, 8), (img, lab));
    }

    #[test]
    fn flip_mirrors_rows_consistently() {
        let (img, lab) = tile(4);
        let (fi, fl) = CropFlip { row: 0, col: 0, flip: true }.apply(&img, &lab, 4);
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(fi.get(r, c), img.get(r, 3 - c));
                assert_eq!(fl.get(r, c), lab.get(r, 3 - c));
            }
        }
    }

    #[test]
    fn seeded_and_bounded() {
        let (img, lab) = tile(10);
        assert_eq!(augment(&img, &lab, 6, 3).unwrap(), augment(&img, &lab, 6, 3).unwrap());
        assert!(matches!(augment(&img, &lab, 11, 0), Err(TrainError::Crop { .. })));
    }
}
