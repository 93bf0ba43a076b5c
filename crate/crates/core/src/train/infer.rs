use super::TrainError;
use crate::classes::NUM_CLASSES;
use crate::raster::{LabelRaster, RgbRaster};
use crate::swin::SwinSegmenter;
use crate::tensor::Tensor;

/// Per-channel statistics of ImageNet RGB images on the 0..255 scale.
pub const PIXEL_MEAN: [f32; 3] = [123.675, 116.28, 103.53];
pub const PIXEL_STD: [f32; 3] = [58.395, 57.12, 57.375];

/// Anything that maps a normalized `(1, h, w, 3)` image to `(1, h, w, K)` logits.
pub trait LogitModel {
    fn logits(&self, image: &Tensor<f32>) -> Result<Tensor<f32>, TrainError>;
}

impl LogitModel for SwinSegmenter<f32> {
    fn logits(&self, image: &Tensor<f32>) -> Result<Tensor<f32>, TrainError> {
        Ok(SwinSegmenter::logits(self, image)?)
    }
}

/// Normalizes a batch of equally sized RGB rasters into `(N, H, W, 3)`.
pub fn images_to_tensor(images: &[&RgbRaster]) -> Tensor<f32> {
    let (h, w) = (images[0].grid.height, images[0].grid.width);
    let mut data = Vec::with_capacity(images.len() * h * w * 3);
    for img in images {
        assert_eq!((img.grid.height, img.grid.width), (h, w), "batch images differ in size");
        data.extend(
            img.data
                .iter()
                .enumerate()
                .map(|(i, &v)| (v as f32 - PIXEL_MEAN[i % 3]) / PIXEL_STD[i % 3]),
        );
    }
    Tensor::new(&[images.len(), h, w, 3], data).expect("batch shape")
}

/// Window origins along one axis of length `len`: a regular grid with the
/// last window pushed back inside the image.
fn window_starts(len: usize, window: usize, stride: usize) -> Vec<usize> {
    if len <= window {
        return vec![0];
    }
    let n = (len - window).div_ceil(stride) + 1;
    (0..n).map(|i| (i * stride).min(len - window)).collect()
}

/// Averaged logits `(H, W, K)` of overlapping `window×window` crops of a
/// normalized `(1, H, W, 3)` image.
pub fn sliding_logits<M: LogitModel + ?Sized>(
    model: &M,
    image: &Tensor<f32>,
    window: usize,
    stride: usize,
) -> Result<Tensor<f32>, TrainError> {
    let s = image.shape();
    if s.len() != 4 || s[0] != 1 || s[3] != 3 {
        return Err(TrainError::Shape(format!("expected (1, H, W, 3) image, got {s:?}")));
    }
    if window == 0 || stride == 0 || stride > window {
        return Err(TrainError::Shape(format!("stride {stride} must be in 1..={window}")));
    }
    let (h, w) = (s[1], s[2]);
    let (wh, ww) = (window.min(h), window.min(w));
    let mut sum: Vec<f32> = Vec::new();
    let mut count = vec![0u32; h * w];
    let mut k = 0;
    for &y0 in &window_starts(h, wh, stride) {
        for &x0 in &window_starts(w, ww, stride) {
            let crop = Tensor::from_fn(&[1, wh, ww, 3], |i| {
                let (r, rest) = (i / (ww * 3), i % (ww * 3));
                image.data()[((y0 + r) * w + x0) * 3 + rest]
            });
            let out = model.logits(&crop)?;
            if out.ndim() != 4 || out.shape()[1] != wh || out.shape()[2] != ww {
                return Err(TrainError::Shape(format!("model returned {:?} for a {wh}x{ww} crop", out.shape())));
            }
            if sum.is_empty() {
                k = out.last_dim();
                sum = vec![0.0; h * w * k];
            }
            for r in 0..wh {
                for c in 0..ww {
                    let p = (y0 + r) * w + x0 + c;
                    count[p] += 1;
                    let src = &out.data()[(r * ww + c) * k..(r * ww + c + 1) * k];
                    for (d, &v) in sum[p * k..(p + 1) * k].iter_mut().zip(src) {
                        *d += v;
                    }
                }
            }
        }
    }
    for (p, &n) in count.iter().enumerate() {
        let inv = 1.0 / n as f32;
        sum[p * k..(p + 1) * k].iter_mut().for_each(|v| *v *= inv);
    }
    Ok(Tensor::new(&[h, w, k], sum).expect("logit shape"))
}

/// Index of the largest logit per pixel; ties go to the lower class id.
pub fn argmax_labels(logits: &Tensor<f32>) -> Vec<u8> {
    logits
        .data()
        .chunks(logits.last_dim())
        .map(|z| {
            let mut best = 0;
            for (i, &v) in z.iter().enumerate() {
                if v > z[best] {
                    best = i;
                }
            }
            best as u8
        })
        .collect()
}

/// Segments a whole raster. Every pixel receives a class, including
/// all-black (no-information) areas.
pub fn sliding_infer<M: LogitModel + ?Sized>(
    model: &M,
    image: &RgbRaster,
    window: usize,
    stride: usize,
) -> Result<LabelRaster, TrainError> {
    let logits = sliding_logits(model, &images_to_tensor(&[image]), window, stride)?;
    if logits.last_dim() != NUM_CLASSES {
        return Err(TrainError::Shape(format!("model predicts {} classes", logits.last_dim())));
    }
    Ok(LabelRaster::from_data(image.grid, argmax_labels(&logits))?)
}
