//! Scanline polygon fill with a center-point inclusion rule.
//!
//! Polygons are mapped into continuous pixel space (`col` grows east, `row`
//! grows south). A pixel belongs to a polygon when its center lies inside it
//! under the even-odd rule. Centers exactly on the boundary follow a
//! half-open top-left convention: an edge spans rows `[y_min, y_max)` and a
//! span covers columns `[x_left, x_right)`, so top and left boundaries are
//! inclusive and bottom and right boundaries exclusive. Adjacent polygons
//! that share an edge therefore never both claim a pixel.

use super::buffer::buffer_polyline;
use super::geometry::{ClassedFeature, Geometry, Ring};
use super::GeoError;
use crate::classes::{ClassId, NODATA, NUM_CLASSES};
use crate::raster::{GridSpec, LabelRaster};

/// Vegetation first, then buildings, then roads: later entries overwrite.
pub const DEFAULT_PRIORITY: [ClassId; NUM_CLASSES] = ClassId::ALL;

struct Edge {
    x_top: f64,
    y_top: f64,
    y_bot: f64,
    dx: f64,
    dy: f64,
}

impl Edge {
    /// Multiplying before dividing keeps the crossing exact whenever it is
    /// representable, so centers lying exactly on an edge are classified by
    /// the boundary rule rather than by rounding.
    fn crossing(&self, y: f64) -> f64 {
        self.x_top + (y - self.y_top) * self.dx / self.dy
    }
}

/// Calls `paint(row, col)` for every pixel whose center falls inside the
/// polygon given by `rings` (exterior plus holes).
pub fn fill_polygon(rings: &[Ring], grid: &GridSpec, mut paint: impl FnMut(usize, usize)) {
    let mut edges = Vec::new();
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for ring in rings {
        for w in ring.windows(2) {
            let (xa, ya) = grid.to_pixel(w[0][0], w[0][1]);
            let (xb, yb) = grid.to_pixel(w[1][0], w[1][1]);
            if ya == yb {
                continue;
            }
            let ((x0, y0), (x1, y1)) = if ya < yb {
                ((xa, ya), (xb, yb))
            } else {
                ((xb, yb), (xa, ya))
            };
            ymin = ymin.min(y0);
            ymax = ymax.max(y1);
            edges.push(Edge {
                x_top: x0,
                y_top: y0,
                y_bot: y1,
                dx: x1 - x0,
                dy: y1 - y0,
            });
        }
    }
    if edges.is_empty() {
        return;
    }
    let h = grid.height as i64;
    let w = grid.width as i64;
    let r_lo = ((ymin - 0.5).ceil() as i64).max(0);
    let r_hi = ((ymax - 0.5).ceil() as i64).min(h);
    let mut xs: Vec<f64> = Vec::new();
    for r in r_lo..r_hi {
        let yc = r as f64 + 0.5;
        xs.clear();
        for e in &edges {
            if e.y_top <= yc && yc < e.y_bot {
                xs.push(e.crossing(yc));
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
        for pair in xs.chunks_exact(2) {
            let c0 = first_col_at_or_after(pair[0]).max(0);
            let c1 = first_col_at_or_after(pair[1]).min(w);
            for c in c0..c1 {
                paint(r as usize, c as usize);
            }
        }
    }
}

/// Smallest column `c` with `c + 0.5 >= x`.
fn first_col_at_or_after(x: f64) -> i64 {
    let mut c = (x - 0.5).ceil() as i64;
    while (c - 1) as f64 + 0.5 >= x {
        c -= 1;
    }
    while (c as f64) + 0.5 < x {
        c += 1;
    }
    c
}

fn validate_priority(priority: &[ClassId]) -> Result<[usize; NUM_CLASSES], GeoError> {
    let mut rank = [usize::MAX; NUM_CLASSES];
    if priority.len() != NUM_CLASSES {
        return Err(GeoError::Priority(format!(
            "expected {NUM_CLASSES} classes, got {}",
            priority.len()
        )));
    }
    for (i, c) in priority.iter().enumerate() {
        let v = c.value() as usize;
        if v >= NUM_CLASSES || rank[v] != usize::MAX {
            return Err(GeoError::Priority(format!(
                "{priority:?} is not a permutation of 0..{NUM_CLASSES}"
            )));
        }
        rank[v] = i;
    }
    Ok(rank)
}

/// Burns class-resolved features into a label raster. Untouched pixels stay
/// nodata; features mapped to nodata are not painted.
pub fn rasterize(
    features: &[ClassedFeature],
    grid: &GridSpec,
    priority: &[ClassId],
) -> Result<LabelRaster, GeoError> {
    grid.validate()?;
    let rank = validate_priority(priority)?;
    let mut order: Vec<&ClassedFeature> = features.iter().filter(|f| !f.class.is_nodata()).collect();
    order.sort_by_key(|f| rank[f.class.value() as usize]);

    let mut out = LabelRaster::filled(*grid, NODATA);
    let (gx0, gy1) = (grid.origin_x, grid.origin_y);
    let gx1 = gx0 + grid.width as f64 * grid.pixel_size;
    let gy0 = gy1 - grid.height as f64 * grid.pixel_size;
    for f in order {
        let (bx0, by0, bx1, by1) = f.feature.geometry.bbox();
        if bx1 < gx0 || bx0 > gx1 || by1 < gy0 || by0 > gy1 {
            continue;
        }
        let buffered;
        let geom = match &f.feature.geometry {
            Geometry::Polyline { path, width_m } => {
                buffered = buffer_polyline(path, *width_m)?;
                &buffered
            }
            g => g,
        };
        let v = f.class.value();
        for rings in geom.polygons() {
            fill_polygon(rings, grid, |r, c| out.set(r, c, v));
        }
    }
    Ok(out)
}
