//! Turning road centerlines into area polygons.

use super::geometry::{Coord, Geometry, GeometryError};

/// Miter joins longer than this multiple of the half-width become bevels.
const MITER_LIMIT: f64 = 4.0;

/// Offsets a centerline by `width_m / 2` on both sides with flat caps and
/// mitered joins, returning a single closed polygon ring.
///
/// The ring starts on the right-hand side of the first segment and runs
/// forward along the right offset, then back along the left offset.
pub fn buffer_polyline(path: &[Coord], width_m: f64) -> Result<Geometry, GeometryError> {
    if !(width_m.is_finite() && width_m > 0.0) {
        return Err(GeometryError::BadWidth(width_m));
    }
    if path.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let mut pts: Vec<Coord> = Vec::with_capacity(path.len());
    for &p in path {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    if pts.len() < 2 {
        return Err(GeometryError::DegenerateLine);
    }
    let half = width_m / 2.0;
    let normals: Vec<Coord> = pts
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
            let len = (dx * dx + dy * dy).sqrt();
            [-dy / len, dx / len]
        })
        .collect();

    let side = |sign: f64| -> Vec<Coord> {
        let mut out = Vec::with_capacity(pts.len() + 2);
        let n0 = normals[0];
        out.push([pts[0][0] + sign * half * n0[0], pts[0][1] + sign * half * n0[1]]);
        for j in 1..pts.len() - 1 {
            let (a, b) = (normals[j - 1], normals[j]);
            let p = pts[j];
            let dot = a[0] * b[0] + a[1] * b[1];
            let denom = 1.0 + dot;
            if denom > 2.0 / (MITER_LIMIT * MITER_LIMIT) {
                let m = [(a[0] + b[0]) / denom, (a[1] + b[1]) / denom];
                out.push([p[0] + sign * half * m[0], p[1] + sign * half * m[1]]);
            } else {
                out.push([p[0] + sign * half * a[0], p[1] + sign * half * a[1]]);
                out.push([p[0] + sign * half * b[0], p[1] + sign * half * b[1]]);
            }
        }
        let nl = normals[normals.len() - 1];
        let pl = pts[pts.len() - 1];
        out.push([pl[0] + sign * half * nl[0], pl[1] + sign * half * nl[1]]);
        out
    };

    let mut ring = side(-1.0);
    let mut left = side(1.0);
    left.reverse();
    ring.extend(left);
    ring.push(ring[0]);
    Ok(Geometry::Polygon(vec![ring]))
}
