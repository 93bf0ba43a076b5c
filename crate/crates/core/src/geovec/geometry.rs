use std::collections::BTreeMap;
use std::fmt;

use crate::classes::ClassId;

/// `[x, y]` in projected meters.
pub type Coord = [f64; 2];

/// A closed ring: at least four points, first equal to last.
pub type Ring = Vec<Coord>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    Polygon,
    MultiPolygon,
    Polyline,
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeometryKind::Polygon => "polygon",
            GeometryKind::MultiPolygon => "multipolygon",
            GeometryKind::Polyline => "polyline",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Exterior ring followed by any holes.
    Polygon(Vec<Ring>),
    MultiPolygon(Vec<Vec<Ring>>),
    /// Centerline with a rendered width in meters.
    Polyline { path: Vec<Coord>, width_m: f64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("ring {ring} has {points} points, need at least 4")]
    ShortRing { ring: usize, points: usize },
    #[error("ring {ring} is not closed")]
    UnclosedRing { ring: usize },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("polyline width must be positive, got {0}")]
    BadWidth(f64),
    #[error("polyline needs at least 2 distinct points")]
    DegenerateLine,
    #[error("polygon has no rings")]
    Empty,
}

impl Geometry {
    pub fn kind(&self) -> GeometryKind {
        match self {
            Geometry::Polygon(_) => GeometryKind::Polygon,
            Geometry::MultiPolygon(_) => GeometryKind::MultiPolygon,
            Geometry::Polyline { .. } => GeometryKind::Polyline,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            Geometry::Polygon(rings) => validate_rings(rings),
            Geometry::MultiPolygon(polys) => {
                if polys.is_empty() {
                    return Err(GeometryError::Empty);
                }
                polys.iter().try_for_each(|r| validate_rings(r))
            }
            Geometry::Polyline { path, width_m } => {
                if !(width_m.is_finite() && *width_m > 0.0) {
                    return Err(GeometryError::BadWidth(*width_m));
                }
                if path.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(GeometryError::NonFinite);
                }
                if path.len() < 2 {
                    return Err(GeometryError::DegenerateLine);
                }
                Ok(())
            }
        }
    }

    /// Polygons making up this geometry (a polyline has none until buffered).
    pub fn polygons(&self) -> Vec<&[Ring]> {
        match self {
            Geometry::Polygon(r) => vec![r.as_slice()],
            Geometry::MultiPolygon(p) => p.iter().map(|r| r.as_slice()).collect(),
            Geometry::Polyline { .. } => Vec::new(),
        }
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut eat = |c: &Coord| {
            b.0 = b.0.min(c[0]);
            b.1 = b.1.min(c[1]);
            b.2 = b.2.max(c[0]);
            b.3 = b.3.max(c[1]);
        };
        match self {
            Geometry::Polygon(r) => r.iter().flatten().for_each(&mut eat),
            Geometry::MultiPolygon(p) => p.iter().flatten().flatten().for_each(&mut eat),
            Geometry::Polyline { path, width_m } => {
                path.iter().for_each(&mut eat);
                let h = width_m / 2.0;
                b = (b.0 - h, b.1 - h, b.2 + h, b.3 + h);
            }
        }
        b
    }
}

fn validate_rings(rings: &[Ring]) -> Result<(), GeometryError> {
    if rings.is_empty() {
        return Err(GeometryError::Empty);
    }
    for (i, ring) in rings.iter().enumerate() {
        if ring.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if ring.len() < 4 {
            return Err(GeometryError::ShortRing {
                ring: i,
                points: ring.len(),
            });
        }
        if ring.first() != ring.last() {
            return Err(GeometryError::UnclosedRing { ring: i });
        }
    }
    Ok(())
}

/// Signed shoelace area of a closed ring (positive when counter-clockwise).
pub fn ring_area(ring: &[Coord]) -> f64 {
    ring.windows(2)
        .map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1])
        .sum::<f64>()
        / 2.0
}

pub fn ring_perimeter(ring: &[Coord]) -> f64 {
    ring.windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub geometry: Geometry,
    pub source_class: String,
    pub attributes: BTreeMap<String, String>,
}

pub type FeatureCollection = Vec<Feature>;

/// A feature whose source class has been mapped to a target class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassedFeature {
    pub feature: Feature,
    pub class: ClassId,
}
