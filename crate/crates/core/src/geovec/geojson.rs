//! Reader and writer for the supported GeoJSON subset: `Polygon`,
//! `MultiPolygon` and `LineString` features inside a `FeatureCollection`.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::geometry::{Coord, Feature, FeatureCollection, Geometry, GeometryError, Ring};
use super::GeoError;

/// Rendered width used for line features that carry no `width_m` attribute.
pub const DEFAULT_ROAD_WIDTH_M: f64 = 4.0;

pub const WIDTH_ATTRIBUTE: &str = "width_m";

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Property holding the source class string.
    pub class_property: String,
    pub default_width_m: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            class_property: "class".to_string(),
            default_width_m: DEFAULT_ROAD_WIDTH_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureProblem {
    #[error("missing geometry")]
    MissingGeometry,
    #[error("unsupported geometry type `{0}`")]
    Unsupported(String),
    #[error("malformed coordinates: {0}")]
    Coordinates(String),
    #[error("missing or empty class property `{0}`")]
    MissingClass(String),
    #[error("invalid `width_m` attribute `{0}`")]
    Width(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub fn parse_feature_collection(
    bytes: &[u8],
    opts: &ParseOptions,
) -> Result<FeatureCollection, GeoError> {
    let doc: Value =
        serde_json::from_slice(bytes).map_err(|e| GeoError::Malformed(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| GeoError::Malformed("top level is not an object".into()))?;
    if obj.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(GeoError::Malformed("expected a FeatureCollection".into()));
    }
    let features = obj
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| GeoError::Malformed("`features` is not an array".into()))?;
    features
        .iter()
        .enumerate()
        .map(|(index, f)| {
            parse_feature(f, opts).map_err(|problem| GeoError::Feature { index, problem })
        })
        .collect()
}

fn parse_feature(f: &Value, opts: &ParseOptions) -> Result<Feature, FeatureProblem> {
    let props = f.get("properties").and_then(Value::as_object);
    let mut attributes = BTreeMap::new();
    if let Some(p) = props {
        for (k, v) in p {
            let s = match v {
                Value::String(s) => s.clone(),
                Value::Null => continue,
                other => other.to_string(),
            };
            attributes.insert(k.clone(), s);
        }
    }
    let source_class = attributes
        .get(&opts.class_property)
        .filter(|s| !s.is_empty())
        .cloned()
        .ok_or_else(|| FeatureProblem::MissingClass(opts.class_property.clone()))?;

    let geom = f
        .get("geometry")
        .filter(|g| !g.is_null())
        .ok_or(FeatureProblem::MissingGeometry)?;
    let kind = geom
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| FeatureProblem::Unsupported("<none>".into()))?;
    let coords = geom
        .get("coordinates")
        .ok_or_else(|| FeatureProblem::Coordinates("missing".into()))?;
    let geometry = match kind {
        "Polygon" => Geometry::Polygon(rings(coords)?),
        "MultiPolygon" => Geometry::MultiPolygon(
            array(coords)?
                .iter()
                .map(rings)
                .collect::<Result<_, _>>()?,
        ),
        "LineString" => {
            let width_m = match attributes.get(super::geojson::WIDTH_ATTRIBUTE) {
                Some(w) => w
                    .parse::<f64>()
                    .map_err(|_| FeatureProblem::Width(w.clone()))?,
                None => opts.default_width_m,
            };
            Geometry::Polyline {
                path: path(coords)?,
                width_m,
            }
        }
        other => return Err(FeatureProblem::Unsupported(other.to_string())),
    };
    geometry.validate()?;
    Ok(Feature {
        geometry,
        source_class,
        attributes,
    })
}

fn array(v: &Value) -> Result<&Vec<Value>, FeatureProblem> {
    v.as_array()
        .ok_or_else(|| FeatureProblem::Coordinates(format!("expected array, found {v}")))
}

fn coord(v: &Value) -> Result<Coord, FeatureProblem> {
    let a = array(v)?;
    if a.len() < 2 {
        return Err(FeatureProblem::Coordinates("position with < 2 values".into()));
    }
    let num = |x: &Value| {
        x.as_f64()
            .ok_or_else(|| FeatureProblem::Coordinates(format!("not a number: {x}")))
    };
    Ok([num(&a[0])?, num(&a[1])?])
}

fn path(v: &Value) -> Result<Vec<Coord>, FeatureProblem> {
    array(v)?.iter().map(coord).collect()
}

fn rings(v: &Value) -> Result<Vec<Ring>, FeatureProblem> {
    array(v)?.iter().map(path).collect()
}

/// Serializes features back into a `FeatureCollection` document.
pub fn to_geojson(fc: &[Feature], opts: &ParseOptions) -> String {
    let to_path = |p: &[Coord]| Value::Array(p.iter().map(|c| json!([c[0], c[1]])).collect());
    let to_rings = |r: &[Ring]| Value::Array(r.iter().map(|x| to_path(x)).collect());
    let features: Vec<Value> = fc
        .iter()
        .map(|f| {
            let mut props = Map::new();
            for (k, v) in &f.attributes {
                props.insert(k.clone(), Value::String(v.clone()));
            }
            props.insert(
                opts.class_property.clone(),
                Value::String(f.source_class.clone()),
            );
            let geometry = match &f.geometry {
                Geometry::Polygon(r) => json!({"type": "Polygon", "coordinates": to_rings(r)}),
                Geometry::MultiPolygon(p) => json!({
                    "type": "MultiPolygon",
                    "coordinates": Value::Array(p.iter().map(|r| to_rings(r)).collect()),
                }),
                Geometry::Polyline { path, width_m } => {
                    props.insert(WIDTH_ATTRIBUTE.into(), json!(width_m));
                    json!({"type": "LineString", "coordinates": to_path(path)})
                }
            };
            json!({"type": "Feature", "properties": props, "geometry": geometry})
        })
        .collect();
    serde_json::to_string_pretty(&json!({"type": "FeatureCollection", "features": features}))
        .expect("json values serialize")
}
