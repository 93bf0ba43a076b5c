use std::collections::BTreeMap;
use std::str::FromStr;

use super::geometry::{ClassedFeature, Feature};
use super::GeoError;
use crate::classes::ClassId;

/// What to do with a source class that has no entry in the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownPolicy {
    #[default]
    Error,
    Nodata,
}

impl FromStr for UnknownPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "error" => Ok(Self::Error),
            "nodata" => Ok(Self::Nodata),
            other => Err(format!("unknown policy `{other}` (expected error|nodata)")),
        }
    }
}

/// Merge table from source-dataset class strings to the six target classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    entries: BTreeMap<String, ClassId>,
    pub unknown: UnknownPolicy,
}

impl ClassMap {
    pub fn new(entries: BTreeMap<String, ClassId>, unknown: UnknownPolicy) -> Result<Self, GeoError> {
        if entries.is_empty() {
            return Err(GeoError::ClassMap("class map has no entries".into()));
        }
        Ok(Self { entries, unknown })
    }

    /// Parses `source_class<TAB>target_id` lines; `#` starts a comment.
    /// Target ids are `0..=5`, `255` or the word `nodata`.
    pub fn parse(text: &str, unknown: UnknownPolicy) -> Result<Self, GeoError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim_end();
            if line.trim().is_empty() {
                continue;
            }
            let bad = |why: &str| GeoError::ClassMap(format!("line {}: {why}", n + 1));
            let (src, tgt) = line.split_once('\t').ok_or_else(|| bad("expected a TAB separator"))?;
            let src = src.trim();
            if src.is_empty() {
                return Err(bad("empty source class"));
            }
            let tgt = tgt.trim();
            let id = if tgt.eq_ignore_ascii_case("nodata") {
                ClassId::NODATA
            } else {
                tgt.parse::<u8>()
                    .ok()
                    .and_then(ClassId::new)
                    .ok_or_else(|| bad(&format!("invalid target id `{tgt}`")))?
            };
            if entries.insert(src.to_string(), id).is_some() {
                return Err(bad(&format!("duplicate source class `{src}`")));
            }
        }
        Self::new(entries, unknown)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# source_class\ttarget_id\n");
        for (k, v) in &self.entries {
            s.push_str(&format!("{k}\t{}\n", v.value()));
        }
        s
    }

    pub fn lookup(&self, source_class: &str) -> Result<ClassId, GeoError> {
        match (self.entries.get(source_class), self.unknown) {
            (Some(&id), _) => Ok(id),
            (None, UnknownPolicy::Nodata) => Ok(ClassId::NODATA),
            (None, UnknownPolicy::Error) => Err(GeoError::UnknownClass(source_class.to_string())),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// An illustrative table over BD Forêt v2 vegetation-type labels and
    /// BD Topo layer names. Replace it with a real merge table for production.
    pub fn illustrative_default() -> Self {
        let rows: &[(&str, ClassId)] = &[
            ("Forêt fermée de feuillus", ClassId::DENSE_FOREST),
            ("Forêt fermée de conifères", ClassId::DENSE_FOREST),
            ("Forêt fermée mixte", ClassId::DENSE_FOREST),
            ("Forêt fermée sans couvert arboré", ClassId::DENSE_FOREST),
            ("Forêt ouverte de feuillus", ClassId::SPARSE_FOREST),
            ("Forêt ouverte de conifères", ClassId::SPARSE_FOREST),
            ("Forêt ouverte mixte", ClassId::SPARSE_FOREST),
            ("Peupleraie", ClassId::SPARSE_FOREST),
            ("Lande", ClassId::MOOR),
            ("Formation herbacée", ClassId::HERBACEOUS),
            ("batiment", ClassId::BUILDING),
            ("troncon_de_route", ClassId::ROAD),
        ];
        let entries = rows.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self::new(entries, UnknownPolicy::Error).expect("non-empty")
    }
}

/// Annotates every feature with its target class.
pub fn apply_class_map(fc: &[Feature], map: &ClassMap) -> Result<Vec<ClassedFeature>, GeoError> {
    fc.iter()
        .map(|f| {
            Ok(ClassedFeature {
                class: map.lookup(&f.source_class)?,
                feature: f.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geovec::geometry::Geometry;

    fn feat(class: &str) -> Feature {
        Feature {
            geometry: Geometry::Polygon(vec![vec![[0., 0.], [1., 0.], [1., 1.], [0., 0.]]]),
            source_class: class.into(),
            attributes: Default::default(),
        }
    }

    #[test]
    fn lookup_and_policies() {
        let mut m = ClassMap::parse("feuillus\t0\n", UnknownPolicy::Error).unwrap();
        let out = apply_class_map(&[feat("feuillus")], &m).unwrap();
        assert_eq!(out[0].class, ClassId::DENSE_FOREST);

        match apply_class_map(&[feat("lande")], &m) {
            Err(GeoError::UnknownClass(c)) => assert_eq!(c, "lande"),
            other => panic!("{other:?}"),
        }
        m.unknown = UnknownPolicy::Nodata;
        assert_eq!(apply_class_map(&[feat("lande")], &m).unwrap()[0].class, ClassId::NODATA);
    }

    #[test]
    fn parse_file_format() {
        let text = "# merge table\nForêt fermée de feuillus\t0   # dense\n\nLande\t2\nvoid\tnodata\nskip\t255\n";
        let m = ClassMap::parse(text, UnknownPolicy::Error).unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.lookup("Forêt fermée de feuillus").unwrap(), ClassId::DENSE_FOREST);
        assert_eq!(m.lookup("void").unwrap(), ClassId::NODATA);
        let again = ClassMap::parse(&m.to_text(), UnknownPolicy::Error).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn parse_errors() {
        assert!(ClassMap::parse("# nothing\n", UnknownPolicy::Error).is_err());
        assert!(ClassMap::parse("a 0\n", UnknownPolicy::Error).is_err());
        assert!(ClassMap::parse("a\t6\n", UnknownPolicy::Error).is_err());
        assert!(ClassMap::parse("a\t0\na\t1\n", UnknownPolicy::Error).is_err());
    }
}
