//! The six land-cover classes and the nodata marker.

use std::fmt;

pub const NUM_CLASSES: usize = 6;

/// Label value for pixels without ground truth.
pub const NODATA: u8 = 255;

/// A land-cover class id in `0..6`, or [`ClassId::NODATA`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(u8);

impl ClassId {
    pub const DENSE_FOREST: ClassId = ClassId(0);
    pub const SPARSE_FOREST: ClassId = ClassId(1);
    pub const MOOR: ClassId = ClassId(2);
    pub const HERBACEOUS: ClassId = ClassId(3);
    pub const BUILDING: ClassId = ClassId(4);
    pub const ROAD: ClassId = ClassId(5);
    pub const NODATA: ClassId = ClassId(NODATA);

    pub const ALL: [ClassId; NUM_CLASSES] = [
        Self::DENSE_FOREST,
        Self::SPARSE_FOREST,
        Self::MOOR,
        Self::HERBACEOUS,
        Self::BUILDING,
        Self::ROAD,
    ];

    /// Accepts `0..=5` and `255`.
    pub fn new(v: u8) -> Option<Self> {
        ((v as usize) < NUM_CLASSES || v == NODATA).then_some(Self(v))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_nodata(self) -> bool {
        self.0 == NODATA
    }

    pub fn name(self) -> &'static str {
        CLASS_NAMES.get(self.0 as usize).copied().unwrap_or("nodata")
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "dense_forest",
    "sparse_forest",
    "moor",
    "herbaceous",
    "building",
    "road",
];
