//! Semantic label maps, scene attributes and drivable-region extraction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use bitvec::vec::BitVec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("semantic map must be 8-bit single-channel, got {0}")]
    WrongPixelFormat(String),
    #[error("unknown class id {0}")]
    UnknownClassId(u8),
    #[error("zero-area semantic map")]
    ZeroArea,
    #[error("label buffer has {got} entries, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no pixel matches the drivable class set")]
    EmptyRegion,
    #[error("drivable class set is empty")]
    NoDrivableIds,
    #[error("schema line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("unknown {kind} `{value}`")]
    UnknownAttribute { kind: &'static str, value: String },
    #[error("cannot write {path}: {reason}")]
    Write { path: String, reason: String },
}

macro_rules! attribute_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $kind:literal {
            $($variant:ident => $ident:literal, $phrase:literal, $title:literal;)*
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant,)*
        }

        impl $name {
            pub const ALL: [$name; attribute_enum!(@count $($variant)*)] = [$($name::$variant,)*];

            /// Snake-case identifier, as used in manifests and paths.
            pub fn ident(self) -> &'static str {
                match self { $($name::$variant => $ident,)* }
            }

            /// Lower-case phrase used inside prompts.
            pub fn phrase(self) -> &'static str {
                match self { $($name::$variant => $phrase,)* }
            }

            /// Title-case form used in scene-context strings and tables.
            pub fn title(self) -> &'static str {
                match self { $($name::$variant => $title,)* }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|v| *v == self).unwrap()
            }

            pub fn from_phrase(s: &str) -> Option<Self> {
                Self::ALL.iter().copied().find(|v| v.phrase() == s)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.ident())
            }
        }

        impl FromStr for $name {
            type Err = SceneError;

            fn from_str(s: &str) -> Result<Self, SceneError> {
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.ident() == s)
                    .ok_or_else(|| SceneError::UnknownAttribute { kind: $kind, value: s.to_string() })
            }
        }
    };
    (@count $($v:ident)*) => { 0 $(+ attribute_enum!(@one $v))* };
    (@one $v:ident) => { 1 };
}

attribute_enum! {
    /// Weather conditions covered by the benchmark.
    Weather, "weather" {
        Clear => "clear", "clear", "Clear";
        Rain => "rain", "rain", "Rainy";
        Fog => "fog", "fog", "Foggy";
        Snow => "snow", "snow", "Snowy";
        Cloudy => "cloudy", "cloudy", "Cloudy";
        Night => "night", "night", "Night";
    }
}

attribute_enum! {
    /// Driving scene types covered by the benchmark.
    SceneKind, "scene" {
        CityStreet => "city_street", "city street", "City Street";
        Highway => "highway", "highway", "Highway";
        Tunnel => "tunnel", "tunnel", "Tunnel";
        GasStation => "gas_station", "gas station", "Gas Station";
        Residential => "residential", "residential", "Residential";
        ParkingLot => "parking_lot", "parking lot", "Parking Lot";
    }
}

attribute_enum! {
    TimeOfDay, "time_of_day" {
        Daytime => "daytime", "daytime", "Daytime";
        Night => "night", "night", "Night";
        DawnDusk => "dawn_dusk", "dawn dusk", "Dawn/Dusk";
    }
}

impl Weather {
    pub fn is_adverse(self) -> bool {
        self != Weather::Clear
    }

    /// Time of day implied by the weather when no metadata says otherwise.
    pub fn default_time_of_day(self) -> TimeOfDay {
        match self {
            Weather::Night => TimeOfDay::Night,
            _ => TimeOfDay::Daytime,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneAttributes {
    pub weather: Weather,
    pub scene: SceneKind,
    pub time_of_day: TimeOfDay,
    #[serde(default)]
    pub caption: String,
}

impl SceneAttributes {
    pub fn new(scene: SceneKind, weather: Weather, time_of_day: TimeOfDay) -> Self {
        Self { weather, scene, time_of_day, caption: String::new() }
    }

    /// Scene-context string such as `Tunnel, Rainy, Daytime`.
    pub fn context_string(&self) -> String {
        format!("{}, {}, {}", self.scene.title(), self.weather.title(), self.time_of_day.title())
    }
}

/// Mapping from class id to class name plus the ids treated as drivable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSchema {
    names: BTreeMap<u8, String>,
    drivable: BTreeSet<u8>,
}

const TRAIN_ID_NAMES: [&str; 19] = [
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic light",
    "traffic sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
];

impl Default for LabelSchema {
    /// 19-class driving-scene train-id table with 255 as void; road and
    /// sidewalk are drivable.
    fn default() -> Self {
        let mut names: BTreeMap<u8, String> =
            TRAIN_ID_NAMES.iter().enumerate().map(|(i, n)| (i as u8, n.to_string())).collect();
        names.insert(255, "void".to_string());
        Self { names, drivable: [0u8, 1].into_iter().collect() }
    }
}

impl LabelSchema {
    pub fn new(names: BTreeMap<u8, String>, drivable: BTreeSet<u8>) -> Result<Self, SceneError> {
        if let Some(&id) = drivable.iter().find(|id| !names.contains_key(id)) {
            return Err(SceneError::UnknownClassId(id));
        }
        Ok(Self { names, drivable })
    }

    /// Parses `id<TAB>name` lines and one `drivable:` line. Blank lines and
    /// `#` comments are skipped. Without a `drivable:` line the set is empty.
    pub fn parse(text: &str) -> Result<Self, SceneError> {
        let mut names = BTreeMap::new();
        let mut drivable = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |reason: String| SceneError::Schema { line: lineno + 1, reason };
            if let Some(rest) = trimmed.strip_prefix("drivable:") {
                for tok in rest.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
                    let id = tok.parse::<u8>().map_err(|_| err(format!("bad drivable id `{tok}`")))?;
                    drivable.insert(id);
                }
                continue;
            }
            let (id, name) = line.split_once('\t').ok_or_else(|| err("expected `id<TAB>name`".into()))?;
            let id = id.trim().parse::<u8>().map_err(|_| err(format!("bad class id `{}`", id.trim())))?;
            let name = name.trim();
            if name.is_empty() {
                return Err(err("empty class name".into()));
            }
            if names.insert(id, name.to_string()).is_some() {
                return Err(err(format!("duplicate class id {id}")));
            }
        }
        Self::new(names, drivable)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SceneError::Unreadable { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, name) in &self.names {
            out.push_str(&format!("{id}\t{name}\n"));
        }
        let ids: Vec<String> = self.drivable.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!("drivable: {}\n", ids.join(",")));
        out
    }

    pub fn contains(&self, id: u8) -> bool {
        self.names.contains_key(&id)
    }

    pub fn name(&self, id: u8) -> Option<&str> {
        self.names.get(&id).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<u8> {
        self.names.iter().find(|(_, n)| n.as_str() == name).map(|(id, _)| *id)
    }

    pub fn drivable_ids(&self) -> &BTreeSet<u8> {
        &self.drivable
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.names.keys().copied()
    }
}

/// Per-pixel class ids in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
    schema: LabelSchema,
}

impl SemanticMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>, schema: LabelSchema) -> Result<Self, SceneError> {
        if width == 0 || height == 0 {
            return Err(SceneError::ZeroArea);
        }
        if labels.len() != width * height {
            return Err(SceneError::LengthMismatch { expected: width * height, got: labels.len() });
        }
        let mut seen = [false; 256];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(id) = (0..256).find(|&i| seen[i] && !schema.contains(i as u8)) {
            return Err(SceneError::UnknownClassId(id as u8));
        }
        Ok(Self { width, height, labels, schema })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn label(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Reads an 8-bit grayscale image whose pixel values are class ids.
    pub fn load(path: &Path, schema: &LabelSchema) -> Result<Self, SceneError> {
        let unreadable =
            |e: &dyn fmt::Display| SceneError::Unreadable { path: path.display().to_string(), reason: e.to_string() };
        let img = image::ImageReader::open(path)
            .map_err(|e| unreadable(&e))?
            .with_guessed_format()
            .map_err(|e| unreadable(&e))?
            .decode()
            .map_err(|e| unreadable(&e))?;
        let image::DynamicImage::ImageLuma8(gray) = img else {
            return Err(SceneError::WrongPixelFormat(format!("{:?}", img.color())));
        };
        let (w, h) = gray.dimensions();
        Self::new(w as usize, h as usize, gray.into_raw(), schema.clone())
    }

    pub fn save(&self, path: &Path) -> Result<(), SceneError> {
        crate::imageio::write_gray8(path, self.width, self.height, &self.labels)
            .map_err(|e| SceneError::Write { path: path.display().to_string(), reason: e.to_string() })
    }

    /// Fraction of pixels whose id is in `ids`, counted by a plain scan.
    pub fn class_fraction(&self, ids: &BTreeSet<u8>) -> f64 {
        let n = self.labels.iter().filter(|l| ids.contains(l)).count();
        n as f64 / self.labels.len() as f64
    }
}

/// One bit per pixel marking membership in a region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    bits: BitVec,
    horizon_row: usize,
}

impl RegionMask {
    /// Builds a mask from a predicate; fails when no pixel is set.
    pub fn from_fn(width: usize, height: usize, mut inside: impl FnMut(usize, usize) -> bool) -> Result<Self, SceneError> {
        let mut bits = BitVec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(inside(x, y));
            }
        }
        Self::from_bits(width, height, bits)
    }

    pub fn from_bits(width: usize, height: usize, bits: BitVec) -> Result<Self, SceneError> {
        if bits.len() != width * height {
            return Err(SceneError::LengthMismatch { expected: width * height, got: bits.len() });
        }
        let first = bits.first_one().ok_or(SceneError::EmptyRegion)?;
        Ok(Self { width, height, horizon_row: first / width, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Topmost row that contains a region pixel.
    pub fn horizon_row(&self) -> usize {
        self.horizon_row
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / (self.width * self.height) as f64
    }

    pub fn bits(&self) -> &BitVec {
        &self.bits
    }

    /// Row-major indices of all set pixels.
    pub fn indices(&self) -> Vec<usize> {
        self.bits.iter_ones().collect()
    }

    /// Pixel-wise union; dimensions must agree.
    pub fn union(&self, other: &RegionMask) -> Option<RegionMask> {
        if self.width != other.width || self.height != other.height {
            return None;
        }
        let bits = self.bits.clone() | other.bits.clone();
        RegionMask::from_bits(self.width, self.height, bits).ok()
    }
}

/// Marks every pixel whose label is in `drivable_ids`.
pub fn extract_drivable_region(map: &SemanticMap, drivable_ids: &BTreeSet<u8>) -> Result<RegionMask, SceneError> {
    if drivable_ids.is_empty() {
        return Err(SceneError::NoDrivableIds);
    }
    if let Some(&id) = drivable_ids.iter().find(|id| !map.schema.contains(**id)) {
        return Err(SceneError::UnknownClassId(id));
    }
    let mut lut = [false; 256];
    for &id in drivable_ids {
        lut[id as usize] = true;
    }
    let bits: BitVec = map.labels.iter().map(|&l| lut[l as usize]).collect();
    RegionMask::from_bits(map.width, map.height, bits)
}
