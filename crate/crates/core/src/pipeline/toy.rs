use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{write_scene_index, PipelineError, SceneRecord};
use crate::hashing::derive_seed;
use crate::scene::{LabelSchema, SceneAttributes, SceneKind, SemanticMap, TimeOfDay, Weather};

const ROAD: u8 = 0;
const SIDEWALK: u8 = 1;
const BUILDING: u8 = 2;
const WALL: u8 = 3;
const POLE: u8 = 5;
const VEGETATION: u8 = 8;
const TERRAIN: u8 = 9;
const SKY: u8 = 10;
const CAR: u8 = 13;
const VOID: u8 = 255;

/// Geometry of the synthetic driving scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub width: usize,
    pub height: usize,
    /// Horizon row range as fractions of the height.
    pub horizon: (f64, f64),
    /// Ego-vehicle hood height as a fraction of the height.
    pub hood: f64,
    /// Road half-width at the bottom row as a fraction of the width.
    pub road_half_width: (f64, f64),
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self { width: 1024, height: 512, horizon: (0.42, 0.52), hood: 0.14, road_half_width: (0.26, 0.42) }
    }
}

/// Attributes of toy scene `index`: scene×weather cells cycle so any 36
/// consecutive indices cover all of them.
pub fn toy_attributes(index: usize) -> SceneAttributes {
    let cell = index % 36;
    let (scene, weather) = (SceneKind::ALL[cell / 6], Weather::ALL[cell % 6]);
    let time_of_day = match weather.default_time_of_day() {
        TimeOfDay::Daytime if (index / 36) % 4 == 3 => TimeOfDay::DawnDusk,
        t => t,
    };
    let caption = match scene {
        SceneKind::CityStreet => "a street lined with buildings",
        SceneKind::Highway => "a multi-lane highway through open land",
        SceneKind::Tunnel => "a road inside a tunnel",
        SceneKind::GasStation => "a forecourt next to a gas station",
        SceneKind::Residential => "a quiet road between houses and trees",
        SceneKind::ParkingLot => "an open parking lot with parked cars",
    };
    SceneAttributes { caption: caption.into(), ..SceneAttributes::new(scene, weather, time_of_day) }
}

/// Label map of toy scene `index` under the default schema.
pub fn toy_map(cfg: &ToyConfig, index: usize, seed: u64) -> SemanticMap {
    let attrs = toy_attributes(index);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("toy/{index}")));
    let (w, h) = (cfg.width, cfg.height);
    let (wf, hf) = (w as f64, h as f64);
    let horizon = (rng.random_range(cfg.horizon.0..=cfg.horizon.1) * hf).round() as usize;
    let hood_top = h - ((cfg.hood * hf).round() as usize).min(h - horizon - 1);
    let vx = wf * rng.random_range(0.42..0.58);
    let half_bottom = wf * rng.random_range(cfg.road_half_width.0..=cfg.road_half_width.1);
    let parking = attrs.scene == SceneKind::ParkingLot;
    let sidewalk = matches!(attrs.scene, SceneKind::CityStreet | SceneKind::Residential | SceneKind::GasStation);
    let skyline: Vec<usize> = {
        let mut v = vec![0; w];
        let mut x = 0;
        while x < w {
            let run = rng.random_range(w / 32..w / 8).max(1);
            let top = match attrs.scene {
                SceneKind::Highway => horizon.saturating_sub(rng.random_range(0..h / 20 + 1)),
                _ => horizon.saturating_sub(rng.random_range(h / 12..h / 4 + 1)),
            };
            v[x..(x + run).min(w)].fill(top);
            x += run;
        }
        v
    };
    let side_class = match attrs.scene {
        SceneKind::CityStreet | SceneKind::GasStation => BUILDING,
        SceneKind::Tunnel => WALL,
        _ => VEGETATION,
    };

    let mut labels = vec![SKY; w * h];
    for y in 0..h {
        let t = if y >= horizon { (y - horizon) as f64 / (hf - horizon as f64) } else { 0.0 };
        let half = if parking { wf * (0.2 + 0.8 * t) } else { 2.0 + (half_bottom - 2.0) * t };
        let walk = if sidewalk { 1.0 + half * 0.25 } else { 0.0 };
        for x in 0..w {
            let dx = (x as f64 + 0.5 - vx).abs();
            labels[y * w + x] = if y >= hood_top {
                VOID
            } else if y >= horizon {
                if dx < half {
                    ROAD
                } else if dx < half + walk {
                    SIDEWALK
                } else {
                    TERRAIN
                }
            } else if attrs.scene == SceneKind::Tunnel && y < horizon / 2 {
                WALL
            } else if y >= skyline[x] {
                side_class
            } else {
                SKY
            };
        }
    }
    if attrs.scene == SceneKind::GasStation {
        let px = (vx + half_bottom * 0.5) as usize;
        for y in horizon.saturating_sub(h / 6)..horizon + (h - horizon) / 3 {
            for x in px..(px + w / 128 + 1).min(w) {
                labels[y * w + x] = POLE;
            }
        }
    }
    let cars = if parking { 6 } else { rng.random_range(0..3) };
    for _ in 0..cars {
        let t = rng.random_range(0.05..0.5);
        let y1 = horizon + ((hf - horizon as f64) * t) as usize;
        let ch = (8.0 + 60.0 * t) as usize;
        let cw = ch * 2;
        let cx = rng.random_range(0..w.saturating_sub(cw).max(1));
        for y in y1.saturating_sub(ch)..y1.min(hood_top) {
            for x in cx..(cx + cw).min(w) {
                labels[y * w + x] = CAR;
            }
        }
    }
    SemanticMap::new(w, h, labels, LabelSchema::default()).expect("toy ids are in the default schema")
}

pub fn toy_id(index: usize) -> String {
    format!("toy_{index:06}")
}

/// Writes `count` toy maps, their scene index and the default schema into
/// `dir`.
pub fn write_toy_scenes(dir: &Path, cfg: &ToyConfig, count: usize, seed: u64) -> Result<Vec<SceneRecord>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let records: Vec<SceneRecord> = (0..count)
        .map(|i| SceneRecord { map: format!("{}.png", toy_id(i)), attributes: toy_attributes(i) })
        .collect();
    use rayon::prelude::*;
    records.par_iter().enumerate().try_for_each(|(i, r)| {
        let path = dir.join(&r.map);
        toy_map(cfg, i, seed).save(&path).map_err(|e| PipelineError::io(&path, e))
    })?;
    let schema = dir.join(super::SCHEMA_FILE);
    std::fs::write(&schema, LabelSchema::default().to_text()).map_err(|e| PipelineError::io(&schema, e))?;
    write_scene_index(dir, &records)?;
    Ok(records)
}
