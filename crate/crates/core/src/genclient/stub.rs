use std::time::Instant;

use super::{Capabilities, GenBackend, GenError, GenResult, InpaintRequest, SceneGenRequest};
use crate::compositor::{paste_object, CutoutBank, SceneImage};
use crate::hashing::keyed_hash64;
use crate::scene::Weather;

pub const STUB_BACKEND_ID: &str = "stub-v1";

const PALETTE: [[u8; 3]; 19] = [
    [128, 64, 128],
    [244, 35, 232],
    [70, 70, 70],
    [102, 102, 156],
    [190, 153, 153],
    [153, 153, 153],
    [250, 170, 30],
    [220, 220, 0],
    [107, 142, 35],
    [152, 251, 152],
    [70, 130, 180],
    [220, 20, 60],
    [255, 0, 0],
    [0, 0, 142],
    [0, 0, 70],
    [0, 60, 100],
    [0, 80, 100],
    [0, 0, 230],
    [119, 11, 32],
];

/// Display color of a class id; ids outside the table get a hashed color.
pub fn palette_color(id: u8) -> [u8; 3] {
    match PALETTE.get(id as usize) {
        Some(&c) => c,
        None if id == 255 => [0, 0, 0],
        None => {
            let k = keyed_hash64(0, &[id]);
            [k as u8, (k >> 8) as u8, (k >> 16) as u8]
        }
    }
}

/// Per-weather `(gain, offset)` giving each condition its own look.
fn weather_tone(w: Weather) -> ([f32; 3], [f32; 3]) {
    match w {
        Weather::Clear => ([1.0, 1.0, 1.0], [0.0, 0.0, 0.0]),
        Weather::Rain => ([0.7, 0.75, 0.85], [10.0, 12.0, 20.0]),
        Weather::Fog => ([0.45, 0.45, 0.5], [110.0, 110.0, 115.0]),
        Weather::Snow => ([0.6, 0.62, 0.65], [90.0, 92.0, 100.0]),
        Weather::Cloudy => ([0.8, 0.8, 0.85], [15.0, 15.0, 20.0]),
        Weather::Night => ([0.3, 0.3, 0.38], [5.0, 5.0, 12.0]),
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The stub's scene synthesis: palette colorization toned by the prompt's
/// weather, with per-pixel jitter keyed by the request seed.
pub fn render_scene(req: &SceneGenRequest) -> SceneImage {
    let map = &req.semantic_map;
    let (gain, offset) = weather_tone(req.prompt.attributes.weather);
    let mut rgb = Vec::with_capacity(3 * map.width() * map.height());
    for (i, &id) in map.labels().iter().enumerate() {
        let c = palette_color(id);
        let n = splitmix64(req.seed ^ splitmix64(i as u64));
        let jitter = (n % 13) as f32 - 6.0;
        for ch in 0..3 {
            rgb.push((c[ch] as f32 * gain[ch] + offset[ch] + jitter).round().clamp(0.0, 255.0) as u8);
        }
    }
    SceneImage::new(map.width(), map.height(), rgb).expect("sized from the map")
}

/// Deterministic local backend. Scene synthesis is a palette colorization
/// of the map toned by weather with seeded texture; inpainting pastes a
/// cutout from the bank chosen by concept.
#[derive(Debug, Clone)]
pub struct StubBackend {
    bank: CutoutBank,
    capabilities: Capabilities,
    pub harmonize: bool,
}

impl Default for StubBackend {
    fn default() -> Self {
        Self::new(CutoutBank::builtin())
    }
}

impl StubBackend {
    pub fn new(bank: CutoutBank) -> Self {
        let capabilities = Capabilities {
            backend_id: STUB_BACKEND_ID.into(),
            max_width: 8192,
            max_height: 8192,
            endpoints: vec!["/v1/scene".into(), "/v1/inpaint".into()],
        };
        Self { bank, capabilities, harmonize: true }
    }

    pub fn bank(&self) -> &CutoutBank {
        &self.bank
    }
}

impl GenBackend for StubBackend {
    fn backend_id(&self) -> &str {
        STUB_BACKEND_ID
    }

    fn capabilities(&self) -> &Capabilities {
        &self.capabilities
    }

    fn generate_scene(&self, req: &SceneGenRequest) -> Result<GenResult, GenError> {
        let t = Instant::now();
        let image = render_scene(req);
        Ok(GenResult { image, mask: None, backend_id: STUB_BACKEND_ID.into(), latency: t.elapsed() })
    }

    fn inpaint(&self, req: &InpaintRequest) -> Result<GenResult, GenError> {
        let t = Instant::now();
        let cutout = self.bank.pick_or_draw(&req.concept, req.seed);
        let r = paste_object(&req.image, &cutout, &req.bbox, self.harmonize).map_err(|e| GenError::InvalidRequest(e.to_string()))?;
        Ok(GenResult { image: r.image, mask: Some(r.mask), backend_id: STUB_BACKEND_ID.into(), latency: t.elapsed() })
    }
}
