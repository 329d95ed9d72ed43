//! JSON bodies exchanged with the generation service.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use image::DynamicImage;
use serde::{Deserialize, Serialize};

use super::{GenError, GenResult, InpaintRequest, SceneGenRequest};
use crate::compositor::{AnomalyMask, SceneImage};
use crate::hashing::sha256_hex;
use crate::imageio;
use crate::scene::{LabelSchema, SemanticMap};

pub const SCENE_PATH: &str = "/v1/scene";
pub const INPAINT_PATH: &str = "/v1/inpaint";
pub const CAPABILITIES_PATH: &str = "/v1/capabilities";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneBody {
    pub semantic_map_png_b64: String,
    pub prompt: String,
    pub seed: u64,
    pub idempotency_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintBody {
    pub image_png_b64: String,
    #[serde(rename = "box")]
    pub bbox: WireBox,
    pub concept: String,
    pub scene_context: String,
    pub seed: u64,
    pub idempotency_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenReply {
    pub image_png_b64: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_png_b64: Option<String>,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub backend_id: String,
    pub max_width: usize,
    pub max_height: usize,
    pub endpoints: Vec<String>,
}

fn decode_err(e: impl std::fmt::Display) -> GenError {
    GenError::Decode(e.to_string())
}

fn png_b64(w: usize, h: usize, data: &[u8], color: image::ExtendedColorType) -> String {
    B64.encode(imageio::encode_png(w, h, data, color).expect("in-memory PNG encode"))
}

fn decode_png_b64(s: &str) -> Result<DynamicImage, GenError> {
    let bytes = B64.decode(s).map_err(decode_err)?;
    imageio::decode_png(&bytes).map_err(decode_err)
}

impl SceneBody {
    pub fn from_request(req: &SceneGenRequest) -> Self {
        let m = &req.semantic_map;
        let mut body = SceneBody {
            semantic_map_png_b64: png_b64(m.width(), m.height(), m.labels(), image::ExtendedColorType::L8),
            prompt: req.prompt.text.clone(),
            seed: req.seed,
            idempotency_key: String::new(),
        };
        body.idempotency_key = sha256_hex(serde_json::to_string(&body).expect("serializable").as_bytes());
        body
    }

    pub fn semantic_map(&self, schema: &LabelSchema) -> Result<SemanticMap, GenError> {
        let DynamicImage::ImageLuma8(g) = decode_png_b64(&self.semantic_map_png_b64)? else {
            return Err(GenError::Decode("semantic map must be 8-bit grayscale".into()));
        };
        let (w, h) = g.dimensions();
        SemanticMap::new(w as usize, h as usize, g.into_raw(), schema.clone()).map_err(decode_err)
    }
}

impl InpaintBody {
    pub fn from_request(req: &InpaintRequest) -> Self {
        let img = &req.image;
        let b = &req.bbox;
        let mut body = InpaintBody {
            image_png_b64: png_b64(img.width(), img.height(), img.rgb(), image::ExtendedColorType::Rgb8),
            bbox: WireBox { cx: b.cx, cy: b.cy, w: b.w, h: b.h },
            concept: req.concept.clone(),
            scene_context: req.scene_context.clone(),
            seed: req.seed,
            idempotency_key: String::new(),
        };
        body.idempotency_key = sha256_hex(serde_json::to_string(&body).expect("serializable").as_bytes());
        body
    }

    pub fn to_request(&self) -> Result<InpaintRequest, GenError> {
        Ok(InpaintRequest {
            image: SceneImage::from_dynamic(decode_png_b64(&self.image_png_b64)?),
            bbox: crate::placer::PseudoBox::new(self.bbox.cx, self.bbox.cy, self.bbox.w, self.bbox.h),
            scene_context: self.scene_context.clone(),
            concept: self.concept.clone(),
            seed: self.seed,
        })
    }
}

impl GenReply {
    pub fn from_result(r: &GenResult) -> Self {
        GenReply {
            image_png_b64: png_b64(r.image.width(), r.image.height(), r.image.rgb(), image::ExtendedColorType::Rgb8),
            mask_png_b64: r.mask.as_ref().map(|m| png_b64(m.width(), m.height(), m.values(), image::ExtendedColorType::L8)),
            backend_id: r.backend_id.clone(),
        }
    }

    pub fn into_result(self, latency: std::time::Duration) -> Result<GenResult, GenError> {
        let image = SceneImage::from_dynamic(decode_png_b64(&self.image_png_b64)?);
        let mask = match &self.mask_png_b64 {
            None => None,
            Some(s) => {
                let DynamicImage::ImageLuma8(g) = decode_png_b64(s)? else {
                    return Err(GenError::Decode("mask must be 8-bit grayscale".into()));
                };
                let (w, h) = g.dimensions();
                Some(AnomalyMask::new(w as usize, h as usize, g.into_raw()).map_err(decode_err)?)
            }
        };
        Ok(GenResult { image, mask, backend_id: self.backend_id, latency })
    }
}
