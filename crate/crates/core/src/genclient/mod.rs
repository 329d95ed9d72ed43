//! Prompt construction and the client side of the generation service:
//! scene synthesis from semantic maps and box-conditioned inpainting.

mod gate;
mod http;
pub mod mock;
mod prompt;
mod protocol;
mod stub;
mod validate;

use std::time::Duration;

use thiserror::Error;

use crate::compositor::{AnomalyMask, SceneImage};
use crate::placer::PseudoBox;
use crate::scene::SemanticMap;

pub use gate::{AdmissionGate, Permit};
pub use http::HttpBackend;
pub use prompt::{build_prompt, parse_prompt, Prompt};
pub use protocol::{Capabilities, ErrorReply, GenReply, InpaintBody, SceneBody, WireBox};
pub use stub::{palette_color, render_scene, StubBackend, STUB_BACKEND_ID};
pub use validate::{check_inpaint_reply, check_scene_reply, difference_mask, ValidationConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend error {code}: {message}")]
    Backend { code: String, message: String },
    #[error("reply is {got:?}, expected {expected:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("{count} pixels changed outside the allowed region, first at {first:?}")]
    EditLeakage { count: usize, first: (usize, usize) },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed reply: {0}")]
    Decode(String),
}

impl GenError {
    /// Failures worth retrying with the same idempotency key.
    pub fn is_transient(&self) -> bool {
        matches!(self, GenError::Timeout | GenError::Transport(_))
    }
}

#[derive(Debug, Clone)]
pub struct SceneGenRequest {
    pub semantic_map: SemanticMap,
    pub prompt: Prompt,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct InpaintRequest {
    pub image: SceneImage,
    pub bbox: PseudoBox<f64>,
    pub scene_context: String,
    pub concept: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenResult {
    pub image: SceneImage,
    pub mask: Option<AnomalyMask>,
    pub backend_id: String,
    pub latency: Duration,
}

/// Retry and timeout settings for remote calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub factor: f64,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay: Duration::from_millis(500), factor: 2.0, timeout: Duration::from_secs(120) }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(attempt as i32))
    }
}

/// A generation service. Implementations return raw replies; callers go
/// through [`request_scene`] and [`request_inpaint`], which validate them.
pub trait GenBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn capabilities(&self) -> &Capabilities;
    fn generate_scene(&self, req: &SceneGenRequest) -> Result<GenResult, GenError>;
    fn inpaint(&self, req: &InpaintRequest) -> Result<GenResult, GenError>;
}

fn check_dims(caps: &Capabilities, w: usize, h: usize) -> Result<(), GenError> {
    if w == 0 || h == 0 || w > caps.max_width || h > caps.max_height {
        return Err(GenError::InvalidRequest(format!("{w}x{h} exceeds backend limit {}x{}", caps.max_width, caps.max_height)));
    }
    Ok(())
}

/// Multi-weather scene synthesis conditioned on a semantic map and prompt.
pub fn request_scene(backend: &dyn GenBackend, req: &SceneGenRequest) -> Result<GenResult, GenError> {
    let (w, h) = (req.semantic_map.width(), req.semantic_map.height());
    check_dims(backend.capabilities(), w, h)?;
    if req.prompt.text.trim().is_empty() {
        return Err(GenError::InvalidRequest("empty prompt".into()));
    }
    let reply = backend.generate_scene(req)?;
    check_scene_reply(w, h, reply)
}

/// Box-conditioned anomaly inpainting with leakage checks and mask
/// fallback.
pub fn request_inpaint(backend: &dyn GenBackend, req: &InpaintRequest, cfg: &ValidationConfig) -> Result<GenResult, GenError> {
    check_dims(backend.capabilities(), req.image.width(), req.image.height())?;
    if req.concept.trim().is_empty() {
        return Err(GenError::InvalidRequest("empty concept".into()));
    }
    if !req.bbox.pixel_rect().inside(req.image.width(), req.image.height()) {
        return Err(GenError::InvalidRequest(format!("box {:?} outside image", req.bbox)));
    }
    let reply = backend.inpaint(req)?;
    check_inpaint_reply(req, reply, cfg)
}
