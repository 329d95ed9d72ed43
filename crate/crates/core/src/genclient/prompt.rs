use serde::{Deserialize, Serialize};

use super::GenError;
use crate::scene::{SceneAttributes, SceneKind, TimeOfDay, Weather};

/// Text prompt together with the attributes it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub attributes: SceneAttributes,
}

/// `"<caption>, <scene> scene, <weather> weather, <time>"`; an empty
/// caption drops the leading clause.
pub fn build_prompt(caption: &str, attrs: &SceneAttributes) -> Prompt {
    let tail = format!("{} scene, {} weather, {}", attrs.scene.phrase(), attrs.weather.phrase(), attrs.time_of_day.phrase());
    let caption = caption.trim();
    let text = if caption.is_empty() { tail } else { format!("{caption}, {tail}") };
    Prompt { text, attributes: SceneAttributes { caption: caption.to_string(), ..attrs.clone() } }
}

/// Inverse of [`build_prompt`]. The caption may itself contain commas.
pub fn parse_prompt(text: &str) -> Result<SceneAttributes, GenError> {
    let bad = || GenError::InvalidRequest(format!("not a templated prompt: {text:?}"));
    let mut parts = text.rsplitn(4, ", ");
    let time = parts.next().and_then(TimeOfDay::from_phrase).ok_or_else(bad)?;
    let weather = parts.next().and_then(|s| s.strip_suffix(" weather")).and_then(Weather::from_phrase).ok_or_else(bad)?;
    let scene = parts.next().and_then(|s| s.strip_suffix(" scene")).and_then(SceneKind::from_phrase).ok_or_else(bad)?;
    let caption = parts.next().unwrap_or("").to_string();
    Ok(SceneAttributes { weather, scene, time_of_day: time, caption })
}
