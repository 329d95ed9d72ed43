use serde::Serialize;

use super::{BoxSet, PlacerError};
use crate::metrics::{pearson, StatsError};
use crate::scene::RegionMask;

/// How plausible a set of placements is with respect to the ground region
/// and the depth-size relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlacementReport {
    pub ground_contact_fraction: f64,
    /// Pearson correlation between ground-contact row and box height.
    pub depth_size_pearson: f64,
    pub out_of_region_count: usize,
}

pub fn placement_report(set: &BoxSet, region: &RegionMask) -> Result<PlacementReport, PlacerError> {
    if (set.image_w, set.image_h) != (region.width(), region.height()) {
        return Err(PlacerError::DimensionMismatch {
            left: (set.image_w, set.image_h),
            right: (region.width(), region.height()),
        });
    }
    if set.boxes.len() < 2 {
        return Err(PlacerError::Stats(StatsError::TooFewSamples(set.boxes.len())));
    }
    let inside = set
        .boxes
        .iter()
        .filter(|b| {
            let (x, y) = b.bottom_center_pixel();
            x >= 0 && y >= 0 && region.contains(x as usize, y as usize)
        })
        .count();
    let rows: Vec<f64> = set.boxes.iter().map(|b| b.anchor_row() as f64).collect();
    let heights: Vec<f64> = set.boxes.iter().map(|b| b.h).collect();
    let r = pearson(&rows, &heights)?;
    Ok(PlacementReport {
        ground_contact_fraction: inside as f64 / set.boxes.len() as f64,
        depth_size_pearson: r,
        out_of_region_count: set.boxes.len() - inside,
    })
}
