use std::path::Path;

use rayon::prelude::*;

use super::{write_atomic, PipelineError};
use crate::compositor::{pixel_fraction, refine_mask, AnomalyMask, RefineConfig};
use crate::dataset::{read_manifest, write_manifest, ManifestEntry, MANIFEST_FILE};

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// Refines every mask of a manifest and writes the refined dataset under
/// `out` with recomputed fractions. Images are copied unless `out` is the
/// manifest's own directory, in which case masks are replaced in place.
pub fn refine_dataset(manifest: &Path, out: &Path, cfg: &RefineConfig) -> Result<Vec<ManifestEntry>, PipelineError> {
    let root = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let entries = read_manifest(manifest)?;
    std::fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
    let in_place = same_dir(&root, out);
    let refined: Vec<ManifestEntry> = entries
        .par_iter()
        .map(|e| {
            let src = e.mask_abs(&root);
            let mask = AnomalyMask::load(&src).map_err(|err| PipelineError::io(&src, err))?;
            let r = refine_mask(&mask, cfg);
            write_atomic(&e.mask_abs(out), &r.to_png())?;
            if !in_place {
                let (from, to) = (e.image_abs(&root), e.image_abs(out));
                if let Some(d) = to.parent() {
                    std::fs::create_dir_all(d).map_err(|err| PipelineError::io(d, err))?;
                }
                std::fs::copy(&from, &to).map_err(|err| PipelineError::io(&from, err))?;
            }
            Ok(ManifestEntry { pixel_fraction: pixel_fraction(&r)?, refined: true, ..e.clone() })
        })
        .collect::<Result<_, PipelineError>>()?;
    write_manifest(&out.join(MANIFEST_FILE), &refined)?;
    Ok(refined)
}
