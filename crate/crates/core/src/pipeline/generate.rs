use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use log::{error, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{boxes_for_map, load_scenes, write_atomic, Journal, PipelineError, SceneRecord, BOXES_EXT};
use crate::compositor::{paste_object, pixel_fraction, refine_mask, AnomalyMask, CutoutBank, RefineConfig, SceneImage, BUILTIN_CONCEPTS};
use crate::dataset::{read_manifest, write_manifest, ManifestEntry, Split, MANIFEST_FILE};
use crate::genclient::{build_prompt, render_scene, request_inpaint, request_scene, GenBackend, InpaintRequest, SceneGenRequest, ValidationConfig};
use crate::hashing::{derive_seed, sha256_hex};
use crate::placer::{BoxSet, SamplerConfig};
use crate::scene::{LabelSchema, SceneAttributes, SemanticMap};

/// Fingerprint of the settings an output directory was produced with.
pub const RUN_FILE: &str = "run.json";

/// Where scene images and anomalies come from.
pub enum Engine<'a> {
    /// Local copy-paste compositing from a cutout bank; scenes without an
    /// input image are rendered the way the stub backend renders them.
    Compose { bank: &'a CutoutBank },
    /// A generation service behind the wire contract.
    Service { backend: &'a dyn GenBackend, validation: ValidationConfig },
}

impl Engine<'_> {
    fn describe(&self) -> String {
        match self {
            Engine::Compose { .. } => "compose".into(),
            Engine::Service { backend, validation } => format!("service:{} {:?}", backend.backend_id(), validation),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub sampler: SamplerConfig,
    /// Inclusive range of anomalies inserted per image.
    pub anomalies: (usize, usize),
    pub seed: u64,
    pub harmonize: bool,
    /// Mask refinement applied before the fraction is recorded.
    pub refine: Option<RefineConfig>,
    pub concepts: Vec<String>,
    pub split: Split,
    /// Stop after this many new images, leaving the journal for a resume.
    pub limit: Option<usize>,
    /// Worker threads; 0 uses every logical core.
    pub jobs: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            anomalies: (1, 3),
            seed: 0,
            harmonize: true,
            refine: Some(RefineConfig::default()),
            concepts: BUILTIN_CONCEPTS.iter().map(|c| c.to_string()).collect(),
            split: Split::Unassigned,
            limit: None,
            jobs: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.anomalies.0 > self.anomalies.1 {
            return Err(PipelineError::Config(format!("anomaly range {}:{} is inverted", self.anomalies.0, self.anomalies.1)));
        }
        if self.concepts.iter().all(|c| c.trim().is_empty()) {
            return Err(PipelineError::Config("no anomaly concepts".into()));
        }
        self.sampler.validate(usize::MAX / 4).map_err(|e| PipelineError::Config(e.to_string()))
    }

    fn fingerprint(&self, engine: &Engine<'_>) -> String {
        let cfg = Self { limit: None, jobs: 0, ..self.clone() };
        sha256_hex(format!("{} {:?}", engine.describe(), cfg).as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub generated: usize,
    /// Images found finished from an earlier run.
    pub resumed: usize,
    /// Images left for a later run because of `limit`.
    pub remaining: usize,
    /// Lines in the written manifest.
    pub entries: usize,
}

/// A synthesized image with its union anomaly mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub image: SceneImage,
    pub mask: AnomalyMask,
    pub categories: Vec<String>,
    pub refined: bool,
}

/// One image: the scene (from `background` or the engine), then one to
/// several anomalies at boxes drawn from `boxes`, then optional
/// refinement. A pure function of its inputs for deterministic engines.
pub fn synthesize(
    engine: &Engine<'_>,
    map: &SemanticMap,
    attrs: &SceneAttributes,
    stem: &str,
    boxes: &BoxSet,
    background: Option<SceneImage>,
    cfg: &GenerationConfig,
) -> Result<Synthesized, PipelineError> {
    let (w, h) = (map.width(), map.height());
    if (boxes.image_w, boxes.image_h) != (w, h) {
        return Err(PipelineError::Data(format!("{stem}: boxes are for {}x{}, map is {w}x{h}", boxes.image_w, boxes.image_h)));
    }
    let mut image = match background {
        Some(img) if (img.width(), img.height()) != (w, h) => {
            return Err(PipelineError::Data(format!("{stem}: image is {}x{}, map is {w}x{h}", img.width(), img.height())))
        }
        Some(img) => img,
        None => {
            let req = SceneGenRequest {
                semantic_map: map.clone(),
                prompt: build_prompt(&attrs.caption, attrs),
                seed: derive_seed(cfg.seed, &format!("scene/{stem}")),
            };
            match engine {
                Engine::Compose { .. } => render_scene(&req),
                Engine::Service { backend, .. } => {
                    request_scene(*backend, &req)
                        .map_err(|source| {
                            error!("{stem}: scene request failed ({w}x{h}, prompt {:?}): {source}", req.prompt.text);
                            PipelineError::Backend { context: format!("{stem}: scene"), source }
                        })?
                        .image
                }
            }
        }
    };

    let concepts: Vec<&str> = cfg.concepts.iter().map(String::as_str).filter(|c| !c.trim().is_empty()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("plan/{stem}")));
    let k = rng.random_range(cfg.anomalies.0..=cfg.anomalies.1).min(boxes.boxes.len());
    let picks = rand::seq::index::sample(&mut rng, boxes.boxes.len(), k).into_vec();
    let mut mask = AnomalyMask::zeros(w, h);
    let mut categories = Vec::with_capacity(k);
    for (j, idx) in picks.into_iter().enumerate() {
        let concept = concepts[rng.random_range(0..concepts.len())];
        let bbox = boxes.boxes[idx];
        let seed = derive_seed(cfg.seed, &format!("anomaly/{stem}/{j}"));
        let (img, m) = match engine {
            Engine::Compose { bank } => {
                let r = paste_object(&image, &bank.pick_or_draw(concept, seed), &bbox, cfg.harmonize)?;
                (r.image, r.mask)
            }
            Engine::Service { backend, validation } => {
                let req = InpaintRequest { image, bbox, scene_context: attrs.context_string(), concept: concept.into(), seed };
                let r = request_inpaint(*backend, &req, validation).map_err(|source| {
                    error!("{stem}: inpaint request failed (box {idx} {:?}, concept {concept:?}, seed {seed}): {source}", bbox);
                    PipelineError::Backend { context: format!("{stem}: inpaint box {idx}"), source }
                })?;
                (r.image, r.mask.expect("validated replies carry a mask"))
            }
        };
        image = img;
        mask.union_with(&m);
        categories.push(concept.to_string());
    }
    let refined = cfg.refine.is_some();
    if let Some(rc) = &cfg.refine {
        mask = refine_mask(&mask, rc);
    }
    Ok(Synthesized { image, mask, categories, refined })
}

/// Inputs of a generation run.
#[derive(Debug, Clone, Copy)]
pub struct GenerationInputs<'a> {
    pub maps: &'a Path,
    pub schema: Option<&'a LabelSchema>,
    /// Scene images named after the maps; rendered or requested when absent.
    pub images: Option<&'a Path>,
    /// Box sets named `<stem>.boxes`; sampled on the fly when absent.
    pub boxes: Option<&'a Path>,
}

fn process(
    inputs: &GenerationInputs<'_>,
    schema: &LabelSchema,
    rec: &SceneRecord,
    engine: &Engine<'_>,
    cfg: &GenerationConfig,
    out: &Path,
) -> Result<ManifestEntry, PipelineError> {
    let stem = rec.stem();
    let map = SemanticMap::load(&inputs.maps.join(&rec.map), schema)?;
    let boxes = match inputs.boxes {
        Some(dir) => BoxSet::load(&dir.join(format!("{stem}.{BOXES_EXT}")))?,
        None => boxes_for_map(&map, &cfg.sampler, cfg.seed, stem)?,
    };
    let background = inputs.images.map(|d| SceneImage::load(&d.join(&rec.map))).transpose()?;
    let s = synthesize(engine, &map, &rec.attributes, stem, &boxes, background, cfg)?;
    let a = &rec.attributes;
    let rel = format!("{}/{}/{}/{stem}", cfg.split.ident(), a.scene.ident(), a.weather.ident());
    let entry = ManifestEntry {
        image_path: format!("{rel}.png"),
        mask_path: format!("{rel}_mask.png"),
        scene: a.scene,
        weather: a.weather,
        time_of_day: a.time_of_day,
        categories: s.categories,
        pixel_fraction: pixel_fraction(&s.mask)?,
        split: cfg.split,
        refined: s.refined,
    };
    write_atomic(&entry.image_abs(out), &s.image.to_png())?;
    write_atomic(&entry.mask_abs(out), &s.mask.to_png())?;
    Ok(entry)
}

/// Generates every scene of `inputs.maps` into `out` as
/// `<split>/<scene>/<weather>/<stem>.png` plus mask, and writes the
/// manifest.
///
/// Finished images are journaled, so an interrupted or `limit`ed run picks
/// up where it stopped and the manifest never holds an image twice. A
/// directory produced with different settings is refused.
pub fn run_generation(
    inputs: &GenerationInputs<'_>,
    engine: &Engine<'_>,
    cfg: &GenerationConfig,
    out: &Path,
) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let (schema, records) = load_scenes(inputs.maps, inputs.schema)?;
    std::fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
    let run_path = out.join(RUN_FILE);
    let fingerprint = cfg.fingerprint(engine);
    if run_path.is_file() {
        let stored = std::fs::read_to_string(&run_path).map_err(|e| PipelineError::io(&run_path, e))?;
        if stored.trim() != fingerprint {
            return Err(PipelineError::Config(format!("{} was produced with different settings", out.display())));
        }
    } else {
        write_atomic(&run_path, format!("{fingerprint}\n").as_bytes())?;
    }

    let (journal, mut done) = Journal::open(out)?;
    let manifest_path = out.join(MANIFEST_FILE);
    if manifest_path.is_file() {
        for e in read_manifest(&manifest_path)? {
            if e.image_abs(out).is_file() && e.mask_abs(out).is_file() {
                done.entry(e.image_path.clone()).or_insert(e);
            }
        }
    }
    let finished = |r: &SceneRecord| {
        let a = &r.attributes;
        done.contains_key(&format!("{}/{}/{}/{}.png", cfg.split.ident(), a.scene.ident(), a.weather.ident(), r.stem()))
    };
    let pending: Vec<&SceneRecord> = records.iter().filter(|r| !finished(r)).collect();
    let resumed = records.len() - pending.len();
    let take = cfg.limit.unwrap_or(usize::MAX).min(pending.len());
    info!("{} scenes: {resumed} already done, generating {take}", records.len());

    let fresh = Mutex::new(Vec::new());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build().map_err(|e| PipelineError::Config(e.to_string()))?;
    let result = pool.install(|| {
        pending[..take].par_iter().try_for_each(|rec| {
            let entry = process(inputs, &schema, rec, engine, cfg, out)?;
            journal.record(&entry)?;
            fresh.lock().unwrap_or_else(|p| p.into_inner()).push(entry);
            Ok::<_, PipelineError>(())
        })
    });
    let fresh = fresh.into_inner().unwrap_or_else(|p| p.into_inner());
    let generated = fresh.len();
    let mut all: BTreeMap<String, ManifestEntry> = done;
    all.extend(fresh.into_iter().map(|e| (e.image_path.clone(), e)));
    let entries: Vec<ManifestEntry> = all.into_values().collect();
    write_manifest(&manifest_path, &entries)?;
    result?;
    let remaining = pending.len() - take;
    if remaining == 0 {
        let jp = journal.path().to_path_buf();
        drop(journal);
        std::fs::remove_file(&jp).map_err(|e| PipelineError::io(&jp, e))?;
    }
    Ok(RunSummary { generated, resumed, remaining, entries: entries.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genclient::StubBackend;
    use crate::pipeline::{write_toy_scenes, ToyConfig, JOURNAL_FILE};

    fn toy(dir: &Path, n: usize) {
        write_toy_scenes(dir, &ToyConfig { width: 192, height: 96, ..ToyConfig::default() }, n, 11).unwrap();
    }

    fn tree(dir: &Path) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.insert(p.strip_prefix(dir).unwrap().display().to_string(), sha256_hex(&std::fs::read(&p).unwrap()));
                }
            }
        }
        out
    }

    #[test]
    fn stub_service_matches_compose() {
        let dir = tempfile::tempdir().unwrap();
        toy(&dir.path().join("maps"), 6);
        let inputs = GenerationInputs { maps: &dir.path().join("maps"), schema: None, images: None, boxes: None };
        let cfg = GenerationConfig { seed: 3, ..GenerationConfig::default() };
        let bank = CutoutBank::builtin();
        let stub = StubBackend::new(bank.clone());
        let a = run_generation(&inputs, &Engine::Compose { bank: &bank }, &cfg, &dir.path().join("a")).unwrap();
        let svc = Engine::Service { backend: &stub, validation: ValidationConfig::default() };
        run_generation(&inputs, &svc, &cfg, &dir.path().join("b")).unwrap();
        assert_eq!(a, RunSummary { generated: 6, resumed: 0, remaining: 0, entries: 6 });
        let (mut ta, mut tb) = (tree(&dir.path().join("a")), tree(&dir.path().join("b")));
        ta.remove(RUN_FILE);
        tb.remove(RUN_FILE);
        assert_eq!(ta, tb);
        let es = read_manifest(&dir.path().join("a").join(MANIFEST_FILE)).unwrap();
        assert!(es.iter().all(|e| e.refined && e.pixel_fraction > 0.0 && (1..=3).contains(&e.categories.len())));
    }

    #[test]
    fn limited_runs_resume_without_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        toy(&dir.path().join("maps"), 7);
        let inputs = GenerationInputs { maps: &dir.path().join("maps"), schema: None, images: None, boxes: None };
        let bank = CutoutBank::builtin();
        let engine = Engine::Compose { bank: &bank };
        let full = GenerationConfig { jobs: 1, ..GenerationConfig::default() };
        run_generation(&inputs, &engine, &full, &dir.path().join("once")).unwrap();

        let out = dir.path().join("parts");
        let part = GenerationConfig { limit: Some(3), jobs: 3, ..full.clone() };
        let s1 = run_generation(&inputs, &engine, &part, &out).unwrap();
        assert_eq!((s1.generated, s1.remaining, s1.entries), (3, 4, 3));
        assert!(out.join(JOURNAL_FILE).is_file());
        let s2 = run_generation(&inputs, &engine, &part, &out).unwrap();
        assert_eq!((s2.generated, s2.resumed, s2.remaining), (3, 3, 1));
        let s3 = run_generation(&inputs, &engine, &full, &out).unwrap();
        assert_eq!((s3.generated, s3.resumed, s3.remaining, s3.entries), (1, 6, 0, 7));
        assert!(!out.join(JOURNAL_FILE).exists());
        let again = run_generation(&inputs, &engine, &full, &out).unwrap();
        assert_eq!((again.generated, again.entries), (0, 7));
        assert_eq!(tree(&out), tree(&dir.path().join("once")));

        let other = GenerationConfig { seed: 9, ..full };
        assert!(matches!(run_generation(&inputs, &engine, &other, &out), Err(PipelineError::Config(_))));
    }
}
