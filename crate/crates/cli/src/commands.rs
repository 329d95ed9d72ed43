use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use climakit::compositor::{CutoutBank, RefineConfig, BUILTIN_CONCEPTS};
use climakit::dataset::{
    cell_index, compute_stats, curate, read_manifest, validate_manifest_file, write_manifest, CurationConfig, CurationFilters,
    DatasetError, ManifestEntry, Quotas, Split,
};
use climakit::genclient::{GenBackend, HttpBackend, RetryPolicy, StubBackend, ValidationConfig};
use climakit::metrics::{render_scene_weather_table, render_text, Aggregation, GroupBy};
use climakit::pipeline::{
    evaluate, run_generation, sample_boxes, write_toy_scenes, Engine, EvalConfig, GenerationConfig, GenerationInputs,
    PipelineError, ToyConfig,
};
use climakit::placer::SamplerConfig;
use climakit::scene::{LabelSchema, SceneKind, Weather};
use log::{info, warn};
use serde::Serialize;

use crate::error::{CliError, EXIT_BACKEND, EXIT_VALIDATION};
use crate::settings::Settings;
use crate::{
    Command, CurateArgs, EvalArgs, GenArgs, GenerateArgs, RefineArgs, RefineFlags, SampleArgs, SamplerArgs, StatsArgs, ToyArgs,
    ValidateArgs,
};

/// Endpoint used when neither a flag nor the config file names one.
pub const ENDPOINT_ENV: &str = "CLIMAKIT_ENDPOINT";

pub fn dispatch(cmd: Command, s: &Settings, jobs: usize) -> Result<(), CliError> {
    match cmd {
        Command::Toy(a) => toy(a, s),
        Command::Sample(a) => sample(a, s),
        Command::Compose(a) => compose(a, s, jobs),
        Command::Generate(a) => generate(a, s, jobs),
        Command::Refine(a) => refine(a, s),
        Command::Eval(a) => eval(a, s, jobs),
        Command::Stats(a) => stats(a, s),
        Command::Curate(a) => curate_cmd(a, s),
        Command::Validate(a) => validate(a, s),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| CliError::data(format!("{}: {e}", d.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut b = serde_json::to_vec_pretty(v).map_err(|e| CliError::data(e.to_string()))?;
    b.push(b'\n');
    Ok(b)
}

fn manifest_root(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn same_path(a: &Path, b: &Path) -> bool {
    matches!((a.canonicalize(), b.canonicalize()), (Ok(x), Ok(y)) if x == y)
}

fn parse_split(v: &str) -> Result<Split, CliError> {
    Split::from_ident(v).ok_or_else(|| CliError::config(format!("unknown split `{v}`")))
}

fn sampler_config(a: &SamplerArgs, s: &Settings) -> Result<SamplerConfig, CliError> {
    let d = SamplerConfig::default();
    let aspect = s.opt(a.aspect, "aspect")?;
    let cfg = SamplerConfig {
        n: s.get(a.n, "n", d.n)?,
        s_h: s.get(a.s_h, "s-h", d.s_h)?,
        aspect_min: aspect.map_or(d.aspect_min, |r| r.0),
        aspect_max: aspect.map_or(d.aspect_max, |r| r.1),
        h_min: s.get(a.h_min, "h-min", d.h_min)?,
        h_max: s.opt(a.h_max, "h-max")?,
        require_ground_contact: s.get(a.ground_contact, "ground-contact", d.require_ground_contact)?,
    };
    cfg.validate(usize::MAX / 4).map_err(|e| CliError::config(e.to_string()))?;
    Ok(cfg)
}

fn refine_config(a: &RefineFlags, s: &Settings) -> Result<RefineConfig, CliError> {
    let d = RefineConfig::default();
    Ok(RefineConfig {
        median_radius: s.get(a.median_radius, "median-radius", d.median_radius)?,
        open_close_kernel: s.get(a.kernel, "kernel", d.open_close_kernel)?,
        keep_largest_component: s.get(a.keep_largest, "keep-largest", d.keep_largest_component)?,
    })
}

fn toy(a: ToyArgs, s: &Settings) -> Result<(), CliError> {
    let d = ToyConfig::default();
    let cfg = ToyConfig { width: s.get(a.width, "width", d.width)?, height: s.get(a.height, "height", d.height)?, ..d };
    if cfg.width < 16 || cfg.height < 16 {
        return Err(CliError::config(format!("toy scenes need at least 16x16 pixels, got {}x{}", cfg.width, cfg.height)));
    }
    let out = s.require(a.out, "out")?;
    let count = s.get(a.count, "count", 50)?;
    let records = write_toy_scenes(&out, &cfg, count, s.get(a.seed, "seed", 0)?)?;
    println!("wrote {} toy scenes to {}", records.len(), out.display());
    Ok(())
}

fn load_schema(s: &Settings, flag: Option<PathBuf>) -> Result<Option<LabelSchema>, CliError> {
    s.input_opt(flag, "schema")?.map(|p| LabelSchema::load(&p).map_err(CliError::from)).transpose()
}

fn sample(a: SampleArgs, s: &Settings) -> Result<(), CliError> {
    let cfg = sampler_config(&a.sampler, s)?;
    let maps = s.input(a.maps, "maps")?;
    let schema = load_schema(s, a.schema)?;
    let out = s.require(a.out, "out")?;
    let written = sample_boxes(&maps, schema.as_ref(), &cfg, s.get(a.seed, "seed", 0)?, &out)?;
    println!("wrote {} box sets to {}", written.len(), out.display());
    Ok(())
}

struct GenSetup {
    cfg: GenerationConfig,
    maps: PathBuf,
    schema: Option<LabelSchema>,
    images: Option<PathBuf>,
    boxes: Option<PathBuf>,
    bank: CutoutBank,
    out: PathBuf,
}

impl GenSetup {
    fn inputs(&self) -> GenerationInputs<'_> {
        GenerationInputs {
            maps: &self.maps,
            schema: self.schema.as_ref(),
            images: self.images.as_deref(),
            boxes: self.boxes.as_deref(),
        }
    }
}

fn gen_setup(a: GenArgs, s: &Settings, jobs: usize) -> Result<GenSetup, CliError> {
    let d = GenerationConfig::default();
    let anomalies = s.opt(a.anomalies, "anomalies-per-image")?.map_or(d.anomalies, |r| (r.0, r.1));
    let refine_on = s.get(a.refine, "refine", true)?;
    let refine = refine_config(&a.refine_flags, s)?;
    let cutouts = s.input_opt(a.cutouts, "cutouts")?;
    let bank = match &cutouts {
        Some(dir) => CutoutBank::load_dir(dir)?,
        None => CutoutBank::builtin(),
    };
    let concepts = match s.opt(a.concepts, "concepts")? {
        Some(l) => l.0,
        None if cutouts.is_some() => bank.concepts().map(str::to_string).collect(),
        None => BUILTIN_CONCEPTS.iter().map(|c| c.to_string()).collect(),
    };
    let cfg = GenerationConfig {
        sampler: sampler_config(&a.sampler, s)?,
        anomalies,
        seed: s.get(a.seed, "seed", d.seed)?,
        harmonize: s.get(a.harmonize, "harmonize", d.harmonize)?,
        refine: refine_on.then_some(refine),
        concepts,
        split: parse_split(&s.get(a.split, "split", d.split.ident().to_string())?)?,
        limit: s.opt(a.limit, "limit")?,
        jobs,
    };
    cfg.validate()?;
    Ok(GenSetup {
        cfg,
        maps: s.input(a.maps, "maps")?,
        schema: load_schema(s, a.schema)?,
        images: s.input_opt(a.images, "images")?,
        boxes: s.input_opt(a.boxes, "boxes")?,
        bank,
        out: s.require(a.out, "out")?,
    })
}

fn report_run(setup: &GenSetup, r: Result<climakit::pipeline::RunSummary, PipelineError>) -> Result<(), CliError> {
    let summary = r?;
    println!(
        "{} generated, {} resumed, {} remaining, {} manifest entries in {}",
        summary.generated,
        summary.resumed,
        summary.remaining,
        summary.entries,
        setup.out.display()
    );
    Ok(())
}

fn compose(a: GenArgs, s: &Settings, jobs: usize) -> Result<(), CliError> {
    let setup = gen_setup(a, s, jobs)?;
    let engine = Engine::Compose { bank: &setup.bank };
    report_run(&setup, run_generation(&setup.inputs(), &engine, &setup.cfg, &setup.out))
}

fn generate(a: GenerateArgs, s: &Settings, jobs: usize) -> Result<(), CliError> {
    if a.stub && a.endpoint.is_some() {
        return Err(CliError::config("--stub and --endpoint are mutually exclusive"));
    }
    let d = RetryPolicy::default();
    let policy = RetryPolicy {
        max_retries: s.get(a.retries, "retries", d.max_retries)?,
        base_delay: s.opt(a.backoff_ms, "backoff-ms")?.map_or(d.base_delay, Duration::from_millis),
        timeout: s.opt(a.timeout_secs, "timeout-secs")?.map_or(d.timeout, Duration::from_secs),
        ..d
    };
    let max_in_flight = s.get(a.max_in_flight, "max-in-flight", 4)?;
    if max_in_flight == 0 {
        return Err(CliError::config("--max-in-flight must be positive"));
    }
    let endpoint = match s.opt(a.endpoint, "endpoint")? {
        Some(e) => Some(e),
        None => std::env::var(ENDPOINT_ENV).ok().filter(|e| !e.trim().is_empty()),
    };
    if !a.stub && endpoint.is_none() {
        return Err(CliError::config(format!("generate needs --stub, --endpoint or {ENDPOINT_ENV}")));
    }
    let setup = gen_setup(a.gen, s, jobs)?;
    let refine = setup.cfg.refine.unwrap_or_default();
    let dv = ValidationConfig::default();
    let validation = ValidationConfig {
        dilation: s.get(a.dilation, "dilation", dv.dilation)?,
        diff_threshold: s.get(a.diff_threshold, "diff-threshold", dv.diff_threshold)?,
        leak_tolerance: s.get(a.leak_tolerance, "leak-tolerance", dv.leak_tolerance)?,
        refine,
    };
    let backend: Box<dyn GenBackend> = if a.stub {
        let mut b = StubBackend::new(setup.bank.clone());
        b.harmonize = setup.cfg.harmonize;
        Box::new(b)
    } else {
        let url = endpoint.expect("checked above");
        info!("connecting to {url}");
        Box::new(HttpBackend::connect(&url, policy, max_in_flight).map_err(|e| CliError::new(EXIT_BACKEND, format!("{url}: {e}")))?)
    };
    let engine = Engine::Service { backend: backend.as_ref(), validation };
    report_run(&setup, run_generation(&setup.inputs(), &engine, &setup.cfg, &setup.out))
}

fn refine(a: RefineArgs, s: &Settings) -> Result<(), CliError> {
    let cfg = refine_config(&a.refine_flags, s)?;
    let manifest = s.input(a.manifest, "manifest")?;
    let out = s.require(a.out, "out")?;
    if same_path(&manifest_root(&manifest), &out) {
        return Err(CliError::config("--out must differ from the manifest directory"));
    }
    let entries = climakit::pipeline::refine_dataset(&manifest, &out, &cfg)?;
    println!("refined {} masks into {}", entries.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalJson<'a> {
    evaluated: usize,
    missing: &'a [String],
    reports: &'a [climakit::metrics::EvalReport],
}

fn eval(a: EvalArgs, s: &Settings, jobs: usize) -> Result<(), CliError> {
    let d = EvalConfig::default();
    let split = match s.get(a.split, "split", "test".to_string())?.as_str() {
        "all" => None,
        v => Some(parse_split(v)?),
    };
    let aggregation = match s.get(a.aggregation, "aggregation", "pooled".to_string())?.as_str() {
        "pooled" => Aggregation::Pooled,
        "per_image_mean" | "per-image-mean" => Aggregation::PerImageMean,
        v => return Err(CliError::config(format!("unknown aggregation `{v}`"))),
    };
    let range = s.opt(a.range, "range")?.map_or(d.range, |r| (r.0, r.1));
    let cfg = EvalConfig {
        bins: s.get(a.bins, "bins", d.bins)?,
        range,
        split,
        allow_missing: s.get(a.allow_missing, "allow-missing", false)?,
        group_by: s.opt(a.group_by, "group-by")?.map_or(d.group_by, |l| l.0),
        aggregation,
        jobs,
    };
    climakit::metrics::MetricAccumulator::new(cfg.bins, cfg.range).map_err(|e| CliError::config(e.to_string()))?;
    let method = s.get(a.method, "method", "scores".to_string())?;
    let manifest = s.input(a.manifest, "manifest")?;
    let scores = s.input(a.scores, "scores")?;
    let out = s.require(a.out, "out")?;
    let outcome = match evaluate(&manifest, &scores, &cfg) {
        Err(PipelineError::MissingScores(missing)) => {
            for m in &missing {
                eprintln!("missing score map: {m}");
            }
            return Err(CliError::data(format!("{} score maps missing; pass --allow-missing true to skip them", missing.len())));
        }
        r => r?,
    };
    for m in &outcome.missing {
        warn!("missing score map, skipped: {m}");
    }
    let mut text = render_text(&outcome.reports);
    if cfg.group_by.contains(&GroupBy::SceneCondition) {
        let table = render_scene_weather_table(&[(method, outcome.reports.clone())]);
        write_file(&out.join("table.txt"), table.as_bytes())?;
        text.push('\n');
        text.push_str(&table);
    }
    write_file(&out.join("report.txt"), text.as_bytes())?;
    let j = EvalJson { evaluated: outcome.evaluated, missing: &outcome.missing, reports: &outcome.reports };
    write_file(&out.join("report.json"), &json(&j)?)?;
    print!("{text}");
    Ok(())
}

fn stats(a: StatsArgs, s: &Settings) -> Result<(), CliError> {
    let manifest = s.input(a.manifest, "manifest")?;
    let out = s.require(a.out, "out")?;
    let entries = read_manifest(&manifest)?;
    let st = compute_stats(&entries, &manifest_root(&manifest))?;
    write_file(&out.join("stats.json"), &json(&st)?)?;
    st.write_heatmap(&out.join("heatmap.png"))?;
    println!("{} images, mean pixel fraction {}", st.images, st.mean_pixel_fraction.map_or("n/a".into(), |f| format!("{f:.5}")));
    Ok(())
}

fn parse_quotas(path: &Path) -> Result<Quotas, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let mut q = Quotas::zero();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: String| CliError::config(format!("{}:{}: {m}", path.display(), i + 1));
        let f: Vec<&str> = line.split_whitespace().collect();
        let [scene, weather, count] = f[..] else {
            return Err(bad("expected `scene weather count`".into()));
        };
        let scene: SceneKind = scene.parse().map_err(|e| bad(format!("{e}")))?;
        let weather: Weather = weather.parse().map_err(|e| bad(format!("{e}")))?;
        q.0[cell_index(scene, weather)] = count.parse().map_err(|e| bad(format!("`{count}`: {e}")))?;
    }
    Ok(q)
}

/// Scene rows by weather columns, one `cell(scene, weather)` string each.
fn cell_table(cell: impl Fn(SceneKind, Weather) -> String) -> String {
    let mut t = format!("{:<14}", "scene");
    for w in Weather::ALL {
        let _ = write!(t, " {:>10}", w.ident());
    }
    t.push('\n');
    for sc in SceneKind::ALL {
        let _ = write!(t, "{:<14}", sc.ident());
        for w in Weather::ALL {
            let _ = write!(t, " {:>10}", cell(sc, w));
        }
        t.push('\n');
    }
    t
}

#[derive(Serialize)]
struct CurationJson {
    seed: u64,
    target_total: usize,
    filters: CurationFilters,
    /// `test_counts[scene][weather]`.
    test_counts: Vec<Vec<usize>>,
    train: usize,
}

fn curate_cmd(a: CurateArgs, s: &Settings) -> Result<(), CliError> {
    let quotas = s.input_opt(a.quotas, "quotas")?.map(|p| parse_quotas(&p)).transpose()?;
    let total = s.opt(a.total, "total")?;
    let (target_total, quotas) = match (total, quotas) {
        (t, Some(q)) => (t.unwrap_or(q.total()), q),
        (t, None) => (t.unwrap_or(1200), Quotas::balanced(t.unwrap_or(1200))),
    };
    let df = CurationFilters::default();
    let filters = CurationFilters {
        min_fraction: s.get(a.min_fraction, "min-fraction", df.min_fraction)?,
        max_fraction: s.get(a.max_fraction, "max-fraction", df.max_fraction)?,
        require_refined: s.get(a.require_refined, "require-refined", df.require_refined)?,
    };
    if filters.min_fraction > filters.max_fraction {
        return Err(CliError::config(format!("fraction range {}:{} is inverted", filters.min_fraction, filters.max_fraction)));
    }
    let cfg = CurationConfig { target_total, quotas, filters, seed: s.get(a.seed, "seed", 0)? };
    if cfg.quotas.total() != cfg.target_total {
        return Err(DatasetError::QuotaSum { sum: cfg.quotas.total(), target: cfg.target_total }.into());
    }
    let manifest = s.input(a.manifest, "manifest")?;
    let out = s.opt(a.out, "out")?;
    let entries = read_manifest(&manifest)?;
    let curated = match curate(&entries, &cfg) {
        Err(DatasetError::InfeasibleQuota(short)) => {
            let avail = availability(&entries, &cfg.filters);
            eprintln!("available/requested per cell, short cells marked *:");
            eprint!(
                "{}",
                cell_table(|sc, w| {
                    let i = cell_index(sc, w);
                    let mark = if short.iter().any(|c| c.scene == sc && c.weather == w) { "*" } else { "" };
                    format!("{mark}{}/{}", avail[i], cfg.quotas.0[i])
                })
            );
            return Err(CliError::data(format!("infeasible quota in {} cell(s)", short.len())));
        }
        r => r?,
    };
    write_manifest(&manifest, &curated)?;
    let mut counts = vec![vec![0usize; Weather::ALL.len()]; SceneKind::ALL.len()];
    for e in curated.iter().filter(|e| e.split == Split::Test) {
        counts[e.scene.index()][e.weather.index()] += 1;
    }
    let tests: usize = counts.iter().flatten().sum();
    print!("{}", cell_table(|sc, w| counts[sc.index()][w.index()].to_string()));
    println!("{tests} test, {} train", curated.len() - tests);
    if let Some(out) = out {
        let j = CurationJson { seed: cfg.seed, target_total, filters, test_counts: counts, train: curated.len() - tests };
        write_file(&out.join("curation.json"), &json(&j)?)?;
    }
    Ok(())
}

fn availability(entries: &[ManifestEntry], filters: &CurationFilters) -> Vec<usize> {
    let mut v = vec![0; SceneKind::ALL.len() * Weather::ALL.len()];
    for e in entries.iter().filter(|e| filters.accepts(e)) {
        v[cell_index(e.scene, e.weather)] += 1;
    }
    v
}

fn validate(a: ValidateArgs, s: &Settings) -> Result<(), CliError> {
    let manifest = s.input(a.manifest, "manifest")?;
    let out = s.opt(a.out, "out")?;
    let violations = validate_manifest_file(&manifest);
    for v in &violations {
        println!("{v}");
    }
    if let Some(out) = out {
        write_file(&out.join("violations.json"), &json(&violations)?)?;
    }
    if violations.is_empty() {
        println!("{}: ok", manifest.display());
        return Ok(());
    }
    Err(CliError::new(EXIT_VALIDATION, format!("{} violation(s)", violations.len())))
}
