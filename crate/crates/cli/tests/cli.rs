use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use climakit::compositor::{AnomalyMask, MASK_ANOMALY};
use climakit::dataset::{read_manifest, Split};
use climakit::genclient::mock::{Fault, MockConfig, MockService};
use climakit::metrics::ScoreMap;

const BIN: &str = env!("CARGO_BIN_EXE_climakit");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("CLIMAKIT_ENDPOINT").env_remove("RUST_LOG").output().expect("spawn climakit")
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn toy(dir: &Path, count: usize) {
    let c = count.to_string();
    ok(&["toy", "--out", p(dir), "--count", &c, "--width", "256", "--height", "128", "--seed", "5"]);
}

#[test]
fn sample_is_reproducible_and_rejects_inverted_ranges() {
    let t = tempfile::tempdir().unwrap();
    let maps = t.path().join("maps");
    toy(&maps, 4);
    let before = tree(&maps);
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["sample", "--maps", p(&maps), "--n", "64", "--seed", "7", "--out", p(&a)]);
    ok(&["sample", "--maps", p(&maps), "--n", "64", "--seed", "7", "--out", p(&b)]);
    let ta = tree(&a);
    assert_eq!(ta.len(), 4);
    assert!(ta.keys().all(|k| k.ends_with(".boxes")));
    assert_eq!(ta, tree(&b));
    assert_eq!(tree(&maps), before);

    let o = run(&["sample", "--maps", p(&maps), "--aspect", "2:1", "--out", p(&t.path().join("c"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("aspect"));
    assert!(!t.path().join("c").exists());

    let o = run(&["sample", "--maps", p(&t.path().join("nope")), "--out", p(&t.path().join("c"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let t = tempfile::tempdir().unwrap();
    let maps = t.path().join("maps");
    toy(&maps, 2);
    let cfg = t.path().join("run.conf");
    std::fs::write(&cfg, format!("# sampling\nmaps = {}\nn = 5\nseed = 7\n", maps.display())).unwrap();
    let (a, b, c) = (t.path().join("a"), t.path().join("b"), t.path().join("c"));
    ok(&["sample", "--config", p(&cfg), "--out", p(&a)]);
    ok(&["sample", "--maps", p(&maps), "--n", "5", "--seed", "7", "--out", p(&b)]);
    ok(&["sample", "--config", p(&cfg), "--n", "6", "--out", p(&c)]);
    assert_eq!(tree(&a), tree(&b));
    let one = std::fs::read_to_string(c.join("toy_000000.boxes")).unwrap();
    let five = std::fs::read_to_string(a.join("toy_000000.boxes")).unwrap();
    assert!(one.lines().count() > five.lines().count());

    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(code(&run(&["sample", "--config", p(&cfg), "--out", p(&a)])), 2);
}

#[test]
fn compose_counts_and_stub_equivalence() {
    let t = tempfile::tempdir().unwrap();
    let maps = t.path().join("maps");
    toy(&maps, 10);
    let (comp, stub) = (t.path().join("compose"), t.path().join("stub"));
    let common = ["--maps", p(&maps), "--anomalies-per-image", "2", "--seed", "3"];
    ok(&[&["compose"], &common[..], &["--out", p(&comp)]].concat());
    ok(&[&["generate", "--stub"], &common[..], &["--out", p(&stub)]].concat());
    let (tc, mut ts) = (tree(&comp), tree(&stub));
    assert_eq!(tc.keys().filter(|k| k.ends_with("_mask.png")).count(), 10);
    assert_eq!(tc.keys().filter(|k| k.ends_with(".png") && !k.ends_with("_mask.png")).count(), 10);
    let manifest = read_manifest(&comp.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.len(), 10);
    assert!(manifest.iter().all(|e| e.categories.len() == 2 && e.refined));
    ts.remove("run.json");
    let mut tc = tc;
    tc.remove("run.json");
    assert_eq!(tc, ts);

    let o = run(&["generate", "--stub", "--endpoint", "http://127.0.0.1:9", "--maps", p(&maps), "--out", p(&t.path().join("x"))]);
    assert_eq!(code(&o), 2);
    let o = run(&["generate", "--maps", p(&maps), "--out", p(&t.path().join("x"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn interrupted_generation_resumes_without_duplicates() {
    let t = tempfile::tempdir().unwrap();
    let maps = t.path().join("maps");
    toy(&maps, 6);
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["compose", "--maps", p(&maps), "--seed", "1", "--limit", "2", "--out", p(&a)]);
    assert_eq!(read_manifest(&a.join("manifest.jsonl")).unwrap().len(), 2);
    ok(&["compose", "--maps", p(&maps), "--seed", "1", "--out", p(&a)]);
    ok(&["compose", "--maps", p(&maps), "--seed", "1", "--out", p(&a)]);
    ok(&["compose", "--maps", p(&maps), "--seed", "1", "--out", p(&b)]);
    assert_eq!(tree(&a), tree(&b));
    assert_eq!(read_manifest(&a.join("manifest.jsonl")).unwrap().len(), 6);
    assert_eq!(code(&run(&["compose", "--maps", p(&maps), "--seed", "2", "--out", p(&a)])), 2);
}

#[test]
fn wrong_dims_service_fails_with_backend_code() {
    let t = tempfile::tempdir().unwrap();
    let maps = t.path().join("maps");
    toy(&maps, 2);
    let svc = MockService::start(MockConfig { fault: Fault::WrongDims, ..MockConfig::default() }).unwrap();
    let o = Command::new(BIN)
        .args(["generate", "--maps", p(&maps), "--out", p(&t.path().join("g")), "--retries", "0"])
        .env("CLIMAKIT_ENDPOINT", svc.url())
        .output()
        .unwrap();
    assert_eq!(code(&o), 5);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("toy_0000"), "{err}");
    assert!(err.contains("prompt") && err.contains("(257, 128)"), "{err}");

    let ok_svc = MockService::start(MockConfig::default()).unwrap();
    let (svc_out, stub_out) = (t.path().join("svc"), t.path().join("stub"));
    ok(&["generate", "--endpoint", ok_svc.url(), "--maps", p(&maps), "--seed", "4", "--out", p(&svc_out)]);
    ok(&["generate", "--stub", "--maps", p(&maps), "--seed", "4", "--out", p(&stub_out)]);
    let (mut a, mut b) = (tree(&svc_out), tree(&stub_out));
    a.remove("run.json");
    b.remove("run.json");
    assert_eq!(a, b);
}

/// Writes a score map equal to each test mask: anomaly pixels score one.
fn perfect_scores(dataset: &Path, scores: &Path) {
    for e in read_manifest(&dataset.join("manifest.jsonl")).unwrap().iter().filter(|e| e.split == Split::Test) {
        let m = AnomalyMask::load(&e.mask_abs(dataset)).unwrap();
        let s: Vec<f32> = m.values().iter().map(|&v| (v == MASK_ANOMALY) as u8 as f32).collect();
        let path = scores.join(e.image_path.replace(".png", ".csm"));
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        ScoreMap::new(m.width(), m.height(), s, (0.0, 1.0)).unwrap().write_csm(&path).unwrap();
    }
}

#[test]
fn stub_pipeline_end_to_end() {
    let t = tempfile::tempdir().unwrap();
    let d = |n: &str| t.path().join(n);
    toy(&d("maps"), 72);
    ok(&["sample", "--maps", p(&d("maps")), "--seed", "7", "--out", p(&d("boxes"))]);
    ok(&["generate", "--stub", "--maps", p(&d("maps")), "--boxes", p(&d("boxes")), "--refine", "false", "--out", p(&d("gen"))]);
    ok(&["refine", "--manifest", p(&d("gen/manifest.jsonl")), "--out", p(&d("ref"))]);
    assert_eq!(code(&run(&["refine", "--manifest", p(&d("gen/manifest.jsonl")), "--out", p(&d("gen"))])), 2);
    let table = ok(&["curate", "--manifest", p(&d("ref/manifest.jsonl")), "--total", "36", "--seed", "9", "--out", p(&d("cur"))]);
    assert!(table.contains("36 test, 36 train"), "{table}");
    let curated = std::fs::read(d("ref/manifest.jsonl")).unwrap();
    ok(&["curate", "--manifest", p(&d("ref/manifest.jsonl")), "--total", "36", "--seed", "9"]);
    assert_eq!(std::fs::read(d("ref/manifest.jsonl")).unwrap(), curated);

    perfect_scores(&d("ref"), &d("scores"));
    let text = ok(&["eval", "--manifest", p(&d("ref/manifest.jsonl")), "--scores", p(&d("scores")), "--out", p(&d("eval"))]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["evaluated"], 36);
    for r in report["reports"].as_array().unwrap() {
        assert_eq!(r["auroc"], 1.0, "{r}");
        assert_eq!(r["fpr95"], 0.0, "{r}");
    }
    let table = std::fs::read_to_string(d("eval/table.txt")).unwrap();
    assert_eq!(table.lines().count(), 2 + 13);
    assert!(table.lines().any(|l| l.starts_with("Average") && l.contains("100.00")));
    assert!(text.contains(&table));

    std::fs::remove_file(d("scores").join(read_manifest(&d("ref/manifest.jsonl")).unwrap().iter().find(|e| e.split == Split::Test).unwrap().image_path.replace(".png", ".csm"))).unwrap();
    let o = run(&["eval", "--manifest", p(&d("ref/manifest.jsonl")), "--scores", p(&d("scores")), "--out", p(&d("eval2"))]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing score map"));
    ok(&["eval", "--manifest", p(&d("ref/manifest.jsonl")), "--scores", p(&d("scores")), "--allow-missing", "true", "--out", p(&d("eval2"))]);
    let r2: serde_json::Value = serde_json::from_slice(&std::fs::read(d("eval2/report.json")).unwrap()).unwrap();
    assert_eq!(r2["evaluated"], 35);
    assert_eq!(r2["missing"].as_array().unwrap().len(), 1);
}

#[test]
fn curate_infeasible_prints_cell_table() {
    let t = tempfile::tempdir().unwrap();
    let maps = t.path().join("maps");
    toy(&maps, 36);
    let g = t.path().join("g");
    ok(&["compose", "--maps", p(&maps), "--out", p(&g)]);
    let m = g.join("manifest.jsonl");
    let before = std::fs::read(&m).unwrap();
    let o = run(&["curate", "--manifest", p(&m), "--total", "72"]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("*1/2"), "{err}");
    assert_eq!(err.lines().filter(|l| l.contains("/2")).count(), 6);
    assert_eq!(std::fs::read(&m).unwrap(), before);
    assert_eq!(code(&run(&["curate", "--manifest", p(&m), "--total", "10", "--quotas", p(&m)])), 2);
}

#[test]
fn validate_and_stats() {
    let t = tempfile::tempdir().unwrap();
    let maps = t.path().join("maps");
    toy(&maps, 3);
    let g = t.path().join("g");
    ok(&["compose", "--maps", p(&maps), "--out", p(&g)]);
    let m = g.join("manifest.jsonl");
    assert!(ok(&["validate", "--manifest", p(&m)]).contains("ok"));
    let e = &read_manifest(&m).unwrap()[1];
    let mask = e.mask_abs(&g);
    let mut img = image::open(&mask).unwrap().to_luma8();
    img.put_pixel(0, 0, image::Luma([77]));
    img.save(&mask).unwrap();
    let o = run(&["validate", "--manifest", p(&m), "--out", p(&t.path().join("v"))]);
    assert_eq!(code(&o), 4);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains(&e.image_path) && out.contains("77"), "{out}");
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(t.path().join("v/violations.json")).unwrap()).unwrap();
    assert_eq!(v[0]["kind"], "illegal_mask_value");

    let empty = t.path().join("empty/manifest.jsonl");
    std::fs::create_dir_all(empty.parent().unwrap()).unwrap();
    std::fs::write(&empty, "").unwrap();
    ok(&["stats", "--manifest", p(&empty), "--out", p(&t.path().join("s"))]);
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(t.path().join("s/stats.json")).unwrap()).unwrap();
    assert_eq!(s["images"], 0);
    assert!(s["mean_pixel_fraction"].is_null());
    assert!(t.path().join("s/heatmap.png").is_file());
}
