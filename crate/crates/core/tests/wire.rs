use std::time::Duration;

use climakit::compositor::{refine_mask, SceneImage};
use climakit::genclient::mock::{Fault, MockConfig, MockService};
use climakit::genclient::{
    build_prompt, difference_mask, request_inpaint, request_scene, GenBackend, GenError, HttpBackend, InpaintBody, InpaintRequest,
    RetryPolicy, SceneGenRequest, StubBackend, ValidationConfig,
};
use climakit::pipeline::{toy_attributes, toy_map, ToyConfig};
use climakit::Box64;

fn scene_request(seed: u64) -> SceneGenRequest {
    let attrs = toy_attributes(3);
    let map = toy_map(&ToyConfig { width: 160, height: 96, ..ToyConfig::default() }, 3, 1);
    SceneGenRequest { semantic_map: map, prompt: build_prompt(&attrs.caption, &attrs), seed }
}

fn inpaint_request(image: SceneImage, seed: u64) -> InpaintRequest {
    InpaintRequest {
        image,
        bbox: Box64::from_corner(60.0, 50.0, 24.0, 20.0),
        scene_context: "Gas Station, Snow, Daytime".into(),
        concept: "traffic cone".into(),
        seed,
    }
}

fn start(fault: Fault) -> MockService {
    MockService::start(MockConfig { fault, ..MockConfig::default() }).unwrap()
}

fn connect(svc: &MockService) -> HttpBackend {
    HttpBackend::connect(svc.url(), RetryPolicy::immediate(2, Duration::from_secs(10)), 4).unwrap()
}

#[test]
fn service_replies_match_the_stub() {
    let svc = start(Fault::None);
    let remote = connect(&svc);
    let stub = StubBackend::default();
    let req = scene_request(5);
    let scene = request_scene(&remote, &req).unwrap();
    assert_eq!(scene.image, request_scene(&stub, &req).unwrap().image);
    let ireq = inpaint_request(scene.image, 9);
    let v = ValidationConfig::default();
    let a = request_inpaint(&remote, &ireq, &v).unwrap();
    let b = request_inpaint(&stub, &ireq, &v).unwrap();
    assert_eq!((&a.image, &a.mask), (&b.image, &b.mask));

    let again = request_inpaint(&remote, &ireq, &v).unwrap();
    assert_eq!(svc.attempts(&InpaintBody::from_request(&ireq).idempotency_key), 2);
    assert_eq!(svc.executions(), 2, "a repeated key is answered from the cache");
    assert_eq!(again.image, b.image);
}

#[test]
fn missing_mask_is_derived_by_differencing() {
    let svc = start(Fault::DropMask);
    let remote = connect(&svc);
    let stub = StubBackend::default();
    let ireq = inpaint_request(request_scene(&stub, &scene_request(2)).unwrap().image, 4);
    let v = ValidationConfig::default();
    let got = request_inpaint(&remote, &ireq, &v).unwrap();
    let want = refine_mask(&difference_mask(&ireq.image, &got.image, v.diff_threshold), &v.refine);
    assert_eq!(got.mask.unwrap(), want);
}

#[test]
fn malformed_replies_are_rejected() {
    let req = scene_request(1);
    let svc = start(Fault::WrongDims);
    let remote = connect(&svc);
    assert_eq!(
        request_scene(&remote, &req).unwrap_err(),
        GenError::DimensionMismatch { expected: (160, 96), got: (161, 96) }
    );
    let stub = StubBackend::default();
    let ireq = inpaint_request(request_scene(&stub, &req).unwrap().image, 1);
    let svc = start(Fault::Leakage);
    let remote = connect(&svc);
    assert_eq!(
        request_inpaint(&remote, &ireq, &ValidationConfig::default()).unwrap_err(),
        GenError::EditLeakage { count: 1, first: (159, 0) }
    );
    let svc = start(Fault::Status(422));
    let remote = connect(&svc);
    assert!(matches!(request_scene(&remote, &req), Err(GenError::Backend { .. })));
}

#[test]
fn timeouts_are_retried_then_surface() {
    let stall = |n| MockConfig { fault: Fault::StallFirst(n), stall: Duration::from_millis(700), ..MockConfig::default() };
    let svc = MockService::start(stall(3)).unwrap();
    let remote = HttpBackend::connect(svc.url(), RetryPolicy::immediate(1, Duration::from_millis(250)), 2).unwrap();
    assert_eq!(request_scene(&remote, &scene_request(8)).unwrap_err(), GenError::Timeout);

    let svc = MockService::start(stall(1)).unwrap();
    let remote = HttpBackend::connect(svc.url(), RetryPolicy::immediate(1, Duration::from_millis(250)), 2).unwrap();
    assert!(request_scene(&remote, &scene_request(8)).is_ok());
}

#[test]
fn in_flight_limit_holds_under_load() {
    let svc = MockService::start(MockConfig { latency: Duration::from_millis(30), ..MockConfig::default() }).unwrap();
    let remote = HttpBackend::connect(svc.url(), RetryPolicy::immediate(0, Duration::from_secs(10)), 2).unwrap();
    std::thread::scope(|s| {
        for seed in 0..8 {
            let remote = &remote;
            s.spawn(move || request_scene(remote, &scene_request(seed)).unwrap());
        }
    });
    assert!(svc.peak_concurrency() <= 2, "peak {}", svc.peak_concurrency());
    assert!(remote.gate().peak() <= 2);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let e = HttpBackend::connect("http://127.0.0.1:9", RetryPolicy::immediate(1, Duration::from_secs(2)), 1).unwrap_err();
    assert!(e.is_transient(), "{e:?}");
}
