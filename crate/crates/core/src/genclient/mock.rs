//! In-process HTTP generation service backed by [`StubBackend`], with
//! injectable faults. Used to exercise the wire client end to end.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Method, Response, Server};

use super::protocol::{CAPABILITIES_PATH, INPAINT_PATH, SCENE_PATH};
use super::{
    build_prompt, parse_prompt, Capabilities, ErrorReply, GenBackend, GenReply, GenResult, InpaintBody, SceneBody, SceneGenRequest,
    StubBackend,
};
use crate::compositor::SceneImage;
use crate::scene::{LabelSchema, SceneAttributes, SceneKind, TimeOfDay, Weather};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Reply image one pixel wider than requested.
    WrongDims,
    /// Inpaint replies also repaint the image corner farthest from the box.
    Leakage,
    /// Every generation request fails with this HTTP status.
    Status(u16),
    /// Inpaint replies omit the mask.
    DropMask,
    /// The first `n` attempts for each idempotency key stall past the
    /// client timeout before answering.
    StallFirst(usize),
}

#[derive(Debug, Clone)]
pub struct MockConfig {
    pub fault: Fault,
    pub stall: Duration,
    pub max_width: usize,
    pub max_height: usize,
    pub schema: LabelSchema,
    /// Artificial service time per generation request.
    pub latency: Duration,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            fault: Fault::None,
            stall: Duration::from_millis(600),
            max_width: 4096,
            max_height: 4096,
            schema: LabelSchema::default(),
            latency: Duration::ZERO,
        }
    }
}

#[derive(Default)]
struct Ledger {
    attempts: HashMap<String, usize>,
    cache: HashMap<String, String>,
    executions: usize,
}

struct Shared {
    cfg: MockConfig,
    stub: StubBackend,
    ledger: Mutex<Ledger>,
    active: AtomicUsize,
    peak: AtomicUsize,
}

/// Running mock service; stops when dropped.
pub struct MockService {
    server: Arc<Server>,
    shared: Arc<Shared>,
    url: String,
    worker: Option<JoinHandle<()>>,
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    Response::from_string(body).with_status_code(status).with_header(header)
}

fn error_json(code: &str, message: impl Into<String>) -> String {
    serde_json::to_string(&ErrorReply { code: code.into(), message: message.into() }).expect("serializable")
}

impl Shared {
    fn handle(&self, method: &Method, path: &str, body: &str) -> (u16, String) {
        match (method, path) {
            (Method::Get, CAPABILITIES_PATH) => {
                let caps = Capabilities {
                    backend_id: "mock-stub".into(),
                    max_width: self.cfg.max_width,
                    max_height: self.cfg.max_height,
                    endpoints: vec![SCENE_PATH.into(), INPAINT_PATH.into()],
                };
                (200, serde_json::to_string(&caps).expect("serializable"))
            }
            (Method::Post, SCENE_PATH) | (Method::Post, INPAINT_PATH) => self.generate(path, body),
            _ => (404, error_json("not_found", format!("{method} {path}"))),
        }
    }

    fn generate(&self, path: &str, body: &str) -> (u16, String) {
        let key = match serde_json::from_str::<serde_json::Value>(body) {
            Ok(v) => v.get("idempotency_key").and_then(|k| k.as_str()).unwrap_or_default().to_string(),
            Err(e) => return (400, error_json("bad_json", e.to_string())),
        };
        let (attempt, cached) = {
            let mut l = self.ledger.lock().unwrap();
            let n = l.attempts.entry(key.clone()).or_insert(0);
            *n += 1;
            (*n, l.cache.get(&key).cloned())
        };
        if let Fault::StallFirst(n) = self.cfg.fault {
            if attempt <= n {
                std::thread::sleep(self.cfg.stall);
            }
        }
        if let Fault::Status(code) = self.cfg.fault {
            return (code, error_json("injected", format!("status {code}")));
        }
        if let Some(reply) = cached {
            return (200, reply);
        }
        let result = if path == SCENE_PATH { self.scene(body) } else { self.inpaint(body) };
        match result {
            Ok(r) => {
                let text = serde_json::to_string(&GenReply::from_result(&r)).expect("serializable");
                let mut l = self.ledger.lock().unwrap();
                l.executions += 1;
                l.cache.insert(key, text.clone());
                (200, text)
            }
            Err(e) => (422, error_json("invalid_request", e)),
        }
    }

    fn scene(&self, body: &str) -> Result<GenResult, String> {
        let b: SceneBody = serde_json::from_str(body).map_err(|e| e.to_string())?;
        let map = b.semantic_map(&self.cfg.schema).map_err(|e| e.to_string())?;
        let attrs = parse_prompt(&b.prompt)
            .unwrap_or_else(|_| SceneAttributes::new(SceneKind::CityStreet, Weather::Clear, TimeOfDay::Daytime));
        let req = SceneGenRequest { semantic_map: map, prompt: build_prompt(&attrs.caption, &attrs), seed: b.seed };
        std::thread::sleep(self.cfg.latency);
        let mut r = self.stub.generate_scene(&req).map_err(|e| e.to_string())?;
        if self.cfg.fault == Fault::WrongDims {
            r.image = SceneImage::filled(r.image.width() + 1, r.image.height(), [0; 3]);
        }
        Ok(r)
    }

    fn inpaint(&self, body: &str) -> Result<GenResult, String> {
        let b: InpaintBody = serde_json::from_str(body).map_err(|e| e.to_string())?;
        let req = b.to_request().map_err(|e| e.to_string())?;
        std::thread::sleep(self.cfg.latency);
        let mut r = self.stub.inpaint(&req).map_err(|e| e.to_string())?;
        match self.cfg.fault {
            Fault::WrongDims => r.image = SceneImage::filled(r.image.width() + 1, r.image.height(), [0; 3]),
            Fault::DropMask => r.mask = None,
            Fault::Leakage => {
                let (w, h) = (r.image.width(), r.image.height());
                let x = if req.bbox.cx < w as f64 / 2.0 { w - 1 } else { 0 };
                let y = if req.bbox.cy < h as f64 / 2.0 { h - 1 } else { 0 };
                let p = r.image.pixel(x, y);
                r.image.set_pixel(x, y, [255 - p[0], 255 - p[1], 255 - p[2]]);
            }
            _ => {}
        }
        Ok(r)
    }
}

impl MockService {
    pub fn start(cfg: MockConfig) -> std::io::Result<Self> {
        let server = Arc::new(Server::http("127.0.0.1:0").map_err(std::io::Error::other)?);
        let port = server.server_addr().to_ip().map(|a| a.port()).ok_or_else(|| std::io::Error::other("no tcp address"))?;
        let shared = Arc::new(Shared {
            cfg,
            stub: StubBackend::default(),
            ledger: Mutex::new(Ledger::default()),
            active: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let (srv, sh) = (server.clone(), shared.clone());
        let worker = std::thread::spawn(move || {
            for mut rq in srv.incoming_requests() {
                let sh = sh.clone();
                std::thread::spawn(move || {
                    let now = sh.active.fetch_add(1, Ordering::SeqCst) + 1;
                    sh.peak.fetch_max(now, Ordering::SeqCst);
                    let mut body = String::new();
                    let (status, text) = match rq.as_reader().read_to_string(&mut body) {
                        Ok(_) => sh.handle(rq.method(), rq.url(), &body),
                        Err(e) => (400, error_json("bad_body", e.to_string())),
                    };
                    sh.active.fetch_sub(1, Ordering::SeqCst);
                    let _ = rq.respond(json_response(status, text));
                });
            }
        });
        Ok(MockService { server, shared, url: format!("http://127.0.0.1:{port}"), worker: Some(worker) })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Requests received carrying `key`, retries included.
    pub fn attempts(&self, key: &str) -> usize {
        self.shared.ledger.lock().unwrap().attempts.get(key).copied().unwrap_or(0)
    }

    /// Generation requests actually executed; cached retries are not counted.
    pub fn executions(&self) -> usize {
        self.shared.ledger.lock().unwrap().executions
    }

    /// Highest number of generation requests handled concurrently.
    pub fn peak_concurrency(&self) -> usize {
        self.shared.peak.load(Ordering::SeqCst)
    }
}

impl Drop for MockService {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}
